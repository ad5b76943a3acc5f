import subprocess
import sys
from pathlib import Path

import pytest

SCRIPTS = Path(__file__).resolve().parent.parent / "scripts"


@pytest.mark.parametrize("name", ["slo_sweep", "resource_sweep", "policy_comparison", "dag_placement",
                                  "epoch_sensitivity"])
def test_script_runs(name, tmp_path):
    proc = subprocess.run([sys.executable, str(SCRIPTS / f"{name}.py"), "--out-dir", str(tmp_path)],
                          capture_output=True, text=True, timeout=120)
    assert proc.returncode == 0, proc.stderr
    lines = (tmp_path / f"{name}.csv").read_text().splitlines()
    assert len(lines) >= 2
