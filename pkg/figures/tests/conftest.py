import subprocess
import sys
from pathlib import Path

import pytest

REPO = Path(__file__).resolve().parents[2]


@pytest.fixture(scope="session")
def default_scenario_output(tmp_path_factory):
    """Run the default scenario through the simulator CLI (the external
    interface) and hand back its output directory."""
    out = tmp_path_factory.mktemp("scenario_out")
    result = subprocess.run(
        [sys.executable, "-m", "commutesim.cli", "simulate",
         str(REPO / "scenarios" / "default.cfg"), "--out", str(out)],
        capture_output=True, text=True, cwd=REPO,
    )
    assert result.returncode == 0, result.stderr
    return out
