import sys
from pathlib import Path

import pytest

sys.path.insert(0, str(Path(__file__).parent))

from dpa_clt.params import P_STAR  # noqa: E402

# Acceptance ensemble: fixed before any acceptance run.
ACCEPT_SEED = 20261019
ACCEPT_N = 200_000
ACCEPT_MID = 100_000
ACCEPT_RUNS = 1000
ACCEPT_WINDOW = (2, 2)

AC_RESULTS: dict[int, tuple[bool, str]] = {}


@pytest.fixture(scope="session")
def acceptance_ensemble():
    from dpa_clt.verify import run_ensemble

    return run_ensemble(
        P_STAR, ACCEPT_N, ACCEPT_RUNS, ACCEPT_SEED, ACCEPT_WINDOW, checkpoints=[ACCEPT_MID]
    )


@pytest.fixture
def record_ac():
    def record(k: int, ok: bool, detail: str) -> None:
        AC_RESULTS[k] = (bool(ok), detail)
        print(f"AC{k}: {'PASS' if ok else 'FAIL'} {detail}")

    return record


def pytest_terminal_summary(terminalreporter):
    if not AC_RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for k in sorted(AC_RESULTS):
        ok, detail = AC_RESULTS[k]
        terminalreporter.write_line(f"AC{k:<2} {'PASS' if ok else 'FAIL'}  {detail}")
