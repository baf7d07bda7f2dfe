import sys
from pathlib import Path

import pytest

sys.path.insert(0, str(Path(__file__).parent))

from jjchain import ChainParams, build_hamiltonian  # noqa: E402

ACCEPTANCE_RESULTS = {}


@pytest.fixture
def fig5_params():
    return ChainParams(7, 10.0, 0.1)


@pytest.fixture
def clean7():
    """L=7 chain with C/C0 = 0, the static-disorder reference."""
    return build_hamiltonian(ChainParams(7, 10.0, 0.0))


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE_RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for key in sorted(ACCEPTANCE_RESULTS, key=lambda k: int(k.split()[0])):
        ok, detail = ACCEPTANCE_RESULTS[key]
        terminalreporter.write_line(f"[{'PASS' if ok else 'FAIL'}] criterion {key}: {detail}")
