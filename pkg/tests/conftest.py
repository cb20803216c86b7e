import pytest

from dcfdelay.macmodel import saturation_capacity
from dcfdelay.params import MacPhyParams, bundled_profile
from dcfdelay.sim import available_backends


@pytest.fixture(scope="session")
def profile() -> MacPhyParams:
    return bundled_profile()


@pytest.fixture(scope="session")
def capacity(profile) -> float:
    return saturation_capacity(profile)


@pytest.fixture(scope="session")
def classic_params() -> MacPhyParams:
    """Classic W=32, m=5 window with the same 802.11b timing."""
    return MacPhyParams(w_min=32, m_stages=5)


@pytest.fixture(params=available_backends())
def backend(request) -> str:
    return request.param


_ACCEPTANCE_KEY = pytest.StashKey[dict]()


@pytest.fixture(scope="session")
def acceptance(request):
    """Record ``acceptance(k, ok, detail)``; lines are printed in the terminal summary."""
    store = request.config.stash.setdefault(_ACCEPTANCE_KEY, {})

    def record(k: int, ok: bool, detail: str) -> None:
        store[k] = (bool(ok), detail)

    return record


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    store = config.stash.get(_ACCEPTANCE_KEY, None)
    if not store:
        return
    terminalreporter.section("acceptance criteria")
    for k in sorted(store):
        ok, detail = store[k]
        terminalreporter.write_line(f"criterion {k:2d}: {'PASS' if ok else 'FAIL'}  {detail}")
