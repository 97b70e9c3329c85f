import pytest

from nctwrc import ChannelConfig, ModelParams, build_model

# Channel used by all bundled figure specs.
FIG_DOPPLER = 0.0065

_criteria = {}


def channel(snr_db=0.0, K=8, doppler=FIG_DOPPLER):
    return ChannelConfig.from_db(K, snr_db, doppler)


def fig_params(**over):
    """Parameters of the fig4 recipe with overrides."""
    base = dict(L1=3, L2=3, p1=0.1, p2=0.2, lambda_hold=0.05, xi_overflow=4.0,
                tau_tx=1.0, eta_err=2.0, beta=0.97, channel1=channel(), channel2=channel())
    base.update(over)
    return ModelParams(**base)


@pytest.fixture(scope="session")
def fig4_model():
    return build_model(fig_params())


@pytest.fixture(scope="session")
def fig4_vi(fig4_model):
    from nctwrc import value_iteration
    return value_iteration(fig4_model)


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    rep = outcome.get_result()
    marker = item.get_closest_marker("criterion")
    if marker is None:
        return
    n = marker.args[0]
    doc = (item.function.__doc__ or item.name).strip().splitlines()[0]
    if rep.when == "call" or (rep.when == "setup" and rep.failed):
        prev = _criteria.get(n, (True, doc))
        _criteria[n] = (prev[0] and rep.passed, prev[1])


def pytest_terminal_summary(terminalreporter):
    if not _criteria:
        return
    tr = terminalreporter
    tr.section("acceptance criteria")
    for n in sorted(_criteria):
        ok, doc = _criteria[n]
        tr.write_line(f"criterion {n:>2}: {'PASS' if ok else 'FAIL'}  {doc}")
