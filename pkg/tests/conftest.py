import numpy as np
import pytest

from cexpectile import SurvivalSample


def random_sample(rng, n=30, p=2, censor=0.3, intercept=False):
    """Small censored sample with log-normal-ish times; roughly ``censor`` censored."""
    x = rng.normal(size=(n, p))
    beta = rng.normal(size=p)
    t = np.exp(x @ beta + rng.normal(size=n))
    if censor == 0:
        c = np.full(n, np.inf)
    else:
        c = np.exp(rng.normal(size=n) + np.quantile(np.log(t), 1 - censor) + 0.5)
    y = np.minimum(t, c)
    delta = (t <= c).astype(int)
    return SurvivalSample.from_arrays(y, delta, x, intercept=intercept)


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


def pytest_configure(config):
    config.addinivalue_line("markers", "acceptance: end-to-end acceptance criteria")


def pytest_terminal_summary(terminalreporter):
    try:
        from test_acceptance import RESULTS
    except ImportError:
        return
    if RESULTS:
        terminalreporter.section("acceptance criteria")
        for line in RESULTS:
            terminalreporter.write_line(line)
