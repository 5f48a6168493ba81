import numpy as np
import pytest

from fluxharmonics.embedding import DAYS_PER_YEAR


def tone(f, years, phase=0.0, amplitude=1.0):
    """Daily samples of a sine at ``f`` cycles per year."""
    n = int(round(years * DAYS_PER_YEAR))
    t = np.arange(n) / DAYS_PER_YEAR
    return amplitude * np.sin(2 * np.pi * f * t + phase)


def exact_tone(f, n, dt_years):
    """Sine that falls exactly on a Fourier bin of an n-sample record."""
    t = np.arange(n) * dt_years
    return np.sin(2 * np.pi * f * t)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


# one summary line per acceptance criterion, printed after the run
_CRITERIA = []


def pytest_configure(config):
    config.addinivalue_line("markers", "criterion(number, title): acceptance criterion")


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    rep = outcome.get_result()
    marker = item.get_closest_marker("criterion")
    if marker is None or rep.when != "call":
        return
    number, title = marker.args
    detail = dict(item.user_properties).get("detail", "")
    status = "PASS" if rep.passed else "FAIL"
    line = f"[{status}] criterion {number}: {title}" + (f" ({detail})" if detail else "")
    _CRITERIA.append((number, line))
    print("\n" + line)


def pytest_terminal_summary(terminalreporter):
    if _CRITERIA:
        terminalreporter.section("acceptance criteria")
        for _, line in sorted(_CRITERIA):
            terminalreporter.write_line(line)
