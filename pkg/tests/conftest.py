import numpy as np
import pytest


def random_spd(rng, n, cond_spread=True):
    """Random SPD matrix with a mix of scales on the diagonal."""
    A = rng.standard_normal((n, n))
    M = A @ A.T / n + 0.1 * np.eye(n)
    if cond_spread:
        s = np.exp(rng.uniform(-1.5, 1.5, n))
        M = s[:, None] * M * s[None, :]
    return (M + M.T) / 2


def spd_grid(count=50, seed=2024, nmin=3, nmax=30):
    """(M, tau) pairs with n in [nmin, nmax] and integer tau in [2, n-1]."""
    rng = np.random.default_rng(seed)
    out = []
    for _ in range(count):
        n = int(rng.integers(nmin, nmax + 1))
        tau = int(rng.integers(2, n)) if n > 2 else 1
        out.append((random_spd(rng, n), tau))
    return out


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


# one summary line per acceptance criterion
_CRITERIA = {}


def pytest_runtest_logreport(report):
    if "test_acceptance.py" not in report.nodeid:
        return
    props = dict(report.user_properties)
    if "criterion" not in props:
        return
    if report.when == "call" or (report.when == "setup" and report.failed):
        _CRITERIA[props["criterion"]] = (report.passed, props.get("detail", ""))


def pytest_terminal_summary(terminalreporter):
    if not _CRITERIA:
        return
    terminalreporter.section("acceptance criteria")
    for num in sorted(_CRITERIA):
        ok, detail = _CRITERIA[num]
        terminalreporter.write_line(f"criterion {num:2d}: {'PASS' if ok else 'FAIL'}  {detail}")
