import numpy as np
import pytest


@pytest.fixture
def rng():
    return np.random.default_rng(20240601)


def _nonlinear_lagrangian(d):
    """Convex, non-quadratic test Lagrangian ``|v|^2/2 + |v|^4/4 + y^4/4 - sin(x_1) y``."""
    from varcoherence.problem import LagrangianFn

    def L(x, y, v):
        s = np.einsum("...i,...i->...", v, v)
        return 0.5 * s + 0.25 * s**2 + 0.25 * y**4 - np.sin(x[..., 0]) * y

    def dL_dy(x, y, v):
        return y**3 - np.sin(x[..., 0])

    def dL_dv(x, y, v):
        s = np.einsum("...i,...i->...", v, v)
        return v * (1.0 + s)[..., None]

    return LagrangianFn(d, L, dL_dy, dL_dv, convex=True)


@pytest.fixture
def nonlinear_lagrangian():
    return _nonlinear_lagrangian


# {{{ acceptance verdicts

N_CRITERIA = 14
_VERDICTS: dict[int, str] = {}


@pytest.fixture
def verdict():
    """Record and print one PASS/FAIL line for an acceptance criterion, then assert it."""

    def record(n: int, title: str, ok: bool, detail: str = "") -> None:
        line = f"[criterion {n:2d}] {'PASS' if ok else 'FAIL'}  {title}" + (f"  ({detail})" if detail else "")
        _VERDICTS[n] = line
        print(line)
        assert ok, line

    return record


def pytest_terminal_summary(terminalreporter):
    if not _VERDICTS:
        return
    terminalreporter.section("acceptance criteria")
    for n in range(1, N_CRITERIA + 1):
        terminalreporter.write_line(_VERDICTS.get(n, f"[criterion {n:2d}] FAIL  did not complete"))


# }}}
