import math

import numpy as np
import pytest

import meanfield as mf

PRESETS = ("const:1", "cosine:0.5", "bump:2:0.3")

# (criterion number, passed, detail) tuples filled in by test_acceptance.py
ACCEPTANCE_LINES = []


def random_mean_zero(rng, grid, scale=1.0):
    v = rng.standard_normal(grid.shape) * scale
    return mf.ScalarField(grid, v - v.mean())


def smooth_random(rng, grid, modes=3, scale=1.0):
    """Band-limited random field with zero mean."""
    X, Y = grid.coords()
    k = 2 * math.pi / grid.L
    v = np.zeros(grid.shape)
    for a in range(-modes, modes + 1):
        for b in range(-modes, modes + 1):
            if a == 0 and b == 0:
                continue
            c, s = rng.standard_normal(2) / (1 + a * a + b * b)
            v += c * np.cos(k * (a * X + b * Y)) + s * np.sin(k * (a * X + b * Y))
    return mf.ScalarField(grid, scale * (v - v.mean()))


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


@pytest.fixture(scope="session")
def grid64():
    return mf.build_grid(2 * math.pi, 64)


@pytest.fixture(scope="session")
def rho64(grid64):
    return mf.weight_preset(grid64, "const:1")


@pytest.fixture(scope="session")
def theorem_run(grid64, rho64):
    """The (26, 2) solve on the default configuration, shared across modules."""
    return mf.solve(rho64, mf.InteractionParams(26.0, 2.0))


@pytest.fixture(scope="session")
def conjugate_run(grid64, rho64):
    return mf.solve(rho64, mf.InteractionParams(2.0, 26.0))


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE_LINES:
        return
    terminalreporter.section("acceptance criteria")
    for num, ok, detail in sorted(ACCEPTANCE_LINES, key=lambda t: t[0]):
        terminalreporter.write_line(f"criterion {num:>2}: {'PASS' if ok else 'FAIL'}  {detail}")
