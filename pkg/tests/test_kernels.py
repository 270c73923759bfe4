import math
import os
import subprocess
import sys

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from meanfield import _kernels_py, kernels
from meanfield.diagnostics import ball_offsets
from meanfield.manifold import TorusGrid

compiled = pytest.importorskip("meanfield._kernels", reason="compiled extension not built")


@settings(max_examples=30, deadline=None)
@given(seed=st.integers(0, 2 ** 32 - 1), n=st.integers(4, 40), h=st.floats(1e-3, 2.0))
def test_stencil_backends_agree(seed, n, h):
    rng = np.random.default_rng(seed)
    rho = 0.1 + rng.random((n, n))
    v = rng.standard_normal((n, n))
    a, b = compiled.weighted_laplacian(rho, v, h), _kernels_py.weighted_laplacian(rho, v, h)
    np.testing.assert_allclose(a, b, rtol=1e-12, atol=1e-12 * np.max(np.abs(b)))
    ea, eb = compiled.dirichlet_energy(rho, v), _kernels_py.dirichlet_energy(rho, v)
    assert ea == pytest.approx(eb, rel=1e-12)


@settings(max_examples=20, deadline=None)
@given(seed=st.integers(0, 2 ** 32 - 1), n=st.integers(4, 24), frac=st.floats(0.01, 0.8))
def test_ball_sums_backends_bitwise(seed, n, frac):
    grid = TorusGrid(1.0, n)
    w = np.random.default_rng(seed).random((n, n))
    off = ball_offsets(grid, frac)
    assert np.array_equal(compiled.ball_sums(w, off), _kernels_py.ball_sums(w, off))


def test_default_backend_is_compiled():
    if os.environ.get("MEANFIELD_PURE_PYTHON", "") not in ("", "0"):
        pytest.skip("fallback forced by environment")
    assert kernels.BACKEND == "cython" and kernels.compiled_available()


def test_environment_forces_fallback():
    env = dict(os.environ, MEANFIELD_PURE_PYTHON="1")
    code = ("import math, meanfield as mf; print(mf.BACKEND); "
            "g = mf.build_grid(2*math.pi, 32); print(repr(mf.first_eigenvalue(g)))")
    out = subprocess.run([sys.executable, "-c", code], env=env, capture_output=True, text=True, check=True)
    backend, mu = out.stdout.split()
    assert backend == "python"
    assert float(mu) == pytest.approx(4 / (2 * math.pi / 32) ** 2 * math.sin(math.pi / 32) ** 2, rel=1e-9)


def test_fallback_solver_matches_compiled():
    env = dict(os.environ, MEANFIELD_PURE_PYTHON="1")
    code = ("import math, meanfield as mf; g = mf.build_grid(2*math.pi, 32); "
            "r = mf.solve(mf.weight_preset(g, 'const:1'), mf.InteractionParams(26, 2)); "
            "print(r.status, repr(r.level))")
    out = subprocess.run([sys.executable, "-c", code], env=env, capture_output=True, text=True, check=True)
    status, level = out.stdout.split()
    import meanfield as mf

    g = mf.build_grid(2 * math.pi, 32)
    ref = mf.solve(mf.weight_preset(g, "const:1"), mf.InteractionParams(26, 2))
    assert status == ref.status
    assert float(level) == pytest.approx(ref.level, rel=1e-9)
