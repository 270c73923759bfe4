import math

import mpmath
import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

import meanfield as mf
from meanfield.errors import InvalidArgumentError, InvalidFieldError

from conftest import PRESETS, random_mean_zero, smooth_random


@pytest.fixture(scope="module")
def grid32():
    return mf.build_grid(2 * math.pi, 32)


def test_interaction_params_validation():
    assert mf.InteractionParams(1, 2).swapped() == mf.InteractionParams(2, 1)
    for a1, a2 in [(-1, 0), (0, -0.5), (math.inf, 1), (math.nan, 1)]:
        with pytest.raises(InvalidArgumentError):
            mf.InteractionParams(a1, a2)


# projection


def test_projection_examples(grid32, rng):
    assert np.all(mf.project_zero_mean(grid32.constant(5.0)).values == 0)
    v = random_mean_zero(rng, grid32)
    np.testing.assert_allclose(mf.project_zero_mean(v).values, v.values, atol=1e-15)
    s = mf.ScalarField.from_function(grid32, lambda X, Y: np.sin(X))
    np.testing.assert_allclose(mf.project_zero_mean(s + 1.0).values, s.values, atol=1e-14)


@settings(max_examples=30, deadline=None)
@given(seed=st.integers(0, 2 ** 32 - 1), shift=st.floats(-1e3, 1e3))
def test_projection_mean_and_idempotence(seed, shift):
    g = mf.build_grid(1.0, 12)
    v = mf.ScalarField(g, np.random.default_rng(seed).standard_normal(g.shape) + shift)
    p = mf.project_zero_mean(v)
    norm = math.sqrt(mf.integrate(v * v))
    assert abs(mf.integrate(p)) <= 1e-13 * max(norm, 1.0)
    np.testing.assert_array_almost_equal(mf.project_zero_mean(p).values, p.values, decimal=12)


# partition functions


def test_partition_functions_of_zero():
    g = mf.build_grid(2 * math.pi, 16)
    z1, z2 = mf.partition_functions(g.zeros())
    assert z1 == pytest.approx(4 * math.pi ** 2) and z2 == pytest.approx(4 * math.pi ** 2)


def test_partition_functions_concentrated_node():
    g = mf.build_grid(2 * math.pi, 16)
    n2 = g.N * g.N
    vals = np.full(g.shape, -800.0 / (n2 - 1))
    vals[3, 4] = 800.0
    v = mf.ScalarField(g, vals)
    l1, l2 = mf.log_partition_functions(v)
    assert math.isfinite(l1) and math.isfinite(l2)
    with mpmath.workdps(50):
        oracle1 = mpmath.log(mpmath.mpf(g.h) ** 2 * mpmath.fsum(mpmath.exp(mpmath.mpf(float(x))) for x in vals.ravel()))
        oracle2 = mpmath.log(mpmath.mpf(g.h) ** 2 * mpmath.fsum(mpmath.exp(-mpmath.mpf(float(x))) for x in vals.ravel()))
    assert l1 == pytest.approx(float(oracle1), rel=1e-14)
    assert l2 == pytest.approx(float(oracle2), rel=1e-13)
    assert l1 == pytest.approx(800 + math.log(g.h ** 2), rel=1e-12)


@pytest.mark.parametrize("amp", [1e2, 1e3, 1e4])
def test_log_partition_overflow_robust(amp, rng):
    g = mf.build_grid(1.0, 16)
    v = rng.standard_normal(g.shape)
    v *= amp / np.max(np.abs(v))
    l1, l2 = mf.log_partition_functions(mf.ScalarField(g, v))
    assert math.isfinite(l1) and math.isfinite(l2)


def test_partition_functions_reject_nan():
    g = mf.build_grid(1.0, 4)
    v = mf.ScalarField(g, np.zeros(g.shape))
    v.values[0, 0] = np.nan  # bypass constructor check
    with pytest.raises(InvalidFieldError):
        mf.partition_functions(v)


@settings(max_examples=50, deadline=None)
@given(seed=st.integers(0, 2 ** 32 - 1), scale=st.floats(0.01, 20.0))
def test_jensen_bounds(seed, scale):
    g = mf.build_grid(2 * math.pi, 12)
    v = random_mean_zero(np.random.default_rng(seed), g, scale)
    l1, l2 = mf.log_partition_functions(v)
    logv = math.log(g.volume)
    assert l1 - logv >= -1e-12 and l2 - logv >= -1e-12
    z1, z2 = mf.partition_functions(v)
    assert z1 * z2 >= g.volume ** 2 * (1 - 1e-12)
    m_plus, m_minus = mf.exp_mass(v)
    assert m_plus >= g.volume * (1 - 1e-12) and m_minus >= g.volume * (1 - 1e-12)


# evaluate


@pytest.mark.parametrize("preset", PRESETS)
def test_evaluate_zero_field(preset, grid32):
    rep = mf.evaluate(grid32.zeros(), mf.weight_preset(grid32, preset), mf.InteractionParams(26, 2))
    assert rep.value == 0 and rep.kinetic == 0
    assert rep.log_term1 == pytest.approx(0, abs=1e-14) and rep.log_term2 == pytest.approx(0, abs=1e-14)
    assert rep.grad_norm <= 1e-12


def test_report_reconstructs_value(grid32, rng):
    rho = mf.weight_preset(grid32, "cosine:0.5")
    p = mf.InteractionParams(13.0, 4.5)
    rep = mf.evaluate(smooth_random(rng, grid32, scale=2.0), rho, p)
    assert rep.value == pytest.approx(rep.kinetic - p.alpha1 * rep.log_term1 - p.alpha2 * rep.log_term2, rel=1e-14)
    assert rep.log_term1 == pytest.approx(math.log(rep.z1 / grid32.volume), rel=1e-12)
    assert rep.value <= rep.kinetic


@pytest.mark.parametrize("preset", PRESETS)
def test_symmetry_equal_params(preset, grid32, rng):
    rho = mf.weight_preset(grid32, preset)
    p = mf.InteractionParams(9.0, 9.0)
    v = random_mean_zero(rng, grid32)
    assert mf.evaluate(v, rho, p).value == mf.evaluate(-v, rho, p).value


@settings(max_examples=40, deadline=None)
@given(seed=st.integers(0, 2 ** 32 - 1), a1=st.floats(0, 60), a2=st.floats(0, 60), preset=st.sampled_from(PRESETS))
def test_parameter_swap_exact(seed, a1, a2, preset):
    g = mf.build_grid(2 * math.pi, 16)
    rho = mf.weight_preset(g, preset)
    v = random_mean_zero(np.random.default_rng(seed), g, 2.0)
    p = mf.InteractionParams(a1, a2)
    left = mf.evaluate(-v, rho, p)
    right = mf.evaluate(v, rho, p.swapped())
    assert left.value == right.value
    assert left.kinetic == right.kinetic


@pytest.mark.parametrize("preset", PRESETS)
def test_shift_identity(preset, grid32, rng):
    rho = mf.weight_preset(grid32, preset)
    p = mf.InteractionParams(26.0, 2.0)
    v = random_mean_zero(rng, grid32)
    c = 0.7
    diff = mf.evaluate(v + c, rho, p, project=False).value - mf.evaluate(v, rho, p, project=False).value
    assert abs(diff - (p.alpha2 - p.alpha1) * c) < 1e-10


# gradient


@pytest.mark.parametrize("preset", PRESETS)
def test_gradient_of_zero_is_zero(preset, grid32):
    g = mf.gradient(grid32.zeros(), mf.weight_preset(grid32, preset), mf.InteractionParams(30, 7))
    assert np.max(np.abs(g.values)) == pytest.approx(0, abs=1e-14)


@pytest.mark.parametrize("preset", PRESETS)
def test_gradient_finite_difference(preset, grid32):
    rng = np.random.default_rng(7)
    rho = mf.weight_preset(grid32, preset)
    p = mf.InteractionParams(26.0, 2.0)
    eps = 1e-5
    for _ in range(10):
        v, w = random_mean_zero(rng, grid32, 0.5), random_mean_zero(rng, grid32, 0.5)
        g = mf.gradient(v, rho, p)
        fd = (mf.evaluate(v + w * eps, rho, p).value - mf.evaluate(v - w * eps, rho, p).value) / (2 * eps)
        exact = mf.inner(g, w)
        assert abs(fd - exact) <= 1e-6 * (1 + abs(exact))


@settings(max_examples=30, deadline=None)
@given(seed=st.integers(0, 2 ** 32 - 1), preset=st.sampled_from(PRESETS))
def test_gradient_mean_zero(seed, preset):
    g = mf.build_grid(2 * math.pi, 16)
    v = random_mean_zero(np.random.default_rng(seed), g, 3.0)
    grad = mf.gradient(v, mf.weight_preset(g, preset), mf.InteractionParams(26, 12))
    norm = math.sqrt(mf.integrate(grad * grad))
    assert abs(np.mean(grad.values)) <= 1e-12 * max(norm, 1e-300) + 1e-300


def test_residual_linear_in_perturbation(grid32, rng):
    rho = mf.weight_preset(grid32, "bump:2:0.3")
    p = mf.InteractionParams(26.0, 2.0)
    w = smooth_random(rng, grid32)
    eps = np.array([1e-2, 1e-3, 1e-4])
    res = np.array([mf.residual_norm(w * e, rho, p) for e in eps])
    slope = np.polyfit(np.log(eps), np.log(res), 1)[0]
    assert slope == pytest.approx(1.0, abs=0.02)
    assert mf.residual_norm(grid32.zeros(), rho, p) == 0


def test_nan_input_raises(grid32):
    v = grid32.zeros()
    v.values[2, 2] = np.nan
    rho = mf.weight_preset(grid32, "const:1")
    p = mf.InteractionParams(1, 1)
    for fn in (mf.evaluate, mf.gradient, mf.residual_norm):
        with pytest.raises(InvalidFieldError):
            fn(v, rho, p)
