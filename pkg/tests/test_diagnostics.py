import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

import meanfield as mf
from meanfield.diagnostics import EIGHT_PI, ball_offsets
from meanfield.errors import InvalidArgumentError

from conftest import random_mean_zero, smooth_random


@pytest.fixture(scope="module")
def grid():
    return mf.build_grid(2 * math.pi, 64)


@pytest.mark.parametrize(
    "params,inside",
    [((26, 2), True), ((2, 26), True), ((26, 12), True), ((20, 2), False), ((30, 12), False), ((10, 5), False)],
)
def test_gate_examples(grid, params, inside):
    rep = mf.lambda_rho_gate(mf.InteractionParams(*params), grid)
    assert rep.in_lambda_rho is inside
    assert rep.recheck() is inside
    assert rep.mu1 * rep.volume == pytest.approx(4 * math.pi ** 2, rel=2e-3)
    assert rep.sum_margin == pytest.approx(rep.mu1 * rep.volume - sum(params))
    assert rep.max_margin == pytest.approx(max(params) - 8 * math.pi)


def test_gate_constants_and_coercive_flag(grid):
    assert EIGHT_PI == 25.132741228718345
    assert mf.lambda_rho_gate(mf.InteractionParams(10, 5), grid).coercive_regime
    assert not mf.lambda_rho_gate(mf.InteractionParams(26, 2), grid).coercive_regime
    assert set(mf.lambda_rho_gate(mf.InteractionParams(1, 1), grid).to_dict()) == {
        "in_lambda_rho", "mu1", "volume", "sum_margin", "max_margin", "coercive_regime"}


@settings(max_examples=60, deadline=None)
@given(a1=st.floats(0, 50), a2=st.floats(0, 50))
def test_gate_recheck_consistent(a1, a2):
    g = mf.build_grid(2 * math.pi, 16)
    rep = mf.lambda_rho_gate(mf.InteractionParams(a1, a2), g, mu1=0.99)
    assert rep.in_lambda_rho == rep.recheck()
    assert rep.in_lambda_rho == (rep.sum_margin > 0 and rep.max_margin > 0)


# exponential mass


def test_exp_mass_zero_and_symmetry(grid, rng):
    assert mf.exp_mass(grid.zeros()) == pytest.approx((4 * math.pi ** 2, 4 * math.pi ** 2))
    v = random_mean_zero(rng, grid)
    plus, minus = mf.exp_mass(v)
    assert mf.exp_mass(-v) == (minus, plus)


# Moser-Trudinger deficits


def test_deficit_of_zero(grid):
    rep = mf.moser_trudinger_deficit(grid.zeros(), mf.weight_preset(grid, "cosine:0.5"))
    assert rep.classical == 0 and rep.weighted == 0


@pytest.mark.parametrize("preset", ["const:1", "cosine:0.5", "bump:2:0.3", "const:0.3"])
def test_weighted_deficit_below_classical(preset):
    g = mf.build_grid(2 * math.pi, 32)
    rho = mf.weight_preset(g, preset)
    rng = np.random.default_rng(3)
    for _ in range(25):
        rep = mf.moser_trudinger_deficit(random_mean_zero(rng, g, rng.uniform(0.1, 5)), rho)
        assert rep.weighted <= rep.classical + 1e-12 * abs(rep.classical)


@pytest.mark.parametrize("frac", [8, 16, 32])
def test_bubble_deficit_resolution_stable(frac):
    vals = []
    for N in (64, 128):
        g = mf.build_grid(2 * math.pi, N)
        phi = mf.bubble_profile(g, g.L / frac)
        vals.append(mf.moser_trudinger_deficit(phi, mf.WeightField.constant(g)).classical)
    assert abs(vals[0] - vals[1]) <= 0.05 * abs(vals[1])


def test_bubble_profile_validation(grid):
    with pytest.raises(InvalidArgumentError):
        mf.bubble_profile(grid, 0.0)
    phi = mf.bubble_profile(grid, 0.3)
    assert abs(np.mean(phi.values)) < 1e-12
    assert np.unravel_index(np.argmax(phi.values), grid.shape) == (32, 32)


# concentration


@pytest.mark.parametrize("r", [0.3, 0.7, 1.2, 2.0])
def test_uniform_field_fraction_is_area_ratio(grid, r):
    rep = mf.concentration(grid.zeros(), r)
    count = len(ball_offsets(grid, r))
    assert rep.max_mass_fraction == pytest.approx(count * grid.h ** 2 / grid.volume, rel=1e-12)
    area = math.pi * r * r / grid.L ** 2
    assert abs(rep.max_mass_fraction - area) <= 2 * grid.h * 2 * math.pi * r / grid.L ** 2
    assert rep.center == (0, 0)  # all ties: lowest row-major index


def test_ball_count_exact_small_grid():
    g = mf.build_grid(4.0, 4)  # h = 1
    assert len(ball_offsets(g, 1.0)) == 5
    assert len(ball_offsets(g, math.sqrt(2))) == 9


def test_concentrated_bubble_dominates(grid):
    sigma = grid.L / 16
    v = mf.bubble_profile(grid, sigma) * 8.0
    rep = mf.concentration(v, 2 * sigma)
    assert rep.max_mass_fraction > 0.5
    assert rep.center == (32, 32)
    assert rep.sup_v == pytest.approx(np.max(v.values))
    assert rep.max_mass_fraction_minus < rep.max_mass_fraction


@settings(max_examples=25, deadline=None)
@given(seed=st.integers(0, 2 ** 32 - 1))
def test_fraction_monotone_in_radius(seed):
    g = mf.build_grid(2 * math.pi, 24)
    v = smooth_random(np.random.default_rng(seed), g, scale=3.0)
    fracs = [mf.concentration(v, g.L * k).max_mass_fraction for k in (1 / 16, 1 / 8, 1 / 4, 0.5)]
    assert all(0 <= f <= 1 for f in fracs)
    assert all(a <= b + 1e-15 for a, b in zip(fracs, fracs[1:]))


def test_ball_covering_torus_gives_one(grid, rng):
    v = random_mean_zero(rng, grid)
    rep = mf.concentration(v, grid.L * math.sqrt(2) / 2)
    assert rep.max_mass_fraction == 1.0 and rep.max_mass_fraction_minus == 1.0


@pytest.mark.parametrize("r", [0.0, -1.0, math.nan])
def test_concentration_rejects_bad_radius(grid, r):
    with pytest.raises(InvalidArgumentError):
        mf.concentration(grid.zeros(), r)
