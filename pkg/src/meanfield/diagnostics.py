"""Parameter gate, exponential-mass monitor, Moser-Trudinger deficits and
concentration reports."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import kernels
from .errors import InvalidArgumentError
from .functional import InteractionParams, log_partition_functions, project_zero_mean
from .manifold import ScalarField, TorusGrid, WeightField, dirichlet_energy, first_eigenvalue

EIGHT_PI = 8.0 * math.pi
MT_CONSTANT = 1.0 / (16.0 * math.pi)


@dataclass(frozen=True)
class GateReport:
    in_lambda_rho: bool
    sum_margin: float  # mu1*V - (a1 + a2); positive when the sum condition holds
    max_margin: float  # max(a1, a2) - 8 pi; positive when the max condition holds
    mu1: float
    volume: float
    alpha1: float
    alpha2: float
    coercive_regime: bool

    def recheck(self) -> bool:
        """Re-derive membership from the stored eigenvalue, volume and parameters."""
        a1, a2 = self.alpha1, self.alpha2
        return (a1 + a2 < self.mu1 * self.volume) and (max(a1, a2) > EIGHT_PI)

    def to_dict(self):
        return {
            "in_lambda_rho": self.in_lambda_rho,
            "mu1": self.mu1,
            "volume": self.volume,
            "sum_margin": self.sum_margin,
            "max_margin": self.max_margin,
            "coercive_regime": self.coercive_regime,
        }


def lambda_rho_gate(p: InteractionParams, grid: TorusGrid, mu1: float | None = None, seed: int = 0) -> GateReport:
    """Check ``a1 + a2 < mu1 |M|`` and ``max(a1, a2) > 8 pi``.

    ``mu1`` is the first nonzero eigenvalue of the unweighted Laplacian; it is
    computed when not supplied.
    """
    if mu1 is None:
        mu1 = first_eigenvalue(grid, seed=seed)
    volume = grid.volume
    total = p.alpha1 + p.alpha2
    top = max(p.alpha1, p.alpha2)
    return GateReport(
        in_lambda_rho=bool(total < mu1 * volume and top > EIGHT_PI),
        sum_margin=mu1 * volume - total,
        max_margin=top - EIGHT_PI,
        mu1=mu1,
        volume=volume,
        alpha1=p.alpha1,
        alpha2=p.alpha2,
        coercive_regime=bool(0 <= p.alpha1 <= EIGHT_PI and 0 <= p.alpha2 <= EIGHT_PI),
    )


def exp_mass(v: ScalarField):
    """``(int e^v, int e^-v)``, via log-sum-exp."""
    l1, l2 = log_partition_functions(v)
    with np.errstate(over="ignore"):
        return float(np.exp(l1)), float(np.exp(l2))


@dataclass(frozen=True)
class DeficitReport:
    classical: float
    weighted: float


def moser_trudinger_deficit(v: ScalarField, rho: WeightField) -> DeficitReport:
    """Deficits ``ln(Z1/V) - E/(16 pi)``.

    ``classical`` uses the unweighted Dirichlet energy; ``weighted`` uses
    ``||v||_rho**2 / rho_min``. Since ``||v||_rho**2 >= rho_min * E`` the
    weighted deficit never exceeds the classical one.
    """
    v = project_zero_mean(v)
    grid = v.grid
    l1, _ = log_partition_functions(v)
    log_avg = l1 - math.log(grid.volume)
    plain = kernels.dirichlet_energy(np.ones(grid.shape), v.values)
    weighted = dirichlet_energy(rho, v)
    return DeficitReport(
        classical=log_avg - MT_CONSTANT * plain,
        weighted=log_avg - MT_CONSTANT * weighted / rho.rho_min,
    )


def bubble_profile(grid: TorusGrid, sigma: float, center=None) -> ScalarField:
    """Zero-mean ``ln(sigma**2 / (sigma**2 + d**2)**2)`` centered at ``center``
    (default: the torus midpoint)."""
    if sigma <= 0:
        raise InvalidArgumentError(f"bubble width must be positive, got {sigma}")
    x0, y0 = center if center is not None else (grid.L / 2, grid.L / 2)
    d2 = grid.periodic_distance2(x0, y0)
    s2 = sigma * sigma
    phi = math.log(s2) - 2.0 * np.log(s2 + d2)
    return ScalarField(grid, phi - np.mean(phi))


def ball_offsets(grid: TorusGrid, r: float) -> np.ndarray:
    """Index offsets of the nodes within periodic distance ``r`` of a node."""
    n = grid.N
    k = np.arange(n)
    k = np.where(k < n - n // 2, k, k - n)  # minimal-image representatives
    di, dj = np.meshgrid(k, k, indexing="ij")
    mask = (di * grid.h) ** 2 + (dj * grid.h) ** 2 <= r * r
    return np.ascontiguousarray(np.stack([di[mask], dj[mask]], axis=1).astype(np.int64))


@dataclass(frozen=True)
class ConcentrationReport:
    radius: float
    max_mass_fraction: float
    center: tuple
    sup_v: float
    max_mass_fraction_minus: float
    center_minus: tuple
    sup_minus_v: float

    def to_dict(self):
        return {
            "r": self.radius,
            "fraction": self.max_mass_fraction,
            "center": list(self.center),
            "sup_v": self.sup_v,
            "fraction_minus": self.max_mass_fraction_minus,
            "center_minus": list(self.center_minus),
            "sup_minus_v": self.sup_minus_v,
        }


def _max_ball_fraction(w: np.ndarray, offsets: np.ndarray, covers_all: bool):
    if covers_all:
        return 1.0, (0, 0)
    sums = kernels.ball_sums(w, offsets)
    k = int(np.argmax(sums))  # first maximum: lowest row-major index
    frac = float(sums.ravel()[k] / np.sum(w))
    return min(max(frac, 0.0), 1.0), tuple(int(i) for i in np.unravel_index(k, w.shape))


def concentration(v: ScalarField, r: float) -> ConcentrationReport:
    """Largest fraction of ``e^v`` (and ``e^-v``) mass inside one periodic ball of radius ``r``."""
    if not (math.isfinite(r) and r > 0):
        raise InvalidArgumentError(f"radius must be positive, got {r}")
    project_zero_mean(v)  # finiteness check
    grid = v.grid
    vals = v.values
    offsets = ball_offsets(grid, r)
    covers_all = len(offsets) == grid.N * grid.N
    frac_p, c_p = _max_ball_fraction(np.exp(vals - vals.max()), offsets, covers_all)
    frac_m, c_m = _max_ball_fraction(np.exp(vals.min() - vals), offsets, covers_all)
    return ConcentrationReport(
        radius=float(r),
        max_mass_fraction=frac_p,
        center=c_p,
        sup_v=float(vals.max()),
        max_mass_fraction_minus=frac_m,
        center_minus=c_m,
        sup_minus_v=float(-vals.min()),
    )
