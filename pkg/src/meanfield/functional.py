"""Energy functional of the weighted mean field equation and its gradient.

For a zero-mean field ``v`` on the torus,

    I(v) = 1/2 ||v||_rho**2 - a1 ln(Z1 / V) - a2 ln(Z2 / V),
    Z1 = int e^v,  Z2 = int e^-v,

and the gradient with respect to the quadrature L2 inner product is

    g = A_rho v - a1 (e^v / Z1 - 1/V) + a2 (e^-v / Z2 - 1/V).

The ``-1/V`` terms are produced by projecting onto zero mean. Exponential
integrals always go through log-sum-exp, so strongly concentrated fields
do not overflow.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import kernels
from .errors import InvalidArgumentError, InvalidFieldError
from .manifold import ScalarField, WeightField, check_same_grid, integrate


@dataclass(frozen=True)
class InteractionParams:
    alpha1: float
    alpha2: float

    def __post_init__(self):
        for name in ("alpha1", "alpha2"):
            val = getattr(self, name)
            if not (isinstance(val, (int, float)) and math.isfinite(val) and val >= 0):
                raise InvalidArgumentError(f"{name} must be finite and >= 0, got {val!r}")
            object.__setattr__(self, name, float(val))

    def swapped(self) -> "InteractionParams":
        return InteractionParams(self.alpha2, self.alpha1)


@dataclass(frozen=True)
class FunctionalReport:
    value: float
    kinetic: float
    z1: float
    z2: float
    log_term1: float
    log_term2: float
    grad_norm: float
    ln_z1: float
    ln_z2: float


def _check(v: ScalarField) -> None:
    if not np.all(np.isfinite(v.values)):
        raise InvalidFieldError("field contains NaN or Inf")


def _log_mean_exp(x: np.ndarray) -> float:
    m = float(np.max(x))
    return m + math.log(float(np.mean(np.exp(x - m))))


def log_averages(v: np.ndarray):
    """``(ln(Z1/V), ln(Z2/V))`` as log-mean-exp; exactly zero for ``v = 0``."""
    return _log_mean_exp(v), _log_mean_exp(-v)


def log_partition_arrays(v: np.ndarray, h: float):
    n2 = v.size
    log_v = math.log(h * h * n2)
    t1, t2 = log_averages(v)
    return t1 + log_v, t2 + log_v


def project_zero_mean(v: ScalarField) -> ScalarField:
    _check(v)
    return ScalarField(v.grid, v.values - np.mean(v.values))


def log_partition_functions(v: ScalarField):
    """``(ln Z1, ln Z2)``; finite for any finite field."""
    _check(v)
    return log_partition_arrays(v.values, v.grid.h)


def partition_functions(v: ScalarField):
    """``(Z1, Z2)``.

    The values are exponentiated from their logarithms, so they are exact
    whenever they fit in a double; past ~1e308 they come back as ``inf``
    and :func:`log_partition_functions` should be used instead.
    """
    l1, l2 = log_partition_functions(v)
    with np.errstate(over="ignore"):
        return float(np.exp(l1)), float(np.exp(l2))


def _energy_parts(rho: np.ndarray, v: np.ndarray, h: float, volume: float, p: InteractionParams):
    kinetic = 0.5 * kernels.dirichlet_energy(rho, v)
    t1, t2 = log_averages(v)
    log_v = math.log(volume)
    l1, l2 = t1 + log_v, t2 + log_v
    # grouped so that swapping (a1, a2) together with v -> -v is exact
    return kinetic - (p.alpha1 * t1 + p.alpha2 * t2), kinetic, t1, t2, l1, l2


def energy_array(rho: np.ndarray, v: np.ndarray, h: float, volume: float, p: InteractionParams) -> float:
    return _energy_parts(rho, v, h, volume, p)[0]


def gradient_array(rho: np.ndarray, v: np.ndarray, h: float, p: InteractionParams) -> np.ndarray:
    h2 = h * h
    g = kernels.weighted_laplacian(rho, v, h)
    if p.alpha1:
        w = np.exp(v - np.max(v))
        g -= p.alpha1 * w / (h2 * np.sum(w))
    if p.alpha2:
        w = np.exp(np.min(v) - v)
        g += p.alpha2 * w / (h2 * np.sum(w))
    g -= np.mean(g)
    return g


def evaluate(
    v: ScalarField,
    rho: WeightField,
    p: InteractionParams,
    project: bool = True,
    with_gradient: bool = True,
) -> FunctionalReport:
    """Evaluate the functional and its decomposition at ``v``.

    ``v`` is projected to zero mean first unless ``project=False`` (used to
    check the shift identity on raw fields).
    """
    grid = check_same_grid(rho.field, v)
    _check(v)
    vals = v.values - np.mean(v.values) if project else v.values
    value, kinetic, t1, t2, l1, l2 = _energy_parts(rho.values, vals, grid.h, grid.volume, p)
    grad_norm = float("nan")
    if with_gradient:
        g = gradient_array(rho.values, vals, grid.h, p)
        grad_norm = math.sqrt(grid.h ** 2 * float(np.sum(g * g)))
    with np.errstate(over="ignore"):
        z1, z2 = float(np.exp(l1)), float(np.exp(l2))
    return FunctionalReport(
        value=value,
        kinetic=kinetic,
        z1=z1,
        z2=z2,
        log_term1=t1,
        log_term2=t2,
        grad_norm=grad_norm,
        ln_z1=l1,
        ln_z2=l2,
    )


def energy(v: ScalarField, rho: WeightField, p: InteractionParams, project: bool = True) -> float:
    return evaluate(v, rho, p, project=project, with_gradient=False).value


def gradient(v: ScalarField, rho: WeightField, p: InteractionParams) -> ScalarField:
    grid = check_same_grid(rho.field, v)
    _check(v)
    return ScalarField(grid, gradient_array(rho.values, v.values, grid.h, p))


def residual_norm(v: ScalarField, rho: WeightField, p: InteractionParams) -> float:
    """Quadrature L2 norm of the constrained gradient."""
    g = gradient(v, rho, p)
    return math.sqrt(integrate(g * g))
