"""Flat square torus discretization.

Fields live on an ``N x N`` periodic grid of spacing ``h = L/N``. The
weighted operator ``A_rho v = -div(rho grad v)`` and the weighted Dirichlet
energy are built from the same staggered face fluxes, so

    h**2 * sum(v * A_rho v) == dirichlet_energy(rho, v)

holds as an algebraic identity (up to rounding), not merely to O(h**2).
Face weights are the arithmetic mean of the two adjacent node values.
"""

from __future__ import annotations

import math
import re
from dataclasses import dataclass
from functools import cached_property
from pathlib import Path

import numpy as np
import scipy.sparse as sp
from scipy.sparse.linalg import splu

from . import kernels
from .errors import (
    ConvergenceError,
    FieldFormatError,
    GridMismatchError,
    InvalidArgumentError,
    InvalidFieldError,
)

DEGENERATE_RHO_RATIO = 1e-6


@dataclass(frozen=True)
class TorusGrid:
    L: float
    N: int

    def __post_init__(self):
        if not (isinstance(self.L, (int, float)) and math.isfinite(self.L) and self.L > 0):
            raise InvalidArgumentError(f"side length must be positive, got {self.L!r}")
        if int(self.N) != self.N or self.N < 4:
            raise InvalidArgumentError(f"points per side must be an integer >= 4, got {self.N!r}")
        object.__setattr__(self, "L", float(self.L))
        object.__setattr__(self, "N", int(self.N))

    @property
    def h(self) -> float:
        return self.L / self.N

    @property
    def volume(self) -> float:
        return self.L * self.L

    @property
    def shape(self):
        return (self.N, self.N)

    def coords(self):
        """Node coordinates ``(X, Y)`` with ``X[i, j] = i*h``, ``Y[i, j] = j*h``."""
        x = np.arange(self.N) * self.h
        return np.meshgrid(x, x, indexing="ij")

    def periodic_distance2(self, x0: float, y0: float) -> np.ndarray:
        """Squared flat-torus distance from every node to ``(x0, y0)``."""
        X, Y = self.coords()
        dx = np.abs(X - x0) % self.L
        dy = np.abs(Y - y0) % self.L
        dx = np.minimum(dx, self.L - dx)
        dy = np.minimum(dy, self.L - dy)
        return dx * dx + dy * dy

    def wrap(self, i: int, j: int):
        return (i % self.N, j % self.N)

    def zeros(self) -> "ScalarField":
        return ScalarField(self, np.zeros(self.shape))

    def constant(self, c: float) -> "ScalarField":
        return ScalarField(self, np.full(self.shape, float(c)))


def build_grid(L: float, N: int) -> TorusGrid:
    return TorusGrid(L, N)


class ScalarField:
    """Grid samples of a scalar function, stored as an ``(N, N)`` array.

    Row-major flattening (``values.ravel()``) gives the ``N**2`` sample vector.
    """

    __slots__ = ("grid", "values")

    def __init__(self, grid: TorusGrid, values):
        arr = np.array(values, dtype=np.float64, copy=True)
        if arr.size != grid.N * grid.N:
            raise InvalidFieldError(f"expected {grid.N * grid.N} samples, got {arr.size}")
        arr = np.ascontiguousarray(arr.reshape(grid.shape))
        if not np.all(np.isfinite(arr)):
            raise InvalidFieldError("field contains NaN or Inf")
        self.grid = grid
        self.values = arr

    @classmethod
    def from_function(cls, grid: TorusGrid, fn) -> "ScalarField":
        X, Y = grid.coords()
        return cls(grid, fn(X, Y))

    @property
    def flat(self) -> np.ndarray:
        return self.values.ravel()

    def copy(self) -> "ScalarField":
        return ScalarField(self.grid, self.values)

    def _other(self, other):
        if isinstance(other, ScalarField):
            check_same_grid(self, other)
            return other.values
        return other

    def __add__(self, other):
        return ScalarField(self.grid, self.values + self._other(other))

    __radd__ = __add__

    def __sub__(self, other):
        return ScalarField(self.grid, self.values - self._other(other))

    def __rsub__(self, other):
        return ScalarField(self.grid, self._other(other) - self.values)

    def __mul__(self, other):
        return ScalarField(self.grid, self.values * self._other(other))

    __rmul__ = __mul__

    def __truediv__(self, other):
        return ScalarField(self.grid, self.values / self._other(other))

    def __neg__(self):
        return ScalarField(self.grid, -self.values)

    def __repr__(self):
        return f"ScalarField(L={self.grid.L}, N={self.grid.N}, max={self.values.max():.6g}, min={self.values.min():.6g})"


def check_same_grid(*fields) -> TorusGrid:
    grid = fields[0].grid
    for f in fields[1:]:
        if f.grid != grid:
            raise GridMismatchError(f"fields live on different grids: {grid} vs {f.grid}")
    return grid


def require_finite(v: ScalarField) -> None:
    if not np.all(np.isfinite(v.values)):
        raise InvalidFieldError("field contains NaN or Inf")


class WeightField:
    """Strictly positive weight rho sampled on the grid."""

    def __init__(self, rho: ScalarField):
        require_finite(rho)
        vals = rho.values
        if np.any(vals <= 0):
            raise InvalidArgumentError(f"weight must be positive everywhere (min = {vals.min():.6g})")
        self.field = rho
        self.rho_min = float(vals.min())
        self.rho_max = float(vals.max())

    @property
    def grid(self) -> TorusGrid:
        return self.field.grid

    @property
    def values(self) -> np.ndarray:
        return self.field.values

    @property
    def degenerate(self) -> bool:
        """True when rho_min is tiny compared to rho_max (reported, not rejected)."""
        return self.rho_min < DEGENERATE_RHO_RATIO * self.rho_max

    @property
    def is_uniform(self) -> bool:
        return self.rho_min == self.rho_max

    @cached_property
    def _grounded_lu(self):
        # node 0 is grounded; its row is implied because rows of A sum to zero
        A = laplacian_matrix(self.grid, self).tocsc()
        return splu(A[1:, 1:].tocsc())

    def solve(self, g: np.ndarray) -> np.ndarray:
        """Zero-mean solution ``d`` of ``A_rho d = g - mean(g)``."""
        n = self.grid.N
        rhs = g.ravel() - g.mean()
        out = np.empty(n * n)
        out[0] = 0.0
        out[1:] = self._grounded_lu.solve(rhs[1:])
        out -= out.mean()
        return out.reshape(self.grid.shape)

    @classmethod
    def constant(cls, grid: TorusGrid, c: float = 1.0) -> "WeightField":
        return cls(grid.constant(c))


def weight_preset(grid: TorusGrid, spec: str) -> WeightField:
    """Build a weight from a preset string.

    ``const:<c>``
        rho = c.
    ``cosine:<a>``
        rho = 1 + a cos(2 pi x / L) cos(2 pi y / L), requires ``|a| < 1``.
    ``bump:<a>:<s>``
        rho = 1 + a exp(-d(x, x0)**2 / s**2), ``x0`` the torus midpoint.
    """
    name, _, rest = spec.partition(":")
    try:
        args = [float(a) for a in rest.split(":")] if rest else []
    except ValueError:
        raise InvalidArgumentError(f"bad weight preset {spec!r}") from None
    k = 2.0 * math.pi / grid.L
    if name == "const" and len(args) == 1:
        return WeightField(grid.constant(args[0]))
    if name == "cosine" and len(args) == 1:
        a = args[0]
        if not abs(a) < 1:
            raise InvalidArgumentError(f"cosine amplitude must satisfy |a| < 1, got {a}")
        return WeightField(ScalarField.from_function(grid, lambda X, Y: 1 + a * np.cos(k * X) * np.cos(k * Y)))
    if name == "bump" and len(args) == 2:
        a, s = args
        if s <= 0:
            raise InvalidArgumentError(f"bump width must be positive, got {s}")
        d2 = grid.periodic_distance2(grid.L / 2, grid.L / 2)
        return WeightField(ScalarField(grid, 1 + a * np.exp(-d2 / (s * s))))
    raise InvalidArgumentError(f"unknown weight preset {spec!r}")


def integrate(f: ScalarField, grid: TorusGrid | None = None) -> float:
    """Uniform quadrature ``h**2 * sum(f)``."""
    if grid is not None and f.grid != grid:
        raise GridMismatchError(f"field grid {f.grid} does not match {grid}")
    require_finite(f)
    h = f.grid.h
    return float(h * h * np.sum(f.values))


def inner(u: ScalarField, w: ScalarField) -> float:
    grid = check_same_grid(u, w)
    return float(grid.h ** 2 * np.sum(u.values * w.values))


def l2_norm(u: ScalarField) -> float:
    return math.sqrt(inner(u, u))


def weighted_laplacian_apply(rho: WeightField, v: ScalarField) -> ScalarField:
    grid = check_same_grid(rho.field, v)
    return ScalarField(grid, kernels.weighted_laplacian(rho.values, v.values, grid.h))


def dirichlet_energy(rho: WeightField, v: ScalarField) -> float:
    """Weighted Dirichlet energy ``||v||_rho**2`` from face fluxes."""
    check_same_grid(rho.field, v)
    # h**2 * (jump/h)**2 per face: the h factors cancel
    return kernels.dirichlet_energy(rho.values, v.values)


def laplacian_matrix(grid: TorusGrid, rho: WeightField | None = None) -> sp.csr_matrix:
    """Sparse matrix of ``A_rho`` acting on row-major sample vectors."""
    n = grid.N
    r = np.ones(grid.shape) if rho is None else rho.values
    idx = np.arange(n * n).reshape(grid.shape)
    rows, cols, data = [], [], []
    diag = np.zeros(grid.shape)
    for axis in (0, 1):
        nb = np.roll(idx, -1, axis=axis)
        face = 0.5 * (r + np.roll(r, -1, axis=axis))
        rows += [idx.ravel(), nb.ravel()]
        cols += [nb.ravel(), idx.ravel()]
        data += [-face.ravel(), -face.ravel()]
        diag += face + np.roll(face, 1, axis=axis)
    rows.append(idx.ravel())
    cols.append(idx.ravel())
    data.append(diag.ravel())
    A = sp.coo_matrix(
        (np.concatenate(data), (np.concatenate(rows), np.concatenate(cols))),
        shape=(n * n, n * n),
    )
    return (A.tocsr() / grid.h ** 2).tocsr()


def first_eigenvalue(
    grid: TorusGrid,
    rho: WeightField | None = None,
    tol: float = 1e-8,
    max_iter: int = 10_000,
    seed: int = 0,
    block: int = 6,
) -> float:
    """Smallest nonzero eigenvalue of the discrete Laplacian.

    Block inverse iteration with a Rayleigh-Ritz step, restricted to the
    zero-mean subspace where the operator is invertible. The block copes with
    the four-fold degenerate (or, for a weight, nearly degenerate) lowest
    eigenspace of the square torus. With ``rho=None`` the unweighted operator
    is used.
    """
    weight = WeightField.constant(grid) if rho is None else rho
    if weight.grid != grid:
        raise GridMismatchError(f"weight grid {weight.grid} does not match {grid}")
    n = grid.N * grid.N
    block = max(1, min(block, n - 1))
    A = laplacian_matrix(grid, weight)
    lu = weight._grounded_lu
    rng = np.random.default_rng(seed)
    X = rng.standard_normal((n, block))
    X -= X.mean(axis=0)
    lam_old = np.inf
    for _ in range(max_iter):
        Y = np.zeros_like(X)
        Y[1:] = lu.solve(np.ascontiguousarray(X[1:]))
        Y -= Y.mean(axis=0)
        Q, _ = np.linalg.qr(Y)
        H = Q.T @ (A @ Q)
        theta, S = np.linalg.eigh(0.5 * (H + H.T))
        X = Q @ S
        lam = float(theta[0])
        if abs(lam - lam_old) <= 0.1 * tol * abs(lam):
            return lam
        lam_old = lam
    raise ConvergenceError(
        f"inverse iteration did not reach relative tolerance {tol} in {max_iter} iterations",
        last_iterate=ScalarField(grid, X[:, 0].reshape(grid.shape)),
    )


_HEADER = re.compile(r"^\s*torus\s+L=(\S+)\s+N=(\S+)\s*$")


def write_field(path, field: ScalarField) -> None:
    grid = field.grid
    lines = [f"torus L={grid.L!r} N={grid.N}"]
    for row in field.values:
        lines.append(" ".join(repr(float(x)) for x in row))
    Path(path).write_text("\n".join(lines) + "\n")


def read_field(path) -> ScalarField:
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise FieldFormatError(f"cannot read field file {path}: {exc}") from exc
    lines = [ln for ln in text.splitlines() if ln.strip()]
    if not lines:
        raise FieldFormatError(f"{path}: empty field file")
    m = _HEADER.match(lines[0])
    if m is None:
        raise FieldFormatError(f"{path}: bad header {lines[0]!r}")
    try:
        grid = TorusGrid(float(m.group(1)), int(m.group(2)))
    except (ValueError, InvalidArgumentError) as exc:
        raise FieldFormatError(f"{path}: bad header {lines[0]!r}: {exc}") from exc
    rows = lines[1:]
    if len(rows) != grid.N:
        raise FieldFormatError(f"{path}: expected {grid.N} rows, found {len(rows)}")
    try:
        data = [[float(tok) for tok in row.split()] for row in rows]
    except ValueError as exc:
        raise FieldFormatError(f"{path}: non-numeric value: {exc}") from exc
    if any(len(r) != grid.N for r in data):
        raise FieldFormatError(f"{path}: every row must hold {grid.N} values")
    try:
        return ScalarField(grid, np.array(data))
    except InvalidFieldError as exc:
        raise FieldFormatError(f"{path}: {exc}") from exc
