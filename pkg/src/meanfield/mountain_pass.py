"""Numerical mountain pass solver.

A path of ``m`` fields joins ``0`` to an endpoint ``v*`` with negative
energy (a scaled bubble, settled into its basin by a few descent steps).
Each sweep moves every interior node one backtracking step down
the gradient, so the largest node energy (the estimate of the minimax
level) never increases. Every few sweeps the nodes are redistributed to
equal ``||.||_rho`` arc length. The energy and residual at the highest node
after each sweep form the Palais-Smale sequence that is recorded.

Descent directions are the H^1_rho representative of the gradient,
``d = A_rho^{-1} g``, i.e. steepest descent for the norm the functional is
posed in. This keeps the step count independent of the mesh size.

Once the path stops moving, the highest node sits on the minimum energy
path near, but not at, the saddle. A short climbing polish then finishes
the job: it descends in every direction except the (continually refined)
unstable direction, along which it ascends.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from . import kernels
from .diagnostics import ConcentrationReport, bubble_profile, concentration
from .errors import InvalidArgumentError, NoNegativeEndpointError
from .functional import InteractionParams, _energy_parts, gradient_array
from .manifold import ScalarField, WeightField

logger = logging.getLogger(__name__)

CONVERGED = "converged"
BUDGET_EXHAUSTED = "budget-exhausted"
NO_NEGATIVE_ENDPOINT = "no-negative-endpoint"


@dataclass(frozen=True)
class SolverConfig:
    path_nodes: int = 21
    max_outer_iters: int = 5000
    residual_tol: float = 1e-5
    step_init: float = 0.5
    step_shrink: float = 0.5
    sufficient_decrease: float = 1e-4
    step_min: float = 1e-12
    endpoint_scaling_budget: int = 40
    reparametrize_every: int = 10
    # relative level change over one reparametrization window that counts as a stalled path
    stall_tol: float = 1e-7
    polish_steps: int = 200
    polish_step: float = 1.0
    # bubble widths below min_sigma_cells * h are not tried
    min_sigma_cells: float = 0.125
    # descent steps that settle the endpoint into its basin before the path is built
    endpoint_relax_steps: int = 500
    rng_seed: int = 0

    def __post_init__(self):
        if int(self.path_nodes) != self.path_nodes or self.path_nodes < 3:
            raise InvalidArgumentError(f"path_nodes must be an integer >= 3, got {self.path_nodes!r}")
        for name in ("residual_tol", "step_init", "sufficient_decrease", "step_min", "stall_tol",
                     "polish_step", "min_sigma_cells"):
            if not getattr(self, name) > 0:
                raise InvalidArgumentError(f"{name} must be > 0")
        if not 0 < self.step_shrink < 1:
            raise InvalidArgumentError("step_shrink must lie in (0, 1)")
        for name in ("max_outer_iters", "reparametrize_every", "endpoint_scaling_budget"):
            if int(getattr(self, name)) < 1:
                raise InvalidArgumentError(f"{name} must be >= 1")
        for name in ("polish_steps", "endpoint_relax_steps"):
            if int(getattr(self, name)) < 0:
                raise InvalidArgumentError(f"{name} must be >= 0")


@dataclass
class PathState:
    nodes: list
    energies: list
    sweeps: int = 0
    flagged: tuple = ()
    descent_level: float = float("nan")
    reparametrized: bool = False

    @property
    def endpoint_energy(self) -> float:
        return self.energies[-1]

    @property
    def level_estimate(self) -> float:
        return max(self.energies)

    @property
    def max_index(self) -> int:
        # ties go to the lowest index
        return int(np.argmax(self.energies))


@dataclass(frozen=True)
class PSRecord:
    iteration: int
    energy: float
    residual: float
    ln_z1: float
    ln_z2: float
    sup_v: float
    phase: str  # "sweep" or "polish"


@dataclass
class MountainPassResult:
    status: str
    params: InteractionParams
    solution: ScalarField | None = None
    level: float = float("nan")
    residual: float = float("nan")
    path_level: float = float("nan")
    ps_trajectory: list = field(default_factory=list)
    iterations: int = 0
    sweeps: int = 0
    polish_steps: int = 0
    endpoint: ScalarField | None = None
    path: PathState | None = None
    concentration: ConcentrationReport | None = None
    suspected_blowup: bool = False
    message: str = ""
    # estimate of the unstable direction at the solution, unit in ||.||_rho
    unstable_direction: np.ndarray | None = None

    @property
    def converged(self) -> bool:
        return self.status == CONVERGED


class _Problem:
    """Array-level view of (rho, params) used in the inner loops."""

    def __init__(self, rho: WeightField, p: InteractionParams):
        self.rho = rho
        self.p = p
        self.grid = rho.grid
        self.h = rho.grid.h
        self.h2 = self.h * self.h
        self.volume = rho.grid.volume

    def energy(self, v):
        return _energy_parts(self.rho.values, v, self.h, self.volume, self.p)[0]

    def grad(self, v):
        return gradient_array(self.rho.values, v, self.h, self.p)

    def sobolev(self, g):
        return self.rho.solve(g)

    def rho_inner(self, u, w):
        return self.h2 * float(np.sum(u * kernels.weighted_laplacian(self.rho.values, w, self.h)))

    def rho_norm(self, u):
        return math.sqrt(max(kernels.dirichlet_energy(self.rho.values, u), 0.0))

    def residual(self, g):
        return math.sqrt(self.h2 * float(np.sum(g * g)))

    def record(self, iteration, v, phase, g=None):
        if g is None:
            g = self.grad(v)
        value, _, _, _, l1, l2 = _energy_parts(self.rho.values, v, self.h, self.volume, self.p)
        return PSRecord(iteration, value, self.residual(g), l1, l2, float(np.max(v)), phase)


def _zero_mean(a):
    return a - np.mean(a)


def bubble_center(rho: WeightField):
    """Torus midpoint for uniform rho, else the first node where rho is minimal."""
    grid = rho.grid
    if rho.is_uniform:
        return (grid.L / 2, grid.L / 2)
    i, j = np.unravel_index(int(np.argmin(rho.values)), grid.shape)
    return (i * grid.h, j * grid.h)


def find_negative_endpoint(rho: WeightField, p: InteractionParams, cfg: SolverConfig = SolverConfig()) -> ScalarField:
    """Scale logarithmic bubbles until the energy turns negative.

    Widths run ``L/4, L/8, ...`` down to ``cfg.min_sigma_cells * h``; for each
    width the amplitude doubles from 1 for ``endpoint_scaling_budget``
    doublings. The bubble points toward the larger interaction strength and
    sits where rho is smallest, since concentration costs kinetic energy in
    proportion to the local weight.
    """
    prob = _Problem(rho, p)
    grid = rho.grid
    sign = -1.0 if p.alpha2 > p.alpha1 else 1.0
    center = bubble_center(rho)
    sigma = grid.L / 4
    best = math.inf
    while sigma >= cfg.min_sigma_cells * grid.h:
        phi = sign * bubble_profile(grid, sigma, center).values
        t = 1.0
        for _ in range(cfg.endpoint_scaling_budget + 1):
            v = _zero_mean(t * phi)
            e = prob.energy(v)
            best = min(best, e)
            if e < 0:
                logger.debug("negative endpoint: sigma=%g t=%g I=%g", sigma, t, e)
                return ScalarField(grid, v)
            t *= 2.0
        sigma /= 2.0
    raise NoNegativeEndpointError(
        f"no bubble with negative energy for alpha=({p.alpha1}, {p.alpha2}); lowest energy seen {best:.6g}",
        best_energy=best,
    )


def relax_endpoint(v_star: ScalarField, rho: WeightField, p: InteractionParams, cfg: SolverConfig = SolverConfig()) -> ScalarField:
    """Descend ``v*`` until its energy stops dropping (at most ``endpoint_relax_steps``).

    A bare bubble can sit on the slope of a much deeper well; left there,
    the path nodes slide past it and the pass is lost.
    """
    prob = _Problem(rho, p)
    v = v_star.values
    e = prob.energy(v)
    for _ in range(cfg.endpoint_relax_steps):
        v_new, e_new, _ = _descend(prob, v, e, cfg)
        if e - e_new <= 1e-10 * (1.0 + abs(e_new)):
            break
        v, e = v_new, e_new
    return ScalarField(rho.grid, v) if v is not v_star.values else v_star


def initialize_path(v_star: ScalarField, m: int, rho: WeightField, p: InteractionParams) -> PathState:
    """Straight segment ``k/(m-1) * v*`` from ``0`` to ``v*``."""
    if m < 3:
        raise InvalidArgumentError(f"path needs at least 3 nodes, got {m}")
    prob = _Problem(rho, p)
    vs = _zero_mean(v_star.values)
    nodes = [ScalarField(rho.grid, _zero_mean((k / (m - 1)) * vs)) for k in range(m)]
    return PathState(nodes=nodes, energies=[prob.energy(n.values) for n in nodes])


def _descend(prob: _Problem, v, e0, cfg: SolverConfig):
    """One backtracking step along -A_rho^{-1} g. Returns (v, e, ok)."""
    g = prob.grad(v)
    d = prob.sobolev(g)
    slope = prob.h2 * float(np.sum(g * d))  # = ||d||_rho**2
    if not slope > 0:
        return v, e0, True
    step = cfg.step_init
    while step >= cfg.step_min:
        trial = _zero_mean(v - step * d)
        e = prob.energy(trial)
        if e <= e0 - cfg.sufficient_decrease * step * slope:
            return trial, e, True
        step *= cfg.step_shrink
    return v, e0, False


def _resample(prob: _Problem, vertices, m: int):
    """``m`` points at equal ``||.||_rho`` arc length along a polyline.

    The first and last vertices are returned as the same objects.
    """
    n = len(vertices)
    seg = [prob.rho_norm(vertices[k + 1] - vertices[k]) for k in range(n - 1)]
    s = np.concatenate([[0.0], np.cumsum(seg)])
    if not s[-1] > 0:
        return None
    out = [vertices[0]]
    for t in np.linspace(0.0, s[-1], m)[1:-1]:
        k = min(int(np.searchsorted(s, t, side="right")) - 1, n - 2)
        while k < n - 2 and seg[k] == 0:
            k += 1
        w = 0.0 if seg[k] == 0 else (t - s[k]) / seg[k]
        out.append(_zero_mean((1.0 - w) * vertices[k] + w * vertices[k + 1]))
    out.append(vertices[-1])
    return out


def deform_path(path: PathState, rho: WeightField, p: InteractionParams, cfg: SolverConfig = SolverConfig()) -> PathState:
    """One deformation sweep; endpoints are never touched.

    Every interior node takes one descent step, so the level after the
    descent (``descent_level``) never exceeds the level before the sweep.
    On every ``reparametrize_every``-th sweep the nodes are then moved to
    equal arc length along the polyline. That move changes the
    discretization, not the curve, and can shift the level by the
    interpolation error; ``reparametrized`` marks those sweeps.
    """
    prob = _Problem(rho, p)
    m = len(path.nodes)
    vals = [n.values for n in path.nodes]
    energies = list(path.energies)
    flagged = []
    for k in range(1, m - 1):
        v, e, ok = _descend(prob, vals[k], energies[k], cfg)
        vals[k], energies[k] = v, e
        if not ok:
            flagged.append(k)
    descent_level = max(energies)
    sweeps = path.sweeps + 1
    reparametrized = False
    if sweeps % cfg.reparametrize_every == 0:
        moved = _resample(prob, vals, m)
        if moved is not None:
            vals = moved
            energies = [energies[0]] + [prob.energy(v) for v in moved[1:-1]] + [energies[-1]]
            reparametrized = True
    nodes = [path.nodes[0]] + [ScalarField(rho.grid, v) for v in vals[1:-1]] + [path.nodes[-1]]
    return PathState(
        nodes=nodes,
        energies=energies,
        sweeps=sweeps,
        flagged=tuple(flagged),
        descent_level=descent_level,
        reparametrized=reparametrized,
    )


def _path_tangent(prob: _Problem, path: PathState):
    """Unit ``||.||_rho`` tangent at the highest node (central chord)."""
    m = len(path.nodes)
    j = path.max_index
    tau = path.nodes[min(j + 1, m - 1)].values - path.nodes[max(j - 1, 0)].values
    tn = prob.rho_norm(tau)
    return tau / tn if tn > 0 else np.zeros_like(tau)


def _polish(prob: _Problem, v, tau, cfg: SolverConfig, start_iter: int, records: list, progress):
    """Climbing iteration from ``v`` toward the saddle.

    Direction: ``-(d - 2 <d, tau>_rho tau)``. ``tau`` starts as the given unit
    tangent and takes one power-iteration step toward the unstable mode of
    ``A_rho^{-1} H`` per iteration, with the Hessian applied by central
    differences of the gradient. The step halves whenever the residual jumps
    by more than a factor of two. Returns ``(best field, its residual, steps, tau)``.
    """
    v = v.copy()
    g = prob.grad(v)
    res = prob.residual(g)
    best_v, best_res = v, res
    step = cfg.polish_step
    steps = 0
    eps = 1e-6
    while steps < cfg.polish_steps and best_res > cfg.residual_tol:
        h_tau = (prob.grad(v + eps * tau) - prob.grad(v - eps * tau)) / (2.0 * eps)
        t_new = tau - prob.sobolev(h_tau)
        tn = prob.rho_norm(t_new)
        if tn > 0 and math.isfinite(tn):
            tau = t_new / tn
        d = prob.sobolev(g)
        climb = d - 2.0 * prob.rho_inner(d, tau) * tau
        trial = _zero_mean(v - step * climb)
        g_trial = prob.grad(trial)
        res_trial = prob.residual(g_trial)
        steps += 1
        if not math.isfinite(res_trial) or res_trial > 2.0 * res:
            step *= 0.5
            continue
        v, g, res = trial, g_trial, res_trial
        rec = prob.record(start_iter + steps, v, "polish", g)
        records.append(rec)
        if progress is not None:
            progress(rec)
        if res < best_res:
            best_v, best_res = v, res
    return best_v, best_res, steps, tau


def _run(prob: _Problem, path: PathState, cfg: SolverConfig, endpoint: ScalarField, progress,
         warm=None) -> MountainPassResult:
    records = []
    if warm is not None:
        # continuation: climb straight from the previous saddle before touching the path
        sol, res, polished, tau = _polish(prob, warm[0], warm[1], cfg, 0, records, progress)
        if res <= cfg.residual_tol and prob.energy(sol) > 0:
            return _result(prob, path, cfg, endpoint, records, sol, res, 0, polished, tau, True)
        records = []
    levels = [path.level_estimate]
    stalled = False
    reached = False
    window = cfg.reparametrize_every
    for it in range(1, cfg.max_outer_iters + 1):
        path = deform_path(path, prob.rho, prob.p, cfg)
        j = path.max_index
        rec = prob.record(it, path.nodes[j].values, "sweep")
        records.append(rec)
        levels.append(path.level_estimate)
        if progress is not None:
            progress(rec)
        if rec.residual <= cfg.residual_tol:
            reached = True
            break
        if it >= window:
            change = levels[-1 - window] - levels[-1]
            if change <= cfg.stall_tol * (1.0 + abs(levels[-1])):
                stalled = True
                break
    sweeps = len(records)
    sol, res, polished = path.nodes[path.max_index].values, records[-1].residual, 0
    tau = _path_tangent(prob, path)
    if stalled:
        sol, res, polished, tau = _polish(prob, path.nodes[path.max_index].values, tau, cfg, sweeps,
                                          records, progress)
    # a maximum at an end of the path means no pass was resolved
    resolved = 0 < path.max_index < len(path.nodes) - 1
    return _result(prob, path, cfg, endpoint, records, sol, res, sweeps, polished, tau, resolved)


def _result(prob, path, cfg, endpoint, records, sol, res, sweeps, polished, tau, resolved):
    solution = ScalarField(prob.grid, sol)
    level = prob.energy(sol)
    resolved = resolved and level > 0
    status = CONVERGED if res <= cfg.residual_tol and resolved else BUDGET_EXHAUSTED
    result = MountainPassResult(
        status=status,
        params=prob.p,
        solution=solution,
        level=level,
        residual=res,
        path_level=path.level_estimate,
        ps_trajectory=records,
        iterations=sweeps + polished,
        sweeps=sweeps,
        polish_steps=polished,
        endpoint=endpoint,
        path=path,
        concentration=concentration(solution, prob.grid.L / 8),
        unstable_direction=tau,
    )
    if status == BUDGET_EXHAUSTED:
        tail = records[-max(len(records) // 4, 1):]
        result.suspected_blowup = tail[-1].sup_v > 1.1 * max(tail[0].sup_v, 1e-12)
        if not resolved:
            result.message = "no mountain pass resolved: path maximum at an endpoint or level <= 0"
        else:
            result.message = "suspected blow-up: sup v still growing" if result.suspected_blowup else "iteration budget exhausted"
    return result


def solve(
    rho: WeightField,
    p: InteractionParams,
    cfg: SolverConfig = SolverConfig(),
    progress: Callable[[PSRecord], None] | None = None,
) -> MountainPassResult:
    """Compute a mountain pass critical point for parameters ``p``.

    Raises :class:`NoNegativeEndpointError` when no negative-energy endpoint
    exists within the search budget.
    """
    prob = _Problem(rho, p)
    v_star = relax_endpoint(find_negative_endpoint(rho, p, cfg), rho, p, cfg)
    path = initialize_path(v_star, cfg.path_nodes, rho, p)
    return _run(prob, path, cfg, v_star, progress)


def _path_through(prob: _Problem, waypoints, m: int) -> PathState:
    """Path of ``m`` nodes spread evenly along the polyline through ``waypoints``."""
    vals = _resample(prob, waypoints, m)
    if vals is None:
        vals = [waypoints[0]] * (m - 1) + [waypoints[-1]]
    fields = [ScalarField(prob.grid, v) for v in vals]
    return PathState(nodes=fields, energies=[prob.energy(f.values) for f in fields])


def continuation_solve(
    rho: WeightField,
    schedule,
    cfg: SolverConfig = SolverConfig(),
    progress: Callable[[PSRecord], None] | None = None,
) -> list:
    """Solve along a schedule of parameters, warm-starting each from the last.

    The schedule must be nondecreasing in ``max(alpha1, alpha2)``. After a
    converged entry, the next run keeps the previous endpoint (when its
    energy is still negative) and starts from the path
    ``0 -> previous solution -> endpoint``. Failures are recorded in the
    corresponding result and the continuation carries on.
    """
    schedule = list(schedule)
    if not schedule:
        raise InvalidArgumentError("continuation schedule is empty")
    tops = [max(q.alpha1, q.alpha2) for q in schedule]
    if any(b < a for a, b in zip(tops, tops[1:])):
        raise InvalidArgumentError("schedule must be nondecreasing in max(alpha1, alpha2)")

    results = []
    prev = None
    for p in schedule:
        prob = _Problem(rho, p)
        try:
            if prev is not None and prev.converged:
                endpoint = prev.endpoint
                if prob.energy(endpoint.values) >= 0:
                    endpoint = relax_endpoint(find_negative_endpoint(rho, p, cfg), rho, p, cfg)
                zero = np.zeros(rho.grid.shape)
                if prob.energy(prev.solution.values) > 0:
                    waypoints = [zero, prev.solution.values, endpoint.values]
                else:
                    waypoints = [zero, endpoint.values]
                path = _path_through(prob, waypoints, cfg.path_nodes)
                # endpoint must stay bitwise identical to the stored field
                path.nodes[-1] = endpoint
                warm = (prev.solution.values, prev.unstable_direction)
                result = _run(prob, path, cfg, endpoint, progress, warm=warm)
            else:
                result = solve(rho, p, cfg, progress)
        except NoNegativeEndpointError as exc:
            result = MountainPassResult(status=NO_NEGATIVE_ENDPOINT, params=p, message=str(exc))
        results.append(result)
        prev = result
    return results
