"""Minimizing-movements time stepping for the anisotropic Allen-Cahn flow.

Each step solves

    u_n  =  argmin_u  E_eps[u] + (1/2h) || u - u_{n-1} ||^2_{u_{n-1}},

with the metric frozen at the previous iterate (the scheme is explicit in
the weight g).  For h < 2 eps^2 c_g / lambda the objective is strongly
convex, so the inner minimization -- a limited-memory quasi-Newton descent
with backtracking line search, warm-started at u_{n-1} -- has a unique
target.  Because every accepted line-search step decreases J, the per-step
dissipation inequality

    || u_n - u_{n-1} ||^2_{u_{n-1}}  <=  2h ( E[u_{n-1}] - E[u_n] )

holds by construction, up to floating-point roundoff.
"""

from __future__ import annotations

import dataclasses
import math

import numpy as np

from .anisotropy import Anisotropy
from .energy import GWeight, energy_eps, energy_gradient, metric_weight
from .errors import ConfigError, ConvergenceError, InputError, InvariantViolation
from .field import PeriodicField, reduce_sum, save_snapshot
from .potential import DoubleWell, Profile


@dataclasses.dataclass
class Model:
    """Anisotropy sigma, mobility mu, and double well bundled for a run."""

    anisotropy: Anisotropy
    mobility: Anisotropy
    well: DoubleWell
    gweight: GWeight = None

    def __post_init__(self):
        if self.gweight is None:
            self.gweight = GWeight(self.anisotropy, self.mobility)

    @property
    def c_g(self) -> float:
        return self.gweight.c_g


@dataclasses.dataclass
class SolverConfig:
    """Run parameters; h defaults to theta_h times the strong-convexity
    threshold 2 eps^2 c_g / lambda and must stay strictly below it."""

    eps: float
    t_end: float
    theta_h: float = 0.5
    h: float | None = None
    tol_grad: float = 1e-9
    max_inner_iters: int = 10_000
    snapshot_every: int = 0
    max_principle_tol: float = 1e-8

    def __post_init__(self):
        if self.eps <= 0.0:
            raise ConfigError("eps must be positive")
        if self.t_end <= 0.0:
            raise ConfigError("t_end must be positive")
        if self.h is None and not (0.0 < self.theta_h < 1.0):
            raise ConfigError("theta_h must lie in (0, 1)")

    def step_size(self, model: Model) -> float:
        """Resolve h against the gate h < 2 eps^2 c_g / lambda."""
        gate = 2.0 * self.eps ** 2 * model.c_g / model.well.lambda_
        h = self.theta_h * gate if self.h is None else self.h
        if not (0.0 < h < gate):
            raise ConfigError(
                f"time step h = {h:g} violates the strong-convexity gate "
                f"h < {gate:g}")
        return h


@dataclasses.dataclass
class StepRecord:
    """Per-step bookkeeping for the dissipation and maximum-principle checks."""

    index: int
    time: float
    inner_iters: int
    grad_residual: float
    energy_before: float
    energy_after: float
    metric_sq_increment: float
    linf_center_distance: float


@dataclasses.dataclass
class Trajectory:
    """A completed (or partial) run: records plus retained snapshots."""

    config: SolverConfig
    model: Model
    h: float
    initial: PeriodicField
    records: list
    snapshots: dict

    def time_of(self, step: int) -> float:
        return step * self.h

    @property
    def final(self) -> PeriodicField:
        last = max(self.snapshots)
        return self.snapshots[last]

    def dissipation_sum(self, upto: int | None = None) -> float:
        recs = self.records if upto is None else self.records[:upto]
        return sum(r.metric_sq_increment / self.h for r in recs)


class _StepProblem:
    """J(u) = E_eps[u] + (1/2h) ||u - u_prev||^2_{u_prev} and its gradient."""

    def __init__(self, u_prev: PeriodicField, eps: float, h: float,
                 model: Model):
        self.u_prev = u_prev
        self.eps = eps
        self.h = h
        self.model = model
        self.celw = u_prev.cell_volume
        self.wc = metric_weight(u_prev, model.gweight)
        self.field_L = u_prev.L

    def value_grad(self, x: np.ndarray):
        fld = PeriodicField(x, self.field_L)
        rep = energy_eps(fld, self.eps, self.model.anisotropy, self.model.well)
        dv = x - self.u_prev.data
        mterm = 0.5 / self.h * self.eps * self.celw * reduce_sum(self.wc * dv * dv)
        grad = (energy_gradient(fld, self.eps, self.model.anisotropy,
                                self.model.well)
                + self.eps / self.h * self.wc * dv)
        return rep.total + mterm, grad

    def norm(self, g: np.ndarray) -> float:
        return math.sqrt(self.celw * reduce_sum(g * g))

    def dot(self, a: np.ndarray, b: np.ndarray) -> float:
        return self.celw * reduce_sum(a * b)

    def metric_sq_of(self, dv: np.ndarray) -> float:
        return self.eps * self.celw * reduce_sum(self.wc * dv * dv)


def _lbfgs(problem, x0: np.ndarray, tol_abs: float, max_iters: int,
           memory: int = 8, gamma0: float | None = None):
    """Two-loop L-BFGS with Armijo backtracking; J never increases.

    Returns (x, iterations, grad_norm, converged).  All inner products use
    the problem's discrete-L2 dot, so the stopping norm matches the metric
    the tolerance is stated in.
    """
    x = x0.copy()
    J, g = problem.value_grad(x)
    gnorm = problem.norm(g)
    svecs, yvecs, rhos = [], [], []
    gamma = gamma0 if gamma0 is not None else 1.0
    iters = 0
    while gnorm > tol_abs and iters < max_iters:
        q = g.copy()
        alphas = []
        for s, y, rho in zip(reversed(svecs), reversed(yvecs), reversed(rhos)):
            a = rho * problem.dot(s, q)
            alphas.append(a)
            q -= a * y
        q *= gamma
        for (s, y, rho), a in zip(zip(svecs, yvecs, rhos), reversed(alphas)):
            b = rho * problem.dot(y, q)
            q += (a - b) * s
        p = -q
        slope = problem.dot(g, p)
        if slope >= 0.0:
            # fall back to preconditioned steepest descent
            p = -gamma * g
            slope = problem.dot(g, p)
        step = 1.0
        accepted = False
        for _ in range(50):
            x_new = x + step * p
            J_new, g_new = problem.value_grad(x_new)
            if J_new <= J + 1e-4 * step * slope:
                accepted = True
                break
            step *= 0.5
        if not accepted:
            break
        s = x_new - x
        y = g_new - g
        sy = problem.dot(s, y)
        if sy > 1e-14 * problem.norm(s) * problem.norm(y):
            svecs.append(s)
            yvecs.append(y)
            rhos.append(1.0 / sy)
            gamma = sy / problem.dot(y, y)
            if len(svecs) > memory:
                svecs.pop(0)
                yvecs.pop(0)
                rhos.pop(0)
        x, J, g = x_new, J_new, g_new
        gnorm = problem.norm(g)
        iters += 1
    return x, iters, gnorm, gnorm <= tol_abs


def minimize_step(u_prev: PeriodicField, cfg: SolverConfig, model: Model,
                  index: int = 0, h: float | None = None):
    """One minimizing-movements step from u_prev.

    Returns (u_next, StepRecord).  The returned iterate satisfies
    ||grad J|| <= tol_grad * max(1, ||grad J(u_prev)||) and never increases
    J, so u_prev is always an admissible competitor.
    """
    if not np.all(np.isfinite(u_prev.data)):
        raise InputError("u_prev must be finite")
    if h is None:
        h = cfg.step_size(model)
    prob = _StepProblem(u_prev, cfg.eps, h, model)
    J0, g0 = prob.value_grad(u_prev.data)
    tol_abs = cfg.tol_grad * max(1.0, prob.norm(g0))
    # initial inverse-Hessian scale from the dominant metric block eps w / h
    gamma0 = h / (cfg.eps * max(float(prob.wc.mean()), 1e-30))
    x, iters, gnorm, converged = _lbfgs(prob, u_prev.data, tol_abs,
                                        cfg.max_inner_iters, gamma0=gamma0)
    if not converged and gnorm > tol_abs:
        raise ConvergenceError(
            f"inner solver stalled at step {index}: residual {gnorm:.3e} "
            f"> tolerance {tol_abs:.3e}", residual=gnorm)
    u_next = PeriodicField(x, u_prev.L)
    e_before = energy_eps(u_prev, cfg.eps, model.anisotropy, model.well).total
    e_after = energy_eps(u_next, cfg.eps, model.anisotropy, model.well).total
    msq = prob.metric_sq_of(x - u_prev.data)
    rec = StepRecord(index=index, time=index * h, inner_iters=iters,
                     grad_residual=gnorm, energy_before=e_before,
                     energy_after=e_after, metric_sq_increment=msq,
                     linf_center_distance=u_next.linf_center_distance())
    return u_next, rec


def run(u0: PeriodicField, cfg: SolverConfig, model: Model,
        out_dir=None, progress=None) -> Trajectory:
    """March to t_end, asserting after every step:

    (a) the energy is non-increasing,
    (b) the maximum principle ||u - 1/2||_inf <= max(||u0 - 1/2||_inf, 1/2),
    (c) the per-step dissipation inequality metric^2 <= 2h (E_prev - E_next),

    each with its stated numerical slack.  On a violation the offending state
    is dumped as a snapshot (when out_dir is given) and the step record is
    attached to the raised error.
    """
    h = cfg.step_size(model)
    n_steps = int(math.ceil(cfg.t_end / h - 1e-9))
    E0 = energy_eps(u0, cfg.eps, model.anisotropy, model.well).total
    mp_bound = max(u0.linf_center_distance(), 0.5) + cfg.max_principle_tol
    tol_energy = 10.0 * cfg.tol_grad * max(1.0, E0)
    tol_metric = 1e-10 * max(E0, 1.0)

    snapshots = {0: u0.copy()}
    records = []
    u = u0
    stride = cfg.snapshot_every

    def keep(step):
        if step == 0 or step == n_steps:
            return True
        if stride <= 0:
            return False
        return min(step % stride, (-step) % stride) <= 1

    for k in range(1, n_steps + 1):
        u_next, rec = minimize_step(u, cfg, model, index=k, h=h)
        violation = None
        if rec.energy_after > rec.energy_before + tol_energy:
            violation = (f"energy increased at step {k}: "
                         f"{rec.energy_before!r} -> {rec.energy_after!r}")
        slack = rec.metric_sq_increment - 2.0 * h * (rec.energy_before
                                                     - rec.energy_after)
        if violation is None and slack > tol_metric:
            violation = (f"dissipation inequality failed at step {k}: "
                         f"slack {slack:.3e} > {tol_metric:.3e}")
        if violation is None and rec.linf_center_distance > mp_bound:
            violation = (f"maximum principle failed at step {k}: "
                         f"{rec.linf_center_distance!r} > {mp_bound!r}")
        if violation is not None:
            if out_dir is not None:
                save_snapshot(u_next, out_dir, k, k * h, cfg.eps)
            err = InvariantViolation(violation)
            err.record = rec
            raise err
        records.append(rec)
        u = u_next
        if keep(k):
            snapshots[k] = u.copy()
        if progress is not None:
            progress(k, n_steps, rec)
    return Trajectory(config=cfg, model=model, h=h, initial=u0,
                      records=records, snapshots=snapshots)


def initial_wulff(a: Anisotropy, prof: Profile, center, r0: float,
                  eps: float, n: int, L: float = 1.0) -> PeriodicField:
    """Phase field u0(x) = profile((r0 - sigma°(x - center)) / eps).

    Since |D sigma°| = 1/sigma(nu) on the Wulff boundary, this reproduces
    the direction-dependent transition width eps sigma(nu) of the optimal
    planar profile.
    """
    center = np.asarray(center, dtype=float)
    d = center.size
    if a.d != d:
        raise InputError("center dimension must match the anisotropy")
    if r0 <= 2.0 * eps:
        raise InputError(f"need r0 > 2 eps, got r0 = {r0}, eps = {eps}")
    # extent of the Wulff shape per axis; must fit with a 4 eps margin
    if d == 2:
        bd = a.wulff_boundary_points(r0, 4096)
    else:
        rng = np.random.default_rng(31415)
        nu = rng.standard_normal((8192, d))
        nu /= np.linalg.norm(nu, axis=-1, keepdims=True)
        bd = r0 * a.dsigma(nu)
    extent = np.abs(bd).max(axis=0)
    if np.any(extent + 4.0 * eps > L / 2.0):
        raise InputError(
            f"Wulff shape of radius {r0} does not fit the torus with a "
            f"4 eps margin (extent {extent}, L = {L})")
    axes = [(np.arange(n) + 0.5) * (L / n) for _ in range(d)]
    mesh = np.meshgrid(*axes, indexing="ij")
    disp = np.stack([(m - c + L / 2.0) % L - L / 2.0
                     for m, c in zip(mesh, center)], axis=-1)
    rho = a.polar(disp)
    return PeriodicField(prof((r0 - rho) / eps), L)


def initial_planar(a: Anisotropy, prof: Profile, axis: int, eps: float,
                   n: int, L: float = 1.0, width: float | None = None) -> PeriodicField:
    """Periodized planar profile: a slab of the 1-phase normal to a lattice
    axis, each face carrying the optimal profile of width eps sigma(nu)."""
    d = a.d
    if not 0 <= axis < d:
        raise InputError("axis out of range")
    if width is None:
        width = L / 2.0
    nu = np.zeros(d)
    nu[axis] = 1.0
    s_nu = float(a.sigma(nu))
    x = (np.arange(n) + 0.5) * (L / n)
    line = prof((width / 2.0 - np.abs(x - L / 2.0)) / (eps * s_nu))
    shape = [1] * d
    shape[axis] = n
    data = np.broadcast_to(line.reshape(shape), (n,) * d).copy()
    return PeriodicField(data, L)
