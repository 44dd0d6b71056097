"""Fixed-point, policy-iteration, and continuation solvers for the discrete
complex Monge-Ampere equation in root form,

    ma_root(u, x) = (e^(eps u(x)) f(x))^(1/n).

Two engines share the monotone structure of the scheme:

* `euler`: damped explicit iteration u <- u + tau (root - rhs) with
  tau <= h^2 / (4 n w_max).  At that step size the map is monotone and
  nonexpansive in the sup norm, so the root-form residual trace never
  increases; it is the simple, slow, provably safe route.

* `policy_iteration`: freeze the minimizing control per point, run pointwise
  Jacobi relaxations of the frozen linear-plus-exponential system (each
  relaxation solves its scalar equation exactly by Newton), refresh the
  control field, repeat.  On a torus with eps > 0 a mean-shift correction is
  applied at every refresh: the root is invariant under constant shifts, so
  the constant that matches the aggregate root mass to the aggregate
  right-hand mass is exact and keeps the slowest mode anchored even as
  eps -> 0.

The eps = 0 compact equation is only reachable through `continuation_to_zero`,
which solves a geometric eps_j family with warm starts and stops on a Cauchy
test; direct iteration at eps = 0 has no properness anchor and its fixed
point is only unique modulo constants.
"""

from __future__ import annotations

import math
import time
from dataclasses import dataclass, field

import numpy as np

from . import _kernels
from .errors import (
    IterationLimitError,
    NoSubsolutionError,
    NonCauchyError,
    ValidationError,
)
from .grid import Domain, GridFunction
from .hermitian import (
    KAPPA_MAX,
    KAPPA_MIN,
    DirectionSet,
    bellman_min_trace,
    generate_direction_set,
)
from .operator import EquationData, DensityField, compile_table

_DIVERGENCE_FACTOR = 1e8


@dataclass
class Continuation:
    epsilon_0: float = 1.0
    factor: float = 0.5
    cauchy_tol: float = 1e-9
    max_steps: int = 60

    def __post_init__(self):
        if not (0.0 < self.factor < 1.0):
            raise ValidationError("continuation factor must lie in (0, 1)")
        if self.epsilon_0 <= 0.0:
            raise ValidationError("continuation epsilon_0 must be positive")
        if self.cauchy_tol <= 0.0:
            raise ValidationError("cauchy_tol must be positive")


@dataclass
class SolverConfig:
    scheme: str = "policy_iteration"
    tau: object = "auto"
    tol_sup: float = 1e-10
    max_iter: int = 200000
    inner_sweeps: int = 25
    frame_family: str = "axes+diagonals"
    weight_levels: int = 9
    kappa_min: float = KAPPA_MIN
    kappa_max: float = KAPPA_MAX
    continuation: Continuation = None

    def __post_init__(self):
        if self.scheme not in ("euler", "policy_iteration", "perron_sweep"):
            raise ValidationError("unknown scheme %r" % (self.scheme,))
        if self.tol_sup <= 0.0:
            raise ValidationError("tol_sup must be positive")
        if self.max_iter < 1:
            raise ValidationError("max_iter must be >= 1")
        if self.inner_sweeps < 1:
            raise ValidationError("inner_sweeps must be >= 1")

    def direction_set(self, n) -> DirectionSet:
        return generate_direction_set(
            n, self.frame_family, self.weight_levels, self.kappa_min, self.kappa_max
        )

    def cfl_bound(self, domain: Domain, A_set: DirectionSet) -> float:
        return domain.h**2 / (4.0 * domain.n * A_set.max_weight())

    def effective_tau(self, domain: Domain, A_set: DirectionSet) -> float:
        bound = self.cfl_bound(domain, A_set)
        if self.tau == "auto" or self.tau is None:
            return bound
        tau = float(self.tau)
        if tau <= 0.0:
            raise ValidationError("tau must be positive")
        if tau > bound * (1.0 + 1e-12):
            raise ValidationError(
                "tau %.3e exceeds the stability bound %.3e" % (tau, bound)
            )
        return tau


@dataclass
class SolverReport:
    iterations: int = 0
    residual_sup: list = field(default_factory=list)
    residual_l1: list = field(default_factory=list)
    termination: str = "converged"
    wall_seconds: float = 0.0
    normalization_applied: bool = False
    tau: float = 0.0
    bracket: tuple = None
    extra: dict = field(default_factory=dict)


class _Problem:
    """Shared state of one solve: table, kernels, density powers.

    `subset_flat` restricts the unknowns to a set of flat lattice indices
    (used by balayage); everything outside stays frozen.  Mean-shift
    anchoring only makes sense for full-torus solves.
    """

    def __init__(self, domain, eq, A_set, subset_flat=None):
        self.domain = domain
        self.eq = eq
        self.A_set = A_set
        self.table = compile_table(domain, A_set)
        self.backend = _kernels.active_backend()
        self.n = domain.n
        self.eps = eq.epsilon
        if subset_flat is None:
            self.eval_idx = self.table.eval_idx
            self.nbr_idx = self.table.nbr_idx
            self.allow_mean_shift = domain.is_torus
        else:
            subset_flat = np.asarray(subset_flat, dtype=np.int64)
            if domain.is_torus:
                pos = subset_flat
            else:
                pos_of = np.full(domain.num_points, -1, dtype=np.int64)
                pos_of[self.table.eval_idx] = np.arange(
                    self.table.eval_idx.shape[0]
                )
                pos = pos_of[subset_flat]
                if np.any(pos < 0):
                    raise ValidationError("subset must be strictly interior")
            self.eval_idx = subset_flat
            self.nbr_idx = np.ascontiguousarray(self.table.nbr_idx[:, :, pos])
            self.allow_mean_shift = False
        self.f_flat = eq.density.values.ravel()[self.eval_idx]
        self.f_root = self.f_flat ** (1.0 / self.n)
        self.omega_c = self.table.omega_quads(eq.omega)
        self.cell = domain.h**domain.num_axes

    def root_argmin(self, u_flat):
        return self.backend.root_argmin(
            u_flat, self.eval_idx, self.nbr_idx, self.table.inv4h2,
            self.table.wdirs, self.omega_c,
        )

    def rhs_root(self, u_eval):
        """(e^(eps u) f)^(1/n) at evaluation points."""
        if self.eps == 0.0:
            return self.f_root
        return np.exp(self.eps * u_eval / self.n) * self.f_root

    def residual(self, u_flat, root):
        """F_plus residual with s = u(x) plus the root-form sup residual.

        The root form |root - (e^(eps u) f)^(1/n)| also sees negative roots,
        which the clamped F_plus cannot (essential when the density vanishes:
        convergence there means driving the root itself to zero).
        """
        u_eval = u_flat[self.eval_idx]
        res = np.exp(self.eps * u_eval) * self.f_flat - np.maximum(root, 0.0) ** self.n
        sup = float(np.max(np.abs(res))) if res.size else 0.0
        l1 = float(np.sum(np.abs(res))) * self.cell
        root_res = float(np.max(np.abs(root - self.rhs_root(u_eval)))) if res.size else 0.0
        return res, sup, l1, root_res

    def jacobi_sweep(self, u_flat, ctrl):
        """One Jacobi relaxation with frozen controls; returns new values.

        Solves, per point with neighbors frozen,
            sigma w + (e^(eps w) f)^(1/n) = omega_c + numer
        exactly (Newton on the smooth increasing scalar map).
        """
        t = self.table
        numer = self.backend.policy_sums(
            u_flat, self.eval_idx, self.nbr_idx, t.ws, t.dir_of, ctrl
        )
        sigma = t.sigma_c[ctrl]
        rhs = self.omega_c[ctrl] + numer
        if self.eps == 0.0:
            return (rhs - self.f_root) / sigma
        w = u_flat[self.eval_idx].copy()
        a = self.eps / self.n
        for _ in range(60):
            rho = np.exp(a * w) * self.f_root
            g = sigma * w + rho - rhs
            dw = g / (sigma + a * rho)
            w -= dw
            if np.max(np.abs(dw)) <= 1e-16 * (1.0 + np.max(np.abs(w))):
                break
        return w

    def mean_shift(self, u_flat, root):
        """Constant shift matching aggregate root mass to right-hand mass.

        Exact along the constant direction since the root ignores constants.
        Returns 0 when the aggregate masses are not both positive.
        """
        if self.eps <= 0.0 or not self.allow_mean_shift:
            return 0.0
        sum_root = float(np.sum(root))
        rho = self.rhs_root(u_flat[self.eval_idx])
        sum_rho = float(np.sum(rho))
        if sum_root <= 0.0 or sum_rho <= 0.0:
            return 0.0
        return (self.n / self.eps) * math.log1p((sum_root - sum_rho) / sum_rho)


def _policy_engine(prob, u_flat, tol_sup, max_outer, inner_sweeps, report):
    res0 = None
    for outer in range(max_outer):
        root, ctrl = prob.root_argmin(u_flat)
        shift = prob.mean_shift(u_flat, root)
        if shift != 0.0:
            u_flat[prob.eval_idx] += shift
        _, sup, l1, root_res = prob.residual(u_flat, root)
        report.residual_sup.append(sup)
        report.residual_l1.append(l1)
        report.iterations = outer + 1
        if not math.isfinite(sup) or not math.isfinite(root_res):
            report.termination = "diverged"
            return u_flat
        if res0 is None:
            res0 = max(sup, root_res)
        if max(sup, root_res) <= tol_sup:
            report.termination = "converged"
            return u_flat
        if max(sup, root_res) > _DIVERGENCE_FACTOR * max(1.0, res0):
            report.termination = "diverged"
            return u_flat
        for _ in range(inner_sweeps):
            u_flat[prob.eval_idx] = prob.jacobi_sweep(u_flat, ctrl)
    report.termination = "iter_limit"
    return u_flat


def _euler_engine(prob, u_flat, tau, tol_sup, max_iter, report):
    res0 = None
    prev_root_res = math.inf
    burn_in = max(10, int(math.ceil(1.0 / tau)))
    for it in range(max_iter):
        root, _ = prob.root_argmin(u_flat)
        rho = prob.rhs_root(u_flat[prob.eval_idx])
        root_res = float(np.max(np.abs(root - rho)))
        _, sup, l1, _ = prob.residual(u_flat, root)
        report.residual_sup.append(sup)
        report.residual_l1.append(l1)
        report.iterations = it + 1
        if not math.isfinite(sup) or not math.isfinite(root_res):
            report.termination = "diverged"
            return u_flat
        if res0 is None:
            res0 = max(sup, root_res)
        if max(sup, root_res) <= tol_sup:
            report.termination = "converged"
            return u_flat
        if max(sup, root_res) > _DIVERGENCE_FACTOR * max(1.0, res0):
            report.termination = "diverged"
            return u_flat
        if it > burn_in and root_res > prev_root_res * (1.0 + 1e-9) + 1e-15:
            report.termination = "diverged"
            return u_flat
        prev_root_res = root_res
        u_flat[prob.eval_idx] += tau * (root - rho)
    report.termination = "iter_limit"
    return u_flat


def constant_bracket(eq: EquationData, A_set: DirectionSet):
    """Constant sub/supersolution levels (c_sub, c_sup) for eps > 0.

    c_sub exists when the background root and the density maximum are
    positive; c_sup additionally needs min density > 0 (returned as None
    otherwise).
    """
    btr = bellman_min_trace(eq.omega, A_set)
    fmax = float(eq.density.values.max())
    fmin = float(eq.density.values.min())
    n = eq.omega.n
    if eq.epsilon <= 0.0:
        raise ValidationError("constant bracket requires eps > 0")
    if btr <= 0.0 or fmax <= 0.0:
        raise NoSubsolutionError(
            "no constant subsolution: background root %.3e, max density %.3e"
            % (btr, fmax)
        )
    c_sub = (1.0 / eq.epsilon) * math.log(btr**n / fmax)
    c_sup = None
    if fmin > 0.0:
        c_sup = (1.0 / eq.epsilon) * math.log(btr**n / fmin)
    return c_sub, c_sup


def solve_compact(eq: EquationData, cfg: SolverConfig, initial=None, A_set=None):
    """Solve (omega + dd^c phi)^n = e^(eps phi) f on the torus, eps > 0."""
    domain = eq.domain
    if not domain.is_torus:
        raise ValidationError("solve_compact requires a torus domain")
    if eq.epsilon <= 0.0:
        raise ValidationError(
            "solve_compact requires eps > 0; use continuation_to_zero for eps = 0"
        )
    if A_set is None:
        A_set = cfg.direction_set(domain.n)
    if cfg.scheme == "perron_sweep":
        phi = perron_envelope(eq, None, cfg, A_set=A_set)
        report = SolverReport(termination="converged")
        return phi, report

    t0 = time.monotonic()
    report = SolverReport()
    report.bracket = constant_bracket(eq, A_set)
    c_sub, c_sup = report.bracket
    start = c_sup if c_sup is not None else c_sub
    if initial is not None:
        u = initial.values.astype(float).copy().ravel()
    else:
        u = np.full(domain.num_points, start)
    prob = _Problem(domain, eq, A_set)
    if cfg.scheme == "euler":
        tau = cfg.effective_tau(domain, A_set)
        report.tau = tau
        u = _euler_engine(prob, u, tau, cfg.tol_sup, cfg.max_iter, report)
    else:
        report.tau = 1.0
        max_outer = max(2, cfg.max_iter // cfg.inner_sweeps)
        u = _policy_engine(prob, u, cfg.tol_sup, max_outer, cfg.inner_sweeps, report)
    report.wall_seconds = time.monotonic() - t0
    phi = GridFunction(domain, u.reshape(domain.shape))
    if report.termination == "iter_limit":
        raise IterationLimitError(
            "compact solve hit max_iter", last_residual=report.residual_sup[-1]
        )
    return phi, report


def _ring_values(domain, boundary):
    mask_flat = domain.boundary_mask().ravel()
    if boundary is None:
        if domain.boundary_data is None:
            raise ValidationError("no boundary data given")
        vals = np.asarray(domain.boundary_data, dtype=float)
    elif isinstance(boundary, GridFunction):
        vals = boundary.values.ravel()[mask_flat]
    else:
        vals = np.asarray(boundary, dtype=float).ravel()
    if vals.shape != (int(mask_flat.sum()),):
        raise ValidationError("boundary data has wrong length")
    if not np.all(np.isfinite(vals)):
        raise ValidationError("boundary data must be finite")
    return vals


def solve_dirichlet(domain: Domain, eq: EquationData, boundary=None,
                    cfg: SolverConfig = None, initial=None, A_set=None):
    """Solve det-form Dirichlet problem on a box: root(u) = rhs in the
    interior, u = gamma on the boundary ring.  eps >= 0 is allowed (the ring
    anchors the iteration even without properness)."""
    if domain.kind != "box":
        raise ValidationError("solve_dirichlet requires a box domain")
    if eq.domain is not domain and eq.domain.shape != domain.shape:
        raise ValidationError("equation data lives on a different domain")
    cfg = cfg or SolverConfig()
    if A_set is None:
        A_set = cfg.direction_set(domain.n)
    gamma = _ring_values(domain, boundary)
    t0 = time.monotonic()
    report = SolverReport()
    mask_flat = domain.boundary_mask().ravel()
    u = np.empty(domain.num_points)
    if initial is not None:
        u[:] = initial.values.ravel()
    else:
        u[:] = float(gamma.max())
    u[mask_flat] = gamma
    prob = _Problem(domain, eq, A_set)
    if cfg.scheme == "euler":
        tau = cfg.effective_tau(domain, A_set)
        report.tau = tau
        u = _euler_engine(prob, u, tau, cfg.tol_sup, cfg.max_iter, report)
    else:
        report.tau = 1.0
        max_outer = max(2, cfg.max_iter // cfg.inner_sweeps)
        u = _policy_engine(prob, u, cfg.tol_sup, max_outer, cfg.inner_sweeps, report)
    report.wall_seconds = time.monotonic() - t0
    sol = GridFunction(domain, u.reshape(domain.shape))
    if report.termination == "iter_limit":
        raise IterationLimitError(
            "dirichlet solve hit max_iter", last_residual=report.residual_sup[-1]
        )
    return sol, report


def weighted_mean(phi: GridFunction, density: DensityField) -> float:
    wsum = float(density.values.sum())
    if wsum <= 0.0:
        raise ValidationError("density has zero mass; cannot normalize")
    return float(np.sum(phi.values * density.values)) / wsum


def continuation_to_zero(eq: EquationData, cfg: SolverConfig, A_set=None):
    """Solve the eps = 0 compact equation as the limit of an eps_j family.

    Requires the density mass to match the omega^n mass to 1e-10 relative.
    Successive solutions are compared after weighted-mean normalization; the
    loop stops when their sup distance drops below cauchy_tol.  The returned
    solution is normalized to integral phi dmu = 0 and the report carries the
    residual of the eps = 0 equation (its nonzero floor is the discretization
    defect of the scheme's mass identity).
    """
    domain = eq.domain
    if not domain.is_torus:
        raise ValidationError("continuation requires a torus domain")
    if eq.epsilon != 0.0:
        raise ValidationError("continuation starts from an eps = 0 target")
    if not eq.mass_normalized:
        raise ValidationError(
            "density mass must equal the omega^n mass (1e-10 relative) "
            "before continuation"
        )
    cont = cfg.continuation or Continuation()
    if A_set is None:
        A_set = cfg.direction_set(domain.n)
    t0 = time.monotonic()
    eps = cont.epsilon_0
    prev = None
    phi = None
    distances = []
    report = SolverReport()
    steps = 0
    for step in range(cont.max_steps):
        eq_j = EquationData(epsilon=eps, density=eq.density, omega=eq.omega)
        phi, rep_j = solve_compact(eq_j, cfg, initial=phi, A_set=A_set)
        steps += 1
        report.iterations += rep_j.iterations
        normalized = phi.values - weighted_mean(phi, eq.density)
        if prev is not None:
            dist = float(np.max(np.abs(normalized - prev)))
            distances.append(dist)
            if dist < cont.cauchy_tol:
                break
        prev = normalized
        eps *= cont.factor
    else:
        raise NonCauchyError(
            "continuation family not Cauchy within %d steps" % cont.max_steps,
            distance_trace=distances,
        )
    out = GridFunction(domain, phi.values - weighted_mean(phi, eq.density))
    prob0 = _Problem(domain, eq, A_set)
    root, _ = prob0.root_argmin(out.values.ravel())
    _, sup0, l10, _ = prob0.residual(out.values.ravel(), root)
    report.residual_sup.append(sup0)
    report.residual_l1.append(l10)
    report.normalization_applied = True
    report.termination = "converged"
    report.wall_seconds = time.monotonic() - t0
    report.extra["continuation_steps"] = steps
    report.extra["final_epsilon"] = eps
    report.extra["cauchy_distances"] = distances
    return out, report


def _axis_intervals(m):
    """Covering intervals (start, width) along one torus axis, overlap >= 2.

    Local box extent is width + 2, which must stay <= m and >= 5.
    """
    w = min(m - 2, max(3, m // 2 + 2))
    if w < 3:
        raise ValidationError("torus extent %d too small for a sweep of boxes" % m)
    step = max(1, w - 2)
    intervals = []
    s = 0
    while True:
        intervals.append((s % m, w))
        if s + w >= m + 2 or len(intervals) > 16:
            break
        s += step
    return intervals


def sweep_boxes(domain: Domain):
    """Deterministic covering family of sub-boxes for the Perron sweep."""
    per_axis = [_axis_intervals(m) for m in domain.shape]
    boxes = [()]
    for iv in per_axis:
        boxes = [b + (pair,) for b in boxes for pair in iv]
    return boxes


def balayage_once(u: GridFunction, B, eq: EquationData, A_set: DirectionSet,
                  tol=1e-10, max_iter=200000, inner_sweeps=25):
    """One local resolution: solve the Dirichlet sub-problem of the same
    equation inside B (values outside frozen at u), return the glued field
    (= u outside B, >= u everywhere when u is a subsolution).  See
    envelopes.balayage for the contract-facing wrapper."""
    domain = u.domain
    if len(B) != domain.num_axes:
        raise ValidationError("sub-box must list one (start, width) pair per axis")
    axis_idx = []
    for (st, wd), m in zip(B, domain.shape):
        if wd < 1:
            raise ValidationError("sub-box widths must be >= 1")
        if domain.is_torus:
            if wd + 2 > m:
                raise ValidationError(
                    "sub-box plus its halo must not cover a full torus axis"
                )
        else:
            if st < 1 or st + wd > m - 1:
                raise ValidationError("sub-box must be strictly interior")
        axis_idx.append(np.arange(st, st + wd) % m)
    idx_grid = np.arange(domain.num_points, dtype=np.int64).reshape(domain.shape)
    flat_B = idx_grid[np.ix_(*axis_idx)].ravel()
    prob = _Problem(domain, eq, A_set, subset_flat=flat_B)
    u_flat = u.values.ravel().copy()
    report = SolverReport()
    max_outer = max(2, max_iter // inner_sweeps)
    u_flat = _policy_engine(prob, u_flat, tol, max_outer, inner_sweeps, report)
    if report.termination != "converged":
        raise IterationLimitError(
            "balayage local solve failed (%s)" % report.termination,
            last_residual=report.residual_sup[-1],
        )
    out = u.copy()
    flat_out = out.values.reshape(-1)
    flat_out[flat_B] = np.maximum(u_flat[flat_B], u.values.ravel()[flat_B])
    return out


def perron_envelope(eq: EquationData, seeds, cfg: SolverConfig, A_set=None):
    """Upper envelope of subsolutions by pointwise max and balayage sweeps.

    `seeds` is a nonempty list of discrete subsolutions; None means the
    constant subsolution from the bracket.  Iterates are pointwise
    nondecreasing and converge to the eps > 0 solution.
    """
    domain = eq.domain
    if not domain.is_torus:
        raise ValidationError("perron_envelope runs on the torus")
    if eq.epsilon <= 0.0:
        raise ValidationError("perron_envelope requires eps > 0")
    if A_set is None:
        A_set = cfg.direction_set(domain.n)
    if seeds is None:
        c_sub, _ = constant_bracket(eq, A_set)
        seeds = [GridFunction.constant(domain, c_sub)]
    if not seeds:
        raise ValidationError("perron_envelope needs at least one seed")
    vals = seeds[0].values.copy()
    for s in seeds[1:]:
        np.maximum(vals, s.values, out=vals)
    phi = GridFunction(domain, vals)
    boxes = sweep_boxes(domain)
    max_sweeps = 4000
    for sweep in range(max_sweeps):
        prev = phi.values.copy()
        for B in boxes:
            phi = balayage_once(
                phi, B, eq, A_set, tol=cfg.tol_sup, max_iter=cfg.max_iter
            )
        change = float(np.max(np.abs(phi.values - prev)))
        if change <= cfg.tol_sup:
            return phi
    raise IterationLimitError(
        "perron sweep did not reach a fixed point", last_residual=change
    )
