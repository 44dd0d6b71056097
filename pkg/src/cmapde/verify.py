"""Executable certification: discrete sub/supersolution checks, comparison,
domination, and stability diagnostics.

Jets are not enumerated: the scheme's own monotone operator plays the role
of the test-function quantifier, since the stencil values are exactly the
discrete jets the operator can see.  A Certificate records the worst point
and margin of each check; randomized generators embed their seed so failures
replay.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import InvalidInputError, ValidationError
from .grid import GridFunction
from .operator import EquationData, residual_values, root_field


@dataclass
class Certificate:
    """Outcome of one discrete certification run.

    `passed` mirrors the serialized `pass` key; `worst_value` is the extreme
    margin that decided it, measured against `tolerance`.
    """

    kind: str
    passed: bool
    worst_point: tuple
    worst_value: float
    tolerance: float
    details: dict = field(default_factory=dict)

    def serialize(self):
        core = "certificate kind=%s pass=%s worst_point=%s worst_value=%.17g tolerance=%.17g" % (
            self.kind,
            str(self.passed).lower(),
            "/".join(str(i) for i in self.worst_point) or "-",
            self.worst_value,
            self.tolerance,
        )
        extras = " ".join(
            "%s=%s" % (k, _fmt(v)) for k, v in sorted(self.details.items())
        )
        return core + (" " + extras if extras else "")


def _fmt(v):
    if isinstance(v, bool):
        return str(v).lower()
    if isinstance(v, float):
        return "%.17g" % v
    return str(v)


def _point_of(table, domain, i):
    return tuple(int(c) for c in np.unravel_index(table.eval_idx[i], domain.shape))


def check_subsolution(u: GridFunction, eq: EquationData, A_set, tol=1e-8):
    """Passes iff F(x, u(x), u) <= tol at every admissible point.

    Inadmissible points (Bellman root below -h^2) score +inf, so a
    subsolution certificate also certifies discrete plurisubharmonicity;
    with zero density this is exactly the discrete psh test.
    """
    dom = u.domain
    root, _, table = root_field(u, eq, A_set)
    u_eval = u.values.ravel()[table.eval_idx]
    f_eval = eq.density.values.ravel()[table.eval_idx]
    F = np.exp(eq.epsilon * u_eval) * f_eval - np.maximum(root, 0.0) ** dom.n
    F = np.where(root < -eq.admissibility_tol(), np.inf, F)
    i = int(np.argmax(F))
    worst = float(F[i])
    return Certificate(
        kind="subsolution",
        passed=bool(worst <= tol),
        worst_point=_point_of(table, dom, i),
        worst_value=worst,
        tolerance=tol,
    )


def check_supersolution(v: GridFunction, eq: EquationData, A_set, tol=1e-8):
    """Passes iff F_plus(x, v(x), v) >= -tol everywhere.

    Points whose Bellman root is <= 0 pass automatically through the
    (dd^c)_+ clamp, mirroring that plurisuperharmonic functions are always
    supersolutions.
    """
    dom = v.domain
    res, table = residual_values(v, eq, A_set)
    i = int(np.argmin(res))
    worst = float(res[i])
    return Certificate(
        kind="supersolution",
        passed=bool(worst >= -tol),
        worst_point=_point_of(table, dom, i),
        worst_value=worst,
        tolerance=tol,
    )


def comparison_harness(u: GridFunction, v: GridFunction, eq: EquationData,
                       A_set, tol=1e-8):
    """Certified comparison: a discrete subsolution must sit below a discrete
    supersolution (torus, eps > 0), or below up to its boundary excess (box).

    Raises InvalidInputError when the precondition certificates fail; a
    failing comparison certificate is a counterexample to the scheme's
    monotonicity or properness, i.e. a bug detector.
    """
    dom = u.domain
    if v.domain is not dom and v.domain.shape != dom.shape:
        raise ValidationError("fields live on different domains")
    sub = check_subsolution(u, eq, A_set, tol)
    sup = check_supersolution(v, eq, A_set, tol)
    if not sub.passed:
        raise InvalidInputError(
            "subsolution certificate failed: %s" % sub.serialize()
        )
    if not sup.passed:
        raise InvalidInputError(
            "supersolution certificate failed: %s" % sup.serialize()
        )
    diff = u.values - v.values
    if dom.is_torus:
        if eq.epsilon <= 0.0:
            raise ValidationError("torus comparison requires eps > 0")
        i = int(np.argmax(diff))
        worst = float(diff.ravel()[i])
        point = tuple(int(c) for c in np.unravel_index(i, dom.shape))
        passed = worst <= tol
        details = {"margin": -worst}
    else:
        bmask = dom.boundary_mask()
        ring_excess = float(diff[bmask].max())
        if ring_excess > tol:
            raise InvalidInputError(
                "comparison precondition u <= v on the boundary layer fails "
                "by %.3e" % ring_excess
            )
        interior = np.where(~bmask, diff, -np.inf)
        i = int(np.argmax(interior))
        worst = float(interior.ravel()[i]) - ring_excess
        point = tuple(int(c) for c in np.unravel_index(i, dom.shape))
        passed = worst <= tol
        details = {"ring_excess": ring_excess, "margin": -worst}
    return Certificate(
        kind="comparison",
        passed=bool(passed),
        worst_point=point,
        worst_value=worst,
        tolerance=tol,
        details=details,
    )


def domination_check(phi: GridFunction, psi: GridFunction, eq: EquationData,
                     A_set, tol=1e-8, mass_floor=None):
    """Domination diagnostic: psi <= phi wherever MA(phi) carries mass
    should propagate to psi <= phi everywhere.

    The certificate passes on the global claim; `details` reports whether
    the mass-set premise held, so the interesting discrete failure mode
    (a bump supported on MA-null cells) is flagged rather than asserted.
    """
    dom = phi.domain
    if mass_floor is None:
        mass_floor = dom.h**dom.num_axes * 1e-6
    root, _, table = root_field(phi, eq, A_set)
    cell = dom.h**dom.num_axes
    mass = np.maximum(root, 0.0) ** dom.n * cell
    diff = (psi.values - phi.values).ravel()[table.eval_idx]
    on_mass = mass > mass_floor
    worst_premise = float(np.max(np.where(on_mass, diff, -np.inf))) if on_mass.any() else -math.inf
    i = int(np.argmax(diff))
    worst_global = float(diff[i])
    premise_ok = worst_premise <= tol
    passed = worst_global <= tol
    return Certificate(
        kind="domination",
        passed=bool(passed),
        worst_point=_point_of(table, dom, i),
        worst_value=worst_global,
        tolerance=tol,
        details={
            "premise_ok": premise_ok,
            "worst_on_mass_set": worst_premise,
            "worst_global": worst_global,
            "mass_floor": mass_floor,
        },
    )


@dataclass
class StabilityReport:
    """Measured ingredients of the sup-vs-L1 stability estimate."""

    p: float
    q: float
    gamma: float
    sup_diff_12: float
    l1_diff_12: float
    c_tilde_12: float
    degenerate_12: bool
    sup_diff_21: float
    l1_diff_21: float
    c_tilde_21: float
    degenerate_21: bool
    lp_f1: float
    lp_f2: float

    def summary(self):
        return (
            "stability p=%g gamma=%.6f c12=%s c21=%s"
            % (
                self.p,
                self.gamma,
                "degenerate" if self.degenerate_12 else "%.6g" % self.c_tilde_12,
                "degenerate" if self.degenerate_21 else "%.6g" % self.c_tilde_21,
            )
        )


def _lp_norm(values, p, cell):
    return float((np.abs(values) ** p).sum() * cell) ** (1.0 / p)


def stability_diagnostic(phi1: GridFunction, phi2: GridFunction, f1, f2, p):
    """Empirical constant of sup (psi-phi)+ <= C |f|_p^(1/n) |(psi-phi)+|_1^gamma.

    gamma = 1/(n q + 2) with q = p/(p-1).  Direction 1->2 measures
    (phi2 - phi1)+ against f1 (the density bound of phi1's MA measure); the
    ratio is flagged degenerate when 0/0.
    """
    if p <= 1.0:
        raise ValidationError("stability estimate needs p > 1")
    dom = phi1.domain
    n = dom.n
    q = p / (p - 1.0)
    gamma = 1.0 / (n * q + 2.0)
    cell = dom.h**dom.num_axes
    f1v = f1.values if hasattr(f1, "values") else np.asarray(f1)
    f2v = f2.values if hasattr(f2, "values") else np.asarray(f2)
    lp1 = _lp_norm(f1v, p, cell)
    lp2 = _lp_norm(f2v, p, cell)

    def one_sided(a, b, lp):
        pos = np.maximum(b.values - a.values, 0.0)
        sup = float(pos.max())
        l1 = float(pos.sum() * cell)
        degenerate = sup == 0.0 or l1 == 0.0 or lp == 0.0
        c = 0.0 if degenerate else sup / (lp ** (1.0 / n) * l1**gamma)
        return sup, l1, c, degenerate

    s12, l12, c12, d12 = one_sided(phi1, phi2, lp1)
    s21, l21, c21, d21 = one_sided(phi2, phi1, lp2)
    return StabilityReport(
        p=p, q=q, gamma=gamma,
        sup_diff_12=s12, l1_diff_12=l12, c_tilde_12=c12, degenerate_12=d12,
        sup_diff_21=s21, l1_diff_21=l21, c_tilde_21=c21, degenerate_21=d21,
        lp_f1=lp1, lp_f2=lp2,
    )


def _smooth_squared_field(domain, rng, modes=1):
    """Nonnegative C^2 bump field: square of a low-frequency Fourier field."""
    coords = np.meshgrid(
        *[np.arange(m) / m for m in domain.shape], indexing="ij"
    )
    arg = rng.uniform(0.0, 2.0 * np.pi) * np.ones(domain.shape)
    for c in coords:
        arg = arg + 2.0 * np.pi * rng.integers(-modes, modes + 1) * c
    s = np.cos(arg)
    arg2 = rng.uniform(0.0, 2.0 * np.pi) * np.ones(domain.shape)
    for c in coords:
        arg2 = arg2 + 2.0 * np.pi * rng.integers(-modes, modes + 1) * c
    s = 0.5 * (s + np.cos(arg2))
    return s * s


def generate_certified_pair(eq: EquationData, A_set, seed, amplitude=0.1,
                            tol=1e-8, tol_solve=1e-11):
    """Seeded certified (subsolution, supersolution) pair for eq (eps > 0).

    Solves the same equation with the density scaled by e^(+eps g) and
    e^(-eps g') for independent smooth bumps g, g' >= 0: the first solution
    satisfies root^n = e^(eps u) f e^(eps g) >= e^(eps u) f, so it is a
    certified subsolution of the original equation; the second is a
    supersolution symmetrically.  Returns (u, v, cert_u, cert_v) with the
    seed recorded in both certificates.
    """
    from .solvers import SolverConfig, solve_compact

    if eq.epsilon <= 0.0:
        raise ValidationError("certified pair generation requires eps > 0")
    rng = np.random.default_rng(seed)
    dom = eq.domain
    g_down = amplitude * (_smooth_squared_field(dom, rng) + 0.5)
    g_up = amplitude * (_smooth_squared_field(dom, rng) + 0.5)
    cfg = SolverConfig(tol_sup=tol_solve)
    from .operator import DensityField

    eq_sub = EquationData(
        epsilon=eq.epsilon,
        density=DensityField(dom, eq.density.values * np.exp(eq.epsilon * g_down)),
        omega=eq.omega,
    )
    eq_sup = EquationData(
        epsilon=eq.epsilon,
        density=DensityField(dom, eq.density.values * np.exp(-eq.epsilon * g_up)),
        omega=eq.omega,
    )
    u, _ = solve_compact(eq_sub, cfg, A_set=A_set)
    v, _ = solve_compact(eq_sup, cfg, A_set=A_set)
    cert_u = check_subsolution(u, eq, A_set, tol)
    cert_v = check_supersolution(v, eq, A_set, tol)
    cert_u.details["seed"] = seed
    cert_v.details["seed"] = seed
    return u, v, cert_u, cert_v
