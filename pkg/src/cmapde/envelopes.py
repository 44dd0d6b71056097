"""Regularization and envelope constructions: sup/inf convolution,
plurisubharmonic projection, and balayage.

The discrete psh cone is defined through the same Bellman root as the
solver (ma_root >= -psd_floor), not through eigenvalues of the central
Hessian, so projection and solver are monotone in the same scheme and the
contact-set diagnostics hold discretely.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import DomainTooSmallError, IterationLimitError, ValidationError
from .grid import GridFunction
from .operator import EquationData, compile_table, root_field
from .solvers import balayage_once


@dataclass
class EnvelopeParams:
    """Knobs of the envelope constructions.

    delta is the quadratic-penalty width of sup/inf convolution; psd_floor is
    the discrete psh slack (None means h^2, the scheme's consistency scale).
    """

    delta: float = 0.1
    max_iter: int = 200000
    tol: float = 1e-10
    psd_floor: float = None

    def __post_init__(self):
        if self.delta <= 0.0:
            raise ValidationError("delta must be positive")
        if self.tol <= 0.0:
            raise ValidationError("tol must be positive")
        if self.max_iter < 1:
            raise ValidationError("max_iter must be >= 1")

    def floor_for(self, domain):
        return domain.h**2 if self.psd_floor is None else self.psd_floor


def _search_offsets(domain, delta, osc):
    """Integer offsets within the localization radius A*delta, A^2 > 2 osc."""
    A = math.ceil(math.sqrt(2.0 * max(osc, 0.0))) + 1
    radius = A * delta
    r_cells = int(math.ceil(radius / domain.h))
    if domain.kind == "box":
        if min(domain.shape) - 2 * r_cells < 1:
            raise DomainTooSmallError(
                "search radius %d cells leaves no interior point" % r_cells
            )
    ranges = [np.arange(-r_cells, r_cells + 1)] * domain.num_axes
    grids = np.meshgrid(*ranges, indexing="ij")
    offs = np.stack([g.ravel() for g in grids], axis=1)
    norms = np.sqrt((offs.astype(float) ** 2).sum(axis=1)) * domain.h
    return offs[norms <= radius + 1e-12]


def sup_convolution(u: GridFunction, delta: float) -> GridFunction:
    """Exact lattice sup-convolution sup_y { u(y) - |y-x|^2 / (2 delta^2) }.

    The maximization is restricted to the radius A*delta with
    A^2 > 2 osc(u), which does not change the value; on the torus offsets are
    taken as unwrapped representatives so each branch is a fixed quadratic
    and the output keeps the delta^-2 semiconvexity bound.  The output
    dominates u pointwise and is nondecreasing in delta.
    """
    if delta <= 0.0:
        raise ValidationError("delta must be positive")
    dom = u.domain
    vals = u.values
    osc = float(vals.max() - vals.min())
    offsets = _search_offsets(dom, delta, osc)
    out = vals.copy()
    inv2d2 = 1.0 / (2.0 * delta * delta)
    axes = tuple(range(dom.num_axes))
    for off in offsets:
        if not off.any():
            continue
        pen = float((off.astype(float) ** 2).sum()) * dom.h**2 * inv2d2
        if dom.is_torus:
            cand = np.roll(vals, shift=tuple(-off), axis=axes) - pen
            np.maximum(out, cand, out=out)
        else:
            src = []
            dst = []
            ok = True
            for o, m in zip(off, dom.shape):
                if abs(o) >= m:
                    ok = False
                    break
                src.append(slice(o, None) if o >= 0 else slice(None, o))
                dst.append(slice(None, m - o) if o >= 0 else slice(-o, None))
            if not ok:
                continue
            view = out[tuple(dst)]
            np.maximum(view, vals[tuple(src)] - pen, out=view)
    return GridFunction(dom, out)


def inf_convolution(v: GridFunction, delta: float) -> GridFunction:
    """Dual regularization; equals -sup_convolution(-v, delta) bit-exactly."""
    neg = GridFunction(v.domain, -v.values, allow_extended=v.allow_extended)
    w = sup_convolution(neg, delta)
    return GridFunction(v.domain, -w.values)


def psh_projection(h: GridFunction, eq: EquationData, params: EnvelopeParams,
                   A_set=None) -> GridFunction:
    """Largest grid function P <= h with ma_root(P, x) >= -psd_floor.

    Monotone obstacle iteration from P = h: where the Bellman root dips below
    the floor, P is lowered proportionally and re-clipped under h.  The map
    is monotone at the chosen step, so iterates decrease to the envelope.
    On a box the boundary ring is kept at h (no psh constraint is imposed
    there).
    """
    from .solvers import SolverConfig  # default set resolution

    dom = h.domain
    if A_set is None:
        A_set = SolverConfig().direction_set(dom.n)
    table = compile_table(dom, A_set)
    floor = params.floor_for(dom)
    # largest stable step: tau * max_c sum_k w/(s h)^2 <= 1
    sigma_max = float(np.max(table.sigma_c))
    tau = 0.9 / sigma_max
    P = h.copy()
    flat = P.values.reshape(-1)
    h_flat = h.values.ravel()
    last = math.inf
    for _ in range(params.max_iter):
        root, _, _ = root_field(P, eq, A_set)
        deficit = np.minimum(root + floor, 0.0)
        last = float(np.max(-deficit)) if deficit.size else 0.0
        if last * tau <= params.tol:
            return P
        flat[table.eval_idx] += tau * deficit
        np.minimum(flat, h_flat, out=flat)
    raise IterationLimitError(
        "psh projection did not converge (deficit %.3e)" % last,
        last_residual=last,
    )


@dataclass
class ContactReport:
    """Outcome of the contact-set identity diagnostic."""

    passed: bool
    off_contact_worst: float
    off_contact_point: tuple
    mass_envelope: float
    mass_obstacle_contact: float
    mass_gap: float
    contact_fraction: float

    def summary(self):
        return (
            "contact_check pass=%s off_contact_worst=%.3e mass_gap=%.3e "
            "contact_fraction=%.3f"
            % (
                str(self.passed).lower(),
                self.off_contact_worst,
                self.mass_gap,
                self.contact_fraction,
            )
        )


def contact_set_identity_check(h: GridFunction, P: GridFunction,
                               eq: EquationData, A_set,
                               contact_tol=1e-9, identity_tol=1e-6):
    """Check that the envelope's MA mass lives on the contact set {P = h}.

    Verifies (i) max(root, 0)^n <= identity_tol wherever P < h - contact_tol,
    and (ii) total MA mass of P equals the mass of h restricted to the
    contact set within identity_tol.  Pure diagnostic; returns a report.
    """
    dom = h.domain
    n = dom.n
    cell = dom.h**dom.num_axes
    root_p, _, table = root_field(P, eq, A_set)
    root_h, _, _ = root_field(h, eq, A_set)
    gap = h.values.ravel()[table.eval_idx] - P.values.ravel()[table.eval_idx]
    off = gap > contact_tol
    mass_p = np.maximum(root_p, 0.0) ** n
    mass_h = np.maximum(root_h, 0.0) ** n
    if off.any():
        worst_i = int(np.argmax(np.where(off, mass_p, -np.inf)))
        off_worst = float(mass_p[worst_i])
        off_point = tuple(
            int(c)
            for c in np.unravel_index(table.eval_idx[worst_i], dom.shape)
        )
    else:
        off_worst = 0.0
        off_point = ()
    total_p = float(mass_p.sum()) * cell
    contact_h = float(mass_h[~off].sum()) * cell
    mass_gap = total_p - contact_h
    passed = off_worst <= identity_tol and abs(mass_gap) <= identity_tol
    return ContactReport(
        passed=passed,
        off_contact_worst=off_worst,
        off_contact_point=off_point,
        mass_envelope=total_p,
        mass_obstacle_contact=contact_h,
        mass_gap=mass_gap,
        contact_fraction=float(1.0 - off.mean()) if off.size else 1.0,
    )


def balayage(u: GridFunction, B, eq: EquationData, A_set,
             params: EnvelopeParams = None) -> GridFunction:
    """Local resolution inside the sub-box B, keeping u outside.

    `u` must be a discrete subsolution; B lists one (start, width) pair per
    lattice axis (wrapping starts are allowed on the torus).  The returned
    field solves the equation's Dirichlet sub-problem in B with boundary
    data u, dominates u everywhere, and stays a subsolution.
    """
    params = params or EnvelopeParams()
    B = tuple((int(s), int(w)) for s, w in B)
    if len(B) != u.domain.num_axes:
        raise ValidationError(
            "sub-box must list one (start, width) pair per axis"
        )
    return balayage_once(
        u, B, eq, A_set, tol=params.tol, max_iter=params.max_iter
    )
