"""The discrete complex Monge-Ampere operator in Bellman form.

The root form of the operator at a lattice point x is

    ma_root(u, x) = min over controls A of sum_k w_k [ v_k* omega v_k + D_{v_k} u(x) ],

a monotone discretization of det(omega + u_{z zbar})^(1/n).  From it the two
Hamiltonians of the viscosity formulation are

    F      = e^(eps s) f(x) - max(root, 0)^n,   +inf when root < -h^2
    F_plus = e^(eps s) f(x) - max(root, 0)^n    (finite everywhere),

the +inf clause being the discrete surrogate of the admissibility cone
omega + dd^c u >= 0, with tolerance h^2 so it vanishes under refinement.
"""

from __future__ import annotations

import math
from collections import namedtuple
from dataclasses import dataclass

import numpy as np

from . import _kernels
from .errors import ValidationError
from .grid import Domain, GridFunction, directional_second_difference, displacement_vectors
from .hermitian import DirectionSet, HermitianForm, eigen_decompose, lattice_scale


@dataclass(eq=False)
class DensityField:
    """Nonnegative density of the right-hand measure w.r.t. h^{2n} counting."""

    domain: Domain
    values: np.ndarray

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=float)
        if self.values.shape != self.domain.shape:
            raise ValidationError("density shape does not match domain")
        if not np.all(np.isfinite(self.values)):
            raise ValidationError("density values must be finite")
        if np.any(self.values < 0.0):
            raise ValidationError("density values must be nonnegative")

    def clipped(self, level):
        """min(f, level): the bounded-density approximation device."""
        if level <= 0.0:
            raise ValidationError("clip level must be positive")
        return DensityField(self.domain, np.minimum(self.values, level))

    def mass(self):
        return float(self.values.sum()) * self.domain.h ** self.domain.num_axes

    @staticmethod
    def constant(domain, value):
        return DensityField(domain, np.full(domain.shape, float(value)))


@dataclass(eq=False)
class EquationData:
    """Data of (omega + dd^c u)^n = e^(eps u) * density on the domain.

    `mass_normalized` records whether the total density mass matches the
    omega volume (required before continuation to eps = 0).
    """

    epsilon: float
    density: DensityField
    omega: HermitianForm
    mass_normalized: bool = False

    def __post_init__(self):
        if self.epsilon < 0.0:
            raise ValidationError("epsilon must be nonnegative")
        if self.omega.n != self.density.domain.n:
            raise ValidationError("omega dimension does not match domain")
        w, _ = eigen_decompose(self.omega)
        if w[0] < -1e-12 * (1.0 + self.omega.norm_inf()):
            raise ValidationError("omega must be positive semidefinite")
        dom = self.density.domain
        if dom.is_torus:
            target = self.omega_volume()
            mass = self.density.mass()
            self.mass_normalized = bool(
                abs(mass - target) <= 1e-10 * max(abs(target), 1.0)
            )

    @property
    def domain(self):
        return self.density.domain

    def omega_volume(self):
        """Total omega^n mass: det(omega) times the unit torus volume."""
        w, _ = eigen_decompose(self.omega)
        return float(np.prod(w))

    def admissibility_tol(self):
        return self.domain.h ** 2


class StencilTable:
    """Compiled stencil data binding a domain to a direction set.

    Deduplicates stencil directions across controls (v, -v, iv, -iv share one
    four-point stencil) and precomputes flat neighbor indices so kernels can
    run gather-only sweeps.
    """

    def __init__(self, domain: Domain, A_set: DirectionSet):
        if domain.n != A_set.n:
            raise ValidationError("direction set dimension does not match domain")
        self.domain = domain
        self.A_set = A_set
        shape = domain.shape
        na = domain.num_axes

        canon = {}
        dir_vectors = []
        dir_scales = []
        dir_of = np.empty((len(A_set.controls), domain.n), dtype=np.int64)
        weights = np.empty((len(A_set.controls), domain.n))
        for ci, ctl in enumerate(A_set.controls):
            weights[ci] = ctl.weights
            for k in range(domain.n):
                v = ctl.frame[k]
                s = lattice_scale(v)
                key = _canonical_direction(v * s)
                if key not in canon:
                    canon[key] = len(dir_vectors)
                    dir_vectors.append(v.copy())
                    dir_scales.append(s)
                dir_of[ci, k] = canon[key]
        self.dir_vectors = dir_vectors
        self.dir_of = dir_of
        self.weights = weights
        D = len(dir_vectors)
        h = domain.h
        self.inv4h2 = np.array(
            [1.0 / (4.0 * (s * h) ** 2) for s in dir_scales]
        )

        if domain.is_torus:
            eval_idx = np.arange(domain.num_points, dtype=np.int64)
        else:
            eval_idx = domain.interior_flat_indices().astype(np.int64)
        self.eval_idx = eval_idx

        idx_grid = np.arange(domain.num_points, dtype=np.int64).reshape(shape)
        strides = np.array(
            [int(np.prod(shape[a + 1:], dtype=np.int64)) for a in range(na)],
            dtype=np.int64,
        )
        nbr = np.empty((D, 4, eval_idx.shape[0]), dtype=np.int64)
        for d, (v, s) in enumerate(zip(dir_vectors, dir_scales)):
            d_re, d_im = displacement_vectors(v, s)
            for j, disp in enumerate((d_re, -d_re, d_im, -d_im)):
                if domain.is_torus:
                    rolled = np.roll(
                        idx_grid, shift=tuple(-disp), axis=tuple(range(na))
                    )
                    nbr[d, j] = rolled.ravel()[eval_idx]
                else:
                    nbr[d, j] = eval_idx + int(np.dot(disp, strides))
        self.nbr_idx = nbr

        # weights accumulated per unique direction, for the min-trace kernel
        C = len(A_set.controls)
        wdirs = np.zeros((C, D))
        for ci in range(C):
            for k in range(domain.n):
                wdirs[ci, dir_of[ci, k]] += weights[ci, k]
        self.wdirs = wdirs
        self.ws = weights * self.inv4h2[dir_of]
        self.sigma_c = (self.ws * 4.0).sum(axis=1)
        self._omega_cache = {}

    def omega_quads(self, omega: HermitianForm):
        """Per-control constant sum_k w_k Re(v_k* omega v_k)."""
        key = omega.mat.tobytes()
        if key not in self._omega_cache:
            qd = np.array([omega.quad(v) for v in self.dir_vectors])
            quads = np.empty(len(self.A_set.controls))
            for ci in range(len(self.A_set.controls)):
                quads[ci] = float(
                    np.dot(self.weights[ci], qd[self.dir_of[ci]])
                )
            self._omega_cache[key] = quads
        return self._omega_cache[key]


def _canonical_direction(sv):
    """Canonical key of a scaled direction modulo sign and i-rotation."""
    best = None
    z = np.asarray(sv, dtype=complex)
    for unit in (1.0, -1.0, 1.0j, -1.0j):
        w = unit * z
        key = tuple(
            (int(round(c.real)), int(round(c.imag))) for c in w
        )
        if best is None or key < best:
            best = key
    return best


_TABLE_CACHE = {}


def compile_table(domain: Domain, A_set: DirectionSet) -> StencilTable:
    key = (id(domain), id(A_set))
    hit = _TABLE_CACHE.get(key)
    if hit is not None and hit[0] is domain and hit[1] is A_set:
        return hit[2]
    table = StencilTable(domain, A_set)
    _TABLE_CACHE[key] = (domain, A_set, table)
    return table


def root_field(u: GridFunction, eq: EquationData, A_set: DirectionSet):
    """Bellman root and argmin control at every evaluation point.

    Returns (root, amin, table); root and amin are flat over table.eval_idx.
    """
    table = compile_table(u.domain, A_set)
    omega_c = table.omega_quads(eq.omega)
    backend = _kernels.active_backend()
    root, amin = backend.root_argmin(
        u.values.ravel(), table.eval_idx, table.nbr_idx, table.inv4h2,
        table.wdirs, omega_c,
    )
    return root, amin, table


def ma_root(u: GridFunction, x, eq: EquationData, A_set: DirectionSet) -> float:
    """Pointwise Bellman root at lattice point x (reference path).

    Evaluates each control through the directional stencils directly; the
    field path in `root_field` must agree with this to rounding.
    """
    if u.domain.n != A_set.n:
        raise ValidationError("direction set dimension does not match field")
    best = math.inf
    for ctl in A_set.controls:
        val = 0.0
        for k in range(u.domain.n):
            v = ctl.frame[k]
            val += ctl.weights[k] * (
                eq.omega.quad(v) + directional_second_difference(u, x, v)
            )
        if val < best:
            best = val
    return best


def hamiltonian_F(x, s, u: GridFunction, eq: EquationData, A_set: DirectionSet):
    """Subsolution-side Hamiltonian; +inf on inadmissible jets."""
    r = ma_root(u, x, eq, A_set)
    if r < -eq.admissibility_tol():
        return math.inf
    n = u.domain.n
    fx = eq.density.values[tuple(int(i) for i in np.atleast_1d(x))]
    return math.exp(eq.epsilon * s) * fx - max(r, 0.0) ** n


def hamiltonian_F_plus(x, s, u: GridFunction, eq: EquationData, A_set: DirectionSet):
    """Supersolution-side Hamiltonian with the (dd^c)_+ clamp; always finite."""
    r = ma_root(u, x, eq, A_set)
    n = u.domain.n
    fx = eq.density.values[tuple(int(i) for i in np.atleast_1d(x))]
    return math.exp(eq.epsilon * s) * fx - max(r, 0.0) ** n


ResidualField = namedtuple("ResidualField", ["field", "sup", "l1"])


def residual_values(u: GridFunction, eq: EquationData, A_set: DirectionSet):
    """F_plus with s = u(x) at all evaluation points (flat array) plus table."""
    root, _, table = root_field(u, eq, A_set)
    n = u.domain.n
    u_flat = u.values.ravel()[table.eval_idx]
    f_flat = eq.density.values.ravel()[table.eval_idx]
    res = np.exp(eq.epsilon * u_flat) * f_flat - np.maximum(root, 0.0) ** n
    return res, table


def residual_field(u: GridFunction, eq: EquationData, A_set: DirectionSet):
    """Pointwise F_plus residual with sup and L1 (h^{2n}-weighted) norms.

    On a box the boundary ring is excluded from both norms and reported as 0.
    """
    res, table = residual_values(u, eq, A_set)
    vals = np.zeros(u.domain.num_points)
    vals[table.eval_idx] = res
    sup = float(np.max(np.abs(res))) if res.size else 0.0
    l1 = float(np.sum(np.abs(res))) * u.domain.h ** u.domain.num_axes
    return ResidualField(
        field=GridFunction(u.domain, vals.reshape(u.domain.shape)),
        sup=sup,
        l1=l1,
    )


def ma_mass(u: GridFunction, eq: EquationData, A_set: DirectionSet):
    """Discrete Monge-Ampere mass max(root,0)^n * h^{2n} at evaluation points."""
    root, _, table = root_field(u, eq, A_set)
    n = u.domain.n
    cell = u.domain.h ** u.domain.num_axes
    return np.maximum(root, 0.0) ** n * cell, table
