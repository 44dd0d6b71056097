"""Lattices over flat tori and boxes in C^n, with monotone complex stencils.

Real coordinates are interleaved: lattice axis 2j carries Re z_j and axis
2j+1 carries Im z_j.  The torus has period 1 per real axis, so h * m = 1 on
every axis; boxes carry one boundary layer (the outermost Chebyshev ring)
around the interior.

The workhorse is the four-point directional second difference

    D_v u(x) = [u(x+hv) + u(x-hv) + u(x+ihv) + u(x-ihv) - 4 u(x)] / (4 h^2),

which is exact on complex quadratics (pluriharmonic parts cancel in pairs),
O(h^2)-consistent with v* u_{z zbar} v on C^4 fields, and has positive
off-center coefficients, i.e. it is monotone.  Directions from the diagonal
family use effective spacing h * sqrt(2) so the displaced points stay on the
lattice.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import BoundaryError, ValidationError
from .hermitian import SUPPORTED_DIMS, HermitianForm, hermitian_part, lattice_scale


@dataclass(frozen=True, eq=False)
class Domain:
    """A torus or box lattice in C^n.

    `shape` lists the 2n lattice extents; `h` is the uniform spacing.  For a
    box, `boundary_data` optionally carries default Dirichlet values on the
    boundary ring, flattened in row-major order of the full lattice.
    """

    kind: str
    n: int
    shape: tuple
    h: float
    boundary_data: np.ndarray = None
    _cache: dict = field(default_factory=dict, repr=False)

    def __post_init__(self):
        if self.kind not in ("torus", "box"):
            raise ValidationError("domain kind must be 'torus' or 'box'")
        if self.n not in SUPPORTED_DIMS:
            raise ValidationError("unsupported complex dimension %d" % self.n)
        if len(self.shape) != 2 * self.n:
            raise ValidationError(
                "shape must list %d extents, got %d" % (2 * self.n, len(self.shape))
            )
        if self.h <= 0.0:
            raise ValidationError("spacing must be positive")
        min_extent = 4 if self.kind == "torus" else 5
        for m in self.shape:
            if m < min_extent:
                raise ValidationError(
                    "%s extents must be >= %d" % (self.kind, min_extent)
                )
        if self.kind == "torus":
            for m in self.shape:
                if abs(self.h * m - 1.0) > 1e-12:
                    raise ValidationError(
                        "torus convention requires h * extent == 1 per axis"
                    )
        if self.boundary_data is not None:
            if self.kind != "box":
                raise ValidationError("only box domains carry boundary data")
            ring = int(self.boundary_mask().sum())
            if self.boundary_data.shape != (ring,):
                raise ValidationError(
                    "boundary data must hold %d ring values" % ring
                )

    @property
    def num_axes(self):
        return 2 * self.n

    @property
    def num_points(self):
        return int(np.prod(self.shape))

    @property
    def is_torus(self):
        return self.kind == "torus"

    def boundary_mask(self):
        """Boolean mask of the outermost ring (all False on a torus)."""
        if "bmask" not in self._cache:
            mask = np.zeros(self.shape, dtype=bool)
            if self.kind == "box":
                for ax, m in enumerate(self.shape):
                    sl_lo = [slice(None)] * self.num_axes
                    sl_lo[ax] = 0
                    mask[tuple(sl_lo)] = True
                    sl_hi = [slice(None)] * self.num_axes
                    sl_hi[ax] = m - 1
                    mask[tuple(sl_hi)] = True
            self._cache["bmask"] = mask
        return self._cache["bmask"]

    def interior_mask(self):
        return ~self.boundary_mask()

    def interior_flat_indices(self):
        if "iflat" not in self._cache:
            self._cache["iflat"] = np.flatnonzero(self.interior_mask().ravel())
        return self._cache["iflat"]

    def coords(self, index):
        """Real coordinates of a lattice multi-index."""
        return np.asarray(index, dtype=float) * self.h

    def contains(self, index):
        return all(0 <= i < m for i, m in zip(index, self.shape))

    def wrap(self, index):
        return tuple(int(i) % m for i, m in zip(index, self.shape))


@dataclass(eq=False)
class GridFunction:
    """A real scalar field sampled on a domain lattice."""

    domain: Domain
    values: np.ndarray
    allow_extended: bool = False

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=float)
        if self.values.shape != self.domain.shape:
            raise ValidationError(
                "values shape %r does not match domain shape %r"
                % (self.values.shape, self.domain.shape)
            )
        self.check_finite()

    def check_finite(self):
        if self.allow_extended:
            if np.any(np.isnan(self.values)) or np.any(self.values == np.inf):
                raise ValidationError("grid values must not contain NaN or +inf")
        elif not np.all(np.isfinite(self.values)):
            raise ValidationError("grid values must be finite")

    def copy(self):
        return GridFunction(self.domain, self.values.copy(), self.allow_extended)

    @staticmethod
    def constant(domain, value):
        return GridFunction(domain, np.full(domain.shape, float(value)))

    @staticmethod
    def zeros(domain):
        return GridFunction.constant(domain, 0.0)

    def __add__(self, other):
        if isinstance(other, GridFunction):
            return GridFunction(self.domain, self.values + other.values)
        return GridFunction(self.domain, self.values + other)

    def __sub__(self, other):
        if isinstance(other, GridFunction):
            return GridFunction(self.domain, self.values - other.values)
        return GridFunction(self.domain, self.values - other)


def displacement_vectors(v, scale):
    """Integer lattice displacements of s*v and s*(iv) in interleaved axes."""
    sv = scale * np.asarray(v, dtype=complex)
    d_re = np.empty(2 * len(sv), dtype=np.int64)
    d_im = np.empty(2 * len(sv), dtype=np.int64)
    d_re[0::2] = np.round(sv.real)
    d_re[1::2] = np.round(sv.imag)
    # multiplication by i maps (re, im) -> (-im, re)
    d_im[0::2] = np.round(-sv.imag)
    d_im[1::2] = np.round(sv.real)
    return d_re, d_im


def _point_value(u, index):
    dom = u.domain
    if dom.is_torus:
        return u.values[dom.wrap(index)]
    if not dom.contains(index):
        raise BoundaryError("stencil point %r leaves the box" % (index,))
    return u.values[tuple(int(i) for i in index)]


def directional_second_difference(u, x, v, h=None):
    """Monotone second difference of u at lattice point x along direction v.

    Discretizes v* u_{z zbar} v.  `v` must be lattice-representable; on a box
    the whole four-point stencil must stay inside the lattice.
    """
    dom = u.domain
    if h is None:
        h = dom.h
    elif abs(h - dom.h) > 1e-15 * dom.h:
        raise ValidationError("spacing %r does not match the domain" % (h,))
    s = lattice_scale(np.asarray(v, dtype=complex))
    d_re, d_im = displacement_vectors(v, s)
    x = np.asarray(x, dtype=np.int64)
    if not dom.is_torus and dom.boundary_mask()[tuple(x)]:
        raise BoundaryError("stencil center %r is on the boundary ring" % (x,))
    total = (
        _point_value(u, x + d_re)
        + _point_value(u, x - d_re)
        + _point_value(u, x + d_im)
        + _point_value(u, x - d_im)
        - 4.0 * _point_value(u, x)
    )
    return total / (4.0 * (s * h) ** 2)


def discrete_complex_hessian(u, x):
    """Central-difference u_{z zbar}(x) as a HermitianForm.

    Diagnostic only: assembled from all real second-order central differences
    via the Hermitian-part projection, so it is O(h^2)-consistent but not
    monotone.
    """
    dom = u.domain
    x = np.asarray(x, dtype=np.int64)
    if not dom.is_torus and dom.boundary_mask()[tuple(x)]:
        raise BoundaryError("point %r is on the boundary ring" % (x,))
    na = dom.num_axes
    h = dom.h
    Q = np.empty((na, na))
    e = np.eye(na, dtype=np.int64)
    u0 = _point_value(u, x)
    for a in range(na):
        Q[a, a] = (
            _point_value(u, x + e[a]) - 2.0 * u0 + _point_value(u, x - e[a])
        ) / h**2
        for b in range(a + 1, na):
            cross = (
                _point_value(u, x + e[a] + e[b])
                - _point_value(u, x + e[a] - e[b])
                - _point_value(u, x - e[a] + e[b])
                + _point_value(u, x - e[a] - e[b])
            ) / (4.0 * h**2)
            Q[a, b] = cross
            Q[b, a] = cross
    return hermitian_part(Q, sym_tol=1e-9 * (1.0 + np.max(np.abs(Q))))


def grid_quadratic(domain, center, value, gradient, Q):
    """Sample the second-order polynomial with the given 2-jet at `center`.

    Coordinates are affine in the lattice index (no wrap-around on the
    torus), so stencil read-back of value/gradient/Hessian at the center is
    exact.
    """
    gradient = np.asarray(gradient, dtype=float)
    Q = np.asarray(Q, dtype=float)
    na = domain.num_axes
    if gradient.shape != (na,):
        raise ValidationError("gradient must have %d components" % na)
    if Q.shape != (na, na) or np.max(np.abs(Q - Q.T)) > 1e-12:
        raise ValidationError("Hessian must be symmetric %d x %d" % (na, na))
    grids = np.meshgrid(
        *[(np.arange(m) - c) * domain.h for m, c in zip(domain.shape, center)],
        indexing="ij",
    )
    rel = np.stack([g.ravel() for g in grids], axis=1)
    vals = value + rel @ gradient + 0.5 * np.einsum("pa,ab,pb->p", rel, Q, rel)
    return GridFunction(domain, vals.reshape(domain.shape))
