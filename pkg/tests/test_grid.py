import math

import numpy as np
import pytest

from cmapde.errors import BoundaryError, ValidationError
from cmapde.grid import (
    Domain,
    GridFunction,
    directional_second_difference,
    discrete_complex_hessian,
    grid_quadratic,
)
from cmapde.hermitian import hermitian_part


def torus(n, m):
    return Domain(kind="torus", n=n, shape=(m,) * (2 * n), h=1.0 / m)


def box(n, ext, h=0.1):
    return Domain(kind="box", n=n, shape=(ext,) * (2 * n), h=h)


def sample(domain, fn):
    """Sample fn(coords array (2n,)) over the lattice."""
    grids = np.meshgrid(
        *[np.arange(m) * domain.h for m in domain.shape], indexing="ij"
    )
    pts = np.stack([g.ravel() for g in grids], axis=1)
    vals = np.array([fn(p) for p in pts])
    return GridFunction(domain, vals.reshape(domain.shape))


class TestDomain:
    def test_torus_requires_unit_period(self):
        with pytest.raises(ValidationError):
            Domain(kind="torus", n=1, shape=(8, 8), h=0.2)

    def test_extent_minimums(self):
        with pytest.raises(ValidationError):
            Domain(kind="torus", n=1, shape=(3, 4), h=1.0 / 3.0)
        with pytest.raises(ValidationError):
            Domain(kind="box", n=1, shape=(4, 5), h=0.1)

    def test_boundary_mask_counts(self):
        d = box(1, 5)
        assert int(d.boundary_mask().sum()) == 25 - 9
        assert int(d.interior_mask().sum()) == 9

    def test_torus_has_no_boundary(self):
        d = torus(1, 8)
        assert not d.boundary_mask().any()


class TestDirectionalSecondDifference:
    def test_abs_z_squared_gives_unit(self):
        # u = |z|^2 -> v* u_{z zbar} v = |v|^2 = 1 for unit v, exactly
        d = box(2, 7, h=0.25)
        u = sample(d, lambda p: np.dot(p, p))
        x = (3, 3, 3, 3)
        for v in (
            np.array([1.0, 0.0]),
            np.array([0.0, 1.0]),
            np.array([1.0, 1.0]) / math.sqrt(2),
            np.array([1.0, 1.0j]) / math.sqrt(2),
        ):
            val = directional_second_difference(u, x, v)
            assert val == pytest.approx(1.0, abs=1e-12)

    def test_pluriharmonic_re_z1sq_gives_zero(self):
        d = box(2, 7, h=0.25)
        u = sample(d, lambda p: p[0] ** 2 - p[1] ** 2)  # Re(z_1^2)
        x = (3, 2, 4, 3)
        for v in (
            np.array([1.0, 0.0]),
            np.array([1.0, 1.0]) / math.sqrt(2),
            np.array([1.0, -1.0j]) / math.sqrt(2),
        ):
            val = directional_second_difference(u, x, v)
            assert val == pytest.approx(0.0, abs=1e-12)

    def test_quartic_symbolic_value(self):
        # u = |z_1|^4 at z = 0 along e_1: the four stencil values are all
        # h^4, so the difference is 4 h^4 / (4 h^2) = h^2.
        for h in (0.5, 0.25, 0.125):
            ext = 7
            d = Domain(kind="box", n=1, shape=(ext, ext), h=h)
            c = ext // 2
            u = sample(d, lambda p: ((p[0] - c * h) ** 2 + (p[1] - c * h) ** 2) ** 2)
            val = directional_second_difference(u, (c, c), np.array([1.0]))
            assert val == pytest.approx(h**2, rel=1e-10)

    def test_linearity(self):
        d = torus(1, 8)
        rng = np.random.default_rng(0)
        u = GridFunction(d, rng.standard_normal(d.shape))
        w = GridFunction(d, rng.standard_normal(d.shape))
        comb = GridFunction(d, 2.0 * u.values - 3.0 * w.values)
        v = np.array([1.0])
        x = (2, 5)
        lhs = directional_second_difference(comb, x, v)
        rhs = 2.0 * directional_second_difference(
            u, x, v
        ) - 3.0 * directional_second_difference(w, x, v)
        assert lhs == pytest.approx(rhs, abs=1e-12)

    def test_monotone_in_neighbors(self):
        d = torus(1, 8)
        u = GridFunction.zeros(d)
        v = np.array([1.0])
        x = (4, 4)
        base = directional_second_difference(u, x, v)
        for nbr in ((5, 4), (3, 4), (4, 5), (4, 3)):
            u2 = u.copy()
            u2.values[nbr] += 1.0
            assert directional_second_difference(u2, x, v) >= base

    def test_translation_invariance_on_torus(self):
        d = torus(1, 8)
        rng = np.random.default_rng(1)
        u = GridFunction(d, rng.standard_normal(d.shape))
        shifted = GridFunction(d, np.roll(u.values, (2, 3), axis=(0, 1)))
        v = np.array([1.0])
        a = directional_second_difference(u, (1, 2), v)
        b = directional_second_difference(shifted, (3, 5), v)
        assert a == pytest.approx(b, abs=1e-15)

    def test_box_boundary_errors(self):
        d = box(1, 5)
        u = GridFunction.zeros(d)
        with pytest.raises(BoundaryError):
            directional_second_difference(u, (0, 2), np.array([1.0]))

    def test_invalid_direction(self):
        d = torus(1, 8)
        u = GridFunction.zeros(d)
        with pytest.raises(ValidationError):
            directional_second_difference(u, (1, 1), np.array([0.6 + 0.8j]))

    def test_consistency_order_richardson(self):
        # Smooth periodic non-quadratic field; Richardson slope >= 1.9.
        def f(p):
            return math.exp(
                0.4 * math.sin(2 * math.pi * p[0]) + 0.3 * math.cos(2 * math.pi * p[1])
            )

        v = np.array([1.0])
        vals = []
        for m in (8, 16, 32):
            d = torus(1, m)
            u = sample(d, f)
            x = (m // 4, m // 8)
            vals.append(directional_second_difference(u, x, v))
        e1 = abs(vals[0] - vals[1])
        e2 = abs(vals[1] - vals[2])
        slope = math.log2(e1 / e2)
        assert slope >= 1.9


class TestDiscreteComplexHessian:
    def test_abs_z_squared_is_identity(self):
        d = box(2, 7, h=0.2)
        u = sample(d, lambda p: np.dot(p, p))
        H = discrete_complex_hessian(u, (3, 3, 3, 3))
        assert np.allclose(H.mat, np.eye(2), atol=1e-11)

    def test_constant_is_zero(self):
        d = box(1, 5)
        u = GridFunction.constant(d, 4.2)
        H = discrete_complex_hessian(u, (2, 2))
        assert np.allclose(H.mat, 0.0, atol=1e-13)

    def test_recovers_hermitian_coefficients(self):
        # u = sum a_jk z_j zbar_k + Re(poly in z): the pluriharmonic part
        # drops and the Hermitian coefficient matrix is recovered exactly.
        a = np.array([[2.0, 0.5 - 0.25j], [0.5 + 0.25j, 1.0]])

        def f(p):
            z = np.array([p[0] + 1j * p[1], p[2] + 1j * p[3]])
            herm = np.real(z @ a @ np.conj(z))  # sum a_jk z_j zbar_k
            pluri = np.real(0.3 * z[0] ** 2 - 0.7j * z[0] * z[1])
            return herm + pluri

        d = box(2, 7, h=0.2)
        u = sample(d, f)
        H = discrete_complex_hessian(u, (3, 2, 3, 4))
        assert np.allclose(H.mat, a, atol=1e-10)

    def test_boundary_error(self):
        d = box(1, 5)
        u = GridFunction.zeros(d)
        with pytest.raises(BoundaryError):
            discrete_complex_hessian(u, (4, 2))


class TestGridQuadratic:
    def test_zero_data(self):
        d = box(1, 6)
        g = grid_quadratic(d, (3, 3), 0.0, np.zeros(2), np.zeros((2, 2)))
        assert np.all(g.values == 0.0)

    def test_pure_quadratic_hessian_everywhere(self):
        d = box(2, 7, h=0.2)
        Q = 2.0 * np.eye(4)  # |z|^2 in real coordinates
        g = grid_quadratic(d, (3, 3, 3, 3), 0.0, np.zeros(4), Q)
        for x in ((1, 1, 1, 1), (3, 3, 3, 3), (5, 4, 2, 3)):
            H = discrete_complex_hessian(g, x)
            assert np.allclose(H.mat, np.eye(2), atol=1e-11)

    def test_round_trip_random_jet(self):
        rng = np.random.default_rng(12)
        d = box(2, 7, h=0.2)
        Qr = rng.standard_normal((4, 4))
        Qr = Qr + Qr.T
        grad = rng.standard_normal(4)
        g = grid_quadratic(d, (3, 3, 3, 3), 1.5, grad, Qr)
        # value at center
        assert g.values[3, 3, 3, 3] == pytest.approx(1.5, abs=1e-12)
        H = discrete_complex_hessian(g, (3, 3, 3, 3))
        assert np.allclose(H.mat, hermitian_part(Qr).mat, atol=1e-10)
