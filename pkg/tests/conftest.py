import numpy as np
import pytest

from cmapde.grid import Domain, GridFunction
from cmapde.hermitian import HermitianForm, generate_direction_set
from cmapde.operator import DensityField, EquationData, root_field


def torus(n, m):
    return Domain(kind="torus", n=n, shape=(m,) * (2 * n), h=1.0 / m)


def smooth_field(domain, rng, amplitude=1.0, modes=2):
    """Random low-frequency Fourier field sampled on the lattice (C^2 data)."""
    coords = np.meshgrid(
        *[np.arange(m) / m for m in domain.shape], indexing="ij"
    )
    vals = np.zeros(domain.shape)
    for _ in range(4):
        k = rng.integers(-modes, modes + 1, size=domain.num_axes)
        phase = rng.uniform(0.0, 2.0 * np.pi)
        amp = rng.normal(0.0, amplitude / 4.0)
        arg = phase * np.ones(domain.shape)
        for c, kk in zip(coords, k):
            arg = arg + 2.0 * np.pi * kk * c
        vals = vals + amp * np.cos(arg)
    return GridFunction(domain, vals)


def manufactured_compact(m, amplitude=0.05, epsilon=1.0, A_set=None):
    """Manufactured torus problem: phi* = amplitude cos(2 pi x1) and the
    density built from the discrete operator, so phi* is the exact discrete
    solution."""
    d = torus(2, m)
    if A_set is None:
        A_set = generate_direction_set(2)
    x1 = (np.arange(m) / m)[:, None, None, None] * np.ones(d.shape)
    phi_star = GridFunction(d, amplitude * np.cos(2 * np.pi * x1))
    probe = EquationData(
        epsilon=epsilon,
        density=DensityField.constant(d, 1.0),
        omega=HermitianForm.identity(2),
    )
    root, _, _ = root_field(phi_star, probe, A_set)
    dens = np.exp(-epsilon * phi_star.values.ravel()) * np.maximum(root, 0.0) ** 2
    eq = EquationData(
        epsilon=epsilon,
        density=DensityField(d, dens.reshape(d.shape)),
        omega=HermitianForm.identity(2),
    )
    return phi_star, eq, A_set


@pytest.fixture(scope="session")
def rich2():
    return generate_direction_set(2, "axes+diagonals", 9)
