"""Vectorized NumPy implementations of the solver's hot kernels.

Array conventions (shared with the compiled backend):
  u_flat    (N,)      field values over the full lattice, row-major
  eval_idx  (M,)      flat indices of evaluation points (all points on a
                      torus, interior points on a box)
  nbr_idx   (D,4,M)   flat indices of the four stencil neighbors per unique
                      direction
  inv4h2    (D,)      1 / (4 * (s*h)^2) per unique direction
  wdirs     (C,D)     control weights accumulated onto unique directions
  omega_c   (C,)      constant background term per control
  ws        (C,K)     weights premultiplied by inv4h2 of their direction
  dir_of    (C,K)     unique-direction id per control slot
"""

import numpy as np


def delta_stack(u_flat, eval_idx, nbr_idx, inv4h2):
    """Directional second differences for all unique directions: (D, M)."""
    center = u_flat[eval_idx]
    stacks = u_flat[nbr_idx]  # (D, 4, M)
    return (stacks.sum(axis=1) - 4.0 * center) * inv4h2[:, None]


def root_argmin(u_flat, eval_idx, nbr_idx, inv4h2, wdirs, omega_c):
    """Bellman root min_c [omega_c + sum_k w Δ] and its argmin control."""
    deltas = delta_stack(u_flat, eval_idx, nbr_idx, inv4h2)
    vals = wdirs @ deltas + omega_c[:, None]
    amin = np.argmin(vals, axis=0)
    root = np.take_along_axis(vals, amin[None, :], axis=0)[0]
    return root, amin.astype(np.int64)


def policy_sums(u_flat, eval_idx, nbr_idx, ws, dir_of, ctrl):
    """Weighted neighbor sums under a frozen control field: (M,).

    Returns numer with root_ctrl(u)(x) = omega_c[ctrl] + numer - sigma_c[ctrl]*u(x).
    """
    del eval_idx  # kept for signature parity with the compiled kernel
    sums = u_flat[nbr_idx].sum(axis=1)  # (D, M)
    m_range = np.arange(ctrl.shape[0])
    numer = np.zeros(ctrl.shape[0])
    for k in range(ws.shape[1]):
        numer += ws[ctrl, k] * sums[dir_of[ctrl, k], m_range]
    return numer
