"""Small-dimension Hermitian linear algebra and the Bellman control machinery.

Everything here works on n x n complex Hermitian matrices with n in {1, 2, 3}.
The central object is the quantized control family used to write the
determinant as an infimum of traces,

    det(H)^(1/n) = inf { tr(A H) : A Hermitian positive, det(A) = n^-n },

which is what turns the complex Monge-Ampere operator into a monotone
min-of-linear-operators scheme.  A finite control family under-minimizes the
infimum, so the finite min is always an upper bound of det(H)^(1/n) for
H >= 0, with equality whenever the eigenframe of H and the weight vector
proportional to its reciprocal eigenvalues both belong to the family.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import ValidationError

SUPPORTED_DIMS = (1, 2, 3)

# Weight-grid bounds before renormalization to det = n^-n.  They bound the
# scheme's condition number; see generate_direction_set.
KAPPA_MIN = 1.0 / 16.0
KAPPA_MAX = 16.0

_HERM_ATOL = 1e-14
_JACOBI_TOL = 1e-13


@dataclass(frozen=True, eq=False)
class HermitianForm:
    """An n x n complex Hermitian matrix (a constant (1,1)-form value).

    `mat` is stored exactly Hermitian; use `from_matrix` to validate and
    symmetrize arbitrary input.
    """

    n: int
    mat: np.ndarray

    @staticmethod
    def from_matrix(mat, atol=_HERM_ATOL) -> "HermitianForm":
        mat = np.asarray(mat, dtype=complex)
        if mat.ndim != 2 or mat.shape[0] != mat.shape[1]:
            raise ValidationError("hermitian form must be a square matrix")
        n = mat.shape[0]
        if n not in SUPPORTED_DIMS:
            raise ValidationError("unsupported complex dimension %d" % n)
        dev = np.max(np.abs(mat - mat.conj().T)) if n else 0.0
        if dev > atol * (1.0 + np.max(np.abs(mat))):
            raise ValidationError(
                "matrix is not Hermitian (deviation %.3e)" % dev
            )
        sym = 0.5 * (mat + mat.conj().T)
        return HermitianForm(n=n, mat=sym)

    @staticmethod
    def zero(n) -> "HermitianForm":
        return HermitianForm(n=n, mat=np.zeros((n, n), dtype=complex))

    @staticmethod
    def identity(n, scale=1.0) -> "HermitianForm":
        return HermitianForm(n=n, mat=scale * np.eye(n, dtype=complex))

    def norm_inf(self) -> float:
        return float(np.max(np.abs(self.mat))) if self.n else 0.0

    def quad(self, v) -> float:
        """Real value of the quadratic form v* H v."""
        v = np.asarray(v, dtype=complex)
        return float(np.real(np.vdot(v, self.mat @ v)))


def hermitian_part(Q, sym_tol=1e-12) -> HermitianForm:
    """Hermitian part of a real symmetric 2n x 2n quadratic form.

    Real coordinates are interleaved: axis 2j is Re z_j, axis 2j+1 is Im z_j.
    The result H satisfies, for every complex vector v with real embedding r(v),

        v* H v = (1/4) * (Q(r(v), r(v)) + Q(r(iv), r(iv))),

    equivalently H[j,k] = (Q_{x_j x_k} + Q_{y_j y_k})/4 + i (Q_{x_j y_k} - Q_{y_j x_k})/4.
    """
    Q = np.asarray(Q, dtype=float)
    if Q.ndim != 2 or Q.shape[0] != Q.shape[1] or Q.shape[0] % 2 != 0:
        raise ValidationError("expected a 2n x 2n real matrix")
    if np.max(np.abs(Q - Q.T)) > sym_tol:
        raise ValidationError("input quadratic form is not symmetric")
    n = Q.shape[0] // 2
    if n not in SUPPORTED_DIMS:
        raise ValidationError("unsupported complex dimension %d" % n)
    xx = Q[0::2, 0::2]
    yy = Q[1::2, 1::2]
    xy = Q[0::2, 1::2]
    yx = Q[1::2, 0::2]
    H = 0.25 * (xx + yy) + 0.25j * (xy - yx)
    return HermitianForm.from_matrix(H, atol=1e-12)


def _rotate(A, V, p, q):
    """One unitary Jacobi rotation zeroing A[p, q] in place."""
    apq = A[p, q]
    r = abs(apq)
    if r == 0.0:
        return
    phase = apq / r
    app = A[p, p].real
    aqq = A[q, q].real
    theta = 0.5 * math.atan2(2.0 * r, app - aqq)
    c = math.cos(theta)
    s = math.sin(theta)
    # U differs from the identity only in the (p, q) plane:
    # U[p,p]=c, U[p,q]=-s*phase, U[q,p]=s*conj(phase), U[q,q]=c
    col_p = c * A[:, p] + s * np.conj(phase) * A[:, q]
    col_q = -s * phase * A[:, p] + c * A[:, q]
    A[:, p] = col_p
    A[:, q] = col_q
    row_p = c * A[p, :] + s * phase * A[q, :]
    row_q = -s * np.conj(phase) * A[p, :] + c * A[q, :]
    A[p, :] = row_p
    A[q, :] = row_q
    A[p, q] = 0.0
    A[q, p] = 0.0
    A[p, p] = A[p, p].real
    A[q, q] = A[q, q].real
    vcol_p = c * V[:, p] + s * np.conj(phase) * V[:, q]
    vcol_q = -s * phase * V[:, p] + c * V[:, q]
    V[:, p] = vcol_p
    V[:, q] = vcol_q


def eigen_decompose(H: HermitianForm):
    """Eigenvalues (ascending) and an orthonormal eigenframe of H.

    Returns (w, V) with w real ascending and V[:, k] the unit eigenvector of
    w[k].  Uses the closed-form rotation for n <= 2 and cyclic Jacobi
    rotations for n = 3; the reconstruction error is below
    1e-12 * (1 + |H|).
    """
    n = H.n
    if n == 1:
        w = np.array([H.mat[0, 0].real])
        return w, np.eye(1, dtype=complex)
    A = H.mat.astype(complex, copy=True)
    V = np.eye(n, dtype=complex)
    scale = 1.0 + H.norm_inf()
    if n == 2:
        _rotate(A, V, 0, 1)
    else:
        for _ in range(60):
            off = math.sqrt(
                abs(A[0, 1]) ** 2 + abs(A[0, 2]) ** 2 + abs(A[1, 2]) ** 2
            )
            if off <= _JACOBI_TOL * scale:
                break
            for p, q in ((0, 1), (0, 2), (1, 2)):
                if abs(A[p, q]) > 0.0:
                    _rotate(A, V, p, q)
    w = np.real(np.diag(A)).copy()
    order = np.argsort(w, kind="stable")
    return w[order], V[:, order]


def det_plus(H: HermitianForm) -> float:
    """Monge-Ampere clamp: det(H) when H is (numerically) semipositive, else 0.

    The positivity test tolerates eigenvalues down to -1e-10 * (1 + |H|);
    eigenvalues inside the tolerance band are clamped to zero before taking
    the product, so the result is never negative and a strictly positive
    result implies all eigenvalues are strictly positive.
    """
    w, _ = eigen_decompose(H)
    psd_tol = 1e-10 * (1.0 + H.norm_inf())
    if w[0] < -psd_tol:
        return 0.0
    return float(np.prod(np.maximum(w, 0.0)))


# Gaussian-integer entries admitted in a lattice direction, before unit
# scaling: 0, +-1, +-i, and the quarter-turn units +-1 +- i.
_LATTICE_ENTRIES = {
    (0, 0),
    (1, 0), (-1, 0), (0, 1), (0, -1),
    (1, 1), (1, -1), (-1, 1), (-1, -1),
}


def lattice_scale(v, tol=1e-9) -> float:
    """Smallest s > 0 such that s*v has admissible Gaussian-integer entries.

    Raises ValidationError when v is not lattice-representable or not unit.
    """
    v = np.asarray(v, dtype=complex)
    nrm = float(np.linalg.norm(v))
    if abs(nrm - 1.0) > tol:
        raise ValidationError("direction must have unit norm")
    for k in range(1, 4 * len(v) + 1):
        s = math.sqrt(k)
        sv = s * v
        re = np.round(sv.real)
        im = np.round(sv.imag)
        if np.max(np.abs(sv.real - re)) > tol or np.max(np.abs(sv.imag - im)) > tol:
            continue
        entries = {(int(a), int(b)) for a, b in zip(re, im)}
        if entries <= _LATTICE_ENTRIES:
            return s
    raise ValidationError("direction is not lattice-representable: %r" % (v,))


@dataclass(frozen=True, eq=False)
class Control:
    """One Bellman control: an orthonormal frame with positive weights.

    `frame` rows are the directions; `weights` multiply to n^-n.
    """

    frame: np.ndarray
    weights: np.ndarray


@dataclass(frozen=True, eq=False)
class DirectionSet:
    """Quantized family of positive Hermitian controls with det = n^-n."""

    n: int
    controls: tuple
    resolution: tuple  # (frame_count, weight_levels)

    def __post_init__(self):
        if self.n not in SUPPORTED_DIMS:
            raise ValidationError("unsupported complex dimension %d" % self.n)
        if not self.controls:
            raise ValidationError("direction set is empty")
        target = float(self.n) ** (-self.n)
        has_isotropic = False
        for ctl in self.controls:
            if ctl.frame.shape != (self.n, self.n):
                raise ValidationError("frame has wrong shape")
            if np.any(ctl.weights <= 0.0):
                raise ValidationError("control weights must be positive")
            prod = float(np.prod(ctl.weights))
            if abs(prod - target) > 1e-12 * target:
                raise ValidationError(
                    "control weights multiply to %.17g, expected %.17g"
                    % (prod, target)
                )
            gram = ctl.frame @ ctl.frame.conj().T
            if np.max(np.abs(gram - np.eye(self.n))) > 1e-12:
                raise ValidationError("frame is not orthonormal")
            for row in ctl.frame:
                lattice_scale(row)
            if np.max(np.abs(ctl.frame - np.eye(self.n))) < 1e-14 and np.max(
                np.abs(ctl.weights - 1.0 / self.n)
            ) < 1e-13:
                has_isotropic = True
        if not has_isotropic:
            raise ValidationError("direction set lacks the isotropic control")

    def __len__(self):
        return len(self.controls)

    def max_weight(self) -> float:
        return max(float(np.max(c.weights)) for c in self.controls)


def _frames(n, frame_family):
    eye = np.eye(n, dtype=complex)
    frames = [eye]
    if frame_family == "axes":
        return frames
    if frame_family != "axes+diagonals":
        raise ValidationError("unknown frame family %r" % (frame_family,))
    inv_sqrt2 = 1.0 / math.sqrt(2.0)
    for j in range(n):
        for k in range(j + 1, n):
            rest = [eye[l] for l in range(n) if l not in (j, k)]
            for unit in (1.0, 1.0j):
                a = inv_sqrt2 * (eye[j] + unit * eye[k])
                b = inv_sqrt2 * (eye[j] - unit * eye[k])
                frames.append(np.array([a, b] + rest))
    return frames


def _weight_vectors(n, weight_levels, kappa_min, kappa_max):
    """One weight vector per level, log-spaced then scaled to product n^-n."""
    if weight_levels == 1:
        grid = np.array([1.0])
    else:
        grid = np.geomspace(kappa_min, kappa_max, weight_levels)
    out = []
    for t in grid:
        if n == 1:
            raw = np.array([1.0])
        elif n == 2:
            raw = np.array([t, 1.0 / t])
        else:
            raw = np.array([t, 1.0, 1.0 / t])
        scale = (float(n) ** (-n) / np.prod(raw)) ** (1.0 / n)
        out.append(raw * scale)
    return out


def generate_direction_set(
    n,
    frame_family="axes+diagonals",
    weight_levels=9,
    kappa_min=KAPPA_MIN,
    kappa_max=KAPPA_MAX,
) -> DirectionSet:
    """Build the deterministic quantized control family.

    Controls enumerate frames (axes first, then pair diagonals) against a
    log-uniform weight grid on [kappa_min, kappa_max], each weight vector
    projected to product n^-n.  The isotropic control (standard frame,
    weights 1/n) is always a member; for odd weight_levels it is the middle
    level of the standard frame.
    """
    if n not in SUPPORTED_DIMS:
        raise ValidationError("unsupported complex dimension %d" % n)
    if weight_levels < 1:
        raise ValidationError("weight_levels must be >= 1")
    frames = _frames(n, frame_family)
    wvecs = _weight_vectors(n, weight_levels, kappa_min, kappa_max)
    controls = []
    seen = set()
    for fr in frames:
        for w in wvecs:
            key = (fr.tobytes(), w.tobytes())
            if key in seen:
                continue
            seen.add(key)
            controls.append(Control(frame=fr.copy(), weights=w.copy()))
    iso = np.full(n, 1.0 / n)
    if not any(
        np.array_equal(c.frame, np.eye(n, dtype=complex))
        and np.max(np.abs(c.weights - iso)) < 1e-13
        for c in controls
    ):
        controls.append(Control(frame=np.eye(n, dtype=complex), weights=iso))
    return DirectionSet(
        n=n,
        controls=tuple(controls),
        resolution=(len(frames), weight_levels),
    )


def bellman_min_trace(H: HermitianForm, A_set: DirectionSet) -> float:
    """min over controls A of tr(A H) = sum_k w_k (v_k* H v_k).

    For H >= 0 this is >= det(H)^(1/n); ties are broken toward the lowest
    control index.
    """
    val, _ = bellman_min_trace_argmin(H, A_set)
    return val


def bellman_min_trace_argmin(H: HermitianForm, A_set: DirectionSet):
    if H.n != A_set.n:
        raise ValidationError(
            "dimension mismatch: form has n=%d, controls have n=%d"
            % (H.n, A_set.n)
        )
    best = math.inf
    best_idx = -1
    for idx, ctl in enumerate(A_set.controls):
        quads = np.real(np.einsum("kj,jl,kl->k", ctl.frame.conj(), H.mat, ctl.frame))
        val = float(np.dot(ctl.weights, quads))
        if val < best:
            best = val
            best_idx = idx
    return best, best_idx
