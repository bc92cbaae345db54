"""Dense symmetric linear algebra for small (m x m, m ~ 2..20) matrices.

Everything is plain float64 numpy. Factorization is an unpivoted Cholesky
with a deterministic positive-definiteness test; the eigensolver is a
cyclic Jacobi iteration, which is robust and fully accurate at these sizes.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ConvergenceFailure, NotPositiveDefinite

# Pivots at or below PIVOT_RTOL * max(diag) classify the matrix as not
# positive definite.
PIVOT_RTOL = 1e-12

JACOBI_OFFDIAG_RTOL = 1e-14
JACOBI_MAX_SWEEPS = 100


class SpdMatrix:
    """Symmetric positive (semi)definite matrix with a cached factorization.

    The stored array is symmetrized on construction, so downstream code can
    rely on exact symmetry. Definiteness is only established when a
    factorization is requested.
    """

    __slots__ = ("a", "_factor")

    def __init__(self, entries):
        a = np.asarray(entries, dtype=np.float64)
        if a.ndim != 2 or a.shape[0] != a.shape[1]:
            raise ValueError(f"expected a square matrix, got shape {a.shape}")
        self.a = 0.5 * (a + a.T)
        self._factor = None

    @property
    def dim(self) -> int:
        return self.a.shape[0]

    def factor(self) -> "CholeskyFactor":
        if self._factor is None:
            self._factor = spd_factorize(self)
        return self._factor

    def __repr__(self):
        return f"SpdMatrix(dim={self.dim})"


@dataclass
class CholeskyFactor:
    """Lower-triangular factor L with A = L L^T and log det(A)."""

    lower: np.ndarray
    logdet: float


def _as_array(a) -> np.ndarray:
    return a.a if isinstance(a, SpdMatrix) else np.asarray(a, dtype=np.float64)


def _cholesky(a: np.ndarray) -> np.ndarray:
    m = a.shape[0]
    diag_max = float(np.max(np.diag(a))) if m else 0.0
    pivot_tol = PIVOT_RTOL * diag_max
    lower = np.zeros_like(a)
    for j in range(m):
        pivot = a[j, j] - lower[j, :j] @ lower[j, :j]
        if pivot <= pivot_tol:
            raise NotPositiveDefinite(
                f"pivot {pivot:.3e} at step {j} is at or below {pivot_tol:.3e}"
            )
        ljj = np.sqrt(pivot)
        lower[j, j] = ljj
        if j + 1 < m:
            lower[j + 1 :, j] = (a[j + 1 :, j] - lower[j + 1 :, :j] @ lower[j, :j]) / ljj
    return lower


def spd_factorize(a) -> CholeskyFactor:
    """Cholesky-factorize a symmetric matrix, reporting log det(A).

    Raises NotPositiveDefinite when any pivot falls at or below the
    deterministic threshold PIVOT_RTOL * max(diag A).
    """
    arr = _as_array(a)
    lower = _cholesky(arr)
    logdet = 2.0 * float(np.sum(np.log(np.diag(lower))))
    return CholeskyFactor(lower=lower, logdet=logdet)


def _solve_lower(lower: np.ndarray, rhs: np.ndarray) -> np.ndarray:
    """Forward substitution L x = rhs for column-stacked right-hand sides."""
    x = np.array(rhs, dtype=np.float64, copy=True)
    m = lower.shape[0]
    for i in range(m):
        if i:
            x[i] -= lower[i, :i] @ x[:i]
        x[i] /= lower[i, i]
    return x


def _inverse_from_lower(lower: np.ndarray) -> np.ndarray:
    linv = _solve_lower(lower, np.eye(lower.shape[0]))
    inv = linv.T @ linv
    return 0.5 * (inv + inv.T)


def spd_inverse(a) -> SpdMatrix:
    """Inverse of a positive definite matrix via its Cholesky factor."""
    arr = _as_array(a)
    return SpdMatrix(_inverse_from_lower(_cholesky(arr)))


def _jacobi(a: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    m = a.shape[0]
    work = np.array(a, dtype=np.float64, copy=True)
    vecs = np.eye(m)
    fro = float(np.linalg.norm(work))
    if fro == 0.0:
        return np.zeros(m), vecs
    target = JACOBI_OFFDIAG_RTOL * fro
    off_mask = ~np.eye(m, dtype=bool)
    for _ in range(JACOBI_MAX_SWEEPS):
        off = float(np.linalg.norm(work[off_mask]))
        if off <= target:
            break
        for p in range(m - 1):
            for q in range(p + 1, m):
                apq = work[p, q]
                if abs(apq) <= 0.1 * target / m:
                    continue
                theta = 0.5 * (work[q, q] - work[p, p]) / apq
                t = np.sign(theta) / (abs(theta) + np.hypot(theta, 1.0)) if theta != 0.0 else 1.0
                c = 1.0 / np.hypot(t, 1.0)
                s = t * c
                rp, rq = work[p, :].copy(), work[q, :].copy()
                work[p, :] = c * rp - s * rq
                work[q, :] = s * rp + c * rq
                cp, cq = work[:, p].copy(), work[:, q].copy()
                work[:, p] = c * cp - s * cq
                work[:, q] = s * cp + c * cq
                work[p, q] = 0.0
                work[q, p] = 0.0
                vp, vq = vecs[:, p].copy(), vecs[:, q].copy()
                vecs[:, p] = c * vp - s * vq
                vecs[:, q] = s * vp + c * vq
    else:
        raise ConvergenceFailure(
            f"Jacobi eigensolver did not converge in {JACOBI_MAX_SWEEPS} sweeps"
        )
    vals = np.diag(work).copy()
    order = np.argsort(vals, kind="stable")
    return vals[order], vecs[:, order]


def sym_eigen(a) -> tuple[np.ndarray, np.ndarray]:
    """Eigendecomposition of a symmetric matrix by cyclic Jacobi rotations.

    Returns (eigenvalues ascending, eigenvectors as columns in matching
    order). Raises ConvergenceFailure if the sweep cap is hit.
    """
    arr = _as_array(a)
    arr = 0.5 * (arr + arr.T)
    return _jacobi(arr)


def inv_sqrt_spd(a) -> SpdMatrix:
    """Inverse symmetric square root S = A^(-1/2), with S A S = I."""
    arr = _as_array(a)
    _cholesky(arr)  # definiteness gate with the standard error semantics
    vals, vecs = _jacobi(0.5 * (arr + arr.T))
    if np.any(vals <= 0.0):
        raise NotPositiveDefinite("nonpositive eigenvalue in inverse square root")
    s = (vecs * (1.0 / np.sqrt(vals))) @ vecs.T
    return SpdMatrix(s)
