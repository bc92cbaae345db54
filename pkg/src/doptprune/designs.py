"""Candidate sets, designs, information matrices and the D-criterion.

A candidate set holds N regressor vectors of dimension m, either in memory
or behind a replayable chunk generator (so that multi-pass algorithms can
stream sets that are too large to materialize). A design is a sparse
nonnegative weight vector over candidate indices summing to one; exact
designs additionally carry integer replication counts.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Iterator, Optional

import numpy as np

from .errors import DimensionMismatch, IndexOutOfRange, NotPositiveDefinite
from .linalg import SpdMatrix, _inverse_from_lower, spd_factorize, inv_sqrt_spd

# Fixed chunk length for streamed candidate sources. All chunked reductions
# run in ascending chunk order, so results do not depend on threading.
CHUNK_SIZE = 65536

# Input designs may miss a unit weight sum by at most this much before they
# are rejected; smaller deviations are renormalized away.
WEIGHT_SUM_TOL = 1e-9

# Weights at or below this level are dropped from the support.
SUPPORT_EPS = 1e-12

# Candidate sets whose total float count stays below this are materialized
# when a caller asks for an in-memory view (about 64 MB of float64).
AUTO_CACHE_LIMIT = 1 << 23


class CandidateSet:
    """N candidate regressors of dimension m, array- or generator-backed."""

    def __init__(
        self,
        n_points: int,
        dim: int,
        array: Optional[np.ndarray] = None,
        chunk_fn: Optional[Callable[[int], np.ndarray]] = None,
        cache: Optional[bool] = None,
        ids: Optional[np.ndarray] = None,
        points: Optional[np.ndarray] = None,
    ):
        if n_points < 2 or dim < 2:
            raise ValueError(f"need N >= 2 and m >= 2, got N={n_points}, m={dim}")
        if (array is None) == (chunk_fn is None):
            raise ValueError("exactly one of array/chunk_fn must be given")
        self.N = int(n_points)
        self.m = int(dim)
        self._array = None if array is None else np.ascontiguousarray(array, dtype=np.float64)
        if self._array is not None and self._array.shape != (self.N, self.m):
            raise DimensionMismatch(f"array shape {self._array.shape} != ({self.N}, {self.m})")
        self._chunk_fn = chunk_fn
        if cache is None:
            cache = self.N * self.m <= AUTO_CACHE_LIMIT
        self._cache: Optional[list] = [None] * self.num_chunks if (cache and chunk_fn) else None
        self.ids = np.arange(self.N, dtype=np.int64) if ids is None else np.asarray(ids, dtype=np.int64)
        if self.ids.shape != (self.N,):
            raise DimensionMismatch("ids must have one entry per candidate")
        self.points = None if points is None else np.asarray(points, dtype=np.float64)

    @classmethod
    def from_array(cls, array, ids=None, points=None) -> "CandidateSet":
        array = np.asarray(array, dtype=np.float64)
        return cls(array.shape[0], array.shape[1], array=array, ids=ids, points=points)

    @classmethod
    def from_generator(cls, chunk_fn, n_points, dim, cache=None, ids=None, points=None) -> "CandidateSet":
        """Wrap a replayable producer; chunk_fn(c) returns chunk c as an array.

        Replaying any chunk must give bit-identical vectors, so that
        multi-pass streaming algorithms are deterministic.
        """
        return cls(n_points, dim, chunk_fn=chunk_fn, cache=cache, ids=ids, points=points)

    @property
    def num_chunks(self) -> int:
        return (self.N + CHUNK_SIZE - 1) // CHUNK_SIZE

    def _chunk(self, c: int) -> np.ndarray:
        if self._array is not None:
            return self._array[c * CHUNK_SIZE : min((c + 1) * CHUNK_SIZE, self.N)]
        if self._cache is not None and self._cache[c] is not None:
            return self._cache[c]
        block = np.asarray(self._chunk_fn(c), dtype=np.float64)
        expected = min((c + 1) * CHUNK_SIZE, self.N) - c * CHUNK_SIZE
        if block.shape != (expected, self.m):
            raise DimensionMismatch(f"chunk {c} has shape {block.shape}, expected ({expected}, {self.m})")
        if self._cache is not None:
            self._cache[c] = block
        return block

    def chunks(self) -> Iterator[tuple[int, np.ndarray]]:
        """Yield (start_index, block) in ascending order."""
        for c in range(self.num_chunks):
            yield c * CHUNK_SIZE, self._chunk(c)

    def gather(self, indices) -> np.ndarray:
        """Vectors at the given indices (regenerating chunks if needed)."""
        idx = np.atleast_1d(np.asarray(indices, dtype=np.int64))
        if idx.size and (idx.min() < 0 or idx.max() >= self.N):
            raise IndexOutOfRange(f"candidate index outside [0, {self.N})")
        if self._array is not None:
            return self._array[idx]
        out = np.empty((idx.size, self.m))
        for c in np.unique(idx // CHUNK_SIZE):
            mask = idx // CHUNK_SIZE == c
            out[mask] = self._chunk(int(c))[idx[mask] - c * CHUNK_SIZE]
        return out

    def toarray(self) -> np.ndarray:
        if self._array is not None:
            return self._array
        return np.concatenate([block for _, block in self.chunks()], axis=0)

    def transformed(self, t: np.ndarray) -> "CandidateSet":
        """Candidate set of f_i @ t (used for standardizing regressors)."""
        t = np.asarray(t, dtype=np.float64)
        if t.shape != (self.m, self.m):
            raise DimensionMismatch(f"transform must be {self.m} x {self.m}")
        if self._array is not None:
            return CandidateSet.from_array(self._array @ t, ids=self.ids, points=self.points)
        base_fn = self._chunk  # closes over any cache of the base set
        return CandidateSet.from_generator(
            lambda c: base_fn(c) @ t,
            self.N,
            self.m,
            cache=self._cache is not None,
            ids=self.ids,
            points=self.points,
        )

    def subset(self, indices) -> "CandidateSet":
        """In-memory candidate set restricted to the given indices."""
        idx = np.asarray(indices, dtype=np.int64)
        return CandidateSet.from_array(
            self.gather(idx),
            ids=self.ids[idx],
            points=None if self.points is None else self.points[idx],
        )

    def __repr__(self):
        kind = "array" if self._array is not None else "generator"
        return f"CandidateSet(N={self.N}, m={self.m}, {kind})"


class Design:
    """Sparse design: positive weights on candidate indices, summing to 1.

    Exact designs carry integer replication counts r_i with weights r_i / n.
    """

    def __init__(self, indices, weights, counts=None, n=None):
        self.indices = np.asarray(indices, dtype=np.int64)
        self.weights = np.asarray(weights, dtype=np.float64)
        self.counts = None if counts is None else np.asarray(counts, dtype=np.int64)
        self.n = None if n is None else int(n)

    @classmethod
    def approximate(cls, indices, weights) -> "Design":
        indices = np.asarray(indices, dtype=np.int64)
        weights = np.asarray(weights, dtype=np.float64)
        if indices.shape != weights.shape:
            raise DimensionMismatch("indices and weights must align")
        if np.any(weights < 0.0):
            raise ValueError("negative design weight")
        total = float(weights.sum())
        if abs(total - 1.0) > WEIGHT_SUM_TOL:
            raise ValueError(f"design weights sum to {total!r}, not 1")
        keep = weights > SUPPORT_EPS
        indices, weights = indices[keep], weights[keep]
        order = np.argsort(indices, kind="stable")
        indices, weights = indices[order], weights[order]
        if np.any(np.diff(indices) == 0):
            raise ValueError("duplicate support index")
        return cls(indices, weights / weights.sum())

    @classmethod
    def exact(cls, indices, counts, n) -> "Design":
        indices = np.asarray(indices, dtype=np.int64)
        counts = np.asarray(counts)
        if not np.issubdtype(counts.dtype, np.integer):
            rounded = np.rint(counts).astype(np.int64)
            if np.any(np.abs(counts - rounded) > 1e-9):
                raise ValueError("exact design counts must be integers")
            counts = rounded
        counts = counts.astype(np.int64)
        if np.any(counts < 0):
            raise ValueError("negative replication count")
        if counts.sum() != n:
            raise ValueError(f"counts sum to {int(counts.sum())}, expected n={n}")
        keep = counts > 0
        indices, counts = indices[keep], counts[keep]
        order = np.argsort(indices, kind="stable")
        indices, counts = indices[order], counts[order]
        if np.any(np.diff(indices) == 0):
            raise ValueError("duplicate support index")
        return cls(indices, counts / float(n), counts=counts, n=int(n))

    @property
    def kind(self) -> str:
        return "exact" if self.n is not None else "approximate"

    @property
    def support_size(self) -> int:
        return int(self.indices.size)

    def weight_vector(self, n_points: int) -> np.ndarray:
        w = np.zeros(n_points)
        w[self.indices] = self.weights
        return w

    def __repr__(self):
        tag = f"exact n={self.n}" if self.n is not None else "approximate"
        return f"Design({tag}, support={self.support_size})"


@dataclass
class ModelSummary:
    """Information matrix with its log-determinant and D-criterion value."""

    matrix: SpdMatrix
    logdet: float
    phi: float


def info_matrix(cands: CandidateSet, design: Design) -> SpdMatrix:
    """Weighted moment matrix sum_i w_i f_i f_i^T of a design."""
    vecs = cands.gather(design.indices)
    return SpdMatrix((vecs * design.weights[:, None]).T @ vecs)


def summarize(matrix: SpdMatrix) -> ModelSummary:
    logdet = matrix.factor().logdet
    return ModelSummary(matrix=matrix, logdet=logdet, phi=float(np.exp(logdet / matrix.dim)))


def variance_function(cands: CandidateSet, matrix: SpdMatrix) -> np.ndarray:
    """Quadratic forms v_i = f_i^T M^{-1} f_i for every candidate, streamed."""
    minv = _inverse_from_lower(matrix.factor().lower)
    out = np.empty(cands.N)
    for start, block in cands.chunks():
        out[start : start + block.shape[0]] = np.einsum("ij,ij->i", block @ minv, block)
    return out


def d_criterion(matrix: SpdMatrix) -> float:
    """det(M)^(1/m); zero when M is singular (or not positive definite)."""
    try:
        logdet = matrix.factor().logdet
    except NotPositiveDefinite:
        return 0.0
    return float(np.exp(logdet / matrix.dim))


def efficiency(design: Design, mstar: SpdMatrix, cands: CandidateSet) -> float:
    """D-efficiency of a design relative to the reference matrix mstar."""
    spd_factorize(mstar)  # mstar must be positive definite
    return d_criterion(info_matrix(cands, design)) / d_criterion(mstar)


def standardize(cands: CandidateSet, mstar: SpdMatrix) -> CandidateSet:
    """Map every regressor through mstar^(-1/2).

    After the map, the reference design has an identity information matrix
    and the squared vector norms equal the variance function at mstar.
    """
    return cands.transformed(inv_sqrt_spd(mstar).a)
