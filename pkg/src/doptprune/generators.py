"""Reproducible benchmark instance construction.

Three families:
  * gaussian: N standard-normal regressors in R^m behind a counter-based
    generator, so any chunk can be regenerated independently of the others;
  * mixture: all three-component mixtures on a decimal grid inside interval
    constraints, expanded to the 6 regressors of a quadratic blending model;
  * disk: three fixed points plus a sunflower lattice filling the disk of
    radius sqrt(2), a small two-dimensional stress instance.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .designs import CHUNK_SIZE, CandidateSet

GOLDEN_CONJUGATE = (math.sqrt(5.0) - 1.0) / 2.0

# Interval constraints of the mixture benchmark, in hundredths.
MIXTURE_BOUNDS_PCT = ((70, 80), (7, 25), (5, 15))


def gaussian_instance(n_points: int, dim: int, seed: int, cache: Optional[bool] = None) -> CandidateSet:
    """Candidate set of N iid N(0, I_m) regressors, replayable in chunks.

    Each chunk is produced by a Philox stream keyed by (seed, chunk index),
    so chunks regenerate bit-identically and independently.
    """
    if n_points < dim:
        raise ValueError(f"need N >= m, got N={n_points}, m={dim}")
    key_hi = np.uint64(seed % (1 << 64))

    def chunk(c: int) -> np.ndarray:
        rows = min(CHUNK_SIZE, n_points - c * CHUNK_SIZE)
        gen = np.random.Generator(np.random.Philox(key=np.array([key_hi, c], dtype=np.uint64)))
        return gen.standard_normal((rows, dim))

    return CandidateSet.from_generator(chunk, n_points, dim, cache=cache)


def mixture_grid(decimals: int) -> CandidateSet:
    """Constrained three-component mixture grid with quadratic regressors.

    Enumerates all (x1, x2, x3) with 10^decimals * xj integer, x1 + x2 + x3
    = 1 and each xj inside its interval constraint; feasibility is checked
    in scaled-integer arithmetic so no point is lost to float rounding.
    Points are ordered lexicographically by (x1, x2). Regressors are
    (x1, x2, x3, x1*x2, x1*x3, x2*x3), so m = 6.
    """
    if decimals < 2:
        raise ValueError("decimals must be at least 2")
    unit = 10**decimals
    (a_lo, a_hi), (b_lo, b_hi), (c_lo, c_hi) = (
        (lo * unit // 100, hi * unit // 100) for lo, hi in MIXTURE_BOUNDS_PCT
    )
    cols_a, cols_b = [], []
    for a in range(a_lo, a_hi + 1):
        b_min = max(b_lo, unit - a - c_hi)
        b_max = min(b_hi, unit - a - c_lo)
        if b_min > b_max:
            continue
        b = np.arange(b_min, b_max + 1, dtype=np.int64)
        cols_a.append(np.full(b.size, a, dtype=np.int64))
        cols_b.append(b)
    a = np.concatenate(cols_a)
    b = np.concatenate(cols_b)
    c = unit - a - b
    points = np.column_stack([a, b, c]).astype(np.float64) / unit
    x1, x2, x3 = points.T
    regressors = np.column_stack([x1, x2, x3, x1 * x2, x1 * x3, x2 * x3])
    return CandidateSet.from_array(regressors, points=points)


def fig1_disk(j_points: int) -> CandidateSet:
    """Three fixed points plus a sunflower lattice in the radius-sqrt(2) disk.

    The fixed points are (1, 0), (sqrt(2), 0) and (0, sqrt(2)); the lattice
    point j of J sits at radius sqrt(2) * sqrt((j - 1/2) / J) and angle
    2*pi*j times the golden-ratio conjugate.
    """
    if j_points < 1:
        raise ValueError("need at least one lattice point")
    j = np.arange(1, j_points + 1, dtype=np.float64)
    radius = math.sqrt(2.0) * np.sqrt((j - 0.5) / j_points)
    angle = 2.0 * math.pi * j * GOLDEN_CONJUGATE
    spiral = np.column_stack([radius * np.cos(angle), radius * np.sin(angle)])
    fixed = np.array([[1.0, 0.0], [math.sqrt(2.0), 0.0], [0.0, math.sqrt(2.0)]])
    pts = np.concatenate([fixed, spiral], axis=0)
    return CandidateSet.from_array(pts, points=pts)


@dataclass
class InstanceSpec:
    """Serializable description of a benchmark instance.

    kind is one of "gaussian" (params N, m, seed), "mixture" (params
    decimals) or "fig1_disk" (params J). The optional n records a requested
    exact-design size; pipeline configuration may override it.
    """

    kind: str
    params: dict = field(default_factory=dict)
    n: Optional[int] = None

    def build(self, cache: Optional[bool] = None) -> CandidateSet:
        if self.kind == "gaussian":
            return gaussian_instance(
                int(self.params["N"]), int(self.params["m"]), int(self.params["seed"]), cache=cache
            )
        if self.kind == "mixture":
            return mixture_grid(int(self.params["decimals"]))
        if self.kind == "fig1_disk":
            return fig1_disk(int(self.params["J"]))
        raise ValueError(f"unknown instance kind {self.kind!r}")

    def to_dict(self) -> dict:
        out = {"kind": self.kind, **self.params}
        if self.n is not None:
            out["n"] = self.n
        return out

    @classmethod
    def from_dict(cls, data: dict) -> "InstanceSpec":
        data = dict(data)
        kind = data.pop("kind")
        n = data.pop("n", None)
        return cls(kind=kind, params=data, n=None if n is None else int(n))
