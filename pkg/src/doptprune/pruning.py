"""Certified removal of candidates that cannot support an optimal exact design.

Given an optimal approximate design (matrix M*, variance function v*) and
any nonsingular size-n reference design, two necessary conditions must hold
for every support index of every D-optimal size-n design:

  * augmentation: one trial at the candidate plus n-1 unconstrained trials
    must be able to match the reference criterion value, which bounds the
    candidate's variance from below;
  * exchange: swapping one optimal trial for the candidate must not help,
    which after standardizing regressors by M*^(-1/2) reduces to a
    quadratic test with two per-candidate constants built from eigenvalue
    brackets of the (unknown) optimal covariance matrix.

Candidates failing either condition are provably redundant: no optimal
size-n design uses them. All tolerances are biased toward keeping, so the
guarantee survives floating point.
"""

from __future__ import annotations

import time
from dataclasses import dataclass, field

import numpy as np

from .designs import CandidateSet, Design, d_criterion, info_matrix, standardize
from .errors import DimensionMismatch, InfeasiblePair
from .linalg import SpdMatrix, _inverse_from_lower, spd_factorize

# Phase-1 comparisons keep any candidate within this relative slack of the
# threshold, so rounding can only ever keep extra candidates.
AUG_SAFETY_RTOL = 1e-9

# Feasibility slack for d^(1/m) <= t/m; within it the eigenvalue brackets
# collapse to the boundary instead of failing.
ROOT_TOL = 1e-12
ROOT_RESIDUAL_TOL = 1e-13
ROOT_WIDTH_RTOL = 1e-15
ROOT_MAX_ITERS = 200
ROOT_RESIDUAL_CAP = 1e-12

# The exchange bracket must fall below -EVAL_TOL_SCALE * (1 + |v_i v_l|)
# before a candidate is removed.
EVAL_TOL_SCALE = 1e-9

_SCAN_CHUNK = 8192
_ELL_BLOCK = 1024


def discrepancy(v, z) -> float:
    """Nonnegative coupling of two vectors: the positive eigenvalue of vv^T - zz^T.

    Defined as (||v+z|| * ||v-z|| + ||v||^2 - ||z||^2) / 2; its counterpart
    with swapped arguments gives the magnitude of the negative eigenvalue.
    """
    v = np.asarray(v, dtype=np.float64)
    z = np.asarray(z, dtype=np.float64)
    if v.shape != z.shape:
        raise DimensionMismatch(f"shapes {v.shape} and {z.shape} differ")
    plus = float(np.linalg.norm(v + z))
    minus = float(np.linalg.norm(v - z))
    return 0.5 * (plus * minus + float(v @ v) - float(z @ z))


def augmentation_keep(v_ell_n: float, v_max_n: float, phi_ratio: float, m: int, n: int) -> bool:
    """General augmentation test against an arbitrary positive definite matrix N.

    v_ell_n and v_max_n are the candidate's and the maximal quadratic form
    f^T N^{-1} f, phi_ratio is criterion(reference design) / criterion(N).
    False means the candidate supports no optimal size-n design.
    """
    return v_ell_n >= m * n * phi_ratio - (n - 1) * v_max_n


def augmentation_threshold(m: int, n: int, eff_plus: float) -> float:
    """Variance threshold of the augmentation condition at the optimum.

    A candidate can support an optimal size-n design only if its optimal
    variance reaches m*n*(eff_plus - (n-1)/n). Nonpositive thresholds make
    the condition vacuous.
    """
    return m * n * (eff_plus - (n - 1) / n)


def _bisect_roots(k: int, t: np.ndarray, droot: np.ndarray, m: int, upper: bool) -> np.ndarray:
    """Root of [g^k ((t-kg)/(m-k))^(m-k)]^(1/m) = droot on a monotone segment."""
    ln_target = m * np.log(droot)
    if upper:
        lo, hi = t / m, t / k
    else:
        lo, hi = np.zeros_like(t), t / m
    for _ in range(ROOT_MAX_ITERS):
        mid = 0.5 * (lo + hi)
        with np.errstate(divide="ignore", invalid="ignore"):
            val = k * np.log(mid) + (m - k) * np.log((t - k * mid) / (m - k))
        val = np.where(np.isnan(val), -np.inf, val)
        below = val < ln_target
        if upper:
            lo = np.where(below, lo, mid)
            hi = np.where(below, mid, hi)
        else:
            lo = np.where(below, mid, lo)
            hi = np.where(below, hi, mid)
        resid = np.abs(np.exp(val / m) - droot)
        width = hi - lo
        done = (resid <= ROOT_RESIDUAL_TOL) | (
            (width <= ROOT_WIDTH_RTOL * t) & (resid <= ROOT_RESIDUAL_CAP)
        )
        if np.all(done):
            break
    return 0.5 * (lo + hi)


def _eigen_bound_roots_arrays(k: int, t: np.ndarray, d, m: int):
    """Vectorized eigenvalue-bracket roots over arrays of (t, d) pairs."""
    t = np.asarray(t, dtype=np.float64)
    droot = np.broadcast_to(np.asarray(d, dtype=np.float64) ** (1.0 / m), t.shape).copy()
    if np.any(droot > t / m + ROOT_TOL):
        raise InfeasiblePair("d^(1/m) exceeds t/m for some candidate")
    if k == m:
        return np.minimum(droot, t / m), t / m
    boundary = droot >= t / m  # inside ROOT_TOL of the peak
    g_lo = np.where(boundary, t / m, _bisect_roots(k, t, droot, m, upper=False))
    g_hi = np.where(boundary, t / m, _bisect_roots(k, t, droot, m, upper=True))
    return g_lo, g_hi


def eigen_bound_roots(k: int, t: float, d: float, m: int) -> tuple[float, float]:
    """Bounds on k-element products of inverse eigenvalues from (trace, det) data.

    For a positive definite matrix B with det(B^{-1}) >= d and tr(B^{-1})
    <= t, every k-subset of its eigenvalues satisfies
    g_lo <= (prod gamma^-1)^(1/k) <= g_hi for the returned pair. For k < m
    these are the two roots of a concave one-hump function; for k = m they
    are (d^(1/m), t/m) directly. Raises InfeasiblePair when d^(1/m) exceeds
    t/m beyond the rounding slack.
    """
    if not 1 <= k <= m:
        raise ValueError(f"k must lie in [1, {m}], got {k}")
    if t <= 0.0 or d <= 0.0:
        raise ValueError("t and d must be positive")
    g_lo, g_hi = _eigen_bound_roots_arrays(k, np.asarray([t]), d, m)
    return float(g_lo[0]), float(g_hi[0])


def exchange_constants(t_ell: float, d_plus: float, n: int, m: int) -> tuple[float, float]:
    """Per-candidate constants (q, r) of the vectorized exchange test.

    q scales the norm-difference term and r the spectral-coupling term;
    both derive from the eigenvalue brackets at (t_ell, d_plus).
    """
    g1_lo, g1_hi = eigen_bound_roots(1, t_ell, d_plus, m)
    g2_lo, _ = eigen_bound_roots(2, t_ell, d_plus, m)
    q = 0.5 * n * g2_lo**2 * (1.0 / g1_lo + 1.0 / g1_hi)
    r = 0.5 * n * g2_lo**2 * (1.0 / g1_lo - 1.0 / g1_hi)
    return q, max(r, 0.0)


@dataclass
class PruneThresholds:
    """Removal-test constants for a batch of candidates.

    Arrays are aligned with `indices`. Trace bounds are computed against
    the observed maximum variance (>= m up to rounding), which keeps every
    inequality valid even when the approximate design is only numerically
    optimal, and are clamped to the feasibility boundary m * d_plus^(1/m)
    so that phase-1 safety slack cannot produce infeasible pairs.
    """

    m: int
    n: int
    eff_plus: float
    d_plus: float
    indices: np.ndarray
    t: np.ndarray
    g1_lo: np.ndarray
    g1_hi: np.ndarray
    g2_lo: np.ndarray
    q: np.ndarray
    r: np.ndarray

    def position_of(self, ell: int) -> int:
        pos = np.searchsorted(self.indices, ell)
        if pos >= self.indices.size or self.indices[pos] != ell:
            raise KeyError(f"candidate {ell} has no thresholds")
        return int(pos)


def prune_thresholds(
    vstar: np.ndarray,
    indices: np.ndarray,
    m: int,
    n: int,
    eff_plus: float,
    v_max: float | None = None,
) -> PruneThresholds:
    """Exchange-test constants for the given candidate indices."""
    vstar = np.asarray(vstar, dtype=np.float64)
    indices = np.asarray(indices, dtype=np.int64)
    if v_max is None:
        v_max = float(vstar.max())
    d_plus = eff_plus**m
    t = ((n - 1) * v_max + vstar[indices]) / n
    t = np.maximum(t, m * d_plus ** (1.0 / m))
    g1_lo, g1_hi = _eigen_bound_roots_arrays(1, t, d_plus, m)
    g2_lo, _ = _eigen_bound_roots_arrays(2, t, d_plus, m)
    q = 0.5 * n * g2_lo**2 * (1.0 / g1_lo + 1.0 / g1_hi)
    r = np.maximum(0.5 * n * g2_lo**2 * (1.0 / g1_lo - 1.0 / g1_hi), 0.0)
    return PruneThresholds(
        m=m, n=n, eff_plus=eff_plus, d_plus=d_plus,
        indices=indices, t=t, g1_lo=g1_lo, g1_hi=g1_hi, g2_lo=g2_lo, q=q, r=r,
    )


def exchange_bracket(v_i, v_ell, dots, q, r):
    """Vectorized exchange-test bracket; negative values past the pair
    tolerance certify an improving exchange (candidate removable)."""
    coupling = np.sqrt(np.maximum((v_i + v_ell) ** 2 - 4.0 * dots**2, 0.0))
    return v_i * v_ell - dots**2 - q * (v_i - v_ell) + r * coupling


def exchange_pair_decision_direct(s_i, s_ell, g1_lo, g1_hi, g2_lo, n) -> bool:
    """Exchange test for one (i, ell) pair in its ratio form.

    Returns True when the pair is consistent with ell supporting an optimal
    design (keep); uses the same relative tolerance as the bracket form, so
    the two evaluations decide identically.
    """
    lhs = discrepancy(s_i, s_ell) / g1_hi - discrepancy(s_ell, s_i) / g1_lo
    vi, vl = float(s_i @ s_i), float(s_ell @ s_ell)
    dot = float(s_i @ s_ell)
    rhs = (vi * vl - dot * dot) / (n * g2_lo**2)
    tol = EVAL_TOL_SCALE * (1.0 + vi * vl) / (n * g2_lo**2)
    return lhs <= rhs + tol


def _scan_blocks(scan: np.ndarray):
    for pos in range(0, scan.size, _SCAN_CHUNK):
        yield scan[pos : pos + _SCAN_CHUNK]


def _exchange_removed(
    s_cands: CandidateSet,
    snorms: np.ndarray,
    thresholds: PruneThresholds,
    scan: np.ndarray,
) -> np.ndarray:
    """Boolean removal mask aligned with thresholds.indices.

    Scans candidates i in the given order (strong competitors first) in
    chunks; a threshold row drops out at its first violating pair, so the
    outcome matches a per-candidate sequential scan with early exit.
    """
    ell_idx = thresholds.indices
    ell_vecs = s_cands.gather(ell_idx)
    ell_norms = snorms[ell_idx]
    removed = np.zeros(ell_idx.size, dtype=bool)
    for chunk in _scan_blocks(scan):
        active = np.flatnonzero(~removed)
        if active.size == 0:
            break
        s_chunk = s_cands.gather(chunk)
        v_chunk = snorms[chunk]
        for bpos in range(0, active.size, _ELL_BLOCK):
            rows = active[bpos : bpos + _ELL_BLOCK]
            dots = s_chunk @ ell_vecs[rows].T
            vivl = v_chunk[:, None] * ell_norms[rows][None, :]
            bracket = exchange_bracket(
                v_chunk[:, None],
                ell_norms[rows][None, :],
                dots,
                thresholds.q[rows][None, :],
                thresholds.r[rows][None, :],
            )
            tol = EVAL_TOL_SCALE * (1.0 + vivl)
            removed[rows[np.any(bracket < -tol, axis=0)]] = True
    return removed


def exchange_keep(ell: int, s_cands: CandidateSet, thresholds: PruneThresholds, scan: np.ndarray) -> bool:
    """Exchange test for one candidate over a scan set.

    False certifies that some single-trial swap improves on any optimal
    design containing ell, so ell is removable. Restricting the scan set
    can only keep more candidates, never remove more.
    """
    pos = thresholds.position_of(int(ell))
    single = PruneThresholds(
        m=thresholds.m, n=thresholds.n, eff_plus=thresholds.eff_plus, d_plus=thresholds.d_plus,
        indices=thresholds.indices[pos : pos + 1],
        t=thresholds.t[pos : pos + 1],
        g1_lo=thresholds.g1_lo[pos : pos + 1],
        g1_hi=thresholds.g1_hi[pos : pos + 1],
        g2_lo=thresholds.g2_lo[pos : pos + 1],
        q=thresholds.q[pos : pos + 1],
        r=thresholds.r[pos : pos + 1],
    )
    scan = np.asarray(scan, dtype=np.int64)
    snorms = np.zeros(s_cands.N)
    touched = np.union1d(scan, single.indices)
    vecs = s_cands.gather(touched)
    snorms[touched] = np.einsum("ij,ij->i", vecs, vecs)
    return not _exchange_removed(s_cands, snorms, single, scan)[0]


@dataclass
class PruneReport:
    """Survivor sets and bookkeeping of one pruning run."""

    n_candidates: int
    n1: int
    n2: int
    survivors_aug: np.ndarray
    survivors_exch: np.ndarray
    eff_plus: float
    m: int
    n: int
    scan_mode: str
    timings: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        return {
            "N": self.n_candidates,
            "N1": self.n1,
            "N2": self.n2,
            "eff_plus": self.eff_plus,
            "m": self.m,
            "n": self.n,
            "scan_mode": self.scan_mode,
            "survivors": self.survivors_exch.tolist(),
            "survivors_aug": self.survivors_aug.tolist(),
            "timings": dict(self.timings),
        }


def prune(
    cands: CandidateSet,
    approx,
    w_plus: Design,
    scan_mode: str = "full",
    delta_support: float | None = None,
) -> PruneReport:
    """Run both removal conditions and report the surviving candidates.

    Phase 1 keeps candidates whose optimal variance clears the augmentation
    bound (evaluated in its general form against the numerically optimal
    matrix, with the observed maximum variance in place of its theoretical
    value m). Phase 2 re-tests phase-1 survivors with the exchange
    condition, scanning competitors in decreasing-variance order; with
    scan_mode "maxvar" the scan is restricted to the maximum-variance set,
    which is conservative. The reference efficiency is recomputed from
    w_plus, never trusted from metadata. Every support point of every
    optimal size-n design survives both phases.
    """
    if w_plus.n is None:
        raise ValueError("w_plus must be an exact design")
    m, n = cands.m, w_plus.n
    mstar = approx.mstar

    start = time.perf_counter()
    phi_star = d_criterion(mstar)
    eff_plus = d_criterion(info_matrix(cands, w_plus)) / phi_star
    s_cands = standardize(cands, mstar)
    snorms = np.empty(cands.N)
    for off, block in s_cands.chunks():
        snorms[off : off + block.shape[0]] = np.einsum("ij,ij->i", block, block)
    v_max = float(snorms.max())
    cut = m * n * eff_plus - (n - 1) * v_max
    survivors_aug = np.flatnonzero(snorms >= cut - AUG_SAFETY_RTOL * max(1.0, abs(cut)))
    t_aug = time.perf_counter() - start

    start = time.perf_counter()
    thresholds = prune_thresholds(snorms, survivors_aug, m, n, eff_plus, v_max=v_max)
    if scan_mode == "full":
        scan = np.argsort(-snorms, kind="stable")
    elif scan_mode == "maxvar":
        if delta_support is None:
            delta_support = getattr(approx, "delta_support", 1e-5 * m)
        members = np.flatnonzero(snorms >= m - delta_support)
        if members.size == 0:
            members = np.asarray([int(np.argmax(snorms))], dtype=np.int64)
        scan = members[np.argsort(-snorms[members], kind="stable")]
    else:
        raise ValueError(f"unknown scan_mode {scan_mode!r}")
    removed = _exchange_removed(s_cands, snorms, thresholds, scan)
    survivors_exch = survivors_aug[~removed]
    t_exch = time.perf_counter() - start

    return PruneReport(
        n_candidates=cands.N,
        n1=int(survivors_aug.size),
        n2=int(survivors_exch.size),
        survivors_aug=survivors_aug,
        survivors_exch=survivors_exch,
        eff_plus=float(eff_plus),
        m=m,
        n=n,
        scan_mode=scan_mode,
        timings={"augmentation_s": t_aug, "exchange_s": t_exch},
    )


@dataclass
class DualCertificate:
    """Feasible dual point for the weight-constrained design problem."""

    h: SpdMatrix
    lambdas: np.ndarray
    upper_bound: float


def dual_certificate(cands: CandidateSet, nmat: SpdMatrix, ell: int, n: int) -> DualCertificate:
    """Closed-form dual-feasible certificate bounding the constrained optimum.

    For designs forced to put weight at least 1/n on candidate ell, the
    criterion is at most upper_bound = criterion(N) / c with
    c = n*m / (v_ell + (n-1)*v_max), the quadratic forms taken at N^{-1}.
    The multipliers lambda_i are nonnegative and satisfy the stationarity
    equalities f_i^T H f_i = m + lambda_ell/n - lambda_i with H = c*N^{-1}.
    """
    if n < 2:
        raise ValueError("need n >= 2")
    m = cands.m
    factor = spd_factorize(nmat)
    ninv = _inverse_from_lower(factor.lower)
    v = np.empty(cands.N)
    for off, block in cands.chunks():
        v[off : off + block.shape[0]] = np.einsum("ij,ij->i", block @ ninv, block)
    v_ell = float(v[ell])
    v_max = float(v.max())
    c = n * m / (v_ell + (n - 1) * v_max)
    lambdas = (n * m - c * v_ell) / (n - 1) - c * v
    upper = float(np.exp(factor.logdet / m)) / c
    return DualCertificate(h=SpdMatrix(c * ninv), lambdas=lambdas, upper_bound=upper)
