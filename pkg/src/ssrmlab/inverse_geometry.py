"""Distance-to-subspace identities and the incompressible-vector experiments.

Everything inverse-based runs dense under the spectra cap; realizations
singular to working precision are excluded and counted, never silently
folded into averages.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
import scipy.linalg

from .ensemble import EnsembleParams, RngStream, sample_matrix, sample_sparse_vector
from .errors import ParameterError
from .spectra import _SINGULAR_FLOOR, _as_dense
from .stats import SlopeFit, fit_loglog_slope, wilson_interval
from .structure import StructureConstants, regularized_lcd, sparse_tail_distance, spread_set


@dataclass(frozen=True)
class DistanceRecord:
    j: int
    geometric_distance: float
    quadratic_form_distance: float | None
    b_singular: bool


@dataclass(frozen=True)
class InverseImageStats:
    inv_hs_norm: float
    inv_image_norm: float
    ratio: float
    singular: bool = False


def _symmetric_near_singular(dense: np.ndarray) -> bool:
    evals = np.linalg.eigvalsh(dense)
    top = float(np.abs(evals).max())
    if top == 0.0:
        return True
    return float(np.abs(evals).min()) < _SINGULAR_FLOOR * top


def distance_to_complement_span(A, j: int) -> float:
    """Euclidean distance from column j to the span of the other columns.

    Rank-revealing QR of the n x (n-1) block; the projection uses only
    the numerically independent columns, so rank-deficient spans are
    handled without error.
    """
    dense = _as_dense(A)
    n = dense.shape[0]
    if n < 2:
        raise ParameterError("need n >= 2")
    if not 0 <= j < n:
        raise ParameterError("column index out of range")
    block = np.delete(dense, j, axis=1)
    col = dense[:, j]
    Q, R, _ = scipy.linalg.qr(block, mode="economic", pivoting=True)
    diag = np.abs(np.diag(R))
    if diag.size == 0 or diag[0] == 0.0:
        return float(np.linalg.norm(col))
    rank = int(np.sum(diag > diag[0] * n * np.finfo(np.float64).eps))
    Qr = Q[:, :rank]
    return float(np.linalg.norm(col - Qr @ (Qr.T @ col)))


def quadratic_form_distance(A) -> DistanceRecord:
    """dist(A_1, H_1) through the quadratic-form identity, for column 0.

    With B the trailing minor and X the first column below the diagonal,
    the distance equals |<B^-1 X, X> - a_11| / sqrt(1 + |B^-1 X|^2).
    A singular minor is flagged rather than raised.
    """
    dense = _as_dense(A)
    if dense.shape[0] < 2:
        raise ParameterError("need n >= 2")
    geometric = distance_to_complement_span(dense, 0)
    B = dense[1:, 1:]
    X = dense[1:, 0]
    a11 = float(dense[0, 0])
    if _symmetric_near_singular(B):
        return DistanceRecord(0, geometric, None, True)
    y = np.linalg.solve(B, X)
    value = abs(float(y @ X) - a11) / math.sqrt(1.0 + float(y @ y))
    return DistanceRecord(0, geometric, value, False)


def all_column_distances(A) -> np.ndarray:
    """dist(A_j, H_j) for every j.

    For invertible A the j-th distance is 1 / |(A^-1) e_j| (the inverse's
    rows are orthogonal to the complementary column spans); singular A
    falls back to per-column projections.
    """
    dense = _as_dense(A)
    n = dense.shape[0]
    if not _symmetric_near_singular(dense):
        inv = np.linalg.inv(dense)
        return 1.0 / np.linalg.norm(inv, axis=0)
    return np.array([distance_to_complement_span(dense, j) for j in range(n)])


def inverse_image_stats(A, X, p: float = 1.0) -> InverseImageStats:
    """Hilbert-Schmidt norm of the inverse and the size of A^-1 X."""
    dense = _as_dense(A)
    X = np.asarray(X, dtype=np.float64)
    if X.shape != (dense.shape[0],):
        raise ParameterError("X dimension mismatch")
    if not 0.0 < p <= 1.0:
        raise ParameterError("p must lie in (0, 1]")
    if _symmetric_near_singular(dense):
        return InverseImageStats(math.nan, math.nan, math.nan, singular=True)
    inv = np.linalg.inv(dense)
    hs = float(np.linalg.norm(inv))
    img = float(np.linalg.norm(np.linalg.solve(dense, X)))
    ratio = img / (math.sqrt(p) * hs) if hs > 0 else math.nan
    return InverseImageStats(hs, img, ratio)


@dataclass(frozen=True)
class InverseImageReport:
    matrices: int
    x_draws: int
    excluded_singular: int
    identity_mean: float
    freq_lower_abs: float
    freq_markov_upper: float
    freq_hs_lower: float
    eps: float
    c_bound: float


def inverse_image_experiment(
    params: EnsembleParams,
    eps: float,
    matrices: int,
    x_draws: int,
    master_seed: int,
    c_bound: float = 10.0,
) -> InverseImageReport:
    """Frequencies of the three inverse-image events plus the first-moment identity.

    identity_mean averages |A^-1 X|^2 / (p |A^-1|_HS^2) over fresh X; its
    population value is exactly 1.  The three frequencies correspond to
    |A^-1 X| >= 1/c_bound, the Markov-style upper bound
    |A^-1 X| <= sqrt(p) eps^{-1/2} |A^-1|_HS, and the lower bound
    |A^-1 X| >= sqrt(p) eps |A^-1|_HS.
    """
    if not 0.0 < eps < 1.0:
        raise ParameterError("eps must lie in (0, 1)")
    if matrices < 1 or x_draws < 1:
        raise ParameterError("need at least one matrix and one draw")
    n, p = params.n, params.p
    excluded = 0
    ratios_sq = []
    lower_abs = []
    markov = []
    hs_lower = []
    for t in range(matrices):
        A = sample_matrix(params, RngStream(master_seed, t))
        dense = A.to_dense()
        if _symmetric_near_singular(dense):
            excluded += 1
            continue
        inv = np.linalg.inv(dense)
        hs = np.linalg.norm(inv)
        Xs = np.column_stack(
            [
                sample_sparse_vector(n, p, params.dist, RngStream(master_seed, (2 << 32) + t * x_draws + k))
                for k in range(x_draws)
            ]
        )
        imgs = np.linalg.norm(inv @ Xs, axis=0)
        ratios_sq.extend((imgs**2 / (p * hs * hs)).tolist())
        lower_abs.extend((imgs >= 1.0 / c_bound).tolist())
        markov.extend((imgs <= math.sqrt(p) * eps**-0.5 * hs).tolist())
        hs_lower.extend((imgs >= math.sqrt(p) * eps * hs).tolist())
    if not ratios_sq:
        raise ParameterError("all sampled matrices were singular")
    return InverseImageReport(
        matrices=matrices,
        x_draws=x_draws,
        excluded_singular=excluded,
        identity_mean=float(np.mean(ratios_sq)),
        freq_lower_abs=float(np.mean(lower_abs)),
        freq_markov_upper=float(np.mean(markov)),
        freq_hs_lower=float(np.mean(hs_lower)),
        eps=eps,
        c_bound=c_bound,
    )


@dataclass(frozen=True)
class DistanceExperimentRow:
    trial: int
    s_min: float
    minimizer_incompressible: bool
    lhs_event: bool
    rhs_value: float


@dataclass(frozen=True)
class DistanceExperimentReport:
    rows: tuple[DistanceExperimentRow, ...]
    eps: float
    M: int
    rho: float
    lhs_hat: float
    lhs_ci: tuple[float, float]
    rhs_hat: float
    rhs_halfwidth: float
    holds_within_slack: bool


def invertibility_via_distance_experiment(
    params: EnsembleParams,
    eps: float,
    M: int,
    rho: float,
    trials: int,
    master_seed: int = 0,
) -> DistanceExperimentReport:
    """Monte Carlo check of the invertibility-via-distance inequality.

    Left side: fraction of trials where s_min <= eps sqrt(p/n) AND the
    minimizing eigenvector is (M, rho)-incompressible.  Right side: mean
    over trials of (1/M) #{j : dist(A_j, H_j) <= sqrt(p) eps}.  The
    certified comparison allows one-sided CI slack on both estimates.
    """
    n, p = params.n, params.p
    if not 1 <= M < n:
        raise ParameterError("need 1 <= M < n")
    if eps < 0 or rho <= 0:
        raise ParameterError("need eps >= 0 and rho > 0")
    if trials < 0:
        raise ParameterError("trials must be nonnegative")
    thr_lhs = eps * math.sqrt(p / n)
    thr_rhs = math.sqrt(p) * eps
    rows = []
    rhs_vals = []
    lhs_hits = 0
    for t in range(trials):
        A = sample_matrix(params, RngStream(master_seed, t))
        dense = A.to_dense()
        evals, evecs = np.linalg.eigh(dense)
        k = int(np.argmin(np.abs(evals)))
        smin = abs(float(evals[k]))
        v = evecs[:, k]
        v = v / np.linalg.norm(v)
        dist, _ = sparse_tail_distance(v, M)
        incomp = dist > rho
        lhs_event = (smin <= thr_lhs) and incomp
        dists = all_column_distances(dense)
        rhs_value = float(np.sum(dists <= thr_rhs)) / M
        lhs_hits += lhs_event
        rhs_vals.append(rhs_value)
        rows.append(DistanceExperimentRow(t, smin, incomp, lhs_event, rhs_value))
    if trials == 0:
        return DistanceExperimentReport((), eps, M, rho, math.nan, (0.0, 1.0), math.nan, math.nan, True)
    lhs_hat = lhs_hits / trials
    lhs_ci = wilson_interval(lhs_hits, trials)
    rhs_arr = np.asarray(rhs_vals)
    rhs_hat = float(rhs_arr.mean())
    rhs_halfwidth = 1.96 * float(rhs_arr.std(ddof=1)) / math.sqrt(trials) if trials > 1 else math.inf
    holds = lhs_ci[0] <= rhs_hat + rhs_halfwidth
    return DistanceExperimentReport(
        tuple(rows), eps, M, rho, lhs_hat, lhs_ci, rhs_hat, rhs_halfwidth, holds
    )


@dataclass(frozen=True)
class StructureTheoremReport:
    trials: int
    excluded_singular: int
    incompressible_fraction: float
    spread_undefined: int
    thresholds: tuple[float, ...]
    survival_fractions: tuple[float, ...]
    rlcd_values: tuple[float, ...]
    constants: StructureConstants


def structure_theorem_experiment(
    params: EnsembleParams,
    u: np.ndarray,
    consts: StructureConstants,
    budget: int,
    trials: int,
    master_seed: int = 0,
    thresholds: tuple[float, ...] | None = None,
) -> StructureTheoremReport:
    """Incompressibility and regularized-LCD survival curve of A^-1 u.

    The theoretical threshold scale contains unknown constants, so the
    report sweeps a threshold schedule (default: sqrt(lambda n) times
    powers of two) and emits survival fractions rather than asserting
    any single cutoff.
    """
    u = np.asarray(u, dtype=np.float64)
    n, p = params.n, params.p
    if u.shape != (n,) or not np.any(u):
        raise ParameterError("u must be a nonzero vector of matching dimension")
    if p < n ** (-consts.c_p):
        raise ParameterError(f"need p >= n^(-c_p) = {n ** (-consts.c_p):.4g}")
    if trials < 1:
        raise ParameterError("need at least one trial")
    if thresholds is None:
        base = math.sqrt(consts.lam * n)
        thresholds = tuple(base * 2.0**k for k in range(7))
    excluded = 0
    incomp_hits = 0
    spread_undef = 0
    rlcd_values = []
    m = consts.sparsity_budget(n)
    for t in range(trials):
        A = sample_matrix(params, RngStream(master_seed, t))
        dense = A.to_dense()
        if _symmetric_near_singular(dense):
            excluded += 1
            continue
        x0 = np.linalg.solve(dense, u)
        x0 = x0 / np.linalg.norm(x0)
        dist, _ = sparse_tail_distance(x0, m)
        if dist <= consts.c_d:
            continue
        incomp_hits += 1
        if spread_set(x0, consts) is None:
            spread_undef += 1
            continue
        res = regularized_lcd(x0, consts, budget, RngStream(master_seed, (1 << 32) + t))
        rlcd_values.append(res.lower_bound)
    effective = trials - excluded
    incomp_fraction = incomp_hits / effective if effective else math.nan
    vals = np.asarray(rlcd_values)
    survival = tuple(
        float(np.mean(vals > thr)) if vals.size else math.nan for thr in thresholds
    )
    return StructureTheoremReport(
        trials=trials,
        excluded_singular=excluded,
        incompressible_fraction=incomp_fraction,
        spread_undefined=spread_undef,
        thresholds=tuple(thresholds),
        survival_fractions=survival,
        rlcd_values=tuple(float(v) for v in rlcd_values),
        constants=consts,
    )


@dataclass(frozen=True)
class QuadraticSmallballReport:
    eps_grid: tuple[float, ...]
    p_hat_zero: tuple[float, ...]
    p_hat_median: tuple[float, ...]
    trials: int
    excluded_singular: int
    slope_zero: SlopeFit | None
    slope_median: SlopeFit | None


def quadratic_smallball_experiment(
    params: EnsembleParams,
    eps_grid,
    trials: int,
    master_seed: int = 0,
) -> QuadraticSmallballReport:
    """Tail curve of the self-normalized quadratic form of the inverse.

    Per trial draws (A, X), computes q = <A^-1 X, X> and the normalizer
    sqrt(1 + |A^-1 X|^2), and counts |q - u| / normalizer <= eps sqrt(p)
    jointly with the operator-norm event, at u = 0 and at the empirical
    median of q.  Realizations are reused across the whole eps grid, so
    the curves are exactly monotone.
    """
    eps_grid = tuple(float(e) for e in eps_grid)
    if any(e < 0 for e in eps_grid) or not eps_grid:
        raise ParameterError("eps grid must be nonempty and nonnegative")
    if sorted(eps_grid) != list(eps_grid):
        raise ParameterError("eps grid must be sorted ascending")
    if trials < 1:
        raise ParameterError("need at least one trial")
    n, p = params.n, params.p
    op_thr = params.c_op * math.sqrt(p * n)
    qs, dens, eops = [], [], []
    excluded = 0
    for t in range(trials):
        A = sample_matrix(params, RngStream(master_seed, t))
        dense = A.to_dense()
        evals = np.linalg.eigvalsh(dense)
        top = float(np.abs(evals).max())
        if top == 0.0 or float(np.abs(evals).min()) < _SINGULAR_FLOOR * top:
            excluded += 1
            continue
        X = sample_sparse_vector(n, p, params.dist, RngStream(master_seed, (1 << 32) + t))
        y = np.linalg.solve(dense, X)
        qs.append(float(y @ X))
        dens.append(math.sqrt(1.0 + float(y @ y)))
        eops.append(top <= op_thr)
    if not qs:
        raise ParameterError("all sampled matrices were singular")
    qs_arr = np.asarray(qs)
    dens_arr = np.asarray(dens)
    eops_arr = np.asarray(eops)
    sqrt_p = math.sqrt(p)

    def curve(center: float) -> tuple[float, ...]:
        stat = np.abs(qs_arr - center) / dens_arr
        return tuple(float(np.mean((stat <= e * sqrt_p) & eops_arr)) for e in eps_grid)

    p_zero = curve(0.0)
    p_med = curve(float(np.median(qs_arr)))

    def try_fit(phats) -> SlopeFit | None:
        xs = [e for e, q in zip(eps_grid, phats) if q > 0 and e > 0]
        ys = [q for e, q in zip(eps_grid, phats) if q > 0 and e > 0]
        if len(xs) < 4:
            return None
        return fit_loglog_slope(xs, ys)

    return QuadraticSmallballReport(
        eps_grid=eps_grid,
        p_hat_zero=p_zero,
        p_hat_median=p_med,
        trials=trials,
        excluded_singular=excluded,
        slope_zero=try_fit(p_zero),
        slope_median=try_fit(p_med),
    )
