"""Vector structure: sparse/compressible/dominated classes, spread sets,
and the least-common-denominator (LCD) search engines.

The LCD of a unit vector x at scale L is the infimum of theta > 0 with
dist(theta x, Z^n) < L sqrt(log+(theta / L)).  Between consecutive
half-integer crossings of the coordinates theta * x_i, the squared
lattice distance is an explicit quadratic in theta, and the squared
threshold is concave, so their difference is convex per interval; the
scan walks the intervals in order and brackets the first sign change.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass
from typing import Literal

import numpy as np

from .ensemble import RngStream
from .errors import CapabilityError, ParameterError

_UNIT_TOL = 1e-9


@dataclass(frozen=True)
class StructureConstants:
    """Tunable constants for the structure classification and LCD search.

    Defaults satisfy the convention (1/4) c_s c_d^2 <= c_oo <= 1/4 and
    0 < lambda < c_oo; every report echoes the values in force.
    """

    c_s: float = 0.1
    c_d: float = 0.1
    c_oo: float = 0.025
    lam: float = 0.01
    L: float = 1.0
    delta0: float = 0.1
    c_p: float = 1.0 / 3.0

    def __post_init__(self):
        if not 0.0 < self.c_s < 1.0:
            raise ParameterError("c_s must lie in (0, 1)")
        if not 0.0 < self.c_d < 1.0:
            raise ParameterError("c_d must lie in (0, 1)")
        lo = 0.25 * self.c_s * self.c_d**2
        if not lo <= self.c_oo <= 0.25:
            raise ParameterError(
                f"c_oo must lie in [{lo:g}, 0.25], got {self.c_oo!r}"
            )
        if not 0.0 < self.lam < self.c_oo:
            raise ParameterError("lambda must lie in (0, c_oo)")
        if self.L < 1.0:
            raise ParameterError("L must be >= 1")
        if not 0.0 < self.delta0 < 1.0:
            raise ParameterError("delta0 must lie in (0, 1)")
        if not 0.0 < self.c_p < 1.0:
            raise ParameterError("c_p must lie in (0, 1)")

    def sparsity_budget(self, n: int) -> int:
        """Integer sparsity budget m for Comp(c_s n, c_d) at dimension n."""
        return max(1, int(math.floor(self.c_s * n)))

    def spread_size(self, n: int) -> int:
        return int(math.ceil(self.c_oo * n))

    def subset_size(self, n: int) -> int:
        return int(math.ceil(self.lam * n))


@dataclass(frozen=True)
class StructureReport:
    m: int
    dist_to_sparse: float
    comp_member: bool
    dom_member: bool
    spread_set: tuple[int, ...] | None


@dataclass(frozen=True)
class LcdResult:
    value: float
    witness_theta: float
    witness_dist: float
    capped: bool


@dataclass(frozen=True)
class RegularizedLcdResult:
    lower_bound: float
    witness_subset: tuple[int, ...]
    exact: bool


def _check_unit(x: np.ndarray, tol: float = 1e-12) -> np.ndarray:
    x = np.asarray(x, dtype=np.float64)
    if x.ndim != 1 or x.size == 0:
        raise ParameterError("expected a nonempty 1-d vector")
    nrm = np.linalg.norm(x)
    if nrm == 0.0:
        raise ParameterError("zero vector")
    if abs(nrm - 1.0) > tol:
        raise ParameterError(f"expected a unit vector, got norm {nrm!r}")
    return x


def sparse_tail_distance(x, m: int) -> tuple[float, np.ndarray]:
    """Distance from unit x to Sparse(m), with the nearest m-sparse vector.

    The minimizer keeps the m largest-magnitude coordinates; ties are
    broken by lowest index (the distance itself is tie-independent).
    """
    x = _check_unit(x)
    n = x.size
    if not 1 <= m < n:
        raise ParameterError(f"budget m must satisfy 1 <= m < n, got {m}")
    order = np.argsort(-np.abs(x), kind="stable")
    nearest = np.zeros_like(x)
    keep = order[:m]
    nearest[keep] = x[keep]
    return float(np.linalg.norm(x[order[m:]])), nearest


def is_dominated(x, m: int, alpha: float) -> bool:
    """Dominated-tail test on the non-increasing rearrangement:
    ||x_[m+1:n]||_2 <= alpha sqrt(m) ||x_[m+1:n]||_inf."""
    x = _check_unit(x)
    n = x.size
    if not 1 <= m < n:
        raise ParameterError(f"budget m must satisfy 1 <= m < n, got {m}")
    if not alpha < 1.0:
        raise ParameterError("alpha must be < 1")
    tail = np.sort(np.abs(x))[: n - m]
    tail_l2 = float(np.linalg.norm(tail))
    tail_inf = float(tail.max(initial=0.0))
    return tail_l2 <= alpha * math.sqrt(m) * tail_inf


def spread_set(x, consts: StructureConstants) -> np.ndarray | None:
    """The spread coordinate set of an incompressible unit vector.

    Returns ceil(c_oo n) indices k with c_d / sqrt(2n) <= |x_k| <=
    1 / sqrt(c_s n), preferring larger magnitudes and then lower indices.
    Undefined (None) when x is compressible or too few indices qualify.
    """
    x = _check_unit(x)
    n = x.size
    m = consts.sparsity_budget(n)
    if m >= n:
        return None
    dist, _ = sparse_tail_distance(x, m)
    if dist <= consts.c_d:
        return None
    lo = consts.c_d / math.sqrt(2.0 * n)
    hi = 1.0 / math.sqrt(consts.c_s * n)
    mags = np.abs(x)
    qualifying = np.flatnonzero((mags >= lo) & (mags <= hi))
    size = consts.spread_size(n)
    if qualifying.size < size:
        return None
    order = np.argsort(-mags[qualifying], kind="stable")
    chosen = qualifying[order[:size]]
    return np.sort(chosen)


def _lattice_dist(theta: float, x: np.ndarray) -> float:
    y = theta * x
    return float(np.linalg.norm(y - np.round(y)))


def _threshold_sq(theta, L: float):
    # L^2 * log+(theta / L); valid for theta >= L where log is nonnegative.
    return L * L * np.log(np.maximum(theta / L, 1.0))


def lcd(x, L: float, theta_cap: float | None = None, tol: float = 1e-9) -> LcdResult:
    """Least common denominator of a unit vector by event-driven scan.

    Scans theta in [L, theta_cap]: interval endpoints are the points
    where some theta * x_i crosses a half-integer (plus L itself, where
    the threshold kinks).  Within an interval f(theta) = dist^2 - threshold^2
    is convex, so its minimum and leftmost root are found in closed form
    plus a safeguarded bisection.  A capped result certifies
    D >= theta_cap.
    """
    x = _check_unit(x, tol=_UNIT_TOL)
    n = x.size
    if L < 1.0:
        raise ParameterError("L must be >= 1")
    if theta_cap is None:
        theta_cap = 10.0 * n * math.sqrt(n)
        theta_cap = max(theta_cap, 2.0 * L)
    if theta_cap <= L:
        raise ParameterError("theta_cap must exceed L")
    if tol <= 0:
        raise ParameterError("tol must be positive")

    a = float(x @ x)  # ~1 for unit input
    mags = np.abs(x[x != 0.0])

    # Half-integer crossing points of theta * |x_i| inside (L, cap).
    breakpoints = [np.array([L, theta_cap])]
    for m in np.unique(mags):
        k_lo = max(0, math.ceil(L * m - 0.5))
        k_hi = math.floor(theta_cap * m - 0.5)
        if k_hi >= k_lo:
            ks = np.arange(k_lo, k_hi + 1, dtype=np.float64)
            breakpoints.append((ks + 0.5) / m)
    grid = np.unique(np.concatenate(breakpoints))
    grid = grid[(grid >= L) & (grid <= theta_cap)]
    if grid[0] > L:
        grid = np.concatenate([[L], grid])
    if grid[-1] < theta_cap:
        grid = np.concatenate([grid, [theta_cap]])

    lsq = L * L
    chunk = 1 << 16
    for start in range(0, grid.size - 1, chunk):
        lo = grid[start : min(start + chunk, grid.size - 1)]
        hi = grid[start + 1 : min(start + chunk, grid.size - 1) + 1]
        mid = 0.5 * (lo + hi)
        m_round = np.round(np.outer(mid, x))
        b = -2.0 * (m_round @ x)
        c = (m_round * m_round).sum(axis=1)

        def f_at(theta):
            return a * theta * theta + b * theta + c - _threshold_sq(theta, L)

        f_lo = f_at(lo)
        f_hi = f_at(hi)
        # Interior stationary point of the convex difference:
        # 2 a theta^2 + b theta - L^2 = 0.
        disc = np.sqrt(b * b + 8.0 * a * lsq)
        t_star = (-b + disc) / (4.0 * a)
        inside = (t_star > lo) & (t_star < hi)
        f_star = np.where(inside, f_at(np.where(inside, t_star, mid)), np.inf)
        f_min = np.minimum(np.minimum(f_lo, f_hi), f_star)
        hits = np.flatnonzero(f_min < 0.0)
        if hits.size == 0:
            continue
        k = int(hits[0])

        def f_scalar(theta: float) -> float:
            mm = np.round(theta * x)
            d = theta * x - mm
            return float(d @ d) - lsq * max(math.log(theta / L), 0.0)

        left, right = float(lo[k]), float(hi[k])
        t_min = float(t_star[k]) if inside[k] else (left if f_lo[k] < f_hi[k] else right)
        if f_scalar(left) < 0.0:
            root = left
        else:
            # Leftmost crossing lies in [left, t_neg] where f(t_neg) < 0.
            t_neg = t_min
            if f_scalar(t_neg) >= 0.0:
                # Convex dip detected vectorized but endpoint noise: probe.
                probes = np.linspace(left, right, 64)
                neg = [p for p in probes if f_scalar(float(p)) < 0.0]
                if not neg:
                    continue
                t_neg = float(neg[0])
            a_br, b_br = left, t_neg
            while b_br - a_br > tol:
                m_br = 0.5 * (a_br + b_br)
                if f_scalar(m_br) < 0.0:
                    b_br = m_br
                else:
                    a_br = m_br
            root = 0.5 * (a_br + b_br)
        witness = root + 0.5 * tol
        if not (witness < right and f_scalar(witness) < 0.0):
            witness = root
        return LcdResult(
            value=float(root),
            witness_theta=float(witness),
            witness_dist=_lattice_dist(float(witness), x),
            capped=False,
        )
    return LcdResult(
        value=float(theta_cap),
        witness_theta=math.nan,
        witness_dist=math.nan,
        capped=True,
    )


def regularized_lcd(
    x,
    consts: StructureConstants,
    budget: int,
    stream: RngStream,
    tol: float = 1e-9,
    theta_cap: float | None = None,
) -> RegularizedLcdResult:
    """max D_L(x_I / |x_I|) over subsets I of spread(x) with |I| = ceil(lambda n).

    Exact (full enumeration) when the subset count fits in ``budget``;
    otherwise the best of ``budget`` uniformly sampled subsets, which is
    a certified lower bound.  Sampling consumes the stream one subset at
    a time, so a larger budget extends a smaller one's candidate list.
    """
    x = _check_unit(x)
    n = x.size
    spread = spread_set(x, consts)
    if spread is None:
        raise CapabilityError("spread set undefined; regularized LCD needs an incompressible vector")
    k = consts.subset_size(n)
    if k > spread.size:
        raise CapabilityError("subset size exceeds the spread set")
    if budget < 1:
        raise ParameterError("budget must be >= 1")

    total = math.comb(spread.size, k)
    best_val = -math.inf
    best_subset: tuple[int, ...] | None = None
    any_capped = False

    def eval_subset(idx: np.ndarray) -> float:
        nonlocal any_capped
        sub = x[idx]
        sub = sub / np.linalg.norm(sub)
        res = lcd(sub, consts.L, theta_cap=theta_cap, tol=tol)
        if res.capped:
            any_capped = True
        return res.value

    if total <= budget:
        for combo in itertools.combinations(spread.tolist(), k):
            idx = np.array(combo, dtype=np.int64)
            val = eval_subset(idx)
            if val > best_val:
                best_val, best_subset = val, tuple(int(i) for i in idx)
        exact = not any_capped
    else:
        rng = stream.generator()
        for _ in range(budget):
            pick = rng.choice(spread.size, size=k, replace=False)
            idx = np.sort(spread[pick])
            val = eval_subset(idx)
            if val > best_val:
                best_val, best_subset = val, tuple(int(i) for i in idx)
        exact = False
    return RegularizedLcdResult(float(best_val), best_subset, exact)


def sublevel_membership(
    x,
    consts: StructureConstants,
    D: float,
    budget: int,
    stream: RngStream | None = None,
) -> Literal["in", "out", "unknown"]:
    """Membership in the sublevel set {regularized LCD <= D}.

    "out" is certified by any lower bound exceeding D; "in" needs exact
    enumeration; a one-sided randomized certificate below D is "unknown".
    """
    if stream is None:
        stream = RngStream(0, 0)
    res = regularized_lcd(x, consts, budget, stream)
    if res.lower_bound > D:
        return "out"
    if res.exact:
        return "in"
    return "unknown"


def classify_vector(x, consts: StructureConstants, alpha: float = 0.5) -> StructureReport:
    """StructureReport for one unit vector at the configured constants."""
    x = _check_unit(x)
    n = x.size
    m = consts.sparsity_budget(n)
    dist, _ = sparse_tail_distance(x, m)
    spread = spread_set(x, consts)
    return StructureReport(
        m=m,
        dist_to_sparse=dist,
        comp_member=dist <= consts.c_d,
        dom_member=is_dominated(x, m, alpha),
        spread_set=tuple(int(i) for i in spread) if spread is not None else None,
    )
