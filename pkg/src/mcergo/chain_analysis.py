"""Exact finite-chain computations.

Stationary distributions by dense linear algebra, total variation
distances, mixing and lazy mixing times by literal matrix powers, expected
hitting times by linear solves, maximum hitting times over set families,
and pairwise pseudo-minorization constants.

All functions are pure over immutable kernels; enumeration results carry a
deterministic lexicographic tie-break on (set, start) encodings.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
import scipy.linalg
import scipy.sparse.csgraph as csgraph

from .errors import (
    DegenerateOverlap,
    EmptySubset,
    LengthMismatch,
    MissingCoordinates,
    NoFeasibleSet,
    NotMixedByHorizon,
    Reducible,
    TooManyStates,
    Unreachable,
)
from .kernels import FiniteKernel, lazy_transform
from .tolerances import LINEAR_RESIDUAL_TOL, PROB_NORM_TOL, ROW_SUM_TOL

BRUTE_STATE_CAP = 14
DEFAULT_MIX_EPS = 0.25


# --- stationary distribution ------------------------------------------------

def stationary_distribution(k: FiniteKernel) -> np.ndarray:
    """Solve pi P = pi, sum(pi) = 1 by dense linear algebra.

    The chain must have a single closed communicating class (checked by
    reachability on the support digraph); transient states receive mass 0.
    Falls back to power iteration on the lazy kernel if the direct solve
    misbehaves numerically.

    Raises
    ------
    Reducible
        If the support digraph has multiple closed classes.
    """
    p = k.p
    n = k.n
    closed = _closed_classes(p)
    if len(closed) > 1:
        raise Reducible(f"kernel has {len(closed)} closed classes")
    support = closed[0]
    q = p[np.ix_(support, support)]
    pi_s = _solve_stationary_dense(q)
    if pi_s is None:
        pi_s = _power_iteration_stationary(q)
    pi = np.zeros(n)
    pi[support] = pi_s
    residual = float(np.max(np.abs(pi @ p - pi)))
    if residual > 1e-10:
        pi_s = _power_iteration_stationary(q)
        pi = np.zeros(n)
        pi[support] = pi_s
    return pi


def _closed_classes(p: np.ndarray) -> list[np.ndarray]:
    adj = (p > 0.0).astype(np.int8)
    n_comp, labels = csgraph.connected_components(adj, directed=True, connection="strong")
    closed = []
    for comp in range(n_comp):
        members = np.flatnonzero(labels == comp)
        outside = np.flatnonzero(labels != comp)
        if outside.size == 0 or not np.any(p[np.ix_(members, outside)] > 0.0):
            closed.append(members)
    return closed


def _solve_stationary_dense(q: np.ndarray) -> np.ndarray | None:
    m = q.shape[0]
    a = q.T - np.eye(m)
    a[-1, :] = 1.0
    b = np.zeros(m)
    b[-1] = 1.0
    try:
        pi = scipy.linalg.solve(a, b)
    except scipy.linalg.LinAlgError:
        return None
    if not np.all(np.isfinite(pi)) or np.any(pi < -1e-9):
        return None
    pi = np.clip(pi, 0.0, None)
    s = pi.sum()
    if s <= 0.0:
        return None
    return pi / s


def _closed_class_mixture(p: np.ndarray) -> np.ndarray:
    """Equal-weight mixture of the stationary laws of all closed classes."""
    classes = _closed_classes(p)
    pi = np.zeros(p.shape[0])
    for members in classes:
        q = p[np.ix_(members, members)]
        pi_c = _solve_stationary_dense(q)
        if pi_c is None:
            pi_c = _power_iteration_stationary(q)
        pi[members] += pi_c / len(classes)
    return pi


def _power_iteration_stationary(q: np.ndarray, max_iter=2_000_000) -> np.ndarray:
    m = q.shape[0]
    lazy = 0.5 * q + 0.5 * np.eye(m)
    pi = np.full(m, 1.0 / m)
    for _ in range(max_iter):
        nxt = pi @ lazy
        if np.max(np.abs(nxt - pi)) < 1e-15:
            pi = nxt
            break
        pi = nxt
    return pi / pi.sum()


# --- total variation ---------------------------------------------------------

def tv_distance(p, q) -> float:
    """Half the L1 distance between two probability vectors."""
    p = np.asarray(p, dtype=float)
    q = np.asarray(q, dtype=float)
    if p.shape != q.shape:
        raise LengthMismatch(f"length mismatch: {p.shape} vs {q.shape}")
    for v in (p, q):
        if abs(v.sum() - 1.0) > PROB_NORM_TOL:
            raise LengthMismatch("input is not normalized within 1e-9")
    return 0.5 * float(np.abs(p - q).sum())


def tv_profile(k: FiniteKernel, t_max: int, starts=None, pi=None) -> np.ndarray:
    """max over starts of TV(P^t(x, .), pi) for t = 0..t_max."""
    if pi is None:
        pi = stationary_distribution(k)
    rows = np.eye(k.n) if starts is None else np.eye(k.n)[np.asarray(starts, dtype=int)]
    out = np.empty(t_max + 1)
    for t in range(t_max + 1):
        out[t] = 0.5 * np.max(np.abs(rows - pi).sum(axis=1))
        if t < t_max:
            rows = rows @ k.p
    return out


# --- mixing times -------------------------------------------------------------

def default_mix_horizon(n: int) -> int:
    return max(1, 10 * n * n * math.ceil(math.log(max(n, 2))))


def mixing_time(
    k: FiniteKernel,
    eps: float = DEFAULT_MIX_EPS,
    subset=None,
    lazy: bool = False,
    t_max: int | None = None,
) -> int:
    """Smallest t with max over starts in the subset of TV(P^t(x,.), pi) <= eps.

    Computed by iterated matrix-vector products (no spectral shortcuts).
    The lazy flag replaces P with (P + I)/2 first.  A reducible chain is
    measured against the equal mixture of its closed classes' stationary
    laws, so a chain that cannot mix ends in ``NotMixedByHorizon`` rather
    than a reducibility error.

    Raises
    ------
    NotMixedByHorizon
        If the threshold is not reached by ``t_max``; the exception carries
        the computed TV profile for diagnosis.
    """
    if not (0.0 < eps < 1.0):
        raise ValueError("eps must lie in (0, 1)")
    work = lazy_transform(k) if lazy else k
    try:
        pi = stationary_distribution(work)
    except Reducible:
        pi = _closed_class_mixture(work.p)
    if t_max is None:
        t_max = default_mix_horizon(k.n)
    starts = np.arange(k.n) if subset is None else np.asarray(subset, dtype=int)
    rows = np.eye(k.n)[starts]
    profile = []
    for t in range(t_max + 1):
        tv = 0.5 * float(np.max(np.abs(rows - pi).sum(axis=1)))
        profile.append(tv)
        if tv <= eps:
            return t
        rows = rows @ work.p
    raise NotMixedByHorizon(
        f"TV still {profile[-1]:.4f} > {eps} after {t_max} steps", np.array(profile)
    )


# --- expected hitting times ----------------------------------------------------

def expected_hitting(k: FiniteKernel, target) -> np.ndarray:
    """Expected hitting times E_x[tau(A)] for every start x.

    tau counts from t = 0, so entries inside A are 0.  The empty target has
    tau = infinity and yields an all-infinite vector (no exception).  The
    dense linear solve is iteratively refined to residual 1e-12.

    Raises
    ------
    Unreachable
        If some state cannot reach the (nonempty) target.
    """
    n = k.n
    A = np.unique(np.asarray(list(target), dtype=int))
    if A.size == 0:
        return np.full(n, np.inf)
    if A[0] < 0 or A[-1] >= n:
        raise Unreachable("target indices out of range")
    rest = np.setdiff1d(np.arange(n), A)
    if rest.size == 0:
        return np.zeros(n)
    if not _all_reach(k.p, A):
        raise Unreachable("target is not reachable from every state")
    q = k.p[np.ix_(rest, rest)]
    m = np.eye(rest.size) - q
    b = np.ones(rest.size)
    lu, piv = scipy.linalg.lu_factor(m)
    h = scipy.linalg.lu_solve((lu, piv), b)
    # one round of iterative refinement keeps the residual at solver tolerance
    for _ in range(3):
        r = b - m @ h
        if np.max(np.abs(r)) <= LINEAR_RESIDUAL_TOL * max(1.0, float(np.max(np.abs(h)))):
            break
        h = h + scipy.linalg.lu_solve((lu, piv), r)
    out = np.zeros(n)
    out[rest] = h
    return out


def _all_reach(p: np.ndarray, target: np.ndarray) -> bool:
    adj = p > 0.0
    seen = np.zeros(p.shape[0], dtype=bool)
    seen[target] = True
    while not seen.all():
        grown = seen | (adj @ seen)
        if np.array_equal(grown, seen):
            return False
        seen = grown
    return True


# --- maximum hitting times -------------------------------------------------------

@dataclass
class HitMixReport:
    """Worst-case expected hitting time over a family of large sets."""

    alpha: float
    t_h: float
    method: str  # "brute" | "interval" | "monte-carlo"
    worst_set: tuple
    worst_start: int
    t_m: int | None = None
    t_l: int | None = None
    eps_mix: float = DEFAULT_MIX_EPS

    def csv_row(self) -> list[str]:
        return [
            repr(float(self.alpha)),
            repr(float(self.t_h)),
            self.method,
            ";".join(str(i) for i in self.worst_set),
            str(self.worst_start),
            "" if self.t_m is None else str(self.t_m),
            "" if self.t_l is None else str(self.t_l),
        ]

    CSV_HEADER = ["alpha", "tH", "method", "worst_set", "worst_start", "tm", "tL"]


def max_hitting_time(
    k: FiniteKernel,
    alpha: float,
    strategy: str = "brute",
    pi: np.ndarray | None = None,
) -> HitMixReport:
    """Maximum expected hitting time of sets with stationary mass >= alpha.

    strategy "brute" enumerates every subset (n <= 14); strategy "interval"
    scans prefix, suffix and window intervals in state-coordinate order,
    which is exact for birth-death chains (no-skip paths) and a lower bound
    in general.  Ties break lexicographically on the (set, start) encoding.

    Raises
    ------
    TooManyStates, NoFeasibleSet, MissingCoordinates
    """
    if alpha <= 0.0:
        raise NoFeasibleSet("alpha must be positive")
    if pi is None:
        pi = stationary_distribution(k)
    if strategy == "brute":
        sets = _brute_family(k.n, pi, alpha)
    elif strategy == "interval":
        sets = _interval_family(k, pi, alpha)
    else:
        raise ValueError(f"unknown strategy {strategy!r}")

    best = None  # (value, set, start)
    feasible = 0
    for subset in sets:
        feasible += 1
        h = expected_hitting(k, subset)
        start = int(np.argmax(h))
        val = float(h[start])
        if best is None or val > best[0]:
            best = (val, tuple(int(i) for i in subset), start)
    if best is None:
        raise NoFeasibleSet(f"no set has stationary mass >= {alpha}")
    return HitMixReport(
        alpha=alpha,
        t_h=best[0],
        method=strategy,
        worst_set=best[1],
        worst_start=best[2],
    )


def _brute_family(n: int, pi: np.ndarray, alpha: float):
    if n > BRUTE_STATE_CAP:
        raise TooManyStates(f"brute enumeration capped at {BRUTE_STATE_CAP} states")
    for mask in range(1, 1 << n):
        members = [i for i in range(n) if mask >> i & 1]
        if pi[members].sum() >= alpha - ROW_SUM_TOL:
            yield members


def _interval_family(k: FiniteKernel, pi: np.ndarray, alpha: float):
    if k.states is None:
        raise MissingCoordinates("interval strategy requires state coordinates")
    n = k.n
    emitted = set()
    # all contiguous windows [i..j] with mass >= alpha (includes every
    # prefix [0..j] and suffix [i..n-1])
    for i in range(n):
        mass = 0.0
        for j in range(i, n):
            mass += pi[j]
            if mass >= alpha - ROW_SUM_TOL:
                key = (i, j)
                if key not in emitted:
                    emitted.add(key)
                    yield list(range(i, j + 1))


# --- pseudo-minorization ----------------------------------------------------------

@dataclass
class MinorizationReport:
    """Pairwise overlap report: eps = 1 - worst pairwise TV of T-step rows.

    For the worst pair (x, y), ``support`` is the positive-difference set
    C_xy and ``mu`` the shared minorizing probability vector with
    P^T(x, .) >= eps * mu and P^T(y, .) >= eps * mu entrywise.
    """

    subset: tuple
    t: int
    eps: float
    worst_pair: tuple
    mu: np.ndarray = field(repr=False)
    support: tuple = ()

    def minorization_gap(self, rows: np.ndarray) -> float:
        """min over the worst pair's rows of row - eps*mu (>= 0 if valid)."""
        x, y = self.worst_pair
        return float(min(np.min(rows[x] - self.eps * self.mu),
                         np.min(rows[y] - self.eps * self.mu)))


def pseudo_minorization(k: FiniteKernel, subset, t: int) -> MinorizationReport:
    """Pairwise minorization constant of the t-step kernel on a subset.

    eps = 1 - max over pairs x, y in S of TV(P^t(x,.), P^t(y,.)).  For the
    worst pair the shared measure mu_xy is materialized from the
    positive-difference support C_xy and both entrywise inequalities are
    verified before returning.

    Raises
    ------
    DegenerateOverlap
        If eps <= 0 within tolerance, signalling t too small.
    """
    S = np.unique(np.asarray(subset, dtype=int))
    if S.size == 0:
        raise EmptySubset("minorization subset is empty")
    if t < 1:
        raise ValueError("step count must be >= 1")
    rows = np.linalg.matrix_power(k.p, t)
    sub = rows[S]
    worst = (0.0, (int(S[0]), int(S[0])))
    for a in range(S.size):
        diffs = 0.5 * np.abs(sub[a][None, :] - sub[a + 1:]).sum(axis=1)
        if diffs.size:
            b = int(np.argmax(diffs))
            val = float(diffs[b])
            if val > worst[0]:
                worst = (val, (int(S[a]), int(S[a + b + 1])))
    eps = 1.0 - worst[0]
    if eps <= ROW_SUM_TOL:
        raise DegenerateOverlap(f"pairwise TV is 1 at t={t}; overlap degenerate")
    x, y = worst[1]
    rx, ry = rows[x], rows[y]
    support = rx > ry
    num = np.where(support, ry, rx)
    denom = float(num.sum())  # equals 1 - TV(rx, ry) = eps for the worst pair
    mu = num / denom
    report = MinorizationReport(
        subset=tuple(int(i) for i in S),
        t=t,
        eps=eps,
        worst_pair=(x, y),
        mu=mu,
        support=tuple(int(i) for i in np.flatnonzero(support)),
    )
    gap = report.minorization_gap(rows)
    if gap < -ROW_SUM_TOL:
        raise DegenerateOverlap(f"minorization inequality violated by {gap:.3e}")
    return report


def mix_to_hit_bound(t_m: int) -> float:
    """Certified upper bound t_H(1/3) <= 12 * t_m."""
    if t_m < 0:
        raise ValueError("mixing time must be nonnegative")
    return 12.0 * t_m
