"""Joint observation likelihood ``Pr(O | S)`` over finite sets.

A data association splits the detections into false ones ``F`` and the
objects into missed ones ``M`` and matches the rest bijectively.  The pruned
evaluator walks false/missing pairs in descending prior weight through a
priority queue and sums ranked assignments for each; the exhaustive
evaluators here are oracles for it.
"""
from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field

import numpy as np

from . import _pykernels, kernels
from .assignment import DEFAULT_CAP, murty_k_best
from .errors import InfeasibleAssignment, SizeGuardError
from .models import ModelParams, as_detections, as_states, log_clutter, loglik_matrix

EXACT_SIZE_LIMIT = 12


@dataclass(frozen=True)
class DataAssociation:
    F: tuple[int, ...] = ()
    M: tuple[int, ...] = ()
    psi: tuple[tuple[int, int], ...] = ()  # (object index, detection index)
    log_term: float = -math.inf

    @property
    def joint_term(self) -> float:
        return math.exp(self.log_term)

    def detection_of(self, n_objects: int) -> np.ndarray:
        """Detection index matched to each object, ``-1`` when missed."""
        out = np.full(n_objects, -1, dtype=int)
        for s, o in self.psi:
            out[s] = o
        return out


@dataclass(frozen=True)
class ObsResult:
    log_likelihood: float
    best_assoc: DataAssociation = field(default_factory=DataAssociation)
    terms_evaluated: int = 0
    pairs_evaluated: int = 0

    @property
    def likelihood(self) -> float:
        return math.exp(self.log_likelihood)


def _as_matrix(L, n_o: int) -> np.ndarray:
    L = np.asarray(L, dtype=float)
    if L.ndim == 2:
        return L
    return L.reshape(-1, n_o) if n_o else np.zeros((0, 0))


def _bits(mask: int) -> tuple[int, ...]:
    out = []
    k = 0
    while mask:
        if mask & 1:
            out.append(k)
        mask >>= 1
        k += 1
    return tuple(out)


def f_false(F, params: ModelParams) -> float:
    """``(nu tau)^|F| exp(-nu tau) prod Pr(o | empty)``."""
    F = as_detections(F)
    nt = params.false_rate * params.dt
    val = math.exp(-nt) * nt ** len(F)
    for q in np.exp(log_clutter(F, params)):
        val *= q
    return val


def f_miss(m_size: int, s_size: int, params: ModelParams) -> float:
    """Poisson(|M|; |S| xi tau) spread evenly over the C(|S|, |M|) miss sets."""
    if not 0 <= m_size <= s_size:
        raise ValueError("need 0 <= |M| <= |S|")
    lam = s_size * params.miss_rate * params.dt
    return lam ** m_size * math.exp(-lam) / math.factorial(m_size) / math.comb(s_size, m_size)


def matched_likelihood(objs, dets, params: ModelParams, ratio_threshold: float | None = None,
                       cap: int | None = None):
    """Ranked-assignment approximation of ``sum_psi prod Pr(psi(s) | s)``.

    Returns ``(value, best_mapping)``; ``best_mapping[i]`` is the detection
    matched to object ``i``.
    """
    objs = as_states(objs)
    dets = as_detections(dets)
    if len(objs) != len(dets):
        raise ValueError("matched likelihood needs |objects| == |detections|")
    if len(objs) == 0:
        return 1.0, ()
    t = params.assign_threshold if ratio_threshold is None else ratio_threshold
    sols = murty_k_best(-loglik_matrix(objs, dets, params), t, cap or params.assign_cap)
    c0 = sols[0].total_cost
    return sum(math.exp(-a.total_cost) for a in sols), sols[0].mapping if c0 < math.inf else ()


def joint_likelihood_from_logs(L, lq, params: ModelParams, *, t_assign=None, t_fm=None,
                               absorb=False, trace=None, impl=None) -> ObsResult:
    """Pruned joint likelihood from precomputed log densities (hot path)."""
    lq = np.asarray(lq, dtype=float)
    L = _as_matrix(L, len(lq))
    nu_tau = params.false_rate * params.dt
    xi_tau = params.miss_rate * params.dt
    t_assign = params.assign_threshold if t_assign is None else t_assign
    t_fm = params.fm_threshold if t_fm is None else t_fm
    shift = math.log(params.arena_area) if params.fm_prior_per_arena else 0.0
    ll, best, fm, mm, psi, n_pairs, n_terms = kernels.joint_loglik(
        L, lq, nu_tau, xi_tau, t_assign, t_fm, params.assign_cap, absorb, trace, shift, impl=impl)
    if ll == -math.inf and t_fm > 0:
        ll, best, fm, mm, psi, n_extra, n_more = _first_feasible_pair(
            L, lq, nu_tau, xi_tau, t_assign, params.assign_cap, absorb, trace, shift, impl)
        n_pairs += n_extra
        n_terms += n_more
    if ll == -math.inf:
        # every term vanished; all-false/all-missed is the one association that is always feasible
        fm, mm, psi = (1 << L.shape[1]) - 1, (1 << L.shape[0]) - 1, ()
    assoc = DataAssociation(_bits(fm), _bits(mm), tuple(psi), best)
    return ObsResult(ll, assoc, n_terms, n_pairs)


def _first_feasible_pair(L, lq, nu_tau, xi_tau, t_assign, cap, absorb, trace, shift, impl):
    """Evaluate the highest-prior F-M pair with ``|O - F| = |S - M|``.

    Used when the probability threshold stops the search before any feasible
    pair, which would otherwise report a zero likelihood.  For a fixed false
    set size the best false set is the forced detections (no object can
    explain them) plus the heaviest remaining ones.
    """
    n_s, n_o = L.shape
    w = lq + math.log(nu_tau) if nu_tau > 0 else np.full(n_o, -math.inf)
    forced = [o for o in range(n_o) if n_s == 0 or not np.isfinite(L[:, o]).any()]
    others = sorted((o for o in range(n_o) if o not in forced), key=lambda o: (-w[o], o))
    pick = None
    for prio, m, lfm in _pykernels._miss_groups(n_s, xi_tau, absorb):
        f = n_o - n_s + m
        if not len(forced) <= f <= n_o:
            continue
        F = forced + others[: f - len(forced)]
        lf = -nu_tau + float(sum(w[o] for o in F))
        if lf == -math.inf:
            continue
        q = lf + len(F) * shift + prio
        if pick is None or q > pick[0]:
            pick = (q, F, m, lf + lfm)
    out = [-math.inf, -math.inf, 0, 0, (), 0, 0]
    if pick is None:
        return tuple(out)
    _, F, m, base = pick
    fmask = sum(1 << o for o in F)
    cols = [o for o in range(n_o) if o not in F]
    bound = -math.log(t_assign) if t_assign > 0 else math.inf
    for mmask in _pykernels._combos(n_s, m):
        rows = [r for r in range(n_s) if not (mmask >> r) & 1]
        out[5] += 1
        try:
            sols, _ = kernels.murty(-L[np.ix_(rows, cols)], bound, cap, impl=impl)
        except InfeasibleAssignment:
            continue
        c0 = sols[0][0]
        lm = -c0 + math.log(sum(math.exp(c0 - c) for c, _ in sols))
        out[0] = _pykernels._logaddexp(out[0], base + lm)
        out[6] += len(sols)
        if base - c0 > out[1]:
            out[1:5] = [base - c0, fmask, mmask, tuple((rows[r], cols[c]) for r, c in enumerate(sols[0][1]))]
        if trace is not None:
            trace.append((fmask, mmask, len(rows), lm, len(sols)))
    return tuple(out)


def joint_likelihood(O, S, params: ModelParams, **kw) -> ObsResult:
    """Pruned ``Pr(O | S)`` with the best association among evaluated terms."""
    O = as_detections(O)
    S = as_states(S)
    return joint_likelihood_from_logs(loglik_matrix(S, O, params), log_clutter(O, params), params, **kw)


def best_association(O, S, params: ModelParams, **kw) -> DataAssociation:
    return joint_likelihood(O, S, params, **kw).best_assoc


# -- exhaustive oracles ------------------------------------------------------


def _exact_terms(O, S, params: ModelParams):
    O = as_detections(O)
    S = as_states(S)
    if len(O) + len(S) > EXACT_SIZE_LIMIT:
        raise SizeGuardError(f"|O| + |S| must be <= {EXACT_SIZE_LIMIT} for exhaustive evaluation")
    lik = np.exp(loglik_matrix(S, O, params))
    clut = np.exp(log_clutter(O, params))
    nt = params.false_rate * params.dt
    n_o, n_s = len(O), len(S)
    for fsize in range(n_o + 1):
        m = n_s - (n_o - fsize)
        if not 0 <= m <= n_s:
            continue
        for F in itertools.combinations(range(n_o), fsize):
            ff = nt ** fsize * math.exp(-nt)
            for o in F:
                ff *= clut[o]
            fm = f_miss(m, n_s, params)
            cols = [o for o in range(n_o) if o not in F]
            for M in itertools.combinations(range(n_s), m):
                rows = [s for s in range(n_s) if s not in M]
                for perm in itertools.permutations(cols):
                    val = ff * fm
                    for r, c in zip(rows, perm):
                        val *= lik[r, c]
                    yield F, M, tuple(zip(rows, perm)), val


def joint_likelihood_exact(O, S, params: ModelParams) -> float:
    """Unpruned sum over every false/missing pair and every assignment."""
    return sum(t[3] for t in _exact_terms(O, S, params))


def count_exact_pairs(n_o: int, n_s: int) -> int:
    return sum(math.comb(n_o, i) * math.comb(n_s, i) for i in range(min(n_o, n_s) + 1))


def count_exact_terms(n_o: int, n_s: int) -> int:
    return sum(math.comb(n_o, i) * math.comb(n_s, i) * math.factorial(i) for i in range(min(n_o, n_s) + 1))


def best_association_exact(O, S, params: ModelParams) -> DataAssociation:
    best = None
    for F, M, psi, val in _exact_terms(O, S, params):
        if best is None or val > best[3]:
            best = (F, M, psi, val)
    if best is None or best[3] == 0:
        return DataAssociation()
    F, M, psi, val = best
    return DataAssociation(tuple(F), tuple(M), tuple(sorted(psi)), math.log(val))


# -- fast exact evaluation (subset dynamic programming) ------------------------


def permanent(A) -> float:
    """Permanent of a nonnegative square matrix by subset DP, ``O(2^n n)``."""
    A = np.asarray(A, dtype=float)
    n = A.shape[0]
    if n == 0:
        return 1.0
    if n > 24:
        raise SizeGuardError("permanent limited to n <= 24")
    dp = np.zeros(1 << n)
    dp[0] = 1.0
    masks = np.arange(1 << n)
    pop = np.array([bin(m).count("1") for m in range(1 << n)])
    for r in range(n):
        layer = masks[pop == r + 1]
        acc = np.zeros(len(layer))
        for c in range(n):
            has = (layer >> c) & 1 == 1
            acc[has] += dp[layer[has] ^ (1 << c)] * A[r, c]
        dp[layer] = acc
    return float(dp[-1])


def joint_loglik_dp(L, lq, params: ModelParams) -> float:
    """Exact ``log Pr(O | S)`` in ``O(|S| 2^|O| |O|)`` by DP over used-detection masks."""
    lq = np.asarray(lq, dtype=float)
    L = _as_matrix(L, len(lq))
    n_s, n_o = L.shape
    if n_o > 22:
        raise SizeGuardError("exact DP limited to 22 detections")
    # rescale per detection to keep products in range
    shift = np.maximum(np.max(L, axis=0, initial=-np.inf), lq)
    shift[~np.isfinite(shift)] = 0.0
    A = np.exp(L - shift[None, :])
    q = np.exp(lq - shift)
    size = 1 << n_o
    masks = np.arange(size)
    # dp[k][mask]: first objects processed, `mask` detections used, k of them missed
    dp = np.zeros((n_s + 1, size))
    dp[0, 0] = 1.0
    for r in range(n_s):
        new = np.zeros_like(dp)
        new[1:] += dp[:-1]  # object r missed
        for c in range(n_o):
            bit = 1 << c
            has = (masks & bit) != 0
            new[:, has] += dp[:, masks[has] ^ bit] * A[r, c]
        dp = new
    nt = params.false_rate * params.dt
    lam = n_s * params.miss_rate * params.dt
    # f_F over the unused detections, per mask
    with np.errstate(divide="ignore"):
        logq = np.log(nt * q) if nt > 0 else np.full(n_o, -np.inf)
    lf = np.full(size, -nt)
    for c in range(n_o):
        unused = (masks & (1 << c)) == 0
        lf[unused] += logq[c]
    pop = np.array([bin(m).count("1") for m in range(size)])
    total = 0.0
    for m in range(n_s + 1):
        fm = f_miss(m, n_s, params) if lam > 0 or m == 0 else 0.0
        if fm == 0.0:
            continue
        sel = pop == n_s - m
        with np.errstate(invalid="ignore"):
            total += fm * np.sum(dp[m, sel] * np.exp(lf[sel]))
    if total <= 0:
        return -math.inf
    return math.log(total) + float(np.sum(shift))
