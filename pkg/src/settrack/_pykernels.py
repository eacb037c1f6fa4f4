"""Pure-Python hot kernels.

Reference implementation of the compiled ``_ckernels`` module; the two share
one algorithm and one operation order so their outputs agree to rounding.

* ``hungarian`` / ``murty``: shortest-augmenting-path assignment with dual
  potentials, and ranked enumeration where each child problem is re-solved by
  a single warm-started augmentation (O(n^3) per returned assignment).
* ``joint_loglik``: the false/missing pair search over a descending priority
  queue, summing ranked assignments for every feasible pair it visits.

Costs are plain nested lists or 2-D arrays; ``inf`` marks forbidden pairs.
"""
from __future__ import annotations

import heapq
import math

from .errors import AssignmentCapExceeded, InfeasibleAssignment, SizeGuardError

INF = math.inf
BACKEND = "python"


def _prepare(cost):
    n = len(cost)
    m = 0.0
    for row in cost:
        if len(row) != n:
            raise ValueError("cost matrix must be square")
        for x in row:
            if x != x or x == -INF:
                raise ValueError("cost entries must be finite or +inf")
            if x < INF and abs(x) > m:
                m = abs(x)
    # any assignment touching a sentinel costs more than every finite one
    big = 4.0 * (n + 1) * (m + 1.0)
    a = [[float(x) if x < INF else big for x in row] for row in cost]
    tol = 1e-9 * (1.0 + m)
    return a, big, tol


def _augment(a, n, u, v, p, way, row):
    """Insert ``row`` into the matching ``p`` (1-indexed, p[j] = row of column j)."""
    minv = [INF] * (n + 1)
    used = [False] * (n + 1)
    p[0] = row
    j0 = 0
    ops = 0
    while True:
        used[j0] = True
        i0 = p[j0]
        ai = a[i0 - 1]
        ui = u[i0]
        delta = INF
        j1 = 0
        for j in range(1, n + 1):
            if not used[j]:
                cur = ai[j - 1] - ui - v[j]
                if cur < minv[j]:
                    minv[j] = cur
                    way[j] = j0
                if minv[j] < delta:
                    delta = minv[j]
                    j1 = j
        ops += n
        for j in range(n + 1):
            if used[j]:
                u[p[j]] += delta
                v[j] -= delta
            else:
                minv[j] -= delta
        j0 = j1
        if p[j0] == 0:
            break
    while True:
        j1 = way[j0]
        p[j0] = p[j1]
        j0 = j1
        if j0 == 0:
            break
    return ops


def _alt_path(a, n, u, v, p, big, tol, i, j, target):
    """Alternating tight path letting row ``i`` take column ``j``.

    Rows ``<= i`` are frozen.  The displaced row ``p[j]`` must reach column
    ``target`` (row i's current column).  Returns (row, col) reassignments or None.
    """
    start = p[j]
    stack = [start]
    seen = [False] * (n + 1)
    seen[j] = True
    came = {}
    ops = 0
    while stack:
        r = stack.pop()
        ar = a[r - 1]
        ur = u[r]
        for c in range(1, n + 1):
            ops += 1
            if seen[c] or ar[c - 1] >= big or ar[c - 1] - ur - v[c] > tol:
                continue
            if c == target:
                moves = [(r, c)]
                while r != start:
                    pc, pr = came[r]
                    moves.append((pr, pc))
                    r = pr
                return moves, ops
            k = p[c]
            if k <= i:
                continue
            seen[c] = True
            came[k] = (c, r)
            stack.append(k)
    return None, ops


def _lexfix(a, n, u, v, p, big, tol):
    """Move to the lexicographically smallest optimal matching (tight-edge swaps)."""
    col_of = [0] * (n + 1)
    for c in range(1, n + 1):
        col_of[p[c]] = c
    ops = 0
    for i in range(1, n + 1):
        ci = col_of[i]
        ai = a[i - 1]
        for j in range(1, ci):
            if ai[j - 1] >= big or ai[j - 1] - u[i] - v[j] > tol or p[j] < i:
                continue
            moves, k = _alt_path(a, n, u, v, p, big, tol, i, j, ci)
            ops += k
            if moves is None:
                continue
            p[j] = i
            col_of[i] = j
            for r, c in moves:
                p[c] = r
                col_of[r] = c
            break
    return ops


def _solution(a, n, p, big):
    cols = [0] * n
    for c in range(1, n + 1):
        cols[p[c] - 1] = c - 1
    total = 0.0
    for r in range(n):
        x = a[r][cols[r]]
        if x >= big:
            return None, INF
        total += x
    return tuple(cols), total


def hungarian(cost):
    """Minimum-cost assignment; ties resolve to the lexicographically smallest mapping."""
    n = len(cost)
    if n == 0:
        return (), 0.0
    a, big, tol = _prepare(cost)
    u = [0.0] * (n + 1)
    v = [0.0] * (n + 1)
    p = [0] * (n + 1)
    way = [0] * (n + 1)
    for i in range(1, n + 1):
        _augment(a, n, u, v, p, way, i)
    _lexfix(a, n, u, v, p, big, tol)
    cols, total = _solution(a, n, p, big)
    if cols is None:
        raise InfeasibleAssignment("no finite-cost assignment")
    return cols, total


def murty(cost, max_log_ratio=INF, cap=10_000):
    """Ranked assignments with ``cost - best <= max_log_ratio``.

    Returns ``(solutions, ops)`` where ``solutions`` is a list of
    ``(total_cost, cols)`` in nondecreasing cost (then lexicographic) order and
    ``ops`` counts inner-loop reduced-cost evaluations.
    """
    n = len(cost)
    if n == 0:
        return [(0.0, ())], 0
    a, big, tol = _prepare(cost)
    u = [0.0] * (n + 1)
    v = [0.0] * (n + 1)
    p = [0] * (n + 1)
    way = [0] * (n + 1)
    ops = 0
    for i in range(1, n + 1):
        ops += _augment(a, n, u, v, p, way, i)
    ops += _lexfix(a, n, u, v, p, big, tol)
    cols, total = _solution(a, n, p, big)
    if cols is None:
        raise InfeasibleAssignment("no finite-cost assignment")
    heap = [(total, cols, a, u, v, p, ())]
    out = []
    best = total
    slack = max_log_ratio + 1e-12 * (1.0 + abs(best))
    while heap:
        total, cols, na, nu, nv, np_, forced = heapq.heappop(heap)
        if out and total - best > slack:
            break
        if len(out) >= cap:
            raise AssignmentCapExceeded(f"more than {cap} assignments within the ratio threshold")
        out.append((total, cols))
        w = [row[:] for row in na]
        fixed = list(forced)
        free = [r for r in range(n) if r not in forced]
        for idx, r in enumerate(free):
            if idx == len(free) - 1:
                break
            c = cols[r]
            child = [row[:] for row in w]
            child[r][c] = big
            cu = nu[:]
            cv = nv[:]
            cp = np_[:]
            cp[c + 1] = 0
            ops += _augment(child, n, cu, cv, cp, way, r + 1)
            ccols, ctotal = _solution(child, n, cp, big)
            if ccols is not None:
                ops += _lexfix(child, n, cu, cv, cp, big, tol)
                ccols, ctotal = _solution(child, n, cp, big)
                heapq.heappush(heap, (ctotal, ccols, child, cu, cv, cp, tuple(fixed)))
            wr = w[r]
            for j in range(n):
                if j != c:
                    wr[j] = big
            for i2 in range(n):
                if i2 != r:
                    w[i2][c] = big
            fixed.append(r)
    return out, ops


# ---------------------------------------------------------------------------
# false/missing pair search


def _logaddexp(x, y):
    if x == -INF:
        return y
    if y == -INF:
        return x
    if x > y:
        return x + math.log1p(math.exp(y - x))
    return y + math.log1p(math.exp(x - y))


class _FalseSets:
    """Subsets of detections generated lazily in descending ``log f_F`` order."""

    def __init__(self, lq, nu_tau, shift=0.0):
        base = -nu_tau
        items = []
        if nu_tau > 0:
            lnt = math.log(nu_tau)
            items = [(lnt + lq[o] + shift, o) for o in range(len(lq)) if lq[o] > -INF]
        top = base
        top_mask = 0
        for w, o in items:
            if w > 0:
                top += w
                top_mask |= 1 << o
        self.top = top
        self.top_mask = top_mask
        self.deltas = sorted((abs(w), o) for w, o in items)
        self.entries = [(top, top_mask, bin(top_mask).count("1"))]
        self.heap = []
        self.counter = 0
        if self.deltas:
            self._push(self.deltas[0][0], 0, 1 << self.deltas[0][1])

    def _push(self, s, k, flips):
        heapq.heappush(self.heap, (s, self.counter, k, flips))
        self.counter += 1

    def get(self, i):
        while len(self.entries) <= i and self.heap:
            s, _, k, flips = heapq.heappop(self.heap)
            mask = self.top_mask ^ flips
            self.entries.append((self.top - s, mask, bin(mask).count("1")))
            if k + 1 < len(self.deltas):
                dk = self.deltas[k][0]
                dn, on = self.deltas[k + 1]
                self._push(s + dn, k + 1, flips | (1 << on))
                self._push((s - dk) + dn, k + 1, (flips ^ (1 << self.deltas[k][1])) | (1 << on))
        if i < len(self.entries):
            return self.entries[i]
        return None


def _log_factorial(k):
    t = 0.0
    for q in range(2, k + 1):
        t += math.log(q)
    return t


def _miss_groups(n_s, xi_tau, absorb):
    lam = n_s * xi_tau
    groups = []
    for m in range(n_s + 1):
        if lam == 0:
            lp = 0.0 if m == 0 else -INF
        else:
            lp = m * math.log(lam) - lam - _log_factorial(m)
        if lp == -INF:
            continue
        lc = _log_factorial(n_s) - _log_factorial(m) - _log_factorial(n_s - m)
        lfm = lp - lc
        groups.append((lp if absorb else lfm, m, lfm))
    groups.sort(key=lambda g: (-g[0], g[1]))
    return groups


def _combos(n, m):
    if m == 0:
        yield 0
        return
    x = (1 << m) - 1
    limit = 1 << n
    while x < limit:
        yield x
        c = x & -x
        r = x + c
        x = (((r ^ x) >> 2) // c) | r


def joint_loglik(L, lq, nu_tau, xi_tau, t_assign, t_fm, cap=10_000, absorb=False, trace=None, prio_shift=0.0):
    """Pruned ``log Pr(O | S)``.

    ``L[s][o]`` is ``log Pr(o | s)``, ``lq[o]`` is ``log Pr(o | empty)``.
    Returns ``(loglik, best_logterm, best_F_mask, best_M_mask, best_psi,
    n_pairs, n_terms)``; ``best_psi`` is a tuple of ``(object, detection)``.
    With ``trace`` a list, each evaluated pair appends
    ``(F_mask, M_mask, size, log_matched, n_assignments)``.

    ``prio_shift`` is added per false detection to the queue priority only
    (ordering and threshold), never to the accumulated terms.
    """
    n_s = len(L)
    n_o = len(lq)
    if n_s > 62 or n_o > 62:
        raise SizeGuardError("at most 62 objects and 62 detections")
    max_log_ratio = -math.log(t_assign) if t_assign > 0 else INF
    log_tfm = math.log(t_fm) if t_fm > 0 else -INF
    fsets = _FalseSets(lq, nu_tau, prio_shift)
    groups = _miss_groups(n_s, xi_tau, absorb)
    acc = -INF
    best = -INF
    best_f = best_m = 0
    best_psi = ()
    n_pairs = n_terms = 0
    if not groups:
        return acc, best, best_f, best_m, best_psi, n_pairs, n_terms
    heap = [(-(fsets.get(0)[0] + groups[0][0]), 0, 0, 0)]
    seen = {(0, 0)}
    counter = 1
    while heap:
        _, _, i, j = heapq.heappop(heap)
        lf, fmask, fsize = fsets.get(i)
        prio, m, lfm = groups[j]
        q = lf + prio
        if n_o - fsize == n_s - m:
            cols = [o for o in range(n_o) if not (fmask >> o) & 1]
            base = lf - fsize * prio_shift + lfm
            for mmask in _combos(n_s, m):
                rows = [s for s in range(n_s) if not (mmask >> s) & 1]
                sub = [[-L[r][c] for c in cols] for r in rows]
                n_pairs += 1
                try:
                    sols, _ = murty(sub, max_log_ratio, cap)
                except InfeasibleAssignment:
                    if q < log_tfm:
                        break
                    continue
                c0 = sols[0][0]
                tot = 0.0
                for c, _ in sols:
                    tot += math.exp(c0 - c)
                lm = -c0 + math.log(tot)
                acc = _logaddexp(acc, base + lm)
                n_terms += len(sols)
                if base - c0 > best:
                    best = base - c0
                    best_f = fmask
                    best_m = mmask
                    best_psi = tuple((rows[r], cols[c]) for r, c in enumerate(sols[0][1]))
                if trace is not None:
                    trace.append((fmask, mmask, len(rows), lm, len(sols)))
                if q < log_tfm:
                    # the pair that crosses the threshold is the last one popped
                    break
        nxt = fsets.get(i + 1)
        if nxt is not None and (i + 1, j) not in seen:
            seen.add((i + 1, j))
            heapq.heappush(heap, (-(nxt[0] + prio), counter, i + 1, j))
            counter += 1
        if j + 1 < len(groups) and (i, j + 1) not in seen:
            seen.add((i, j + 1))
            heapq.heappush(heap, (-(lf + groups[j + 1][0]), counter, i, j + 1))
            counter += 1
        if q < log_tfm:
            break
    return acc, best, best_f, best_m, best_psi, n_pairs, n_terms
