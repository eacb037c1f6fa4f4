# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
# distutils: language = c++
"""Compiled hot kernels; mirrors ``_pykernels`` operation for operation."""
from libc.math cimport log, exp, log1p, fabs, INFINITY
from libcpp.vector cimport vector
from libcpp.unordered_set cimport unordered_set

from .errors import AssignmentCapExceeded, InfeasibleAssignment, SizeGuardError

BACKEND = "cython"

cdef extern from *:
    int popcount64 "__builtin_popcountll"(unsigned long long) nogil

ctypedef unsigned long long u64

cdef double INF = INFINITY


cdef struct Node:
    double total
    vector[double] a
    vector[double] u
    vector[double] v
    vector[int] p
    vector[int] cols
    vector[char] forced


cdef struct Scratch:
    vector[double] minv
    vector[char] used
    vector[int] way
    vector[int] stack
    vector[char] seen
    vector[int] came_col
    vector[int] came_row
    vector[int] col_of


cdef void scratch_init(Scratch* s, int n) noexcept nogil:
    s.minv.resize(n + 1)
    s.used.resize(n + 1)
    s.way.resize(n + 1)
    s.stack.resize(n + 1)
    s.seen.resize(n + 1)
    s.came_col.resize(n + 1)
    s.came_row.resize(n + 1)
    s.col_of.resize(n + 1)


cdef long long augment(double* a, int n, double* u, double* v, int* p, Scratch* s, int row) noexcept nogil:
    cdef double* minv = s.minv.data()
    cdef char* used = s.used.data()
    cdef int* way = s.way.data()
    cdef int j, j0, j1, i0
    cdef double delta, cur, ui
    cdef double* ai
    cdef long long ops = 0
    for j in range(n + 1):
        minv[j] = INF
        used[j] = 0
    p[0] = row
    j0 = 0
    while True:
        used[j0] = 1
        i0 = p[j0]
        ai = a + (i0 - 1) * n
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


cdef int alt_path(double* a, int n, double* u, double* v, int* p, double big, double tol,
                  int i, int j, int target, Scratch* s, long long* ops) noexcept nogil:
    """Re-route row ``i`` onto column ``j``; applies the moves and returns 1 on success."""
    cdef int* stack = s.stack.data()
    cdef char* seen = s.seen.data()
    cdef int* came_col = s.came_col.data()
    cdef int* came_row = s.came_row.data()
    cdef int* col_of = s.col_of.data()
    cdef int top = 0, r, c, k, start, pr, pc
    cdef double* ar
    cdef double ur
    for c in range(n + 1):
        seen[c] = 0
    seen[j] = 1
    start = p[j]
    stack[top] = start
    top += 1
    while top > 0:
        top -= 1
        r = stack[top]
        ar = a + (r - 1) * n
        ur = u[r]
        for c in range(1, n + 1):
            ops[0] += 1
            if seen[c] or ar[c - 1] >= big or ar[c - 1] - ur - v[c] > tol:
                continue
            if c == target:
                # apply: i -> j, r -> target, then walk back
                p[j] = i
                col_of[i] = j
                p[c] = r
                col_of[r] = c
                while r != start:
                    pc = came_col[r]
                    pr = came_row[r]
                    p[pc] = pr
                    col_of[pr] = pc
                    r = pr
                return 1
            k = p[c]
            if k <= i:
                continue
            seen[c] = 1
            came_col[k] = c
            came_row[k] = r
            stack[top] = k
            top += 1
    return 0


cdef long long lexfix(double* a, int n, double* u, double* v, int* p, double big, double tol, Scratch* s) noexcept nogil:
    cdef int* col_of = s.col_of.data()
    cdef int i, j, c, ci
    cdef double* ai
    cdef long long ops = 0
    for c in range(1, n + 1):
        col_of[p[c]] = c
    for i in range(1, n + 1):
        ci = col_of[i]
        ai = a + (i - 1) * n
        for j in range(1, ci):
            if ai[j - 1] >= big or ai[j - 1] - u[i] - v[j] > tol or p[j] < i:
                continue
            if alt_path(a, n, u, v, p, big, tol, i, j, ci, s, &ops):
                break
    return ops


cdef bint solution(double* a, int n, int* p, double big, int* cols, double* total) noexcept nogil:
    cdef int c, r
    cdef double x, t = 0.0
    for c in range(1, n + 1):
        cols[p[c] - 1] = c - 1
    for r in range(n):
        x = a[r * n + cols[r]]
        if x >= big:
            total[0] = INF
            return 0
        t += x
    total[0] = t
    return 1


cdef bint node_less(Node* x, Node* y, int n) noexcept nogil:
    cdef int r
    if x.total != y.total:
        return x.total < y.total
    for r in range(n):
        if x.cols[r] != y.cols[r]:
            return x.cols[r] < y.cols[r]
    return False


cdef void heap_push(vector[int]& heap, vector[Node]& nodes, int idx, int n) noexcept nogil:
    cdef int k, parent, tmp
    heap.push_back(idx)
    k = <int>heap.size() - 1
    while k > 0:
        parent = (k - 1) >> 1
        if node_less(&nodes[heap[k]], &nodes[heap[parent]], n):
            tmp = heap[k]
            heap[k] = heap[parent]
            heap[parent] = tmp
            k = parent
        else:
            break


cdef int heap_pop(vector[int]& heap, vector[Node]& nodes, int n) noexcept nogil:
    cdef int out = heap[0]
    cdef int last = heap.back()
    cdef int k = 0, size, l, r, m, tmp
    heap.pop_back()
    size = <int>heap.size()
    if size == 0:
        return out
    heap[0] = last
    while True:
        l = 2 * k + 1
        r = l + 1
        m = k
        if l < size and node_less(&nodes[heap[l]], &nodes[heap[m]], n):
            m = l
        if r < size and node_less(&nodes[heap[r]], &nodes[heap[m]], n):
            m = r
        if m == k:
            break
        tmp = heap[k]
        heap[k] = heap[m]
        heap[m] = tmp
        k = m
    return out


cdef int murty_c(const double* cost, int n, double max_log_ratio, long long cap,
                 vector[double]& totals, vector[int]& first_cols, vector[int]* all_cols,
                 long long* ops, bint root_only=False) noexcept nogil:
    """0 on success, 1 if infeasible, 2 if the cap is exceeded."""
    cdef double m = 0.0, x, big, tol, best, slack
    cdef int i, j, r, c, idx, nfree, i2
    cdef Scratch s
    cdef vector[Node] nodes
    cdef vector[int] heap
    cdef vector[double] w
    cdef vector[int] free_rows
    cdef Node root
    cdef Node child
    cdef Node* cur
    cdef int cur_idx
    totals.clear()
    first_cols.clear()
    if n == 0:
        totals.push_back(0.0)
        return 0
    for i in range(n * n):
        x = cost[i]
        if x < INF and fabs(x) > m:
            m = fabs(x)
    big = 4.0 * (n + 1) * (m + 1.0)
    tol = 1e-9 * (1.0 + m)
    scratch_init(&s, n)
    root.a.resize(n * n)
    for i in range(n * n):
        root.a[i] = cost[i] if cost[i] < INF else big
    root.u.assign(n + 1, 0.0)
    root.v.assign(n + 1, 0.0)
    root.p.assign(n + 1, 0)
    root.cols.assign(n, 0)
    root.forced.assign(n, 0)
    for i in range(1, n + 1):
        ops[0] += augment(root.a.data(), n, root.u.data(), root.v.data(), root.p.data(), &s, i)
    ops[0] += lexfix(root.a.data(), n, root.u.data(), root.v.data(), root.p.data(), big, tol, &s)
    if not solution(root.a.data(), n, root.p.data(), big, root.cols.data(), &root.total):
        return 1
    if root_only:
        totals.push_back(root.total)
        first_cols = root.cols
        if all_cols != NULL:
            for r in range(n):
                all_cols[0].push_back(root.cols[r])
        return 0
    best = root.total
    slack = max_log_ratio + 1e-12 * (1.0 + fabs(best))
    nodes.push_back(root)
    heap_push(heap, nodes, 0, n)
    while heap.size() > 0:
        cur_idx = heap_pop(heap, nodes, n)
        if totals.size() > 0 and nodes[cur_idx].total - best > slack:
            break
        if <long long>totals.size() >= cap:
            return 2
        totals.push_back(nodes[cur_idx].total)
        if first_cols.size() == 0:
            first_cols = nodes[cur_idx].cols
        if all_cols != NULL:
            for r in range(n):
                all_cols[0].push_back(nodes[cur_idx].cols[r])
        w = nodes[cur_idx].a
        free_rows.clear()
        for r in range(n):
            if not nodes[cur_idx].forced[r]:
                free_rows.push_back(r)
        nfree = <int>free_rows.size()
        for idx in range(nfree - 1):
            r = free_rows[idx]
            cur = &nodes[cur_idx]
            c = cur.cols[r]
            child.a = w
            child.a[r * n + c] = big
            child.u = cur.u
            child.v = cur.v
            child.p = cur.p
            child.cols.assign(n, 0)
            child.p[c + 1] = 0
            ops[0] += augment(child.a.data(), n, child.u.data(), child.v.data(), child.p.data(), &s, r + 1)
            if solution(child.a.data(), n, child.p.data(), big, child.cols.data(), &child.total):
                ops[0] += lexfix(child.a.data(), n, child.u.data(), child.v.data(), child.p.data(), big, tol, &s)
                solution(child.a.data(), n, child.p.data(), big, child.cols.data(), &child.total)
                child.forced = cur.forced
                for i in range(idx):
                    child.forced[free_rows[i]] = 1
                nodes.push_back(child)
                heap_push(heap, nodes, <int>nodes.size() - 1, n)
            for j in range(n):
                if j != c:
                    w[r * n + j] = big
            for i2 in range(n):
                if i2 != r:
                    w[i2 * n + c] = big
    return 0


cdef void _load_square(cost, int n, vector[double]& buf) except *:
    cdef int i, j
    cdef double x
    buf.resize(n * n)
    for i in range(n):
        row = cost[i]
        if len(row) != n:
            raise ValueError("cost matrix must be square")
        for j in range(n):
            x = row[j]
            if x != x or x == -INF:
                raise ValueError("cost entries must be finite or +inf")
            buf[i * n + j] = x


def hungarian(cost):
    """Minimum-cost assignment; ties resolve to the lexicographically smallest mapping."""
    sols, _ = murty(cost, 0.0, 1, _first_only=True)
    return sols[0][1], sols[0][0]


def murty(cost, double max_log_ratio=INFINITY, long long cap=10_000, bint _first_only=False):
    """Ranked assignments with ``cost - best <= max_log_ratio``; see ``_pykernels.murty``."""
    cdef int n = len(cost)
    cdef vector[double] buf
    cdef vector[double] totals
    cdef vector[int] first
    cdef vector[int] allc
    cdef long long ops = 0
    cdef int rc, k, r
    _load_square(cost, n, buf)
    with nogil:
        rc = murty_c(buf.data(), n, max_log_ratio, cap, totals, first, &allc, &ops, _first_only)
    if rc == 1:
        raise InfeasibleAssignment("no finite-cost assignment")
    if rc == 2:
        raise AssignmentCapExceeded(f"more than {cap} assignments within the ratio threshold")
    if n == 0:
        return [(0.0, ())], 0
    out = []
    for k in range(<int>totals.size()):
        out.append((totals[k], tuple([allc[k * n + r] for r in range(n)])))
    return out, ops


# ---------------------------------------------------------------------------
# false/missing pair search

cdef struct FEntry:
    double logf
    u64 mask
    int size


cdef struct FHeapItem:
    double s
    long long counter
    int k
    u64 flips


cdef struct QItem:
    double negq
    long long counter
    long long i
    int j


cdef inline bint fh_less(FHeapItem* x, FHeapItem* y) noexcept nogil:
    if x.s != y.s:
        return x.s < y.s
    return x.counter < y.counter


cdef inline bint q_less(QItem* x, QItem* y) noexcept nogil:
    if x.negq != y.negq:
        return x.negq < y.negq
    return x.counter < y.counter


cdef void fh_push(vector[FHeapItem]& h, FHeapItem item) noexcept nogil:
    cdef int k, parent
    cdef FHeapItem tmp
    h.push_back(item)
    k = <int>h.size() - 1
    while k > 0:
        parent = (k - 1) >> 1
        if fh_less(&h[k], &h[parent]):
            tmp = h[k]; h[k] = h[parent]; h[parent] = tmp
            k = parent
        else:
            break


cdef FHeapItem fh_pop(vector[FHeapItem]& h) noexcept nogil:
    cdef FHeapItem out = h[0]
    cdef FHeapItem tmp
    cdef int k = 0, size, l, r, m
    h[0] = h.back()
    h.pop_back()
    size = <int>h.size()
    while True:
        l = 2 * k + 1
        r = l + 1
        m = k
        if l < size and fh_less(&h[l], &h[m]):
            m = l
        if r < size and fh_less(&h[r], &h[m]):
            m = r
        if m == k:
            break
        tmp = h[k]; h[k] = h[m]; h[m] = tmp
        k = m
    return out


cdef void q_push(vector[QItem]& h, QItem item) noexcept nogil:
    cdef int k, parent
    cdef QItem tmp
    h.push_back(item)
    k = <int>h.size() - 1
    while k > 0:
        parent = (k - 1) >> 1
        if q_less(&h[k], &h[parent]):
            tmp = h[k]; h[k] = h[parent]; h[parent] = tmp
            k = parent
        else:
            break


cdef QItem q_pop(vector[QItem]& h) noexcept nogil:
    cdef QItem out = h[0]
    cdef QItem tmp
    cdef int k = 0, size, l, r, m
    h[0] = h.back()
    h.pop_back()
    size = <int>h.size()
    while True:
        l = 2 * k + 1
        r = l + 1
        m = k
        if l < size and q_less(&h[l], &h[m]):
            m = l
        if r < size and q_less(&h[r], &h[m]):
            m = r
        if m == k:
            break
        tmp = h[k]; h[k] = h[m]; h[m] = tmp
        k = m
    return out


cdef struct FalseSets:
    double top
    u64 top_mask
    vector[double] dw
    vector[int] di
    vector[FEntry] entries
    vector[FHeapItem] heap
    long long counter


cdef void fs_push(FalseSets* fs, double s, int k, u64 flips) noexcept nogil:
    cdef FHeapItem it
    it.s = s
    it.counter = fs.counter
    it.k = k
    it.flips = flips
    fs.counter += 1
    fh_push(fs.heap, it)


cdef bint fs_get(FalseSets* fs, long long i, FEntry* out) noexcept nogil:
    cdef FHeapItem it
    cdef FEntry e
    cdef u64 mask
    cdef double dk, dn
    cdef int on
    while <long long>fs.entries.size() <= i and fs.heap.size() > 0:
        it = fh_pop(fs.heap)
        mask = fs.top_mask ^ it.flips
        e.logf = fs.top - it.s
        e.mask = mask
        e.size = popcount64(mask)
        fs.entries.push_back(e)
        if it.k + 1 < <int>fs.dw.size():
            dk = fs.dw[it.k]
            dn = fs.dw[it.k + 1]
            on = fs.di[it.k + 1]
            fs_push(fs, it.s + dn, it.k + 1, it.flips | ((<u64>1) << on))
            fs_push(fs, (it.s - dk) + dn, it.k + 1,
                    (it.flips ^ ((<u64>1) << fs.di[it.k])) | ((<u64>1) << on))
    if i < <long long>fs.entries.size():
        out[0] = fs.entries[i]
        return 1
    return 0


cdef double log_factorial(int k) noexcept nogil:
    cdef double t = 0.0
    cdef int q
    for q in range(2, k + 1):
        t += log(<double>q)
    return t


def joint_loglik(double[:, ::1] L, double[::1] lq, double nu_tau, double xi_tau,
                 double t_assign, double t_fm, long long cap=10_000, bint absorb=False, trace=None,
                 double prio_shift=0.0):
    """Pruned ``log Pr(O | S)``; same contract as ``_pykernels.joint_loglik``."""
    cdef int n_s = L.shape[0]
    cdef int n_o = lq.shape[0]
    cdef double max_log_ratio, log_tfm, lnt, w, lam, lp, lc, lfm, q, base, c0, tot, lm, x, y
    cdef int o, m, g, k, r, c, rc, fsize, ng, nrows, ncols
    cdef FalseSets fs
    cdef FEntry fe, fe2
    cdef vector[double] gprio
    cdef vector[int] gm
    cdef vector[double] glfm
    cdef vector[QItem] heap
    cdef unordered_set[long long] seen
    cdef QItem it, nq
    cdef long long counter = 1, ops = 0, n_pairs = 0, n_terms = 0
    cdef double acc = -INF, best = -INF
    cdef u64 best_f = 0, best_m = 0, fmask, mmask, lim, cc, rr
    cdef vector[int] best_rows, best_cols, rows, cols
    cdef vector[double] sub, totals
    cdef vector[int] first
    cdef vector[double] tmpw
    cdef vector[int] tmpi
    cdef int a_, b_
    cdef double tw
    cdef int ti
    if L.shape[1] != n_o:
        raise ValueError("L must have one column per detection")
    if n_s > 62 or n_o > 62:
        raise SizeGuardError("at most 62 objects and 62 detections")
    max_log_ratio = -log(t_assign) if t_assign > 0 else INF
    log_tfm = log(t_fm) if t_fm > 0 else -INF

    # false sets: top subset and sorted flip costs
    fs.top = -nu_tau
    fs.top_mask = 0
    fs.counter = 0
    if nu_tau > 0:
        lnt = log(nu_tau)
        for o in range(n_o):
            if lq[o] > -INF:
                w = lnt + lq[o] + prio_shift
                if w > 0:
                    fs.top += w
                    fs.top_mask |= (<u64>1) << o
                tmpw.push_back(fabs(w))
                tmpi.push_back(o)
    # insertion sort by (|w|, index) to match Python tuple ordering
    for a_ in range(1, <int>tmpw.size()):
        tw = tmpw[a_]
        ti = tmpi[a_]
        b_ = a_ - 1
        while b_ >= 0 and (tmpw[b_] > tw or (tmpw[b_] == tw and tmpi[b_] > ti)):
            tmpw[b_ + 1] = tmpw[b_]
            tmpi[b_ + 1] = tmpi[b_]
            b_ -= 1
        tmpw[b_ + 1] = tw
        tmpi[b_ + 1] = ti
    fs.dw = tmpw
    fs.di = tmpi
    fe.logf = fs.top
    fe.mask = fs.top_mask
    fe.size = popcount64(fs.top_mask)
    fs.entries.push_back(fe)
    if fs.dw.size() > 0:
        fs_push(&fs, fs.dw[0], 0, (<u64>1) << fs.di[0])

    # miss-count groups
    lam = n_s * xi_tau
    for m in range(n_s + 1):
        if lam == 0:
            lp = 0.0 if m == 0 else -INF
        else:
            lp = m * log(lam) - lam - log_factorial(m)
        if lp == -INF:
            continue
        lc = log_factorial(n_s) - log_factorial(m) - log_factorial(n_s - m)
        lfm = lp - lc
        # insertion by (-prio, m)
        x = lp if absorb else lfm
        g = <int>gprio.size()
        gprio.push_back(x)
        gm.push_back(m)
        glfm.push_back(lfm)
        while g > 0 and (gprio[g - 1] < x or (gprio[g - 1] == x and gm[g - 1] > m)):
            gprio[g] = gprio[g - 1]
            gm[g] = gm[g - 1]
            glfm[g] = glfm[g - 1]
            g -= 1
        gprio[g] = x
        gm[g] = m
        glfm[g] = lfm
    ng = <int>gprio.size()
    if ng == 0:
        return acc, best, 0, 0, (), 0, 0

    it.negq = -(fs.entries[0].logf + gprio[0])
    it.counter = 0
    it.i = 0
    it.j = 0
    q_push(heap, it)
    seen.insert(0)
    while heap.size() > 0:
        it = q_pop(heap)
        fs_get(&fs, it.i, &fe)
        fmask = fe.mask
        fsize = fe.size
        m = gm[it.j]
        q = fe.logf + gprio[it.j]
        if n_o - fsize == n_s - m:
            cols.clear()
            for o in range(n_o):
                if not ((fmask >> o) & 1):
                    cols.push_back(o)
            ncols = <int>cols.size()
            base = fe.logf - fsize * prio_shift + glfm[it.j]
            # Gosper enumeration of miss sets of size m
            if m == 0:
                mmask = 0
            else:
                mmask = ((<u64>1) << m) - 1
            lim = (<u64>1) << n_s
            while True:
                rows.clear()
                for r in range(n_s):
                    if not ((mmask >> r) & 1):
                        rows.push_back(r)
                nrows = <int>rows.size()
                sub.resize(nrows * ncols)
                for r in range(nrows):
                    for c in range(ncols):
                        sub[r * ncols + c] = -L[rows[r], cols[c]]
                n_pairs += 1
                with nogil:
                    rc = murty_c(sub.data(), nrows, max_log_ratio, cap, totals, first, NULL, &ops)
                if rc == 2:
                    raise AssignmentCapExceeded(f"more than {cap} assignments within the ratio threshold")
                if rc == 0:
                    c0 = totals[0]
                    tot = 0.0
                    for k in range(<int>totals.size()):
                        tot += exp(c0 - totals[k])
                    lm = -c0 + log(tot)
                    x = base + lm
                    if acc == -INF:
                        acc = x
                    elif acc > x:
                        acc = acc + log1p(exp(x - acc))
                    else:
                        acc = x + log1p(exp(acc - x))
                    n_terms += <long long>totals.size()
                    if base - c0 > best:
                        best = base - c0
                        best_f = fmask
                        best_m = mmask
                        best_rows = rows
                        best_cols.clear()
                        for r in range(nrows):
                            best_cols.push_back(cols[first[r]])
                    if trace is not None:
                        trace.append((fmask, mmask, nrows, lm, <long long>totals.size()))
                if m == 0 or q < log_tfm:
                    break
                cc = mmask & (~mmask + 1)
                rr = mmask + cc
                mmask = (((rr ^ mmask) >> 2) // cc) | rr
                if mmask >= lim:
                    break
        if fs_get(&fs, it.i + 1, &fe2):
            if seen.count((it.i + 1) * 64 + it.j) == 0:
                seen.insert((it.i + 1) * 64 + it.j)
                nq.negq = -(fe2.logf + gprio[it.j])
                nq.counter = counter
                nq.i = it.i + 1
                nq.j = it.j
                counter += 1
                q_push(heap, nq)
        if it.j + 1 < ng and seen.count(it.i * 64 + it.j + 1) == 0:
            seen.insert(it.i * 64 + it.j + 1)
            nq.negq = -(fe.logf + gprio[it.j + 1])
            nq.counter = counter
            nq.i = it.i
            nq.j = it.j + 1
            counter += 1
            q_push(heap, nq)
        if q < log_tfm:
            break
    psi = tuple([(best_rows[r], best_cols[r]) for r in range(<int>best_cols.size())])
    return acc, best, best_f, best_m, psi, n_pairs, n_terms
