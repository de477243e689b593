"""Compiled k-cycle chain.

The chain state ``st`` is a namedtuple of flat arrays so that one step costs O(k):

* edges live in slots ``eu, ev, ew``; ``elist[:cnt[0]]`` lists live slots
  for uniform edge sampling, ``epos`` is each slot's index in ``elist``;
  ``free[:cnt[1]]`` is the stack of unused slots;
* ``onbr[u, :ocnt[u]]`` / ``inbr[v, :icnt[v]]`` hold slot ids of the out/in
  edges of each node, ``eopos`` / ``eipos`` give a slot's index there;
* ``hkey`` / ``hval`` form a linear-probing hash table from ``u * n + v``
  to the slot of edge ``uv``; ``fkey`` is a key-only table of forbidden pairs.

Numba refcounts every array of a tuple argument on each call into a function
that branches, so only the entry points take ``st``. They unpack it once and
hand the inner helpers just the arrays they touch.

Cycle coordinates follow the order ``u1v1, u1v2, u2v2, ..., ukvk, ukv1``:
position ``2i`` is ``(us[i], vs[i])`` and ``2i + 1`` is
``(us[i], vs[(i + 1) % k])``. The update direction adds +delta at even
(0-based) positions and -delta at odd ones.
"""
import numpy as np
from numba import njit

# step outcomes
NO_CYCLE = 0
REJECT = 1
LOW = 2
HIGH = 3
INTERIOR = 4

EMPTY = -1
_GOLDEN = np.uint64(11400714819323198485)


# hash tables


@njit(cache=True)
def _home(key, mask):
    h = np.uint64(key) * _GOLDEN
    return np.int64(h >> np.uint64(32)) & mask


@njit(cache=True)
def table_find(keys, key):
    """Index holding ``key``, or -1."""
    mask = keys.shape[0] - 1
    i = _home(key, mask)
    while True:
        k = keys[i]
        if k == key:
            return i
        if k == EMPTY:
            return -1
        i = (i + 1) & mask


@njit(cache=True)
def table_insert(keys, vals, key, val):
    mask = keys.shape[0] - 1
    i = _home(key, mask)
    while keys[i] != EMPTY and keys[i] != key:
        i = (i + 1) & mask
    keys[i] = key
    vals[i] = val


@njit(cache=True)
def table_delete(keys, vals, key):
    # backward-shift deletion keeps probe chains intact without tombstones
    mask = keys.shape[0] - 1
    i = table_find(keys, key)
    if i < 0:
        return
    j = i
    while True:
        j = (j + 1) & mask
        k = keys[j]
        if k == EMPTY:
            break
        h = _home(k, mask)
        if i <= j:
            stays = i < h <= j
        else:
            stays = h > i or h <= j
        if stays:
            continue
        keys[i] = k
        vals[i] = vals[j]
        i = j
    keys[i] = EMPTY


def table_size(count):
    """Power of two with load factor at most one half."""
    size = 2
    while size < 2 * count:
        size *= 2
    return size


@njit(cache=True)
def _slot(hkey, hval, n, u, v):
    i = table_find(hkey, u * n + v)
    if i < 0:
        return -1
    return hval[i]


@njit(cache=True)
def _weight(hkey, hval, ew, n, u, v):
    i = table_find(hkey, u * n + v)
    if i < 0:
        return 0.0
    return ew[hval[i]]


@njit(cache=True)
def _forbidden(fkey, n, u, v):
    return table_find(fkey, u * n + v) >= 0


# edge storage; ``E`` below is the argument tuple
# (n, eu, ev, ew, elist, epos, cnt, free, hkey, hval, onbr, ocnt, eopos, inbr, icnt, eipos)


@njit(cache=True)
def _add_edge(n, eu, ev, ew, elist, epos, cnt, free, hkey, hval,
              onbr, ocnt, eopos, inbr, icnt, eipos, u, v, w):
    if cnt[1] == 0:
        raise RuntimeError("edge capacity exhausted")
    e = free[cnt[1] - 1]
    cnt[1] -= 1
    eu[e] = u
    ev[e] = v
    ew[e] = w
    elist[cnt[0]] = e
    epos[e] = cnt[0]
    cnt[0] += 1
    c = ocnt[u]
    if c >= onbr.shape[1]:
        raise RuntimeError("out-degree capacity exhausted")
    onbr[u, c] = e
    eopos[e] = c
    ocnt[u] = c + 1
    c = icnt[v]
    if c >= inbr.shape[1]:
        raise RuntimeError("in-degree capacity exhausted")
    inbr[v, c] = e
    eipos[e] = c
    icnt[v] = c + 1
    table_insert(hkey, hval, u * n + v, e)


@njit(cache=True)
def _remove_edge(n, eu, ev, ew, elist, epos, cnt, free, hkey, hval,
                 onbr, ocnt, eopos, inbr, icnt, eipos, e):
    u = eu[e]
    v = ev[e]
    # swap-remove from the live list and both adjacency lists
    cnt[0] -= 1
    last = elist[cnt[0]]
    p = epos[e]
    elist[p] = last
    epos[last] = p
    c = ocnt[u] - 1
    last = onbr[u, c]
    p = eopos[e]
    onbr[u, p] = last
    eopos[last] = p
    ocnt[u] = c
    c = icnt[v] - 1
    last = inbr[v, c]
    p = eipos[e]
    inbr[v, p] = last
    eipos[last] = p
    icnt[v] = c
    table_delete(hkey, hval, u * n + v)
    ew[e] = 0.0
    free[cnt[1]] = e
    cnt[1] += 1


@njit(cache=True)
def _set_weight(n, eu, ev, ew, elist, epos, cnt, free, hkey, hval,
                onbr, ocnt, eopos, inbr, icnt, eipos, u, v, w):
    e = _slot(hkey, hval, n, u, v)
    if w > 0.0:
        if e < 0:
            _add_edge(n, eu, ev, ew, elist, epos, cnt, free, hkey, hval,
                      onbr, ocnt, eopos, inbr, icnt, eipos, u, v, w)
        else:
            ew[e] = w
    elif e >= 0:
        _remove_edge(n, eu, ev, ew, elist, epos, cnt, free, hkey, hval,
                     onbr, ocnt, eopos, inbr, icnt, eipos, e)


@njit(cache=True)
def add_edge(st, u, v, w):
    _add_edge(st.n, st.eu, st.ev, st.ew, st.elist, st.epos, st.cnt, st.free, st.hkey, st.hval,
              st.onbr, st.ocnt, st.eopos, st.inbr, st.icnt, st.eipos, u, v, w)


@njit(cache=True)
def set_weight(st, u, v, w):
    _set_weight(st.n, st.eu, st.ev, st.ew, st.elist, st.epos, st.cnt, st.free, st.hkey, st.hval,
                st.onbr, st.ocnt, st.eopos, st.inbr, st.icnt, st.eipos, u, v, w)


@njit(cache=True)
def get_weight(st, u, v):
    return _weight(st.hkey, st.hval, st.ew, st.n, u, v)


# cycle selection


@njit(cache=True)
def _uniform_index(g, size):
    i = int(g.random() * size)
    if i >= size:
        i = size - 1
    return i


@njit(cache=True)
def draw_k(g, kcum):
    r = g.random()
    for j in range(kcum.shape[0]):
        if r < kcum[j]:
            return j + 2
    return kcum.shape[0] + 1


@njit(cache=True)
def _walk(g, k, us, vs, n, eu, ev, elist, nedges, onbr, ocnt, eopos, inbr, icnt, eipos, hkey, hval):
    e = elist[_uniform_index(g, nedges)]
    us[0] = eu[e]
    vs[0] = ev[e]
    for l in range(1, k):
        u = us[l - 1]
        c = ocnt[u]
        if c <= 1:
            return False
        # uniform over out-edges of u other than u -> v_{l-1}
        e_prev = _slot(hkey, hval, n, u, vs[l - 1])
        i = _uniform_index(g, c - 1)
        if i >= eopos[e_prev]:
            i += 1
        v = ev[onbr[u, i]]
        vs[l] = v
        c = icnt[v]
        if c <= 1:
            return False
        e_prev = _slot(hkey, hval, n, u, v)
        i = _uniform_index(g, c - 1)
        if i >= eipos[e_prev]:
            i += 1
        us[l] = eu[inbr[v, i]]
    return True


@njit(cache=True)
def _distinct(k, us, vs):
    for a in range(k):
        for b in range(a + 1, k):
            if us[a] == us[b] or vs[a] == vs[b]:
                return False
    return True


@njit(cache=True)
def _select(g, k, us, vs, n, eu, ev, elist, cnt, onbr, ocnt, eopos, inbr, icnt, eipos, hkey, hval, fkey):
    nedges = cnt[0]
    if nedges == 0:
        return 0
    ok = _walk(g, k, us, vs, n, eu, ev, elist, nedges, onbr, ocnt, eopos, inbr, icnt, eipos, hkey, hval)
    if not ok or not _distinct(k, us, vs):
        return 0
    if _forbidden(fkey, n, us[k - 1], vs[0]):
        return 0
    return k


@njit(cache=True)
def select_cycle(st, g, k, us, vs):
    """Alternating walk over out- and in-neighbours; returns k, or 0 on failure."""
    return _select(
        g, k, us, vs, st.n, st.eu, st.ev, st.elist, st.cnt,
        st.onbr, st.ocnt, st.eopos, st.inbr, st.icnt, st.eipos, st.hkey, st.hval, st.fkey,
    )


# conditional update


@njit(cache=True)
def coord(k, us, vs, j):
    i = j // 2
    if j % 2 == 0:
        return us[i], vs[i]
    return us[i], vs[(i + 1) % k]


@njit(cache=True)
def _read(hkey, hval, ew, fkey, n, k, us, vs, x, slots):
    """Cycle-weights into ``x`` and edge slots into ``slots``; False if a coordinate is forbidden."""
    for j in range(2 * k):
        u, v = coord(k, us, vs, j)
        e = _slot(hkey, hval, n, u, v)
        slots[j] = e
        if e >= 0:
            x[j] = ew[e]
        else:
            # only an absent edge can sit on a forbidden pair
            if _forbidden(fkey, n, u, v):
                return False
            x[j] = 0.0
    return True


@njit(cache=True)
def read_weights(st, k, us, vs, x):
    slots = np.empty(2 * k, np.int64)
    return _read(st.hkey, st.hval, st.ew, st.fkey, st.n, k, us, vs, x, slots)


@njit(cache=True)
def bounds(x, k):
    lo = np.inf
    hi = np.inf
    for i in range(k):
        if x[2 * i] < lo:
            lo = x[2 * i]
        if x[2 * i + 1] < hi:
            hi = x[2 * i + 1]
    return -lo, hi


@njit(cache=True)
def shifted(x, k, delta, y):
    """y = x + a * delta, with boundary minima landing exactly on zero."""
    for i in range(k):
        y[2 * i] = x[2 * i] + delta
        y[2 * i + 1] = x[2 * i + 1] - delta
    nz = 0
    for j in range(2 * k):
        if y[j] <= 0.0:
            y[j] = 0.0
            nz += 1
    return nz


@njit(cache=True)
def _within_slack(m, ocnt, icnt, d0o, d0i, k, us, vs, x, y):
    """Degree condition for the graph whose cycle-weights change from x to y."""
    for i in range(k):
        j0 = 2 * i
        j1 = 2 * i + 1
        dr = int(y[j0] > 0) - int(x[j0] > 0) + int(y[j1] > 0) - int(x[j1] > 0)
        u = us[i]
        if abs(ocnt[u] + dr - d0o[u]) > m:
            return False
        jp = (2 * i - 1) % (2 * k)
        dc = int(y[j0] > 0) - int(x[j0] > 0) + int(y[jp] > 0) - int(x[jp] > 0)
        v = vs[i]
        if abs(icnt[v] + dc - d0i[v]) > m:
            return False
    return True


@njit(cache=True)
def _gamma_terms(ocnt, icnt, k, us, vs, x, terms):
    """(d_out - 1)(d_in - 1) per coordinate in the all-positive graph; returns its zero count."""
    zeros = 0
    for j in range(2 * k):
        if x[j] == 0.0:
            zeros += 1
    for j in range(2 * k):
        u, v = coord(k, us, vs, j)
        jr = j - (j % 2)  # row u owns positions jr, jr + 1
        dout = ocnt[u] + int(x[jr] == 0.0) + int(x[jr + 1] == 0.0)
        i = j // 2 if j % 2 == 0 else (j // 2 + 1) % k
        jc = (2 * i - 1) % (2 * k)  # column v owns positions 2i and 2i - 1
        din = icnt[v] + int(x[2 * i] == 0.0) + int(x[jc] == 0.0)
        terms[j] = (dout - 1.0) * (din - 1.0)
    return zeros


@njit(cache=True)
def _gammas(nedges, ocnt, icnt, k, us, vs, x, yl, yu, terms):
    """Selection-probability ratios of the two boundary graphs versus the interior graph.

    A boundary with two or more zero cycle-weights can never be selected by the
    alternating walk, so its ratio is zero. Returns (-1, -1) for a degenerate cycle.
    """
    mstar = nedges + _gamma_terms(ocnt, icnt, k, us, vs, x, terms)
    tot = 0.0
    for j in range(2 * k):
        tot += terms[j]
    if tot <= 0.0 or mstar <= 1:
        return -1.0, -1.0
    scale = mstar / (mstar - 1.0) / tot
    gl = 0.0
    gu = 0.0
    nl = 0
    nu = 0
    jl = -1
    ju = -1
    for j in range(2 * k):
        if yl[j] == 0.0:
            nl += 1
            jl = j
        if yu[j] == 0.0:
            nu += 1
            ju = j
    if nl == 1:
        gl = scale * terms[jl]
    if nu == 1:
        gu = scale * terms[ju]
    return gl, gu


@njit(cache=True)
def gammas(st, k, us, vs, x, yl, yu, terms):
    return _gammas(st.cnt[0], st.ocnt, st.icnt, k, us, vs, x, yl, yu, terms)


@njit(cache=True)
def _boundary_mass(ahat, bhat, k, us, vs, y):
    s = 0.0
    for j in range(2 * k):
        if y[j] == 0.0:
            u, v = coord(k, us, vs, j)
            s += ahat[u] + bhat[v]
    return np.exp(-s)


@njit(cache=True)
def _choose(g, k, us, vs, gl, gu, use_gamma, slots, x, yl, yu, ys, terms, out_delta,
            n, m, fkey, hkey, hval, ew, nedges, ocnt, icnt, d0o, d0i, ahat, bhat):
    """Draw new cycle-weights into ``ys``; returns the outcome code."""
    if not _read(hkey, hval, ew, fkey, n, k, us, vs, x, slots):
        return REJECT
    dl, du = bounds(x, k)
    if dl == 0.0 and du == 0.0:
        return REJECT
    nl = shifted(x, k, dl, yl)
    nu = shifted(x, k, du, yu)
    if use_gamma == 2:
        gl, gu = _gammas(nedges, ocnt, icnt, k, us, vs, x, yl, yu, terms)
        if gl < 0.0:
            return REJECT
    elif use_gamma == 0:
        gl = 1.0
        gu = 1.0
    pl = 0.0
    pu = 0.0
    pint = 0.0
    if nl >= nu and _within_slack(m, ocnt, icnt, d0o, d0i, k, us, vs, x, yl):
        pl = gl * _boundary_mass(ahat, bhat, k, us, vs, yl)
    if nu >= nl and _within_slack(m, ocnt, icnt, d0o, d0i, k, us, vs, x, yu):
        pu = gu * _boundary_mass(ahat, bhat, k, us, vs, yu)
    if nl == 1 and nu == 1:
        shifted(x, k, 0.5 * (dl + du), ys)
        if _within_slack(m, ocnt, icnt, d0o, d0i, k, us, vs, x, ys):
            pint = du - dl
    ptot = pl + pu + pint
    if ptot == 0.0:
        return REJECT
    r = g.random() * ptot
    if r < pl:
        ys[: 2 * k] = yl[: 2 * k]
        out_delta[0] = dl
        return LOW
    if r < pl + pu:
        ys[: 2 * k] = yu[: 2 * k]
        out_delta[0] = du
        return HIGH
    delta = dl
    while delta <= dl or delta >= du:
        delta = dl + g.random() * (du - dl)
    shifted(x, k, delta, ys)
    out_delta[0] = delta
    return INTERIOR


@njit(cache=True)
def _update(g, k, us, vs, gl, gu, use_gamma, slots, x, yl, yu, ys, terms, out_delta,
            n, m, eu, ev, ew, elist, epos, cnt, free, hkey, hval, onbr, ocnt, eopos,
            inbr, icnt, eipos, fkey, d0o, d0i, ahat, bhat):
    res = _choose(
        g, k, us, vs, gl, gu, use_gamma, slots, x, yl, yu, ys, terms, out_delta,
        n, m, fkey, hkey, hval, ew, cnt[0], ocnt, icnt, d0o, d0i, ahat, bhat,
    )
    if res == REJECT:
        return res
    for j in range(2 * k):
        if ys[j] == x[j]:
            continue
        e = slots[j]
        if e >= 0 and ys[j] > 0.0:
            ew[e] = ys[j]
        elif e >= 0:
            _remove_edge(n, eu, ev, ew, elist, epos, cnt, free, hkey, hval,
                         onbr, ocnt, eopos, inbr, icnt, eipos, e)
        else:
            u, v = coord(k, us, vs, j)
            _add_edge(n, eu, ev, ew, elist, epos, cnt, free, hkey, hval,
                      onbr, ocnt, eopos, inbr, icnt, eipos, u, v, ys[j])
    return res


@njit(cache=True)
def update(st, g, k, us, vs, gl, gu, use_gamma, x, yl, yu, ys, terms, out_delta):
    """Resample the cycle-weights from their full conditional.

    ``use_gamma`` 0 uses unit selection ratios, 1 uses ``gl``/``gu`` as given,
    2 computes them from the current state.
    """
    slots = np.empty(2 * k, np.int64)
    return _update(
        g, k, us, vs, gl, gu, use_gamma, slots, x, yl, yu, ys, terms, out_delta,
        st.n, st.m, st.eu, st.ev, st.ew, st.elist, st.epos, st.cnt, st.free, st.hkey, st.hval,
        st.onbr, st.ocnt, st.eopos, st.inbr, st.icnt, st.eipos, st.fkey,
        st.d0o, st.d0i, st.ahat, st.bhat,
    )


# drivers


@njit(cache=True)
def buffers(kmax):
    return (
        np.empty(kmax, np.int64),
        np.empty(kmax, np.int64),
        np.empty(2 * kmax, np.int64),
        np.empty(2 * kmax),
        np.empty(2 * kmax),
        np.empty(2 * kmax),
        np.empty(2 * kmax),
        np.empty(2 * kmax),
        np.empty(1),
    )


@njit(cache=True)
def _step(g, kcum, use_gamma, us, vs, slots, x, yl, yu, ys, terms, dout,
          n, m, eu, ev, ew, elist, epos, cnt, free, hkey, hval, onbr, ocnt, eopos,
          inbr, icnt, eipos, fkey, d0o, d0i, ahat, bhat):
    k = _select(g, draw_k(g, kcum), us, vs, n, eu, ev, elist, cnt,
                onbr, ocnt, eopos, inbr, icnt, eipos, hkey, hval, fkey)
    if k == 0:
        return NO_CYCLE
    return _update(g, k, us, vs, 1.0, 1.0, use_gamma, slots, x, yl, yu, ys, terms, dout,
                   n, m, eu, ev, ew, elist, epos, cnt, free, hkey, hval, onbr, ocnt, eopos,
                   inbr, icnt, eipos, fkey, d0o, d0i, ahat, bhat)


@njit(cache=True)
def _run(st, g, nsteps, kcum, use_gamma, u, v, counts, out):
    # the state is unpacked here once; see the module docstring
    us, vs, slots, x, yl, yu, ys, terms, dout = buffers(kcum.shape[0] + 1)
    n, m, eu, ev, ew, elist, epos, cnt, free = st.n, st.m, st.eu, st.ev, st.ew, st.elist, st.epos, st.cnt, st.free
    hkey, hval, onbr, ocnt, eopos = st.hkey, st.hval, st.onbr, st.ocnt, st.eopos
    inbr, icnt, eipos, fkey = st.inbr, st.icnt, st.eipos, st.fkey
    d0o, d0i, ahat, bhat = st.d0o, st.d0i, st.ahat, st.bhat
    record = u >= 0
    for t in range(nsteps):
        res = _step(g, kcum, use_gamma, us, vs, slots, x, yl, yu, ys, terms, dout,
                    n, m, eu, ev, ew, elist, epos, cnt, free, hkey, hval, onbr, ocnt, eopos,
                    inbr, icnt, eipos, fkey, d0o, d0i, ahat, bhat)
        counts[res] += 1
        if record:
            out[t] = _weight(hkey, hval, ew, n, u, v)


@njit(cache=True)
def step(st, g, kcum, use_gamma, buf):
    us, vs, _, x, yl, yu, ys, terms, dout = buf
    k = select_cycle(st, g, draw_k(g, kcum), us, vs)
    if k == 0:
        return NO_CYCLE
    return update(st, g, k, us, vs, 1.0, 1.0, use_gamma, x, yl, yu, ys, terms, dout)


@njit(cache=True)
def run_steps(st, g, nsteps, kcum, counts, use_gamma):
    _run(st, g, nsteps, kcum, use_gamma, -1, -1, counts, np.empty(0))


@njit(cache=True)
def trace_weight(st, g, nsteps, kcum, u, v, use_gamma, out):
    """Run the chain, recording ``w_uv`` after every step."""
    counts = np.zeros(5, np.int64)
    _run(st, g, nsteps, kcum, use_gamma, u, v, counts, out)
    return counts


@njit(cache=True)
def repeat_update(st, g, k, us, vs, gl, gu, nrep, outcomes, deltas):
    """Apply the same cycle update ``nrep`` times (a test harness for the conditional law)."""
    _, _, _, x, yl, yu, ys, terms, dout = buffers(k)
    for t in range(nrep):
        dout[0] = 0.0
        outcomes[t] = update(st, g, k, us, vs, gl, gu, 1, x, yl, yu, ys, terms, dout)
        deltas[t] = dout[0]


# diagnostics


@njit(cache=True)
def strengths(st, out_str, in_str):
    out_str[:] = 0.0
    in_str[:] = 0.0
    for i in range(st.cnt[0]):
        e = st.elist[i]
        out_str[st.eu[e]] += st.ew[e]
        in_str[st.ev[e]] += st.ew[e]


@njit(cache=True)
def fill_dense(st, W):
    W[:, :] = 0.0
    for i in range(st.cnt[0]):
        e = st.elist[i]
        W[st.eu[e], st.ev[e]] = st.ew[e]


@njit(cache=True)
def max_slack(st):
    worst = 0
    for u in range(st.n):
        a = abs(st.ocnt[u] - st.d0o[u])
        b = abs(st.icnt[u] - st.d0i[u])
        if a > worst:
            worst = a
        if b > worst:
            worst = b
    return worst


@njit(cache=True)
def count_forbidden(st):
    bad = 0
    for i in range(st.cnt[0]):
        e = st.elist[i]
        if _forbidden(st.fkey, st.n, st.eu[e], st.ev[e]):
            bad += 1
    return bad
