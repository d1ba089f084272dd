"""Numeric hot loops: span DP, sparse logistic SGD, and feature-index mixing.

Each kernel has a plain implementation and, when numba is importable, an
@njit-compiled twin.  The module-level names (``dp_decode``, ``sgd_rows``,
``score_rows``, ``window_indices``) are bound to the compiled versions unless
the environment variable ``SENTID_NO_NUMBA=1`` selects the fallback path.
Integer results (feature indices, backpointers) are identical on both paths;
float results can differ in the last ulps where the fallback uses numpy's
pairwise summation instead of a sequential loop.
"""

import os

import numpy as np

NEG_INF = -np.inf

# splitmix64 finalizer constants
_MIX_A = 0x9E3779B97F4A7C15
_MIX_B = 0xBF58476D1CE4E5B9
_MIX_C = 0x94D049BB133111EB
_U64 = 0xFFFFFFFFFFFFFFFF


def _numba_enabled() -> bool:
    return os.environ.get("SENTID_NO_NUMBA", "0").lower() not in ("1", "true", "yes")


# ---------------------------------------------------------------------------
# Span identification DP (forward recursion + backtracking).
#
# State per position boundary i: best log-probability of a partial labeling
# of tokens [0, i) that ends inside an open span (log_is) or outside
# (log_os).  Each token first passes a begin-flag update, then an end-flag
# update.  Skipped positions (candidate masks 0) leave the state untouched,
# which is exactly equivalent to pinning that flag's probability to 0.
# ---------------------------------------------------------------------------


def _dp_decode_impl(lb1, lb0, le1, le0, bos_ok, eos_ok):
    n = lb1.shape[0]
    log_is = np.empty(n + 1, np.float64)
    log_os = np.empty(n + 1, np.float64)
    log_is[0] = NEG_INF
    log_os[0] = 0.0
    # bp_bos[i]: open-state at i was reached by opening a span at i
    # bp_eos[i]: outside-state at i+1 was reached by closing a span at i
    bp_bos = np.zeros(n, np.uint8)
    bp_eos = np.zeros(n, np.uint8)
    cur_is = NEG_INF
    cur_os = 0.0
    for i in range(n):
        if bos_ok[i]:
            keep = cur_is + lb0[i]
            open_ = cur_os + lb1[i]
            if open_ > keep:
                is_p = open_
                bp_bos[i] = 1
            else:
                is_p = keep
            os_p = cur_os + lb0[i]
        else:
            is_p = cur_is
            os_p = cur_os
        if eos_ok[i]:
            cur_is = is_p + le0[i]
            close = is_p + le1[i]
            stay = os_p + le0[i]
            if close >= stay:
                cur_os = close
                bp_eos[i] = 1
            else:
                cur_os = stay
        else:
            cur_is = is_p
            cur_os = os_p
        log_is[i + 1] = cur_is
        log_os[i + 1] = cur_os

    bos_flags = np.zeros(n, np.uint8)
    eos_flags = np.zeros(n, np.uint8)
    inside = False  # state while walking backwards: True = open-span state
    for i in range(n - 1, -1, -1):
        if inside:
            after_bos = True  # open state at i+1 always descends from is'
        else:
            if eos_ok[i] and bp_eos[i]:
                eos_flags[i] = 1
                after_bos = True
            else:
                after_bos = False
        if after_bos:
            if bos_ok[i] and bp_bos[i]:
                bos_flags[i] = 1
                inside = False
            else:
                inside = True
        else:
            inside = False
    return log_os[n], bos_flags, eos_flags, log_is, log_os


# ---------------------------------------------------------------------------
# Sparse logistic regression over CSR-style rows.
# ---------------------------------------------------------------------------


def _sigmoid_scalar(z):
    if z >= 0.0:
        return 1.0 / (1.0 + np.exp(-z))
    e = np.exp(z)
    return e / (1.0 + e)


def _sgd_rows_impl(w, indices, indptr, targets, lr):
    # w[-1] is the bias slot; updates are applied row by row, in order.
    nrows = indptr.shape[0] - 1
    for r in range(nrows):
        z = w[-1]
        for k in range(indptr[r], indptr[r + 1]):
            z += w[indices[k]]
        p = _sigmoid_scalar(z)
        g = lr * (targets[r] - p)
        for k in range(indptr[r], indptr[r + 1]):
            w[indices[k]] += g
        w[-1] += g


def _score_rows_impl(w, indices, indptr):
    nrows = indptr.shape[0] - 1
    out = np.empty(nrows, np.float64)
    for r in range(nrows):
        z = w[-1]
        for k in range(indptr[r], indptr[r + 1]):
            z += w[indices[k]]
        out[r] = _sigmoid_scalar(z)
    return out


def _sgd_rows_numpy(w, indices, indptr, targets, lr):
    nrows = indptr.shape[0] - 1
    for r in range(nrows):
        idx = indices[indptr[r] : indptr[r + 1]]
        z = w[-1] + w[idx].sum()
        p = _sigmoid_scalar(z)
        g = lr * (targets[r] - p)
        np.add.at(w, idx, g)  # rows may repeat an index on hash collision
        w[-1] += g


def _score_rows_numpy(w, indices, indptr):
    if indices.shape[0] == 0:
        z = np.full(indptr.shape[0] - 1, w[-1])
    else:
        sums = np.add.reduceat(w[indices], indptr[:-1])
        sums[indptr[:-1] == indptr[1:]] = 0.0
        z = w[-1] + sums
    out = np.empty_like(z)
    pos = z >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-z[pos]))
    ez = np.exp(z[~pos])
    out[~pos] = ez / (1.0 + ez)
    return out


# ---------------------------------------------------------------------------
# Window feature mixing: combine per-token base hashes with the token's
# offset relative to the focus position, then fold into the weight table.
# ---------------------------------------------------------------------------


def _window_indices_impl(tok_hashes, tok_indptr, n, lo, hi, dim_mask, pad_hash):
    counts = np.empty(n, np.int64)
    for i in range(n):
        c = 0
        for t in range(i + lo, i + hi + 1):
            if t < 0 or t >= n:
                c += 1
            else:
                c += tok_indptr[t + 1] - tok_indptr[t]
        counts[i] = c
    indptr = np.zeros(n + 1, np.int64)
    for i in range(n):
        indptr[i + 1] = indptr[i] + counts[i]
    indices = np.empty(indptr[n], np.int64)
    pos = 0
    for i in range(n):
        for t in range(i + lo, i + hi + 1):
            rel = np.uint64(t - i - lo + 1)
            salt = rel * np.uint64(_MIX_A)
            if t < 0 or t >= n:
                x = pad_hash ^ salt
                x ^= x >> np.uint64(30)
                x *= np.uint64(_MIX_B)
                x ^= x >> np.uint64(27)
                x *= np.uint64(_MIX_C)
                x ^= x >> np.uint64(31)
                indices[pos] = np.int64(x & dim_mask)
                pos += 1
            else:
                for k in range(tok_indptr[t], tok_indptr[t + 1]):
                    x = tok_hashes[k] ^ salt
                    x ^= x >> np.uint64(30)
                    x *= np.uint64(_MIX_B)
                    x ^= x >> np.uint64(27)
                    x *= np.uint64(_MIX_C)
                    x ^= x >> np.uint64(31)
                    indices[pos] = np.int64(x & dim_mask)
                    pos += 1
    return indices, indptr


def _window_indices_numpy(tok_hashes, tok_indptr, n, lo, hi, dim_mask, pad_hash):
    parts = []
    indptr = np.zeros(n + 1, np.int64)
    for i in range(n):
        row = []
        for t in range(i + lo, i + hi + 1):
            salt = np.uint64(((t - i - lo + 1) * _MIX_A) & _U64)
            if t < 0 or t >= n:
                h = np.array([pad_hash], np.uint64)
            else:
                h = tok_hashes[tok_indptr[t] : tok_indptr[t + 1]]
            x = h ^ salt
            x = x ^ (x >> np.uint64(30))
            x = x * np.uint64(_MIX_B)
            x = x ^ (x >> np.uint64(27))
            x = x * np.uint64(_MIX_C)
            x = x ^ (x >> np.uint64(31))
            row.append(x & dim_mask)
        block = np.concatenate(row) if row else np.empty(0, np.uint64)
        indptr[i + 1] = indptr[i] + block.shape[0]
        parts.append(block.astype(np.int64))
    if parts:
        indices = np.concatenate(parts)
    else:
        indices = np.empty(0, np.int64)
    return indices, indptr


if _numba_enabled():
    try:
        import numba

        dp_decode = numba.njit(cache=True)(_dp_decode_impl)
        _sigmoid_scalar = numba.njit(cache=True, inline="always")(_sigmoid_scalar)
        sgd_rows = numba.njit(cache=True)(_sgd_rows_impl)
        score_rows = numba.njit(cache=True)(_score_rows_impl)
        window_indices = numba.njit(cache=True)(_window_indices_impl)
        USING_NUMBA = True
    except ImportError:
        dp_decode = _dp_decode_impl
        sgd_rows = _sgd_rows_numpy
        score_rows = _score_rows_numpy
        window_indices = _window_indices_numpy
        USING_NUMBA = False
else:
    dp_decode = _dp_decode_impl
    sgd_rows = _sgd_rows_numpy
    score_rows = _score_rows_numpy
    window_indices = _window_indices_numpy
    USING_NUMBA = False


def using_numba() -> bool:
    """True when the jitted kernel path is active."""
    return USING_NUMBA
