"""Hot inner loops: edit distance scoring and grouped measure sums.

Each kernel has a numba ``@njit`` version and a pure numpy/Python version.
The numba path is used when numba imports and ``CANCERDW_NUMBA`` is not
``0``. ``set_backend`` switches at runtime (tests and benchmarks compare the
two).
"""

from __future__ import annotations

import os

import numpy as np

try:
    import numba

    HAVE_NUMBA = True
except ImportError:  # pragma: no cover - numba is a hard dep in practice
    numba = None
    HAVE_NUMBA = False


def _env_wants_numba() -> bool:
    return os.environ.get("CANCERDW_NUMBA", "1").strip().lower() not in ("0", "false", "no", "off")


# ---------------------------------------------------------------------------
# numpy / Python reference path
# ---------------------------------------------------------------------------


def _dl_distance_py(a, b, alphabet_size):
    """Unrestricted Damerau-Levenshtein distance (Lowrance-Wagner).

    ``a`` and ``b`` are int arrays of symbol ids in ``[0, alphabet_size)``.
    """
    n = len(a)
    m = len(b)
    if n == 0:
        return m
    if m == 0:
        return n
    maxdist = n + m
    da = [0] * alphabet_size
    d = np.zeros((n + 2, m + 2), dtype=np.int64)
    d[0, 0] = maxdist
    for i in range(n + 1):
        d[i + 1, 0] = maxdist
        d[i + 1, 1] = i
    for j in range(m + 1):
        d[0, j + 1] = maxdist
        d[1, j + 1] = j
    for i in range(1, n + 1):
        db = 0
        ai = a[i - 1]
        for j in range(1, m + 1):
            k = da[b[j - 1]]
            last = db
            if ai == b[j - 1]:
                cost = 0
                db = j
            else:
                cost = 1
            d[i + 1, j + 1] = min(
                d[i, j] + cost,
                d[i + 1, j] + 1,
                d[i, j + 1] + 1,
                d[k, last] + (i - k - 1) + 1 + (j - last - 1),
            )
        da[ai] = i
    return int(d[n + 1, m + 1])


def _dl_many_py(query, refs, offsets, alphabet_size):
    out = np.empty(len(offsets) - 1, dtype=np.int64)
    for r in range(len(offsets) - 1):
        out[r] = _dl_distance_py(query, refs[offsets[r]:offsets[r + 1]], alphabet_size)
    return out


def _group_sums_np(group_ids, values, n_groups):
    counts = np.bincount(group_ids, minlength=n_groups).astype(np.int64)
    sums = np.empty((n_groups, values.shape[1]), dtype=np.float64)
    for c in range(values.shape[1]):
        sums[:, c] = np.bincount(group_ids, weights=values[:, c], minlength=n_groups)
    return sums, counts


# ---------------------------------------------------------------------------
# numba path
# ---------------------------------------------------------------------------

if HAVE_NUMBA:

    @numba.njit(cache=True, nogil=True)
    def _dl_distance_nb(a, b, alphabet_size):
        n = a.shape[0]
        m = b.shape[0]
        if n == 0:
            return m
        if m == 0:
            return n
        maxdist = n + m
        da = np.zeros(alphabet_size, dtype=np.int64)
        d = np.empty((n + 2, m + 2), dtype=np.int64)
        d[0, 0] = maxdist
        for i in range(n + 1):
            d[i + 1, 0] = maxdist
            d[i + 1, 1] = i
        for j in range(m + 1):
            d[0, j + 1] = maxdist
            d[1, j + 1] = j
        for i in range(1, n + 1):
            db = 0
            ai = a[i - 1]
            for j in range(1, m + 1):
                bj = b[j - 1]
                k = da[bj]
                last = db
                if ai == bj:
                    cost = 0
                    db = j
                else:
                    cost = 1
                best = d[i, j] + cost
                ins = d[i + 1, j] + 1
                if ins < best:
                    best = ins
                dele = d[i, j + 1] + 1
                if dele < best:
                    best = dele
                trans = d[k, last] + (i - k - 1) + 1 + (j - last - 1)
                if trans < best:
                    best = trans
                d[i + 1, j + 1] = best
            da[ai] = i
        return d[n + 1, m + 1]

    @numba.njit(cache=True, nogil=True)
    def _dl_many_nb(query, refs, offsets, alphabet_size):
        nref = offsets.shape[0] - 1
        out = np.empty(nref, dtype=np.int64)
        for r in range(nref):
            out[r] = _dl_distance_nb(query, refs[offsets[r]:offsets[r + 1]], alphabet_size)
        return out

    @numba.njit(cache=True, nogil=True)
    def _group_sums_nb(group_ids, values, n_groups):
        k = values.shape[1]
        sums = np.zeros((n_groups, k), dtype=np.float64)
        counts = np.zeros(n_groups, dtype=np.int64)
        for i in range(group_ids.shape[0]):
            g = group_ids[i]
            counts[g] += 1
            for c in range(k):
                sums[g, c] += values[i, c]
        return sums, counts


_BACKENDS = {"numpy": (_dl_distance_py, _dl_many_py, _group_sums_np)}
if HAVE_NUMBA:
    _BACKENDS["numba"] = (_dl_distance_nb, _dl_many_nb, _group_sums_nb)

backend = ""
dl_distance = _dl_distance_py
dl_distances = _dl_many_py
group_sums = _group_sums_np


def set_backend(name: str) -> None:
    """Select ``"numba"`` or ``"numpy"`` kernels for subsequent calls."""
    global backend, dl_distance, dl_distances, group_sums
    if name not in _BACKENDS:
        raise ValueError(f"backend {name!r} unavailable; have {sorted(_BACKENDS)}")
    backend = name
    dl_distance, dl_distances, group_sums = _BACKENDS[name]


set_backend("numba" if HAVE_NUMBA and _env_wants_numba() else "numpy")


def encode_pair(a: str, b: str):
    """Map two strings onto dense symbol ids shared between them."""
    table: dict[str, int] = {}
    ea = np.array([table.setdefault(ch, len(table)) for ch in a], dtype=np.int64)
    eb = np.array([table.setdefault(ch, len(table)) for ch in b], dtype=np.int64)
    return ea, eb, max(len(table), 1)
