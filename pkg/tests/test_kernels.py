import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from cancerdw import _kernels
from cancerdw.evalharness.oracle import bfs_distance, dl_reference

short = st.text(alphabet="abc", max_size=5)
words = st.text(alphabet="abcdeXY z", max_size=12)


def distance(a, b, backend):
    fn = _kernels._dl_distance_nb if backend == "numba" else _kernels._dl_distance_py
    ea, eb, n = _kernels.encode_pair(a, b)
    return int(fn(ea, eb, n))


@pytest.fixture(params=["numba", "numpy"])
def backend(request):
    if request.param == "numba" and not _kernels.HAVE_NUMBA:
        pytest.skip("numba not installed")
    return request.param


@pytest.mark.parametrize("a,b,d", [
    ("", "", 0), ("abc", "", 3), ("", "ab", 2), ("kitten", "sitting", 3),
    ("ab", "ba", 1), ("CA", "ABC", 2), ("abcdef", "badcfe", 3), ("Leukemia", "Luekemia", 1),
])
def test_known_distances(a, b, d, backend):
    assert distance(a, b, backend) == d


@settings(max_examples=300, deadline=None)
@given(short, short)
def test_matches_exhaustive_search(a, b):
    # shortest edit script found by breadth-first search is the ground truth
    expected = bfs_distance(a, b)
    assert distance(a, b, "numpy") == expected
    if _kernels.HAVE_NUMBA:
        assert distance(a, b, "numba") == expected


@settings(max_examples=300, deadline=None)
@given(words, words)
def test_matches_recursive_reference(a, b):
    assert distance(a, b, "numpy") == dl_reference(a, b)


@settings(max_examples=200, deadline=None)
@given(words, words, words)
def test_metric_axioms(a, b, c):
    d = lambda x, y: distance(x, y, "numpy")
    assert d(a, b) == d(b, a)
    assert (d(a, b) == 0) == (a == b)
    assert d(a, c) <= d(a, b) + d(b, c)


def test_many_matches_single():
    refs = ["leukemia", "lung carcinoma", "", "melanoma"]
    q = "lukemia"
    alphabet = {c: i for i, c in enumerate(sorted(set(q + "".join(refs))))}
    enc = lambda s: np.array([alphabet[c] for c in s], dtype=np.int64)
    flat = np.concatenate([enc(r) for r in refs])
    offsets = np.cumsum([0] + [len(r) for r in refs]).astype(np.int64)
    for fn in filter(None, [_kernels._dl_many_py, getattr(_kernels, "_dl_many_nb", None)]):
        got = fn(enc(q), flat, offsets, len(alphabet))
        assert list(got) == [dl_reference(q, r) for r in refs]


@settings(max_examples=50, deadline=None)
@given(st.integers(1, 300), st.integers(1, 20), st.integers(0, 2**31 - 1))
def test_group_sums_backends_agree(n, groups, seed):
    rng = np.random.default_rng(seed)
    gid = rng.integers(0, groups, n).astype(np.int64)
    vals = rng.normal(size=(n, 3))
    s1, c1 = _kernels._group_sums_np(gid, vals, groups)
    for g in range(groups):
        assert np.allclose(s1[g], vals[gid == g].sum(axis=0))
        assert c1[g] == (gid == g).sum()
    if _kernels.HAVE_NUMBA:
        s2, c2 = _kernels._group_sums_nb(gid, vals, groups)
        assert np.allclose(s1, s2, rtol=1e-12, atol=1e-12)
        assert np.array_equal(c1, c2)


def test_set_backend_round_trip():
    before = _kernels.backend
    try:
        _kernels.set_backend("numpy")
        assert _kernels.backend == "numpy"
        assert _kernels.dl_distance is _kernels._dl_distance_py
        with pytest.raises(ValueError):
            _kernels.set_backend("fortran")
    finally:
        _kernels.set_backend(before)


def test_benchmark_script_runs():
    import subprocess
    import sys
    from pathlib import Path
    script = Path(__file__).parent.parent / "benchmarks" / "bench_kernels.py"
    res = subprocess.run([sys.executable, str(script), "--facts", "2000", "--reps", "1"],
                         capture_output=True, text=True, timeout=300)
    assert res.returncode == 0, res.stderr
    assert "group sums" in res.stdout
