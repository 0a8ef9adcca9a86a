import math

from hypothesis import given, strategies as st

from streamdeg import intervals as iv


def ivs_strategy():
    pair = st.tuples(
        st.floats(-100, 100, allow_nan=False),
        st.floats(0.01, 50, allow_nan=False),
    ).map(lambda p: (p[0], p[0] + p[1]))
    return st.lists(pair, max_size=12)


def test_merge_basics():
    assert iv.merge([]) == []
    assert iv.merge([(1, 2), (1.5, 3)]) == [(1, 3)]
    assert iv.merge([(1, 2), (2, 3)]) == [(1, 3)]  # touching intervals fuse
    assert iv.merge([(5, 6), (1, 2)]) == [(1, 2), (5, 6)]
    assert iv.merge([(1, 1), (2, 1)]) == []


@given(ivs_strategy())
def test_merge_canonical(raw):
    merged = iv.merge(raw)
    for (s1, e1), (s2, e2) in zip(merged, merged[1:]):
        assert e1 < s2  # disjoint and not touching
    assert all(e > s for s, e in merged)
    # idempotent
    assert iv.merge(merged) == merged


@given(ivs_strategy(), st.floats(-120, 120, allow_nan=False))
def test_merge_preserves_cover(raw, t):
    covered = any(s <= t < e for s, e in raw if e > s)
    assert iv.covers(iv.merge(raw), t) == covered


def test_subtract_manual():
    base = [(0.0, 10.0)]
    assert iv.subtract(base, [(2.0, 3.0)]) == [(0.0, 2.0), (3.0, 10.0)]
    assert iv.subtract(base, [(0.0, 10.0)]) == []
    assert iv.subtract(base, [(-5.0, 0.0)]) == [(0.0, 10.0)]
    assert iv.subtract([(0, 1), (2, 3)], [(0.5, 2.5)]) == [(0.0, 0.5), (2.5, 3.0)]


@given(ivs_strategy(), ivs_strategy(), st.floats(-120, 120, allow_nan=False))
def test_subtract_pointwise(raw_a, raw_b, t):
    a = iv.merge(raw_a)
    b = iv.merge(raw_b)
    out = iv.subtract(a, b)
    expected = iv.covers(a, t) and not iv.covers(b, t)
    assert iv.covers(out, t) == expected


@given(ivs_strategy(), ivs_strategy())
def test_measure_inclusion_exclusion(raw_a, raw_b):
    a = iv.merge(raw_a)
    b = iv.merge(raw_b)
    lhs = iv.union_measure(a, b) + iv.intersection_measure(a, b)
    rhs = iv.measure(a) + iv.measure(b)
    assert math.isclose(lhs, rhs, rel_tol=0, abs_tol=1e-9)


@given(ivs_strategy(), ivs_strategy(), st.floats(-120, 120, allow_nan=False))
def test_intersect_pointwise(raw_a, raw_b, t):
    a = iv.merge(raw_a)
    b = iv.merge(raw_b)
    out = iv.intersect(a, b)
    assert iv.covers(out, t) == (iv.covers(a, t) and iv.covers(b, t))


def test_clip():
    assert iv.clip([(0, 10)], 2, 3) == [(2, 3)]
    assert iv.clip([(0, 1), (5, 9)], 0.5, 6) == [(0.5, 1), (5, 6)]
    assert iv.clip([(0, 1)], 2, 3) == []


def test_dilate():
    assert iv.dilate([(1, 2), (2.5, 3)], 0.25) == [(0.75, 3.25)]
    assert iv.dilate([], 1.0) == []
