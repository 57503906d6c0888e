import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from rmtlab.errors import CapExceededError
from rmtlab.gap import Gap, annihilates, gap_dilate, gap_elements, gap_integer_relation, gap_membership


def test_symmetric_rank_one():
    q = Gap.symmetric([1], [2])
    assert gap_elements(q) == {-2, -1, 0, 1, 2}
    assert q.is_symmetric and q.is_proper and q.volume == 5


def test_membership():
    q = Gap.symmetric([1], [2])
    hit = gap_membership(q, 1.4, 0.5)
    assert hit.point == (1,) and hit.coefficients == (1,)
    assert gap_membership(q, 2.6, 0.5) is None
    assert gap_membership(q, 2.5, 0.5).coefficients == (2,)
    assert 2 in q and 0.5 not in q


def test_membership_tie_break_is_lexicographic():
    q = Gap.symmetric([1], [2])
    assert gap_membership(q, 0.5, 0.5).coefficients == (0,)
    q2 = Gap.symmetric([1, 1], [1, 1])  # improper: k1 + k2
    assert gap_membership(q2, 0.0, 0.1).coefficients == (-1, 1)


def test_improper_and_offset():
    q = Gap([1, 2], [0, 0], [2, 1])
    assert q.volume == 6 and q.size == 5 and not q.is_proper and not q.is_symmetric
    shifted = Gap([1], [0], [1], offset=5)
    assert gap_elements(shifted) == {5, 6}


def test_vector_gap():
    q = Gap.symmetric([(1, 0), (0, 1j)], [1, 1])
    assert q.dim == 2 and q.size == 9
    assert gap_membership(q, (0.9, 0.1j), 0.2).coefficients == (1, 0)


def test_dilation():
    q = Gap.symmetric([1.5], [1])
    assert gap_dilate(q, 3).upper == (3,)
    q2 = Gap.symmetric([1, np.sqrt(2)], [1, 2])
    assert q2.dilate(3).volume == 7 * 13
    for n in (1, 2, 3):
        assert gap_elements(q2) <= gap_elements(q2.dilate(n))
    with pytest.raises(ValueError):
        gap_dilate(Gap([1], [0], [2]), 2)


def test_volume_cap():
    q = Gap.symmetric([1, 2, 3], [100, 100, 100])
    with pytest.raises(CapExceededError):
        q.elements()


def test_relation_examples():
    assert gap_integer_relation([[2], [5]]) == (5, -2)
    alpha = gap_integer_relation([[1, 0], [0, 1], [2, 3]])
    assert alpha in {(2, 3, -1), (-2, -3, 1)}
    assert annihilates(gap_integer_relation([[1, 2], [2, 4], [3, 6]]), [[1, 2], [2, 4], [3, 6]])
    with pytest.raises(ValueError):
        gap_integer_relation([[0, 0], [0, 0], [0, 0]])


@settings(max_examples=100, deadline=None)
@given(st.integers(1, 4).flatmap(
    lambda r: st.lists(st.lists(st.integers(-50, 50), min_size=r, max_size=r), min_size=r + 1, max_size=r + 1)))
def test_relation_always_annihilates(coords):
    if all(c == 0 for q in coords for c in q):
        return
    alpha = gap_integer_relation(coords)
    assert any(alpha) and annihilates(alpha, coords)
