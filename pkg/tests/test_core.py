import math

import pytest
from hypothesis import given, strategies as st

from helpers import catalan_by_recursion
from wetting import core


class TestBracket:
    @pytest.mark.parametrize("s,expected", [(0, 0), (4, 4), (4.1, 6),
                                            (0.2, 2), (2.0, 2), (5, 6)])
    def test_examples(self, s, expected):
        assert core.bracket(s) == expected

    def test_negative_rejected(self):
        with pytest.raises(ValueError):
            core.bracket(-0.5)

    @given(st.floats(min_value=0.0, max_value=1e6, allow_nan=False))
    def test_smallest_even_above(self, s):
        b = core.bracket(s)
        assert b % 2 == 0 and b >= s
        assert b - 2 < s


class TestModelParams:
    def test_boundary_cached(self):
        p = core.ModelParams(10, 0.25, 3.0)
        assert p.boundary == core.bracket(2.5) == 4

    @pytest.mark.parametrize("n,a,lam", [
        (9, 0.2, 1.0),      # odd length
        (0, 0.2, 1.0),      # too short
        (10, 0.0, 1.0),     # a at the boundary
        (10, 0.5, 1.0),
        (10, 0.2, 0.0),     # lambda not positive
        (2, 0.3, 1.0),      # boundary reaches n
    ])
    def test_invalid(self, n, a, lam):
        with pytest.raises(ValueError):
            core.ModelParams(n, a, lam)


class TestContacts:
    def test_examples(self):
        assert core.contacts((0, 1, 2, 1, 0)) == 2
        assert core.contacts((0, 1, 0, 1, 0)) == 3
        assert core.contacts((2, 3, 2, 1, 2)) == 0


class TestFlip:
    def test_local_max_to_min(self):
        assert core.flip((0, 1, 2, 1, 0), 2) == (0, 1, 0, 1, 0)
        assert core.flip((0, 1, 0, 1, 0), 2) == (0, 1, 2, 1, 0)

    def test_negative_height_rejected(self):
        with pytest.raises(ValueError):
            core.flip((2, 1, 0, 1, 0, 1, 2), 3)  # pattern (0, 1, 0) at x=3

    def test_out_of_range_rejected(self):
        for x in (0, 4, -1):
            with pytest.raises(ValueError):
                core.flip((0, 1, 2, 1, 0), x)

    def test_involution_on_enumerated_paths(self):
        params = core.ModelParams(8, 0.3, 2.0)
        for eta in core.enumerate_paths(params, "elevated"):
            for x in range(1, 8):
                try:
                    flipped = core.flip(eta, x)
                except ValueError:
                    continue
                assert core.flip(flipped, x) == eta


class TestPhaseLabel:
    def test_pinned_iff_touching(self):
        assert core.phase_label((2, 1, 0, 1, 2)) is core.PhaseLabel.PINNED
        assert core.phase_label((2, 1, 2, 1, 2)) is core.PhaseLabel.FREE


class TestEnumeration:
    def test_smallest_zero_ensemble(self):
        assert core.enumerate_bridges(2) == [(0, 1, 0)]

    def test_zero_ensemble_n4(self):
        params = core.ModelParams(4, 0.3, 1.0)
        assert sorted(core.enumerate_paths(params, "zero")) == [
            (0, 1, 0, 1, 0), (0, 1, 2, 1, 0)]

    def test_unique_pinned_path(self):
        params = core.ModelParams(4, 0.3, 1.0)
        assert core.enumerate_paths(params, "elevated-pinned") == \
            [(2, 1, 0, 1, 2)]

    def test_cap_enforced(self):
        with pytest.raises(ValueError):
            core.enumerate_bridges(26)

    @pytest.mark.parametrize("n", range(2, 21, 2))
    def test_zero_counts_are_catalan(self, n):
        cats = catalan_by_recursion(n // 2)
        assert len(core.enumerate_bridges(n)) == cats[n // 2]

    @pytest.mark.parametrize("n", [4, 6, 8, 10])
    def test_partition_into_free_and_pinned(self, n):
        params = core.ModelParams(n, 0.3, 1.0)
        full = set(core.enumerate_paths(params, "elevated"))
        free = set(core.enumerate_paths(params, "elevated-free"))
        pinned = set(core.enumerate_paths(params, "elevated-pinned"))
        assert free | pinned == full
        assert not free & pinned

    def test_every_enumerated_path_is_valid(self):
        params = core.ModelParams(8, 0.2, 1.0)
        for ensemble, boundary in (("zero", 0), ("elevated", 2)):
            for eta in core.enumerate_paths(params, ensemble):
                core.validate_path(eta, boundary=boundary)

    def test_duplicate_free(self):
        params = core.ModelParams(12, 0.25, 1.0)
        paths = core.enumerate_paths(params, "elevated")
        assert len(paths) == len(set(paths))


@given(st.integers(min_value=1, max_value=10).flatmap(
    lambda half: st.lists(st.integers(0, 1), min_size=2 * half,
                          max_size=2 * half)))
def test_flip_involution_on_random_walks(bits):
    n = len(bits)
    if sum(bits) != n // 2:
        return
    heights = [0]
    for b in bits:
        heights.append(heights[-1] + (1 if b else -1))
    if min(heights) < 0:
        return
    eta = tuple(heights)
    for x in range(1, n):
        try:
            flipped = core.flip(eta, x)
        except ValueError:
            continue
        assert core.flip(flipped, x) == eta
