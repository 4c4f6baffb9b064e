from fractions import Fraction

import pytest
from hypothesis import given, settings, strategies as st

from cantorflow.cantor import InvariantMeasure, make_system
from cantorflow.rokhlin import (DisjointnessError, apply_t, auto_nest, build_chain, induced_system,
                                return_partition, t_map, tower_decomposition)
from oracles import occurrence_gaps, odo_return_times, substitution_word

DYADIC = make_system("odometer base=2")
FIB = make_system("substitution a:ab,b:a")
FIB_WORD = substitution_word({"a": "ab", "b": "a"}, "a", 20000)


def dyadic_chain(n):
    return build_chain(DYADIC, [DYADIC.universe] + [DYADIC.cylinder("0" * k) for k in range(1, n + 1)])


def test_return_partition_examples():
    rp = return_partition(DYADIC, DYADIC.cylinder("0"), DYADIC.cylinder("0"))
    assert [(p, k) for p, k in rp.pieces] == [(DYADIC.cylinder("0"), 2)]
    rp = return_partition(DYADIC, DYADIC.cylinder("00"), DYADIC.cylinder("0"))
    assert rp.times == [2]
    rp = return_partition(DYADIC, DYADIC.cylinder("1"), DYADIC.cylinder("0"))
    assert rp.times == [1]


@settings(max_examples=30, deadline=None)
@given(st.sets(st.text("01", min_size=2, max_size=3), min_size=1, max_size=3),
       st.sets(st.text("01", min_size=1, max_size=3), min_size=1, max_size=3))
def test_dyadic_return_times_against_integers(dom, tgt):
    D = DYADIC.empty
    for w in dom:
        D = D | DYADIC.cylinder(w)
    T = DYADIC.empty
    for w in tgt:
        T = T | DYADIC.cylinder(w)
    rp = return_partition(DYADIC, D, T)
    depth = 6
    brute = odo_return_times(dom, tgt, 2, depth)
    for piece, k in rp.pieces:
        for w in piece.refine(0, max(depth, piece.hi)).words:
            assert brute[w[:depth]] == k


def test_induced_examples():
    ind = induced_system(DYADIC, DYADIC.cylinder("0"))
    assert ind.image(DYADIC.cylinder("00"), 1) == DYADIC.cylinder("01")
    full = induced_system(DYADIC, DYADIC.universe)
    assert full.partition.times == [1]
    ind = induced_system(FIB, FIB.cylinder("a"))
    assert ind.partition.times == [1, 2]
    assert set(ind.partition.times) == set(occurrence_gaps(FIB_WORD, "a"))


def test_fibonacci_return_times_against_long_word():
    for u, lo in (("aa", -1), ("aba", -1), ("abaab", -2)):
        rp = return_partition(FIB, FIB.cylinder(u, lo), FIB.cylinder(u, lo))
        assert set(rp.times) == set(occurrence_gaps(FIB_WORD, u))


def test_dyadic_tower_examples():
    ch = dyadic_chain(4)
    for n, td in enumerate(ch.towers):
        assert td.heights == [1]
        assert td.floor(1, 0) == DYADIC.cylinder("0" * (n + 1))
        assert td.floor(1, 1) == DYADIC.cylinder("0" * n + "1")
    ind = induced_system(DYADIC, DYADIC.universe)
    td = tower_decomposition(ind, DYADIC.cylinder("00"))
    assert td.heights == [3]
    assert td.floors[3] == [DYADIC.cylinder(w) for w in ("00", "10", "01", "11")]


def test_tower_partition_and_kac_odometers():
    mu = InvariantMeasure(DYADIC)
    for td in dyadic_chain(8).towers:
        assert td.check_partition()
        kac, target = td.kac_sum(mu)
        assert kac == target
    tri = make_system("odometer base=3")
    mu3 = InvariantMeasure(tri)
    ch = build_chain(tri, [tri.universe] + [tri.cylinder("0" * k) for k in range(1, 5)])
    for td in ch.towers:
        assert td.heights == [2]
        kac, target = td.kac_sum(mu3)
        assert kac == target == Fraction(1, 3 ** ch.slices.index(td.outer))


def test_tower_partition_and_kac_fibonacci():
    nu = InvariantMeasure(FIB)
    slices = auto_nest(FIB, FIB.fixed_point("a", "a"), 3)
    ch = build_chain(FIB, slices)
    for td in ch.towers:
        assert td.check_partition()
        kac, target = td.kac_sum(nu)
        assert abs(kac - target) <= 4 * nu.eps
    ind = induced_system(FIB, FIB.cylinder("a"))
    td = tower_decomposition(ind, FIB.cylinder("aa", -1) & FIB.cylinder("a"))
    kac, target = td.kac_sum(nu)
    assert abs(kac - target) <= 4 * nu.eps


@settings(max_examples=25, deadline=None)
@given(st.text("01", min_size=1, max_size=3), st.text("01", min_size=1, max_size=2))
def test_random_dyadic_nesting_partitions(w, extra):
    outer = DYADIC.cylinder(w)
    inner = DYADIC.cylinder(w + extra)
    ind = induced_system(DYADIC, outer)
    td = tower_decomposition(ind, inner)
    assert td.check_partition()
    kac, target = td.kac_sum(InvariantMeasure(DYADIC))
    assert kac == target


def test_disjointness_guard():
    ind = induced_system(DYADIC, DYADIC.cylinder("0"))
    with pytest.raises(DisjointnessError):
        tower_decomposition(ind, DYADIC.cylinder("0"))


def test_t_map_examples():
    ch = dyadic_chain(4)
    for n, td in enumerate(ch.towers):
        assert t_map(td) == [(DYADIC.cylinder("0" * (n + 1)), DYADIC.cylinder("0" * n + "1"))]
        images = DYADIC.empty
        for _, top in t_map(td):
            images = images | top
        assert images == td.top_preimage
    # composed: t_n o t_{n+1} sends [0^{n+2}] onto Phi_n^{-1}([0^{n+2}])
    for n in range(2):
        A = DYADIC.cylinder("0" * (n + 2))
        got = apply_t(ch.towers[n], apply_t(ch.towers[n + 1], A))
        assert got == ch.induced[n].image(A, -1)


def test_height_one_tower_t_is_identity():
    ch = build_chain(FIB, auto_nest(FIB, FIB.fixed_point("a", "a"), 2))
    for td in ch.towers:
        if 0 in td.heights:
            assert apply_t(td, td.base(0)) == td.base(0)


def test_auto_nest_is_nested():
    slices = auto_nest(FIB, FIB.fixed_point("a", "a"), 3)
    for a, b in zip(slices, slices[1:]):
        assert b.issubset(a) and b != a
