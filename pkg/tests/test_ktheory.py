import random
from fractions import Fraction

import pytest

from cantorflow.functions import SupportError
from cantorflow.ktheory import (IntFunction, beta, beta_of_extension, connecting_iota,
                                connecting_iota_multi, crossed_product_k0, delta,
                                delta_stabilization, eta, gamma_tilde, odometer_limit_value,
                                order_iso_check, pushforward, verify_exact_rows)
from cantorflow.rokhlin import apply_t
from chains import (DYADIC, FIB, Targets, fibonacci_chain, odometer_chain, random_function,
                    random_subset)

CHAINS = {
    "dyadic": lambda: odometer_chain(2, 5),
    "fibonacci": lambda: fibonacci_chain(3),
}


def chi(S):
    return IntFunction.constant(S, 1)


# pushforward and the connecting map


def test_pushforward_examples():
    ch = odometer_chain(2, 1)
    ind = ch.induced[0]
    f = chi(DYADIC.cylinder("01")).extend_by_zero(DYADIC.universe)
    assert pushforward(ind, f) == chi(DYADIC.cylinder("11")).extend_by_zero(DYADIC.universe)
    c = IntFunction.constant(DYADIC.universe, 4)
    assert pushforward(ind, c) == c
    rng = random.Random(3)
    for name, make in CHAINS.items():
        ch = make()
        for n, ind in enumerate(ch.induced):
            f = random_function(ch.slices[n], 2, rng)
            assert pushforward(ind, pushforward(ind, f), inverse=True) == f


def test_iota_examples():
    ch = odometer_chain(2, 1)
    td = ch.towers[0]
    assert connecting_iota(td, IntFunction.constant(DYADIC.universe, 1)) == IntFunction.constant(DYADIC.cylinder("0"), 2)
    assert connecting_iota(td, IntFunction.zero(DYADIC.universe)) == IntFunction.zero(DYADIC.cylinder("0"))
    f = chi(DYADIC.cylinder("01")).extend_by_zero(DYADIC.universe)
    assert connecting_iota(td, f) == chi(DYADIC.cylinder("01")).extend_by_zero(DYADIC.cylinder("0"))


def test_iota_is_times_base_on_constants():
    for base, mult in ((2, 2), (3, 3)):
        ch = odometer_chain(base, 4)
        for n, td in enumerate(ch.towers):
            got = connecting_iota(td, IntFunction.constant(ch.slices[n], 5))
            assert got.constant_value() == 5 * mult


def test_iota_rejects_wrong_domain():
    td = odometer_chain(2, 1).towers[0]
    with pytest.raises(SupportError):
        connecting_iota(td, chi(DYADIC.cylinder("0")))


def test_iota_functoriality():
    rng = random.Random(5)
    for make in CHAINS.values():
        ch = make()
        N = len(ch.towers)
        for _ in range(10):
            n = rng.randrange(N)
            m = rng.randrange(n, N + 1)
            f = random_function(ch.slices[n], 2, rng)
            g = f
            for i in range(n, m):
                g = connecting_iota(ch.towers[i], g)
            assert connecting_iota_multi(ch, n, m, f) == g


# eta, beta, gamma, delta


def test_eta_examples():
    td = odometer_chain(2, 2).towers[0]
    assert eta(td, 0) == IntFunction.zero(td.top_preimage)
    assert eta(td, 1) == chi(td.top_preimage)
    assert eta(td, -3).constant_value() == -3


def test_beta_examples():
    ch = odometer_chain(2, 3)
    td = ch.towers[0]
    for m in (0, 1, -4):
        assert beta(td, eta(td, m)) == IntFunction.zero(ch.slices[1])
    f = chi(DYADIC.cylinder("110")).extend_by_zero(td.top_preimage)  # a proper piece of [1]
    b = beta(td, f)
    assert b.constant_value() is None
    g = f.extend_by_zero(DYADIC.universe)
    assert b == connecting_iota(td, g) - connecting_iota(td, pushforward(td.ind, g))


def test_beta_is_independent_of_the_extension():
    rng = random.Random(11)
    for make in CHAINS.values():
        ch = make()
        for td in ch.towers:
            E = td.top_preimage
            rest = td.outer - E
            for _ in range(50 // len(ch.towers) + 1):
                f = random_function(E, 2, rng)
                g1 = f.extend_by_zero(td.outer)
                h = random_function(rest, 2, rng) if not rest.is_empty() else None
                g2 = g1 + h.extend_by_zero(td.outer) if h is not None else g1
                assert beta_of_extension(td, g1) == beta_of_extension(td, g2)


def test_gamma_examples():
    # [S_n] -> 2^-n in Z[1/2]
    ch = odometer_chain(2, 4)
    stage = crossed_product_k0(DYADIC, 6)
    for n, S in enumerate(ch.slices):
        assert odometer_limit_value(stage, stage.vector(chi(S).extend_by_zero(DYADIC.universe))) == Fraction(1, 2 ** n)
    assert gamma_tilde(stage, IntFunction.zero(DYADIC.universe)).is_zero()
    # im(beta) lies in ker(gamma)
    rng = random.Random(2)
    td = ch.towers[1]
    for _ in range(10):
        b = beta(td, random_function(td.top_preimage, 2, rng))
        assert gamma_tilde(stage, b.extend_by_zero(DYADIC.universe)).is_zero()


def test_dyadic_k0_examples():
    for d in range(2, 7):
        st = crossed_product_k0(DYADIC, d)
        assert st.cokernel() == (1, [])
        assert st.invariant_factors() == [1] * (2 ** d - 1) + [0]
        finer = crossed_product_k0(DYADIC, d + 1)
        assert st.refinement_descends(finer)
        # [atom_d] = 2 [atom_{d+1}]
        atom = st.atom_class(0)
        cols = st.refinement_matrix(finer)
        assert finer.cls(cols[0]) == 2 * finer.atom_class(0)
        assert odometer_limit_value(st, atom.vec) == Fraction(1, 2 ** d)


def test_fibonacci_k0_rank_two():
    st = crossed_product_k0(FIB, 4)
    assert st.cokernel() == (2, [])


def test_delta_examples():
    ch = odometer_chain(2, 3)
    td0, td1 = ch.towers[0], ch.towers[1]
    assert td1.top_preimage == DYADIC.cylinder("01")
    E0 = td0.top_preimage
    assert E0 == DYADIC.cylinder("1")
    assert delta(td0, td1, chi(DYADIC.cylinder("11")).extend_by_zero(E0)) == chi(DYADIC.cylinder("01"))
    assert delta(td0, td1, chi(DYADIC.cylinder("10")).extend_by_zero(E0)) == IntFunction.zero(DYADIC.cylinder("01"))
    for m in (0, 2, -7):
        assert delta(td0, td1, eta(td0, m)) == eta(td1, m)


def test_delta_stabilization_of_constants():
    ch = odometer_chain(2, 4)
    assert delta_stabilization(ch, 0, eta(ch.towers[0], 3)) == 0


@pytest.mark.parametrize("name", sorted(CHAINS))
def test_middle_and_right_squares(name):
    """beta(delta f) = iota(beta f) and gamma(iota h) = gamma(h), 50 functions per stage."""
    ch = CHAINS[name]()
    targets = Targets(ch)
    rng = random.Random(17)
    for n in range(len(ch.towers) - 1):
        td, tn = ch.towers[n], ch.towers[n + 1]
        for _ in range(50):
            f = random_function(td.top_preimage, 2, rng)
            assert beta(tn, delta(td, tn, f)) == connecting_iota(tn, beta(td, f))
            h = random_function(ch.slices[n + 1], 2, rng)
            assert targets.same_class(connecting_iota(tn, h), h)


# the two structural identities


@pytest.mark.parametrize("name", sorted(CHAINS))
def test_iota_ignores_pushforward_off_the_top(name):
    """f vanishing on Phi_n^{-1}(S_{n+1}) has iota(f) = iota(Phi_* f); 50 instances."""
    ch = CHAINS[name]()
    rng = random.Random(23)
    for i in range(50):
        n = i % len(ch.towers)
        td = ch.towers[n]
        rest = td.outer - td.top_preimage
        f = random_function(rest, 2, rng).extend_by_zero(td.outer)
        assert connecting_iota(td, f) == connecting_iota(td, pushforward(td.ind, f))


@pytest.mark.parametrize("name", sorted(CHAINS))
def test_composed_t_maps(name):
    """t_n o ... o t_{n+k}(A) = Phi_n^{-1}(Phi_{n+k+1}(A)) on subsets of S_{n+k+1}; 50 instances."""
    ch = CHAINS[name]()
    N = len(ch.towers)
    rng = random.Random(29)
    pairs = [(n, k) for n in range(N) for k in range(N - n)]
    for i in range(50):
        n, k = pairs[i % len(pairs)]
        if i < len(pairs) and n + k + 1 < N:
            A = ch.towers[n + k + 1].top_preimage  # the literal statement
        else:
            A = random_subset(ch.slices[n + k + 1], 2, rng)
        img = A
        for m in range(n + k, n - 1, -1):
            img = apply_t(ch.towers[m], img)
        expect = ch.induced[n].image(ch.induced[n + k + 1].image(A, 1), -1)
        assert img == expect


# stage-wise suites


def test_exact_rows_dyadic_and_fibonacci():
    dy = odometer_chain(2, 5)
    for r in verify_exact_rows(DYADIC, dy.slices):
        assert r.ok, r.to_json()
    fib = fibonacci_chain(3)
    reports = verify_exact_rows(FIB, fib.slices, depth=2)
    assert len(reports) == 3 and all(r.ok for r in reports)


def test_exact_rows_reject_degenerate_nesting():
    reports = verify_exact_rows(DYADIC, [DYADIC.universe, DYADIC.cylinder("0"), DYADIC.cylinder("0")])
    assert len(reports) == 1 and not reports[0].ok
    assert "disjointness" in reports[0].error


def test_order_iso_small():
    rep = order_iso_check(odometer_chain(3, 3), 3)
    assert rep.ok
    assert all(s.multiplier == 3 for s in rep.stages)
    with pytest.raises(ValueError):
        order_iso_check(odometer_chain(2, 2), 4)
