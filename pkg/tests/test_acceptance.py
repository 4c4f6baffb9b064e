"""The seven acceptance criteria, each at its stated tolerance and time budget.

Run ``pytest tests/test_acceptance.py`` (a PASS/FAIL line per criterion is
printed in the terminal summary) or ``python tests/test_acceptance.py``.
"""
import os
import random
import sys
import time
from fractions import Fraction

import pytest

sys.path.insert(0, os.path.dirname(__file__))

from cantorflow import config  # noqa: E402
from cantorflow.cantor import InvariantMeasure, PointCode  # noqa: E402
from cantorflow.kernels import CHECKED, kernel_check  # noqa: E402
from cantorflow.ktheory import (IntFunction, beta, connecting_iota, crossed_product_k0,  # noqa: E402
                                delta, delta_stabilization, order_iso_check, pushforward,
                                verify_exact_rows)
from cantorflow.rokhlin import apply_t  # noqa: E402
from cantorflow.suspension import (Suspension, build_flowbox_structure, parse_roof,  # noqa: E402
                                   verify_flowbox_properties)
from chains import (DYADIC, FIB, TRIADIC, Targets, fibonacci_chain, odometer_chain,  # noqa: E402
                    random_function, random_subset)

RESULTS = {}


def record(key, title):
    def wrap(fn):
        def run():
            t = time.perf_counter()
            try:
                ok, detail = fn()
            except Exception as exc:  # a crash is a failed criterion, reported as such
                ok, detail = False, f"{type(exc).__name__}: {exc}"
            elapsed = time.perf_counter() - t
            RESULTS[key] = (ok, title, detail, elapsed)
            return ok, detail, elapsed
        run.__name__ = fn.__name__
        return run
    return wrap


def _odometer_dimension_group(base, stages, budget):
    sysm = DYADIC if base == 2 else TRIADIC
    ch = odometer_chain(base, stages)
    heights = all(td.heights == [base - 1] for td in ch.towers)
    times = all(
        connecting_iota(td, IntFunction.constant(ch.slices[n], 1)).constant_value() == base
        for n, td in enumerate(ch.towers))
    rep = order_iso_check(ch, stages)
    stage_ok = all(
        s.kernel_match and s.gamma_surjective and s.multiplier == base and s.model_match
        and s.positivity_mismatches == 0 and s.positivity_undecided == 0
        for s in rep.stages)
    # [S_n] -> base^-n in the closed-form model
    st = crossed_product_k0(sysm, stages)
    from cantorflow.ktheory import odometer_limit_value
    model = all(
        odometer_limit_value(st, st.vector(IntFunction.constant(S, 1).extend_by_zero(sysm.universe)))
        == Fraction(1, base ** n) for n, S in enumerate(ch.slices))
    snf = all(
        crossed_product_k0(sysm, d).invariant_factors() == [1] * (base ** d - 1) + [0]
        for d in range(1, stages + 1))
    ok = heights and times and stage_ok and model and snf and rep.ok
    return ok, (f"towers J={{{base - 1}}}:{heights} x{base}:{times} stages:{stage_ok} "
                f"model:{model} snf:{snf}")


@record(1, "dyadic dimension group, S_n=[0^n], n<=8, < 10 s")
def criterion_1():
    return _odometer_dimension_group(2, 8, 10)


@record(2, "3-adic dimension group, < 10 s")
def criterion_2():
    return _odometer_dimension_group(3, 5, 10)


@record(3, "exact rows, commuting squares, delta-stabilization, < 60 s")
def criterion_3():
    dy = odometer_chain(2, 8)
    dy_rows = verify_exact_rows(DYADIC, dy.slices[:6])  # n = 0..4 at depth n+3
    fib = fibonacci_chain(4)
    fib_rows = verify_exact_rows(FIB, fib.slices[:4])  # n = 0..2
    rows = len(dy_rows) == 5 and len(fib_rows) == 3 and all(r.ok for r in dy_rows + fib_rows)
    rng = random.Random(31)
    square_fail = 0
    for ch, last in ((dy, 5), (fib, 3)):
        targets = Targets(ch)
        for n in range(last):
            td, tn = ch.towers[n], ch.towers[n + 1]
            for _ in range(50):
                f = random_function(td.top_preimage, 2, rng)
                square_fail += beta(tn, delta(td, tn, f)) != connecting_iota(tn, beta(td, f))
                h = random_function(ch.slices[n + 1], 2, rng)
                square_fail += not targets.same_class(connecting_iota(tn, h), h)
    worst = 0
    for n in range(5):  # dyadic inputs of depth n + 2
        E = dy.towers[n].top_preimage
        for _ in range(20):
            s = delta_stabilization(dy, n, IntFunction.random(E, 0, n + 2, rng))
            worst = max(worst, 99 if s is None else s)
    for n in range(3):  # Fibonacci: narrowest window on which E_n is not a single cylinder
        E = fib.towers[n].top_preimage
        w = 1
        while len(E.refine(E.lo - w, E.hi + w).words) < 2:
            w += 1
        for _ in range(20):
            s = delta_stabilization(fib, n, IntFunction.random(E, E.lo - w, E.hi + w, rng))
            worst = max(worst, 99 if s is None else s)
    ok = rows and square_fail == 0 and worst <= 3
    return ok, f"rows:{rows} square failures:{square_fail} max delta steps:{worst}"


@record(4, "iota ignores pushforward off the top; composed t-maps (50 each)")
def criterion_4():
    rng = random.Random(41)
    chains = [odometer_chain(2, 5), fibonacci_chain(3)]
    fail_p = fail_t = 0
    for i in range(50):
        ch = chains[i % 2]
        td = ch.towers[i % len(ch.towers)]
        f = random_function(td.outer - td.top_preimage, 2, rng).extend_by_zero(td.outer)
        fail_p += connecting_iota(td, f) != connecting_iota(td, pushforward(td.ind, f))
    for i in range(50):
        ch = chains[i % 2]
        N = len(ch.towers)
        n = rng.randrange(N)
        k = rng.randrange(N - n)
        A = random_subset(ch.slices[n + k + 1], 2, rng)
        img = A
        for m in range(n + k, n - 1, -1):
            img = apply_t(ch.towers[m], img)
        fail_t += img != ch.induced[n].image(ch.induced[n + k + 1].image(A, 1), -1)
    return fail_p == 0 and fail_t == 0, f"failures {fail_p}/50 and {fail_t}/50"


@record(5, "partition and Kac identities on every decomposition")
def criterion_5():
    bad = []
    for ch in (odometer_chain(2, 8), odometer_chain(3, 5), fibonacci_chain(4)):
        mu = InvariantMeasure(ch.system)
        for n, td in enumerate(ch.towers):
            kac, target = td.kac_sum(mu)
            good = kac == target if mu.exact else abs(kac - target) <= 4 * mu.eps
            if not (td.check_partition() and good):
                bad.append((ch.system.kind, n))
    return not bad, f"violations: {bad}"


@record(6, "suspension group law (500) and dyadic flowbox to n=16")
def criterion_6():
    rng = random.Random(61)
    torus = Suspension(DYADIC, parse_roof(DYADIC, "1"))
    fibs = Suspension(FIB, parse_roof(FIB, "a=1,b=3/2"))
    zero = PointCode("", "0")
    law = 0
    for i in range(500):
        susp = torus if i % 2 else fibs
        x0 = zero if susp is torus else FIB.fixed_point("a", "a")
        q = lambda: Fraction(rng.randint(-200, 200), rng.randint(1, 40))  # noqa: E731
        p = susp.point(susp.system.point_image(x0, rng.randint(-25, 25)), q())
        s, t = q(), q()
        law += susp.same_point(susp.flow(susp.flow(p, t), s), susp.flow(p, s + t))
    fb = build_flowbox_structure(torus, zero, 16)
    rep = verify_flowbox_properties(fb, samples=100, seed=6)
    lengths = all(fb.stage(n).length >= n for n in range(1, 17))
    ok = law == 500 and rep.ok and lengths and rep.samples == 100
    return ok, (f"group law {law}/500; l_n>=n:{lengths} nested:{rep.nested} "
                f"lengths:{rep.lengths_grow} shrinking:{rep.shrinking} "
                f"containment failures {rep.containment_failures}/{rep.samples}")


@record(7, "kernel identities at N=64 within C h, N=128 ratio <= 0.7, < 120 s")
def criterion_7():
    rep = kernel_check(64, 128)
    parts = [f"{k}:{c['error']:.2e}/{c['ratio']:.2f}" for k, c in rep["checks"].items()]
    needed = ["homomorphism", "involution", "trace", "round_trip", "compatibility"]
    ok = all(rep["checks"][k]["below_tolerance"] and rep["checks"][k]["ratio"] <= config.KERNEL_RATIO_MAX
             for k in needed) and set(needed) <= set(CHECKED)
    return ok, " ".join(parts)


BUDGETS = {1: 10, 2: 10, 3: 60, 7: 120}
CRITERIA = [criterion_1, criterion_2, criterion_3, criterion_4, criterion_5, criterion_6, criterion_7]


@pytest.mark.parametrize("number", range(1, 8))
def test_criterion(number):
    ok, detail, elapsed = CRITERIA[number - 1]()
    assert ok, detail
    if number in BUDGETS:
        assert elapsed < BUDGETS[number], f"{elapsed:.1f} s over the {BUDGETS[number]} s budget"


def summary_lines():
    out = []
    for key in sorted(RESULTS):
        ok, title, detail, elapsed = RESULTS[key]
        if key in BUDGETS and elapsed >= BUDGETS[key]:
            ok = False
        out.append(f"{'PASS' if ok else 'FAIL'} criterion {key}: {title} [{elapsed:.2f} s] {detail}")
    return out


if __name__ == "__main__":
    for c in CRITERIA:
        c()
    lines = summary_lines()
    print("\n".join(lines))
    sys.exit(0 if all(line.startswith("PASS") for line in lines) else 1)
