"""Suspension flows over symbolic bases with locally constant rational roofs.

A point of the suspension is a base point and a fiber time ``t`` with
``0 <= t < tau(x)``.  Everything is exact: roofs and times are ``Fraction``.
"""
from __future__ import annotations

import random
from dataclasses import dataclass, field
from fractions import Fraction

from .cantor import ClopenSet, Odometer, SymbolicSystem, contains
from .functions import LocallyConstant
from .rokhlin import (DEFAULT_MAX_STEPS, InducedSystem, Reversed, TowerDecomposition,
                      induced_system, return_partition)


class FlowboxBudgetError(RuntimeError):
    """No cylinder depth within budget gives the requested box length."""


class ReturnTimeFunction(LocallyConstant):
    """Positive rational function, constant on the cylinders of one window."""

    def __init__(self, system, lo, hi, values):
        values = {w: Fraction(v) for w, v in values.items()}
        if any(v <= 0 for v in values.values()):
            raise ValueError("roof values must be strictly positive")
        super().__init__(system, lo, hi, values)

    def minimum(self) -> Fraction:
        return min(self.values.values())

    def to_json(self) -> dict:
        f = self.canonical()
        return {"offset": f.lo, "depth": f.hi - f.lo,
                "values": {w: str(v) for w, v in sorted(f.values.items())}}

    @classmethod
    def from_json(cls, system, data: dict) -> "ReturnTimeFunction":
        lo = data.get("offset", 0)
        return cls(system, lo, lo + data["depth"], {w: Fraction(v) for w, v in data["values"].items()})


def parse_roof(system: SymbolicSystem, text: str | None) -> ReturnTimeFunction:
    """``"1"`` for a constant roof, or ``"a=1,b=3/2"`` giving values on cylinders
    of one common window starting at coordinate 0."""
    if text is None or "=" not in (text or ""):
        c = Fraction(text) if text else Fraction(1)
        return ReturnTimeFunction.constant(system.universe, c)
    pieces = []
    for item in text.split(","):
        w, v = item.split("=")
        pieces.append((system.cylinder(w.strip()), Fraction(v.strip())))
    f = ReturnTimeFunction.from_level_sets(pieces)
    if f.domain != system.universe:
        raise ValueError("roof cylinders must cover the base")
    return f


@dataclass(frozen=True)
class SuspensionPoint:
    x: object
    t: Fraction


class Suspension:
    """Flow over ``(X, Phi)`` with roof ``tau``."""

    def __init__(self, system: SymbolicSystem, roof: ReturnTimeFunction):
        if roof.domain != system.universe:
            raise ValueError("roof must be defined on the whole base")
        self.system = system
        self.roof = roof

    def tau(self, x) -> Fraction:
        return self.roof.evaluate(x)

    def point(self, x, t=0) -> SuspensionPoint:
        return self.normalize(SuspensionPoint(x, Fraction(t)))

    def normalize(self, p: SuspensionPoint) -> SuspensionPoint:
        x, t = p.x, Fraction(p.t)
        step = self.system.point_image
        while t < 0:
            x = step(x, -1)
            t += self.tau(x)
        while t >= (r := self.tau(x)):
            t -= r
            x = step(x, 1)
        return SuspensionPoint(x, t)

    def flow(self, p: SuspensionPoint, s) -> SuspensionPoint:
        """``phi_s``: move up the fiber, jumping by ``Phi`` at the roof."""
        return self.normalize(SuspensionPoint(p.x, p.t + Fraction(s)))

    def same_point(self, p: SuspensionPoint, q: SuspensionPoint) -> bool:
        return p.t == q.t and p.x.same_point(q.x)


def flow_step(susp: Suspension, p: SuspensionPoint, s) -> SuspensionPoint:
    return susp.flow(p, s)


# --------------------------------------------------------------------------
# return and arrive times


def _sum_along(sys, g: LocallyConstant, base: ClopenSet, k: int) -> list[tuple[ClopenSet, Fraction]]:
    """Pieces of ``base`` on which ``y -> g(sys^k y)`` is constant."""
    moved = sys.image(base, k)
    out = []
    for c, A in g.level_sets().items():
        part = A & moved
        if not part.is_empty():
            out.append((sys.image(part, -k), c))
    return out


def _accumulate(sys, g: LocallyConstant, P: ClopenSet, steps) -> list[tuple[ClopenSet, Fraction]]:
    """Split ``P`` so that ``sum_{i in steps} g(sys^i y)`` is constant on each piece."""
    pieces = [(P, Fraction(0))]
    if g.constant_value() is not None:
        return [(P, g.constant_value() * len(steps))]
    for i in steps:
        nxt = []
        for Q, acc in pieces:
            for R, c in _sum_along(sys, g, Q, i):
                nxt.append((R, acc + c))
        pieces = nxt
    return pieces


def suspension_return_time(susp: Suspension, C: ClopenSet, backward: bool = False,
                           max_steps: int = DEFAULT_MAX_STEPS) -> ReturnTimeFunction:
    """Real first-return time to the fiber-0 copy of ``C`` (or of the past, with ``backward``)."""
    sys = susp.system
    act = Reversed(sys) if backward else sys
    rp = return_partition(act, C, C, max_steps)
    pieces = []
    for P, k in rp.pieces:
        steps = range(-k, 0) if backward else range(k)
        pieces += _accumulate(sys, susp.roof, P, steps)
    return ReturnTimeFunction.from_level_sets(pieces)


def induced_roof(susp: Suspension, ind: InducedSystem) -> ReturnTimeFunction:
    """Roof of the suspension over ``(S_n, Phi_n)`` that gives the same flow."""
    return suspension_return_time(susp, ind.slice)


def arrive_times(susp: Suspension, td: TowerDecomposition) -> dict[tuple[int, int], LocallyConstant]:
    """``(j, k) -> (y -> time from y to Phi_n^k y)`` on each base ``F^(0)_j``,
    for ``k = 0, ..., j + 1`` (the last one is the return time to ``S_{n+1}``)."""
    R = induced_roof(susp, td.ind)
    out = {}
    for j in td.heights:
        acc = [(td.base(j), Fraction(0))]
        out[(j, 0)] = LocallyConstant.from_level_sets(acc)
        for k in range(1, j + 2):
            acc = [(P, a + c) for Q, a in acc for P, c in _sum_along(td.ind, R, Q, k - 1)]
            out[(j, k)] = LocallyConstant.from_level_sets(_merge(acc))
    return out


def _merge(pieces):
    by_value: dict = {}
    for P, c in pieces:
        by_value[c] = by_value[c] | P if c in by_value else P
    return [(P, c) for c, P in by_value.items()]


# --------------------------------------------------------------------------
# central slices and flowbox structures


def cylinder_diameter(C: ClopenSet) -> Fraction:
    """Diameter bound ``2^-r`` with ``r`` the agreement radius of the window."""
    if isinstance(C.system, Odometer):
        r = C.hi
    else:
        r = min(-C.lo, C.hi) if C.lo <= 0 < C.hi else 0
    return Fraction(1, 2 ** max(r, 0))


@dataclass
class CentralSlice:
    base: ClopenSet
    length: Fraction
    min_return: Fraction

    @property
    def admissible(self) -> bool:
        return 0 < self.length < self.min_return


def central_slice(susp: Suspension, C: ClopenSet, length=None) -> CentralSlice:
    fwd = suspension_return_time(susp, C).minimum()
    bwd = suspension_return_time(susp, C, backward=True).minimum()
    m = min(fwd, bwd)
    return CentralSlice(C, Fraction(length) if length is not None else m / 2, m)


@dataclass
class FlowboxStructure:
    susp: Suspension
    center: object
    depths: list[int]
    slices: list[CentralSlice]

    def stage(self, n: int) -> CentralSlice:
        """Slice ``S_n`` for ``n = 1, 2, ...``."""
        return self.slices[n - 1]


def center_cylinder(system, x, d: int) -> ClopenSet:
    if isinstance(system, Odometer):
        return system.cylinder(x.window(0, d), 0)
    return system.cylinder(x.window(-d, d), -d)


def build_flowbox_structure(susp: Suspension, center, n_max: int, depth_budget: int = 64) -> FlowboxStructure:
    """``S_n`` the smallest-depth cylinder of the center (depths nondecreasing)
    with diameter below ``1/n`` and minimal return time at least ``2n``; the
    box length is half the minimal return time."""
    sys = susp.system
    sys.validate_point(center)
    depths, slices = [], []
    d = 1
    for n in range(1, n_max + 1):
        while True:
            if d > depth_budget:
                raise FlowboxBudgetError(f"no depth <= {depth_budget} gives length {n} at stage {n}")
            C = center_cylinder(sys, center, d)
            if cylinder_diameter(C) < Fraction(1, n):
                cs = central_slice(susp, C)
                if cs.min_return >= 2 * n:
                    break
            d += 1
        depths.append(d)
        slices.append(cs)
    return FlowboxStructure(susp, center, depths, slices)


@dataclass
class FlowboxReport:
    nested: bool
    lengths_grow: bool
    shrinking: bool
    admissible: bool
    interior: bool
    samples: int
    containment_failures: int
    lengths: list[str] = field(default_factory=list)
    depths: list[int] = field(default_factory=list)

    @property
    def ok(self) -> bool:
        return (self.nested and self.lengths_grow and self.shrinking and self.admissible
                and self.interior and self.containment_failures == 0)

    def to_json(self) -> dict:
        d = dict(self.__dict__)
        d["ok"] = self.ok
        return d


def _random_fraction(rng: random.Random, lo: Fraction, hi: Fraction, den: int = 97) -> Fraction:
    """Rational strictly inside ``(lo, hi)``."""
    return lo + (hi - lo) * Fraction(rng.randint(1, den - 1), den)


def _box_coordinate(susp: Suspension, q: SuspensionPoint, S: ClopenSet, lo: Fraction, hi: Fraction):
    """All ``u`` in ``(lo, hi)`` with ``phi_{-u}(q)`` at fiber time 0 over ``S``."""
    sys = susp.system
    found = []
    # u = t_q + time back to a fiber-0 point below q
    x, u = q.x, q.t
    while u < hi:
        if u > lo and contains(sys, S, x):
            found.append(u)
        x = sys.point_image(x, -1)
        u += susp.tau(x)
    x, u = q.x, q.t
    while True:
        u -= susp.tau(x)
        x = sys.point_image(x, 1)
        if u <= lo:
            break
        if u < hi and contains(sys, S, x):
            found.append(u)
    return found


def sample_in_slice(susp: Suspension, center, C: ClopenSet, rng: random.Random, spread: int = 50):
    """A point of ``C`` reached from the center by a random number of returns."""
    ind = induced_system(susp.system, C)
    return ind.point_image(center, rng.randint(-spread, spread))


def containment_sample(fb: FlowboxStructure, n: int, rng: random.Random, eta=None):
    """One instance of: ``phi(S_k x [L1, L2])`` lies inside the open box
    ``phi(S_n x (L1 - eta, L2 + eta))`` with ``k = n + 1``."""
    susp = fb.susp
    Sn = fb.stage(n)
    half = Sn.length / 2
    if eta is None:
        eta = _random_fraction(rng, Fraction(0), half)
    eta = Fraction(eta)
    if not 0 < eta < half:
        raise ValueError("eta must satisfy 0 < eta < l_n / 2")
    L1 = _random_fraction(rng, -half + eta, half - eta)
    L2 = _random_fraction(rng, L1, half - eta)
    t = _random_fraction(rng, L1, L2) if L1 < L2 else L1
    k = n + 1
    y = sample_in_slice(susp, fb.center, fb.stage(k).base, rng)
    q = susp.flow(susp.point(y), t)
    coords = _box_coordinate(susp, q, Sn.base, L1 - eta, L2 + eta)
    return len(coords) == 1 and coords[0] == t


def verify_flowbox_properties(fb: FlowboxStructure, samples: int = 100, seed: int = 0) -> FlowboxReport:
    rng = random.Random(seed)
    sl = fb.slices
    nested = all(sl[i + 1].base.issubset(sl[i].base) for i in range(len(sl) - 1))
    lengths = [s.length for s in sl]
    grow = all(lengths[i] <= lengths[i + 1] for i in range(len(sl) - 1)) and all(
        lengths[n - 1] >= n for n in range(1, len(sl) + 1))
    shrinking = all(
        cylinder_diameter(s.base) < Fraction(1, n) and contains(fb.susp.system, s.base, fb.center)
        for n, s in enumerate(sl, start=1))
    admissible = all(s.admissible for s in sl)
    interior = all(not s.base.is_empty() and s.length > 0 for s in sl)
    failures = 0
    if len(sl) >= 2:
        for _ in range(samples):
            n = rng.randint(1, len(sl) - 1)
            if not containment_sample(fb, n, rng):
                failures += 1
    return FlowboxReport(nested, grow, shrinking, admissible, interior,
                         samples if len(sl) >= 2 else 0, failures,
                         [str(x) for x in lengths], list(fb.depths))
