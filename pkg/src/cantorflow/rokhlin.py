"""First-return maps and Kakutani-Rokhlin towers over nested clopen slices.

Any object with ``image(A, k)``, ``universe`` and ``empty`` can play the role
of the acting system, so the same routines run on a base system and on the
induced system of a slice.

Heights follow the convention ``j = return_time - 1``: a tower of height
``j`` has the ``j + 1`` floors ``F^(0), ..., F^(j)``.
"""
from __future__ import annotations

from collections import defaultdict
from dataclasses import dataclass
from fractions import Fraction

from .cantor import ClopenSet, InvariantMeasure, SymbolicSystem, contains, measure

DEFAULT_MAX_STEPS = 10**6


class ReturnGuardError(RuntimeError):
    """``max_steps`` exhausted before every point reached the target."""


class DisjointnessError(ValueError):
    """The inner slice meets its own preimage under the outer induced map."""


@dataclass(frozen=True)
class ReturnPartition:
    target: ClopenSet
    domain: ClopenSet
    pieces: tuple[tuple[ClopenSet, int], ...]

    @property
    def times(self) -> list[int]:
        return sorted({k for _, k in self.pieces})

    def time_of(self, p) -> int:
        for piece, k in self.pieces:
            if contains(None, piece, p):
                return k
        raise ValueError("point is not in the domain of the return partition")


def return_partition(sys, D: ClopenSet, T: ClopenSet, max_steps: int = DEFAULT_MAX_STEPS) -> ReturnPartition:
    """Partition ``D`` by the first time ``k >= 1`` at which it lands in ``T``.

    The not-yet-arrived part is pushed forward one step at a time; whatever
    lands in ``T`` at step ``k`` is pulled back by ``k`` steps, which splits
    straddling cylinders exactly where the target boundary requires.
    """
    if D.is_empty() or T.is_empty():
        raise ValueError("domain and target must be nonempty")
    pieces = []
    cur = D
    for k in range(1, max_steps + 1):
        cur = sys.image(cur, 1)
        hit = cur & T
        if not hit.is_empty():
            pieces.append((sys.image(hit, -k), k))
            cur = cur - hit
            if cur.is_empty():
                return ReturnPartition(T, D, tuple(pieces))
    raise ReturnGuardError(f"no full return within {max_steps} steps")


class InducedSystem:
    """First-return map of ``base`` on the clopen slice ``slice``."""

    def __init__(self, base, slice: ClopenSet, partition: ReturnPartition):
        self.base = base
        self.slice = slice
        self.partition = partition
        self._images = [(piece, k, base.image(piece, k)) for piece, k in partition.pieces]

    @property
    def system(self) -> SymbolicSystem:
        b = self.base
        while isinstance(b, InducedSystem):
            b = b.base
        return b

    @property
    def universe(self) -> ClopenSet:
        return self.slice

    @property
    def empty(self) -> ClopenSet:
        return self.slice.system.empty

    def _step(self, A: ClopenSet, forward: bool) -> ClopenSet:
        out = self.empty
        for piece, k, img in self._images:
            if forward:
                part = A & piece
                if not part.is_empty():
                    out = out | self.base.image(part, k)
            else:
                part = A & img
                if not part.is_empty():
                    out = out | self.base.image(part, -k)
        return out

    def image(self, A: ClopenSet, k: int) -> ClopenSet:
        if not A.issubset(self.slice):
            raise ValueError("set is not contained in the induced slice")
        for _ in range(abs(k)):
            A = self._step(A, k > 0)
        return A

    def return_times(self) -> list[tuple[ClopenSet, int]]:
        return list(self.partition.pieces)

    def point_image(self, p, k: int):
        for _ in range(abs(k)):
            if k > 0:
                for piece, r, _img in self._images:
                    if contains(None, piece, p):
                        p = self.base.point_image(p, r)
                        break
                else:
                    raise ValueError("point is not in the slice")
            else:
                for _piece, r, img in self._images:
                    if contains(None, img, p):
                        p = self.base.point_image(p, -r)
                        break
                else:
                    raise ValueError("point is not in the slice")
        return p


class Reversed:
    """The inverse action, used for backward return times."""

    def __init__(self, sys):
        self.sys = sys

    @property
    def universe(self):
        return self.sys.universe

    @property
    def empty(self):
        return self.sys.empty

    def image(self, A, k):
        return self.sys.image(A, -k)


def induced_system(sys, S: ClopenSet, max_steps: int = DEFAULT_MAX_STEPS) -> InducedSystem:
    """First-return map on ``S``.

    Inducing on ``S`` from an induced system gives the same map as inducing
    from the base system, so return times are always counted in base steps.
    """
    if isinstance(sys, InducedSystem):
        if not S.issubset(sys.slice):
            raise ValueError("slice is not inside the induced system's slice")
        sys = sys.system
    rp = return_partition(sys, S, S, max_steps)
    ind = InducedSystem(sys, S, rp)
    acc = S.system.empty
    for _piece, _k, img in ind._images:
        if not acc.isdisjoint(img):
            raise AssertionError("induced map is not injective")
        acc = acc | img
    if acc != S:
        raise AssertionError("induced map is not onto the slice")
    return ind


@dataclass
class TowerDecomposition:
    """Rokhlin towers of the outer slice over the inner slice.

    ``floors[j][k]`` is ``F^(k)_j = Phi_n^k(F^(0)_j)`` where ``F^(0)_j`` is the
    part of the inner slice with return time ``j + 1``.
    """

    ind: InducedSystem
    inner: ClopenSet
    floors: dict[int, list[ClopenSet]]

    @property
    def outer(self) -> ClopenSet:
        return self.ind.slice

    @property
    def heights(self) -> list[int]:
        return sorted(self.floors)

    def base(self, j: int) -> ClopenSet:
        return self.floors[j][0]

    def floor(self, j: int, k: int) -> ClopenSet:
        return self.floors[j][k]

    def tower(self, j: int) -> ClopenSet:
        out = self.outer.system.empty
        for F in self.floors[j]:
            out = out | F
        return out

    @property
    def top_preimage(self) -> ClopenSet:
        """``Phi_n^{-1}(S_{n+1})``, the union of the top floors."""
        out = self.outer.system.empty
        for j in self.heights:
            out = out | self.floors[j][j]
        return out

    def all_floors(self):
        for j in self.heights:
            for k, F in enumerate(self.floors[j]):
                yield j, k, F

    def check_partition(self) -> bool:
        acc = self.outer.system.empty
        for _j, _k, F in self.all_floors():
            if F.is_empty() or not acc.isdisjoint(F):
                return False
            acc = acc | F
        bases = self.outer.system.empty
        for j in self.heights:
            bases = bases | self.base(j)
        return acc == self.outer and bases == self.inner

    def kac_sum(self, mu: InvariantMeasure):
        """``sum_j (j+1) mu(F^(0)_j)`` next to ``mu(S_n)``."""
        total = sum(((j + 1) * measure(mu, self.base(j)) for j in self.heights),
                    Fraction(0) if mu.exact else 0.0)
        return total, measure(mu, self.outer)

    def to_json(self) -> dict:
        return {
            "outer": self.outer.to_json(),
            "inner": self.inner.to_json(),
            "heights": self.heights,
            "floors": {
                str(j): [{"offset": F.lo, "depth": F.depth, "words": sorted(F.words)} for F in fl]
                for j, fl in self.floors.items()
            },
        }


def tower_decomposition(ind: InducedSystem, S_inner: ClopenSet,
                        max_steps: int = DEFAULT_MAX_STEPS) -> TowerDecomposition:
    if S_inner.is_empty() or not S_inner.issubset(ind.slice):
        raise ValueError("inner slice must be a nonempty subset of the outer slice")
    if not ind.image(S_inner, -1).isdisjoint(S_inner):
        raise DisjointnessError(
            "Phi_n^{-1}(S_inner) meets S_inner; nest the slices more deeply"
        )
    rp = return_partition(ind, S_inner, S_inner, max_steps)
    bases: dict[int, ClopenSet] = defaultdict(lambda: S_inner.system.empty)
    for piece, k in rp.pieces:
        bases[k - 1] = bases[k - 1] | piece
    floors = {}
    for j in sorted(bases):
        fl = [bases[j]]
        for _ in range(j):
            fl.append(ind.image(fl[-1], 1))
        floors[j] = fl
    td = TowerDecomposition(ind, S_inner, floors)
    if not td.check_partition():
        raise AssertionError("tower floors do not partition the outer slice")
    return td


def t_map(td: TowerDecomposition) -> list[tuple[ClopenSet, ClopenSet]]:
    """``t_n`` as (base floor, top floor) pairs: ``y -> Phi_n^j(y)`` on ``F^(0)_j``."""
    return [(td.base(j), td.floor(j, j)) for j in td.heights]


def apply_t(td: TowerDecomposition, A: ClopenSet) -> ClopenSet:
    """Image of ``A`` (a subset of the inner slice) under ``t_n``."""
    out = A.system.empty
    for j in td.heights:
        part = A & td.base(j)
        if not part.is_empty():
            out = out | td.ind.image(part, j)
    return out


@dataclass
class SliceChain:
    """Nested slices ``S_0 ⊃ S_1 ⊃ ...`` with induced systems and towers."""

    system: SymbolicSystem
    slices: list[ClopenSet]
    induced: list[InducedSystem]
    towers: list[TowerDecomposition]


def build_chain(system: SymbolicSystem, slices: list[ClopenSet],
                max_steps: int = DEFAULT_MAX_STEPS) -> SliceChain:
    """Induced maps ``Phi_n`` and towers for ``S_{n+1} ⊂ S_n``."""
    induced = [induced_system(system, slices[0], max_steps)]
    towers = []
    for n in range(len(slices) - 1):
        td = tower_decomposition(induced[n], slices[n + 1], max_steps)
        towers.append(td)
        induced.append(induced_system(induced[n], slices[n + 1], max_steps))
    return SliceChain(system, slices, induced, towers)


def auto_nest(system, point, count: int, start: ClopenSet | None = None,
              max_radius: int = 200) -> list[ClopenSet]:
    """Cylinders around ``point`` shrinking until each satisfies the
    disjointness hypothesis against the previous induced map."""
    from .cantor import Odometer

    slices = [start if start is not None else system.universe]
    ind = induced_system(system, slices[0])
    r = 0
    while len(slices) < count + 1:
        r += 1
        if r > max_radius:
            raise ReturnGuardError("could not nest slices within the radius budget")
        lo, hi = (0, r) if isinstance(system, Odometer) else (-(r // 2), r - r // 2)
        C = system.cylinder(point.window(lo, hi), lo)
        if not C.issubset(slices[-1]) or C == slices[-1]:
            continue
        if not ind.image(C, -1).isdisjoint(C):
            continue
        slices.append(C)
        ind = induced_system(ind, C)
    return slices
