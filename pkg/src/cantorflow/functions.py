"""Locally constant functions on clopen subsets of a symbolic system."""
from __future__ import annotations

import random

from .cantor import ClopenSet


class SupportError(ValueError):
    """A function is nonzero outside the set it is required to live on."""


class LocallyConstant:
    """Function on a clopen set, constant on the cylinders of one window.

    ``values`` maps each word of the domain (seen through ``[lo, hi)``) to
    its value; zero values are kept, since they carry the domain.
    """

    __slots__ = ("system", "lo", "hi", "values")

    def __init__(self, system, lo: int, hi: int, values: dict[str, int]):
        if not values:
            lo = hi = 0
        self.system = system
        self.lo = lo
        self.hi = hi
        self.values = dict(values)

    # constructors

    @classmethod
    def constant(cls, S: ClopenSet, c: int) -> "LocallyConstant":
        return cls(S.system, S.lo, S.hi, {w: c for w in S.words})

    @classmethod
    def zero(cls, S: ClopenSet) -> "LocallyConstant":
        return cls.constant(S, 0)

    @classmethod
    def indicator(cls, A: ClopenSet, domain: ClopenSet) -> "LocallyConstant":
        if not A.issubset(domain):
            raise SupportError("indicator set is not inside the domain")
        return cls.from_pieces(domain, [(A, 1)])

    @classmethod
    def from_pieces(cls, domain: ClopenSet, pieces) -> "LocallyConstant":
        """Sum of ``c * chi_A`` over ``(A, c)`` pairs, each ``A`` inside ``domain``."""
        pieces = [(A, c) for A, c in pieces if c and not A.is_empty()]
        if domain.is_empty():
            return cls(domain.system, 0, 0, {})
        lo = min([domain.lo] + [A.lo for A, _ in pieces])
        hi = max([domain.hi] + [A.hi for A, _ in pieces])
        vals = dict.fromkeys(domain.refine(lo, hi).words, 0)
        for A, c in pieces:
            for w in A.refine(lo, hi).words:
                if w not in vals:
                    raise SupportError("piece leaves the domain")
                vals[w] += c
        return cls(domain.system, lo, hi, vals)

    @classmethod
    def from_level_sets(cls, pieces) -> "LocallyConstant":
        """Function whose level sets are the given disjoint ``(A, c)`` pairs."""
        pieces = [(A, c) for A, c in pieces if not A.is_empty()]
        if not pieces:
            raise ValueError("no level sets given")
        system = pieces[0][0].system
        lo = min(A.lo for A, _ in pieces)
        hi = max(A.hi for A, _ in pieces)
        vals: dict[str, int] = {}
        for A, c in pieces:
            for w in A.refine(lo, hi).words:
                if w in vals:
                    raise ValueError("level sets overlap")
                vals[w] = c
        return cls(system, lo, hi, vals)

    @classmethod
    def random(cls, S: ClopenSet, lo: int, hi: int, rng: random.Random,
               low: int = -5, high: int = 5) -> "LocallyConstant":
        words = sorted(S.refine(lo, hi).words)
        return cls(S.system, lo, hi, {w: rng.randint(low, high) for w in words})

    # views

    @property
    def domain(self) -> ClopenSet:
        return ClopenSet(self.system, self.lo, self.hi, self.values, _trusted=True)

    def __repr__(self):
        return f"{type(self).__name__}[{self.lo},{self.hi})({len(self.values)} atoms)"

    def refine(self, lo: int, hi: int) -> "LocallyConstant":
        if not self.values or (lo, hi) == (self.lo, self.hi):
            return self
        if lo > self.lo or hi < self.hi:
            raise ValueError("refinement window must contain the current one")
        vals = {}
        for c, words in self._grouped().items():
            for w in self.system.extend(words, self.lo, self.hi, lo, hi):
                vals[w] = c
        return type(self)(self.system, lo, hi, vals)

    def _grouped(self) -> dict[int, list[str]]:
        out: dict[int, list[str]] = {}
        for w, c in self.values.items():
            out.setdefault(c, []).append(w)
        return out

    def level_sets(self) -> dict[int, ClopenSet]:
        return {
            c: ClopenSet(self.system, self.lo, self.hi, ws, _trusted=True)
            for c, ws in sorted(self._grouped().items())
        }

    def canonical(self) -> "LocallyConstant":
        """Same function on the coarsest window its level sets allow."""
        if not self.values:
            return self
        return type(self).from_level_sets(
            (A.simplify(), c) for c, A in self.level_sets().items()
        )

    def constant_value(self) -> int | None:
        vals = set(self.values.values())
        return vals.pop() if len(vals) == 1 else None

    def evaluate(self, p) -> int:
        return self.values[p.window(self.lo, self.hi)]

    def vector(self, atoms: list[str], lo: int, hi: int) -> list[int]:
        """Coefficients on ``atoms`` (words of ``[lo, hi)``), zero off the domain."""
        if not self.values:
            return [0] * len(atoms)
        f = self
        if f.lo < lo or f.hi > hi:
            f = f.canonical()
            if f.lo < lo or f.hi > hi:
                raise ValueError(f"function needs window [{f.lo},{f.hi}), stage has [{lo},{hi})")
        f = f.refine(lo, hi)
        return [f.values.get(a, 0) for a in atoms]

    # arithmetic

    def _pair(self, other: "LocallyConstant"):
        if other.system != self.system:
            raise ValueError("functions live on different systems")
        if not self.values or not other.values:
            return self, other
        lo, hi = min(self.lo, other.lo), max(self.hi, other.hi)
        return self.refine(lo, hi), other.refine(lo, hi)

    def _binary(self, other, op) -> "LocallyConstant":
        a, b = self._pair(other)
        if a.values.keys() != b.values.keys():
            raise ValueError("functions have different domains")
        return type(self)(a.system, a.lo, a.hi, {w: op(c, b.values[w]) for w, c in a.values.items()})

    def __add__(self, other):
        return self._binary(other, lambda x, y: x + y)

    def __sub__(self, other):
        return self._binary(other, lambda x, y: x - y)

    def __neg__(self):
        return type(self)(self.system, self.lo, self.hi, {w: -c for w, c in self.values.items()})

    def __rmul__(self, k: int):
        return type(self)(self.system, self.lo, self.hi, {w: k * c for w, c in self.values.items()})

    def __eq__(self, other):
        if not isinstance(other, LocallyConstant):
            return NotImplemented
        a, b = self._pair(other)
        return a.values == b.values

    __hash__ = None

    def restrict(self, A: ClopenSet) -> "LocallyConstant":
        if A.is_empty():
            return type(self)(self.system, 0, 0, {})
        lo, hi = min(self.lo, A.lo), max(self.hi, A.hi)
        f = self.refine(lo, hi)
        keep = A.refine(lo, hi).words
        if not keep <= f.values.keys():
            raise SupportError("restriction set leaves the domain")
        return type(self)(self.system, lo, hi, {w: f.values[w] for w in keep})

    def extend_by_zero(self, S: ClopenSet) -> "LocallyConstant":
        dom = self.domain
        if not dom.issubset(S):
            raise SupportError("domain is not inside the extension set")
        return type(self).from_pieces(S, [(A, c) for c, A in self.level_sets().items()])

    def support(self) -> ClopenSet:
        ws = [w for w, c in self.values.items() if c]
        return ClopenSet(self.system, self.lo, self.hi, ws, _trusted=True)

    def to_json(self) -> dict:
        f = self.canonical()
        return {"offset": f.lo, "depth": f.hi - f.lo,
                "values": {w: c for w, c in sorted(f.values.items())}}
