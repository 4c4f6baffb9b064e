"""Symbolic Cantor minimal systems and their clopen-set algebra.

Two families are supported:

* odometers ``odometer base=b0,b1,...`` on one-sided digit sequences, with the
  base sequence repeated cyclically and ``Phi`` = add one with carry (digit 0
  least significant);
* two-sided subshifts of primitive aperiodic substitutions
  ``substitution a:ab,b:a`` with ``Phi`` = left shift.

A clopen set is stored as a *window* ``[lo, hi)`` of coordinates together with
the set of admissible words seen through that window.  For odometers the
window always starts at 0 and its length is the cylinder depth.  Comparisons
refine both operands to the hull of their windows, which makes equality
decidable.
"""
from __future__ import annotations

import json
import math
import re
from dataclasses import dataclass, field
from fractions import Fraction
from functools import cached_property
from typing import Iterable

import mpmath

DIGITS = "0123456789abcdefghijklmnopqrstuvwxyz"

# Stated error bound for float (Perron-Frobenius) measures.
EPS_MU = 1e-12


class DescriptorError(ValueError):
    """Malformed or unsupported system descriptor."""


class NotPrimitiveError(ValueError):
    pass


class PeriodicSubstitutionError(ValueError):
    pass


class SystemMismatchError(ValueError):
    pass


class MeasureDepthError(ValueError):
    """Requested cylinder length exceeds the precomputed frequency table."""


# --------------------------------------------------------------------------
# systems


class SymbolicSystem:
    kind: str = ""

    @property
    def universe(self) -> "ClopenSet":
        return ClopenSet(self, 0, 0, {""})

    @property
    def empty(self) -> "ClopenSet":
        return ClopenSet(self, 0, 0, ())

    def cylinder(self, word: str, lo: int = 0) -> "ClopenSet":
        return ClopenSet(self, lo, lo + len(word), {word})

    def clopen(self, words: Iterable[str], lo: int = 0) -> "ClopenSet":
        words = list(words)
        if not words:
            return self.empty
        lengths = {len(w) for w in words}
        if len(lengths) != 1:
            raise ValueError("all words of a clopen set must share one window")
        n = lengths.pop()
        return ClopenSet(self, lo, lo + n, words)

    def image(self, A: "ClopenSet", k: int) -> "ClopenSet":
        return image(self, A, k)

    def to_json(self) -> dict:
        return {"kind": self.kind, "params": self.params()}


@dataclass(frozen=True)
class Odometer(SymbolicSystem):
    bases: tuple[int, ...]
    kind: str = field(default="odometer", init=False)

    def __post_init__(self):
        if not self.bases:
            raise DescriptorError("odometer needs at least one base")
        for b in self.bases:
            if b < 2:
                raise DescriptorError(f"odometer base entry {b} < 2")
            if b > len(DIGITS):
                raise DescriptorError(f"odometer base entry {b} > {len(DIGITS)}")

    def base(self, i: int) -> int:
        return self.bases[i % len(self.bases)]

    def modulus(self, depth: int) -> int:
        return math.prod(self.base(i) for i in range(depth))

    def params(self) -> dict:
        return {"base": list(self.bases)}

    @property
    def descriptor(self) -> str:
        return "odometer base=" + ",".join(map(str, self.bases))

    def alphabet_at(self, i: int) -> str:
        return DIGITS[: self.base(i)]

    def value(self, word: str) -> int:
        if len(set(self.bases)) == 1:
            return int(word[::-1], self.bases[0]) if word else 0
        v, scale = 0, 1
        for i, c in enumerate(word):
            v += DIGITS.index(c) * scale
            scale *= self.base(i)
        return v

    def word(self, value: int, depth: int) -> str:
        out = []
        for i in range(depth):
            value, r = divmod(value, self.base(i))
            out.append(DIGITS[r])
        return "".join(out)

    def is_word(self, word: str, lo: int = 0) -> bool:
        return lo == 0 and all(c in self.alphabet_at(i) for i, c in enumerate(word))

    def extend(self, words, lo, hi, lo2, hi2):
        if lo2 != 0 or lo != 0:
            raise ValueError("odometer windows start at coordinate 0")
        out = list(words)
        for i in range(hi, hi2):
            alpha = self.alphabet_at(i)
            out = [w + c for w in out for c in alpha]
        return out

    def shift_words(self, words, lo, hi, k):
        P = self.modulus(hi)
        return [self.word((self.value(w) + k) % P, hi) for w in words], lo, hi

    def simplify(self, A: "ClopenSet") -> "ClopenSet":
        words, hi = set(A.words), A.hi
        while hi > 0 and words:
            b = self.base(hi - 1)
            groups: dict[str, int] = {}
            for w in words:
                groups[w[:-1]] = groups.get(w[:-1], 0) + 1
            if any(c != b for c in groups.values()):
                break
            words, hi = set(groups), hi - 1
        return ClopenSet(self, 0, hi, words, _trusted=True)

    def validate_point(self, p: "PointCode"):
        if not isinstance(p, PointCode):
            raise TypeError("odometer points are PointCode instances")
        n = len(p.prefix) + 2 * math.lcm(len(p.period), len(self.bases))
        if not self.is_word(p.window(0, n)):
            raise ValueError("point code has digits outside the base sequence")

    def point_image(self, p: "PointCode", k: int) -> "PointCode":
        return p.add(self, k)

    def point_in_cylinders(self, p, lo, hi):
        return p.window(lo, hi)


@dataclass(frozen=True)
class Substitution(SymbolicSystem):
    rules: tuple[tuple[str, str], ...]
    check_length: int = 32
    kind: str = field(default="substitution", init=False)

    def __post_init__(self):
        rules = dict(self.rules)
        if not rules:
            raise DescriptorError("substitution needs at least one rule")
        letters = set(rules)
        for a, w in rules.items():
            if len(a) != 1:
                raise DescriptorError(f"letter {a!r} must be a single character")
            if not w:
                raise DescriptorError(f"rule for {a!r} is erasing")
            if set(w) - letters:
                raise DescriptorError(f"rule {a}:{w} uses letters without rules")
        if not self.is_primitive():
            raise NotPrimitiveError(f"{self.descriptor} is not primitive")
        counts = [len(self.language(m)) for m in range(1, self.check_length + 2)]
        if len(letters) < 2 or any(
            counts[m + 1] <= counts[m] for m in range(len(counts) - 1)
        ):
            raise PeriodicSubstitutionError(
                f"{self.descriptor} generates a periodic subshift"
            )

    @cached_property
    def rule(self) -> dict[str, str]:
        return dict(self.rules)

    @property
    def alphabet(self) -> str:
        return "".join(sorted(self.rule))

    def params(self) -> dict:
        return {"rules": {a: w for a, w in self.rules}}

    @property
    def descriptor(self) -> str:
        return "substitution " + ",".join(f"{a}:{w}" for a, w in self.rules)

    def apply(self, word: str, times: int = 1) -> str:
        rule = self.rule
        for _ in range(times):
            word = "".join(rule[c] for c in word)
        return word

    def incidence_matrix(self) -> list[list[int]]:
        """Row ``a`` counts the letters of ``sigma(a)``."""
        alpha, rule = self.alphabet, self.rule
        return [[rule[a].count(b) for b in alpha] for a in alpha]

    def is_primitive(self) -> bool:
        M = self.incidence_matrix()
        n = len(M)
        P = M
        # Wielandt bound on the primitivity exponent
        for _ in range((n - 1) ** 2 + 1):
            if all(x > 0 for row in P for x in row):
                return True
            P = [[sum(P[i][k] * M[k][j] for k in range(n)) for j in range(n)] for i in range(n)]
        return False

    @cached_property
    def _two_letter_words(self) -> frozenset[str]:
        found = set()
        for a in self.alphabet:
            w = self.rule[a]
            found |= {w[i : i + 2] for i in range(len(w) - 1)}
        while True:
            new = set(found)
            for u in found:
                w = self.apply(u)
                new |= {w[i : i + 2] for i in range(len(w) - 1)}
            if new == found:
                return frozenset(found)
            found = new

    @cached_property
    def _language_cache(self) -> dict[int, frozenset[str]]:
        return {}

    def language(self, n: int) -> frozenset[str]:
        """All admissible words of length ``n``."""
        cache = self._language_cache
        if n in cache:
            return cache[n]
        if n == 0:
            out = frozenset({""})
        elif n == 1:
            out = frozenset(self.alphabet)
        else:
            j = 0
            while min(len(self.apply(a, j)) for a in self.alphabet) < n:
                j += 1
            out = set()
            for u in self._two_letter_words:
                w = self.apply(u, j)
                out |= {w[i : i + n] for i in range(len(w) - n + 1)}
            out = frozenset(out)
        cache[n] = out
        return out

    def is_word(self, word: str, lo: int = 0) -> bool:
        return word in self.language(len(word))

    def extend(self, words, lo, hi, lo2, hi2):
        out = list(words)
        n = hi - lo
        for _ in range(hi, hi2):
            n += 1
            L = self.language(n)
            out = [w + c for w in out for c in self.alphabet if w + c in L]
        for _ in range(lo2, lo):
            n += 1
            L = self.language(n)
            out = [c + w for w in out for c in self.alphabet if c + w in L]
        return out

    def shift_words(self, words, lo, hi, k):
        return list(words), lo - k, hi - k

    def simplify(self, A: "ClopenSet") -> "ClopenSet":
        words, lo, hi = set(A.words), A.lo, A.hi
        changed = True
        while changed and hi > lo and words:
            changed = False
            n = hi - lo
            L = self.language(n)
            # drop the rightmost coordinate
            groups: dict[str, set] = {}
            for w in words:
                groups.setdefault(w[:-1], set()).add(w[-1])
            if all(
                ext == {c for c in self.alphabet if u + c in L} for u, ext in groups.items()
            ):
                words, hi, changed = set(groups), hi - 1, True
                continue
            groups = {}
            for w in words:
                groups.setdefault(w[1:], set()).add(w[0])
            if all(
                ext == {c for c in self.alphabet if c + u in L} for u, ext in groups.items()
            ):
                words, lo, changed = set(groups), lo + 1, True
        if not words:
            return ClopenSet(self, 0, 0, (), _trusted=True)
        if hi == lo:
            lo = hi = 0
        return ClopenSet(self, lo, hi, words, _trusted=True)

    def validate_point(self, p: "SubstitutionPoint"):
        if not isinstance(p, SubstitutionPoint):
            raise TypeError("substitution points are SubstitutionPoint instances")
        if p.system != self:
            raise SystemMismatchError("point belongs to a different system")

    def point_image(self, p: "SubstitutionPoint", k: int) -> "SubstitutionPoint":
        return p.shifted(k)

    def fixed_point(self, left: str, right: str, max_power: int = 12) -> "SubstitutionPoint":
        """Two-sided fixed point of a power of the substitution seeded by ``left.right``."""
        if left + right not in self.language(2):
            raise ValueError(f"seed {left}{right} is not admissible")
        for p in range(1, max_power + 1):
            if self.apply(right, p)[0] == right and self.apply(left, p)[-1] == left:
                return SubstitutionPoint(self, left, right, p, 0)
        raise ValueError(f"no power <= {max_power} fixes the seed {left}.{right}")


def make_system(descriptor: str) -> SymbolicSystem:
    """Parse ``odometer base=2[,3...]`` or ``substitution a:ab,b:a``."""
    text = descriptor.strip()
    m = re.fullmatch(r"odometer\s+base\s*=\s*([0-9,\s]+)", text)
    if m:
        try:
            bases = tuple(int(x) for x in m.group(1).split(",") if x.strip())
        except ValueError as exc:
            raise DescriptorError(f"bad odometer base list in {descriptor!r}") from exc
        return Odometer(bases)
    m = re.fullmatch(r"substitution\s+(.+)", text)
    if m:
        rules = []
        for part in m.group(1).split(","):
            if ":" not in part:
                raise DescriptorError(f"bad substitution rule {part!r}")
            a, w = (s.strip() for s in part.split(":", 1))
            rules.append((a, w))
        if len({a for a, _ in rules}) != len(rules):
            raise DescriptorError("duplicate letter in substitution")
        return Substitution(tuple(rules))
    raise DescriptorError(f"unsupported system descriptor {descriptor!r}")


def system_from_json(data: dict) -> SymbolicSystem:
    if data["kind"] == "odometer":
        return Odometer(tuple(data["params"]["base"]))
    if data["kind"] == "substitution":
        return Substitution(tuple(data["params"]["rules"].items()))
    raise DescriptorError(f"unknown system kind {data['kind']!r}")


# --------------------------------------------------------------------------
# clopen sets


class ClopenSet:
    """Finite union of cylinders seen through one coordinate window."""

    __slots__ = ("system", "lo", "hi", "words")

    def __init__(self, system, lo, hi, words, _trusted=False):
        words = frozenset(words)
        if not _trusted:
            n = hi - lo
            for w in words:
                if len(w) != n:
                    raise ValueError(f"word {w!r} does not fit window [{lo}, {hi})")
                if not system.is_word(w, lo):
                    raise ValueError(f"word {w!r} is not admissible in {system.descriptor}")
        if not words:
            lo = hi = 0
        self.system = system
        self.lo = lo
        self.hi = hi
        self.words = words

    @property
    def depth(self) -> int:
        return self.hi - self.lo

    def __repr__(self):
        ws = sorted(self.words)
        shown = ",".join(ws[:6]) + (",..." if len(ws) > 6 else "")
        return f"ClopenSet[{self.lo},{self.hi})({shown})"

    def __len__(self):
        return len(self.words)

    def is_empty(self) -> bool:
        return not self.words

    def refine(self, lo: int, hi: int) -> "ClopenSet":
        if self.is_empty():
            return self
        if lo > self.lo or hi < self.hi:
            raise ValueError("refinement window must contain the current one")
        if (lo, hi) == (self.lo, self.hi):
            return self
        words = self.system.extend(self.words, self.lo, self.hi, lo, hi)
        return ClopenSet(self.system, lo, hi, words, _trusted=True)

    def cylinders(self) -> list["ClopenSet"]:
        return [ClopenSet(self.system, self.lo, self.hi, {w}, _trusted=True) for w in sorted(self.words)]

    def simplify(self) -> "ClopenSet":
        return self.system.simplify(self)

    def _pair(self, other):
        if other.system != self.system:
            raise SystemMismatchError("clopen sets belong to different systems")
        if self.is_empty() or other.is_empty():
            return self, other
        lo, hi = min(self.lo, other.lo), max(self.hi, other.hi)
        return self.refine(lo, hi), other.refine(lo, hi)

    def _combine(self, other, op):
        a, b = self._pair(other)
        if a.is_empty() and b.is_empty():
            return a
        ref = a if not a.is_empty() else b
        return ClopenSet(self.system, ref.lo, ref.hi, op(a.words, b.words), _trusted=True).simplify()

    def __or__(self, other):
        return self._combine(other, lambda x, y: x | y)

    def __and__(self, other):
        return self._combine(other, lambda x, y: x & y)

    def __sub__(self, other):
        return self._combine(other, lambda x, y: x - y)

    def complement(self) -> "ClopenSet":
        return self.system.universe - self

    def __eq__(self, other):
        if not isinstance(other, ClopenSet):
            return NotImplemented
        a, b = self._pair(other)
        if a.is_empty() or b.is_empty():
            return a.is_empty() and b.is_empty()
        return a.words == b.words

    __hash__ = None

    def issubset(self, other) -> bool:
        return (self - other).is_empty()

    def isdisjoint(self, other) -> bool:
        return (self & other).is_empty()

    def __le__(self, other):
        return self.issubset(other)

    def to_json(self) -> dict:
        d = self.system.to_json()
        d.update({"offset": self.lo, "depth": self.depth, "words": sorted(self.words)})
        return d


def clopen_from_json(data: dict, system: SymbolicSystem | None = None) -> ClopenSet:
    system = system or system_from_json(data)
    lo = data.get("offset", 0)
    return ClopenSet(system, lo, lo + data["depth"], data["words"])


def union_all(sets: Iterable[ClopenSet], system: SymbolicSystem) -> ClopenSet:
    out = system.empty
    for s in sets:
        out = out | s
    return out


def image(system: SymbolicSystem, A: ClopenSet, k: int) -> ClopenSet:
    """``Phi^k(A)`` computed exactly."""
    if A.system != system:
        raise SystemMismatchError("clopen set belongs to a different system")
    if k == 0 or A.is_empty():
        return A
    words, lo, hi = system.shift_words(A.words, A.lo, A.hi, k)
    return ClopenSet(system, lo, hi, words, _trusted=True).simplify()


def boolean(a: ClopenSet, b: ClopenSet, op: str) -> ClopenSet:
    ops = {"union": a.__or__, "intersection": a.__and__, "difference": a.__sub__}
    if op not in ops:
        raise ValueError(f"unknown boolean operation {op!r}")
    return ops[op](b)


# --------------------------------------------------------------------------
# points


@dataclass(frozen=True)
class PointCode:
    """Eventually periodic one-sided code ``prefix + period^inf``."""

    prefix: str
    period: str

    def __post_init__(self):
        if not self.period:
            raise ValueError("period must be nonempty")

    def digit(self, i: int) -> str:
        if i < len(self.prefix):
            return self.prefix[i]
        return self.period[(i - len(self.prefix)) % len(self.period)]

    def window(self, lo: int, hi: int) -> str:
        if lo < 0:
            raise ValueError("one-sided code has no negative coordinates")
        return "".join(self.digit(i) for i in range(lo, hi))

    def add(self, odo: Odometer, k: int) -> "PointCode":
        """Odometer action ``x + k``; a carry may run into the periodic tail."""
        L = math.lcm(len(self.period), len(odo.bases))
        period = self.period * (L // len(self.period))
        prefix = self.prefix
        while odo.modulus(len(prefix)) <= abs(k):
            prefix += period
        n = len(prefix)
        carry, v = divmod(odo.value(prefix) + k, odo.modulus(n))
        prefix = odo.word(v, n)
        if carry:
            bases = [odo.base(n + i) for i in range(L)]
            vals = [DIGITS.index(c) for c in period]
            if carry > 0 and all(x == b - 1 for x, b in zip(vals, bases)):
                period = "0" * L
            elif carry < 0 and not any(vals):
                period = "".join(DIGITS[b - 1] for b in bases)
            else:
                i = 0
                while True:
                    vals[i] += carry
                    if 0 <= vals[i] < bases[i]:
                        break
                    vals[i] %= bases[i]
                    i += 1
                prefix += "".join(DIGITS[x] for x in vals)
        while len(prefix) >= L and prefix[-L:] == period:
            prefix = prefix[:-L]
        return PointCode(prefix, period)

    def same_point(self, other: "PointCode") -> bool:
        n = max(len(self.prefix), len(other.prefix)) + 2 * math.lcm(len(self.period), len(other.period))
        return self.window(0, n) == other.window(0, n)


@dataclass(frozen=True)
class SubstitutionPoint:
    """``sigma^shift`` of the two-sided fixed point ``sigma^(p*inf)(left).sigma^(p*inf)(right)``."""

    system: Substitution
    left: str
    right: str
    power: int
    shift: int = 0

    def _sides(self, need_left: int, need_right: int) -> tuple[str, str]:
        L, R = self.left, self.right
        while len(L) < need_left or len(R) < need_right:
            L, R = self.system.apply(L, self.power), self.system.apply(R, self.power)
        return L, R

    def window(self, lo: int, hi: int) -> str:
        a, b = lo + self.shift, hi + self.shift
        L, R = self._sides(max(0, -a), max(0, b))
        out = []
        for i in range(a, b):
            out.append(R[i] if i >= 0 else L[i])
        return "".join(out)

    def shifted(self, k: int) -> "SubstitutionPoint":
        return SubstitutionPoint(self.system, self.left, self.right, self.power, self.shift + k)

    def same_point(self, other: "SubstitutionPoint", radius: int = 64) -> bool:
        return self.window(-radius, radius) == other.window(-radius, radius)


def contains(system: SymbolicSystem, A: ClopenSet, p) -> bool:
    """Exact membership by comparing the point's word in ``A``'s window."""
    if A.is_empty():
        return False
    return p.window(A.lo, A.hi) in A.words


def point_image(system: SymbolicSystem, p, k: int):
    return system.point_image(p, k)


# --------------------------------------------------------------------------
# invariant measures


class InvariantMeasure:
    """The unique invariant probability measure of a shipped system.

    Odometer weights are exact ``Fraction`` values; substitution weights are
    word frequencies computed at high precision and rounded to float, each
    within ``eps`` of the true value.
    """

    def __init__(self, system: SymbolicSystem, max_length: int = 128, eps: float = EPS_MU):
        self.system = system
        self.max_length = max_length
        self.eps = 0.0 if isinstance(system, Odometer) else eps
        self._freq: dict[int, dict[str, float]] = {}

    @property
    def exact(self) -> bool:
        return isinstance(self.system, Odometer)

    def weight(self, word: str):
        sys = self.system
        if isinstance(sys, Odometer):
            return Fraction(1, sys.modulus(len(word)))
        n = len(word)
        if n > self.max_length:
            raise MeasureDepthError(f"word length {n} exceeds frequency table ({self.max_length})")
        return self.frequencies(n).get(word, 0.0)

    def frequencies(self, n: int) -> dict[str, float]:
        if n not in self._freq:
            self._freq[n] = _word_frequencies(self.system, n, self.eps)
        return self._freq[n]

    def __call__(self, A: ClopenSet):
        return measure(self, A)


def measure(mu: InvariantMeasure, A: ClopenSet):
    if A.system != mu.system:
        raise SystemMismatchError("measure built for another system")
    if A.is_empty():
        return Fraction(0) if mu.exact else 0.0
    if mu.exact:
        return len(A.words) * Fraction(1, mu.system.modulus(A.depth))
    if A.depth > mu.max_length:
        A = A.simplify()
    freq = mu.frequencies(A.depth) if A.depth <= mu.max_length else None
    if freq is None:
        raise MeasureDepthError(f"window length {A.depth} exceeds frequency table ({mu.max_length})")
    return math.fsum(freq[w] for w in A.words)


def _word_frequencies(sys: Substitution, n: int, eps: float) -> dict[str, float]:
    """Frequencies of length-``n`` words from the Perron-Frobenius vector of
    the induced ``n``-block substitution, by power iteration at 50 digits."""
    words = sorted(sys.language(n))
    if n == 0:
        return {"": 1.0}
    index = {w: i for i, w in enumerate(words)}
    m = len(words)
    M = [[0] * m for _ in range(m)]
    for w in words:
        img = sys.apply(w)
        for p in range(len(sys.rule[w[0]])):
            M[index[w]][index[img[p : p + n]]] += 1
    with mpmath.workdps(50):
        v = [mpmath.mpf(1) / m] * m
        tol = mpmath.mpf(10) ** -40
        for _ in range(10000):
            nv = [mpmath.fsum(v[i] * M[i][j] for i in range(m) if M[i][j]) for j in range(m)]
            s = mpmath.fsum(nv)
            nv = [x / s for x in nv]
            diff = max(abs(a - b) for a, b in zip(nv, v))
            v = nv
            if diff < tol:
                break
        else:
            raise ArithmeticError("frequency power iteration did not converge")
        lam = mpmath.fsum(mpmath.fsum(v[i] * M[i][j] for i in range(m)) for j in range(m))
        resid = max(
            abs(mpmath.fsum(v[i] * M[i][j] for i in range(m)) - lam * v[j]) for j in range(m)
        )
        if resid > eps * 1e-6:
            raise ArithmeticError(f"frequency residual {resid} above bound")
        return {w: float(v[index[w]]) for w in words}


def dumps(obj) -> str:
    return json.dumps(obj.to_json(), sort_keys=True)
