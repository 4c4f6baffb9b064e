"""K0 groups of the stage algebras and of the crossed product, as integer
linear algebra on clopen partitions.

``K0`` of ``C(S)`` is ``C(S, Z)``, held here as :class:`IntFunction`.  The
crossed product of a slice by its induced map has ``K0 = coker(id - Phi_*)``;
:func:`crossed_product_k0` computes that cokernel on a finite partition and
every question about it is answered through :mod:`cantorflow.snf`.
"""
from __future__ import annotations

import random
from dataclasses import dataclass, field, asdict
from fractions import Fraction
from functools import cached_property

from .cantor import ClopenSet, InvariantMeasure, Odometer, measure
from .rokhlin import (DisjointnessError, InducedSystem, SliceChain, TowerDecomposition,
                      build_chain)
from .functions import LocallyConstant, SupportError
from .snf import (columns_to_matrix, lattice_contains, smith_normal_form)


class IntFunction(LocallyConstant):
    """Element of ``K0(C(S)) = C(S, Z)``."""


# --------------------------------------------------------------------------
# stage maps


def pushforward(ind: InducedSystem, f: IntFunction, inverse: bool = False) -> IntFunction:
    """``f o Phi^{-1}`` (or ``f o Phi`` with ``inverse``) on the induced slice."""
    if f.domain != ind.slice:
        raise SupportError("function must live on the induced slice")
    k = -1 if inverse else 1
    return IntFunction.from_level_sets(
        (ind.image(A, k), c) for c, A in f.level_sets().items()
    )


def connecting_iota(td: TowerDecomposition, f: IntFunction) -> IntFunction:
    """``iota(f)(y) = sum_{k=0}^{j} f(Phi_n^k y)`` for ``y`` in a base of height ``j``."""
    if f.domain != td.outer:
        raise SupportError("function must live on the outer slice")
    levels = [(A, c) for c, A in f.level_sets().items() if c]
    pieces = []
    for j, k, F in td.all_floors():
        for A, c in levels:
            part = A & F
            if not part.is_empty():
                pieces.append((td.ind.image(part, -k), c))
    return IntFunction.from_pieces(td.inner, pieces)


def connecting_iota_multi(chain: SliceChain, n: int, m: int, f: IntFunction) -> IntFunction:
    """``iota_{n,m} = iota_{m-1} o ... o iota_n``."""
    for i in range(n, m):
        f = connecting_iota(chain.towers[i], f)
    return f


def eta(td: TowerDecomposition, m: int) -> IntFunction:
    return IntFunction.constant(td.top_preimage, m)


def _on_top_preimage(td: TowerDecomposition, f: IntFunction) -> IntFunction:
    E = td.top_preimage
    if f.domain == E:
        return f
    if f.domain == td.outer:
        if not f.support().issubset(E):
            raise SupportError("function is not supported in Phi_n^{-1}(S_{n+1})")
        return f.restrict(E)
    raise SupportError("function must live on Phi_n^{-1}(S_{n+1})")


def beta_of_extension(td: TowerDecomposition, g: IntFunction) -> IntFunction:
    """``iota(g) - iota(Phi_* g)`` for any ``g`` on the outer slice."""
    return connecting_iota(td, g) - connecting_iota(td, pushforward(td.ind, g))


def beta(td: TowerDecomposition, f: IntFunction) -> IntFunction:
    """The class in ``K0(D_{n+1}) = C(S_{n+1}, Z)``, using the zero extension."""
    f = _on_top_preimage(td, f)
    return beta_of_extension(td, f.extend_by_zero(td.outer))


def delta(td: TowerDecomposition, td_next: TowerDecomposition, f: IntFunction) -> IntFunction:
    """``g(z) = f(t_n z)`` on ``Phi_{n+1}^{-1}(S_{n+2})``."""
    f = _on_top_preimage(td, f)
    E_next = td_next.top_preimage
    levels = [(A, c) for c, A in f.level_sets().items()]
    pieces = []
    for j in td.heights:
        top = td.floor(j, j)
        for A, c in levels:
            part = A & top
            if part.is_empty():
                continue
            back = td.ind.image(part, -j) & E_next
            if not back.is_empty():
                pieces.append((back, c))
    return IntFunction.from_level_sets(pieces)


# --------------------------------------------------------------------------
# crossed-product K0 on a finite partition


def stage_window(system, depth: int, covers=()) -> tuple[int, int]:
    """Window of ``depth`` coordinates (anchored at 0 for odometers, centred
    for subshifts), widened to contain every cover set's window."""
    if isinstance(system, Odometer):
        lo, hi = 0, depth
    else:
        lo, hi = -(depth // 2), depth - depth // 2
    for A in covers:
        if not A.is_empty():
            lo, hi = min(lo, A.lo), max(hi, A.hi)
    return lo, hi


@dataclass
class K0Stage:
    """``Z^atoms / im(R)`` with an optional trace (atom -> measure)."""

    label: str
    system: object
    lo: int
    hi: int
    atoms: list[str]
    relations: list[list[int]]
    trace: list | None = None

    @cached_property
    def index(self) -> dict[str, int]:
        return {a: i for i, a in enumerate(self.atoms)}

    @property
    def rank(self) -> int:
        return len(self.atoms)

    @cached_property
    def matrix(self) -> list[list[int]]:
        return columns_to_matrix(self.relations, self.rank)

    @cached_property
    def snf(self):
        return smith_normal_form(self.matrix, ncols=len(self.relations))

    def invariant_factors(self) -> list[int]:
        d = self.snf.diagonal
        return d + [0] * (self.rank - len(d))

    def cokernel(self) -> tuple[int, list[int]]:
        return self.snf.cokernel()

    def vector(self, f: IntFunction) -> list[int]:
        return f.vector(self.atoms, self.lo, self.hi)

    def cls(self, v) -> "K0Class":
        if isinstance(v, IntFunction):
            v = self.vector(v)
        if len(v) != self.rank:
            raise ValueError("vector length does not match the stage")
        return K0Class(self, list(v))

    def atom_class(self, i: int) -> "K0Class":
        return K0Class(self, [int(k == i) for k in range(self.rank)])

    def trace_of(self, v):
        if self.trace is None:
            raise ValueError("stage carries no trace")
        zero = Fraction(0) if isinstance(self.trace[0], Fraction) else 0.0
        return sum((c * t for c, t in zip(v, self.trace) if c), zero)

    def refinement_matrix(self, finer: "K0Stage") -> list[list[int]]:
        """Columns: each atom split into the finer stage's atoms."""
        if finer.lo > self.lo or finer.hi < self.hi:
            raise ValueError("target stage is not finer")
        cols = []
        for a in self.atoms:
            col = [0] * finer.rank
            for w in self.system.extend([a], self.lo, self.hi, finer.lo, finer.hi):
                col[finer.index[w]] = 1
            cols.append(col)
        return cols

    def refinement_descends(self, finer: "K0Stage") -> bool:
        cols = self.refinement_matrix(finer)
        for r in self.relations:
            img = [sum(c[i] * x for c, x in zip(cols, r) if x) for i in range(finer.rank)]
            if not finer.snf.in_image(img):
                return False
        return True

    def to_json(self) -> dict:
        free, torsion = self.cokernel()
        return {
            "label": self.label,
            "offset": self.lo,
            "depth": self.hi - self.lo,
            "atoms": len(self.atoms),
            "relations": len(self.relations),
            "invariant_factors": self.invariant_factors(),
            "cokernel": {"free_rank": free, "torsion": torsion},
        }


@dataclass
class K0Class:
    stage: K0Stage
    vec: list[int]

    def __add__(self, other):
        return K0Class(self.stage, [a + b for a, b in zip(self.vec, other.vec)])

    def __sub__(self, other):
        return K0Class(self.stage, [a - b for a, b in zip(self.vec, other.vec)])

    def __rmul__(self, k: int):
        return K0Class(self.stage, [k * a for a in self.vec])

    def is_zero(self) -> bool:
        return self.stage.snf.in_image(self.vec)

    def __eq__(self, other):
        if not isinstance(other, K0Class):
            return NotImplemented
        if other.stage is not self.stage:
            raise ValueError("classes live in different stages")
        return (self - other).is_zero()

    __hash__ = None

    def trace(self):
        return self.stage.trace_of(self.vec)


def crossed_product_k0(sys, window: tuple[int, int] | int, mu: InvariantMeasure | None = None,
                       label: str = "") -> K0Stage:
    """``coker(id - Phi_*)`` restricted to functions constant on the atoms of ``window``.

    The relations are ``chi_A - chi_{Phi(A)}`` for the minimal sets ``A``
    that are unions of atoms and whose image is again a union of atoms: the
    connected pieces of the meet of the atom partition with its preimage.
    ``sys`` is a base system or an induced system; an int window means a depth.
    """
    U = sys.universe
    base = U.system
    if isinstance(window, int):
        window = stage_window(base, window, [U])
    lo, hi = window
    atoms = sorted(U.refine(lo, hi).words)
    index = {a: i for i, a in enumerate(atoms)}
    pre = [sys.image(ClopenSet(base, lo, hi, [a], _trusted=True), -1) for a in atoms]
    mlo = min([lo] + [P.lo for P in pre])
    mhi = max([hi] + [P.hi for P in pre])
    pre_of: dict[str, int] = {}
    for j, P in enumerate(pre):
        for w in P.refine(mlo, mhi).words:
            pre_of[w] = j
    m = len(atoms)
    parent = list(range(2 * m))  # atoms 0..m-1, preimages m..2m-1

    def find(x):
        while parent[x] != x:
            parent[x] = parent[parent[x]]
            x = parent[x]
        return x

    for w, j in pre_of.items():
        i = index[w[lo - mlo: hi - mlo]]
        a, b = find(i), find(m + j)
        if a != b:
            parent[a] = b
    comps: dict[int, list[int]] = {}
    for x in range(2 * m):
        comps.setdefault(find(x), []).append(x)
    relations = []
    for members in sorted(comps.values()):
        v = [0] * m
        for x in members:
            if x < m:
                v[x] += 1
            else:
                v[x - m] -= 1
        if any(v):
            relations.append(v)
    trace = None
    if mu is not None:
        total = measure(mu, U)
        trace = [measure(mu, ClopenSet(base, lo, hi, [a], _trusted=True)) / total for a in atoms]
    return K0Stage(label, base, lo, hi, atoms, relations, trace)


def gamma_tilde(stage: K0Stage, f: IntFunction) -> K0Class:
    """Class of the zero extension of ``f`` to the stage's slice."""
    return stage.cls(f)


def odometer_limit_value(stage: K0Stage, v: list[int]) -> Fraction:
    """Image in ``Z[1/b]`` (the trace, ``[X] -> 1``) of a class of the full odometer."""
    if not isinstance(stage.system, Odometer) or stage.lo != 0:
        raise ValueError("closed form is available for odometer stages only")
    return Fraction(sum(v), stage.system.modulus(stage.hi))


# --------------------------------------------------------------------------
# stage-wise checks


@dataclass
class ExactRowReport:
    stage: int
    eta_injective: bool = False
    eta_in_ker_beta: bool = False
    beta_in_ker_gamma: bool = False
    ker_gamma_saturation_equal: bool = False
    gamma_surjective: bool = False
    ker_gamma_lattice_equal: bool = False
    atoms_domain: int = 0
    atoms_stage: int = 0
    atoms_target: int = 0
    rank_beta: int = 0
    rank_ker_gamma: int = 0
    target_invariant_factors: list = field(default_factory=list)
    error: str | None = None

    @property
    def ok(self) -> bool:
        return self.error is None and all((
            self.eta_injective, self.eta_in_ker_beta, self.beta_in_ker_gamma,
            self.ker_gamma_saturation_equal, self.gamma_surjective))

    def to_json(self) -> dict:
        d = asdict(self)
        d["ok"] = self.ok
        return d


def _rank(cols: list[list[int]], dim: int) -> int:
    if not cols:
        return 0
    return smith_normal_form(columns_to_matrix(cols, dim), ncols=len(cols)).rank


def _apply(cols: list[list[int]], v: list[int], dim: int) -> list[int]:
    out = [0] * dim
    for c, x in zip(cols, v):
        if x:
            for r, y in enumerate(c):
                if y:
                    out[r] += x * y
    return out


def _gamma_snf(G: list[list[int]], target: K0Stage):
    cols = G + target.relations
    return smith_normal_form(columns_to_matrix(cols, target.rank), ncols=len(cols))


def _kernel_of_gamma(G: list[list[int]], snf) -> list[list[int]]:
    """Generators of ``{v : G v in im R}``: project the kernel of ``[G | R]``."""
    ms = len(G)
    return [k[:ms] for k in snf.kernel_basis() if any(k[:ms])]


def _onto(snf, dim: int) -> bool:
    return snf.rank == dim and all(d == 1 for d in snf.diagonal[: snf.rank])


def verify_exact_row(chain: SliceChain, n: int, depth: int, target_depth: int | None = None,
                     mu: InvariantMeasure | None = None) -> ExactRowReport:
    """Exactness of ``Z -> C(E_n, Z) -> C(S_{n+1}, Z) -> K0`` at finite depth.

    ``E_n = Phi_n^{-1}(S_{n+1})`` is cut into the atoms of a ``depth`` window;
    the crossed-product target uses ``target_depth`` (by default wide enough to
    hold every function that appears).
    """
    rep = ExactRowReport(stage=n)
    td = chain.towers[n]
    sysm = chain.system
    E, S1 = td.top_preimage, chain.slices[n + 1]
    lo, hi = stage_window(sysm, depth, [E])
    atoms_E = sorted(E.refine(lo, hi).words)
    rep.atoms_domain = len(atoms_E)

    # eta: Z -> Z^{atoms_E}, v = (1, ..., 1)
    rep.eta_injective = len(atoms_E) > 0

    betas = [beta(td, IntFunction(sysm, lo, hi, {a: int(a == w) for a in atoms_E}))
             for w in atoms_E]
    covers = [S1] + [ClopenSet(sysm, b.lo, b.hi, b.values, _trusted=True) for b in betas]
    slo, shi = stage_window(sysm, depth, covers)
    atoms_S = sorted(S1.refine(slo, shi).words)
    rep.atoms_stage = len(atoms_S)
    B = [b.vector(atoms_S, slo, shi) for b in betas]
    rep.eta_in_ker_beta = all(sum(B[i][r] for i in range(len(B))) == 0 for r in range(len(atoms_S)))

    tdepth = target_depth if target_depth is not None else depth
    tlo, thi = stage_window(sysm, tdepth, [ClopenSet(sysm, slo, shi, atoms_S, _trusted=True)])
    target = crossed_product_k0(chain.induced[0], (tlo, thi), mu, label="S_0")
    rep.atoms_target = target.rank
    rep.target_invariant_factors = target.invariant_factors()
    G = [target.vector(IntFunction(sysm, slo, shi, {a: int(a == s) for a in atoms_S}))
         for s in atoms_S]

    rep.beta_in_ker_gamma = all(target.snf.in_image(_apply(G, b, target.rank)) for b in B)
    gsnf = _gamma_snf(G, target)
    K = _kernel_of_gamma(G, gsnf)
    dim = len(atoms_S)
    rep.rank_beta = _rank(B, dim)
    rep.rank_ker_gamma = _rank(K, dim)
    rep.ker_gamma_saturation_equal = (
        rep.beta_in_ker_gamma and rep.rank_beta == rep.rank_ker_gamma
    )
    rep.ker_gamma_lattice_equal = rep.ker_gamma_saturation_equal and lattice_contains(B, K, dim)
    rep.gamma_surjective = _onto(gsnf, target.rank)
    return rep


def verify_exact_rows(system, slices: list[ClopenSet], depth: int | None = None,
                      depth_offset: int = 3) -> list[ExactRowReport]:
    """One report per stage; a chain that cannot be built yields an error report."""
    try:
        chain = build_chain(system, slices)
    except DisjointnessError as exc:
        return [ExactRowReport(stage=0, error=f"disjointness hypothesis violated: {exc}")]
    out = []
    for n in range(len(chain.towers)):
        d = depth if depth is not None else n + depth_offset
        out.append(verify_exact_row(chain, n, d))
    return out


# --------------------------------------------------------------------------
# ordered direct limit against the crossed product


@dataclass
class OrderStageReport:
    stage: int
    atoms: int
    limit_steps: int
    kernel_match: bool
    gamma_surjective: bool
    multiplier: int | None
    model_match: bool | None
    positivity_samples: int
    positivity_mismatches: int
    positivity_undecided: int
    delta_max_steps: int | None
    delta_stabilized: bool


@dataclass
class OrderIsoReport:
    """Per-stage results.  Samples whose truncated image is still of mixed
    sign while the trace is positive are counted as undecided, not failed:
    they turn positive only at stages beyond the chain."""

    system: str
    depth: int
    stages: list[OrderStageReport]

    @property
    def ok(self) -> bool:
        return all(
            s.kernel_match and s.gamma_surjective and s.model_match is not False
            and s.positivity_mismatches == 0
            and s.delta_stabilized
            for s in self.stages
        )

    def to_json(self) -> dict:
        return {"system": self.system, "depth": self.depth, "ok": self.ok,
                "stages": [asdict(s) for s in self.stages]}


def _sign_class(vec: list[int]) -> str:
    if all(x == 0 for x in vec):
        return "zero"
    if all(x >= 0 for x in vec):
        return "positive"
    return "mixed"


def delta_stabilization(chain: SliceChain, n: int, f: IntFunction) -> int | None:
    """Number of ``delta`` steps until ``f`` is constant, or None within the chain."""
    steps = 0
    while f.constant_value() is None:
        if n + steps + 1 >= len(chain.towers):
            return None
        f = delta(chain.towers[n + steps], chain.towers[n + steps + 1], f)
        steps += 1
    return steps


def order_iso_check(chain: SliceChain, depth: int, samples: int = 20, seed: int = 0,
                    delta_budget: int = 3, mu: InvariantMeasure | None = None) -> OrderIsoReport:
    """Compare the truncated limit of ``(C(S_n, Z), iota_n)`` with ``K0`` of the crossed product.

    For each stage ``n`` (with at least one tower above it):

    * kernels of ``iota_{n,N}`` and of ``gamma_n`` agree as lattices, and
      ``gamma_n`` is onto the target cokernel;
    * for odometers, the limit value (stabilised constant times the measure of
      ``S_N``) matches the closed form ``Z[1/b]``;
    * random vectors are in the direct-limit positive cone exactly when their
      trace is positive;
    * random functions on ``Phi_n^{-1}(S_{n+1})`` at one extra coordinate of
      depth become constant under ``delta`` within ``delta_budget`` steps.
    """
    rng = random.Random(seed)
    sysm = chain.system
    mu = mu or InvariantMeasure(sysm)
    exact = mu.exact
    N = len(chain.towers)
    if isinstance(sysm, Odometer) and depth > N:
        # functions of coordinates below S_N never become constant within the chain
        raise ValueError(f"depth {depth} exceeds the {N} stages of the chain")
    covers = list(chain.slices)
    tlo, thi = stage_window(sysm, depth, covers)
    target = crossed_product_k0(chain.induced[0], (tlo, thi), mu, label="S_0")
    out = []
    for n in range(N):
        S = chain.slices[n]
        atoms = sorted(S.refine(tlo, thi).words)
        m = len(atoms)
        basis = [IntFunction(sysm, tlo, thi, {a: int(a == w) for a in atoms}) for w in atoms]
        limits = [connecting_iota_multi(chain, n, N, f) for f in basis]
        SN = chain.slices[N]
        llo = min([SN.lo] + [g.lo for g in limits])
        lhi = max([SN.hi] + [g.hi for g in limits])
        atoms_N = sorted(SN.refine(llo, lhi).words)
        L = [g.vector(atoms_N, llo, lhi) for g in limits]
        G = [target.vector(f) for f in basis]
        gsnf = _gamma_snf(G, target)
        ker_gamma = _kernel_of_gamma(G, gsnf)
        ker_iota = smith_normal_form(columns_to_matrix(L, len(atoms_N)), ncols=m).kernel_basis()
        # both kernels are pure sublattices, so containment plus equal rank is equality
        kernel_match = len(ker_iota) == _rank(ker_gamma, m) and all(
            target.snf.in_image(_apply(G, k, target.rank)) for k in ker_iota)
        surj = _onto(gsnf, target.rank)
        gtrace = [target.trace_of(g) for g in G]

        one = connecting_iota(chain.towers[n], IntFunction.constant(S, 1))
        multiplier = one.constant_value()

        def lim_vec(v):
            return _apply(L, v, len(atoms_N))

        model_match = None
        if isinstance(sysm, Odometer):
            muN = measure(mu, SN)
            model_match = True
            for i in range(m):
                c = set(L[i])
                if len(c) != 1:
                    model_match = False
                    break
                val = c.pop() * muN
                if val != odometer_limit_value(target, G[i]):
                    model_match = False
                    break

        mism = undecided = 0
        vecs = [[int(i == k) for i in range(m)] for k in range(m)]
        vecs += [[rng.randint(-3, 3) for _ in range(m)] for _ in range(samples)]
        for v in vecs:
            sign = _sign_class(lim_vec(v))
            t = sum(gtrace[i] * v[i] for i in range(m) if v[i])
            if exact:
                tpos, tzero = t > 0, t == 0
            else:
                tpos, tzero = t > 1e-9, abs(t) <= 1e-9
            if sign == "mixed":
                if tpos:
                    undecided += 1
                continue
            if (sign == "positive") != tpos or (sign == "zero") != tzero:
                mism += 1

        dmax, stabilized = None, True
        if n + 1 < N:
            td = chain.towers[n]
            E = td.top_preimage
            elo, ehi = stage_window(sysm, 0, [E])
            elo, ehi = (elo, ehi + 1) if isinstance(sysm, Odometer) else (elo - 1, ehi)
            trials = [IntFunction.constant(E, 1)]
            trials += [IntFunction.random(E, elo, ehi, rng) for _ in range(samples)]
            dmax = 0
            for f in trials:
                s = delta_stabilization(chain, n, f)
                if s is None or s > delta_budget:
                    stabilized = False
                    dmax = None
                    break
                dmax = max(dmax, s)

        out.append(OrderStageReport(
            stage=n, atoms=m, limit_steps=N - n, kernel_match=kernel_match,
            gamma_surjective=surj, multiplier=multiplier, model_match=model_match,
            positivity_samples=len(vecs), positivity_mismatches=mism,
            positivity_undecided=undecided, delta_max_steps=dmax, delta_stabilized=stabilized,
        ))
    return OrderIsoReport(sysm.descriptor, depth, out)
