"""Grid realisation of the kernel picture of the stage algebras.

An element ``f`` of the stage-``n`` algebra is sampled as
``values[a, m, i] = f(s_m)(x)`` where ``x`` sits at fiber coordinate ``u_i``
over base atom ``a`` of ``S_n`` (``x = phi_{t_a u_i}(y)``, ``t_a`` the return
time of the atom).  Kernels are stored as operator matrices
``mats[a, i, k] = K(y_a, s=u_k, t=u_i)`` so that composition is a matrix
product against the quadrature weights and the adjoint is the conjugate
transpose.

Both grids are cell-centred: ``u_i = (i + 1/2) / N`` on ``(0, 1)`` and
``s_m`` on ``[-L, L]`` with the same spacing.  Off-grid values come from
linear interpolation, so every identity holds up to ``O(h^2)``.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from fractions import Fraction
from math import factorial

import numpy as np

from . import config
from .cantor import ClopenSet, InvariantMeasure, measure
from .rokhlin import TowerDecomposition
from .suspension import Suspension, arrive_times


class MaskError(ValueError):
    """Values are nonzero where the stage algebra forces zero."""


class GridMismatchError(ValueError):
    pass


@dataclass(frozen=True)
class FiberGrid:
    N: int

    @property
    def h(self) -> float:
        return 1.0 / self.N

    @property
    def nodes(self) -> np.ndarray:
        return (np.arange(self.N) + 0.5) / self.N

    @property
    def weights(self) -> np.ndarray:
        return np.full(self.N, 1.0 / self.N)


@dataclass
class StageGeometry:
    """Atoms of ``S_n`` with their return times and the stage-0 segments
    ``(start, length, atom0)`` their fibers run through."""

    stage: int
    atoms: list[ClopenSet]
    times: np.ndarray
    weights: np.ndarray
    segments: list[list[tuple[float, float, int]]]
    blocks: list[list[tuple[float, int]]] = field(default_factory=list)

    @property
    def L(self) -> float:
        return float(self.times.max())

    @property
    def mu_prime(self) -> float:
        return float(np.dot(self.weights, self.times))

    def s_grid(self, grid: FiberGrid) -> np.ndarray:
        M = int(round(2 * self.L * grid.N))
        return -self.L + (np.arange(M) + 0.5) * grid.h

    def mask(self, grid: FiberGrid) -> np.ndarray:
        """True where the algebra allows a nonzero value: ``-t(1-u) < s < t u``."""
        s = self.s_grid(grid)[None, :, None]
        u = grid.nodes[None, None, :]
        t = self.times[:, None, None]
        return (s < t * u) & (s > -t * (1 - u))


def base_geometry(susp: Suspension, depth: int, mu: InvariantMeasure | None = None) -> StageGeometry:
    """Stage 0: the base cut into the cylinders of ``depth`` (and of the roof)."""
    sys = susp.system
    mu = mu or InvariantMeasure(sys)
    roof = susp.roof
    lo, hi = min(roof.lo, 0), max(roof.hi, depth)
    words = sorted(sys.universe.refine(lo, hi).words)
    atoms = [ClopenSet(sys, lo, hi, [w], _trusted=True) for w in words]
    r = roof.refine(lo, hi)
    times = np.array([float(r.values[w]) for w in words])
    weights = np.array([float(measure(mu, A)) for A in atoms])
    segments = [[(0.0, t, a)] for a, t in enumerate(times)]
    return StageGeometry(0, atoms, times, weights, segments)


def next_geometry(geom: StageGeometry, susp: Suspension, td: TowerDecomposition,
                  mu: InvariantMeasure | None = None) -> StageGeometry:
    """Stage ``n + 1``: each tower base cut so that every floor sits in one stage-``n`` atom."""
    mu = mu or InvariantMeasure(susp.system)
    ind = td.ind
    atoms, times, weights, segments, blocks = [], [], [], [], []
    for j in td.heights:
        pieces = [(td.base(j), [])]
        for k in range(j + 1):
            nxt = []
            for P, path in pieces:
                img = ind.image(P, k)
                for b, A in enumerate(geom.atoms):
                    part = img & A
                    if not part.is_empty():
                        nxt.append((ind.image(part, -k), path + [b]))
            pieces = nxt
        for P, path in pieces:
            start, blk, segs = 0.0, [], []
            for b in path:
                blk.append((start, b))
                segs += [(start + s0, ln, a0) for s0, ln, a0 in geom.segments[b]]
                start += geom.times[b]
            atoms.append(P)
            times.append(start)
            weights.append(float(measure(mu, P)))
            segments.append(segs)
            blocks.append(blk)
    _check_arrive_times(susp, td, atoms, blocks)
    return StageGeometry(geom.stage + 1, atoms, np.array(times), np.array(weights), segments, blocks)


def _check_arrive_times(susp, td, atoms, blocks):
    """Block start times must agree with the exact arrive times."""
    arr = arrive_times(susp, td)
    for P, blk in zip(atoms, blocks):
        j = len(blk) - 1
        for k, (start, _b) in enumerate(blk):
            f = arr[(j, k)].restrict(P)
            vals = set(f.values.values())
            if len(vals) != 1 or abs(float(vals.pop()) - start) > 1e-12:
                raise AssertionError("block start disagrees with arrive time")


# --------------------------------------------------------------------------
# elements and kernel fields


@dataclass
class DiscreteCrossedElement:
    geom: StageGeometry
    grid: FiberGrid
    values: np.ndarray  # (atoms, M_s, N)

    def check_mask(self, tol: float = 0.0) -> bool:
        off = ~self.geom.mask(self.grid)
        return bool(np.all(np.abs(self.values[off]) <= tol))


@dataclass
class KernelField:
    geom: StageGeometry
    grid: FiberGrid
    mats: np.ndarray  # (atoms, N, N): mats[a, i, k] = K(y_a, s=u_k, t=u_i)

    def compose(self, other: "KernelField") -> "KernelField":
        _same(self, other)
        return KernelField(self.geom, self.grid, self.mats @ other.mats * self.grid.h)

    def adjoint(self) -> "KernelField":
        return KernelField(self.geom, self.grid, np.conj(np.swapaxes(self.mats, 1, 2)))

    def boundary_max(self) -> float:
        m = self.mats
        return float(max(np.abs(m[:, 0, :]).max(), np.abs(m[:, -1, :]).max(),
                         np.abs(m[:, :, 0]).max(), np.abs(m[:, :, -1]).max()))


def _same(a, b):
    if a.grid != b.grid or a.geom is not b.geom:
        raise GridMismatchError("operands live on different grids or stages")


def zero_element(geom: StageGeometry, grid: FiberGrid) -> DiscreteCrossedElement:
    M = len(geom.s_grid(grid))
    return DiscreteCrossedElement(geom, grid, np.zeros((len(geom.atoms), M, grid.N), complex))


def sample_element(geom: StageGeometry, grid: FiberGrid, func) -> DiscreteCrossedElement:
    """Sample ``func(s, atom0, u0)`` (vectorised in ``s`` and ``u0``), where
    ``(atom0, u0)`` are the stage-0 coordinates of the fiber point."""
    s = geom.s_grid(grid)
    u = grid.nodes
    out = np.zeros((len(geom.atoms), len(s), grid.N), complex)
    for a, t in enumerate(geom.times):
        T = t * u
        for start, ln, a0 in geom.segments[a]:
            sel = (T >= start) & (T < start + ln)
            if sel.any():
                u0 = (T[sel] - start) / ln
                out[a][:, sel] = func(s[:, None], a0, u0[None, :])
    return DiscreteCrossedElement(geom, grid, out)


def _lerp(table: np.ndarray, pos: np.ndarray, cols: np.ndarray) -> np.ndarray:
    """``table[pos, cols]`` with linear interpolation in the fractional row
    index ``pos``; zero outside the table."""
    M = table.shape[0]
    i0 = np.floor(pos).astype(int)
    fr = pos - i0
    ok0 = (i0 >= 0) & (i0 < M)
    ok1 = (i0 + 1 >= 0) & (i0 + 1 < M)
    v0 = np.where(ok0, table[np.clip(i0, 0, M - 1), cols], 0)
    v1 = np.where(ok1, table[np.clip(i0 + 1, 0, M - 1), cols], 0)
    return (1 - fr) * v0 + fr * v1


def _bilerp(mat: np.ndarray, r: np.ndarray, c: np.ndarray) -> np.ndarray:
    """``mat`` at fractional (row, column) positions, zero outside."""
    n0, n1 = mat.shape
    r0, c0 = np.floor(r).astype(int), np.floor(c).astype(int)
    fr, fc = r - r0, c - c0
    out = 0
    for dr, wr in ((0, 1 - fr), (1, fr)):
        for dc, wc in ((0, 1 - fc), (1, fc)):
            rr, cc = r0 + dr, c0 + dc
            ok = (rr >= 0) & (rr < n0) & (cc >= 0) & (cc < n1)
            out = out + wr * wc * np.where(ok, mat[np.clip(rr, 0, n0 - 1), np.clip(cc, 0, n1 - 1)], 0)
    return out


def _s_pos(geom: StageGeometry, grid: FiberGrid, s) -> np.ndarray:
    return (np.asarray(s) + geom.L) / grid.h - 0.5


def _u_pos(grid: FiberGrid, u) -> np.ndarray:
    return np.asarray(u) * grid.N - 0.5


# --------------------------------------------------------------------------
# algebra operations


def convolve(f: DiscreteCrossedElement, g: DiscreteCrossedElement) -> DiscreteCrossedElement:
    """``(f * g)(s)(x) = int f(r)(x) g(s - r)(phi_{-r} x) dr``.

    The ``r`` integral runs over the s-grid itself; ``g`` is read off by
    bilinear interpolation in ``(s, u)``.  Over atom ``a`` the point
    ``phi_{-r} x`` stays in the same fiber wherever ``f(r)(x)`` is nonzero,
    at coordinate ``u - r / t_a``.
    """
    _same(f, g)
    geom, grid = f.geom, f.grid
    u = grid.nodes
    s = geom.s_grid(grid)
    S = np.broadcast_to(_s_pos(geom, grid, s)[:, None], (len(s), grid.N))
    out = np.zeros_like(f.values)
    for a, t in enumerate(geom.times):
        fa, ga = f.values[a], g.values[a]
        for r, sr in enumerate(s):
            fr = fa[r]
            if not fr.any():
                continue
            shifted = _bilerp(ga, S - sr / grid.h, np.broadcast_to(_u_pos(grid, u - sr / t), S.shape))
            out[a] += grid.h * fr[None, :] * shifted
    out *= geom.mask(grid)
    return DiscreteCrossedElement(geom, grid, out)


def involution(f: DiscreteCrossedElement) -> DiscreteCrossedElement:
    """``f*(s)(x) = conj f(-s)(phi_{-s} x)``."""
    geom, grid = f.geom, f.grid
    s = geom.s_grid(grid)
    u = grid.nodes
    out = np.zeros_like(f.values)
    S, I = np.meshgrid(np.arange(len(s)), np.arange(grid.N), indexing="ij")
    for a, t in enumerate(geom.times):
        flipped = f.values[a][::-1].T  # rows: fiber index, cols: s index of -s
        pos = _u_pos(grid, u[I] - s[S] / t)
        out[a] = np.conj(_lerp(flipped, pos, S))
    out *= geom.mask(grid)
    return DiscreteCrossedElement(geom, grid, out)


def pi_n(f: DiscreteCrossedElement, mask_tol: float = 1e-12) -> KernelField:
    """``K(y, s, t) = t_y f(t_y (t - s))(phi_{t_y t} y)``."""
    if not f.check_mask(mask_tol):
        raise MaskError("element does not vanish where the stage algebra requires")
    geom, grid = f.geom, f.grid
    u = grid.nodes
    I, K = np.meshgrid(np.arange(grid.N), np.arange(grid.N), indexing="ij")
    mats = np.zeros((len(geom.atoms), grid.N, grid.N), complex)
    for a, t in enumerate(geom.times):
        mats[a] = t * _lerp(f.values[a], _s_pos(geom, grid, t * (u[I] - u[K])), I)
    return KernelField(geom, grid, mats)


def pi_n_inverse(Kf: KernelField) -> DiscreteCrossedElement:
    """``f(s)(phi_{t_y u} y) = K(y, u - s/t_y, u) / t_y``, zero off the allowed region."""
    geom, grid = Kf.geom, Kf.grid
    s = geom.s_grid(grid)
    u = grid.nodes
    S, I = np.meshgrid(np.arange(len(s)), np.arange(grid.N), indexing="ij")
    out = np.zeros((len(geom.atoms), len(s), grid.N), complex)
    for a, t in enumerate(geom.times):
        rows = Kf.mats[a].T  # rows indexed by input coordinate, cols by output
        out[a] = _lerp(rows, _u_pos(grid, u[I] - s[S] / t), I) / t
    out *= geom.mask(grid)
    return DiscreteCrossedElement(geom, grid, out)


def trace_tau_mu(f: DiscreteCrossedElement) -> complex:
    """``int f(0) dmu`` with ``mu = (mu'(X))^-1 (mu|S_n x Lebesgue)``."""
    geom, grid = f.geom, f.grid
    total = 0
    for a, t in enumerate(geom.times):
        f0 = _lerp(f.values[a], _s_pos(geom, grid, np.zeros(grid.N)), np.arange(grid.N))
        total += geom.weights[a] * t * np.dot(grid.weights, f0)
    return complex(total / geom.mu_prime)


def trace_field(Kf: KernelField) -> complex:
    """``(mu'(X))^-1 int Tr K_y dmu(y)``."""
    geom, grid = Kf.geom, Kf.grid
    tr = np.einsum("aii->a", Kf.mats) * grid.h
    return complex(np.dot(geom.weights, tr) / geom.mu_prime)


# --------------------------------------------------------------------------
# embedding into the next stage


def _block_coords(geom1: StageGeometry, geom0: StageGeometry, a1: int, grid: FiberGrid):
    """For each stage-(n+1) fiber node: block index, stage-n atom, and the
    stage-n fiber coordinate ``(tau_{n+1} u - tau^(k)) / tau_n``."""
    u = grid.nodes
    T1 = geom1.times[a1]
    blk = np.full(grid.N, -1)
    v = np.zeros(grid.N)
    for k, (start, b) in enumerate(geom1.blocks[a1]):
        tb = geom0.times[b]
        sel = (T1 * u >= start) & (T1 * u <= start + tb)
        blk[sel] = k
        v[sel] = (T1 * u[sel] - start) / tb
    return blk, v


def embed_kernels(Kf: KernelField, geom1: StageGeometry) -> KernelField:
    """Place the rescaled stage-``n`` kernels as diagonal blocks over each
    stage-``n+1`` atom, one block per floor of its tower."""
    geom0, grid = Kf.geom, Kf.grid
    if not geom1.blocks or geom1.stage != geom0.stage + 1:
        raise ValueError("target geometry carries no tower data for this stage")
    mats = np.zeros((len(geom1.atoms), grid.N, grid.N), complex)
    for a1, T1 in enumerate(geom1.times):
        blk, v = _block_coords(geom1, geom0, a1, grid)
        for k, (_start, b) in enumerate(geom1.blocks[a1]):
            idx = np.nonzero(blk == k)[0]
            if not len(idx):
                continue
            rho = T1 / geom0.times[b]
            R, C = np.meshgrid(idx, idx, indexing="ij")
            mats[a1][R, C] = rho * _bilerp(Kf.mats[b], _u_pos(grid, v[R]), _u_pos(grid, v[C]))
    return KernelField(geom1, grid, mats)


def isometry_errors(geom0: StageGeometry, geom1: StageGeometry, grid: FiberGrid, xi) -> tuple[float, float]:
    """``max |U* U xi - xi|`` over blocks for a smooth ``xi`` on ``(0, 1)``, and
    the largest inner product between ranges of different blocks."""
    u = grid.nodes
    x = xi(u)
    worst, cross = 0.0, 0.0
    for a1, T1 in enumerate(geom1.times):
        blk, v = _block_coords(geom1, geom0, a1, grid)
        images = []
        for k, (start, b) in enumerate(geom1.blocks[a1]):
            tb = geom0.times[b]
            Ux = np.where(blk == k, np.sqrt(T1 / tb) * np.interp(v, u, x, left=0, right=0), 0)
            back = np.sqrt(tb / T1) * np.interp((tb * u + start) / T1, u, Ux, left=0, right=0)
            worst = max(worst, float(np.abs(back - x).max()))
            images.append(Ux)
        for i in range(len(images)):
            for j in range(i + 1, len(images)):
                cross = max(cross, abs(float(np.dot(images[i], images[j]) * grid.h)))
    return worst, cross


# --------------------------------------------------------------------------
# the mapping-torus bump suite


def bump(center: float, radius: float):
    """``(1 - ((x - c)/r)^2)^3`` on ``|x - c| < r``: C^2 with compact support."""
    def f(x):
        z = (np.asarray(x) - center) / radius
        return np.where(np.abs(z) < 1, (1 - z * z) ** 3, 0.0)
    return f


def bump_square_integral(radius: float) -> float:
    """``int bump^2`` exactly: ``r * 2^13 (6!)^2 / 13!``."""
    return radius * float(Fraction(2 ** 13 * factorial(6) ** 2, factorial(13)))


@dataclass
class BumpSuite:
    """Separable test elements ``w(atom) b(s) c(u)`` on the dyadic mapping torus."""

    geom0: StageGeometry
    geom1: StageGeometry
    atom_weights: tuple = (1.0, 0.5)
    s_radius: float = 0.15
    u_center: float = 0.5
    u_radius: float = 0.25

    def func(self, amp: complex = 1.0, s_center: float = 0.0, u_center=None):
        b = bump(s_center, self.s_radius)
        c = bump(self.u_center if u_center is None else u_center, self.u_radius)
        w = self.atom_weights

        def f(s, a0, u0):
            return amp * w[a0] * b(s) * c(u0)
        return f

    def oracle_square_norm(self, amp: complex = 1.0) -> float:
        """``int int |g|^2`` for ``g = func(amp)`` in the normalised measure."""
        g = self.geom0
        w = np.array(self.atom_weights) ** 2
        base = float(np.dot(g.weights * g.times, w) / g.mu_prime)
        return abs(amp) ** 2 * base * bump_square_integral(self.s_radius) * bump_square_integral(self.u_radius)


def mapping_torus_suite(depth: int = 1):
    """Dyadic odometer with roof 1, ``S_0`` the whole base, ``S_1 = [0]``."""
    from .cantor import make_system
    from .rokhlin import build_chain
    from .suspension import parse_roof

    sys = make_system("odometer base=2")
    susp = Suspension(sys, parse_roof(sys, "1"))
    chain = build_chain(sys, [sys.universe, sys.cylinder("0")])
    g0 = base_geometry(susp, depth)
    g1 = next_geometry(g0, susp, chain.towers[0])
    return BumpSuite(g0, g1)


def random_kernel(geom: StageGeometry, grid: FiberGrid, rng: np.random.Generator, terms: int = 3) -> KernelField:
    """Sum of separable interior bumps with random centres and amplitudes."""
    u = grid.nodes
    mats = np.zeros((len(geom.atoms), grid.N, grid.N), complex)
    for a in range(len(geom.atoms)):
        for _ in range(terms):
            cs, ct = rng.uniform(0.35, 0.65, 2)
            rs, rt = rng.uniform(0.15, 0.25, 2)
            amp = complex(rng.normal(), rng.normal())
            mats[a] += amp * np.outer(bump(ct, rt)(u), bump(cs, rs)(u))
    return KernelField(geom, grid, mats)


def _max(x) -> float:
    return float(np.abs(x).max()) if np.size(x) else 0.0


def kernel_errors(N: int, suite: BumpSuite | None = None, seed: int = 0) -> dict[str, float]:
    """Max-entry errors of every identity at grid size ``N``."""
    suite = suite or mapping_torus_suite()
    grid = FiberGrid(N)
    g0, g1 = suite.geom0, suite.geom1
    f = sample_element(g0, grid, suite.func(1.0, 0.03))
    g = sample_element(g0, grid, suite.func(1 + 0.5j, -0.05, 0.45))
    Kf, Kg = pi_n(f), pi_n(g)

    hom = _max(pi_n(convolve(f, g)).mats - Kf.compose(Kg).mats)
    inv = _max(pi_n(involution(g)).mats - Kg.adjoint().mats)

    gg = convolve(g, involution(g))
    oracle = suite.oracle_square_norm(1 + 0.5j)
    t1, t2 = trace_tau_mu(gg), trace_field(pi_n(gg))
    trace = max(abs(t1 - oracle), abs(t2 - oracle))

    rng = np.random.default_rng(seed)
    Kr = random_kernel(g0, grid, rng)
    rt_kernel = _max(pi_n(pi_n_inverse(Kr)).mats - Kr.mats)
    rt_elem = _max(pi_n_inverse(Kg).values - g.values)

    f1 = sample_element(g1, grid, suite.func(1 + 0.5j, -0.05, 0.45))
    compat = _max(embed_kernels(Kg, g1).mats - pi_n(f1).mats)

    iso, cross = isometry_errors(g0, g1, grid, bump(0.5, 0.25))
    return {
        "homomorphism": hom,
        "involution": inv,
        "trace": trace,
        "round_trip": max(rt_kernel, rt_elem),
        "compatibility": compat,
        "isometry": iso,
        "range_overlap": cross,
        "boundary": max(Kf.boundary_max(), Kg.boundary_max()),
    }


CHECKED = ("homomorphism", "involution", "trace", "round_trip", "compatibility", "isometry")


def kernel_check(N: int = 64, N_fine: int | None = None, C: float | None = None, seed: int = 0) -> dict:
    """Errors at ``N`` against the calibrated ``C h`` bound, and the ratio to
    a run at ``N_fine`` (default ``2N``)."""
    C = config.KERNEL_TOLERANCE_C if C is None else C
    N_fine = N_fine or 2 * N
    suite = mapping_torus_suite()
    coarse = kernel_errors(N, suite, seed)
    fine = kernel_errors(N_fine, suite, seed)
    tol = C / N
    checks = {}
    for name in CHECKED:
        ratio = fine[name] / coarse[name] if coarse[name] > 0 else 0.0
        checks[name] = {
            "error": coarse[name],
            "error_fine": fine[name],
            "tolerance": tol,
            "ratio": ratio,
            "below_tolerance": coarse[name] <= tol,
            "converging": ratio <= config.KERNEL_RATIO_MAX,
        }
    exact = coarse["range_overlap"] == 0.0 and coarse["boundary"] <= config.MASK_TOL
    ok = exact and all(c["below_tolerance"] and c["converging"] for c in checks.values())
    return {"grid": N, "grid_fine": N_fine, "C": C, "checks": checks,
            "range_overlap": coarse["range_overlap"], "boundary": coarse["boundary"], "ok": ok}
