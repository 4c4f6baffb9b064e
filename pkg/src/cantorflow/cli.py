"""``cantorflow`` command-line driver.

Every command prints a schema-versioned report and exits 0 exactly when all
of its checks hold.  Reports contain no timings, so a fixed config and seed
give byte-identical output.
"""
from __future__ import annotations

import argparse
import json
import random
import sys
from fractions import Fraction

from . import __version__
from .bratteli import SplitFloorError, bratteli_diagram, write_atomic
from .cantor import ClopenSet, InvariantMeasure, Odometer, PointCode, make_system, measure
from .rokhlin import auto_nest, build_chain

SCHEMA = "cantorflow.report/1"


class ConfigError(ValueError):
    pass


# --------------------------------------------------------------------------
# config parsing


def parse_slices(system, text: str) -> list[ClopenSet]:
    """``w1,w2,...``; a dot marks coordinate 0 in two-sided words (``ab.a``).
    The whole space is prepended as ``S_0``."""
    out = [system.universe]
    for tok in filter(None, (t.strip() for t in text.split(","))):
        left, dot, right = tok.partition(".")
        if dot:
            if isinstance(system, Odometer) and left:
                raise ConfigError("odometer cylinders start at coordinate 0")
            out.append(system.cylinder(left + right, -len(left)))
        else:
            out.append(system.cylinder(tok, 0))
    return out


def default_point(system):
    if isinstance(system, Odometer):
        return PointCode("", "0")
    for pair in sorted(system.language(2)):
        try:
            return system.fixed_point(pair[0], pair[1])
        except ValueError:
            continue
    raise ConfigError("no fixed point found for the substitution")


def resolve_slices(system, args) -> list[ClopenSet]:
    if args.slices:
        return parse_slices(system, args.slices)
    count = args.auto_nest or args.stages
    if not count:
        raise ConfigError("give --slices or --auto-nest/--stages")
    if isinstance(system, Odometer):
        return [system.universe] + [system.cylinder("0" * k, 0) for k in range(1, count + 1)]
    return auto_nest(system, default_point(system), count)


def _json_clopen(A: ClopenSet) -> dict:
    return {"lo": A.lo, "hi": A.hi, "words": sorted(A.words)}


# --------------------------------------------------------------------------
# commands: each returns (results, checks)


def cmd_system(args):
    system = make_system(args.system)
    mu = InvariantMeasure(system)
    d = args.depth or 2
    words = sorted(system.universe.refine(0, d).words)
    masses = {w: measure(mu, system.cylinder(w)) for w in words}
    total = sum(masses.values())
    exact_total = total == 1 if mu.exact else abs(total - 1) <= 4 * mu.eps
    res = {"system": system.to_json(), "depth": d, "cylinders": len(masses),
           "measure": {w: str(m) for w, m in masses.items()},
           "measure_exact": mu.exact}
    return res, {"measure_total": bool(exact_total)}


def _chain(args):
    system = make_system(args.system)
    slices = resolve_slices(system, args)
    return system, build_chain(system, slices)


def cmd_towers(args):
    system, chain = _chain(args)
    mu = InvariantMeasure(system)
    stages, checks = [], {}
    for n, td in enumerate(chain.towers):
        kac, target = td.kac_sum(mu)
        kac_ok = kac == target if mu.exact else abs(kac - target) <= 4 * mu.eps
        checks[f"stage{n}.partition"] = td.check_partition()
        checks[f"stage{n}.kac"] = bool(kac_ok)
        stages.append(td.to_json())
    res = {"system": system.to_json(), "slices": [_json_clopen(S) for S in chain.slices],
           "heights": [list(td.heights) for td in chain.towers], "stages": stages}
    return res, checks


def cmd_k0(args):
    from .ktheory import crossed_product_k0
    system = make_system(args.system)
    mu = InvariantMeasure(system)
    d = args.depth or 3
    st = crossed_product_k0(system, d, mu, label="X")
    finer = crossed_product_k0(system, d + 1, mu, label="X")
    zero = 0 if mu.exact else 4 * mu.eps
    trace_ok = all(abs(st.trace_of(r)) <= zero for r in st.relations)
    res = {"system": system.to_json(), "stage": st.to_json(), "refined": finer.to_json()}
    return res, {"refinement_descends": st.refinement_descends(finer), "trace_vanishes_on_relations": trace_ok}


def cmd_exact(args):
    from .ktheory import verify_exact_rows
    system = make_system(args.system)
    slices = resolve_slices(system, args)
    reports = verify_exact_rows(system, slices, depth=args.depth)
    return ({"system": system.to_json(), "rows": [r.to_json() for r in reports]},
            {f"row{r.stage}": r.ok for r in reports})


def cmd_order(args):
    from .ktheory import order_iso_check
    system, chain = _chain(args)
    depth = args.depth or len(chain.towers)
    rep = order_iso_check(chain, depth, seed=args.seed)
    return rep.to_json(), {"order_iso": rep.ok}


def _suspension(args):
    from .suspension import Suspension, parse_roof
    system = make_system(args.system)
    return Suspension(system, parse_roof(system, args.tau))


def _rand_q(rng, span=5, den=12):
    return Fraction(rng.randint(-span * den, span * den), rng.randint(1, den))


def cmd_flow(args):
    from .suspension import SuspensionPoint
    susp = _suspension(args)
    system = susp.system
    rng = random.Random(args.seed)
    x = default_point(system)
    samples = args.samples
    law = norm = 0
    first = None
    for i in range(samples):
        y = system.point_image(x, rng.randint(-20, 20)) if i else x
        p = susp.normalize(SuspensionPoint(y, _rand_q(rng)))
        s, t = _rand_q(rng), _rand_q(rng)
        a = susp.flow(susp.flow(p, t), s)
        b = susp.flow(p, s + t)
        law += susp.same_point(a, b)
        norm += susp.normalize(a) == a
        if first is None:
            first = {"s": str(s), "t": str(t), "time": str(b.t)}
    res = {"roof": susp.roof.to_json(), "samples": samples, "group_law_pass": law,
           "normalized_pass": norm, "example": first}
    return res, {"group_law": law == samples, "normalization_idempotent": norm == samples}


def cmd_flowbox(args):
    from .suspension import build_flowbox_structure, verify_flowbox_properties
    susp = _suspension(args)
    n = args.stages or 8
    fb = build_flowbox_structure(susp, default_point(susp.system), n)
    rep = verify_flowbox_properties(fb, samples=args.samples, seed=args.seed)
    return rep.to_json(), {"flowbox": rep.ok}


def cmd_kernels(args):
    from .kernels import kernel_check
    rep = kernel_check(args.grid or 64, seed=args.seed)
    return rep, {"kernels": rep["ok"]}


def cmd_bratteli(args):
    system, chain = _chain(args)
    try:
        diagram = bratteli_diagram(chain.towers)
    except SplitFloorError as e:
        return {"error": str(e)}, {"floors_within_bases": False}
    dot = diagram.to_dot()
    if args.dot:
        write_atomic(args.dot, dot)
    res = diagram.to_json()
    res["dot"] = dot
    return res, {"floors_within_bases": True}


# --------------------------------------------------------------------------
# argparse


def _common(p, *names):
    if "system" in names:
        p.add_argument("--system", default="odometer base=2", help='e.g. "odometer base=2" or "substitution a:ab,b:a"')
    if "slices" in names:
        p.add_argument("--slices", help="comma-separated cylinder words, e.g. 0,00,000 or a.a,ab.aa")
        p.add_argument("--auto-nest", type=int, dest="auto_nest", help="nest this many cylinders around a default point")
    if "stages" in names:
        p.add_argument("--stages", type=int)
    if "depth" in names:
        p.add_argument("--depth", type=int)
    if "grid" in names:
        p.add_argument("--grid", type=int, default=64)
    if "tau" in names:
        p.add_argument("--tau", default="1", help='roof: "1" or per-atom "a=1,b=3/2"')
    if "samples" in names:
        p.add_argument("--samples", type=int, default=100)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", help="also write the report here")
    p.add_argument("--json", action="store_true", help="print the full JSON report")


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="cantorflow", description=__doc__.splitlines()[0])
    ap.add_argument("--version", action="version", version=__version__)
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("system", help="describe a system and its cylinder measures")
    _common(p, "system", "depth")
    p.set_defaults(func=cmd_system)

    p = sub.add_parser("towers", help="tower decompositions of nested slices")
    _common(p, "system", "slices", "stages")
    p.set_defaults(func=cmd_towers)

    p = sub.add_parser("k0", help="K0 of the crossed product at one depth")
    _common(p, "system", "depth")
    p.set_defaults(func=cmd_k0)

    v = sub.add_parser("verify", help="verification suites").add_subparsers(dest="suite", required=True)
    p = v.add_parser("exact-sequence")
    _common(p, "system", "slices", "stages", "depth")
    p.set_defaults(func=cmd_exact)
    p = v.add_parser("order-iso")
    _common(p, "system", "slices", "stages", "depth")
    p.set_defaults(func=cmd_order)

    s = sub.add_parser("suspension", help="suspension flows").add_subparsers(dest="action", required=True)
    p = s.add_parser("flow")
    _common(p, "system", "tau", "samples")
    p.set_defaults(func=cmd_flow)
    p = s.add_parser("flowbox")
    _common(p, "system", "tau", "stages", "samples")
    p.set_defaults(func=cmd_flowbox)

    k = sub.add_parser("kernels", help="kernel picture on a grid").add_subparsers(dest="action", required=True)
    p = k.add_parser("check")
    _common(p, "grid")
    p.set_defaults(func=cmd_kernels)

    p = sub.add_parser("bratteli", help="Bratteli diagram as DOT")
    _common(p, "system", "slices", "stages")
    p.add_argument("--dot", help="write the DOT file here")
    p.set_defaults(func=cmd_bratteli)
    return ap


def _config(args) -> dict:
    skip = {"func", "json", "out"}
    return {k: v for k, v in sorted(vars(args).items()) if k not in skip}


def run(argv=None) -> tuple[dict, int]:
    args = build_parser().parse_args(argv)
    try:
        results, checks = args.func(args)
    except (ConfigError, ValueError) as e:
        results, checks = {"error": f"{type(e).__name__}: {e}"}, {"valid_config": False}
    ok = all(checks.values())
    report = {"schema": SCHEMA, "version": __version__, "config": _config(args),
              "checks": checks, "ok": ok, "results": results}
    return report, 0 if ok else 1


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    report, code = run(argv)
    text = json.dumps(report, sort_keys=True, indent=2, default=str) + "\n"
    if args.out:
        write_atomic(args.out, text)
    if args.json:
        sys.stdout.write(text)
    else:
        if args.func is cmd_bratteli and "dot" in report["results"] and not args.dot:
            sys.stdout.write(report["results"]["dot"])
        for name, val in report["checks"].items():
            sys.stdout.write(f"{'PASS' if val else 'FAIL'} {name}\n")
        if "error" in report["results"]:
            sys.stdout.write(report["results"]["error"] + "\n")
    return code


if __name__ == "__main__":
    sys.exit(main())
