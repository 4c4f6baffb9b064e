"""Bratteli diagram of a chain of tower decompositions, as Graphviz DOT.

Stage ``n`` has one vertex per tower of the decomposition of ``S_n`` over
``S_{n+1}``.  The edge from tower ``j`` of stage ``n`` to tower ``j'`` of
stage ``n+1`` counts the floors of tower ``j'`` (subsets of ``S_{n+1}``)
lying in the base of tower ``j``, i.e. how often the orbit of the finer
base passes through the coarser tower.
"""
from __future__ import annotations

import os
import tempfile
from dataclasses import dataclass

from .rokhlin import TowerDecomposition


class SplitFloorError(ValueError):
    """A floor meets several bases of the previous stage."""


@dataclass
class BratteliDiagram:
    vertices: list[list[int]]  # stage -> tower heights j
    edges: dict[tuple[int, int, int], int]  # (stage, j, j') -> multiplicity

    def to_dot(self) -> str:
        lines = ["digraph bratteli {", "  rankdir=TB;", "  node [shape=circle];"]
        for n, js in enumerate(self.vertices):
            names = " ".join(f'"{n}:{j}"' for j in js)
            lines.append(f"  subgraph stage{n} {{ rank=same; {names}; }}")
            for j in js:
                lines.append(f'  "{n}:{j}" [label="h={j + 1}"];')
        for (n, j, k), mult in sorted(self.edges.items()):
            lines.append(f'  "{n}:{j}" -> "{n + 1}:{k}" [label="{mult}", multiplicity={mult}];')
        lines.append("}")
        return "\n".join(lines) + "\n"

    def to_json(self) -> dict:
        return {
            "vertices": [[j for j in js] for js in self.vertices],
            "edges": [{"stage": n, "from": j, "to": k, "multiplicity": m}
                      for (n, j, k), m in sorted(self.edges.items())],
        }


def bratteli_diagram(towers: list[TowerDecomposition]) -> BratteliDiagram:
    if not towers:
        raise ValueError("need at least one stage")
    vertices = [list(td.heights) for td in towers]
    edges: dict[tuple[int, int, int], int] = {}
    for n in range(len(towers) - 1):
        coarse, fine = towers[n], towers[n + 1]
        for k in fine.heights:
            for F in fine.floors[k]:
                hits = [j for j in coarse.heights if not (F & coarse.base(j)).is_empty()]
                if len(hits) != 1:
                    raise SplitFloorError(f"floor of tower {k} at stage {n + 1} meets bases {hits}")
                key = (n, hits[0], k)
                edges[key] = edges.get(key, 0) + 1
    return BratteliDiagram(vertices, edges)


def write_atomic(path: str, text: str) -> None:
    d = os.path.dirname(os.path.abspath(path))
    fd, tmp = tempfile.mkstemp(dir=d, prefix=".tmp-")
    try:
        with os.fdopen(fd, "w") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def emit_bratteli(towers: list[TowerDecomposition], path: str) -> BratteliDiagram:
    diagram = bratteli_diagram(towers)
    write_atomic(path, diagram.to_dot())
    return diagram
