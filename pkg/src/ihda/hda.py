"""Anonymous higher-dimensional automata built from Petri nets.

A cell is a pair ``(marking, concset)``; its dimension is the total
multiplicity of the concset. Face maps are not stored: for a cell
``(m, c)`` and ``A + B <= c``::

    face((m, c), A, B) = (m + pre(A) + post(B), c - A - B)

The constructed HDA holds the reachable fragment, i.e. every cell whose
lower corner ``m + pre(c)`` is a reachable marking.
"""

from __future__ import annotations

import itertools
import json
from collections import deque
from dataclasses import dataclass
from typing import Callable, Iterable, Iterator, NamedTuple

from .ipn import (
    IPN,
    Budget,
    BudgetExceeded,
    Concset,
    Marking,
    covers,
    fire,
    preset_step,
)

__all__ = [
    "Cell",
    "HDA",
    "Computation",
    "pn_to_hda",
    "face",
    "verify_precubical",
    "truncate",
    "ReachabilityGraph",
    "reachability_graph",
    "find_computation",
    "to_dot",
    "to_json",
]


class Cell(NamedTuple):
    marking: Marking
    concset: Concset

    @property
    def dim(self) -> int:
        return sum(self.concset)


def _add(a, b):
    return tuple(x + y for x, y in zip(a, b))


def _sub(a, b):
    return tuple(x - y for x, y in zip(a, b))


def _scaled_sum(vecs, counts, width):
    out = [0] * width
    for v, n in zip(vecs, counts):
        if n:
            for k, x in enumerate(v):
                out[k] += n * x
    return tuple(out)


class HDA:
    """A finite HDA over the transitions of ``net`` with one initial 0-cell."""

    def __init__(self, net: IPN, cells: Iterable[Cell], initial: Cell):
        self.net = net
        self.cells = sorted(set(cells))
        self.index = {x: k for k, x in enumerate(self.cells)}
        if initial.dim != 0:
            raise ValueError("initial cell must be a 0-cell")
        if initial not in self.index:
            raise ValueError("initial cell is not stored")
        self.initial = initial
        self._steps_from: dict[Marking, list[Cell]] | None = None

    @property
    def alphabet(self) -> tuple[str, ...]:
        return self.net.transitions

    def __contains__(self, x) -> bool:
        return x in self.index

    def __len__(self) -> int:
        return len(self.cells)

    def __iter__(self) -> Iterator[Cell]:
        return iter(self.cells)

    @property
    def dim(self) -> int:
        return max((x.dim for x in self.cells), default=0)

    def cells_of_dim(self, k: int) -> list[Cell]:
        return [x for x in self.cells if x.dim == k]

    def dim_counts(self) -> dict[int, int]:
        counts: dict[int, int] = {}
        for x in self.cells:
            counts[x.dim] = counts.get(x.dim, 0) + 1
        return dict(sorted(counts.items()))

    def face(self, x: Cell, A: Concset, B: Concset) -> Cell:
        return face(self, x, A, B)

    def lower(self, x: Cell) -> Cell:
        """The 0-cell where none of ``ev(x)`` has started."""
        return self.face(x, x.concset, self.net.empty_step)

    def upper(self, x: Cell) -> Cell:
        """The 0-cell where all of ``ev(x)`` has terminated."""
        return self.face(x, self.net.empty_step, x.concset)

    def steps_from(self, m: Marking) -> list[Cell]:
        """Stored cells of dimension >= 1 whose lower corner is ``m``."""
        if self._steps_from is None:
            idx: dict[Marking, list[Cell]] = {}
            for x in self.cells:
                if x.dim:
                    idx.setdefault(self.lower(x).marking, []).append(x)
            self._steps_from = idx
        return self._steps_from.get(m, [])

    def zero_cell(self, m: Marking) -> Cell:
        return Cell(m, self.net.empty_step)


def face(hda: HDA, x: Cell, A: Concset, B: Concset) -> Cell:
    return _face(hda.net, x, A, B)


def _face(net: IPN, x: Cell, A: Concset, B: Concset) -> Cell:
    rest = tuple(c - a - b for c, a, b in zip(x.concset, A, B))
    if any(n < 0 for n in rest):
        raise ValueError(
            f"A + B exceeds the concset of {format_cell(net, x)}"
        )
    width = len(net.places)
    m = _add(
        x.marking,
        _add(_scaled_sum(net.pre_vec, A, width), _scaled_sum(net.post_vec, B, width)),
    )
    return Cell(m, rest)


def _sub_concsets(net: IPN, M: Marking) -> Iterator[Concset]:
    """All concsets c with pre(c) <= M."""
    T = len(net.transitions)
    for t in range(T):
        if not net.pre[t]:
            raise BudgetExceeded(
                f"transition {net.transitions[t]!r} has an empty preset "
                "(unbounded autoconcurrency)"
            )

    def rec(t, left, acc):
        if t == T:
            yield tuple(acc)
            return
        pre = net.pre[t]
        most = min(left[p] for p in pre)
        for n in range(most + 1):
            acc.append(n)
            if n:
                left2 = list(left)
                for p in pre:
                    left2[p] -= n
            else:
                left2 = left
            yield from rec(t + 1, left2, acc)
            acc.pop()

    yield from rec(0, list(M), [])


def pn_to_hda(
    net: IPN,
    budget: Budget = Budget(),
    keep: Callable[[Concset], bool] | None = None,
) -> HDA:
    """Build the reachable fragment of the HDA of ``net``.

    Exploration is breadth-first over 0-cells; from each reachable marking
    ``M`` every concset ``c`` with ``pre(c) <= M`` yields the cell
    ``(M - pre(c), c)``, and the upper faces of the 1-cells give the next
    0-cells. ``keep`` can veto concsets of dimension >= 2.
    """
    start = net.m0
    budget.check(start, net, 1)
    seen = {start}
    queue = deque([start])
    cells = []
    while queue:
        M = queue.popleft()
        for c in _sub_concsets(net, M):
            dim = sum(c)
            if dim >= 2 and keep is not None and not keep(c):
                continue
            x = Cell(_sub(M, preset_step(net, c)), c)
            cells.append(x)
            if dim == 1:
                top = _face(net, x, net.empty_step, c).marking
                if top not in seen:
                    seen.add(top)
                    budget.check(top, net, len(seen))
                    queue.append(top)
    return HDA(net, cells, Cell(start, net.empty_step))


def _decompositions(c: Concset) -> Iterator[tuple[Concset, Concset]]:
    """All pairs (A, B) with A + B <= c."""
    per_t = []
    for n in c:
        per_t.append([(a, b) for a in range(n + 1) for b in range(n + 1 - a)])
    for choice in itertools.product(*per_t):
        yield tuple(a for a, _ in choice), tuple(b for _, b in choice)


@dataclass
class PrecubicalReport:
    violations: list[dict]

    @property
    def ok(self) -> bool:
        return not self.violations

    def __bool__(self) -> bool:
        return self.ok


def verify_precubical(hda: HDA) -> PrecubicalReport:
    """Check closure under faces and the precubical identity on every cell.

    Faces are looked up in the cell store, so a cell whose data does not
    match the construction shows up as a missing face or a failed identity.
    """
    net = hda.net
    violations = []
    for x in hda.cells:
        for A, B in _decompositions(x.concset):
            y = face(hda, x, A, B)
            if y not in hda.index:
                violations.append(
                    {"cell": format_cell(net, x), "kind": "missing-face",
                     "A": net.format_concset(A), "B": net.format_concset(B),
                     "face": format_cell(net, y)}
                )
                continue
            if y.dim != x.dim - sum(A) - sum(B):
                violations.append({"cell": format_cell(net, x), "kind": "dimension"})
            for C, D in _decompositions(y.concset):
                lhs = face(hda, y, C, D)
                rhs = face(hda, x, _add(A, C), _add(B, D))
                if lhs != rhs:
                    violations.append(
                        {"cell": format_cell(net, x), "kind": "identity",
                         "A": net.format_concset(A), "B": net.format_concset(B),
                         "C": net.format_concset(C), "D": net.format_concset(D)}
                    )
    return PrecubicalReport(violations)


def truncate(hda: HDA, k: int) -> HDA:
    if k < 0:
        raise ValueError("truncation level must be >= 0")
    return HDA(hda.net, (x for x in hda.cells if x.dim <= k), hda.initial)


@dataclass
class ReachabilityGraph:
    nodes: set[Marking]
    edges: list[tuple[Marking, int, Marking]]


def reachability_graph(net: IPN, budget: Budget = Budget()) -> ReachabilityGraph:
    """Markings and single firings, by plain token-game exploration."""
    budget.check(net.m0, net, 1)
    nodes = {net.m0}
    edges = []
    todo = [net.m0]
    while todo:
        m = todo.pop()
        for t in range(len(net.transitions)):
            if not covers(m, net.pre_vec[t]):
                continue
            m2 = fire(net, m, t)
            edges.append((m, t, m2))
            if m2 not in nodes:
                nodes.add(m2)
                budget.check(m2, net, len(nodes))
                todo.append(m2)
    return ReachabilityGraph(nodes, edges)


@dataclass
class Computation:
    """Alternating 0-cells and step cells ``(z0, x0, z1, ..., x_{n-1}, zn)``."""

    steps: list[Cell]

    @property
    def step_cells(self) -> list[Cell]:
        return self.steps[1::2]

    def __len__(self) -> int:
        return len(self.steps) // 2

    def is_valid(self, hda: HDA) -> bool:
        s = self.steps
        if not s or len(s) % 2 == 0 or s[0] != hda.initial:
            return False
        for k in range(0, len(s) - 1, 2):
            z, x, z2 = s[k], s[k + 1], s[k + 2]
            if x not in hda or z.dim or z2.dim or not x.dim:
                return False
            if hda.lower(x) != z or hda.upper(x) != z2:
                return False
        return True


def find_computation(hda: HDA, target: Cell) -> Computation | None:
    """Shortest computation from the initial cell ending in ``target``.

    The prefix up to the lower corner of ``target`` uses 1-cells only (an
    interleaving), so the computation can also be replayed as a sequential
    run of the net. Returns None if the target is not reachable.
    """
    if target not in hda:
        return None
    goal = hda.lower(target).marking if target.dim else target.marking
    start = hda.initial.marking
    parent: dict[Marking, tuple[Marking, Cell] | None] = {start: None}
    queue = deque([start])
    while queue and goal not in parent:
        m = queue.popleft()
        for x in hda.steps_from(m):
            if x.dim != 1:
                continue
            m2 = hda.upper(x).marking
            if m2 not in parent:
                parent[m2] = (m, x)
                queue.append(m2)
    if goal not in parent:
        return None
    rev = []
    m = goal
    while parent[m] is not None:
        prev, x = parent[m]
        rev.append((x, m))
        m = prev
    steps = [hda.initial]
    for x, m2 in reversed(rev):
        steps += [x, hda.zero_cell(m2)]
    if target.dim:
        steps += [target, hda.upper(target)]
    return Computation(steps)


# -- export ---------------------------------------------------------------

def format_cell(net: IPN, x: Cell) -> dict:
    return {"marking": net.format_marking(x.marking), "concset": net.format_concset(x.concset)}


def _marking_label(net: IPN, m: Marking) -> str:
    parts = [p if n == 1 else f"{p}:{n}" for p, n in net.format_marking(m).items()]
    return ",".join(parts) or "0"


def to_dot(hda: HDA, k: int = 2, labels=None) -> str:
    """Graphviz text for the k-truncation (k <= 2).

    0-cells are nodes, 1-cells edges from lower to upper corner, and 2-cells
    shaded box annotations attached to their lower corner.
    """
    if not 0 <= k <= 2:
        raise ValueError("DOT export supports 0 <= k <= 2")
    net = hda.net
    ids = {}
    out = ["digraph hda {", "  rankdir=LR;", '  node [shape=circle, fontsize=10];']
    for n, z in enumerate(hda.cells_of_dim(0)):
        ids[z.marking] = f"z{n}"
        attrs = f'label="{_marking_label(net, z.marking)}"'
        if z == hda.initial:
            attrs += ", peripheries=2"
        out.append(f"  z{n} [{attrs}];")
    if k >= 1:
        for x in hda.cells_of_dim(1):
            (t,) = (net.transitions[i] for i, n in enumerate(x.concset) if n)
            a, b = ids[hda.lower(x).marking], ids[hda.upper(x).marking]
            out.append(f'  {a} -> {b} [label="{t}"];')
    if k >= 2:
        for n, x in enumerate(hda.cells_of_dim(2)):
            names = ",".join(net.step_names(x.concset))
            text = "{" + names + "}"
            if labels is not None:
                cin, cout = labels[x]
                text += f"\\nin: {cin}\\nout: {cout}"
            out.append(
                f'  c{n} [shape=box, style=filled, fillcolor=gray85, label="{text}"];'
            )
            out.append(f"  c{n} -> {ids[hda.lower(x).marking]} [style=dotted, arrowhead=none];")
    out.append("}")
    return "\n".join(out) + "\n"


def to_json(hda: HDA, labels=None) -> str:
    net = hda.net
    cells = []
    for x in hda.cells:
        rec = {**format_cell(net, x), "dim": x.dim}
        if labels is not None:
            cin, cout = labels[x]
            rec["input"], rec["output"] = str(cin), str(cout)
        cells.append(rec)
    doc = {
        "places": list(net.places),
        "transitions": list(net.transitions),
        "initial": format_cell(net, hda.initial),
        "dim_counts": {str(d): n for d, n in hda.dim_counts().items()},
        "cells": cells,
    }
    return json.dumps(doc, indent=2) + "\n"
