"""Concurrent-step controller driven by an interpreted HDA.

Each control cycle reads an input valuation, picks a concurrent step that is
admissible in the current marking, answers with an output valuation for the
corresponding cell and fires the step.
"""

from __future__ import annotations

import json
from collections import deque
from dataclasses import dataclass, field, replace
from typing import Sequence

from .cube import Clause, Valuation, complete_valuation, satisfies, violates_clause
from .hda import Cell
from .ipn import Concset, Marking, covers, enabled, fire_step, preset_step
from .translate import IHDA, AnalysisReport, check_invariants, find_inconsistent, label_cell

__all__ = [
    "ControllerState",
    "ControllerHalted",
    "Preflight",
    "select_step",
    "cycle",
    "preflight",
    "conforms",
    "trace_record",
]


class ControllerHalted(RuntimeError):
    def __init__(self, reason: str, state: ControllerState):
        super().__init__(reason)
        self.reason = reason
        self.state = state


@dataclass(frozen=True)
class ControllerState:
    marking: Marking
    cycle: int = 0
    last_step: Concset = ()
    halted_reason: str | None = None

    @classmethod
    def initial(cls, ihda: IHDA) -> ControllerState:
        return cls(ihda.net.m0, 0, ihda.net.empty_step)


def _cell(ihda: IHDA, m: Marking, c: Concset) -> Cell:
    pre = preset_step(ihda.net, c)
    return Cell(tuple(a - b for a, b in zip(m, pre)), c)


def _admissible(out, invariants) -> bool:
    return not out.false and not any(violates_clause(out, cl) for cl in invariants)


def select_step(
    ihda: IHDA, m: Marking, i: Valuation, invariants: Sequence[Clause] = ()
) -> Concset:
    """Greedy maximal step.

    Enabled transitions are tried in declared order, each as many times as
    the tokens allow; a candidate is kept only if the cell it leads to has a
    satisfiable output that breaks no invariant. The empty step means wait.
    """
    net = ihda.net
    step = list(net.empty_step)
    for t in enabled(net, m, i):
        limit = min((m[p] for p in net.pre[t]), default=1)
        while step[t] < limit:
            step[t] += 1
            cand = tuple(step)
            if covers(m, preset_step(net, cand)):
                cin, cout = label_cell(net, _cell(ihda, m, cand))
                if satisfies(i, cin) and _admissible(cout, invariants):
                    continue
            step[t] -= 1
            break
    return tuple(step)


def cycle(
    ihda: IHDA,
    state: ControllerState,
    i: Valuation,
    invariants: Sequence[Clause] = (),
) -> tuple[Valuation, ControllerState]:
    c = select_step(ihda, state.marking, i, invariants)
    x = _cell(ihda, state.marking, c)
    _, out = label_cell(ihda.net, x)
    if not _admissible(out, invariants):
        reason = (
            f"cycle {state.cycle}: no admissible output for step "
            f"{ihda.net.step_names(c) or 'wait'} at marking "
            f"{ihda.net.format_marking(state.marking)} (label {out})"
        )
        raise ControllerHalted(reason, replace(state, halted_reason=reason))
    o = complete_valuation(out, False)
    nxt = ControllerState(fire_step(ihda.net, state.marking, c), state.cycle + 1, c)
    return o, nxt


def trace_record(ihda: IHDA, state: ControllerState, i: Valuation, o: Valuation, step: Concset) -> dict:
    """One line of the controller trace log (marking is the one the step
    was fired from)."""
    return {
        "cycle": state.cycle,
        "inputs": i.as_dict(),
        "step": ihda.net.step_names(step),
        "outputs": o.as_dict(),
        "marking": ihda.net.format_marking(state.marking),
    }


def dump_trace(records) -> str:
    return "".join(json.dumps(r, sort_keys=False) + "\n" for r in records)


def load_trace(ihda: IHDA, text: str) -> list[tuple[Valuation, Valuation]]:
    word = []
    for line in text.splitlines():
        if not line.strip():
            continue
        rec = json.loads(line)
        word.append(
            (ihda.inputs.valuation(rec["inputs"]), ihda.outputs.valuation(rec["outputs"]))
        )
    return word


@dataclass
class Preflight:
    ok: bool
    report: AnalysisReport = field(default_factory=AnalysisReport)
    overridden: bool = False


def preflight(ihda: IHDA, invariants: Sequence[Clause] = (), override: bool = False) -> Preflight:
    """Refuse models with contradictory or invariant-violating cells."""
    report = find_inconsistent(ihda)
    report.extend(check_invariants(ihda, list(invariants)))
    if not report:
        return Preflight(True, report)
    return Preflight(override, report, overridden=override)


def conforms(ihda: IHDA, word: Sequence[tuple[Valuation, Valuation]], strict: bool = False) -> bool:
    """Is the finite I/O word compatible with some computation of the IHDA?

    Every letter is matched with a cell whose input and output labels it
    satisfies. A letter may rest on a 0-cell only if no step starting there
    is enabled by its inputs (the wait rule of the net semantics).

    Default reading: from a 0-cell the next letter stays on it (wait) or
    enters a step starting there; from a step cell the next letter is on its
    upper 0-cell or on a step starting there, passing that 0-cell without
    reading.

    ``strict`` uses the two counter rules as printed: a move either advances
    the path alone or the path and the word together, and the current letter
    must match the current cell after every move.
    """
    if not word:
        return True
    hda = ihda.hda
    n = len(word)

    def ok(k: int, x: Cell) -> bool:
        i, o = word[k]
        cin, cout = ihda.labels[x]
        if not (satisfies(i, cin) and satisfies(o, cout)):
            return False
        if x.dim:
            return True
        return not any(
            satisfies(i, ihda.labels[y][0]) and not ihda.labels[y][1].false
            for y in hda.steps_from(x.marking)
        )

    def after(x: Cell) -> list[Cell]:
        return [hda.upper(x)] if x.dim else list(hda.steps_from(x.marking))

    z0 = hda.initial
    if strict:
        start = [(0, z0)] if ok(0, z0) else []
    else:
        start = [(0, x) for x in [z0, *hda.steps_from(z0.marking)] if ok(0, x)]
    seen = set(start)
    queue = deque(start)
    while queue:
        k, x = queue.popleft()
        if k == n - 1:
            return True
        if strict:
            moves = [(k, y) for y in after(x)] + [(k + 1, y) for y in after(x)]
        else:
            if x.dim:
                z = hda.upper(x)
                nxt = [z, *hda.steps_from(z.marking)]
            else:
                nxt = [x, *hda.steps_from(x.marking)]
            moves = [(k + 1, y) for y in nxt]
        for k2, y in moves:
            if (k2, y) not in seen and ok(k2, y):
                seen.add((k2, y))
                queue.append((k2, y))
    return False
