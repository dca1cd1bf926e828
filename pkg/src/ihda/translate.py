"""IPN to interpreted HDA: labelling, inconsistency and invariant analysis."""

from __future__ import annotations

import json
from dataclasses import dataclass, field

from .cube import (
    Clause,
    Cube,
    PropSet,
    Valuation,
    complete_valuation,
    conj_all,
    violates_clause,
)
from .hda import HDA, Cell, Computation, _decompositions, find_computation, format_cell, pn_to_hda
from .ipn import IPN, Budget, preset_step, step_input

__all__ = [
    "IHDA",
    "Finding",
    "AnalysisReport",
    "Witness",
    "build_ihda",
    "label_cell",
    "find_inconsistent",
    "check_invariants",
    "witness",
    "TRANSFER_RESTRICTION",
]

# Output relabelling forbidding the lower chariot to move while pushing.
TRANSFER_RESTRICTION = {
    "p_L2": "L2 & !Pusher",
    "p_R2": "R2 & !Pusher",
    "p_pusher": "!L2 & !R2 & Pusher",
}


@dataclass
class IHDA:
    hda: HDA
    labels: dict[Cell, tuple[Cube, Cube]]

    @property
    def net(self) -> IPN:
        return self.hda.net

    @property
    def inputs(self) -> PropSet:
        return self.net.inputs

    @property
    def outputs(self) -> PropSet:
        return self.net.outputs

    def label(self, x: Cell) -> tuple[Cube, Cube]:
        try:
            return self.labels[x]
        except KeyError:
            return label_cell(self.net, x)


def _contributors(net: IPN, x: Cell) -> list[Cube]:
    """Output cubes whose conjunction is the output label of ``x``."""
    occupied = tuple(a + b for a, b in zip(x.marking, preset_step(net, x.concset)))
    cubes = [net.place_label[p] for p, n in enumerate(occupied) if n > 0]
    cubes += [net.trans_label[t][1] for t, n in enumerate(x.concset) if n]
    return cubes


def label_cell(net: IPN, x: Cell) -> tuple[Cube, Cube]:
    """(conjunction of the step's input cubes,
    outputs of places marked or consumed by the step and of the step itself)."""
    return step_input(net, x.concset), conj_all(_contributors(net, x), net.outputs)


def build_ihda(net: IPN, budget: Budget = Budget()) -> IHDA:
    hda = pn_to_hda(net, budget, keep=lambda c: not step_input(net, c).false)
    labels = {}
    for x in hda.cells:
        cin, cout = label_cell(net, x)
        assert not cin.false, x
        labels[x] = (cin, cout)
    return IHDA(hda, labels)


@dataclass
class Witness:
    computation: Computation
    word: list[tuple[Valuation, Valuation]]
    conflict: str | None = None

    def to_json(self, net: IPN) -> dict:
        return {
            "steps": [format_cell(net, x) for x in self.computation.steps],
            "word": [
                {"inputs": i.as_dict(), "outputs": o.as_dict()} for i, o in self.word
            ],
            **({"conflict": self.conflict} if self.conflict else {}),
        }


def witness(ihda: IHDA, x: Cell) -> Witness:
    """A computation reaching ``x`` plus a concrete I/O prefix for it.

    Each step cell of the computation contributes one letter: the input and
    output labels completed with false. If ``x`` itself has a contradictory
    output, the word stops before it and ``conflict`` describes the clash.
    """
    comp = find_computation(ihda.hda, x)
    if comp is None:
        raise ValueError(f"cell {format_cell(ihda.net, x)} is unreachable")
    word = []
    conflict = None
    for y in comp.step_cells:
        cin, cout = ihda.label(y)
        if cout.false:
            conflict = _describe_conflict(ihda.net, y)
            break
        word.append((complete_valuation(cin, False), complete_valuation(cout, False)))
    return Witness(comp, word, conflict)


def _conflicting_props(net: IPN, x: Cell) -> list[str]:
    pos = neg = 0
    for c in _contributors(net, x):
        pos |= c.pos
        neg |= c.neg
    both = pos & neg
    return [n for k, n in enumerate(net.outputs.names) if both >> k & 1]


def _describe_conflict(net: IPN, x: Cell) -> str:
    props = _conflicting_props(net, x)
    return "output requires " + ", ".join(f"{p} and !{p}" for p in props)


@dataclass
class Finding:
    cell: Cell
    kind: str  # "bot-output" or "invariant"
    witness: Witness
    literal_conflict: list[str]
    clause: Clause | None = None
    maximal: bool = True

    def to_json(self, net: IPN) -> dict:
        out = {
            "cell": format_cell(net, self.cell),
            "dim": self.cell.dim,
            "kind": self.kind,
            "maximal": self.maximal,
        }
        if self.clause is not None:
            out["clause"] = str(self.clause)
        out["literal_conflict"] = self.literal_conflict
        out["witness"] = self.witness.to_json(net)
        return out


@dataclass
class AnalysisReport:
    findings: list[Finding] = field(default_factory=list)

    def __bool__(self) -> bool:
        return bool(self.findings)

    def __len__(self) -> int:
        return len(self.findings)

    @property
    def inconsistent(self) -> list[Finding]:
        return [f for f in self.findings if f.kind == "bot-output"]

    @property
    def violations(self) -> list[Finding]:
        return [f for f in self.findings if f.kind == "invariant"]

    def maximal_cells(self) -> list[Cell]:
        return sorted({f.cell for f in self.findings if f.maximal})

    def extend(self, other: AnalysisReport) -> None:
        self.findings.extend(other.findings)

    def to_json(self, net: IPN) -> str:
        return json.dumps({"findings": [f.to_json(net) for f in self.findings]}, indent=2) + "\n"


def _mark_maximal(hda: HDA, findings: list[Finding]) -> list[Finding]:
    """Flag findings whose cell is not a proper face of another flagged
    cell; maximal ones are listed first, each group in cell order."""
    flagged = {f.cell for f in findings}
    covered = set()
    for y in flagged:
        for A, B in _decompositions(y.concset):
            if sum(A) or sum(B):
                covered.add(hda.face(y, A, B))
    for f in findings:
        f.maximal = f.cell not in covered
    return sorted(findings, key=lambda f: (not f.maximal, f.cell, str(f.clause)))


def find_inconsistent(ihda: IHDA) -> AnalysisReport:
    """Cells whose output label is unsatisfiable, with witnesses."""
    net = ihda.net
    findings = []
    for x in ihda.hda.cells:
        if ihda.labels[x][1].false:
            props = _conflicting_props(net, x)
            findings.append(
                Finding(x, "bot-output", witness(ihda, x), [props[0], "!" + props[0]])
            )
    return AnalysisReport(_mark_maximal(ihda.hda, findings))


def check_invariants(ihda: IHDA, invariants: list[Clause]) -> AnalysisReport:
    """Cells whose (satisfiable) output label contradicts a global clause."""
    findings = []
    for x in ihda.hda.cells:
        out = ihda.labels[x][1]
        if out.false:
            continue
        for cl in invariants:
            if violates_clause(out, cl):
                # the literals of the cube that falsify the clause
                clash = [n if not v else "!" + n for n, v in cl.literals()]
                findings.append(Finding(x, "invariant", witness(ihda, x), clash, cl))
    return AnalysisReport(_mark_maximal(ihda.hda, findings))
