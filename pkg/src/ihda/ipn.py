"""Interpreted Petri nets: structure, text format and firing semantics.

Markings and concsets are plain tuples of non-negative ints aligned with
``IPN.places`` and ``IPN.transitions`` respectively. They are hashable and
order naturally, which the state-space code relies on.
"""

from __future__ import annotations

import shlex
from collections import deque
from dataclasses import dataclass, field, replace
from typing import Iterable, Mapping, NamedTuple, Sequence

from .cube import (
    Cube,
    CubeError,
    PropSet,
    Valuation,
    conj,
    conj_all,
    parse_cube,
    satisfies,
)

__all__ = [
    "Budget",
    "BudgetExceeded",
    "IPN",
    "IPNError",
    "Marking",
    "Concset",
    "IOWord",
    "Successor",
    "parse_ipn",
    "load_ipn",
    "serialize_ipn",
    "restrict",
    "preset_step",
    "postset_step",
    "enabled",
    "step_enabled",
    "fire_step",
    "marked_output",
    "successors",
    "check_word_prefix",
]

Marking = tuple  # tuple[int, ...] indexed like IPN.places
Concset = tuple  # tuple[int, ...] indexed like IPN.transitions
IOWord = Sequence[tuple[Valuation, Valuation]]


class IPNError(ValueError):
    pass


class BudgetExceeded(RuntimeError):
    pass


@dataclass(frozen=True)
class Budget:
    """Limits for state-space construction (bounded nets only)."""

    max_tokens: int = 1
    max_markings: int = 100_000

    def check(self, m: Marking, ipn: IPN, count: int) -> None:
        for p, n in enumerate(m):
            if n > self.max_tokens:
                raise BudgetExceeded(
                    f"place {ipn.places[p]!r} reaches {n} tokens "
                    f"(budget {self.max_tokens}) in marking {ipn.format_marking(m)}"
                )
        if count > self.max_markings:
            raise BudgetExceeded(
                f"more than {self.max_markings} reachable markings"
            )


@dataclass(frozen=True, eq=False)
class IPN:
    places: tuple[str, ...]
    transitions: tuple[str, ...]
    pre: tuple[frozenset[int], ...]  # per transition, place indices
    post: tuple[frozenset[int], ...]
    m0: Marking
    inputs: PropSet
    outputs: PropSet
    place_label: tuple[Cube, ...]
    trans_label: tuple[tuple[Cube, Cube], ...]
    _pidx: dict = field(init=False, repr=False)
    _tidx: dict = field(init=False, repr=False)
    pre_vec: tuple[Marking, ...] = field(init=False, repr=False)
    post_vec: tuple[Marking, ...] = field(init=False, repr=False)

    def __post_init__(self):
        object.__setattr__(self, "_pidx", {p: i for i, p in enumerate(self.places)})
        object.__setattr__(self, "_tidx", {t: i for i, t in enumerate(self.transitions)})
        n = len(self.places)
        vec = lambda s: tuple(1 if p in s else 0 for p in range(n))  # noqa: E731
        object.__setattr__(self, "pre_vec", tuple(vec(s) for s in self.pre))
        object.__setattr__(self, "post_vec", tuple(vec(s) for s in self.post))

    def p(self, name: str) -> int:
        try:
            return self._pidx[name]
        except KeyError:
            raise IPNError(f"unknown place {name!r}") from None

    def t(self, name: str) -> int:
        try:
            return self._tidx[name]
        except KeyError:
            raise IPNError(f"unknown transition {name!r}") from None

    def marking(self, counts: Mapping[str, int] | Iterable[str] = ()) -> Marking:
        """Marking from ``{place: n}`` or from an iterable of marked places."""
        m = [0] * len(self.places)
        items = counts.items() if isinstance(counts, Mapping) else ((p, 1) for p in counts)
        for name, n in items:
            if n < 0:
                raise IPNError("negative token count")
            m[self.p(name)] += n
        return tuple(m)

    def concset(self, names: Mapping[str, int] | Iterable[str] = ()) -> Concset:
        """Concset from ``{transition: n}`` or an iterable of names (repeats count)."""
        c = [0] * len(self.transitions)
        items = names.items() if isinstance(names, Mapping) else ((t, 1) for t in names)
        for name, n in items:
            if n < 0:
                raise IPNError("negative multiplicity")
            c[self.t(name)] += n
        return tuple(c)

    def format_marking(self, m: Marking) -> dict[str, int]:
        return {self.places[i]: n for i, n in enumerate(m) if n}

    def format_concset(self, c: Concset) -> dict[str, int]:
        return {self.transitions[i]: n for i, n in enumerate(c) if n}

    def step_names(self, c: Concset) -> list[str]:
        return [self.transitions[i] for i, n in enumerate(c) for _ in range(n)]

    @property
    def zero_marking(self) -> Marking:
        return (0,) * len(self.places)

    @property
    def empty_step(self) -> Concset:
        return (0,) * len(self.transitions)


# -- text format ---------------------------------------------------------

_SECTIONS = ("inputs", "outputs", "places", "transitions")


def parse_ipn(text: str) -> IPN:
    """Parse the line-oriented IPN format.

    ::

        inputs: a b
        outputs: X Y
        places:
          p0 output "X" tokens 1
        transitions:
          t0 in "a & !b" out "Y" pre p0 post p1
    """
    sections: dict[str, list[tuple[int, list[str]]]] = {s: [] for s in _SECTIONS}
    current = None
    for lineno, raw in enumerate(text.splitlines(), 1):
        try:
            tokens = shlex.split(raw, comments=True)
        except ValueError as e:
            raise IPNError(f"line {lineno}: {e}") from None
        if not tokens:
            continue
        head = tokens[0]
        if head.endswith(":") and head[:-1] in _SECTIONS:
            current = head[:-1]
            if current in ("inputs", "outputs"):
                sections[current].append((lineno, tokens[1:]))
            elif len(tokens) > 1:
                sections[current].append((lineno, tokens[1:]))
            continue
        if current is None:
            raise IPNError(f"line {lineno}: expected a section header, got {head!r}")
        sections[current].append((lineno, tokens))

    def names(sec):
        return [n for _, toks in sections[sec] for n in toks]

    try:
        inputs = PropSet(names("inputs"))
        outputs = PropSet(names("outputs"))
    except CubeError as e:
        raise IPNError(str(e)) from None

    def cube(text, over, lineno, what):
        try:
            c = parse_cube(text, over)
        except CubeError as e:
            raise IPNError(f"line {lineno}: {what}: {e}") from None
        if c.false:
            raise IPNError(f"line {lineno}: {what} is unsatisfiable")
        return c

    places, labels, m0 = [], [], []
    for lineno, toks in sections["places"]:
        pid, rest = toks[0], toks[1:]
        if pid in places:
            raise IPNError(f"line {lineno}: duplicate place {pid!r}")
        label, tokens = outputs.top(), 0
        while rest:
            key = rest.pop(0)
            if not rest:
                raise IPNError(f"line {lineno}: {key!r} needs a value")
            value = rest.pop(0)
            if key == "output":
                label = cube(value, outputs, lineno, f"output of place {pid!r}")
            elif key == "tokens":
                if not value.isdigit():
                    raise IPNError(f"line {lineno}: bad token count {value!r}")
                tokens = int(value)
            else:
                raise IPNError(f"line {lineno}: unexpected {key!r}")
        places.append(pid)
        labels.append(label)
        m0.append(tokens)

    pidx = {p: i for i, p in enumerate(places)}
    trans, pre, post, tlabels = [], [], [], []
    for lineno, toks in sections["transitions"]:
        tid, rest = toks[0], toks[1:]
        if tid in trans or tid in pidx:
            raise IPNError(f"line {lineno}: duplicate id {tid!r}")
        cin, cout = inputs.top(), outputs.top()
        arcs = {"pre": set(), "post": set()}
        mode = None
        while rest:
            key = rest.pop(0)
            if key in ("in", "out"):
                if not rest:
                    raise IPNError(f"line {lineno}: {key!r} needs a cube")
                value = rest.pop(0)
                if key == "in":
                    cin = cube(value, inputs, lineno, f"input of {tid!r}")
                else:
                    cout = cube(value, outputs, lineno, f"output of {tid!r}")
                mode = None
            elif key in arcs:
                mode = key
            elif mode is not None:
                if key not in pidx:
                    raise IPNError(
                        f"line {lineno}: transition {tid!r} references undeclared place {key!r}"
                    )
                arcs[mode].add(pidx[key])
            else:
                raise IPNError(f"line {lineno}: unexpected {key!r}")
        trans.append(tid)
        pre.append(frozenset(arcs["pre"]))
        post.append(frozenset(arcs["post"]))
        tlabels.append((cin, cout))

    return IPN(
        places=tuple(places),
        transitions=tuple(trans),
        pre=tuple(pre),
        post=tuple(post),
        m0=tuple(m0),
        inputs=inputs,
        outputs=outputs,
        place_label=tuple(labels),
        trans_label=tuple(tlabels),
    )


def load_ipn(path) -> IPN:
    with open(path, encoding="utf-8") as f:
        return parse_ipn(f.read())


def serialize_ipn(ipn: IPN) -> str:
    q = shlex.quote
    lines = [
        "inputs: " + " ".join(ipn.inputs.names),
        "outputs: " + " ".join(ipn.outputs.names),
        "places:",
    ]
    for i, p in enumerate(ipn.places):
        line = f"  {p}"
        if not ipn.place_label[i].is_top:
            line += f' output "{ipn.place_label[i]}"'
        if ipn.m0[i]:
            line += f" tokens {ipn.m0[i]}"
        lines.append(line)
    lines.append("transitions:")
    for j, t in enumerate(ipn.transitions):
        cin, cout = ipn.trans_label[j]
        line = f'  {t} in "{cin}" out "{cout}" pre'
        for p in sorted(ipn.pre[j]):
            line += " " + q(ipn.places[p])
        line += " post"
        for p in sorted(ipn.post[j]):
            line += " " + q(ipn.places[p])
        lines.append(line)
    return "\n".join(lines) + "\n"


def restrict(ipn: IPN, relabel: Mapping[str, str | Cube]) -> IPN:
    """Return a copy of ``ipn`` with some place output labels replaced."""
    labels = list(ipn.place_label)
    for place, label in relabel.items():
        if isinstance(label, str):
            try:
                label = parse_cube(label, ipn.outputs)
            except CubeError as e:
                raise IPNError(f"restriction for {place!r}: {e}") from None
        if label.false:
            raise IPNError(f"restriction for {place!r} is unsatisfiable")
        labels[ipn.p(place)] = label
    return replace(ipn, place_label=tuple(labels))


# -- semantics -----------------------------------------------------------

def _check_step(ipn: IPN, c: Concset) -> None:
    if len(c) != len(ipn.transitions) or any(n < 0 for n in c):
        raise IPNError(f"not a concset of this net: {c!r}")


def preset_step(ipn: IPN, c: Concset) -> Marking:
    """Weighted preset of a step: sum of c(t) * pre(t)."""
    _check_step(ipn, c)
    m = [0] * len(ipn.places)
    for t, n in enumerate(c):
        if n:
            for p in ipn.pre[t]:
                m[p] += n
    return tuple(m)


def postset_step(ipn: IPN, c: Concset) -> Marking:
    _check_step(ipn, c)
    m = [0] * len(ipn.places)
    for t, n in enumerate(c):
        if n:
            for p in ipn.post[t]:
                m[p] += n
    return tuple(m)


def covers(m: Marking, need: Marking) -> bool:
    return all(a >= b for a, b in zip(m, need))


def enabled(ipn: IPN, m: Marking, i: Valuation) -> tuple[int, ...]:
    """Indices of transitions enabled by the marking and the input valuation."""
    return tuple(
        t
        for t in range(len(ipn.transitions))
        if covers(m, ipn.pre_vec[t]) and satisfies(i, ipn.trans_label[t][0])
    )


def step_input(ipn: IPN, c: Concset) -> Cube:
    return conj_all((ipn.trans_label[t][0] for t, n in enumerate(c) if n), ipn.inputs)


def step_output(ipn: IPN, c: Concset) -> Cube:
    return conj_all((ipn.trans_label[t][1] for t, n in enumerate(c) if n), ipn.outputs)


def step_enabled(ipn: IPN, m: Marking, c: Concset, i: Valuation) -> bool:
    return covers(m, preset_step(ipn, c)) and satisfies(i, step_input(ipn, c))


def fire_step(ipn: IPN, m: Marking, c: Concset) -> Marking:
    need = preset_step(ipn, c)
    if not covers(m, need):
        missing = [ipn.places[p] for p, (a, b) in enumerate(zip(m, need)) if a < b]
        raise IPNError(f"insufficient tokens in {missing} to fire {ipn.format_concset(c)}")
    gain = postset_step(ipn, c)
    return tuple(a - b + g for a, b, g in zip(m, need, gain))


def fire(ipn: IPN, m: Marking, t: int) -> Marking:
    c = [0] * len(ipn.transitions)
    c[t] = 1
    return fire_step(ipn, m, tuple(c))


def marked_output(ipn: IPN, m: Marking) -> Cube:
    return conj_all((ipn.place_label[p] for p, n in enumerate(m) if n > 0), ipn.outputs)


class Successor(NamedTuple):
    kind: str  # "wait" or "trans"
    transition: int | None
    marking: Marking
    output: Cube


def successors(ipn: IPN, m: Marking, i: Valuation) -> list[Successor]:
    """One interpreted step. Waiting is only possible when nothing is enabled."""
    base = marked_output(ipn, m)
    ts = enabled(ipn, m, i)
    if not ts:
        return [Successor("wait", None, m, base)]
    return [
        Successor("trans", t, fire(ipn, m, t), conj(base, ipn.trans_label[t][1]))
        for t in ts
    ]


def check_word_prefix(ipn: IPN, word: IOWord) -> bool:
    """Is the finite I/O word the prefix of some interpreted run of ``ipn``?"""
    frontier = {ipn.m0}
    for i, o in word:
        nxt = set()
        for m in frontier:
            for s in successors(ipn, m, i):
                if satisfies(o, s.output):
                    nxt.add(s.marking)
        if not nxt:
            return False
        frontier = nxt
    return True


def reachable_markings(ipn: IPN, budget: Budget = Budget()) -> set[Marking]:
    """Plain breadth-first marking exploration ignoring inputs."""
    seen = {ipn.m0}
    budget.check(ipn.m0, ipn, 1)
    queue = deque([ipn.m0])
    while queue:
        m = queue.popleft()
        for t in range(len(ipn.transitions)):
            if covers(m, ipn.pre_vec[t]):
                m2 = fire(ipn, m, t)
                if m2 not in seen:
                    seen.add(m2)
                    budget.check(m2, ipn, len(seen))
                    queue.append(m2)
    return seen
