"""Boolean cubes over a fixed, ordered set of atomic propositions.

A cube is a conjunction of literals. It is stored as two bitmasks (positive
and negative literals) indexed by the proposition order of its ``PropSet``,
so two semantically equal cubes are also structurally equal. The
unsatisfiable cube is a regular value with ``false`` set and both masks
cleared.
"""

from __future__ import annotations

import re
from dataclasses import dataclass
from typing import Iterable, Mapping

__all__ = [
    "CubeError",
    "PropSet",
    "Cube",
    "Valuation",
    "Clause",
    "parse_cube",
    "parse_clause",
    "conj",
    "is_false",
    "satisfies",
    "violates_clause",
    "complete_valuation",
]

_NAME = re.compile(r"[A-Za-z_][A-Za-z0-9_.]*")


class CubeError(ValueError):
    """Raised for malformed cube/clause text or mixed proposition sets."""


class PropSet:
    """An ordered set of distinct proposition names."""

    __slots__ = ("names", "_index")

    def __init__(self, names: Iterable[str]):
        names = tuple(names)
        index = {}
        for i, name in enumerate(names):
            if not _NAME.fullmatch(name) or name in ("TRUE", "FALSE"):
                raise CubeError(f"invalid proposition name {name!r}")
            if name in index:
                raise CubeError(f"duplicate proposition {name!r}")
            index[name] = i
        self.names = names
        self._index = index

    def index(self, name: str) -> int:
        try:
            return self._index[name]
        except KeyError:
            raise CubeError(f"unknown proposition {name!r}") from None

    def __contains__(self, name: object) -> bool:
        return name in self._index

    def __len__(self) -> int:
        return len(self.names)

    def __iter__(self):
        return iter(self.names)

    def __eq__(self, other: object) -> bool:
        return isinstance(other, PropSet) and self.names == other.names

    def __hash__(self) -> int:
        return hash(self.names)

    def __repr__(self) -> str:
        return f"PropSet({list(self.names)!r})"

    @property
    def full_mask(self) -> int:
        return (1 << len(self.names)) - 1

    def top(self) -> Cube:
        return Cube(self, 0, 0)

    def bottom(self) -> Cube:
        return Cube(self, 0, 0, false=True)

    def cube(self, literals: Mapping[str, bool]) -> Cube:
        """Build a cube from ``{name: polarity}``."""
        pos = neg = 0
        for name, value in literals.items():
            bit = 1 << self.index(name)
            if value:
                pos |= bit
            else:
                neg |= bit
        return Cube(self, pos, neg)

    def valuation(self, assignment: Mapping[str, bool] | Iterable[str]) -> Valuation:
        """Build a valuation from a total ``{name: bool}`` map or from the
        collection of names that are true."""
        if isinstance(assignment, Mapping):
            missing = set(self.names) - set(assignment)
            if missing:
                raise CubeError(f"valuation misses {sorted(missing)}")
            extra = set(assignment) - set(self.names)
            if extra:
                raise CubeError(f"unknown propositions {sorted(extra)}")
            true_names = [n for n, v in assignment.items() if v]
        else:
            true_names = list(assignment)
        bits = 0
        for name in true_names:
            bits |= 1 << self.index(name)
        return Valuation(self, bits)


def _check_same(a: PropSet, b: PropSet) -> None:
    if a is not b and a != b:
        raise CubeError("operands are defined over different proposition sets")


@dataclass(frozen=True)
class Cube:
    over: PropSet
    pos: int
    neg: int
    false: bool = False

    def __post_init__(self):
        if self.false:
            object.__setattr__(self, "pos", 0)
            object.__setattr__(self, "neg", 0)
        elif self.pos & self.neg:
            object.__setattr__(self, "false", True)
            object.__setattr__(self, "pos", 0)
            object.__setattr__(self, "neg", 0)

    @property
    def is_top(self) -> bool:
        return not self.false and not (self.pos | self.neg)

    def literals(self) -> list[tuple[str, bool]]:
        """Literals in canonical proposition order."""
        out = []
        for i, name in enumerate(self.over.names):
            bit = 1 << i
            if self.pos & bit:
                out.append((name, True))
            elif self.neg & bit:
                out.append((name, False))
        return out

    def __and__(self, other: Cube) -> Cube:
        return conj(self, other)

    def __str__(self) -> str:
        if self.false:
            return "FALSE"
        if self.is_top:
            return "TRUE"
        return " & ".join(n if v else "!" + n for n, v in self.literals())

    def __repr__(self) -> str:
        return f"Cube({str(self)!r})"


@dataclass(frozen=True)
class Valuation:
    over: PropSet
    bits: int

    def __getitem__(self, name: str) -> bool:
        return bool(self.bits >> self.over.index(name) & 1)

    def as_dict(self) -> dict[str, bool]:
        return {n: bool(self.bits >> i & 1) for i, n in enumerate(self.over.names)}

    def as_cube(self) -> Cube:
        return Cube(self.over, self.bits, self.over.full_mask & ~self.bits)

    def __str__(self) -> str:
        return str(self.as_cube())


@dataclass(frozen=True)
class Clause:
    """A disjunction of literals; never a tautology."""

    over: PropSet
    pos: int
    neg: int

    def __post_init__(self):
        if not (self.pos | self.neg):
            raise CubeError("empty clause")
        if self.pos & self.neg:
            raise CubeError("clause contains p and !p and is always true")

    def literals(self) -> list[tuple[str, bool]]:
        return Cube(self.over, self.pos, self.neg).literals()

    def __str__(self) -> str:
        return " | ".join(n if v else "!" + n for n, v in self.literals())

    def __repr__(self) -> str:
        return f"Clause({str(self)!r})"


def _parse_literals(text: str, over: PropSet, sep: str, what: str):
    stripped = text.strip()
    if not stripped:
        raise CubeError(f"empty {what}")
    pos = neg = 0
    offset = 0
    for part in text.split(sep):
        lit = part.strip()
        col = offset + (len(part) - len(part.lstrip()))
        offset += len(part) + 1
        negated = lit.startswith("!")
        name = lit[1:].strip() if negated else lit
        if not _NAME.fullmatch(name):
            raise CubeError(f"syntax error in {what} {text!r} at position {col}: {lit!r}")
        if name not in over:
            raise CubeError(f"unknown proposition {name!r} in {what} {text!r}")
        bit = 1 << over.index(name)
        if negated:
            neg |= bit
        else:
            pos |= bit
    return pos, neg


def parse_cube(text: str, over: PropSet) -> Cube:
    """Parse ``lit & lit & ...`` where ``lit`` is ``name`` or ``!name``.

    ``TRUE`` and ``FALSE`` denote the constant cubes. Contradictory literals
    give the false cube rather than an error.
    """
    stripped = text.strip()
    if stripped == "TRUE":
        return over.top()
    if stripped == "FALSE":
        return over.bottom()
    pos, neg = _parse_literals(text, over, "&", "cube")
    return Cube(over, pos, neg)


def parse_clause(text: str, over: PropSet) -> Clause:
    """Parse ``lit | lit | ...``."""
    pos, neg = _parse_literals(text, over, "|", "clause")
    return Clause(over, pos, neg)


def conj(a: Cube, b: Cube) -> Cube:
    _check_same(a.over, b.over)
    if a.false or b.false:
        return a.over.bottom()
    return Cube(a.over, a.pos | b.pos, a.neg | b.neg)


def conj_all(cubes: Iterable[Cube], over: PropSet) -> Cube:
    result = over.top()
    for c in cubes:
        result = conj(result, c)
    return result


def is_false(c: Cube) -> bool:
    return c.false


def satisfies(v: Valuation, c: Cube) -> bool:
    _check_same(v.over, c.over)
    if c.false:
        return False
    return not (c.pos & ~v.bits) and not (c.neg & v.bits)


def violates_clause(c: Cube, cl: Clause) -> bool:
    """True iff ``c & cl`` is unsatisfiable, i.e. ``c`` negates every
    literal of the clause."""
    _check_same(c.over, cl.over)
    if c.false:
        return True
    return (cl.pos & c.neg) == cl.pos and (cl.neg & c.pos) == cl.neg


def complete_valuation(c: Cube, default: bool = False) -> Valuation:
    if c.false:
        raise CubeError("cannot complete the false cube to a valuation")
    free = c.over.full_mask & ~(c.pos | c.neg)
    return Valuation(c.over, c.pos | (free if default else 0))
