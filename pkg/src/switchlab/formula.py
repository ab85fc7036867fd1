"""Oracle variables, their block structure, and width-bounded DNF/CNF formulas.

An oracle variable is addressed by a base word ``b`` (a 0/1 string) and a
tuple of bounded coordinates ``(y1, ..., yk)``.  The scale of a variable is
``M = 2**len(b)``.  Variables agreeing on everything but the last coordinate
form a *block*; blocks agreeing on everything but their last coordinate form
a *group*.

Words are ordered shortlex (shorter words first, then lexicographically), and
variables lexicographically by ``(b, y1, ..., yk)`` on top of that.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field
from typing import Iterable, Mapping, Sequence

from .errors import MissingVariableError, SwitchlabError

__all__ = [
    "VarId", "BlockId", "Space", "VarSpace", "Literal", "Dnf", "Residual",
    "SATISFIED", "enumerate_vars", "block_of", "eval_dnf",
    "restrict_conjunction", "first_live_conjunction", "simplify",
    "scale_of", "word_key",
]


def word_key(word: str):
    return (len(word), word)


def scale_of(word: str) -> int:
    return 1 << len(word)


@dataclass(frozen=True, order=True, slots=True)
class VarId:
    _len: int = field(init=False, repr=False)
    b: str
    ys: tuple

    def __post_init__(self):
        object.__setattr__(self, "_len", len(self.b))
        object.__setattr__(self, "ys", tuple(int(y) for y in self.ys))

    @property
    def scale(self) -> int:
        return 1 << self._len

    @property
    def block(self) -> "BlockId":
        return BlockId(self.b, self.ys[:-1])

    def __getattr__(self, name):
        # y1, y2, ... as read-only aliases into ys
        if name.startswith("y") and name[1:].isdigit():
            i = int(name[1:]) - 1
            ys = object.__getattribute__(self, "ys")
            if 0 <= i < len(ys):
                return ys[i]
        raise AttributeError(name)

    def __str__(self):
        return f"<{self.b or 'ε'},{','.join(map(str, self.ys))}>"

    def to_json(self) -> dict:
        d = {"b": self.b}
        d.update({f"y{i + 1}": y for i, y in enumerate(self.ys)})
        return d

    @classmethod
    def from_json(cls, d: Mapping) -> "VarId":
        ys = []
        i = 1
        while f"y{i}" in d:
            ys.append(int(d[f"y{i}"]))
            i += 1
        return cls(str(d["b"]), tuple(ys))


@dataclass(frozen=True, order=True, slots=True)
class BlockId:
    _len: int = field(init=False, repr=False)
    b: str
    ys: tuple

    def __post_init__(self):
        object.__setattr__(self, "_len", len(self.b))
        object.__setattr__(self, "ys", tuple(int(y) for y in self.ys))

    @property
    def scale(self) -> int:
        return 1 << self._len

    @property
    def group(self) -> tuple:
        return (self.b, self.ys[:-1])

    def __str__(self):
        return f"<{self.b or 'ε'},{','.join(map(str, self.ys))},·>"

    def to_json(self) -> dict:
        d = {"b": self.b}
        d.update({f"y{i + 1}": y for i, y in enumerate(self.ys)})
        return d

    @classmethod
    def from_json(cls, d: Mapping) -> "BlockId":
        v = VarId.from_json(d)
        return cls(v.b, v.ys)


def block_of(var: VarId) -> BlockId:
    return var.block


class Space:
    """A finite, canonically ordered set of oracle variables grouped into blocks.

    Used directly for hand-built or collapsed variable sets; ``VarSpace``
    generates the regular product spaces.
    """

    def __init__(self, variables: Iterable[VarId]):
        self.variables = tuple(sorted(set(variables)))
        self.index = {v: i for i, v in enumerate(self.variables)}
        members: dict[BlockId, list] = {}
        for v in self.variables:
            members.setdefault(v.block, []).append(v)
        self.blocks = tuple(sorted(members))
        self.block_vars = {blk: tuple(vs) for blk, vs in members.items()}
        self.block_index = {blk: len(self.variables) + i for i, blk in enumerate(self.blocks)}

    def __len__(self):
        return len(self.variables)

    def __contains__(self, var):
        return var in self.index

    def __eq__(self, other):
        return isinstance(other, Space) and self.variables == other.variables

    def __hash__(self):
        return hash(self.variables)

    def groups(self) -> dict:
        out: dict[tuple, list] = {}
        for blk in self.blocks:
            out.setdefault(blk.group, []).append(blk)
        return out

    def words(self) -> list:
        return sorted({v.b for v in self.variables}, key=word_key)

    def to_json(self) -> dict:
        return {"variables": [v.to_json() for v in self.variables]}

    @staticmethod
    def from_json(d: Mapping) -> "Space":
        if "variables" in d:
            return Space(VarId.from_json(v) for v in d["variables"])
        return VarSpace.from_json(d)


class VarSpace(Space):
    """Product space: every base word ``b`` with coordinates
    ``y1..y_{k-1} < M**e1`` and ``y_k < M**e2`` (``k = arity``)."""

    def __init__(self, words: Sequence[str], e1: int = 4, e2: int = 2, arity: int = 3):
        if e1 < 1 or e2 < 1:
            raise SwitchlabError("exponents e1, e2 must be >= 1")
        if arity < 1:
            raise SwitchlabError("arity must be >= 1")
        words = sorted(set(words), key=word_key)
        for w in words:
            if not w or set(w) - {"0", "1"}:
                raise SwitchlabError(f"base word must be a non-empty 0/1 string, got {w!r}")
        self.word_list = tuple(words)
        self.e1, self.e2, self.arity = e1, e2, arity
        super().__init__(self._generate())

    def _generate(self):
        for b in self.word_list:
            m = scale_of(b)
            ranges = [range(m ** self.e1)] * (self.arity - 1) + [range(m ** self.e2)]
            for ys in itertools.product(*ranges):
                yield VarId(b, ys)

    @classmethod
    def from_lengths(cls, lengths: Sequence[int], e1: int = 4, e2: int = 2, arity: int = 3,
                     words_per_length: int | None = None) -> "VarSpace":
        words = []
        for n in sorted(set(lengths)):
            ws = ["".join(bits) for bits in itertools.product("01", repeat=n)]
            words.extend(ws if words_per_length is None else ws[:words_per_length])
        return cls(words, e1, e2, arity)

    def block_size(self, word: str) -> int:
        return scale_of(word) ** self.e2

    @property
    def scale_range(self) -> list:
        return sorted({len(w) for w in self.word_list})

    def to_json(self) -> dict:
        return {"scaleRange": self.scale_range, "words": list(self.word_list),
                "e1": self.e1, "e2": self.e2, "tupleArity": self.arity}

    @classmethod
    def from_json(cls, d: Mapping) -> "VarSpace":
        e1, e2, arity = int(d.get("e1", 4)), int(d.get("e2", 2)), int(d.get("tupleArity", 3))
        if "words" in d:
            return cls(list(d["words"]), e1, e2, arity)
        return cls.from_lengths(d.get("scaleRange", []), e1, e2, arity,
                                d.get("wordsPerLength"))

    def __repr__(self):
        return f"VarSpace(words={list(self.word_list)}, e1={self.e1}, e2={self.e2}, arity={self.arity})"


def enumerate_vars(space: Space) -> list:
    return list(space.variables)


@dataclass(frozen=True, order=True, slots=True)
class Literal:
    var: VarId
    positive: bool = True

    def __neg__(self):
        return Literal(self.var, not self.positive)

    def satisfied_by(self, bit: int) -> bool:
        return bool(bit) == self.positive

    def __str__(self):
        return ("" if self.positive else "¬") + str(self.var)

    def to_json(self) -> dict:
        d = self.var.to_json()
        d["sign"] = "+" if self.positive else "-"
        return d

    @classmethod
    def from_json(cls, d: Mapping) -> "Literal":
        if d.get("sign", "+") not in ("+", "-"):
            raise SwitchlabError(f"bad literal sign {d.get('sign')!r}")
        return cls(VarId.from_json(d), d.get("sign", "+") == "+")


@dataclass(frozen=True)
class Dnf:
    """Ordered list of width-bounded terms.

    With ``polarity="dnf"`` the terms are conjunctions and the formula is their
    disjunction.  With ``polarity="cnf"`` the terms are clauses and the formula
    is their conjunction.  Term order matters (it fixes "the first live term").
    """

    conjunctions: tuple
    width: int | None = None
    polarity: str = "dnf"

    def __post_init__(self):
        terms = tuple(tuple(t) for t in self.conjunctions)
        object.__setattr__(self, "conjunctions", terms)
        if self.polarity not in ("dnf", "cnf"):
            raise SwitchlabError(f"polarity must be 'dnf' or 'cnf', got {self.polarity!r}")
        longest = max((len(t) for t in terms), default=0)
        if self.width is None:
            object.__setattr__(self, "width", longest)
        elif longest > self.width:
            raise SwitchlabError(f"term of {longest} literals exceeds width {self.width}")
        for t in terms:
            seen = {}
            for lit in t:
                if seen.get(lit.var, lit.positive) != lit.positive:
                    raise SwitchlabError(f"term contains both polarities of {lit.var}")
                seen[lit.var] = lit.positive

    def __len__(self):
        return len(self.conjunctions)

    def variables(self) -> list:
        return sorted({lit.var for t in self.conjunctions for lit in t})

    def negation(self) -> "Dnf":
        """De Morgan dual: literal-negated terms with the other polarity."""
        flip = "cnf" if self.polarity == "dnf" else "dnf"
        return Dnf(tuple(tuple(-lit for lit in t) for t in self.conjunctions), self.width, flip)

    def to_json(self) -> dict:
        return {"polarity": self.polarity, "width": self.width,
                "conjunctions": [[lit.to_json() for lit in t] for t in self.conjunctions]}

    @classmethod
    def from_json(cls, d: Mapping) -> "Dnf":
        terms = [[Literal.from_json(x) for x in t] for t in d.get("conjunctions", [])]
        return cls(terms, d.get("width"), d.get("polarity", "dnf"))

    def __str__(self):
        inner, outer = (" ∧ ", " ∨ ") if self.polarity == "dnf" else (" ∨ ", " ∧ ")
        if not self.conjunctions:
            return "0" if self.polarity == "dnf" else "1"
        return outer.join("(" + (inner.join(map(str, t)) or ("1" if self.polarity == "dnf" else "0")) + ")"
                          for t in self.conjunctions)


def eval_dnf(dnf: Dnf, assignment: Mapping) -> int:
    for v in dnf.variables():
        if assignment.get(v) not in (0, 1):
            raise MissingVariableError(v)
    if dnf.polarity == "dnf":
        return int(any(all(lit.satisfied_by(assignment[lit.var]) for lit in t)
                       for t in dnf.conjunctions))
    return int(all(any(lit.satisfied_by(assignment[lit.var]) for lit in t)
                   for t in dnf.conjunctions))


class Residual(tuple):
    """Literals of a conjunction left undecided by a restriction."""

    def __repr__(self):
        return f"Residual({', '.join(map(str, self))})"


SATISFIED = "satisfied"


def restrict_conjunction(conj: Sequence[Literal], r):
    """``False`` if ``r`` violates a literal, ``True`` if it satisfies all of
    them, else the ``Residual`` of literals on variables ``r`` leaves open.

    ``r`` is anything with ``.get(var)`` returning 0, 1, or ``None``/``"*"``
    for an open variable (a dict, a ``ChainMap``, a ``Restriction``).
    """
    rest = []
    for lit in conj:
        bit = r.get(lit.var)
        if bit == 0 or bit == 1:
            if not lit.satisfied_by(bit):
                return False
        else:
            rest.append(lit)
    return Residual(rest) if rest else True


def first_live_conjunction(dnf: Dnf, r):
    for i, conj in enumerate(dnf.conjunctions):
        res = restrict_conjunction(conj, r)
        if res is True:
            return SATISFIED
        if res is not False:
            return i
    return None


def simplify(dnf: Dnf, r) -> Dnf:
    """Apply ``r`` to every term, dropping decided literals and dead terms.

    A DNF loses falsified terms; a CNF loses satisfied clauses.  A term that
    becomes decided the other way is kept as the empty term, so the constant
    value survives (empty conjunction = 1, empty clause = 0).
    """
    out = []
    for t in dnf.conjunctions:
        kept = []
        dead = False
        for lit in t:
            bit = r.get(lit.var)
            if bit == 0 or bit == 1:
                sat = lit.satisfied_by(bit)
                if sat == (dnf.polarity == "cnf"):
                    dead = True
                    break
            else:
                kept.append(lit)
        if not dead:
            out.append(tuple(kept))
    return Dnf(out, dnf.width, dnf.polarity)
