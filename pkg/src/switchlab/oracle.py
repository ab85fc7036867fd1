"""Two restriction rounds and a diagonal completion that build a finite oracle.

For every input word ``a`` the target property is an OR of width-``w`` CNFs
over oracle bits ``alpha(b, y1, y2, y3)``.  The goal is a total table on which,
for every ``a >= a_min``, that OR agrees with
``forall y1 exists y2 forall y3 alpha(a, y1, y2, y3)``.

Round one samples ``rho`` with normal polarity until every CNF has a shallow
canonical tree.  Each tree is flattened to the DNF of its 1-branches.  After
``g`` and ``h`` every surviving block holds one open bit, so the rest of the
construction works over triples ``<b, y1, y2>``.  Round two does the same with
flipped polarity on those triples, and leaves each ``a`` with a designated set
``S(a)`` whose AND is the target property.  The completion then walks each
``a``'s tree (unset queries answered 1) and sets ``S(a)`` to agree with it.

``restriction_round`` is polarity-agnostic so deeper alternations can chain
rounds the same way; ``build_oracle`` wires up the two-round case.
"""

from __future__ import annotations

import json
import random
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Mapping, Sequence

import numpy as np

from .decision_tree import CanonicalTreeParams, Leaf, canonical_tree, height, tree_to_dnf
from .errors import ConfigError, HellerExhaustedError, SwitchlabError, TriesExhaustedError
from .formula import Dnf, Literal, Space, VarId, VarSpace, eval_dnf, simplify, word_key
from .restriction import (FLIPPED, NORMAL, STAR, BlockState, Restriction, all_fixed_state,
                          extend_g, extend_h, sample_rho)
from .rng import CounterRng


def _frac(p):
    return None if p is None else Fraction(p)


@dataclass(frozen=True)
class OracleParams:
    words: tuple = ("0", "1", "00", "01", "10", "11")
    e1: int = 1
    e2: int = 1
    a_min: str = "00"
    b_min: int = 2
    width: int = 2
    disjuncts: int = 4
    clauses: int = 3
    small_block_threshold: int = 2
    t: int = 6
    T: int = 16
    quota1: int = 3
    quota2: int = 2
    p1: Fraction | None = None
    p2: Fraction | None = None
    max_tries: int = 1000

    def __post_init__(self):
        object.__setattr__(self, "words", tuple(sorted(set(self.words), key=word_key)))
        object.__setattr__(self, "p1", _frac(self.p1))
        object.__setattr__(self, "p2", _frac(self.p2))
        if self.a_min not in self.words:
            raise ConfigError(f"a_min {self.a_min!r} is not one of the words", ["aMin"])
        if len(self.a_min) < self.b_min:
            raise ConfigError("a_min must be at least b_min long so every S(a) is trimmed",
                              ["aMin"])
        if self.max_tries < 1:
            raise ConfigError("max_tries must be >= 1", ["maxTries"])
        for name in ("quota1", "quota2", "width", "t", "T"):
            if getattr(self, name) < 0:
                raise ConfigError(f"{name} must be >= 0", [name])

    def inputs(self) -> list:
        """Words ``a >= a_min`` in shortlex order."""
        return [a for a in self.words if word_key(a) >= word_key(self.a_min)]

    def space(self) -> VarSpace:
        return VarSpace(self.words, self.e1, self.e2, arity=3)

    def to_json(self) -> dict:
        return {
            "words": list(self.words), "e1": self.e1, "e2": self.e2, "aMin": self.a_min,
            "bMin": self.b_min, "width": self.width, "disjuncts": self.disjuncts,
            "clauses": self.clauses, "smallBlockThreshold": self.small_block_threshold,
            "t": self.t, "T": self.T, "quota1": self.quota1, "quota2": self.quota2,
            "p1": None if self.p1 is None else str(self.p1),
            "p2": None if self.p2 is None else str(self.p2),
            "maxTries": self.max_tries,
        }

    @classmethod
    def from_json(cls, d: Mapping) -> "OracleParams":
        keys = {"words": "words", "e1": "e1", "e2": "e2", "aMin": "a_min", "bMin": "b_min",
                "width": "width", "disjuncts": "disjuncts", "clauses": "clauses",
                "smallBlockThreshold": "small_block_threshold", "t": "t", "T": "T",
                "quota1": "quota1", "quota2": "quota2", "p1": "p1", "p2": "p2",
                "maxTries": "max_tries"}
        return cls(**{keys[k]: v for k, v in d.items() if k in keys})


@dataclass(frozen=True)
class FormulaFamily:
    """Per input word: an ordered list of CNFs whose OR is the property."""

    per_input: Mapping
    generation: Mapping = field(default_factory=dict)

    @classmethod
    def random(cls, space: Space, inputs: Sequence[str], seed: int, disjuncts: int = 4,
               clauses: int = 3, width: int = 2) -> "FormulaFamily":
        rnd = random.Random(seed)
        vs = list(space.variables)
        per = {}
        for a in inputs:
            cnfs = []
            for _ in range(disjuncts):
                cls_ = []
                for _ in range(clauses):
                    xs = rnd.sample(vs, width)
                    cls_.append(tuple(Literal(x, rnd.random() < 0.5) for x in sorted(xs)))
                cnfs.append(Dnf(cls_, width, "cnf"))
            per[a] = tuple(cnfs)
        gen = {"kind": "random", "seed": seed, "disjuncts": disjuncts, "clauses": clauses,
               "width": width}
        return cls(per, gen)

    @classmethod
    def constant(cls, inputs: Sequence[str], value: bool, width: int = 2) -> "FormulaFamily":
        # true: one CNF with no clauses; false: no disjuncts at all
        per = {a: (Dnf((), width, "cnf"),) if value else () for a in inputs}
        return cls(per, {"kind": "constant", "value": bool(value)})

    def evaluate(self, a: str, bits: Mapping) -> int:
        return int(any(eval_dnf(c, bits) for c in self.per_input[a]))

    def to_json(self) -> dict:
        return {"generation": dict(self.generation),
                "perInput": {a: [c.to_json() for c in cs] for a, cs in self.per_input.items()}}

    @classmethod
    def from_json(cls, d: Mapping) -> "FormulaFamily":
        per = {a: tuple(Dnf.from_json(c) for c in cs) for a, cs in d["perInput"].items()}
        return cls(per, d.get("generation", {}))


@dataclass(frozen=True)
class Certification:
    tries: int
    failures: Mapping
    max_height: int

    def to_json(self) -> dict:
        return {"tries": self.tries, "failures": dict(self.failures), "maxHeight": self.max_height}


def _condition_failure(space: Space, rho: Restriction, formulas, params: CanonicalTreeParams,
                       cap: int, quota: int, b_min: int):
    """Name of the first violated condition, or the largest tree height."""
    big = [blk for blk in space.blocks if len(blk.b) >= b_min]
    fixed = all_fixed_state(rho.polarity)
    if any(rho.blocks[blk] == fixed for blk in big):
        return "allFixedBlock", None
    count: dict = {}
    for blk in big:
        count.setdefault(blk.group, 0)
        if rho.blocks[blk] == BlockState.STAR:
            count[blk.group] += 1
    if any(n < quota for n in count.values()):
        return "starQuota", None
    worst = 0
    for f in formulas:
        worst = max(worst, height(canonical_tree(f, rho, params)))
        if worst > cap:
            return "treeHeight", None
    return None, worst


def restriction_round(space: Space, formulas, rng: CounterRng, polarity: str,
                      params: CanonicalTreeParams, cap: int, quota: int, b_min: int,
                      max_tries: int, p=None) -> tuple:
    """Rejection-sample one restriction meeting all three conditions."""
    failures = {"allFixedBlock": 0, "starQuota": 0, "treeHeight": 0}
    for trial in range(max_tries):
        rho = sample_rho(space, rng, polarity, trial, p)
        bad, worst = _condition_failure(space, rho, formulas, params, cap, quota, b_min)
        if bad is None:
            return rho, Certification(trial + 1, failures, worst)
        failures[bad] += 1
    raise TriesExhaustedError(max_tries, failures)


def sample_good_rho(fam: FormulaFamily, space: Space, params: OracleParams, rng: CounterRng,
                    max_tries: int | None = None) -> tuple:
    tp = CanonicalTreeParams(params.small_block_threshold)
    formulas = [c for a in params.inputs() for c in fam.per_input[a]]
    return restriction_round(space, formulas, rng, NORMAL, tp, params.t, params.quota1,
                             params.b_min, max_tries or params.max_tries, params.p1)


@dataclass
class FirstRound:
    rho: Restriction
    h: Restriction
    per_a: dict
    space2: Space
    lift: dict
    per_a_collapsed: dict
    certification: Certification


def first_round(fam: FormulaFamily, rho: Restriction, params: OracleParams,
                certification: Certification | None = None) -> FirstRound:
    tp = CanonicalTreeParams(params.small_block_threshold)
    hr = extend_h(extend_g(rho), params.quota1, params.b_min)
    per_a = {}
    for a in params.inputs():
        terms = []
        for cnf in fam.per_input[a]:
            t = canonical_tree(cnf, rho, tp)
            terms.extend(tree_to_dnf(t, 1).conjunctions)
        per_a[a] = simplify(Dnf(terms, max(params.t, 0), "dnf"), hr)
    # each surviving block has exactly one open bit; address it by its block
    lift = {VarId(x.b, x.ys[:-1]): x for x in hr.stars()}
    down = {x: c for c, x in lift.items()}
    space2 = Space(lift)
    collapsed = {}
    for a, d in per_a.items():
        terms = [tuple(Literal(down[lit.var], lit.positive) for lit in t) for t in d.conjunctions]
        collapsed[a] = Dnf(terms, d.width, "dnf")
    return FirstRound(rho, hr, per_a, space2, lift, collapsed, certification)


@dataclass
class SecondRound:
    rho_hat: Restriction
    h_hat: Restriction
    trees: dict
    designated: dict
    certification: Certification

    def designated_maps(self) -> dict:
        """Per ``a``: ``{y1: (y2, y3)}`` for the bits of ``S(a)``."""
        return {a: {x.ys[0]: (x.ys[1], x.ys[2]) for x in xs} for a, xs in self.designated.items()}


def second_round(first: FirstRound, rng: CounterRng, params: OracleParams,
                 max_tries: int | None = None) -> SecondRound:
    tp = CanonicalTreeParams(params.small_block_threshold)
    inputs = params.inputs()
    formulas = [first.per_a_collapsed[a] for a in inputs]
    rho_hat, cert = restriction_round(first.space2, formulas, rng, FLIPPED, tp, params.T,
                                      params.quota2, params.b_min,
                                      max_tries or params.max_tries, params.p2)
    hh = extend_h(extend_g(rho_hat), params.quota2, params.b_min)
    trees = {a: canonical_tree(first.per_a_collapsed[a], rho_hat, tp) for a in inputs}
    designated = {}
    for a in inputs:
        open_ = [c for c in hh.stars() if c.b == a]
        designated[a] = tuple(sorted(first.lift[c] for c in open_))
    return SecondRound(rho_hat, hh, trees, designated, cert)


@dataclass(frozen=True)
class StageEntry:
    stage: str
    assignments: tuple
    info: Mapping = field(default_factory=dict)

    def to_json(self) -> dict:
        return {"stage": self.stage, "info": dict(self.info),
                "assign": [[x.to_json(), b] for x, b in self.assignments]}

    @classmethod
    def from_json(cls, d: Mapping) -> "StageEntry":
        return cls(d["stage"], tuple((VarId.from_json(x), int(b)) for x, b in d["assign"]),
                   d.get("info", {}))


def replay(space: Space, log: Sequence[StageEntry]) -> dict:
    """Re-apply a stage log, refusing to rewrite any bit."""
    bits: dict = {}
    for entry in log:
        for x, b in entry.assignments:
            if x not in space:
                raise SwitchlabError(f"stage {entry.stage!r} assigns {x} outside the space")
            if x in bits:
                raise SwitchlabError(f"stage {entry.stage!r} rewrites {x}")
            bits[x] = b
    missing = len(space) - len(bits)
    if missing:
        raise SwitchlabError(f"stage log leaves {missing} bit(s) unset")
    return bits


@dataclass
class OracleTable:
    space: Space
    bits: dict
    designated: dict
    stage_log: list
    seed: int | None = None

    def bit_string(self) -> str:
        return "".join(str(self.bits[x]) for x in self.space.variables)

    def bitmap(self) -> bytes:
        arr = np.array([self.bits[x] for x in self.space.variables], dtype=bool)
        return np.packbits(arr, bitorder="little").tobytes()

    def sidecar(self) -> dict:
        return {
            "seed": self.seed,
            "space": self.space.to_json(),
            "nbits": len(self.space),
            "designated": {a: [x.to_json() for x in xs] for a, xs in self.designated.items()},
        }

    def to_json(self) -> dict:
        d = self.sidecar()
        d["bits"] = self.bit_string()
        return d

    def stage_log_jsonl(self) -> str:
        return "".join(json.dumps(e.to_json(), sort_keys=True, separators=(",", ":")) + "\n"
                       for e in self.stage_log)

    @classmethod
    def from_json(cls, d: Mapping, stage_log: Sequence[StageEntry] = ()) -> "OracleTable":
        space = Space.from_json(d["space"])
        bits = {x: int(c) for x, c in zip(space.variables, d["bits"])}
        if len(d["bits"]) != len(space):
            raise SwitchlabError("bit string length does not match the space")
        des = {a: tuple(VarId.from_json(x) for x in xs) for a, xs in d.get("designated", {}).items()}
        return cls(space, bits, des, list(stage_log), d.get("seed"))

    @classmethod
    def from_bitmap(cls, data: bytes, sidecar: Mapping) -> "OracleTable":
        space = Space.from_json(sidecar["space"])
        raw = np.frombuffer(data, dtype=np.uint8)
        flat = np.unpackbits(raw, bitorder="little")[: len(space)]
        bits = {x: int(b) for x, b in zip(space.variables, flat)}
        des = {a: tuple(VarId.from_json(x) for x in xs) for a, xs in sidecar.get("designated", {}).items()}
        return cls(space, bits, des, [], sidecar.get("seed"))


def _walk(tree, lift: Mapping, bits: dict) -> tuple:
    """Follow ``tree`` answering unset queries with 1; returns (value, new bits)."""
    new = []
    while not isinstance(tree, Leaf):
        x = lift[tree.var]
        if x not in bits:
            bits[x] = 1
            new.append((x, 1))
        tree = tree.child(bits[x])
    return tree.value, new


def heller_complete(space: Space, first: FirstRound, second: SecondRound, params: OracleParams,
                    seed: int | None = None) -> OracleTable:
    bits: dict = {}
    log: list = []

    def commit(stage, pairs, **info):
        for x, b in pairs:
            if x in bits and bits[x] != b:
                raise SwitchlabError(f"{stage} would rewrite {x}")
            bits[x] = b
        log.append(StageEntry(stage, tuple(pairs), info))

    commit("round1", [(x, s) for x, s in sorted(first.h.vars.items()) if s != STAR],
           tries=first.certification.tries if first.certification else None)
    commit("round2", [(first.lift[c], s) for c, s in sorted(second.h_hat.vars.items()) if s != STAR],
           tries=second.certification.tries)
    for a in params.inputs():
        before = dict(bits)
        value, new = _walk(second.trees[a], first.lift, before)
        commit(f"walk:{a}", new, value=value)
        unset = [x for x in second.designated[a] if x not in bits]
        if value:
            pairs = [(x, 1) for x in unset]
        else:
            if not unset:
                raise HellerExhaustedError(a)
            pairs = [(unset[0], 0)] + [(x, 1) for x in unset[1:]]
        commit(f"designated:{a}", pairs, value=value)
    commit("fill", [(x, 1) for x in space.variables if x not in bits])
    return OracleTable(space, bits, dict(second.designated), log, seed)


@dataclass(frozen=True)
class EquivalenceRow:
    a: str
    phi: int
    target: int

    @property
    def ok(self) -> bool:
        return self.phi == self.target


@dataclass(frozen=True)
class EquivalenceReport:
    rows: tuple

    @property
    def passed(self) -> bool:
        return all(r.ok for r in self.rows)

    def to_json(self) -> dict:
        return {"passed": self.passed,
                "rows": [{"a": r.a, "phi": r.phi, "target": r.target, "ok": r.ok} for r in self.rows]}


def forall_exists_forall(table: OracleTable, a: str) -> int:
    rows: dict = {}
    for x in table.space.variables:
        if x.b == a:
            rows.setdefault(x.ys[0], {}).setdefault(x.ys[1], []).append(table.bits[x])
    return int(all(any(all(y3s) for y3s in by_y2.values()) for by_y2 in rows.values()))


def verify_equivalence(fam: FormulaFamily, table: OracleTable, a_min: str) -> EquivalenceReport:
    rows = []
    for a in sorted(fam.per_input, key=word_key):
        if word_key(a) < word_key(a_min):
            continue
        rows.append(EquivalenceRow(a, fam.evaluate(a, table.bits), forall_exists_forall(table, a)))
    return EquivalenceReport(tuple(rows))


@dataclass
class OracleBuild:
    params: OracleParams
    seed: int
    family: FormulaFamily
    first: FirstRound
    second: SecondRound
    table: OracleTable
    report: EquivalenceReport


def build_oracle(params: OracleParams, seed: int, family: FormulaFamily | None = None) -> OracleBuild:
    space = params.space()
    fam = family or FormulaFamily.random(space, params.inputs(), seed, params.disjuncts,
                                         params.clauses, params.width)
    rho, cert = sample_good_rho(fam, space, params, CounterRng(seed, 1))
    first = first_round(fam, rho, params, cert)
    second = second_round(first, CounterRng(seed, 2), params)
    table = heller_complete(space, first, second, params, seed)
    return OracleBuild(params, seed, fam, first, second, table,
                       verify_equivalence(fam, table, params.a_min))
