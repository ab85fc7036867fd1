"""Restrictions and the two-stage blocked random restriction process.

First stage: every variable independently gets the *fixed constant* (1 under
normal polarity, 0 under flipped) with probability ``1 - p`` and is starred with
probability ``p``.  Second stage: every block that is not entirely fixed
becomes a *converted* block (its stars turn into the other constant) with
probability ``1 - p``, or a *star block* (its stars stay open) with probability
``p``.  By default ``p = 1/M`` with ``M`` the block's own scale; a uniform
override can be passed as ``p=``.

All probabilities are exact ``Fraction`` values.
"""

from __future__ import annotations

import enum
import itertools
from dataclasses import dataclass, field
from fractions import Fraction
from functools import cached_property
from typing import Iterable, Iterator, Mapping

import numpy as np

from .errors import BudgetExceededError, MalformedRestrictionError, OverlapError, QuotaError
from .formula import BlockId, Space, VarId
from .rng import CounterRng, threshold

STAR = "*"
NORMAL = "normal"
FLIPPED = "flipped"


class BlockState(str, enum.Enum):
    ALL_ONES = "allOnes"
    ALL_ZEROS = "allZeros"
    ZERO_BLOCK = "zeroBlock"
    ONE_BLOCK = "oneBlock"
    STAR = "starBlock"
    UNDETERMINED = "undetermined"


def fixed_value(polarity: str) -> int:
    if polarity == NORMAL:
        return 1
    if polarity == FLIPPED:
        return 0
    raise ValueError(f"unknown polarity {polarity!r}")


def all_fixed_state(polarity: str) -> BlockState:
    return BlockState.ALL_ONES if polarity == NORMAL else BlockState.ALL_ZEROS


def converted_state(polarity: str) -> BlockState:
    return BlockState.ZERO_BLOCK if polarity == NORMAL else BlockState.ONE_BLOCK


def star_probability(block: BlockId, p=None) -> Fraction:
    return Fraction(1, block.scale) if p is None else Fraction(p)


@dataclass(frozen=True)
class Restriction:
    """Partial assignment ``var -> 0 | 1 | '*'`` with per-block states.

    Variables absent from ``vars`` are outside the restriction's domain.  The
    *assigned domain* is the set of variables mapped to 0 or 1.
    """

    vars: Mapping = field(default_factory=dict)
    blocks: Mapping = field(default_factory=dict)
    polarity: str = NORMAL
    stage: str = field(default="", compare=False)

    @property
    def v(self) -> int:
        return fixed_value(self.polarity)

    @cached_property
    def fixed(self) -> dict:
        return {x: s for x, s in self.vars.items() if s != STAR}

    def get(self, var, default=None):
        s = self.vars.get(var)
        return default if s is None or s == STAR else s

    def stars(self) -> list:
        return sorted(x for x, s in self.vars.items() if s == STAR)

    def block_members(self) -> dict:
        out: dict[BlockId, list] = {}
        for x in sorted(self.vars):
            out.setdefault(x.block, []).append(x)
        return out

    def star_blocks(self) -> list:
        return sorted(b for b, s in self.blocks.items() if s == BlockState.STAR)

    def representative(self, block: BlockId):
        """The open variable with the smallest last coordinate in ``block``."""
        cands = [x for x in self.vars if x.block == block and self.vars[x] == STAR]
        return min(cands) if cands else None

    def key(self) -> tuple:
        return (self.polarity, tuple(sorted(self.vars.items())))

    def with_stage(self, stage: str) -> "Restriction":
        return Restriction(self.vars, self.blocks, self.polarity, stage)

    def to_json(self) -> dict:
        return {
            "vars": [{"var": x.to_json(), "state": str(s)} for x, s in sorted(self.vars.items())],
            "blocks": [{"block": b.to_json(), "state": s.value} for b, s in sorted(self.blocks.items())],
            "stage": self.stage,
            "polarity": self.polarity,
        }

    @classmethod
    def from_json(cls, d: Mapping) -> "Restriction":
        def state(s):
            return STAR if s == STAR else int(s)
        vs = {VarId.from_json(e["var"]): state(e["state"]) for e in d.get("vars", [])}
        bs = {BlockId.from_json(e["block"]): BlockState(e["state"]) for e in d.get("blocks", [])}
        return cls(vs, bs, d.get("polarity", NORMAL), d.get("stage", ""))

    def __str__(self):
        body = " ".join(f"{x}={s}" for x, s in sorted(self.vars.items()))
        return f"{self.stage or 'r'}[{body}]"


EMPTY = Restriction({}, {}, NORMAL, "")


def derive_block_states(var_states: Mapping, polarity: str = NORMAL) -> dict:
    """Block states implied by a total-on-its-blocks assignment of 0/1/*.

    A block mixing stars with the converted constant has probability zero and
    is rejected.
    """
    v = fixed_value(polarity)
    seen: dict[BlockId, set] = {}
    for x, s in var_states.items():
        seen.setdefault(x.block, set()).add(s)
    out = {}
    for blk, states in seen.items():
        if STAR in states:
            if (1 - v) in states:
                raise MalformedRestrictionError(f"block {blk} mixes stars with {1 - v}s")
            out[blk] = BlockState.STAR
        elif (1 - v) in states:
            out[blk] = converted_state(polarity)
        else:
            out[blk] = all_fixed_state(polarity)
    return out


def as_event(r: Restriction, stage: str | None = None) -> Restriction:
    """Reinterpret ``r`` as an outcome of the random process."""
    return Restriction(dict(r.vars), derive_block_states(r.vars, r.polarity), r.polarity,
                       r.stage if stage is None else stage)


def validate(r: Restriction) -> None:
    v = r.v
    members = r.block_members()
    for blk, state in r.blocks.items():
        states = {r.vars[x] for x in members.get(blk, ())}
        if state == BlockState.STAR and STAR not in states:
            raise MalformedRestrictionError(f"star block {blk} has no starred variable")
        if state == all_fixed_state(r.polarity) and states - {v}:
            raise MalformedRestrictionError(f"block {blk} is marked all-{v} but is not")
        if state in (BlockState.ALL_ONES, BlockState.ALL_ZEROS, BlockState.ZERO_BLOCK,
                     BlockState.ONE_BLOCK) and state not in (all_fixed_state(r.polarity),
                                                             converted_state(r.polarity)):
            raise MalformedRestrictionError(f"block state {state.value} invalid under {r.polarity} polarity")
    for x, s in r.vars.items():
        state = r.blocks.get(x.block)
        if s == 1 - v and state not in (converted_state(r.polarity), BlockState.UNDETERMINED, None):
            raise MalformedRestrictionError(f"{x} = {s} outside a converted block")
        if s == STAR and state == converted_state(r.polarity):
            raise MalformedRestrictionError(f"{x} is starred inside a converted block")


def _block_offsets(space: Space):
    starts, sizes = [], []
    pos = 0
    for blk in space.blocks:
        n = len(space.block_vars[blk])
        starts.append(pos)
        sizes.append(n)
        pos += n
    return np.array(starts, dtype=np.int64), np.array(sizes, dtype=np.int64)


def sample_states(space: Space, rng: CounterRng, trials, polarity: str = NORMAL, p=None) -> np.ndarray:
    """Vectorised sampler: uint8 array ``(len(trials), len(space))`` with codes
    0, 1 for constants and 2 for a star, variables in canonical order.

    Draw ``i`` of a trial belongs to variable ``i``; draw ``len(space) + j``
    to block ``j``.
    """
    v = fixed_value(polarity)
    trials = np.asarray(trials, dtype=np.uint64)
    nv = len(space)
    if nv == 0:
        return np.zeros((len(trials), 0), dtype=np.uint8)
    var_thr = [threshold(star_probability(x.block, p)) for x in space.variables]
    blk_thr = [threshold(star_probability(b, p)) for b in space.blocks]
    star = rng.below(trials, np.arange(nv), var_thr)
    keep = rng.below(trials, np.arange(nv, nv + len(space.blocks)), blk_thr)
    starts, sizes = _block_offsets(space)
    has_star = np.add.reduceat(star.astype(np.int64), starts, axis=1) > 0
    keep_per_var = np.repeat(keep & has_star, sizes, axis=1)
    out = np.full(star.shape, v, dtype=np.uint8)
    out[star & keep_per_var] = 2
    out[star & ~keep_per_var] = 1 - v
    return out


def restriction_from_states(space: Space, states, polarity: str = NORMAL, stage: str = "ρ") -> Restriction:
    decode = {0: 0, 1: 1, 2: STAR}
    vs = {x: decode[int(s)] for x, s in zip(space.variables, states)}
    return Restriction(vs, derive_block_states(vs, polarity), polarity, stage)


def sample_rho(space: Space, rng: CounterRng, polarity: str = NORMAL, trial: int = 0, p=None) -> Restriction:
    """One draw of the two-stage process, reproducible from ``(rng, trial)``.

    Normal and flipped polarity read the same draws, so their outputs are
    complements of each other.
    """
    states = sample_states(space, rng, [trial], polarity, p)[0] if len(space) else []
    return restriction_from_states(space, states, polarity, "ρ" if polarity == NORMAL else "ρ̂")


def extend_g(r: Restriction) -> Restriction:
    """Fix every open variable of a star block except the smallest one to the
    polarity's constant."""
    validate(r)
    v = r.v
    vs = dict(r.vars)
    members = r.block_members()
    for blk in r.star_blocks():
        open_ = [x for x in members.get(blk, ()) if vs[x] == STAR]
        for x in open_[1:]:
            vs[x] = v
    return Restriction(vs, dict(r.blocks), r.polarity, f"g({r.stage})" if r.stage else "g")


def extend_h(r: Restriction, target: int, b_min: int = 0) -> Restriction:
    """Convert surplus star blocks so each group keeps exactly ``target``.

    Kept blocks are the first ``target`` in canonical order.  Groups whose base
    word is shorter than ``b_min`` are left alone.
    """
    validate(r)
    v = r.v
    vs, bs = dict(r.vars), dict(r.blocks)
    groups: dict[tuple, list] = {}
    for blk in sorted(r.blocks):
        groups.setdefault(blk.group, []).append(blk)
    members = r.block_members()
    for g in sorted(groups, key=lambda k: (len(k[0]), k)):
        if len(g[0]) < b_min:
            continue
        stars = [b for b in groups[g] if bs[b] == BlockState.STAR]
        if len(stars) < target:
            raise QuotaError(g, len(stars), target)
        for blk in stars[target:]:
            bs[blk] = converted_state(r.polarity)
            for x in members.get(blk, ()):
                if vs[x] == STAR:
                    vs[x] = 1 - v
    return Restriction(vs, bs, r.polarity, f"h({r.stage})" if r.stage else "h")


def compose(r1: Restriction, r2: Restriction) -> Restriction:
    """Union of two restrictions with disjoint assigned domains.

    Stars in ``r1`` may be filled by ``r2``; ``r2`` block states only replace
    missing or undetermined ones.
    """
    clashes = sorted(x for x, s in r2.vars.items() if s != STAR and r1.vars.get(x, STAR) != STAR)
    if clashes:
        raise OverlapError(clashes)
    vs = dict(r1.vars)
    for x, s in r2.vars.items():
        if s != STAR or x not in vs:
            vs[x] = s
    bs = dict(r1.blocks)
    for b, s in r2.blocks.items():
        if bs.get(b, BlockState.UNDETERMINED) == BlockState.UNDETERMINED:
            bs[b] = s
    return Restriction(vs, bs, r1.polarity, r1.stage + r2.stage)


def complement(r: Restriction) -> Restriction:
    swap = {BlockState.ALL_ONES: BlockState.ALL_ZEROS, BlockState.ALL_ZEROS: BlockState.ALL_ONES,
            BlockState.ZERO_BLOCK: BlockState.ONE_BLOCK, BlockState.ONE_BLOCK: BlockState.ZERO_BLOCK}
    vs = {x: (s if s == STAR else 1 - s) for x, s in r.vars.items()}
    bs = {b: swap.get(s, s) for b, s in r.blocks.items()}
    return Restriction(vs, bs, FLIPPED if r.polarity == NORMAL else NORMAL, r.stage)


def exact_probability(space: Space, e: Restriction, p=None) -> Fraction:
    """Probability of the outcome ``e`` (must assign 0/1/* to every variable)."""
    missing = [x for x in space.variables if x not in e.vars]
    if missing or len(e.vars) != len(space):
        raise MalformedRestrictionError(
            f"event is not total on the space ({len(missing)} variable(s) missing)")
    v = e.v
    states = derive_block_states(e.vars, e.polarity)
    if e.blocks:
        for b, s in e.blocks.items():
            if states.get(b) != s:
                raise MalformedRestrictionError(f"block {b} state {s.value} contradicts its variables")
    prob = Fraction(1)
    for blk in space.blocks:
        q = star_probability(blk, p)
        for x in space.block_vars[blk]:
            prob *= (1 - q) if e.vars[x] == v else q
        s = states[blk]
        if s == BlockState.STAR:
            prob *= q
        elif s == converted_state(e.polarity):
            prob *= 1 - q
    return prob


def outcome_count(space: Space) -> int:
    n = 1
    for blk in space.blocks:
        n *= 2 ** (len(space.block_vars[blk]) + 1) - 1
    return n


def _block_outcomes(space: Space, blk: BlockId, polarity: str, p):
    v = fixed_value(polarity)
    q = star_probability(blk, p)
    xs = space.block_vars[blk]
    out = []
    for pattern in itertools.product((v, STAR), repeat=len(xs)):
        n_star = pattern.count(STAR)
        base = q ** n_star * (1 - q) ** (len(xs) - n_star)
        if n_star == 0:
            out.append((pattern, base))
            continue
        out.append((pattern, base * q))
        out.append((tuple(1 - v if s == STAR else s for s in pattern), base * (1 - q)))
    return [(pat, pr) for pat, pr in out if pr != 0]


def enumerate_restrictions(space: Space, budget: int = 1_000_000, polarity: str = NORMAL,
                           p=None) -> Iterator[tuple]:
    """Every positive-probability outcome once, as ``(event, probability)``."""
    count = outcome_count(space)
    if count > budget:
        raise BudgetExceededError("restriction enumeration", count, budget)
    per_block = [_block_outcomes(space, blk, polarity, p) for blk in space.blocks]
    order = [x for blk in space.blocks for x in space.block_vars[blk]]
    for combo in itertools.product(*per_block):
        prob = Fraction(1)
        states = []
        for pattern, pr in combo:
            prob *= pr
            states.extend(pattern)
        vs = dict(zip(order, states))
        yield Restriction(vs, derive_block_states(vs, polarity), polarity, "ρ"), prob


def unassign(r: Restriction, xs: Iterable[VarId], stage: str | None = None) -> Restriction:
    vs = dict(r.vars)
    for x in xs:
        vs[x] = STAR
    return as_event(Restriction(vs, {}, r.polarity, r.stage if stage is None else stage))
