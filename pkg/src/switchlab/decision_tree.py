"""Decision trees and the canonical tree of a width-bounded DNF under a restriction.

The canonical tree first queries every starred variable lying in a *small*
block (scale below a threshold), in canonical order.  A branch whose answers
disagree with ``g(rho)`` ends in a 0-leaf.  Below a consistent branch, the tree
repeatedly takes the first conjunction not yet falsified, and for every block
holding one of its open variables queries that block's representative (its
smallest open variable), filling the rest of the block as ``g(rho)`` does.

Phase-1 nodes carry ``phase=1``; phase-2 nodes carry ``phase=2`` and the index
of the conjunction being processed.  The encoder reads its trace off them.
"""

from __future__ import annotations

import itertools
from collections import ChainMap
from dataclasses import dataclass
from typing import Iterator, Mapping, Union

from .errors import BudgetExceededError, MarkerMissingError, MissingVariableError, SwitchlabError
from .formula import (SATISFIED, Dnf, Literal, VarId, eval_dnf, first_live_conjunction,
                      restrict_conjunction)
from .restriction import Restriction, extend_g


@dataclass(frozen=True)
class Leaf:
    value: int


@dataclass(frozen=True)
class Node:
    var: VarId
    zero: "Tree"
    one: "Tree"
    phase: int | None = None
    conj: int | None = None

    def child(self, bit: int) -> "Tree":
        return self.one if bit else self.zero


Tree = Union[Leaf, Node]


@dataclass(frozen=True)
class CanonicalTreeParams:
    small_block_threshold: int = 2
    height_threshold: int = 1

    def __post_init__(self):
        if self.small_block_threshold < 2:
            raise SwitchlabError("small_block_threshold must be >= 2")
        if self.height_threshold < 0:
            raise SwitchlabError("height_threshold must be >= 0")

    def is_small(self, var_or_block) -> bool:
        return var_or_block.scale < self.small_block_threshold

    @property
    def min_large_scale(self) -> int:
        """Smallest power of two that is not small."""
        m = 2
        while m < self.small_block_threshold:
            m *= 2
        return m


def height(t: Tree) -> int:
    if isinstance(t, Leaf):
        return 0
    return 1 + max(height(t.zero), height(t.one))


def size(t: Tree) -> int:
    if isinstance(t, Leaf):
        return 1
    return 1 + size(t.zero) + size(t.one)


def eval_tree(t: Tree, assignment: Mapping) -> int:
    while isinstance(t, Node):
        bit = assignment.get(t.var)
        if bit not in (0, 1):
            raise MissingVariableError(t.var)
        t = t.child(bit)
    return t.value


def branches(t: Tree, prefix=()) -> Iterator[tuple]:
    """Root-to-leaf paths in depth-first order, 0-edge first:
    ``(((node, bit), ...), leaf_value)``."""
    if isinstance(t, Leaf):
        yield prefix, t.value
        return
    yield from branches(t.zero, prefix + ((t, 0),))
    yield from branches(t.one, prefix + ((t, 1),))


def no_repeats(t: Tree, seen=frozenset()) -> bool:
    if isinstance(t, Leaf):
        return True
    if t.var in seen:
        return False
    s = seen | {t.var}
    return no_repeats(t.zero, s) and no_repeats(t.one, s)


def map_leaves(t: Tree, f) -> Tree:
    if isinstance(t, Leaf):
        return Leaf(f(t.value))
    return Node(t.var, map_leaves(t.zero, f), map_leaves(t.one, f), t.phase, t.conj)


def tree_to_json(t: Tree) -> dict:
    if isinstance(t, Leaf):
        return {"leaf": t.value}
    d = {"var": t.var.to_json(), "0": tree_to_json(t.zero), "1": tree_to_json(t.one)}
    if t.phase is not None:
        d["phase"] = t.phase
    if t.conj is not None:
        d["conj"] = t.conj
    return d


def tree_from_json(d: Mapping) -> Tree:
    if "leaf" in d:
        return Leaf(int(d["leaf"]))
    return Node(VarId.from_json(d["var"]), tree_from_json(d["0"]), tree_from_json(d["1"]),
                d.get("phase"), d.get("conj"))


def render_text(t: Tree, indent: str = "") -> str:
    if isinstance(t, Leaf):
        return f"{indent}-> {t.value}\n"
    tag = "" if t.phase is None else f"  [phase {t.phase}" + ("" if t.conj is None else f", C{t.conj}") + "]"
    out = f"{indent}{t.var}?{tag}\n"
    out += f"{indent} 0:\n" + render_text(t.zero, indent + "   ")
    out += f"{indent} 1:\n" + render_text(t.one, indent + "   ")
    return out


class _Canonical:
    """Shared state for building T(psi, rho) on a DNF-polarity formula."""

    def __init__(self, dnf: Dnf, rho: Restriction, params: CanonicalTreeParams):
        if dnf.polarity != "dnf":
            raise SwitchlabError("internal: canonical construction needs a DNF")
        self.dnf, self.rho, self.params = dnf, rho, params
        self.v = rho.v
        self.members: dict = {}
        for x in rho.stars():
            self.members.setdefault(x.block, []).append(x)
        self.reps = {blk: xs[0] for blk, xs in self.members.items()}
        self.small = [x for x in rho.stars() if params.is_small(x)]
        self.dead = 0

    def consistent(self, tau: Mapping) -> bool:
        return all(bit == self.v or self.reps[x.block] == x for x, bit in tau.items())

    def taus(self) -> Iterator[dict]:
        for bits in itertools.product((0, 1), repeat=len(self.small)):
            yield dict(zip(self.small, bits))

    def subtree(self, assign: ChainMap) -> Tree:
        idx = first_live_conjunction(self.dnf, assign)
        if idx == SATISFIED:
            return Leaf(1)
        if idx is None:
            return Leaf(0)
        res = restrict_conjunction(self.dnf.conjunctions[idx], assign)
        blocks = sorted({lit.var.block for lit in res})
        return self._query(idx, blocks, assign)

    def _query(self, idx: int, blocks: list, assign: ChainMap) -> Tree:
        if not blocks:
            return self.subtree(assign)
        blk, rest = blocks[0], blocks[1:]
        rep = self.reps[blk]
        kids = []
        for bit in (0, 1):
            fill = {x: self.v for x in self.members[blk]}
            fill[rep] = bit
            kids.append(self._query(idx, rest, assign.new_child(fill)))
        return Node(rep, kids[0], kids[1], phase=2, conj=idx)

    def phase2(self, tau: Mapping) -> Tree:
        return self.subtree(ChainMap(dict(tau), self.rho.fixed))

    def build(self, i: int = 0, tau=None) -> Tree:
        tau = {} if tau is None else tau
        if i == len(self.small):
            return self.phase2(tau) if self.consistent(tau) else Leaf(self.dead)
        x = self.small[i]
        kids = [self.build(i + 1, {**tau, x: bit}) for bit in (0, 1)]
        return Node(x, kids[0], kids[1], phase=1)


def _as_dnf(dnf: Dnf):
    """(DNF to build on, whether leaves must be complemented)."""
    return (dnf, False) if dnf.polarity == "dnf" else (dnf.negation(), True)


def canonical_tree(dnf: Dnf, rho: Restriction, params: CanonicalTreeParams) -> Tree:
    """T(dnf, rho).  A CNF is handled through its negation with leaves flipped."""
    base, flip = _as_dnf(dnf)
    c = _Canonical(base, rho, params)
    # g(rho)-inconsistent branches must end up as 0-leaves after the flip too
    c.dead = 1 if flip else 0
    t = c.build()
    return map_leaves(t, lambda b: 1 - b) if flip else t


def verify_tree_decides(t: Tree, dnf: Dnf, rho: Restriction, budget: int = 20) -> bool:
    """Exhaustively compare ``t`` with ``dnf`` on every completion of ``g(rho)``."""
    g = extend_g(rho)
    free = g.stars()
    if len(free) > budget:
        raise BudgetExceededError("tree verification", len(free), budget)
    base = g.fixed
    for bits in itertools.product((0, 1), repeat=len(free)):
        full = ChainMap(dict(zip(free, bits)), base)
        if eval_tree(t, full) != eval_dnf(dnf, full):
            return False
    return True


def tree_height_profile(t: Tree) -> tuple:
    """(phase-1 query count, longest phase-2 run) of a canonical tree."""
    def walk(node):
        if isinstance(node, Leaf):
            return 0, 0
        if node.phase not in (1, 2):
            raise MarkerMissingError(f"node {node.var} carries no phase marker")
        (a0, b0), (a1, b1) = walk(node.zero), walk(node.one)
        if node.phase == 1:
            return 1 + max(a0, a1), max(b0, b1)
        return max(a0, a1), 1 + max(b0, b1)
    return walk(t)


def tree_to_dnf(t: Tree, value: int = 1, width: int | None = None) -> Dnf:
    """Terms of the ``value``-branches: a DNF for ``value=1``; for ``value=0`` the
    CNF whose clauses negate the 0-branches."""
    terms = []
    for path, leaf in branches(t):
        if leaf != value:
            continue
        lits = [Literal(node.var, bool(bit)) for node, bit in path]
        terms.append(tuple(-lit for lit in lits) if value == 0 else tuple(lits))
    w = height(t) if width is None else width
    return Dnf(terms, w, "dnf" if value == 1 else "cnf")
