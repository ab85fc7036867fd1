from __future__ import annotations

import itertools

import pytest

from switchlab.decision_tree import (CanonicalTreeParams, Leaf, Node, branches, canonical_tree,
                                     eval_tree, height, map_leaves, no_repeats, render_text, size,
                                     tree_from_json, tree_height_profile, tree_to_dnf,
                                     tree_to_json, verify_tree_decides)
from switchlab.errors import MarkerMissingError, MissingVariableError, SwitchlabError
from switchlab.formula import Dnf, Literal, eval_dnf
from switchlab.restriction import (FLIPPED, NORMAL, STAR, Restriction, as_event,
                                   enumerate_restrictions, extend_g)

from conftest import GOLDEN, fixture_dnf, fx, mixed_dnf, mixed_space


def _fixture_rho():
    # block (0,0) and (1,1) are star blocks, (0,1) is converted, (1,0) all fixed
    return as_event(Restriction({
        fx(0, 0, 0): STAR, fx(0, 0, 1): STAR, fx(0, 1, 0): 0, fx(0, 1, 1): 1,
        fx(1, 0, 0): 1, fx(1, 0, 1): 1, fx(1, 1, 0): STAR, fx(1, 1, 1): STAR}))


def test_params_validation():
    with pytest.raises(SwitchlabError):
        CanonicalTreeParams(1, 1)
    assert CanonicalTreeParams(5, 1).min_large_scale == 8
    assert CanonicalTreeParams(4, 1).min_large_scale == 4


def test_basic_tree_helpers():
    t = Node(fx(0, 0, 0), Leaf(0), Node(fx(0, 0, 1), Leaf(1), Leaf(0), 2, 0), 2, 0)
    assert height(t) == 2 and size(t) == 5
    assert eval_tree(t, {fx(0, 0, 0): 1, fx(0, 0, 1): 0}) == 1
    with pytest.raises(MissingVariableError):
        eval_tree(t, {fx(0, 0, 0): 1})
    assert [leaf for _, leaf in branches(t)] == [0, 1, 0]
    assert no_repeats(t)
    assert not no_repeats(Node(fx(0, 0, 0), Leaf(0), Node(fx(0, 0, 0), Leaf(1), Leaf(0))))
    assert tree_from_json(tree_to_json(t)) == t
    assert map_leaves(t, lambda v: 1 - v) != t


def test_fixture_tree_golden():
    t = canonical_tree(fixture_dnf(), _fixture_rho(), CanonicalTreeParams(2, 2))
    assert render_text(t) == (GOLDEN / "tree_fixture.txt").read_text()


def test_phase_markers_and_reps():
    rho = _fixture_rho()
    t = canonical_tree(fixture_dnf(), rho, CanonicalTreeParams(2, 2))
    g = extend_g(rho)
    for path, _ in branches(t):
        for node, _ in path:
            assert node.phase == 2 and node.conj is not None
            assert g.vars[node.var] == STAR


def test_empty_dnf_is_leaf_zero():
    rho = _fixture_rho()
    assert canonical_tree(Dnf([], 2), rho, CanonicalTreeParams()) == Leaf(0)
    assert canonical_tree(Dnf([()], 2), rho, CanonicalTreeParams()) == Leaf(1)


@pytest.mark.parametrize("polarity", [NORMAL, FLIPPED])
@pytest.mark.parametrize("negate", [False, True])
def test_mixed_scale_trees_decide(polarity, negate):
    sp = mixed_space()
    d = mixed_dnf().negation() if negate else mixed_dnf()
    params = CanonicalTreeParams(4, 2)
    phase1_seen = False
    for rho, _ in enumerate_restrictions(sp, polarity=polarity):
        t = canonical_tree(d, rho, params)
        assert no_repeats(t)
        assert verify_tree_decides(t, d, rho)
        p1, _ = tree_height_profile(t)
        small_stars = [x for x in rho.stars() if x.b == "0"]
        assert p1 == len(small_stars)
        phase1_seen |= p1 > 0
    assert phase1_seen


def test_inconsistent_branches_are_zero_leaves():
    sp = mixed_space()
    params = CanonicalTreeParams(4, 2)
    for d in (mixed_dnf(), mixed_dnf().negation()):
        for rho, _ in enumerate_restrictions(sp):
            t = canonical_tree(d, rho, params)
            reps = {blk: rho.representative(blk) for blk in rho.star_blocks()}
            for path, leaf in branches(t):
                tau = {n.var: b for n, b in path if n.phase == 1}
                if any(b != rho.v and reps.get(x.block) != x for x, b in tau.items()):
                    assert leaf == 0 and all(n.phase == 1 for n, _ in path)


def test_profile_requires_markers():
    with pytest.raises(MarkerMissingError):
        tree_height_profile(Node(fx(0, 0, 0), Leaf(0), Leaf(1)))


def test_tree_to_dnf_agrees_with_tree():
    rho = _fixture_rho()
    d = fixture_dnf()
    t = canonical_tree(d, rho, CanonicalTreeParams(2, 2))
    ones, zeros = tree_to_dnf(t, 1), tree_to_dnf(t, 0)
    assert ones.width <= height(t) and zeros.polarity == "cnf"
    xs = sorted({n.var for path, _ in branches(t) for n, _ in path})
    for bits in itertools.product((0, 1), repeat=len(xs)):
        a = dict(zip(xs, bits))
        assert eval_dnf(ones, a) == eval_tree(t, a) == eval_dnf(zeros, a)


def test_tree_to_dnf_leaves():
    assert tree_to_dnf(Leaf(1)).conjunctions == ((),)
    assert tree_to_dnf(Leaf(0)).conjunctions == ()


def test_two_one_leaves_at_depth_two():
    t = Node(fx(0, 0, 0), Node(fx(0, 1, 0), Leaf(1), Leaf(0)), Node(fx(1, 0, 0), Leaf(0), Leaf(1)))
    d = tree_to_dnf(t)
    assert d.conjunctions == (
        (Literal(fx(0, 0, 0), False), Literal(fx(0, 1, 0), False)),
        (Literal(fx(0, 0, 0)), Literal(fx(1, 0, 0))),
    )
