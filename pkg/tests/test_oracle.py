from __future__ import annotations

import json
from fractions import Fraction

import pytest

from switchlab.decision_tree import height
from switchlab.errors import ConfigError, SwitchlabError, TriesExhaustedError
from switchlab.oracle import (FormulaFamily, OracleParams, OracleTable, StageEntry, build_oracle,
                              forall_exists_forall, replay, sample_good_rho, verify_equivalence)
from switchlab.rng import CounterRng

from conftest import load_config


@pytest.fixture(scope="module")
def params():
    return OracleParams.from_json(load_config("oracle_tiny.json")["oracle"])


@pytest.fixture(scope="module")
def built(params):
    return build_oracle(params, 0)


def test_tiny_build_passes(built):
    assert built.report.passed
    assert [r.a for r in built.report.rows] == ["00", "01", "10", "11"]


def test_params_json_roundtrip(params):
    assert OracleParams.from_json(params.to_json()) == params
    assert params.p1 == Fraction(7, 8)


@pytest.mark.parametrize("bad", [{"aMin": "000"}, {"aMin": "0"}, {"maxTries": 0}, {"quota1": -1}])
def test_params_rejects(params, bad):
    d = params.to_json()
    d.update(bad)
    with pytest.raises(ConfigError):
        OracleParams.from_json(d)


def test_stage_log_replays_without_rewrites(built):
    log = built.table.stage_log
    assert [e.stage for e in log][:2] == ["round1", "round2"]
    assert log[-1].stage == "fill"
    assert replay(built.table.space, log) == built.table.bits


def test_replay_refuses_rewrite(built):
    log = list(built.table.stage_log)
    x, b = log[0].assignments[0]
    log.append(StageEntry("evil", ((x, 1 - b),)))
    with pytest.raises(SwitchlabError, match="rewrites"):
        replay(built.table.space, log)


def test_designated_set_sizes(built, params):
    for a in params.inputs():
        s = built.table.designated[a]
        assert len(s) == params.quota2
        assert all(x.b == a for x in s)
        assert len({x.ys[0] for x in s}) == len(s)


def test_walk_stays_within_tree_height(built, params):
    walks = {e.stage[5:]: e for e in built.table.stage_log if e.stage.startswith("walk:")}
    for a in params.inputs():
        assert len(walks[a].assignments) <= height(built.second.trees[a])


def test_designated_step_matches_walk(built, params):
    log = {e.stage: e for e in built.table.stage_log}
    for a in params.inputs():
        value = log[f"walk:{a}"].info["value"]
        assert forall_exists_forall(built.table, a) == value


def test_deterministic(params, built):
    again = build_oracle(params, 0)
    assert again.table.to_json() == built.table.to_json()
    assert again.table.stage_log_jsonl() == built.table.stage_log_jsonl()


def test_table_serialisations(built):
    t = built.table
    log = [StageEntry.from_json(json.loads(l)) for l in t.stage_log_jsonl().splitlines()]
    back = OracleTable.from_json(json.loads(json.dumps(t.to_json())), log)
    assert back.bits == t.bits and back.designated == t.designated
    assert back.stage_log == t.stage_log
    fromb = OracleTable.from_bitmap(t.bitmap(), t.sidecar())
    assert fromb.bits == t.bits and fromb.seed == 0


def test_tampering_breaks_equivalence(built, params):
    t = built.table
    bits = dict(t.bits)
    for x in t.designated["00"]:
        bits[x] = 1 - bits[x]
    forged = OracleTable(t.space, bits, t.designated, [], t.seed)
    assert not verify_equivalence(built.family, forged, params.a_min).passed


@pytest.mark.parametrize("value", [True, False])
def test_constant_families(params, value):
    fam = FormulaFamily.constant(params.inputs(), value)
    b = build_oracle(params, 3, fam)
    assert b.report.passed
    assert all(r.target == int(value) for r in b.report.rows)


def test_family_json_roundtrip(built):
    assert FormulaFamily.from_json(json.loads(json.dumps(built.family.to_json()))) == built.family


def test_try_cap_is_enforced(params, built):
    assert built.first.certification.tries > 1
    fam = built.family
    with pytest.raises(TriesExhaustedError):
        sample_good_rho(fam, params.space(), params, CounterRng(0, 1), max_tries=1)


def test_round_one_certification(built, params):
    c = built.first.certification
    assert c.tries <= params.max_tries
    assert c.max_height <= params.t


@pytest.mark.parametrize("seed", [1, 2, 3])
def test_more_seeds(params, seed):
    assert build_oracle(params, seed).report.passed
