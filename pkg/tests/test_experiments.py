from __future__ import annotations

import csv
import io
import json
from fractions import Fraction

import pytest

from switchlab.decision_tree import CanonicalTreeParams
from switchlab.errors import BudgetExceededError, ConfigError
from switchlab.experiments import (REPORT_COLUMNS, ExperimentConfig, bound_values,
                                   crossover_log2_n, exact_failure_rate, fmt_float,
                                   monte_carlo_failure_rate, random_dnf, report_emit,
                                   run_experiment)
from switchlab.formula import Dnf

from conftest import GOLDEN, load_config


@pytest.fixture(scope="module")
def cfg():
    return ExperimentConfig.from_json(load_config("fixture.json")["experiment"])


def _with(cfg, **kw):
    d = cfg.to_json()
    d.update(kw)
    return ExperimentConfig.from_json(d)


def test_fixture_exact_rate_pinned(cfg):
    assert exact_failure_rate(cfg) == Fraction(65, 256)


def test_h_zero_everything_fails(cfg):
    c = _with(cfg, params={"smallBlockThreshold": 2, "heightThreshold": 0}, trials=500)
    assert exact_failure_rate(c) == 1
    mc = monte_carlo_failure_rate(c)
    assert mc.estimate == 1.0 and mc.stderr == 0.0


def test_empty_dnf_never_fails(cfg):
    c = ExperimentConfig(cfg.space, Dnf([], 2), cfg.params, trials=300)
    assert exact_failure_rate(c) == 0
    assert monte_carlo_failure_rate(c).hits == 0


def test_rate_is_monotone_in_h(cfg):
    rates = [exact_failure_rate(_with(cfg, params={"smallBlockThreshold": 2, "heightThreshold": h}))
             for h in range(0, 6)]
    assert all(a >= b for a, b in zip(rates, rates[1:]))
    assert rates[-1] == 0


def test_exact_respects_budget(cfg):
    with pytest.raises(BudgetExceededError):
        exact_failure_rate(cfg, budget=10)


def test_mc_close_to_exact(cfg):
    mc = monte_carlo_failure_rate(cfg, trials=30_000, seed=5)
    assert abs(mc.estimate - 65 / 256) <= 4 * mc.stderr


def test_mc_thread_count_does_not_matter(cfg):
    a = monte_carlo_failure_rate(cfg, trials=20_000, seed=9, threads=1)
    b = monte_carlo_failure_rate(cfg, trials=20_000, seed=9, threads=8)
    assert a == b


def test_mc_rejects_zero_trials(cfg):
    with pytest.raises(ConfigError):
        monte_carlo_failure_rate(cfg, trials=0)


def test_config_json_and_hash(cfg):
    back = ExperimentConfig.from_json(json.loads(json.dumps(cfg.to_json())))
    assert back == cfg and back.config_hash() == cfg.config_hash()
    assert cfg.with_seed(1).config_hash() != cfg.config_hash()
    assert len(cfg.config_hash()) == 16


def test_config_rejects_bad_values(cfg):
    with pytest.raises(ConfigError):
        _with(cfg, trials=-1)
    with pytest.raises(ConfigError):
        _with(cfg, mode="guess")


def test_random_dnf_reproducible(cfg):
    a = random_dnf(cfg.space, 5, 2, 3)
    assert a == random_dnf(cfg.space, 5, 2, 3)
    assert a.width == 2 and len(a.conjunctions) == 5


def test_bound_values_at_two_to_the_64():
    b = bound_values(Fraction(1, 110), Fraction(1, 9), 64)
    assert b.vacuous
    assert not b.union_below_target
    assert fmt_float(b.union_bound) == "1.14402197359e+137"
    assert fmt_float(b.target_bound) == "2.41719423621e-42"


def test_bound_values_tiny_n_vacuous():
    assert bound_values(Fraction(1, 110), Fraction(1, 9), 4).vacuous


def test_bound_delta_zero_becomes_small():
    b = bound_values(0, Fraction(1, 9), 4096)
    assert not b.vacuous


def test_crossover():
    assert crossover_log2_n(Fraction(1, 110), Fraction(1, 9)) == 41745
    assert crossover_log2_n(Fraction(1, 12), Fraction(1, 9)) is None
    lg = 41745
    assert bound_values(Fraction(1, 110), Fraction(1, 9), lg).union_below_target
    assert not bound_values(Fraction(1, 110), Fraction(1, 9), lg - 1).union_below_target


def test_delta_epsilon_flag(cfg):
    assert cfg.delta_epsilon_ok
    assert not _with(cfg, delta="1/12").delta_epsilon_ok


def test_fmt_float():
    assert fmt_float(None) == ""
    assert fmt_float(0.25) == "2.50000000000e-1"


def test_empty_report_is_header_only():
    assert report_emit([]) == ",".join(REPORT_COLUMNS) + "\n"
    assert json.loads(report_emit([], "json")) == {"results": []}
    with pytest.raises(ConfigError):
        report_emit([], "xml")


def _small(cfg):
    return _with(cfg, trials=20_000)


def test_csv_and_json_agree(cfg):
    r = run_experiment(_small(cfg))
    row = next(csv.DictReader(io.StringIO(report_emit([r], "csv"))))
    js = json.loads(report_emit([r], "json"))["results"][0]
    assert js["exact"] == f"{row['exact_p']}/{row['exact_q']}"
    for k in REPORT_COLUMNS:
        if k not in ("exact_p", "exact_q"):
            assert str(js[k]) == row[k] or (js[k] is None and row[k] == "")


def test_report_golden(cfg, tmp_path):
    out = tmp_path / "r.csv"
    text = report_emit([run_experiment(_small(cfg))], "csv", out)
    assert out.read_text() == text
    assert text == (GOLDEN / "report_fixture.csv").read_text()


def test_mixed_scale_config_runs():
    c = ExperimentConfig.from_json(load_config("mixed_scale.json")["experiment"])
    assert c.params == CanonicalTreeParams(4, 2)
    r = run_experiment(_with(c, trials=4000))
    assert abs(r.mc.estimate - float(r.exact)) <= 4 * r.mc.stderr + 1e-9
