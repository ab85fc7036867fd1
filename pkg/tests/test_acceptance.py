"""Acceptance battery.  Each criterion prints one PASS/FAIL line.

Run standalone with ``python3 tests/test_acceptance.py`` or through pytest,
which also collects the lines into an "acceptance criteria" summary section.
"""

from __future__ import annotations

import sys
import time
from fractions import Fraction
from pathlib import Path

import pytest

sys.path.insert(0, str(Path(__file__).resolve().parent))

from conftest import CONFIGS, fixture_dnf, load_config  # noqa: E402

from switchlab.cli import main as cli_main  # noqa: E402
from switchlab.decision_tree import CanonicalTreeParams, canonical_tree, verify_tree_decides  # noqa: E402
from switchlab.experiments import (ExperimentConfig, bound_values, crossover_log2_n,  # noqa: E402
                                   exact_failure_rate, fixture_space, fmt_float,
                                   monte_carlo_failure_rate)
from switchlab.growth import GrowthFn, f_k, iterate  # noqa: E402
from switchlab.oracle import OracleParams, build_oracle  # noqa: E402
from switchlab.restriction import enumerate_restrictions  # noqa: E402
from switchlab.switching import (class_mass, decode_failure, encode_failure,  # noqa: E402
                                 failure_set_member, ratio_certificate, witness_classes)


def _timed(fn):
    t0 = time.perf_counter()
    ok, detail = fn()
    return ok, detail, time.perf_counter() - t0


def _suite(h=2):
    sp, d = fixture_space(), fixture_dnf()
    params = CanonicalTreeParams(2, h)
    out = []
    for rho, pr in enumerate_restrictions(sp):
        ev = failure_set_member(d, rho, params)
        if ev is not None:
            out.append((rho, pr, encode_failure(d, rho, ev, params)))
    return sp, d, params, out


def criterion_1():
    sp, d = fixture_space(), fixture_dnf()
    params = CanonicalTreeParams(2, 2)
    n = bad = 0
    for rho, _ in enumerate_restrictions(sp):
        n += 1
        bad += not verify_tree_decides(canonical_tree(d, rho, params), d, rho)
    return n == 2401 and bad == 0, f"{n} restrictions, {bad} trees wrong"


def criterion_2():
    _, d, params, suite = _suite()
    wrong = sum(decode_failure(d, b, params) != rho for rho, _, b in suite)
    distinct = len({b.key() for _, _, b in suite})
    ok = wrong == 0 and distinct == len(suite) and len(suite) > 0
    return ok, f"|S|={len(suite)}, distinct bundles={distinct}, decode mismatches={wrong}"


def criterion_3():
    sp, _, params, suite = _suite()
    total = sum(pr for _, pr in enumerate_restrictions(sp))
    ratios_bad = sum(not ratio_certificate(sp, rho, b, params).holds for rho, _, b in suite)
    classes = witness_classes((rho, b) for rho, _, b in suite)
    worst = max(class_mass(sp, m) for m in classes.values())
    ok = total == 1 and ratios_bad == 0 and worst <= 1
    return ok, (f"sum Pr={total}, ratio failures={ratios_bad}, "
                f"{len(classes)} witness classes, max class mass={worst}")


def criterion_4():
    cfg = ExperimentConfig.from_json(load_config("fixture.json")["experiment"])
    exact = exact_failure_rate(cfg)
    cache: dict = {}
    inside = 0
    for seed in range(20):
        mc = monte_carlo_failure_rate(cfg, trials=100_000, seed=seed, cache=cache)
        inside += abs(mc.estimate - float(exact)) <= 3 * mc.stderr
    return inside >= 19, f"exact={exact}, {inside}/20 seeds within 3 stderr"


def criterion_5():
    f2 = GrowthFn("fracExp", 2)
    below = all(f2(n) < 2 ** n for n in range(5, 21))
    above = all(iterate(f2, 3, n) > 2 ** n for n in range(3, 21))
    mono = all(f_k(k, n) <= f_k(k, n + 1) for k in (2, 3) for n in range(0, 200))
    return below and above and mono, (f"f2(n)<2^n on 5..20: {below}; f2^3(n)>2^n on 3..20: "
                                      f"{above}; monotone k=2,3 on 0..200: {mono}")


def criterion_6():
    params = OracleParams.from_json(load_config("oracle_tiny.json")["oracle"])
    failed = []
    tries = []
    for seed in range(10):
        try:
            b = build_oracle(params, seed)
        except Exception as exc:  # any pipeline error counts as a failed seed
            failed.append(f"{seed}:{type(exc).__name__}")
            continue
        tries.append(b.first.certification.tries)
        if not b.report.passed:
            failed.append(f"{seed}:equivalence")
    return not failed, (f"10 seeds, failures={failed or 'none'}, "
                        f"round-1 tries max={max(tries) if tries else '-'} of cap {params.max_tries}")


def _cli_bytes(tmp: Path, tag: str, argv: list) -> dict:
    out = tmp / f"{tag}.out"
    code = cli_main(argv + ["--out", str(out)])
    files = {p.name.replace(tag, "X"): p.read_bytes() for p in sorted(tmp.glob(f"{tag}.out*"))}
    files["exit"] = bytes([code])
    return files


def criterion_7(tmp: Path):
    fixture = str(CONFIGS / "fixture.json")
    runs = {
        "sample": ["sample", "--config", fixture],
        "tree": ["tree", "--config", fixture],
        "encode": ["encode-roundtrip", "--config", str(CONFIGS / "mixed_scale.json")],
        "experiment": ["switch-experiment", "--config", fixture],
        "growth": ["growth", "--k", "2", "--range", "3..20"],
        "oracle": ["build-oracle", "--config", str(CONFIGS / "oracle_tiny.json")],
    }
    diffs = []
    for name, argv in runs.items():
        a = _cli_bytes(tmp, f"{name}-a", argv + ["--threads", "1"])
        b = _cli_bytes(tmp, f"{name}-b", argv + ["--threads", "1"])
        c = _cli_bytes(tmp, f"{name}-c", argv + ["--threads", "8"])
        if not (a == b == c) or a["exit"] != b"\x00":
            diffs.append(name)
    a = _cli_bytes(tmp, "verify-a", ["verify-oracle", "--table", str(tmp / "oracle-a.out")])
    b = _cli_bytes(tmp, "verify-b", ["verify-oracle", "--table", str(tmp / "oracle-c.out")])
    if a != b or a["exit"] != b"\x00":
        diffs.append("verify-oracle")
    return not diffs, f"{len(runs) + 1} commands, differing={diffs or 'none'}"


def criterion_8():
    d, e = Fraction(1, 110), Fraction(1, 9)
    big = bound_values(d, e, 64)
    tiny = bound_values(d, e, 4)
    ok = big.union_below_target and tiny.vacuous
    cross = crossover_log2_n(d, e)
    return ok, (f"N=2^64: union={fmt_float(big.union_bound)} target={fmt_float(big.target_bound)} "
                f"(union<target: {big.union_below_target}); tiny N vacuous: {tiny.vacuous}; "
                f"union first drops below target at log2 N={cross}")


LIMITS = {1: 5, 2: 10, 3: 10, 4: 60, 5: 1, 6: 60, 7: None, 8: None}


def _line(n, ok, detail, secs):
    return f"criterion {n}: {'PASS' if ok else 'FAIL'} ({secs:.2f}s) {detail}"


def _check(n, fn, log):
    ok, detail, secs = _timed(fn)
    limit = LIMITS[n]
    if limit is not None and secs > limit:
        ok, detail = False, f"{detail}; took {secs:.1f}s, limit {limit}s"
    line = _line(n, ok, detail, secs)
    print(line)
    log.append(line)
    assert ok, line


@pytest.mark.parametrize("n", [1, 2, 3, 4, 5, 6, 8])
def test_criterion(n, acceptance_log):
    _check(n, globals()[f"criterion_{n}"], acceptance_log)


def test_criterion_7_determinism(tmp_path, acceptance_log):
    _check(7, lambda: criterion_7(tmp_path), acceptance_log)


if __name__ == "__main__":
    import tempfile

    failures = 0
    for n in range(1, 9):
        if n == 7:
            with tempfile.TemporaryDirectory() as d:
                ok, detail, secs = _timed(lambda: criterion_7(Path(d)))
        else:
            ok, detail, secs = _timed(globals()[f"criterion_{n}"])
        print(_line(n, ok, detail, secs))
        failures += not ok
    sys.exit(1 if failures else 0)
