"""``switchlab`` command line.

Exit codes: 0 success, 1 verification failure, 2 configuration error,
3 budget or try-cap exhaustion.  Errors are also written to stderr as one JSON
object.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import os
import sys
from typing import Sequence

from .decision_tree import branches, canonical_tree, height, tree_height_profile, tree_to_json
from .errors import (BudgetExceededError, ConfigError, HellerExhaustedError, SwitchlabError,
                     TriesExhaustedError)
from .experiments import ExperimentConfig, report_emit, run_experiment
from .growth import DEFAULT_BUDGET, growth_report, report_csv
from .oracle import FormulaFamily, OracleParams, OracleTable, build_oracle, verify_equivalence
from .restriction import enumerate_restrictions, sample_rho
from .rng import CounterRng
from .schema import validate_config
from .switching import decode_failure, encode_failure, failure_set_member, ratio_certificate

EXIT_OK, EXIT_VERIFY, EXIT_CONFIG, EXIT_BUDGET = 0, 1, 2, 3


def _dumps(obj) -> str:
    return json.dumps(obj, indent=2, sort_keys=True) + "\n"


def _load_config(path: str | None) -> dict:
    if path is None:
        return {}
    try:
        with open(path, encoding="utf-8") as fh:
            doc = json.load(fh)
    except OSError as exc:
        raise ConfigError(f"cannot read config: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise ConfigError(f"config is not valid JSON: {exc}") from exc
    validate_config(doc)
    return doc


def _seed(args, doc: dict, section: str | None = None) -> int:
    if args.seed is not None:
        return args.seed
    env = os.environ.get("SWITCHLAB_SEED")
    if env:
        try:
            return int(env)
        except ValueError as exc:
            raise ConfigError(f"SWITCHLAB_SEED is not an integer: {env!r}") from exc
    if "seed" in doc:
        return int(doc["seed"])
    if section and "seed" in doc.get(section, {}):
        return int(doc[section]["seed"])
    return 0


def _experiment(args, doc: dict) -> ExperimentConfig:
    if "experiment" not in doc:
        raise ConfigError("config needs an 'experiment' section", ["experiment"])
    cfg = ExperimentConfig.from_json(doc["experiment"])
    return cfg.with_seed(_seed(args, doc, "experiment"))


def _csv(header, rows) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    w.writerows(rows)
    return buf.getvalue()


def cmd_sample(args, doc):
    cfg = _experiment(args, doc)
    rho = sample_rho(cfg.space, CounterRng(cfg.master_seed), cfg.polarity, 0, cfg.p)
    if args.format == "csv":
        return _csv(["var", "state"], [[str(x), s] for x, s in sorted(rho.vars.items())]), EXIT_OK
    return _dumps({"seed": cfg.master_seed, "restriction": rho.to_json()}), EXIT_OK


def cmd_tree(args, doc):
    cfg = _experiment(args, doc)
    rho = sample_rho(cfg.space, CounterRng(cfg.master_seed), cfg.polarity, 0, cfg.p)
    t = canonical_tree(cfg.dnf, rho, cfg.params)
    if args.format == "csv":
        rows = [[" ".join(f"{n.var}={b}" for n, b in path), leaf] for path, leaf in branches(t)]
        return _csv(["branch", "leaf"], rows), EXIT_OK
    p1, p2 = tree_height_profile(t)
    return _dumps({"seed": cfg.master_seed, "restriction": rho.to_json(), "tree": tree_to_json(t),
                   "height": height(t), "phase1": p1, "phase2": p2}), EXIT_OK


def cmd_encode_roundtrip(args, doc):
    cfg = _experiment(args, doc)
    checked = roundtrip = ratio = 0
    keys = set()
    for rho, _ in enumerate_restrictions(cfg.space, polarity=cfg.polarity, p=cfg.p):
        ev = failure_set_member(cfg.dnf, rho, cfg.params)
        if ev is None:
            continue
        b = encode_failure(cfg.dnf, rho, ev, cfg.params)
        checked += 1
        roundtrip += decode_failure(cfg.dnf, b, cfg.params) == rho
        ratio += ratio_certificate(cfg.space, rho, b, cfg.params, cfg.p).holds
        keys.add(b.key())
    out = {"seed": cfg.master_seed, "checked": checked, "roundtrip": roundtrip,
           "ratioHolds": ratio, "distinct": len(keys)}
    ok = roundtrip == checked == ratio == len(keys)
    out["passed"] = ok
    if args.format == "csv":
        text = _csv(list(out), [[str(v).lower() if isinstance(v, bool) else v for v in out.values()]])
    else:
        text = _dumps(out)
    return text, EXIT_OK if ok else EXIT_VERIFY


def cmd_switch_experiment(args, doc):
    cfg = _experiment(args, doc)
    res = run_experiment(cfg, threads=args.threads)
    return report_emit([res], args.format), EXIT_OK


def _parse_range(text: str) -> range:
    try:
        lo, hi = (int(s) for s in text.split(".."))
    except ValueError as exc:
        raise ConfigError(f"range must look like 3..20, got {text!r}", ["range"]) from exc
    if lo > hi:
        raise ConfigError("empty range", ["range"])
    return range(lo, hi + 1)


def cmd_growth(args, doc):
    g = doc.get("growth", {})
    k = args.k if args.k is not None else g.get("k", 2)
    n_range = _parse_range(args.range or g.get("range", "3..20"))
    l = args.l if args.l is not None else g.get("l", 1)
    m = args.m if args.m is not None else g.get("m", 3)
    if k < 1:
        raise ConfigError("k must be >= 1", ["k"])
    rows = growth_report(k, n_range, l, m, args.budget or DEFAULT_BUDGET)
    if args.format == "json":
        return _dumps({"k": k, "l": l, "m": m, "rows": [
            {"n": r.n, "f": str(r.f), "iter_l": str(r.iter_l), "pow2": str(r.pow2),
             "pass_l": r.pass_l, "iter_m": str(r.iter_m), "pass_m": r.pass_m} for r in rows]}), EXIT_OK
    return report_csv(rows), EXIT_OK


def _oracle_params(doc) -> OracleParams:
    return OracleParams.from_json(doc.get("oracle", {}))


def cmd_build_oracle(args, doc):
    params = _oracle_params(doc)
    seed = _seed(args, doc)
    build = build_oracle(params, seed)
    art = {
        "seed": seed,
        "params": params.to_json(),
        "family": dict(build.family.generation),
        "certification": {"round1": build.first.certification.to_json(),
                          "round2": build.second.certification.to_json()},
        "table": build.table.to_json(),
        "report": build.report.to_json(),
    }
    if args.out:
        with open(args.out + ".stages.jsonl", "w", encoding="utf-8", newline="") as fh:
            fh.write(build.table.stage_log_jsonl())
        with open(args.out + ".bitmap", "wb") as fh:
            fh.write(build.table.bitmap())
        with open(args.out + ".sidecar.json", "w", encoding="utf-8", newline="") as fh:
            fh.write(_dumps(build.table.sidecar()))
    if args.format == "csv":
        text = _csv(["a", "phi", "target", "ok"],
                    [[r.a, r.phi, r.target, str(r.ok).lower()] for r in build.report.rows])
    else:
        text = _dumps(art)
    return text, EXIT_OK if build.report.passed else EXIT_VERIFY


def cmd_verify_oracle(args, doc):
    if not args.table:
        raise ConfigError("verify-oracle needs --table PATH", ["table"])
    try:
        with open(args.table, encoding="utf-8") as fh:
            art = json.load(fh)
    except (OSError, json.JSONDecodeError) as exc:
        raise ConfigError(f"cannot read table artifact: {exc}") from exc
    params = OracleParams.from_json(art.get("params") or doc.get("oracle", {}))
    seed = int(art.get("seed", _seed(args, doc)))
    table = OracleTable.from_json(art["table"])
    fam = FormulaFamily.random(params.space(), params.inputs(), seed, params.disjuncts,
                               params.clauses, params.width)
    report = verify_equivalence(fam, table, params.a_min)
    out = {"seed": seed, "report": report.to_json()}
    if args.format == "csv":
        text = _csv(["a", "phi", "target", "ok"],
                    [[r.a, r.phi, r.target, str(r.ok).lower()] for r in report.rows])
    else:
        text = _dumps(out)
    return text, EXIT_OK if report.passed else EXIT_VERIFY


COMMANDS = {
    "sample": cmd_sample,
    "tree": cmd_tree,
    "encode-roundtrip": cmd_encode_roundtrip,
    "switch-experiment": cmd_switch_experiment,
    "growth": cmd_growth,
    "build-oracle": cmd_build_oracle,
    "verify-oracle": cmd_verify_oracle,
}


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="JSON config file")
    common.add_argument("--seed", type=int, help="master seed (else $SWITCHLAB_SEED, else config)")
    common.add_argument("--out", help="write the artifact here instead of stdout")
    common.add_argument("--format", choices=["csv", "json"], default=None)
    common.add_argument("--threads", type=int, default=1)
    common.add_argument("--budget", type=int, help="bit budget for tower values")

    p = argparse.ArgumentParser(prog="switchlab", description=__doc__.splitlines()[0])
    sub = p.add_subparsers(dest="command", required=True)
    for name in COMMANDS:
        sp = sub.add_parser(name, parents=[common])
        if name == "growth":
            sp.add_argument("--k", type=int)
            sp.add_argument("--range")
            sp.add_argument("--l", type=int)
            sp.add_argument("--m", type=int)
        if name == "verify-oracle":
            sp.add_argument("--table", help="artifact written by build-oracle")
    return p


_DEFAULT_FORMAT = {"growth": "csv", "switch-experiment": "csv"}


def _error(kind: str, exc: Exception, code: int, **extra) -> int:
    body = {"error": kind, "message": str(exc), "exitCode": code}
    body.update(extra)
    sys.stderr.write(json.dumps(body, sort_keys=True) + "\n")
    return code


def main(argv: Sequence[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    if args.format is None:
        args.format = _DEFAULT_FORMAT.get(args.command, "json")
    try:
        if args.threads < 1:
            raise ConfigError("--threads must be >= 1", ["threads"])
        doc = _load_config(args.config)
        text, code = COMMANDS[args.command](args, doc)
    except ConfigError as exc:
        return _error("config", exc, EXIT_CONFIG, path=exc.path)
    except TriesExhaustedError as exc:
        return _error("triesExhausted", exc, EXIT_BUDGET, failures=exc.failures)
    except (BudgetExceededError, HellerExhaustedError) as exc:
        return _error("budget", exc, EXIT_BUDGET)
    except SwitchlabError as exc:
        return _error("verification", exc, EXIT_VERIFY)
    if args.out:
        with open(args.out, "w", encoding="utf-8", newline="") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)
    return code


if __name__ == "__main__":
    sys.exit(main())
