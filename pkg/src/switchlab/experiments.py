"""Failure-rate measurements: exact enumeration, Monte Carlo, and the union bound.

Monte-Carlo trials are addressed by index, so a run of ``T`` trials draws the
same restrictions whatever the chunking or thread count.  Chunks are merged by
summing integer hit counts.
"""

from __future__ import annotations

import csv
import hashlib
import io
import json
import math
import random
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from decimal import Decimal
from fractions import Fraction
from typing import Mapping, Sequence

import mpmath
import numpy as np

from .decision_tree import CanonicalTreeParams
from .errors import ConfigError
from .formula import Dnf, Literal, Space, VarSpace
from .restriction import NORMAL, enumerate_restrictions, restriction_from_states, sample_states
from .rng import CounterRng
from .switching import failure_set_member

CHUNK = 8192
PREC_BITS = 256


def random_dnf(space: Space, count: int, width: int, seed: int) -> Dnf:
    rnd = random.Random(seed)
    vs = list(space.variables)
    terms = []
    for _ in range(count):
        xs = sorted(rnd.sample(vs, min(width, len(vs))))
        terms.append(tuple(Literal(x, rnd.random() < 0.5) for x in xs))
    return Dnf(terms, width)


@dataclass(frozen=True)
class ExperimentConfig:
    space: Space
    dnf: Dnf
    params: CanonicalTreeParams = CanonicalTreeParams()
    trials: int = 100_000
    master_seed: int = 0
    mode: str = "both"
    delta: Fraction = Fraction(1, 110)
    epsilon: Fraction = Fraction(1, 9)
    log2_n: int = 64
    polarity: str = NORMAL
    p: Fraction | None = None
    dnf_source: Mapping = field(default_factory=lambda: {"kind": "fixed"})

    def __post_init__(self):
        if self.mode not in ("exact", "montecarlo", "both"):
            raise ConfigError(f"unknown mode {self.mode!r}", ["mode"])
        if self.trials < 1:
            raise ConfigError("trials must be >= 1", ["trials"])

    @property
    def delta_epsilon_ok(self) -> bool:
        """Whether ``12 delta < epsilon`` (recorded, not enforced)."""
        return 12 * self.delta < self.epsilon

    def to_json(self) -> dict:
        src = dict(self.dnf_source)
        if src.get("kind", "fixed") == "fixed":
            src = {"kind": "fixed", "dnf": self.dnf.to_json()}
        return {
            "space": self.space.to_json(),
            "dnf": src,
            "params": {"smallBlockThreshold": self.params.small_block_threshold,
                       "heightThreshold": self.params.height_threshold},
            "trials": self.trials,
            "seed": self.master_seed,
            "mode": self.mode,
            "delta": str(self.delta),
            "epsilon": str(self.epsilon),
            "log2N": self.log2_n,
            "polarity": self.polarity,
            "p": None if self.p is None else str(self.p),
        }

    @classmethod
    def from_json(cls, d: Mapping) -> "ExperimentConfig":
        space = Space.from_json(d["space"])
        src = d.get("dnf", {"kind": "fixed", "dnf": {"conjunctions": []}})
        if src.get("kind", "fixed") == "fixed":
            dnf = Dnf.from_json(src["dnf"])
        elif src["kind"] == "random":
            dnf = random_dnf(space, int(src["count"]), int(src["width"]), int(src.get("seed", 0)))
        else:
            raise ConfigError(f"unknown dnf source {src['kind']!r}", ["dnf", "kind"])
        pr = d.get("params", {})
        params = CanonicalTreeParams(int(pr.get("smallBlockThreshold", 2)),
                                     int(pr.get("heightThreshold", 1)))
        p = d.get("p")
        return cls(space, dnf, params, int(d.get("trials", 100_000)), int(d.get("seed", 0)),
                   d.get("mode", "both"), Fraction(d.get("delta", "1/110")),
                   Fraction(d.get("epsilon", "1/9")), int(d.get("log2N", 64)),
                   d.get("polarity", NORMAL), None if p is None else Fraction(p), src)

    def with_seed(self, seed: int) -> "ExperimentConfig":
        d = self.to_json()
        d["seed"] = seed
        return ExperimentConfig.from_json(d)

    def config_hash(self) -> str:
        body = json.dumps(self.to_json(), sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(body.encode()).hexdigest()[:16]


def exact_failure_rate(cfg: ExperimentConfig, budget: int = 1_000_000) -> Fraction:
    total = Fraction(0)
    for rho, pr in enumerate_restrictions(cfg.space, budget, cfg.polarity, cfg.p):
        if failure_set_member(cfg.dnf, rho, cfg.params) is not None:
            total += pr
    return total


@dataclass(frozen=True)
class MonteCarloResult:
    hits: int
    trials: int

    @property
    def estimate(self) -> float:
        return self.hits / self.trials

    @property
    def stderr(self) -> float:
        p = self.estimate
        return math.sqrt(p * (1 - p) / self.trials)


def _member(cfg: ExperimentConfig, row: np.ndarray) -> bool:
    rho = restriction_from_states(cfg.space, row, cfg.polarity)
    return failure_set_member(cfg.dnf, rho, cfg.params) is not None


def _chunk_hits(cfg: ExperimentConfig, rng: CounterRng, lo: int, hi: int, cache: dict) -> int:
    states = sample_states(cfg.space, rng, np.arange(lo, hi), cfg.polarity, cfg.p)
    uniq, counts = np.unique(states, axis=0, return_counts=True)
    hits = 0
    for row, n in zip(uniq, counts):
        key = row.tobytes()
        if key not in cache:
            cache[key] = _member(cfg, row)
        if cache[key]:
            hits += int(n)
    return hits


def monte_carlo_failure_rate(cfg: ExperimentConfig, trials: int | None = None,
                             seed: int | None = None, threads: int = 1,
                             cache: dict | None = None) -> MonteCarloResult:
    """Fraction of ``trials`` sampled restrictions in the failure set.

    ``cache`` maps sampled state rows to membership and may be shared between
    calls on the same configuration.
    """
    trials = cfg.trials if trials is None else trials
    if trials < 1:
        raise ConfigError("trials must be >= 1", ["trials"])
    rng = CounterRng(cfg.master_seed if seed is None else seed)
    cache = {} if cache is None else cache
    bounds = [(lo, min(lo + CHUNK, trials)) for lo in range(0, trials, CHUNK)]
    if threads <= 1:
        hits = sum(_chunk_hits(cfg, rng, lo, hi, cache) for lo, hi in bounds)
    else:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            hits = sum(pool.map(lambda b: _chunk_hits(cfg, rng, b[0], b[1], cache), bounds))
    return MonteCarloResult(hits, trials)


@dataclass(frozen=True)
class BoundValues:
    union_bound: mpmath.mpf
    target_bound: mpmath.mpf
    log2_union: mpmath.mpf
    log2_target: mpmath.mpf

    @property
    def vacuous(self) -> bool:
        return self.union_bound >= 1

    @property
    def union_below_target(self) -> bool:
        return self.log2_union < self.log2_target


def _mpf(q) -> mpmath.mpf:
    q = Fraction(q)
    return mpmath.mpf(q.numerator) / q.denominator


def bound_values(delta, epsilon, log2_n, prec: int = PREC_BITS) -> BoundValues:
    """``(12 e N^d)^(N^e/2) (N^(e/12) - 1)^(-N^e/2)`` and ``2^(-N^e)`` at
    ``N = 2**log2_n``, evaluated with ``prec`` bits."""
    with mpmath.workprec(prec):
        d, e, lg = _mpf(delta), _mpf(epsilon), mpmath.mpf(log2_n)
        ne = mpmath.power(2, e * lg)
        base = mpmath.log(12 * mpmath.e, 2) + d * lg - mpmath.log(mpmath.power(2, e * lg / 12) - 1, 2)
        log2_union = ne / 2 * base
        log2_target = -ne
        return BoundValues(mpmath.power(2, log2_union), mpmath.power(2, log2_target),
                           log2_union, log2_target)


def crossover_log2_n(delta, epsilon, hi: int = 1 << 24) -> int | None:
    """Smallest integer ``log2 N`` at which the union bound drops below the
    target; ``None`` if ``12 delta >= epsilon`` or it is beyond ``hi``."""
    if not 12 * Fraction(delta) < Fraction(epsilon):
        return None

    def ok(lg):
        return bound_values(delta, epsilon, lg, prec=64).union_below_target

    if not ok(hi):
        return None
    lo = 1
    while lo < hi:
        mid = (lo + hi) // 2
        if ok(mid):
            hi = mid
        else:
            lo = mid + 1
    return lo


@dataclass(frozen=True)
class ExperimentResult:
    config_hash: str
    mode: str
    h: int
    w: int
    seed: int
    exact: Fraction | None
    mc: MonteCarloResult | None
    bounds: BoundValues


def run_experiment(cfg: ExperimentConfig, threads: int = 1, budget: int = 1_000_000) -> ExperimentResult:
    exact = exact_failure_rate(cfg, budget) if cfg.mode in ("exact", "both") else None
    mc = monte_carlo_failure_rate(cfg, threads=threads) if cfg.mode in ("montecarlo", "both") else None
    return ExperimentResult(cfg.config_hash(), cfg.mode, cfg.params.height_threshold, cfg.dnf.width,
                            cfg.master_seed, exact, mc,
                            bound_values(cfg.delta, cfg.epsilon, cfg.log2_n))


def fmt_float(x) -> str:
    """Fixed 12-significant-digit scientific notation, safe for huge exponents."""
    if x is None:
        return ""
    with mpmath.workprec(PREC_BITS):
        return format(Decimal(mpmath.nstr(mpmath.mpf(x), 30)), ".11e")


REPORT_COLUMNS = ["config_hash", "mode", "h", "w", "exact_p", "exact_q", "mc_estimate",
                  "mc_stderr", "trials", "union_bound", "target_bound", "vacuous_flag", "seed"]


def _row(r: ExperimentResult) -> dict:
    return {
        "config_hash": r.config_hash,
        "mode": r.mode,
        "h": r.h,
        "w": r.w,
        "exact_p": "" if r.exact is None else r.exact.numerator,
        "exact_q": "" if r.exact is None else r.exact.denominator,
        "mc_estimate": "" if r.mc is None else fmt_float(r.mc.estimate),
        "mc_stderr": "" if r.mc is None else fmt_float(r.mc.stderr),
        "trials": "" if r.mc is None else r.mc.trials,
        "union_bound": fmt_float(r.bounds.union_bound),
        "target_bound": fmt_float(r.bounds.target_bound),
        "vacuous_flag": str(r.bounds.vacuous).lower(),
        "seed": r.seed,
    }


def report_emit(results: Sequence[ExperimentResult], fmt: str = "csv", path=None) -> str:
    """Serialise results; writes to ``path`` when given and returns the text."""
    if fmt == "csv":
        buf = io.StringIO()
        w = csv.DictWriter(buf, REPORT_COLUMNS, lineterminator="\n")
        w.writeheader()
        for r in results:
            w.writerow(_row(r))
        text = buf.getvalue()
    elif fmt == "json":
        rows = []
        for r in results:
            d = _row(r)
            d["exact"] = None if r.exact is None else f"{r.exact.numerator}/{r.exact.denominator}"
            del d["exact_p"], d["exact_q"]
            rows.append(d)
        text = json.dumps({"results": rows}, indent=2, sort_keys=True) + "\n"
    else:
        raise ConfigError(f"unknown report format {fmt!r}", ["format"])
    if path is not None:
        with open(path, "w", encoding="utf-8", newline="") as fh:
            fh.write(text)
    return text


def fixture_space() -> VarSpace:
    """Four blocks of two variables at scale 2."""
    return VarSpace(["0"], e1=1, e2=1)
