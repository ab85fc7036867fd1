"""Failure set of the canonical tree and its witness encoding.

A restriction ``rho`` *fails* when some g-consistent phase-1 branch ``tau``
leads to a phase-2 subtree of height at least ``h``.  A failing ``rho`` is
mapped to ``(rho tau sigma, tauCode, beta', pi', gamma')``:

* ``tauCode`` has one ternary digit per small-block variable of the domain:
  the bit ``tau`` gave it, or ``2`` if it was not open in ``rho``;
* ``beta'`` has one record per queried block: a ``w``-bit mask of the
  positions of the current conjunction that fall in the block, then a
  continuation bit (``1`` if the next block belongs to the same conjunction);
* ``pi'`` lists the answers along the branch, one bit per query;
* ``gamma'`` has a ``w``-bit mask per conjunction marking the literals on open
  variables of its blocks that the fixed constant satisfies.

``sigma`` gives those literals' variables the fixed constant and every other
open variable of the queried blocks the converted constant, so each recorded
conjunction stays alive under ``rho tau sigma``.  This is what lets the decoder
find it again.
"""

from __future__ import annotations

import io
import json
import struct
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Iterable, Mapping

import numpy as np

from .decision_tree import CanonicalTreeParams, Leaf, _as_dnf, _Canonical, height
from .errors import EncodingError, MalformedBundleError
from .formula import BlockId, Dnf, Space, VarId, restrict_conjunction
from .restriction import FLIPPED, NORMAL, STAR, BlockState, Restriction, as_event, exact_probability

_MAGIC = b"SWCB"
_VERSION = 1


@dataclass(frozen=True)
class Query:
    conj: int
    block: BlockId
    var: VarId
    answer: int


@dataclass(frozen=True)
class FailureEvidence:
    """Phase-1 branch ``tau`` plus the first ``h`` queries of the first deep
    phase-2 branch below it."""

    tau: Mapping
    queries: tuple
    h: int

    def rounds(self) -> list:
        """``[(conj, [Query, ...]), ...]`` grouped by conjunction."""
        out: list = []
        for q in self.queries:
            if out and out[-1][0] == q.conj:
                out[-1][1].append(q)
            else:
                out.append((q.conj, [q]))
        return out

    def to_json(self) -> dict:
        return {
            "tau": [{"var": x.to_json(), "bit": b} for x, b in sorted(self.tau.items())],
            "queries": [{"conj": q.conj, "block": q.block.to_json(), "var": q.var.to_json(),
                         "answer": q.answer} for q in self.queries],
            "h": self.h,
        }


def _first_deep_path(t, h: int):
    """Node/bit pairs of the first depth-first branch with at least ``h``
    queries, truncated to ``h``; ``None`` if the tree is shallower."""
    if h == 0:
        return ()
    if isinstance(t, Leaf):
        return None
    for bit in (0, 1):
        rest = _first_deep_path(t.child(bit), h - 1)
        if rest is not None:
            return ((t, bit),) + rest
    return None


def failure_set_member(dnf: Dnf, rho: Restriction, params: CanonicalTreeParams):
    """Evidence that ``rho`` is in the failure set, or ``None``."""
    base, _ = _as_dnf(dnf)
    c = _Canonical(base, rho, params)
    h = params.height_threshold
    for tau in c.taus():
        if not c.consistent(tau):
            continue
        sub = c.phase2(tau)
        if height(sub) < h:
            continue
        path = _first_deep_path(sub, h)
        qs = tuple(Query(node.conj, node.var.block, node.var, bit) for node, bit in path)
        return FailureEvidence(dict(tau), qs, h)
    return None


def _small_vars(rho: Restriction, threshold: int) -> list:
    return sorted(x for x in rho.vars if x.scale < threshold)


def _mask(bits: Iterable[bool]) -> str:
    return "".join("1" if b else "0" for b in bits)


@dataclass(frozen=True)
class CodeBundle:
    rho_tau_sigma: Restriction
    tau_code: str
    beta_prime: tuple
    pi_prime: str
    gamma_prime: tuple
    width: int
    threshold: int = field(default=2)

    def key(self) -> tuple:
        return (self.rho_tau_sigma.key(), self.tau_code, self.beta_prime, self.pi_prime,
                self.gamma_prime)

    def witness(self) -> tuple:
        """The small codes alone; ``rho tau sigma`` is injective within a class."""
        return (self.tau_code, self.beta_prime, self.pi_prime, self.gamma_prime)

    def bit_lengths(self) -> dict:
        n = len(self.tau_code)
        return {
            "tau": (3 ** n - 1).bit_length(),
            "beta": sum(len(r) for r in self.beta_prime),
            "pi": len(self.pi_prime),
            "gamma": sum(len(g) for g in self.gamma_prime),
        }

    def to_json(self) -> dict:
        return {
            "rhoTauSigma": self.rho_tau_sigma.to_json(),
            "tauCode": self.tau_code,
            "betaPrime": list(self.beta_prime),
            "piPrime": self.pi_prime,
            "gammaPrime": list(self.gamma_prime),
            "width": self.width,
            "smallBlockThreshold": self.threshold,
        }

    @classmethod
    def from_json(cls, d: Mapping) -> "CodeBundle":
        return cls(Restriction.from_json(d["rhoTauSigma"]), d["tauCode"], tuple(d["betaPrime"]),
                   d["piPrime"], tuple(d["gammaPrime"]), int(d["width"]),
                   int(d.get("smallBlockThreshold", 2)))

    def to_bytes(self) -> bytes:
        """Length-prefixed bit fields, bits packed little-endian."""
        r = self.rho_tau_sigma
        domain = sorted(r.vars)
        buf = io.BytesIO()
        buf.write(_MAGIC)
        buf.write(struct.pack("<BBHH", _VERSION, 0 if r.polarity == NORMAL else 1, self.width,
                              self.threshold))
        names = json.dumps([x.to_json() for x in domain], separators=(",", ":")).encode()
        buf.write(struct.pack("<I", len(names)))
        buf.write(names)
        codes = "".join({0: "00", 1: "01", STAR: "10"}[r.vars[x]] for x in domain)
        tau_bits = "".join({"0": "00", "1": "01", "2": "10"}[c] for c in self.tau_code)
        for bits in (codes, tau_bits, "".join(self.beta_prime), self.pi_prime,
                     "".join(self.gamma_prime)):
            _write_bits(buf, bits)
        buf.write(struct.pack("<I", len(self.gamma_prime)))
        return buf.getvalue()

    @classmethod
    def from_bytes(cls, data: bytes) -> "CodeBundle":
        buf = io.BytesIO(data)
        if buf.read(4) != _MAGIC:
            raise MalformedBundleError("bad magic")
        version, pol, width, thr = struct.unpack("<BBHH", buf.read(6))
        if version != _VERSION:
            raise MalformedBundleError(f"unsupported version {version}")
        (n,) = struct.unpack("<I", buf.read(4))
        domain = [VarId.from_json(d) for d in json.loads(buf.read(n).decode())]
        codes, tau_bits, beta, pi, gamma = (_read_bits(buf) for _ in range(5))
        (rounds,) = struct.unpack("<I", buf.read(4))
        state = {"00": 0, "01": 1, "10": STAR}
        vs = {x: state[codes[2 * i:2 * i + 2]] for i, x in enumerate(domain)}
        polarity = NORMAL if pol == 0 else FLIPPED
        tau_code = "".join({"00": "0", "01": "1", "10": "2"}[tau_bits[i:i + 2]]
                           for i in range(0, len(tau_bits), 2))
        rec = width + 1
        betas = tuple(beta[i:i + rec] for i in range(0, len(beta), rec))
        gammas = tuple(gamma[i * width:(i + 1) * width] for i in range(rounds))
        return cls(as_event(Restriction(vs, {}, polarity, "ρτσ")), tau_code, betas, pi, gammas,
                   width, thr)


def _write_bits(buf, bits: str) -> None:
    arr = np.array([c == "1" for c in bits], dtype=bool)
    buf.write(struct.pack("<I", len(bits)))
    buf.write(np.packbits(arr, bitorder="little").tobytes())


def _read_bits(buf) -> str:
    (n,) = struct.unpack("<I", buf.read(4))
    raw = np.frombuffer(buf.read((n + 7) // 8), dtype=np.uint8)
    bits = np.unpackbits(raw, bitorder="little")[:n]
    return "".join("1" if b else "0" for b in bits)


def encode_failure(dnf: Dnf, rho: Restriction, ev: FailureEvidence,
                   params: CanonicalTreeParams | None = None) -> CodeBundle:
    params = params or CanonicalTreeParams(height_threshold=ev.h)
    base, _ = _as_dnf(dnf)
    w = base.width
    v = rho.v
    small = _small_vars(rho, params.small_block_threshold)
    tau_code = "".join(str(ev.tau[x]) if rho.vars[x] == STAR else "2" for x in small)

    # Blocks touched by a round have every variable fixed afterwards, so the
    # sigma pieces cannot overlap; the check guards against trace bugs.
    sigma: dict = {}
    betas, gammas = [], []
    rounds = ev.rounds()
    for r_idx, (ci, qs) in enumerate(rounds):
        conj = base.conjunctions[ci]
        blocks = [q.block for q in qs]
        for j, blk in enumerate(blocks):
            if not any(lit.var.block == blk for lit in conj):
                raise EncodingError(f"queried block {blk} does not meet conjunction {ci}")
            mask = _mask(i < len(conj) and conj[i].var.block == blk for i in range(w))
            betas.append(mask + ("1" if j + 1 < len(blocks) else "0"))
        in_round = set(blocks)
        gamma = [i < len(conj) and conj[i].var.block in in_round
                 and rho.vars.get(conj[i].var) == STAR and conj[i].positive == bool(v)
                 for i in range(w)]
        gammas.append(_mask(gamma))
        gvars = {conj[i].var for i in range(w) if gamma[i]}
        for blk in blocks:
            for x in sorted(rho.vars):
                if x.block != blk or rho.vars[x] != STAR:
                    continue
                if x in sigma:
                    raise EncodingError(f"sigma domains collide at {x}")
                sigma[x] = v if x in gvars else 1 - v
    vs = dict(rho.vars)
    for x, bit in ev.tau.items():
        vs[x] = bit
    for x, bit in sigma.items():
        if vs[x] != STAR:
            raise EncodingError(f"sigma assigns {x}, already fixed by rho tau")
        vs[x] = bit
    rts = as_event(Restriction(vs, {}, rho.polarity, "ρτσ"))
    return CodeBundle(rts, tau_code, tuple(betas), _mask(q.answer for q in ev.queries),
                      tuple(gammas), w, params.small_block_threshold)


def decode_failure(dnf: Dnf, bundle: CodeBundle, params: CanonicalTreeParams | None = None) -> Restriction:
    threshold = params.small_block_threshold if params else bundle.threshold
    base, _ = _as_dnf(dnf)
    w = bundle.width
    if w != base.width:
        raise MalformedBundleError(f"bundle width {w} does not match formula width {base.width}")
    r = bundle.rho_tau_sigma
    v = r.v
    cur = dict(r.vars)
    records = list(bundle.beta_prime)
    answers = bundle.pi_prime
    if len(answers) != len(records):
        raise MalformedBundleError("one answer bit per block record expected")
    for rec in records:
        if len(rec) != w + 1 or set(rec) - {"0", "1"}:
            raise MalformedBundleError(f"bad block record {rec!r}")
    if records and records[-1][-1] != "0":
        raise MalformedBundleError("last block record continues past the end")
    opened: list = []
    pos = 0
    for gamma in bundle.gamma_prime:
        if pos >= len(records):
            raise MalformedBundleError("more gamma masks than rounds")
        if len(gamma) != w or set(gamma) - {"0", "1"}:
            raise MalformedBundleError(f"bad gamma mask {gamma!r}")
        ci = next((i for i, c in enumerate(base.conjunctions)
                   if restrict_conjunction(c, cur) is not False), None)
        if ci is None:
            raise MalformedBundleError("no live conjunction where one is required")
        conj = base.conjunctions[ci]
        gvars = set()
        for i, bit in enumerate(gamma):
            if bit == "1":
                if i >= len(conj):
                    raise MalformedBundleError(f"gamma position {i} out of range")
                gvars.add(conj[i].var)
        while True:
            rec = records[pos]
            idx = [i for i, b in enumerate(rec[:w]) if b == "1"]
            if not idx or idx[-1] >= len(conj):
                raise MalformedBundleError(f"block mask {rec[:w]!r} out of range")
            blks = {conj[i].var.block for i in idx}
            if len(blks) != 1:
                raise MalformedBundleError("block mask spans several blocks")
            (blk,) = blks
            stars = sorted(x for x in cur if x.block == blk and (cur[x] == 1 - v or x in gvars))
            if not stars:
                raise MalformedBundleError(f"block {blk} has no recoverable open variable")
            for x in stars[1:]:
                cur[x] = v
            cur[stars[0]] = int(answers[pos])
            opened.extend(stars)
            pos += 1
            if rec[-1] == "0":
                break
            if pos >= len(records):
                raise MalformedBundleError("continuation bit points past the last record")
    if pos != len(records):
        raise MalformedBundleError("block records left over after the last round")
    for x in opened:
        cur[x] = STAR
    small = sorted(x for x in cur if x.scale < threshold)
    if len(small) != len(bundle.tau_code):
        raise MalformedBundleError("tauCode length does not match the small variables")
    for x, digit in zip(small, bundle.tau_code):
        if digit == "2":
            continue
        if digit not in "01" or cur[x] != int(digit):
            raise MalformedBundleError(f"tauCode digit {digit!r} disagrees with {x}")
        cur[x] = STAR
    try:
        return as_event(Restriction(cur, {}, r.polarity, "ρ"))
    except Exception as exc:
        raise MalformedBundleError(str(exc)) from exc


@dataclass(frozen=True)
class RatioCertificate:
    pr_rho_tau_sigma: Fraction
    pr_rho: Fraction
    changes: int
    bound: Fraction

    @property
    def ratio(self) -> Fraction:
        return self.pr_rho_tau_sigma / self.pr_rho

    @property
    def holds(self) -> bool:
        return self.ratio >= self.bound


def ratio_certificate(space: Space, rho: Restriction, bundle: CodeBundle,
                      params: CanonicalTreeParams | None = None, p=None) -> RatioCertificate:
    """Exact ``Pr(rho tau sigma)``, ``Pr(rho)`` and the per-change lower bound.

    Only changes in large blocks are counted: a star block that stops being
    one, or an open variable that gets the fixed constant.  Each such change
    multiplies the probability by ``(1 - q) / q``, at least ``theta_min - 1``.
    With a uniform ``p`` the factor is ``(1 - p) / p``.
    """
    params = params or CanonicalTreeParams(bundle.threshold)
    rts = bundle.rho_tau_sigma
    v = rho.v
    changes = 0
    for blk, s in rho.blocks.items():
        if params.is_small(blk):
            continue
        if s == BlockState.STAR and rts.blocks.get(blk) != BlockState.STAR:
            changes += 1
    for x, s in rho.vars.items():
        if not params.is_small(x) and s == STAR and rts.vars.get(x) == v:
            changes += 1
    factor = Fraction(params.min_large_scale - 1) if p is None else (1 - Fraction(p)) / Fraction(p)
    return RatioCertificate(exact_probability(space, rts, p), exact_probability(space, rho, p),
                            changes, factor ** changes)


def witness_classes(pairs: Iterable[tuple]) -> dict:
    """Group ``(rho, bundle)`` pairs by their small codes."""
    out: dict = {}
    for rho, bundle in pairs:
        out.setdefault(bundle.witness(), []).append((rho, bundle))
    return out


def class_mass(space: Space, members: list, p=None) -> Fraction:
    """Total ``Pr(rho tau sigma)`` over a witness class; raises if two members
    share ``rho tau sigma`` (the class would not be injective)."""
    seen = set()
    total = Fraction(0)
    for _, bundle in members:
        k = bundle.rho_tau_sigma.key()
        if k in seen:
            raise EncodingError("two members of a witness class share rho tau sigma")
        seen.add(k)
        total += exact_probability(space, bundle.rho_tau_sigma, p)
    return total
