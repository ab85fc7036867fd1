"""Towers of twos and the fractional-exponential family ``f_k``.

``f_k(n)`` is the smallest element greater than ``n`` of the increasing
sequence whose rows are ``exp_j(B + 1), ..., exp_j(T)`` for ``j = 0, 1, ...``,
with ``B = exp_{k-2}(2)`` and ``T = exp_{k-1}(2)``; for ``n <= B`` it is
``B + 1``.  (``exp_{-1}(2)`` is read as 1.)  For ``k = 2`` the sequence is
``3, 4, 8, 16, 256, 65536, ...``.

All values are exact Python integers.  A bit budget stops towers from eating
the machine: any value that would need more bits raises
``BudgetExceededError``.
"""

from __future__ import annotations

import csv
import io
from dataclasses import dataclass
from fractions import Fraction

from .errors import BudgetExceededError, SwitchlabError

DEFAULT_BUDGET = 1 << 20


def _pow2(e: int, budget: int) -> int:
    if e + 1 > budget:
        raise BudgetExceededError("tower value bits", e + 1, budget)
    return 1 << e


def exp_tower(k: int, n: int, budget: int = DEFAULT_BUDGET) -> int:
    """``exp_0(n) = n``, ``exp_{k+1}(n) = 2 ** exp_k(n)``."""
    if k < 0 or n < 0:
        raise SwitchlabError("exp_tower needs k >= 0 and n >= 0")
    x = n
    for _ in range(k):
        x = _pow2(x, budget)
    return x


def _base(k: int, budget: int) -> tuple:
    if k < 1:
        raise SwitchlabError("f_k needs k >= 1")
    lo = 1 if k == 1 else exp_tower(k - 2, 2, budget)
    return lo, exp_tower(k - 1, 2, budget)


class Counter:
    """Tally of sequence elements looked at while evaluating ``f_k``."""

    def __init__(self):
        self.examined = 0


def f_k(k: int, n: int, budget: int = DEFAULT_BUDGET, counter: Counter | None = None) -> int:
    lo, top = _base(k, budget)
    if n <= lo:
        if counter is not None:
            counter.examined += 1
        return lo + 1
    width = top - lo
    # exp_j(x) > n  iff  x > t_j, with t_0 = n and t_{j+1} = bitlen(t_j) - 1
    t, j = n, 0
    while True:
        i = max(1, t - lo + 1)
        if i <= width:
            if counter is not None:
                counter.examined += j * width + i
            return exp_tower(j, lo + i, budget)
        t = t.bit_length() - 1
        j += 1


def sequence(k: int, count: int, budget: int = DEFAULT_BUDGET) -> list:
    """First ``count`` elements of the sequence behind ``f_k``."""
    lo, top = _base(k, budget)
    out, j = [], 0
    while len(out) < count:
        for x in range(lo + 1, top + 1):
            if len(out) == count:
                break
            out.append(exp_tower(j, x, budget))
        j += 1
    return out


@dataclass(frozen=True)
class GrowthFn:
    kind: str
    k: int
    budget: int = DEFAULT_BUDGET

    def __post_init__(self):
        if self.kind not in ("expTower", "fracExp"):
            raise SwitchlabError(f"unknown growth function kind {self.kind!r}")
        if self.kind == "fracExp" and self.k < 1:
            raise SwitchlabError("fracExp needs k >= 1")

    def __call__(self, n: int) -> int:
        if self.kind == "expTower":
            return exp_tower(self.k, n, self.budget)
        return f_k(self.k, n, self.budget)


def iterate(fn, times: int, n: int) -> int:
    for _ in range(times):
        n = fn(n)
    return n


@dataclass(frozen=True)
class GrowthRow:
    n: int
    f: int
    iter_l: int
    pow2: int
    pass_l: bool
    iter_m: int
    pass_m: bool

    @property
    def ratio_l(self) -> Fraction:
        return Fraction(self.iter_l, self.pow2)


CSV_COLUMNS = ["n", "f", "iter_ℓ", "2^n", "pass_ℓ", "iter_m", "pass_m"]


def growth_report(k: int, n_range, l: int, m: int, budget: int = DEFAULT_BUDGET) -> list:
    """Per ``n``: is ``f_k`` iterated ``l`` times below ``2**n`` and iterated
    ``m`` times at least ``2**n``?"""
    fn = GrowthFn("fracExp", k, budget)
    rows = []
    for n in n_range:
        p2 = _pow2(n, budget)
        il, im = iterate(fn, l, n), iterate(fn, m, n)
        rows.append(GrowthRow(n, fn(n), il, p2, il < p2, im, im >= p2))
    return rows


def report_csv(rows) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(CSV_COLUMNS)
    for r in rows:
        w.writerow([r.n, r.f, r.iter_l, r.pow2, str(r.pass_l).lower(), r.iter_m,
                    str(r.pass_m).lower()])
    return buf.getvalue()
