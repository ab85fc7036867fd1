"""How fast is the fractional-exponential f_2?

Once is far below 2^n, three times is past it.  Also prints the first few
sequence elements for k = 2 and 3.

    python3 demos/growth_tables.py
"""

from __future__ import annotations

from switchlab.growth import growth_report, sequence

print("k=2 sequence:", sequence(2, 6))
print("k=3 sequence:", sequence(3, 14))
print()
print(f"{'n':>3} {'f2(n)':>8} {'f2(n)/2^n':>12} {'f2^3(n) bits':>13}")
for r in growth_report(2, range(3, 21), l=1, m=3):
    print(f"{r.n:>3} {r.f:>8} {float(r.ratio_l):>12.6f} {r.iter_m.bit_length():>13}")
