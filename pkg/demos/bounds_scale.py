"""Where does the union bound start to bite?

At N = 2^64 the bound on the failure probability is astronomically above 1.
This scans log2 N and reports the first N at which it drops below 2^(-N^eps).

    python3 demos/bounds_scale.py
"""

from __future__ import annotations

from fractions import Fraction

from switchlab.experiments import bound_values, crossover_log2_n, fmt_float

d, e = Fraction(1, 110), Fraction(1, 9)
for lg in (16, 64, 1024, 16384, 41744, 41745, 65536):
    b = bound_values(d, e, lg)
    print(f"log2 N = {lg:>6}: log2 union = {fmt_float(b.log2_union):>20}  "
          f"log2 target = {fmt_float(b.log2_target):>20}  vacuous={b.vacuous}")
print("crossover at log2 N =", crossover_log2_n(d, e))
