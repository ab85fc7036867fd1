"""Walk one restriction through the whole switching pipeline.

Samples a restriction on the four-block space, builds the canonical tree of a
width-2 DNF, and if the tree is deep enough encodes the failure and decodes it
back.  Then it counts how much of the space fails, exactly.

    python3 demos/switching_walkthrough.py [seed]
"""

from __future__ import annotations

import sys

from switchlab.decision_tree import CanonicalTreeParams, canonical_tree, render_text
from switchlab.experiments import ExperimentConfig, exact_failure_rate, fixture_space
from switchlab.formula import Dnf, Literal, VarId
from switchlab.restriction import sample_rho
from switchlab.rng import CounterRng
from switchlab.switching import (decode_failure, encode_failure, failure_set_member,
                                 ratio_certificate)


def x(y1, y2, y3):
    return VarId("0", (y1, y2, y3))


DNF = Dnf([
    (Literal(x(0, 0, 0)), Literal(x(0, 1, 1), False)),
    (Literal(x(0, 1, 0)), Literal(x(1, 0, 0))),
    (Literal(x(1, 0, 1), False), Literal(x(1, 1, 1))),
    (Literal(x(1, 1, 0)), Literal(x(0, 0, 1))),
], 2)


def main(seed: int) -> None:
    space = fixture_space()
    params = CanonicalTreeParams(small_block_threshold=2, height_threshold=2)

    # find the first trial whose tree is deep enough to be interesting
    for trial in range(1000):
        rho = sample_rho(space, CounterRng(seed), trial=trial)
        ev = failure_set_member(DNF, rho, params)
        if ev is not None:
            break
    else:
        print("no failing restriction in 1000 trials")
        return

    print(f"trial {trial}: {rho}")
    print(render_text(canonical_tree(DNF, rho, params)))

    bundle = encode_failure(DNF, rho, ev, params)
    print("bundle bit lengths:", bundle.bit_lengths())
    print("decodes back:", decode_failure(DNF, bundle, params) == rho)
    cert = ratio_certificate(space, rho, bundle, params)
    print(f"Pr(rho tau sigma)/Pr(rho) = {cert.ratio}, at least {cert.bound} required: {cert.holds}")

    cfg = ExperimentConfig(space, DNF, params)
    print("exact failure probability at h=2:", exact_failure_rate(cfg))


if __name__ == "__main__":
    main(int(sys.argv[1]) if len(sys.argv) > 1 else 0)
