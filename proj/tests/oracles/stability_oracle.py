"""Exact reference values for the stability tests, computed with fractions.

Brute-forces witness verdicts for line-bundle extensions and prints the
values frozen in test_stability.cpp and test_chamber.cpp.
"""
from fractions import Fraction as F


def params(alpha, d1, d2):
    tau1 = (F(d1 + d2) + alpha) / 2
    return (F(1), F(1), tau1, tau1 - alpha)


def theta(p, w):
    a1, a2, t1, t2 = p
    r1, e1, r2, e2 = w
    return a1 * e1 + a2 * e2 - t1 * r1 - t2 * r2


def to_surjective(p):
    a1, a2, t1, t2 = p
    return (a2 - a1, a1, t2 - t1, t1)


def line_verdict(d1, d2, div, alpha):
    # every subobject of a non-split extension: (L1, 0) and lifted lines of degree <= div
    p = params(alpha, d1, d2)
    subs = [(1, d1, 0, 0)] + [(0, 0, 1, dl) for dl in range(div - 20, div + 1)]
    top = max(theta(p, w) for w in subs)
    return "Stable" if top < 0 else ("StrictlySemistable" if top == 0 else "Unstable")


def strata(d1, d2):
    out = {}
    k = d1 - d2
    while k <= max(d2 - d1 - 2, 0 if (d1 - d2) % 2 == 0 else 1):
        out[k] = {div for div in range(d1, d2) if line_verdict(d1, d2, div, F(k + 1)) == "Stable"}
        k += 2
    return out


if __name__ == "__main__":
    p = params(F(-1, 2), -1, 0)
    print("alpha=-1/2 cohomology", p, "surjective", to_surjective(p))
    print("theta(L1,0) =", theta(p, (1, -1, 0, 0)))
    for case in [(-1, 0, -1, F(-1, 2)), (-1, 0, -1, F(-1)), (-1, 0, -1, F(1)), (-1, 0, -1, F(-3, 2)),
                 (0, 3, 2, F(-1)), (0, 3, 2, F(-2)), (0, 3, 1, F(1, 2)), (0, 3, 1, F(2))]:
        print(case, line_verdict(*case))
    for d1, d2 in [(-1, 1), (0, 3)]:
        print((d1, d2), "strata", strata(d1, d2))
