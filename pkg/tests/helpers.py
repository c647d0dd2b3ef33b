"""Brute-force oracles shared by the test modules.

Everything here is deliberately independent of the library's own
computational routes: weights are summed path by path over exhaustive
enumerations, ballot numbers are recounted by recursion, and empirical
distributions are compared in total variation.
"""

import math
from fractions import Fraction

import numpy as np

from wetting import core


def path_weight(eta, lam):
    return lam ** core.contacts(eta)


def enumeration_log_partition(paths, lam):
    return math.log(sum(path_weight(eta, lam) for eta in paths))


def window_of(eta):
    zeros = [x for x, v in enumerate(eta) if v == 0]
    if not zeros:
        return None
    return zeros[0], zeros[-1]


def exact_distribution(paths, lam):
    w = np.array([path_weight(eta, lam) for eta in paths], dtype=float)
    return w / w.sum()


def empirical_distribution(paths, samples):
    index = {eta: i for i, eta in enumerate(paths)}
    counts = np.zeros(len(paths))
    for row in samples:
        counts[index[tuple(int(v) for v in row)]] += 1
    return counts / counts.sum()


def total_variation(p, q):
    return 0.5 * float(np.abs(np.asarray(p) - np.asarray(q)).sum())


def catalan_by_recursion(m):
    """C_0..C_m via the convolution recursion (independent of math.comb)."""
    cats = [1]
    for n in range(m):
        cats.append(sum(cats[i] * cats[n - i] for i in range(n + 1)))
    return cats


def heat_bath_rate(eta, x, lam_fraction):
    """Independent coding of the flip rates: the heat-bath ratio.

    Returns a Fraction; zero for inadmissible or identity flips.
    """
    try:
        flipped = core.flip(eta, x)
    except ValueError:
        return Fraction(0)
    if flipped == eta:
        return Fraction(0)
    w = lam_fraction ** core.contacts(eta)
    w_new = lam_fraction ** core.contacts(flipped)
    return w_new / (w + w_new)
