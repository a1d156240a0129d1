"""Independent reference implementations used as test oracles.

Written from the documented definitions, sharing no code with the package.
"""

import math

MASK = (1 << 64) - 1
GAMMA = 0x9E3779B97F4A7C15


def mix(z):
    z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & MASK
    z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & MASK
    return z ^ (z >> 31)


def value(seed, col, entry):
    key = mix((mix((seed + GAMMA) & MASK) + (col + 1) * GAMMA) & MASK)
    return (mix((key + (entry + 1) * GAMMA) & MASK) >> 11) * 2.0 ** -53


def histogram(values, nbins, lo, hi):
    """Brute-force binning: bin i holds lo + i*w <= v < lo + (i+1)*w."""
    counts = [0] * nbins
    under = over = 0
    w = (hi - lo) / nbins
    for v in values:
        if math.isnan(v) or v >= hi:
            over += 1
        elif v < lo:
            under += 1
        else:
            i = nbins - 1
            for k in range(nbins):
                top = hi if k == nbins - 1 else lo + (k + 1) * w
                if v < top:
                    i = k
                    break
            counts[i] += 1
    return counts, under, over


def plan_bounds(nclusters, npartitions):
    p = min(npartitions, nclusters)
    return [(i * nclusters // p, (i + 1) * nclusters // p) for i in range(p)]


def column(seed, col, begin, end):
    """Vectorized form of ``value`` over entries [begin, end), uint64 arithmetic wrapping mod 2**64."""
    import numpy as np

    def vmix(z):
        z = (z ^ (z >> np.uint64(30))) * np.uint64(0xBF58476D1CE4E5B9)
        z = (z ^ (z >> np.uint64(27))) * np.uint64(0x94D049BB133111EB)
        return z ^ (z >> np.uint64(31))

    key = mix((mix((seed + GAMMA) & MASK) + (col + 1) * GAMMA) & MASK)
    idx = np.arange(begin + 1, end + 1, dtype=np.uint64)
    with np.errstate(over="ignore"):
        z = np.uint64(key) + idx * np.uint64(GAMMA)
        return (vmix(z) >> np.uint64(11)).astype(np.float64) * 2.0 ** -53


def bin_index(values, nbins, lo, hi):
    """Vectorized ``histogram`` for values already inside [lo, hi)."""
    import numpy as np

    w = (hi - lo) / nbins
    tops = np.array([lo + (k + 1) * w for k in range(nbins - 1)] + [hi])
    return np.searchsorted(tops, values, side="right")
