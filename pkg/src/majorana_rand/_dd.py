"""Vectorized double-double arithmetic built on error-free float transforms.

A value is a pair (hi, lo) of float64 arrays with |lo| <= ulp(hi)/2, giving
about 32 significant digits.  Only the handful of operations the sphere
transforms need are provided.
"""

from __future__ import annotations

import numpy as np

_SPLITTER = 134217729.0  # 2**27 + 1


def two_sum(a, b):
    s = a + b
    bb = s - a
    return s, (a - (s - bb)) + (b - bb)


def quick_two_sum(a, b):
    s = a + b
    return s, b - (s - a)


def _split(a):
    t = _SPLITTER * a
    hi = t - (t - a)
    return hi, a - hi


def two_prod(a, b):
    p = a * b
    ah, al = _split(a)
    bh, bl = _split(b)
    return p, ((ah * bh - p) + ah * bl + al * bh) + al * bl


def add(x, y):
    s, e = two_sum(x[0], y[0])
    e = e + (x[1] + y[1])
    return quick_two_sum(s, e)


def mul(x, y):
    p, e = two_prod(x[0], y[0])
    e = e + (x[0] * y[1] + x[1] * y[0])
    return quick_two_sum(p, e)


def mul_float(x, b):
    """dd times an exact float64."""
    p, e = two_prod(x[0], b)
    e = e + x[1] * b
    return quick_two_sum(p, e)


def neg(x):
    return -x[0], -x[1]


def fma(acc, x, y):
    """acc + x*y."""
    return add(acc, mul(x, y))


def zeros(shape):
    return np.zeros(shape), np.zeros(shape)


def from_mp(values, shape=None):
    """Split a (nested) sequence of mpmath numbers into (hi, lo) arrays."""
    flat = np.asarray(values, dtype=object).ravel()
    hi = np.array([float(v) for v in flat])
    lo = np.array([float(v - h) for v, h in zip(flat, hi)])
    if shape is None:
        shape = np.asarray(values, dtype=object).shape
    return hi.reshape(shape), lo.reshape(shape)


def to_float(x):
    return x[0] + x[1]


def index(x, key):
    return x[0][key], x[1][key]
