"""Compensated (double-double) arithmetic on numpy arrays.

A value is carried as a pair ``(hi, lo)`` of float64 arrays with
``hi + lo`` the working value and ``|lo| <= ulp(hi)/2``.  All kernels are
branch-free elementwise formulas (Dekker/Knuth), so they vectorize and give
roughly 32 significant digits.  This is the accumulator used by the
hypergeometric series, whose intermediate terms can exceed the final sum by
many orders of magnitude.
"""

from __future__ import annotations

import numpy as np

# Dekker splitting constant for float64: 2^27 + 1.
_SPLIT = 134217729.0


def two_sum(a, b):
    """Exact sum: returns (s, e) with s = fl(a+b) and a + b = s + e."""
    s = a + b
    bb = s - a
    e = (a - (s - bb)) + (b - bb)
    return s, e


def quick_two_sum(a, b):
    """Exact sum assuming |a| >= |b|."""
    s = a + b
    e = b - (s - a)
    return s, e


def split(a):
    c = _SPLIT * a
    hi = c - (c - a)
    return hi, a - hi


def two_prod(a, b):
    """Exact product: returns (p, e) with p = fl(a*b) and a*b = p + e."""
    p = a * b
    ahi, alo = split(a)
    bhi, blo = split(b)
    e = ((ahi * bhi - p) + ahi * blo + alo * bhi) + alo * blo
    return p, e


def dd_add(xh, xl, yh, yl):
    # accurate variant: the sloppy one loses its eps^2 bound when the hi
    # parts cancel below lo scale, which alternating series hit routinely
    sh, se = two_sum(xh, yh)
    th, te = two_sum(xl, yl)
    se = se + th
    sh, se = quick_two_sum(sh, se)
    se = se + te
    return quick_two_sum(sh, se)


def dd_add_d(xh, xl, d):
    sh, se = two_sum(xh, d)
    se = se + xl
    return quick_two_sum(sh, se)


def dd_mul(xh, xl, yh, yl):
    ph, pe = two_prod(xh, yh)
    pe = pe + (xh * yl + xl * yh)
    return quick_two_sum(ph, pe)


def dd_mul_d(xh, xl, d):
    ph, pe = two_prod(xh, d)
    pe = pe + xl * d
    return quick_two_sum(ph, pe)


def dd_div(xh, xl, yh, yl):
    q1 = xh / yh
    rh, rl = dd_mul_d(yh, yl, q1)
    rh, rl = dd_add(xh, xl, -rh, -rl)
    q2 = rh / yh
    rh2, rl2 = dd_mul_d(yh, yl, q2)
    rh, rl = dd_add(rh, rl, -rh2, -rl2)
    q3 = rh / yh
    sh, sl = quick_two_sum(q1, q2)
    return dd_add_d(sh, sl, q3)


def dd_sqrt(xh, xl):
    """Square root of a non-negative double-double (one Newton refinement)."""
    y = np.sqrt(xh)
    y_safe = np.where(y == 0.0, 1.0, y)
    ph, pe = two_prod(y, y)
    rh, rl = dd_add(xh, xl, -ph, -pe)
    corr = rh / (2.0 * y_safe)
    out_h, out_l = quick_two_sum(y, np.where(y == 0.0, 0.0, corr))
    return out_h, out_l


def dd_from_sum(a, b):
    """Exact double-double representation of a + b (both float64)."""
    return two_sum(a, b)


def dd_from_prod(a, b):
    """Exact double-double representation of a * b (both float64)."""
    return two_prod(a, b)


def dd_abs_hi(xh):
    return np.abs(xh)
