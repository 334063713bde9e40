"""Gamma, Kummer M, and Tricomi U over the regimes the spectral problem needs.

Self-contained (no scipy.special): gamma comes from a fixed-coefficient
Lanczos approximation with reflection, M(a,b,x) from its Taylor series, and
U(a,b,x) from the two-term M connection formula below ``asymptotic_switch``
and from the large-x asymptotic series (truncated at its smallest term)
above it.

The hard regime is a = -alpha with alpha up to ~60 at x of a few tens: there
the connection formula cancels catastrophically (intermediate terms exceed
the result by 20+ orders of magnitude), so every series is accumulated in
compensated double-double arithmetic, and for a < -2 the connection formula
is evaluated through the exact three-term recurrence in ``a`` seeded near
a = 0, which is stable in the downward direction.  Values are carried as a
scaled significand plus log offset so nothing overflows even when U itself
exceeds float range; `tricomi_u_log` exposes that form directly for
integrands weighted by exp(-kappa z^2).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .doubledouble import (
    dd_add,
    dd_add_d,
    dd_div,
    dd_mul,
    dd_mul_d,
    dd_sqrt,
    quick_two_sum,
    two_prod,
    two_sum,
)

__all__ = [
    "EvalPolicy",
    "DEFAULT_POLICY",
    "PoleError",
    "NoConvergence",
    "DomainError",
    "gamma",
    "kummer_m",
    "tricomi_u",
    "tricomi_u_log",
]


class PoleError(ValueError):
    """Gamma evaluated at a non-positive integer."""


class DomainError(ValueError):
    """Argument outside the supported domain."""


class NoConvergence(ArithmeticError):
    """A series failed to meet tolerance within the term budget."""


@dataclass(frozen=True)
class EvalPolicy:
    """Evaluation controls for the hypergeometric series.

    rel_tol: target relative tolerance of series summation.
    max_terms: hard cap on series length.
    asymptotic_switch: x above which U uses its large-x expansion.
    """

    rel_tol: float = 1e-12
    max_terms: int = 500
    asymptotic_switch: float = 50.0

    def __post_init__(self):
        if not self.rel_tol > 0:
            raise ValueError("rel_tol must be positive")
        if self.max_terms < 50:
            raise ValueError("max_terms must be at least 50")
        if not self.asymptotic_switch > 0:
            raise ValueError("asymptotic_switch must be positive")


DEFAULT_POLICY = EvalPolicy()

# Lanczos g=7, n=9 coefficients (double precision, ~15 significant digits).
_LANCZOS_G = 7.0
_LANCZOS_C = (
    0.99999999999980993,
    676.5203681218851,
    -1259.1392167224028,
    771.32342877765313,
    -176.61502916214059,
    12.507343278686905,
    -0.13857109526572012,
    9.9843695780195716e-6,
    1.5056327351493116e-7,
)

# a above this evaluates the connection formula / asymptotic series
# directly; more negative a goes through the recurrence.  The split matters:
# for a < -2 the asymptotic series is invalid below the oscillatory turning
# point x ~ 4|a| and the connection formula cancels beyond double-double
# range, while the recurrence is exact and stable downward in a.
_DIRECT_A_FLOOR = -2.0

# For |a| <= 2 the connection formula cancels like e^x, which the
# double-double accumulation (including double-double Gamma prefactors)
# absorbs up to x ~ 40, while the asymptotic series' smallest term is
# ~e^(-x) with near-zero (a)_k factors, already below 1e-14 at x = 35.
# The policy switch remains the hard ceiling for the connection formula.
_SMALL_A_ASYM_X = 35.0

# Taylor coefficients of 1/Gamma(2+t), |t| <= 0.5, as (hi, lo) pairs;
# tail magnitude ~1e-36.  Used to evaluate the reciprocal-gamma connection
# prefactors in double-double (plain double prefactors would cap the
# formula's e^x cancellation at ~1e-14 * e^x).
_RGAMMA2_COEF = (
    (1.0, 0.0),
    (-0.42278433509846713, -4.942915152430645e-18),
    (-0.23309373642178674, -1.4408084925129086e-18),
    (0.1910911013876915, 2.932839121077959e-18),
    (-0.024552490005400017, 3.1741152185683796e-19),
    (-0.01764524455014432, -2.0596383815123733e-19),
    (0.008023273022267347, -3.240392987317889e-19),
    (-0.000804329775604247, -3.602607190215394e-20),
    (-0.0003608378162548181, -1.5794666807586702e-20),
    (0.00014559614213986716, -8.934518886477973e-21),
    (-1.7545859751750962e-05, -4.246056127209952e-22),
    (-2.5889950290372764e-06, 3.15779130658824e-23),
    (1.3385015468946058e-06, -5.81993222930722e-23),
    (-2.0547431491290985e-07, 1.1976970172023511e-23),
    (-1.5952678485086793e-10, 9.518268635601048e-27),
    (6.275621889332284e-09, -1.754665218836032e-25),
    (-1.2736142448630608e-09, -4.6709867395221224e-26),
    (9.233967437604067e-11, -2.1149058773766194e-27),
    (1.2002996793069383e-11, 8.006510155867483e-28),
    (-4.220733353164313e-12, -3.6092545992716353e-28),
    (5.239277345221073e-13, 2.5580633934465336e-29),
    (-1.3890705776659689e-14, 1.048242972774895e-31),
    (-6.692554759005379e-15, -1.8506360308994674e-33),
    (1.344432219582361e-15, 3.6982015472586744e-32),
    (-1.1765359134410035e-16, 1.0896446219801064e-32),
    (-4.723388256455369e-19, -4.4549509560739665e-35),
    (1.6590310803971373e-18, 2.5122440665136478e-36),
    (-2.4665042507910553e-19, 1.8014786141685206e-35),
    (1.677585663556849e-20, 1.3743552786520451e-36),
    (3.682065837048843e-22, -5.494454226813684e-39),
    (-2.34471410655515e-22, 8.137860191721607e-39),
    (2.9048055478847724e-23, 1.4253008048467256e-39),
    (-1.687754992767727e-24, 1.22871469097075e-40),
    (-4.4601453142789826e-26, 1.8505833442045515e-43),
    (2.0995262897796952e-26, 1.4245759035209854e-42),
    (-2.3454334806240088e-27, 1.7036647194241752e-43),
    (1.2733785641681143e-28, 9.833808353995385e-45),
    (2.4403410779879223e-30, 1.5283459028628515e-46),
    (-1.259643603021394e-30, 1.8142768478350467e-47),
    (1.3505925374430595e-31, 5.463526983064567e-48),
    (-7.350736230219333e-33, -4.017167414546333e-49),
)

_SQRT_PI_DD = (1.772453850905516, -7.666586499825799e-17)
# Gamma(1/2) = sqrt(pi); Gamma(-1/2) = -2 sqrt(pi)
_GAMMA_HALF_DD = {
    0.5: _SQRT_PI_DD,
    -0.5: (-2.0 * _SQRT_PI_DD[0], -2.0 * _SQRT_PI_DD[1]),
}


def _dd_rgamma(z, z_lo=0.0):
    """1/Gamma(z) in double-double for moderate |z|; exact 0 at the poles.

    Reduces z into [1.5, 2.5] with the recurrence (picking up exact
    two_sum factors, which vanish identically at non-positive integers)
    and evaluates the Taylor table by a double-double Horner pass.  z_lo
    carries the caller's low word when z is itself a double-double.
    """
    z = np.asarray(z, dtype=float)
    shift = np.round(2.0 - z)
    th, tl = two_sum(z, shift - 2.0)  # z + shift - 2, exact
    th, tl = quick_two_sum(th, tl + z_lo)
    acc_h = np.full(z.shape, _RGAMMA2_COEF[-1][0])
    acc_l = np.full(z.shape, _RGAMMA2_COEF[-1][1])
    for chi, clo in _RGAMMA2_COEF[-2::-1]:
        acc_h, acc_l = dd_mul(acc_h, acc_l, th, tl)
        acc_h, acc_l = dd_add(acc_h, acc_l, np.full(z.shape, chi), np.full(z.shape, clo))
    n_up = int(np.max(np.maximum(shift, 0.0))) if z.size else 0
    for j in range(n_up):
        mask = shift > j
        fh, fl = two_sum(z, float(j))
        fh, fl = quick_two_sum(fh, fl + z_lo)
        newh, newl = dd_mul(acc_h, acc_l, fh, fl)
        acc_h = np.where(mask, newh, acc_h)
        acc_l = np.where(mask, newl, acc_l)
    n_down = int(np.max(np.maximum(-shift, 0.0))) if z.size else 0
    for j in range(1, n_down + 1):
        mask = -shift >= j
        fh, fl = two_sum(z, -float(j))
        fh, fl = quick_two_sum(fh, fl + z_lo)
        newh, newl = dd_div(acc_h, acc_l, fh, fl)
        acc_h = np.where(mask, newh, acc_h)
        acc_l = np.where(mask, newl, acc_l)
    return acc_h, acc_l


def _sinpi(x):
    """sin(pi*x) with exact argument reduction (accurate near integers)."""
    x = np.asarray(x, dtype=float)
    r = x - 2.0 * np.round(x / 2.0)
    out = np.where(
        np.abs(r) <= 0.5,
        np.sin(np.pi * r),
        np.sign(r) * np.sin(np.pi * (1.0 - np.abs(r))),
    )
    return out


def _lanczos_sum(z):
    s = np.full_like(z, _LANCZOS_C[0])
    for i, c in enumerate(_LANCZOS_C[1:], start=1):
        s = s + c / (z - 1.0 + i)
    return s


def gamma(x):
    """Gamma function via Lanczos approximation plus reflection for x < 0.5.

    Raises PoleError when x is zero or a negative integer.
    """
    xs = np.asarray(x, dtype=float)
    if np.any((xs <= 0.0) & (xs == np.round(xs))):
        raise PoleError(f"gamma pole at non-positive integer x={x}")
    scalar = np.isscalar(x) or xs.ndim == 0
    z = np.atleast_1d(xs)
    zp = np.where(z >= 0.5, z, 1.0 - z)
    t = zp + _LANCZOS_G - 0.5
    g_pos = np.sqrt(2.0 * np.pi) * t ** (zp - 0.5) * np.exp(-t) * _lanczos_sum(zp)
    with np.errstate(divide="ignore"):
        out = np.where(z >= 0.5, g_pos, np.pi / (_sinpi(z) * g_pos))
    return float(out[0]) if scalar else out.reshape(xs.shape)


def _kummer_series_dd(a, b, x, policy, rel_tol=None, a_lo=0.0):
    """Sum M(a,b,x) in double-double; a, b, x broadcast elementwise.

    Term factors are built with exact two_sum/two_prod so intermediate term
    growth (which can dwarf the final sum) costs ~1e-32-level noise, not
    1e-16.  Terminates exactly when a is a non-positive integer.

    a_lo carries the low word when the caller's parameter is itself a
    double-double (a shifted a-b+1 rounds at one ulp otherwise, and the
    connection formula amplifies argument perturbations by its e^x
    cancellation).  rel_tol likewise overrides the policy tolerance so
    that context can sum down to the double-double floor.
    """
    a, b, x = np.broadcast_arrays(
        np.asarray(a, dtype=float), np.asarray(b, dtype=float), np.asarray(x, dtype=float)
    )
    tol = policy.rel_tol if rel_tol is None else rel_tol
    shape = a.shape
    th = np.ones(shape)
    tl = np.zeros(shape)
    sh = np.ones(shape)
    sl = np.zeros(shape)
    prev = np.full(shape, np.inf)
    conv = np.zeros(shape, dtype=np.int8)
    for k in range(policy.max_terms):
        fk = float(k)
        nh, nl = two_sum(a, fk)
        nh, nl = quick_two_sum(nh, nl + a_lo)
        th, tl = dd_mul(th, tl, nh, nl)
        th, tl = dd_mul_d(th, tl, x)
        dh, dl = two_sum(b, fk)
        dh, dl = dd_mul_d(dh, dl, fk + 1.0)
        th, tl = dd_div(th, tl, dh, dl)
        sh, sl = dd_add(sh, sl, th, tl)
        at = np.abs(th)
        ok = (at <= tol * np.maximum(np.abs(sh), 1e-300)) & (at <= prev)
        conv = np.where(ok, conv + 1, 0).astype(np.int8)
        prev = at
        if np.all(conv >= 2):
            return sh, sl
    raise NoConvergence(
        f"Kummer series did not converge in {policy.max_terms} terms "
        f"({int(np.sum(conv < 2))} points unconverged)"
    )


def _asymptotic_sum_dd(a, b, x, policy):
    """Large-x sum for U: returns (hi, lo) truncated at the smallest term.

    Sums sum_k (a)_k (a-b+1)_k / (k! (-x)^k).  The series is divergent; the
    partial sum is frozen at the minimum-magnitude term, the classical
    optimal truncation.  Raises NoConvergence if the achievable error is
    worse than sqrt(rel_tol).
    """
    a, b, x = np.broadcast_arrays(
        np.asarray(a, dtype=float), np.asarray(b, dtype=float), np.asarray(x, dtype=float)
    )
    shape = a.shape
    ab1h, ab1l = two_sum(a, 1.0 - b)  # a - b + 1, exact for half-integer b
    th = np.ones(shape)
    tl = np.zeros(shape)
    sh = np.ones(shape)
    sl = np.zeros(shape)
    best_h = sh.copy()
    best_l = sl.copy()
    min_abs = np.ones(shape)
    grow = np.zeros(shape, dtype=np.int8)
    prev = np.ones(shape)
    seen_decay = np.zeros(shape, dtype=bool)
    for k in range(policy.max_terms):
        fk = float(k)
        nh, nl = two_sum(a, fk)
        mh, ml = dd_add_d(ab1h, ab1l, fk)
        nh, nl = dd_mul(nh, nl, mh, ml)
        th, tl = dd_mul(th, tl, nh, nl)
        dh, dl = two_prod(-x, fk + 1.0)
        th, tl = dd_div(th, tl, dh, dl)
        sh, sl = dd_add(sh, sl, th, tl)
        at = np.abs(th)
        improved = at < min_abs
        best_h = np.where(improved, sh, best_h)
        best_l = np.where(improved, sl, best_l)
        min_abs = np.where(improved, at, min_abs)
        # terms may grow before the deep minimum; only growth past it counts
        seen_decay = seen_decay | (at < prev)
        grow = np.where(at > prev, grow + 1, 0).astype(np.int8)
        prev = at
        scale = np.maximum(np.abs(best_h), 1.0)
        done = (min_abs <= policy.rel_tol * scale) | (seen_decay & (grow >= 3))
        if np.all(done):
            break
    rel = min_abs / np.maximum(np.abs(best_h), 1.0)
    if np.any(rel > np.sqrt(policy.rel_tol)):
        raise NoConvergence(
            "asymptotic U series unusable here (smallest term too large); "
            f"worst achievable rel err ~{float(np.max(rel)):.2e}"
        )
    return best_h, best_l


def kummer_m(a, b, x, policy: EvalPolicy = DEFAULT_POLICY):
    """Confluent hypergeometric M(a,b,x) for x >= 0.

    Exact polynomial termination when a is a non-positive integer.
    """
    bs = np.asarray(b, dtype=float)
    if np.any((bs <= 0.0) & (bs == np.round(bs))):
        raise PoleError(f"kummer_m undefined for non-positive integer b={b}")
    xs = np.asarray(x, dtype=float)
    if np.any(xs < 0.0):
        raise DomainError(f"kummer_m requires x >= 0, got {x}")
    scalar = np.isscalar(x) and np.isscalar(a)
    hi, lo = _kummer_series_dd(a, b, xs, policy)
    out = hi + lo
    return float(out) if scalar and out.ndim == 0 else out


def _scaled_connection(a, b, x, policy):
    """U(a,b,x) near a = 0 as (hi, lo, log_offset=0) double-double.

    U = G(1-b)/G(a-b+1) * M(a,b,x) + G(b-1)/G(a) * x^(1-b) * M(a-b+1,2-b,x).
    Every factor (Gamma constants for half-integer b, reciprocal gammas,
    sqrt(x), both Kummer sums) is double-double: the two terms cancel their
    common e^x-scale growth, so ~32 digits of headroom is what makes the
    formula usable up to the asymptotic crossover.  Reciprocal-gamma poles
    (the points where one term drops out, e.g. a a non-positive integer)
    are exact zeros of the prefactor product.
    """
    a_, x_ = np.broadcast_arrays(np.asarray(a, dtype=float), np.asarray(x, dtype=float))
    dd_floor = 1e-30
    # a - b + 1 as an exact double-double: a one-ulp rounding here would be
    # amplified by the full e^x cancellation between the two terms
    abh, abl = two_sum(a_, 1.0 - b)
    m1h, m1l = _kummer_series_dd(a_, b, x_, policy, rel_tol=dd_floor)
    m2h, m2l = _kummer_series_dd(abh, 2.0 - b, x_, policy, rel_tol=dd_floor, a_lo=abl)
    g1 = _GAMMA_HALF_DD[1.0 - b]
    g2 = _GAMMA_HALF_DD[b - 1.0]
    rah, ral = _dd_rgamma(abh, z_lo=abl)
    rbh, rbl = _dd_rgamma(a_)
    t1h, t1l = dd_mul(m1h, m1l, rah, ral)
    t1h, t1l = dd_mul(t1h, t1l, np.full(a_.shape, g1[0]), np.full(a_.shape, g1[1]))
    t2h, t2l = dd_mul(m2h, m2l, rbh, rbl)
    t2h, t2l = dd_mul(t2h, t2l, np.full(a_.shape, g2[0]), np.full(a_.shape, g2[1]))
    sh, sl = dd_sqrt(x_, np.zeros(x_.shape))
    if b == 1.5:  # x^(1-b) = 1/sqrt(x)
        t2h, t2l = dd_div(t2h, t2l, sh, sl)
    else:  # b = 0.5: x^(1-b) = sqrt(x)
        t2h, t2l = dd_mul(t2h, t2l, sh, sl)
    uh, ul = dd_add(t1h, t1l, t2h, t2l)
    return uh, ul, np.zeros(a_.shape)


def _scaled_asymptotic(a, b, x, policy):
    hi, lo = _asymptotic_sum_dd(a, b, x, policy)
    a_, x_ = np.broadcast_arrays(np.asarray(a, dtype=float), np.asarray(x, dtype=float))
    off = -a_ * np.log(x_)
    return hi, lo, off


def _scaled_small_a(a, b, x, policy):
    """U for |a| <= 2 (also the recurrence seeds), any x > 0."""
    a_, x_ = np.broadcast_arrays(np.asarray(a, dtype=float), np.asarray(x, dtype=float))
    hi = np.empty(a_.shape)
    lo = np.empty(a_.shape)
    off = np.empty(a_.shape)
    cut = min(_SMALL_A_ASYM_X, policy.asymptotic_switch)
    near = x_ <= cut
    if np.any(near):
        h, l, o = _scaled_connection(a_[near], b, x_[near], policy)
        hi[near], lo[near], off[near] = h, l, o
    far = ~near
    if np.any(far):
        h, l, o = _scaled_asymptotic(a_[far], b, x_[far], policy)
        hi[far], lo[far], off[far] = h, l, o
    return hi, lo, off


_LN2_1000 = 1000 * np.log(2.0)
_DOWN_1000 = 0.5 ** 1000
_UP_1000 = 2.0 ** 1000


def _rescale_pair(ch, cl, ph, pl, off):
    """Rescale both members of the recurrence pair by a common power of two."""
    mag = np.maximum(np.abs(ch), np.abs(ph))
    big = mag > 1e250
    small = (mag < 1e-250) & (mag > 0.0)
    factor = np.where(big, _DOWN_1000, np.where(small, _UP_1000, 1.0))
    shift = np.where(big, _LN2_1000, np.where(small, -_LN2_1000, 0.0))
    return ch * factor, cl * factor, ph * factor, pl * factor, off + shift


def _scaled_recurrence(a, b, x, policy):
    """U(a,b,x) for a < -2, any x, via the downward a-recurrence.

    U(a-1) = (x + 2a - b) U(a) - a (a-b+1) U(a+1), seeded at a0 in (-1, 0]
    and a0 - 1, sharing the fractional part of a.  U is the dominant
    solution in the decreasing-a direction, so the recurrence is stable;
    coefficients are exact double-doubles for half-integer b.  Periodic
    common rescaling keeps significands in float range while the log offset
    absorbs the magnitude.
    """
    a_, x_ = np.broadcast_arrays(np.asarray(a, dtype=float), np.asarray(x, dtype=float))
    fr = a_ - np.floor(a_)
    a0 = np.where(fr > 0.0, fr - 1.0, 0.0)
    h1, l1, o1 = _scaled_small_a(a0, b, x_, policy)        # U(a0)
    h0, l0, o0 = _scaled_small_a(a0 - 1.0, b, x_, policy)  # U(a0 - 1)
    off = np.maximum(o0, o1)
    f1 = np.exp(np.maximum(o1 - off, -745.0))
    f0 = np.exp(np.maximum(o0 - off, -745.0))
    ph, pl = dd_mul_d(h1, l1, f1)   # U(a_cur + 1)
    ch, cl = dd_mul_d(h0, l0, f0)   # U(a_cur)
    acur = a0 - 1.0
    m = np.rint(acur - a_).astype(np.int64)
    mmax = int(np.max(m)) if m.size else 0
    for _ in range(mmax):
        stepping = acur - 1.0 >= a_ - 0.5
        c1h, c1l = two_sum(x_, 2.0 * acur - b)
        c2h, c2l = two_prod(acur, acur - b + 1.0)
        nh, nl = dd_mul(ch, cl, c1h, c1l)
        sh2, sl2 = dd_mul(ph, pl, c2h, c2l)
        nh, nl = dd_add(nh, nl, -sh2, -sl2)
        ph = np.where(stepping, ch, ph)
        pl = np.where(stepping, cl, pl)
        ch = np.where(stepping, nh, ch)
        cl = np.where(stepping, nl, cl)
        acur = np.where(stepping, acur - 1.0, acur)
        ch, cl, ph, pl, off = _rescale_pair(ch, cl, ph, pl, off)
    return ch, cl, off


def _tricomi_scaled(a, b, x, policy):
    """Dispatch to the right evaluation path; returns (hi, lo, log_offset)."""
    a_, x_ = np.broadcast_arrays(np.asarray(a, dtype=float), np.asarray(x, dtype=float))
    hi = np.empty(a_.shape)
    lo = np.empty(a_.shape)
    off = np.empty(a_.shape)
    small = a_ >= _DIRECT_A_FLOOR
    for mask, fn in ((small, _scaled_small_a), (~small, _scaled_recurrence)):
        if np.any(mask):
            h, l, o = fn(a_[mask], b, x_[mask], policy)
            hi[mask], lo[mask], off[mask] = h, l, o
    return hi, lo, off


def tricomi_u_log(a, b, x, policy: EvalPolicy = DEFAULT_POLICY):
    """Tricomi U as (sign, ln|U|) elementwise, overflow-free.

    This is the form quadrature integrands consume: the weight's
    exp(-kappa z^2) is combined with ln|U| before exponentiation.
    """
    if float(b) not in (0.5, 1.5):
        raise DomainError(f"tricomi_u supports b in {{0.5, 1.5}}, got {b}")
    xs = np.asarray(x, dtype=float)
    if np.any(xs <= 0.0):
        raise DomainError("tricomi_u requires x > 0")
    scalar = np.isscalar(x) and np.isscalar(a)
    a_, x_ = np.broadcast_arrays(np.asarray(a, dtype=float), xs)
    shape = a_.shape
    hi, lo, off = _tricomi_scaled(a_.ravel(), float(b), x_.ravel(), policy)
    sign = np.sign(hi)
    with np.errstate(divide="ignore", invalid="ignore"):
        mag = np.log(np.abs(hi)) + np.log1p(np.where(hi != 0.0, lo / np.where(hi == 0.0, 1.0, hi), 0.0))
    mag = np.where(hi == 0.0, -np.inf, mag) + off
    sign = sign.reshape(shape)
    mag = mag.reshape(shape)
    if scalar:
        return float(sign), float(mag)
    return sign, mag


def tricomi_u(a, b, x, policy: EvalPolicy = DEFAULT_POLICY):
    """Tricomi function U(a,b,x) for x > 0, b in {1/2, 3/2}.

    Deterministic pure function; may legitimately be negative (U oscillates
    in a at fixed x).  Overflows to +-inf only where U itself exceeds float
    range.
    """
    sign, mag = tricomi_u_log(a, b, x, policy)
    with np.errstate(over="ignore"):
        out = np.asarray(sign) * np.exp(np.asarray(mag))
    if np.isscalar(sign):
        return float(out)
    return out
