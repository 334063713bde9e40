"""Independent ground-truth generators used by the verification suites.

Three oracles, deliberately on different numerical routes than the main
library: eigenvalues re-derived by bisection on a multiprecision summation
of the U connection formula (mpmath arithmetic, two working precisions
compared); the MFPT from the backward-equation double integral

    mu(z)/tau = 2 kappa int_1^z dy e^(kappa y^2) y^-2
                     int_y^inf dx x^2 e^(-kappa x^2),

whose inner integral has the closed form y e^(-kappa y^2)/(2 kappa)
+ sqrt(pi) erfc(sqrt(kappa) y)/(4 kappa^(3/2)) and which is the unique
bounded solution of (1/(2 kappa)) m'' + (1/(kappa z) - z) m' = -1, m(1) = 0;
and a direct Crank-Nicolson method-of-lines solve of the survival PDE
dS/dt = (1/(2 kappa)) S'' + (1/(kappa z) - z) S' with S(1) = 0, zero-flux
far boundary, S(z, 0) = 1.

Performance is explicitly not a goal here.
"""

from __future__ import annotations

import functools
import json
import math
from dataclasses import dataclass

import mpmath as mp
import numpy as np
from scipy.linalg import solve_banded

from .specfun import DomainError

__all__ = [
    "GENERATOR_VERSION",
    "OracleConfig",
    "PrecisionExhausted",
    "OverflowGuard",
    "GridTooCoarse",
    "highprec_alpha",
    "mfpt_integral",
    "pde_survival",
    "pde_survival_curve",
    "write_fixture",
    "read_fixture",
]

GENERATOR_VERSION = 1

_SCAN_STEP = 0.05


class PrecisionExhausted(ArithmeticError):
    """Two working precisions failed to agree to the required digits."""


class OverflowGuard(OverflowError):
    """kappa z^2 beyond the log-space guard for the MFPT integral."""


class GridTooCoarse(RuntimeError):
    """PDE Richardson check between nodes and 2x nodes exceeded 1e-3."""


@dataclass(frozen=True)
class OracleConfig:
    digits: int = 30
    quad_points: int = 12
    pde_nodes: int = 1601
    pde_time_step: float = 5e-4
    pde_z_max: float | None = None

    def __post_init__(self):
        if self.digits < 30:
            raise ValueError("digits must be >= 30")
        if self.pde_nodes < 200:
            raise ValueError("pde_nodes must be >= 200")
        if self.quad_points < 1 or self.pde_time_step <= 0:
            raise ValueError("bad oracle configuration")


DEFAULT_ORACLE = OracleConfig()


def _mp_kummer(a, b, x):
    eps = mp.eps * 4
    term = mp.mpf(1)
    total = mp.mpf(1)
    k = 0
    while True:
        term *= (a + k) * x / ((b + k) * (k + 1))
        total += term
        k += 1
        if abs(term) <= eps * max(abs(total), mp.mpf(1)) or k > 10000:
            return total


def _mp_tricomi(a, b, x):
    """Connection-formula U(a,b,x) in the current mpmath precision."""
    t1 = mp.gamma(1 - b) * mp.rgamma(a - b + 1) * _mp_kummer(a, b, x)
    t2 = mp.gamma(b - 1) * mp.rgamma(a) * mp.power(x, 1 - b) * _mp_kummer(a - b + 1, 2 - b, x)
    return t1 + t2


@functools.lru_cache(maxsize=64)
def _mp_brackets(kappa_repr: str, n_max: int, digits: int):
    """Sign-change brackets of alpha -> U(-alpha, 3/2, kappa), scanned once."""
    kappa = mp.mpf(kappa_repr)
    out = []
    with mp.workdps(digits):
        prev_a, prev_f = mp.mpf(0), mp.mpf(1)
        a = mp.mpf(0)
        ceiling = 5 * n_max + 20
        while len(out) < n_max and a < ceiling:
            a = prev_a + mp.mpf(_SCAN_STEP)
            f = _mp_tricomi(-a, mp.mpf(1.5), kappa)
            if f == 0:
                out.append((str(a - mp.mpf(_SCAN_STEP) / 100), str(a + mp.mpf(_SCAN_STEP) / 100)))
            elif mp.sign(f) != mp.sign(prev_f):
                out.append((str(prev_a), str(a)))
            prev_a, prev_f = a, f
    if len(out) < n_max:
        raise PrecisionExhausted(f"found only {len(out)} brackets below alpha = {ceiling}")
    return tuple(out)


def _mp_bisect(kappa, lo, hi, digits):
    with mp.workdps(digits):
        kappa = mp.mpf(kappa)
        lo, hi = mp.mpf(lo), mp.mpf(hi)
        b = mp.mpf(1.5)
        flo = _mp_tricomi(-lo, b, kappa)
        target = mp.mpf(10) ** (-(digits - 6))
        while hi - lo > target * max(hi, mp.mpf(1)):
            mid = (lo + hi) / 2
            fm = _mp_tricomi(-mid, b, kappa)
            if fm == 0:
                return mid
            if mp.sign(fm) == mp.sign(flo):
                lo, flo = mid, fm
            else:
                hi = mid
        return (lo + hi) / 2


def highprec_alpha(kappa: float, n: int, config: OracleConfig = DEFAULT_ORACLE):
    """n-th eigenvalue by multiprecision bisection, certified to >= 20 digits.

    Computed at config.digits and config.digits + 20; PrecisionExhausted if
    the two runs disagree beyond 20 significant digits.  Returns an mpf.
    """
    if kappa <= 0:
        raise DomainError("kappa must be positive")
    if n < 1:
        raise ValueError("n must be >= 1")
    kappa_repr = repr(float(kappa))
    lo, hi = _mp_brackets(kappa_repr, n, config.digits)[n - 1]
    a1 = _mp_bisect(kappa_repr, lo, hi, config.digits)
    a2 = _mp_bisect(kappa_repr, lo, hi, config.digits + 20)
    if abs(a1 - a2) > abs(a2) * mp.mpf(10) ** -20:
        raise PrecisionExhausted(
            f"alpha_{n}(kappa={kappa}) differs between {config.digits} and "
            f"{config.digits + 20} digit runs: {a1} vs {a2}"
        )
    return a2


def mfpt_integral(kappa: float, z: float, config: OracleConfig = DEFAULT_ORACLE) -> float:
    """MFPT (units of tau) from the backward-equation double integral.

    The integrand is assembled in scaled form 1/y
    + sqrt(pi)/(2 sqrt(kappa) y^2) * e^(kappa y^2) erfc(sqrt(kappa) y), all
    in mpmath, with the stated overflow guard on kappa z^2.
    """
    if kappa <= 0:
        raise DomainError("kappa must be positive")
    if z < 1:
        raise DomainError("z must be >= 1")
    if kappa * z * z > 700.0:
        raise OverflowGuard(f"kappa z^2 = {kappa * z * z:.3g} beyond log-space guard (700)")
    if z == 1.0:
        return 0.0
    with mp.workdps(config.digits):
        kap = mp.mpf(repr(float(kappa)))
        sk = mp.sqrt(kap)
        pref = mp.sqrt(mp.pi) / (2 * sk)

        def integrand(y):
            return 1 / y + pref * mp.exp(kap * y * y) * mp.erfc(sk * y) / (y * y)

        pts = [mp.mpf(1) + (mp.mpf(repr(float(z))) - 1) * mp.mpf(i) / config.quad_points
               for i in range(config.quad_points + 1)]
        val = mp.quad(integrand, pts)
        return float(val)


def _pde_operator(kappa: float, grid: np.ndarray):
    """Tridiagonal spatial operator on interior nodes (Dirichlet at z=1,
    zero-flux mirror at the far edge)."""
    h = grid[1] - grid[0]
    zi = grid[1:]  # unknowns
    diff = 1.0 / (2.0 * kappa * h * h)
    adv = (1.0 / (kappa * zi) - zi) / (2.0 * h)
    sub = diff - adv
    dia = np.full(zi.size, -2.0 * diff)
    sup = diff + adv
    # far node: mirrored neighbor doubles the sub coupling, advection cancels
    sub[-1] = 2.0 * diff
    sup[-1] = 0.0
    return sub, dia, sup


def _banded(scale: float, sub, dia, sup, identity: float):
    n = dia.size
    ab = np.zeros((3, n))
    ab[0, 1:] = scale * sup[:-1]
    ab[1, :] = identity + scale * dia
    ab[2, :-1] = scale * sub[1:]
    return ab


def _apply_tridiag(scale, sub, dia, sup, s, identity):
    out = (identity + scale * dia) * s
    out[1:] += scale * sub[1:] * s[:-1]
    out[:-1] += scale * sup[:-1] * s[1:]
    return out


def _pde_march(kappa: float, times: np.ndarray, nodes: int, dt: float, z_max: float):
    """Crank-Nicolson march; returns node grid and S snapshots at `times`.

    The first steps are backward Euler (damps the initial-condition /
    boundary-condition corner discontinuity), the rest Crank-Nicolson.
    """
    grid = np.linspace(1.0, z_max, nodes)
    sub, dia, sup = _pde_operator(kappa, grid)
    s = np.ones(nodes - 1)
    snapshots = []
    t_now = 0.0
    rannacher_left = 4
    for t_target in times:
        if t_target < t_now:
            raise ValueError("times must be non-decreasing")
        remaining = t_target - t_now
        n_steps = max(1, int(math.ceil(remaining / dt))) if remaining > 0 else 0
        dt_seg = remaining / n_steps if n_steps else 0.0
        for _ in range(n_steps):
            if rannacher_left > 0:
                half = dt_seg / 2.0
                for _ in range(2):
                    ab = _banded(-half, sub, dia, sup, 1.0)
                    s = solve_banded((1, 1), ab, s)
                rannacher_left -= 1
            else:
                rhs = _apply_tridiag(dt_seg / 2.0, sub, dia, sup, s, 1.0)
                ab = _banded(-dt_seg / 2.0, sub, dia, sup, 1.0)
                s = solve_banded((1, 1), ab, rhs)
        t_now = t_target
        snapshots.append(s.copy())
    full_grid = grid
    full_snaps = [np.concatenate([[0.0], snap]) for snap in snapshots]
    return full_grid, full_snaps


def pde_survival_curve(
    kappa: float,
    z_eval: float,
    times,
    config: OracleConfig = DEFAULT_ORACLE,
) -> np.ndarray:
    """Survival at (z_eval, each time) from the direct PDE solve.

    Solves at config.pde_nodes and at twice that resolution; raises
    GridTooCoarse if the two disagree by more than 1e-3 anywhere requested.
    """
    if kappa <= 0:
        raise DomainError("kappa must be positive")
    times = np.asarray(sorted(float(t) for t in np.atleast_1d(times)))
    if np.any(times < 0):
        raise DomainError("times must be >= 0")
    z_max = config.pde_z_max if config.pde_z_max is not None else max(20.0, 6.0 / math.sqrt(kappa))
    if not 1.0 <= z_eval <= z_max:
        raise DomainError(f"z_eval must lie in [1, {z_max}]")
    coarse = _pde_values(kappa, z_eval, times, config.pde_nodes, config.pde_time_step, z_max)
    fine = _pde_values(kappa, z_eval, times, 2 * config.pde_nodes - 1, config.pde_time_step / 2.0, z_max)
    if np.max(np.abs(coarse - fine)) > 1e-3:
        raise GridTooCoarse(
            f"Richardson gap {np.max(np.abs(coarse - fine)):.2e} > 1e-3 at nodes={config.pde_nodes}"
        )
    return fine


def _pde_values(kappa, z_eval, times, nodes, dt, z_max):
    positive = times > 0
    run_times = times[positive]
    grid, snaps = _pde_march(kappa, run_times, nodes, dt, z_max)
    out = np.empty(times.size)
    out[~positive] = 1.0 if z_eval > 1.0 else 0.0
    for slot, snap in zip(np.nonzero(positive)[0], snaps):
        out[slot] = float(np.interp(z_eval, grid, snap))
    return out


def pde_survival(kappa: float, z_eval: float, t_over_tau: float,
                 config: OracleConfig = DEFAULT_ORACLE) -> float:
    return float(pde_survival_curve(kappa, z_eval, [t_over_tau], config)[0])


def write_fixture(path, entries: list) -> None:
    """Persist golden constants with their generation parameters."""
    for e in entries:
        e.setdefault("generator_version", GENERATOR_VERSION)
        missing = {"quantity", "kappa", "z_or_n", "value", "digits"} - set(e)
        if missing:
            raise ValueError(f"fixture entry missing {missing}")
    with open(path, "w") as fh:
        json.dump(entries, fh, indent=1)


def read_fixture(path) -> list:
    with open(path) as fh:
        return json.load(fh)
