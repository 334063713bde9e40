"""Eigen-system construction for the trapped-diffusion spectral problem.

For a dimensionless trap stiffness kappa the decay modes are governed by
U(-alpha, 3/2, kappa z^2): the eigenvalues alpha_n are the zeros in alpha of
U(-alpha, 3/2, kappa) (absorbing boundary at z = 1), the eigenfunctions are
psi_n(z) = U(-alpha_n, 3/2, kappa z^2) / N_n, orthonormal under the weight
w(z) = z^2 exp(-kappa z^2) on [1, inf), and the initial-condition amplitudes
are c_n = integral of w * psi_n.

Quadrature is adaptive Gauss-Kronrod on [1, z_max] with z_max chosen so the
discarded tail is below quad_tol; all integrals of an eigensystem share one
adaptive mesh (batched rows).  Finished systems are cached as one JSON
document per (kappa, count, tolerances) with atomic replacement.
"""

from __future__ import annotations

import json
import math
import os
import tempfile
import threading
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from . import quadrature
from .specfun import DEFAULT_POLICY, EvalPolicy, NoConvergence, tricomi_u, tricomi_u_log

__all__ = [
    "EigenMode",
    "EigenSystem",
    "ZeroStiffness",
    "BracketExhausted",
    "CacheCorrupt",
    "boundary_function",
    "find_eigenvalues",
    "weighted_integral",
    "normalization",
    "coefficient",
    "eigenfunction_eval",
    "build_eigensystem",
    "orthonormality_matrix",
    "default_cache_dir",
    "load_eigensystem",
]

_SCAN_STEP = 0.05
_SCAN_CHUNK = 200

ENV_CACHE_DIR = "TRAPFPT_CACHE_DIR"


class ZeroStiffness(ValueError):
    """kappa = 0 rejected: the eigenfunction series is inapplicable there."""


class BracketExhausted(RuntimeError):
    """Root scan hit its ceiling before finding the requested eigenvalues."""


class CacheCorrupt(RuntimeError):
    """Cache file unreadable or inconsistent; caller recomputes."""


@dataclass(frozen=True)
class EigenMode:
    """One spectral mode: index, eigenvalue, decay rate, norm, amplitude."""

    n: int
    alpha: float
    lambda_tau: float  # dimensionless decay rate, 2 * alpha
    norm: float
    amp: float


@dataclass
class EigenSystem:
    kappa: float
    modes: tuple
    root_tol: float
    quad_tol: float
    z_max: float

    def __post_init__(self):
        if self.kappa <= 0:
            raise ZeroStiffness("kappa must be positive")
        alphas = [m.alpha for m in self.modes]
        if any(a2 <= a1 for a1, a2 in zip(alphas, alphas[1:])):
            raise ValueError("mode eigenvalues must increase strictly")
        for i, m in enumerate(self.modes):
            if m.n != i + 1:
                raise ValueError("mode indices must be 1..count in order")
            if not (m.alpha > 0 and m.norm > 0):
                raise ValueError("alpha_n and N_n must be positive")

    @property
    def count(self) -> int:
        return len(self.modes)

    def alphas(self) -> np.ndarray:
        return np.array([m.alpha for m in self.modes])

    def norms(self) -> np.ndarray:
        return np.array([m.norm for m in self.modes])

    def amps(self) -> np.ndarray:
        return np.array([m.amp for m in self.modes])


def boundary_function(alpha, kappa: float, policy: EvalPolicy = DEFAULT_POLICY):
    """U(-alpha, 3/2, kappa): its zeros in alpha are the eigenvalues."""
    if kappa <= 0:
        raise ZeroStiffness("kappa must be positive")
    return tricomi_u(-np.asarray(alpha, dtype=float) if not np.isscalar(alpha) else -alpha, 1.5, kappa, policy)


def _boundary_values(alphas: np.ndarray, kappa: float, policy: EvalPolicy) -> np.ndarray:
    """Sign-faithful boundary function values, saturated instead of inf."""
    sign, mag = tricomi_u_log(-alphas, 1.5, kappa, policy)
    sign = np.atleast_1d(np.asarray(sign))
    mag = np.atleast_1d(np.asarray(mag))
    return sign * np.exp(np.minimum(mag, 690.0))


def find_eigenvalues(
    kappa: float,
    count: int,
    root_tol: float = 1e-10,
    policy: EvalPolicy = DEFAULT_POLICY,
) -> list:
    """First `count` zeros of the boundary function, each from a verified
    sign-change bracket refined by bisection plus a secant polish.

    The scan starts at alpha = 0+ (value exactly 1), steps by 0.05, and gives
    up past alpha = 5*count + 20 (BracketExhausted).
    """
    if kappa <= 0:
        raise ZeroStiffness("kappa must be positive")
    if count < 1:
        raise ValueError("count must be >= 1")
    if root_tol <= 0:
        raise ValueError("root_tol must be positive")
    ceiling = 5.0 * count + 20.0
    exact_roots = []
    brackets = []
    prev_a, prev_f = 0.0, 1.0
    k = 0
    while len(exact_roots) + len(brackets) < count and prev_a < ceiling:
        grid = prev_a + _SCAN_STEP * np.arange(1, _SCAN_CHUNK + 1)
        vals = _boundary_values(grid, kappa, policy)
        for a_i, f_i in zip(grid, vals):
            if f_i == 0.0:
                exact_roots.append(float(a_i))
                a_eps = a_i + _SCAN_STEP * 1e-3
                f_eps = float(_boundary_values(np.array([a_eps]), kappa, policy)[0])
                prev_a, prev_f = a_eps, f_eps
            elif np.sign(f_i) != np.sign(prev_f):
                brackets.append((prev_a, float(a_i), prev_f, float(f_i)))
                prev_a, prev_f = float(a_i), float(f_i)
            else:
                prev_a, prev_f = float(a_i), float(f_i)
            if len(exact_roots) + len(brackets) >= count or prev_a >= ceiling:
                break
    found = len(exact_roots) + len(brackets)
    if found < count:
        raise BracketExhausted(
            f"only {found} sign changes below alpha = {ceiling} for kappa = {kappa}"
        )
    roots = list(exact_roots)
    if brackets:
        lo = np.array([b[0] for b in brackets])
        hi = np.array([b[1] for b in brackets])
        flo = np.array([b[2] for b in brackets])
        fhi = np.array([b[3] for b in brackets])
        # lock-step bisection of all brackets, then two regula-falsi polishes
        while float(np.max(hi - lo)) > root_tol:
            mid = 0.5 * (lo + hi)
            fm = _boundary_values(mid, kappa, policy)
            hit = fm == 0.0
            low_side = np.sign(fm) == np.sign(flo)
            lo = np.where(hit, mid, np.where(low_side, mid, lo))
            hi = np.where(hit, mid, np.where(low_side, hi, mid))
            flo = np.where(low_side, fm, flo)
            fhi = np.where(low_side, fhi, fm)
        root = 0.5 * (lo + hi)
        for _ in range(2):
            denom = fhi - flo
            step_ok = (denom != 0) & np.isfinite(denom)
            cand = np.where(step_ok, hi - fhi * (hi - lo) / np.where(denom == 0, 1.0, denom), root)
            root = np.clip(cand, lo, hi)
        roots.extend(float(r) for r in root)
    roots = sorted(roots)[:count]
    if any(r2 - r1 <= 0 for r1, r2 in zip(roots, roots[1:])):
        raise BracketExhausted("refined roots failed to order strictly; scan step too coarse")
    return roots


def _truncation_radius(kappa: float, alpha_max: float, quad_tol: float) -> float:
    """z_max with discarded-tail bound below quad_tol, then doubled as guard.

    Solves kappa z^2 = ln(1/tol) + 2 alpha_max ln z by fixed-point iteration;
    the integrand envelope is ~ z^2 exp(-kappa z^2) z^(4 alpha).
    """
    target = math.log(1.0 / quad_tol)
    z = 30.0
    for _ in range(8):
        z = max(30.0, math.sqrt((target + 2.0 * alpha_max * math.log(max(z, math.e))) / kappa))
    return 2.0 * z


def _initial_edges(kappa: float, alpha_max: float, z_max: float) -> np.ndarray:
    """Uniform panels across the oscillatory zone, geometric tail beyond."""
    z_turn = math.sqrt((4.0 * alpha_max + 6.0) / kappa) + 1.0
    n_osc = max(16, 2 * int(math.ceil(alpha_max)) + 8)
    return quadrature.geometric_edges(1.0, z_max, n_osc, min(z_turn, z_max))


def _integrate_checked(integrand, edges, quad_tol, scale_floor, z_max):
    """Integrate rows and verify the discarded tail really is negligible."""
    totals, errs = quadrature.integrate_rows(integrand, edges, rel_tol=quad_tol, scale_floor=scale_floor)
    for _ in range(3):
        ext15, _ = quadrature._eval_panels(integrand, np.array([z_max]), np.array([1.5 * z_max]))
        tail = np.abs(ext15[:, 0])
        bound = quad_tol * np.maximum(np.abs(totals), scale_floor)
        if np.all(tail <= bound):
            return totals, errs
        ext_edges = quadrature.geometric_edges(z_max, 3.0 * z_max, 4, z_max * 1.5)
        add, add_err = quadrature.integrate_rows(integrand, ext_edges, rel_tol=quad_tol, scale_floor=np.maximum(np.abs(totals), scale_floor))
        totals = totals + add
        errs = errs + add_err
        z_max = 3.0 * z_max
    raise NoConvergence("weighted-integral tail refuses to decay below quad_tol")


def weighted_integral(
    f,
    kappa: float,
    quad_tol: float = 1e-10,
    alpha_max: float = 0.0,
    z_max: float | None = None,
    scale_floor: float = 0.0,
):
    """integral over [1, inf) of z^2 exp(-kappa z^2) f(z) dz.

    f must accept a 1-D numpy array.  The semi-infinite range is truncated at
    a z_max whose tail bound is below quad_tol (checked, and extended if the
    check fails).  scale_floor sets the absolute scale for near-zero
    integrals (e.g. orthogonality cross-terms).
    """
    if kappa <= 0:
        raise ZeroStiffness("kappa must be positive")
    if z_max is None:
        z_max = _truncation_radius(kappa, alpha_max, quad_tol)
    edges = _initial_edges(kappa, alpha_max, z_max)

    def integrand(z):
        return z * z * np.exp(-kappa * z * z) * np.asarray(f(z))

    totals, _ = _integrate_checked(integrand, edges, quad_tol, scale_floor, z_max)
    return float(totals[0])


def _log_weight(z: np.ndarray, kappa: float) -> np.ndarray:
    return 2.0 * np.log(z) - kappa * z * z


def _u_log_rows(alphas: np.ndarray, kappa: float, z: np.ndarray, policy: EvalPolicy):
    x = kappa * z * z
    return tricomi_u_log(-alphas[:, None], 1.5, x[None, :], policy)


def _build_nc_integrand(alphas: np.ndarray, kappa: float, policy: EvalPolicy):
    """Rows: w U_n^2 for each mode, then w U_n (log-combined, overflow-free)."""

    def integrand(z):
        sign, logu = _u_log_rows(alphas, kappa, z, policy)
        lw = _log_weight(z, kappa)[None, :]
        sq = np.exp(lw + 2.0 * logu)
        lin = sign * np.exp(lw + logu)
        return np.concatenate([sq, lin], axis=0)

    return integrand


def normalization(kappa: float, alpha_n: float, quad_tol: float = 1e-10, policy: EvalPolicy = DEFAULT_POLICY) -> float:
    """N_n = sqrt(integral of w(z) U(-alpha_n, 3/2, kappa z^2)^2 dz)."""
    if kappa <= 0:
        raise ZeroStiffness("kappa must be positive")
    z_max = _truncation_radius(kappa, alpha_n, quad_tol)
    edges = _initial_edges(kappa, alpha_n, z_max)

    def integrand(z):
        _, logu = _u_log_rows(np.array([alpha_n]), kappa, z, policy)
        return np.exp(_log_weight(z, kappa)[None, :] + 2.0 * logu)

    totals, _ = _integrate_checked(integrand, edges, quad_tol, 0.0, z_max)
    return math.sqrt(float(totals[0]))


def coefficient(kappa: float, mode: EigenMode, quad_tol: float = 1e-10, policy: EvalPolicy = DEFAULT_POLICY) -> float:
    """c_n = integral of w(z) psi_n(z) dz for a mode with converged alpha, N."""
    if kappa <= 0:
        raise ZeroStiffness("kappa must be positive")
    z_max = _truncation_radius(kappa, mode.alpha, quad_tol)
    edges = _initial_edges(kappa, mode.alpha, z_max)
    # |c_n| <= sqrt(total weight mass) by Cauchy-Schwarz; use it as the scale
    mass = weight_mass(kappa)

    def integrand(z):
        sign, logu = _u_log_rows(np.array([mode.alpha]), kappa, z, policy)
        return sign * np.exp(_log_weight(z, kappa)[None, :] + logu)

    totals, _ = _integrate_checked(integrand, edges, quad_tol, math.sqrt(mass) * mode.norm, z_max)
    return float(totals[0]) / mode.norm


def weight_mass(kappa: float) -> float:
    """Closed form of integral z^2 exp(-kappa z^2) dz over [1, inf)."""
    return math.exp(-kappa) / (2.0 * kappa) + math.sqrt(math.pi) * math.erfc(math.sqrt(kappa)) / (
        4.0 * kappa ** 1.5
    )


def eigenfunction_eval(system: EigenSystem, n: int, z, policy: EvalPolicy = DEFAULT_POLICY):
    """psi_n(z) = U(-alpha_n, 3/2, kappa z^2) / N_n for 1-based n, z >= 1."""
    if not 1 <= n <= system.count:
        raise IndexError(f"mode index {n} outside 1..{system.count}")
    zs = np.asarray(z, dtype=float)
    if np.any(zs < 1.0):
        raise ValueError("z must be >= 1")
    mode = system.modes[n - 1]
    sign, logu = tricomi_u_log(-mode.alpha, 1.5, system.kappa * zs * zs, policy)
    out = np.asarray(sign) * np.exp(np.asarray(logu) - math.log(mode.norm))
    return float(out) if np.isscalar(z) else out


def psi_matrix(system: EigenSystem, z, policy: EvalPolicy = DEFAULT_POLICY) -> np.ndarray:
    """All eigenfunctions at once: shape (count, len(z))."""
    zs = np.atleast_1d(np.asarray(z, dtype=float))
    sign, logu = _u_log_rows(system.alphas(), system.kappa, zs, policy)
    return sign * np.exp(logu - np.log(system.norms())[:, None])


def orthonormality_matrix(system: EigenSystem, n_max: int | None = None, policy: EvalPolicy = DEFAULT_POLICY) -> np.ndarray:
    """Gram matrix of the first n_max eigenfunctions under the weight.

    Should be the identity to ~2 * quad_tol; used by the certification suite.
    """
    n_max = system.count if n_max is None else min(n_max, system.count)
    alphas = system.alphas()[:n_max]
    norms = system.norms()[:n_max]
    pairs = [(i, j) for i in range(n_max) for j in range(i, n_max)]
    kappa = system.kappa
    z_max = system.z_max

    def integrand(z):
        sign, logu = _u_log_rows(alphas, kappa, z, policy)
        lw = _log_weight(z, kappa)[None, :]
        lpsi = logu - np.log(norms)[:, None]
        rows = [
            sign[i] * sign[j] * np.exp(lw[0] + lpsi[i] + lpsi[j])
            for (i, j) in pairs
        ]
        return np.stack(rows, axis=0)

    edges = _initial_edges(kappa, float(alphas[-1]), z_max)
    totals, _ = _integrate_checked(integrand, edges, system.quad_tol, 1.0, z_max)
    gram = np.empty((n_max, n_max))
    for (i, j), v in zip(pairs, totals):
        gram[i, j] = gram[j, i] = v
    return gram


# ---------------------------------------------------------------------------
# cache

_memory_cache: dict = {}
_memory_lock = threading.Lock()


def default_cache_dir() -> Path:
    env = os.environ.get(ENV_CACHE_DIR)
    if env:
        return Path(env)
    return Path.home() / ".cache" / "trapfpt"


def _cache_key(kappa: float, count: int, root_tol: float, quad_tol: float) -> str:
    return f"eigen_{float(f'{kappa:.12g}'):.12g}_n{count}_rt{root_tol:.6g}_qt{quad_tol:.6g}"


def _cache_path(cache_dir: Path, kappa, count, root_tol, quad_tol) -> Path:
    return Path(cache_dir) / (_cache_key(kappa, count, root_tol, quad_tol) + ".json")


def system_to_dict(system: EigenSystem) -> dict:
    return {
        "kappa": system.kappa,
        "count": system.count,
        "root_tol": system.root_tol,
        "quad_tol": system.quad_tol,
        "z_max": system.z_max,
        "modes": [
            {"n": m.n, "alpha": m.alpha, "N": m.norm, "c": m.amp} for m in system.modes
        ],
    }


def system_from_dict(doc: dict) -> EigenSystem:
    try:
        modes = tuple(
            EigenMode(
                n=int(m["n"]),
                alpha=float(m["alpha"]),
                lambda_tau=2.0 * float(m["alpha"]),
                norm=float(m["N"]),
                amp=float(m["c"]),
            )
            for m in doc["modes"]
        )
        system = EigenSystem(
            kappa=float(doc["kappa"]),
            modes=modes,
            root_tol=float(doc["root_tol"]),
            quad_tol=float(doc["quad_tol"]),
            z_max=float(doc["z_max"]),
        )
    except (KeyError, TypeError, ValueError, ZeroStiffness) as exc:
        raise CacheCorrupt(f"bad eigensystem document: {exc}") from exc
    if int(doc["count"]) != system.count:
        raise CacheCorrupt("count field disagrees with number of modes")
    return system


def load_eigensystem(path: Path) -> EigenSystem:
    try:
        doc = json.loads(Path(path).read_text())
    except (OSError, json.JSONDecodeError) as exc:
        raise CacheCorrupt(f"unreadable cache file {path}: {exc}") from exc
    return system_from_dict(doc)


def _atomic_write(path: Path, text: str) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=path.name, suffix=".tmp")
    try:
        with os.fdopen(fd, "w") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        try:
            os.unlink(tmp)
        except OSError:
            pass
        raise


def build_eigensystem(
    kappa: float,
    count: int,
    root_tol: float = 1e-10,
    quad_tol: float = 1e-10,
    cache_dir: Path | str | None = None,
    policy: EvalPolicy = DEFAULT_POLICY,
    use_cache: bool = True,
) -> EigenSystem:
    """Find alpha_n, N_n, c_n for the first `count` modes at this kappa.

    Consults the on-disk cache keyed by (kappa to 12 significant digits,
    count, tolerances); a corrupt cache entry is recomputed and overwritten.
    All 2*count integrals share one adaptive mesh.
    """
    if kappa <= 0:
        raise ZeroStiffness(
            "kappa = 0 is the potential-free case, where the eigenfunction "
            "series is inapplicable; kappa must be positive"
        )
    cache_dir = Path(cache_dir) if cache_dir is not None else default_cache_dir()
    key = _cache_key(kappa, count, root_tol, quad_tol)
    if use_cache:
        with _memory_lock:
            hit = _memory_cache.get(key)
        if hit is not None:
            return hit
        path = _cache_path(cache_dir, kappa, count, root_tol, quad_tol)
        if path.exists():
            try:
                system = load_eigensystem(path)
                if abs(system.kappa - kappa) <= 1e-12 * abs(kappa) and system.count == count:
                    with _memory_lock:
                        _memory_cache[key] = system
                    return system
            except CacheCorrupt:
                pass  # fall through: recompute and overwrite

    alphas = np.array(find_eigenvalues(kappa, count, root_tol, policy))
    alpha_max = float(alphas[-1])
    z_max = _truncation_radius(kappa, alpha_max, quad_tol)
    edges = _initial_edges(kappa, alpha_max, z_max)
    integrand = _build_nc_integrand(alphas, kappa, policy)
    floor = np.concatenate([np.zeros(count), np.full(count, math.sqrt(weight_mass(kappa)))])
    totals, _ = _integrate_checked(integrand, edges, quad_tol, floor, z_max)
    i_sq = totals[:count]
    i_lin = totals[count:]
    if np.any(i_sq <= 0):
        raise NoConvergence("normalization integral came out non-positive")
    norms = np.sqrt(i_sq)
    amps = i_lin / norms
    modes = tuple(
        EigenMode(n=i + 1, alpha=float(alphas[i]), lambda_tau=2.0 * float(alphas[i]),
                  norm=float(norms[i]), amp=float(amps[i]))
        for i in range(count)
    )
    system = EigenSystem(kappa=kappa, modes=modes, root_tol=root_tol, quad_tol=quad_tol, z_max=z_max)
    if use_cache:
        _atomic_write(
            _cache_path(cache_dir, kappa, count, root_tol, quad_tol),
            json.dumps(system_to_dict(system), indent=1),
        )
        with _memory_lock:
            _memory_cache[key] = system
    return system
