"""Series solutions built on an EigenSystem, plus physical-unit plumbing.

All internal time is measured in units of the trap relaxation time
tau = zeta/k and lengths in units of the contact radius L, so the survival
probability is S(t|z) = sum_n c_n psi_n(z) exp(-2 alpha_n t/tau), the FPT
density is the term-wise time derivative (units of 1/tau), and the MFPT is
sum_n c_n psi_n(z) / (2 alpha_n) in units of tau.  Physical-unit input is
converted once, here, and never propagates further down.

Expected units for TrapParams mirror the parameter table of the problem:
k in fN/nm, zeta in nN*us/nm, D in nm^2/us, temperature in K, L and r0
in nm.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field

import numpy as np

from .specfun import DEFAULT_POLICY, DomainError, EvalPolicy
from .spectral import EigenSystem, psi_matrix

__all__ = [
    "KB_FN_NM_PER_K",
    "InvalidParams",
    "TruncationWarning",
    "EarlyTimeUnreliable",
    "EARLY_TIME_CUTOFF",
    "TRUNCATION_TIME",
    "TrapParams",
    "Curve",
    "equilibrium_stats",
    "to_dimensionless",
    "survival",
    "survival_curve",
    "fpt_density",
    "fpt_curve",
    "mfpt",
    "mfpt_curve",
    "escape_probability",
    "escape_amplitude",
]

# Boltzmann constant in fN*nm/K (1.380649e-23 J/K, 1 fN*nm = 1e-24 J).
KB_FN_NM_PER_K = 13.80649

# Below this t/tau the truncated density series is flagged unreliable.
EARLY_TIME_CUTOFF = 0.03
# Below this t/tau a <50-term survival series may show visible truncation.
TRUNCATION_TIME = 0.2


class InvalidParams(ValueError):
    """Physically inconsistent trap parameters."""


class TruncationWarning(UserWarning):
    """Series truncated too short for the requested early time."""


class EarlyTimeUnreliable(UserWarning):
    """Density values below the early-time cutoff carry large series error."""


@dataclass
class TrapParams:
    """Physical trap parameters; at least one of D or temperature required.

    The missing one of (D, temperature) is filled in from the Einstein
    relation D = k_B T / zeta; if both are supplied they must agree within
    0.5%.
    """

    k: float            # trap stiffness, fN/nm
    zeta: float         # friction coefficient, nN*us/nm
    L: float            # contact (capture) radius, nm
    r0: float           # initial radial coordinate, nm
    D: float | None = None            # diffusivity, nm^2/us
    temperature: float | None = None  # K

    def __post_init__(self):
        for name in ("k", "zeta", "L", "r0"):
            if getattr(self, name) <= 0:
                raise InvalidParams(f"{name} must be positive")
        if self.r0 <= self.L:
            raise InvalidParams("r0 must exceed the contact radius L")
        if self.D is None and self.temperature is None:
            raise InvalidParams("need D or temperature (Einstein relation fills the other)")
        if self.D is None:
            self.D = self.einstein_diffusivity(self.temperature, self.zeta)
        elif self.temperature is None:
            self.temperature = self.D * self.zeta * 1e6 / KB_FN_NM_PER_K
        else:
            d_expected = self.einstein_diffusivity(self.temperature, self.zeta)
            if abs(self.D - d_expected) > 0.005 * d_expected:
                raise InvalidParams(
                    f"D = {self.D} vs k_B T / zeta = {d_expected:.6g}: Einstein "
                    "relation violated beyond 0.5%"
                )
        if self.D <= 0 or self.temperature <= 0:
            raise InvalidParams("D and temperature must be positive")

    @staticmethod
    def einstein_diffusivity(temperature: float, zeta: float) -> float:
        """k_B T / zeta in nm^2/us for T in K, zeta in nN*us/nm."""
        return KB_FN_NM_PER_K * temperature * 1e-6 / zeta

    @property
    def kappa(self) -> float:
        return (self.k * 1e-6) * self.L ** 2 / (2.0 * self.zeta * self.D)

    @property
    def z(self) -> float:
        return self.r0 / self.L

    @property
    def tau_seconds(self) -> float:
        return self.zeta / self.k


@dataclass
class Curve:
    """(abscissa, value) samples with provenance metadata.

    kind is one of survival, density, mfpt, empirical; stderr carries the
    binomial standard error of empirical survival curves.
    """

    abscissa: np.ndarray
    values: np.ndarray
    meta: dict = field(default_factory=dict)
    stderr: np.ndarray | None = None

    def __post_init__(self):
        self.abscissa = np.asarray(self.abscissa, dtype=float)
        self.values = np.asarray(self.values, dtype=float)
        if self.abscissa.shape != self.values.shape:
            raise ValueError("abscissa and values must have matching shape")
        if np.any(np.diff(self.abscissa) <= 0):
            raise ValueError("abscissa must increase strictly")
        if not np.all(np.isfinite(self.values)):
            raise ValueError("curve values must be finite")
        if self.stderr is not None:
            self.stderr = np.asarray(self.stderr, dtype=float)


def equilibrium_stats(params: TrapParams) -> dict:
    """Equilibrium radial statistics (nm): rms, mean, mode displacement."""
    kbt_over_k = KB_FN_NM_PER_K * params.temperature / params.k
    return {
        "rms": math.sqrt(3.0 * kbt_over_k),
        "mean": math.sqrt(8.0 / math.pi) * math.sqrt(kbt_over_k),
        "mode": math.sqrt(2.0 * kbt_over_k),
    }


def to_dimensionless(params: TrapParams) -> dict:
    """kappa = k L^2/(2 zeta D), z = r0/L, tau = zeta/k (seconds)."""
    if params.r0 <= params.L:
        raise InvalidParams("r0 must exceed L")
    return {"kappa": params.kappa, "z": params.z, "tau": params.tau_seconds}


def _mode_arrays(system: EigenSystem, terms: int | None):
    n = system.count if terms is None else terms
    if not 1 <= n <= system.count:
        raise ValueError(f"terms must be in 1..{system.count}")
    return system.alphas()[:n], system.amps()[:n], n


def _psi_at(system: EigenSystem, z, n_terms: int, policy: EvalPolicy):
    zs = np.atleast_1d(np.asarray(z, dtype=float))
    if np.any(zs < 1.0):
        raise DomainError("z must be >= 1")
    full = psi_matrix(system, zs, policy)
    return full[:n_terms]


def survival(system: EigenSystem, z: float, t_over_tau: float, terms: int | None = None,
             policy: EvalPolicy = DEFAULT_POLICY) -> float:
    """Raw series survival probability S(t/tau | z); not clamped.

    Warns TruncationWarning for t/tau < 0.2 with fewer than 50 terms, where
    truncation error is visible.
    """
    alphas, amps, n = _mode_arrays(system, terms)
    if t_over_tau < 0:
        raise DomainError("t_over_tau must be >= 0")
    if t_over_tau < TRUNCATION_TIME and n < 50:
        warnings.warn(
            f"survival series with {n} terms is inaccurate below t = {TRUNCATION_TIME} tau",
            TruncationWarning,
            stacklevel=2,
        )
    psi = _psi_at(system, z, n, policy)[:, 0]
    return float(np.sum(amps * psi * np.exp(-2.0 * alphas * t_over_tau)))


def survival_curve(system: EigenSystem, z: float, t_grid, terms: int | None = None,
                   clamp: bool = True, policy: EvalPolicy = DEFAULT_POLICY) -> Curve:
    """Survival curve over a t/tau grid; reported values clamped to [0, 1]."""
    alphas, amps, n = _mode_arrays(system, terms)
    t = np.asarray(t_grid, dtype=float)
    psi = _psi_at(system, z, n, policy)[:, 0]
    raw = (amps * psi) @ np.exp(-2.0 * np.outer(alphas, t))
    vals = np.clip(raw, 0.0, 1.0) if clamp else raw
    meta = {"kind": "survival", "kappa": system.kappa, "z": float(z), "terms": n,
            "clamped": bool(clamp)}
    return Curve(abscissa=t, values=vals, meta=meta)


def fpt_density(system: EigenSystem, z: float, t_over_tau: float, terms: int | None = None,
                policy: EvalPolicy = DEFAULT_POLICY) -> float:
    """FPT density P(t/tau | z) in units of 1/tau (term-wise -dS/dt).

    Values below t = 0.03 tau are emitted as-is but flagged via the
    EarlyTimeUnreliable warning; truncated series may even dip negative
    there.
    """
    alphas, amps, n = _mode_arrays(system, terms)
    if t_over_tau < 0:
        raise DomainError("t_over_tau must be >= 0")
    if t_over_tau < EARLY_TIME_CUTOFF:
        warnings.warn(
            f"density below t = {EARLY_TIME_CUTOFF} tau carries large series error",
            EarlyTimeUnreliable,
            stacklevel=2,
        )
    psi = _psi_at(system, z, n, policy)[:, 0]
    return float(np.sum(2.0 * alphas * amps * psi * np.exp(-2.0 * alphas * t_over_tau)))


def fpt_curve(system: EigenSystem, z: float, t_grid, terms: int | None = None,
              policy: EvalPolicy = DEFAULT_POLICY) -> Curve:
    """FPT density curve; meta carries the early-time cutoff and a per-point
    unreliable mask rather than suppressing values (presentation layers
    decide)."""
    alphas, amps, n = _mode_arrays(system, terms)
    t = np.asarray(t_grid, dtype=float)
    psi = _psi_at(system, z, n, policy)[:, 0]
    vals = (2.0 * alphas * amps * psi) @ np.exp(-2.0 * np.outer(alphas, t))
    meta = {
        "kind": "density",
        "kappa": system.kappa,
        "z": float(z),
        "terms": n,
        "early_cutoff": EARLY_TIME_CUTOFF,
        "unreliable": (t < EARLY_TIME_CUTOFF).tolist(),
    }
    return Curve(abscissa=t, values=vals, meta=meta)


def mfpt(system: EigenSystem, z: float, terms: int | None = None,
         policy: EvalPolicy = DEFAULT_POLICY) -> float:
    """Mean first-passage time in units of tau: sum c_n psi_n(z)/(2 alpha_n)."""
    alphas, amps, n = _mode_arrays(system, terms)
    psi = _psi_at(system, z, n, policy)[:, 0]
    return float(np.sum(amps * psi / (2.0 * alphas)))


def mfpt_curve(system: EigenSystem, z_grid, terms: int | None = None,
               policy: EvalPolicy = DEFAULT_POLICY) -> Curve:
    alphas, amps, n = _mode_arrays(system, terms)
    z = np.asarray(z_grid, dtype=float)
    psi = _psi_at(system, z, n, policy)
    vals = (amps / (2.0 * alphas)) @ psi
    meta = {"kind": "mfpt", "kappa": system.kappa, "terms": n}
    return Curve(abscissa=z, values=vals, meta=meta)


def escape_probability(z) -> float:
    """Potential-free escape probability 1 - 1/z for z >= 1."""
    zs = np.asarray(z, dtype=float)
    if np.any(zs < 1.0):
        raise DomainError("z must be >= 1")
    out = 1.0 - 1.0 / zs
    return float(out) if np.isscalar(z) else out


def escape_amplitude(system: EigenSystem, z, policy: EvalPolicy = DEFAULT_POLICY):
    """Long-time amplitude c_1 psi_1(z), the kappa -> 0+ escape-probability
    analogue."""
    zs = np.asarray(z, dtype=float)
    if np.any(zs < 1.0):
        raise DomainError("z must be >= 1")
    psi1 = _psi_at(system, np.atleast_1d(zs), 1, policy)[0]
    out = system.modes[0].amp * psi1
    return float(out[0]) if np.isscalar(z) else out
