"""Acceptance criteria for the whole artifact, runnable as a suite.

Each criterion is a function returning a CriterionResult with pass/fail and
the measured numbers.  Tolerances are pinned here, not configurable: they
are the artifact's exit criteria.  Criteria 4 and 10 are implemented
exactly as specified but fail for documented structural reasons (see their
`note` details): the eigenfunction expansion of the initial condition
converges slowly next to the absorbing boundary, and the desk-scale step
size carries an O(sqrt(dt)) capture bias that the simulation procedure
deliberately does not correct.
"""

from __future__ import annotations

import time
import warnings
from dataclasses import dataclass, field

import numpy as np

from . import montecarlo as mc
from . import oracle
from . import solution as sol
from . import spectral

TABLE_KAPPAS = (0.003, 0.012, 0.024, 0.049)
TABLE_STIFFNESS = (0.2525, 1.01, 2.02, 4.04)
TABLE_RATES_HZ = (0.125, 0.5, 1.0, 2.0)

# criteria that cannot pass as stated; kept red on purpose
KNOWN_SPEC_LIMITS = {
    4: "endpoint-capture bias is O(sqrt(dt/kappa)) ~ 0.03-0.11 at dt/tau = "
       "1e-3, above the 0.01 bound; it vanishes like sqrt(dt) (validated "
       "separately)",
    7: "the 25-term series is 4.6% off in the far Gaussian tail "
       "(kappa = 0.049, z = 20, where kappa z^2 ~ 20; still 1.6% at 50 "
       "terms), certified against an independent multiprecision sum; the 1% "
       "bound holds for every other (kappa, z) point and the log-z "
       "linearity of the true MFPT holds to 0.3%",
    10: "the expansion of 1 violates the absorbing boundary condition, so "
        "50 terms leave ~0.35 error at z = 1.5 (converges ~ n^-1/2); the "
        "bound holds only for z >= 10",
}


@dataclass
class CriterionResult:
    cid: int
    description: str
    passed: bool
    details: dict = field(default_factory=dict)
    seconds: float = 0.0
    note: str = ""


def _system(kappa, count, cache_dir):
    return spectral.build_eigensystem(kappa, count, cache_dir=cache_dir)


def criterion_1(cache_dir=None, workers=1) -> CriterionResult:
    """Eigen-system certification against the multiprecision oracle."""
    t0 = time.time()
    worst_alpha = 0.0
    worst_ortho = 0.0
    for kappa in TABLE_KAPPAS:
        system = _system(kappa, 25, cache_dir)
        alphas = system.alphas()
        for n in range(1, 26):
            ref = float(oracle.highprec_alpha(kappa, n))
            worst_alpha = max(worst_alpha, abs(alphas[n - 1] - ref))
        gram = spectral.orthonormality_matrix(system, 10)
        worst_ortho = max(worst_ortho, float(np.max(np.abs(gram - np.eye(10)))))
    passed = worst_alpha <= 1e-9 and worst_ortho <= 2e-10
    return CriterionResult(
        1, "eigenvalues within 1e-9 of multiprecision oracle (n<=25, four kappas); "
           "orthonormality within 2e-10 (n,m<=10)",
        passed,
        {"worst_alpha_gap": worst_alpha, "worst_orthonormality_dev": worst_ortho},
        time.time() - t0,
    )


def criterion_2(cache_dir=None, workers=1) -> CriterionResult:
    """Physical-parameter conversions reproduce the published table."""
    t0 = time.time()
    kappa_gaps = []
    rate_rel = []
    for k, kap_ref, rate_ref in zip(TABLE_STIFFNESS, TABLE_KAPPAS, TABLE_RATES_HZ):
        params = sol.TrapParams(k=k, zeta=2.02, L=10.0, r0=50.0, D=0.002)
        dd = sol.to_dimensionless(params)
        kappa_gaps.append(abs(dd["kappa"] - kap_ref))
        rate_rel.append(abs(1.0 / dd["tau"] - rate_ref) / rate_ref)
    passed = max(kappa_gaps) <= 0.001 + 1e-12 and max(rate_rel) <= 5e-4
    return CriterionResult(
        2, "table conversions: kappa within +-0.001, relaxation rates to 3 digits",
        passed,
        {"kappa_gaps": kappa_gaps, "rate_rel_err": rate_rel},
        time.time() - t0,
    )


def criterion_3(cache_dir=None, workers=1) -> CriterionResult:
    """Equilibrium displacement statistics at k = 1.01 fN/nm, T = 300 K."""
    t0 = time.time()
    params = sol.TrapParams(k=1.01, zeta=2.02, L=10.0, r0=100.0, temperature=300.0)
    stats = sol.equilibrium_stats(params)
    gaps = {
        "rms": abs(stats["rms"] - 111.0),
        "mean": abs(stats["mean"] - 102.0),
        "mode": abs(stats["mode"] - 91.0),
    }
    return CriterionResult(
        3, "equilibrium rms/mean/mode displacements within 1 nm of 111/102/91",
        max(gaps.values()) <= 1.0,
        {"stats_nm": stats, "gaps_nm": gaps},
        time.time() - t0,
    )


def _mc_combos():
    combos = [(0.012, z) for z in (2.0, 5.0, 10.0, 20.0)]
    combos += [(k, 5.0) for k in (0.003, 0.024, 0.049)]
    return combos


def criterion_4(cache_dir=None, workers=1) -> CriterionResult:
    """Monte Carlo vs 25-term series at desk scale (dt/tau = 1e-3, 1e5 each)."""
    t0 = time.time()
    grid = np.array([0.5, 1.0, 2.0, 4.0])
    gaps = {}
    for kappa, z0 in _mc_combos():
        system = _system(kappa, 25, cache_dir)
        params = mc.SimParams(kappa=kappa, z0=z0, dt_over_tau=1e-3,
                              horizon_over_tau=5.0, trajectories=100_000,
                              master_seed=12345)
        result = mc.simulate_fpt(params, workers=workers)
        emp = mc.empirical_survival(result, grid)
        with warnings.catch_warnings():
            warnings.simplefilter("ignore")
            theory = np.array([sol.survival(system, z0, t) for t in grid])
        gaps[f"kappa={kappa},z={z0}"] = float(np.max(np.abs(emp.values - theory)))
    worst = max(gaps.values())
    return CriterionResult(
        4, "max |S_emp - S_series(25)| <= 0.01 at t/tau in {0.5,1,2,4}, "
           "1e5 trajectories, dt/tau = 1e-3, horizon 5 tau",
        worst <= 0.01,
        {"max_gap": worst, "per_combo": gaps},
        time.time() - t0,
        note=KNOWN_SPEC_LIMITS[4],
    )


def criterion_5(cache_dir=None, workers=1) -> CriterionResult:
    """Long-time slope of ln S equals -2 alpha_1, independent of z."""
    t0 = time.time()
    tgrid = np.linspace(3.0, 6.0, 31)
    slope_rel = {}
    for kappa in TABLE_KAPPAS:
        system = _system(kappa, 25, cache_dir)
        curve = sol.survival_curve(system, 5.0, tgrid, clamp=False)
        slope = np.polyfit(tgrid, np.log(curve.values), 1)[0]
        target = -2.0 * system.modes[0].alpha
        slope_rel[f"kappa={kappa}"] = abs(slope - target) / abs(target)
    system = _system(0.012, 25, cache_dir)
    z_slopes = []
    for z in (2.0, 5.0, 10.0, 20.0):
        curve = sol.survival_curve(system, z, tgrid, clamp=False)
        z_slopes.append(np.polyfit(tgrid, np.log(curve.values), 1)[0])
    z_spread = (max(z_slopes) - min(z_slopes)) / abs(np.mean(z_slopes))
    passed = max(slope_rel.values()) <= 0.01 and z_spread <= 0.01
    return CriterionResult(
        5, "d ln S/dt over [3,6] tau equals -2 alpha_1 within 1% for four kappas "
           "and is z-independent within 1% at kappa = 0.012",
        passed,
        {"slope_rel_err": slope_rel, "z_slope_spread": z_spread},
        time.time() - t0,
    )


def criterion_6(cache_dir=None, workers=1) -> CriterionResult:
    """50-term density equals -dS/dt by central difference to 1e-6 relative."""
    t0 = time.time()
    system = _system(0.012, 50, cache_dir)
    worst = 0.0
    h = 2e-5  # small enough that the comparison's own h^2 error stays under 1e-6
    for t in np.linspace(0.05, 1.0, 20):
        dens = sol.fpt_density(system, 5.0, t)
        with warnings.catch_warnings():
            warnings.simplefilter("ignore")
            num = (sol.survival(system, 5.0, t - h) - sol.survival(system, 5.0, t + h)) / (2 * h)
        worst = max(worst, abs(dens - num) / abs(num))
    with warnings.catch_warnings(record=True) as caught:
        warnings.simplefilter("always")
        sol.fpt_density(system, 5.0, 0.02)
    flagged = any(issubclass(w.category, sol.EarlyTimeUnreliable) for w in caught)
    return CriterionResult(
        6, "density = -dS/dt (central difference) to 1e-6 relative on [0.05, 1] tau; "
           "flagged unreliable below 0.03 tau",
        worst <= 1e-6 and flagged,
        {"worst_rel_diff": worst, "early_flagged": flagged},
        time.time() - t0,
    )


def criterion_7(cache_dir=None, workers=1) -> CriterionResult:
    """25-term MFPT vs backward-equation integral; log-z growth at large z."""
    t0 = time.time()
    worst_gap = 0.0
    worst_at = None
    worst_resid = 0.0
    for kappa in (0.003, 0.006, 0.012, 0.049):
        system = _system(kappa, 25, cache_dir)
        zs = np.arange(2.0, 21.0)
        series = sol.mfpt_curve(system, zs).values
        integral = np.array([oracle.mfpt_integral(kappa, float(z)) for z in zs])
        rel = np.abs(series - integral) / integral
        j = int(np.argmax(rel))
        if rel[j] > worst_gap:
            worst_gap, worst_at = float(rel[j]), (kappa, float(zs[j]))
        # linearity of the true MFPT (oracle route): the series route would
        # only re-report the tail gap measured above
        zfit = np.linspace(10.0, 20.0, 21)
        mu = np.array([oracle.mfpt_integral(kappa, float(z)) for z in zfit])
        coef = np.polyfit(np.log(zfit), mu, 1)
        resid = np.max(np.abs(mu - np.polyval(coef, np.log(zfit))) / mu)
        worst_resid = max(worst_resid, float(resid))
    passed = worst_gap <= 0.01 and worst_resid <= 0.02
    return CriterionResult(
        7, "MFPT series vs double-integral oracle within 1% (z in 2..20, four "
           "kappas); log-z linearity residuals <= 2% on z in [10, 20]",
        passed,
        {"worst_rel_gap": worst_gap, "worst_gap_at": worst_at,
         "worst_logfit_resid": worst_resid},
        time.time() - t0,
        note=KNOWN_SPEC_LIMITS[7],
    )


def criterion_8(cache_dir=None, workers=1) -> CriterionResult:
    """Escape-probability limit: amplitude gap shrinks as kappa -> 0."""
    t0 = time.time()
    zs = np.linspace(2.0, 20.0, 37)
    gaps = []
    for kappa in (0.012, 0.003, 0.0012, 0.00012):
        system = _system(kappa, 1, cache_dir)
        amp = sol.escape_amplitude(system, zs)
        gaps.append(float(np.max(np.abs(amp - (1.0 - 1.0 / zs)))))
    decreasing = all(g2 < g1 for g1, g2 in zip(gaps, gaps[1:]))
    return CriterionResult(
        8, "max_z |c1 psi1(z) - (1 - 1/z)| strictly decreases along "
           "kappa = 0.012 -> 0.003 -> 0.0012 -> 0.00012",
        decreasing,
        {"gaps": gaps},
        time.time() - t0,
    )


def criterion_9(cache_dir=None, workers=1) -> CriterionResult:
    """Direct PDE solve agrees with the series solution."""
    t0 = time.time()
    system = _system(0.012, 25, cache_dir)
    times = [0.5, 1.0, 2.0]
    pde = oracle.pde_survival_curve(0.012, 5.0, times)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        series = np.array([sol.survival(system, 5.0, t) for t in times])
    worst = float(np.max(np.abs(pde - series)))
    return CriterionResult(
        9, "|pde_survival - series S| <= 5e-3 at kappa = 0.012, z = 5, "
           "t/tau in {0.5, 1, 2}",
        worst <= 5e-3,
        {"worst_abs_gap": worst, "pde": pde.tolist(), "series": series.tolist()},
        time.time() - t0,
    )


def criterion_10(cache_dir=None, workers=1) -> CriterionResult:
    """Completeness: 50-term expansion of 1 within 0.01 on z in [1.5, 20]."""
    t0 = time.time()
    zs = np.linspace(1.5, 20.0, 41)
    worst = {}
    for kappa in TABLE_KAPPAS:
        system = _system(kappa, 50, cache_dir)
        psi = spectral.psi_matrix(system, zs)
        total = system.amps() @ psi
        worst[f"kappa={kappa}"] = float(np.max(np.abs(total - 1.0)))
    worst_all = max(worst.values())
    return CriterionResult(
        10, "|sum_{n<=50} c_n psi_n(z) - 1| <= 0.01 for z in [1.5, 20], "
            "kappa in the table range",
        worst_all <= 0.01,
        {"worst_abs_err": worst_all, "per_kappa": worst},
        time.time() - t0,
        note=KNOWN_SPEC_LIMITS[10],
    )


CRITERIA = {
    1: criterion_1,
    2: criterion_2,
    3: criterion_3,
    4: criterion_4,
    5: criterion_5,
    6: criterion_6,
    7: criterion_7,
    8: criterion_8,
    9: criterion_9,
    10: criterion_10,
}


def run_criteria(ids=None, cache_dir=None, workers=1) -> list:
    ids = sorted(CRITERIA) if ids is None else sorted(ids)
    unknown = [i for i in ids if i not in CRITERIA]
    if unknown:
        raise ValueError(f"unknown criteria {unknown}; valid ids are 1..10")
    return [CRITERIA[i](cache_dir=cache_dir, workers=workers) for i in ids]


def format_result(res: CriterionResult) -> str:
    status = "PASS" if res.passed else "FAIL"
    line = f"criterion {res.cid:>2}: {status} ({res.seconds:.1f}s) - {res.description}"
    if not res.passed and res.note:
        line += f" [known limit: {res.note}]"
    return line
