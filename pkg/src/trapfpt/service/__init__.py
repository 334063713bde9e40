"""HTTP service wrapping the solver: eigen tables, curves, simulation, and
the verification suite.  The CLI is a thin client of these endpoints; a
long-running instance keeps the eigen-system cache warm across requests.
"""

from __future__ import annotations

import numpy as np
from fastapi import FastAPI, HTTPException

from .. import __version__
from .. import montecarlo as mc
from .. import solution as sol
from .. import spectral, verification
from .schemas import (
    ConvertRequest,
    ConvertResponse,
    CriterionModel,
    CurveModel,
    CurvesResponse,
    EigenModeModel,
    EigenRequest,
    EigenResponse,
    EscapeRequest,
    EscapeResponse,
    FptRequest,
    HealthResponse,
    MfptRequest,
    SimulateRequest,
    SimulateResponse,
    SurvivalRequest,
    VerifyRequest,
    VerifyResponse,
)

KAPPA_ZERO_MESSAGE = (
    "kappa = 0 is the potential-free case: every decay rate vanishes and the "
    "eigenfunction series is inapplicable; kappa must be positive"
)


def _require_kappa(kappa: float) -> None:
    if kappa <= 0:
        raise HTTPException(status_code=400, detail=KAPPA_ZERO_MESSAGE)


def _curve_model(curve: sol.Curve) -> CurveModel:
    return CurveModel(
        abscissa=curve.abscissa.tolist(),
        values=curve.values.tolist(),
        stderr=None if curve.stderr is None else curve.stderr.tolist(),
        meta=curve.meta,
    )


def create_app(cache_dir=None, workers: int = 1) -> FastAPI:
    app = FastAPI(title="trapfpt", version=__version__)
    app.state.cache_dir = cache_dir
    app.state.workers = workers

    def build(kappa, count, root_tol=1e-10, quad_tol=1e-10):
        _require_kappa(kappa)
        try:
            return spectral.build_eigensystem(
                kappa, count, root_tol=root_tol, quad_tol=quad_tol,
                cache_dir=app.state.cache_dir,
            )
        except ValueError as exc:
            raise HTTPException(status_code=400, detail=str(exc)) from exc
        except ArithmeticError as exc:
            raise HTTPException(status_code=500, detail=f"numeric failure: {exc}") from exc

    @app.get("/health", response_model=HealthResponse)
    def health():
        return HealthResponse(status="ok", version=__version__)

    @app.post("/eigen", response_model=EigenResponse)
    def eigen(req: EigenRequest):
        system = build(req.kappa, req.count, req.root_tol, req.quad_tol)
        return EigenResponse(
            kappa=system.kappa,
            count=system.count,
            root_tol=system.root_tol,
            quad_tol=system.quad_tol,
            z_max=system.z_max,
            modes=[
                EigenModeModel(n=m.n, alpha=m.alpha, lambda_tau=m.lambda_tau,
                               norm=m.norm, amp=m.amp)
                for m in system.modes
            ],
        )

    @app.post("/survival", response_model=CurvesResponse)
    def survival(req: SurvivalRequest):
        if req.t_max <= req.t_min:
            raise HTTPException(status_code=400, detail="t_max must exceed t_min")
        grid = np.linspace(req.t_min, req.t_max, req.points)
        curves = []
        for kappa in req.kappas:
            system = build(kappa, req.terms)
            for z in req.zs:
                try:
                    curves.append(_curve_model(
                        sol.survival_curve(system, z, grid, clamp=req.clamp)))
                except ValueError as exc:
                    raise HTTPException(status_code=400, detail=str(exc)) from exc
        return CurvesResponse(curves=curves)

    @app.post("/fpt", response_model=CurvesResponse)
    def fpt(req: FptRequest):
        if req.t_max <= req.t_min:
            raise HTTPException(status_code=400, detail="t_max must exceed t_min")
        grid = np.linspace(req.t_min, req.t_max, req.points)
        curves = []
        for kappa in req.kappas:
            system = build(kappa, req.terms)
            for z in req.zs:
                try:
                    curves.append(_curve_model(sol.fpt_curve(system, z, grid)))
                except ValueError as exc:
                    raise HTTPException(status_code=400, detail=str(exc)) from exc
        return CurvesResponse(curves=curves)

    @app.post("/mfpt", response_model=CurvesResponse)
    def mfpt(req: MfptRequest):
        if req.z_max <= req.z_min:
            raise HTTPException(status_code=400, detail="z_max must exceed z_min")
        grid = np.linspace(req.z_min, req.z_max, req.points)
        curves = []
        for kappa in req.kappas:
            system = build(kappa, req.terms)
            curves.append(_curve_model(sol.mfpt_curve(system, grid)))
        return CurvesResponse(curves=curves)

    @app.post("/simulate", response_model=SimulateResponse)
    def simulate(req: SimulateRequest):
        _require_kappa(req.kappa)
        try:
            params = mc.SimParams(
                kappa=req.kappa, z0=req.z0, dt_over_tau=req.dt_over_tau,
                horizon_over_tau=req.horizon_over_tau,
                trajectories=req.trajectories, master_seed=req.master_seed,
            )
        except ValueError as exc:
            raise HTTPException(status_code=400, detail=str(exc)) from exc
        result = mc.simulate_fpt(params, workers=max(req.workers, app.state.workers))
        if req.grid is not None:
            grid = np.asarray(sorted(req.grid), dtype=float)
        else:
            start = min(0.2, req.horizon_over_tau / 2.0)
            grid = np.linspace(start, req.horizon_over_tau, 25)
        try:
            emp = mc.empirical_survival(result, grid)
        except mc.GridBeyondHorizon as exc:
            raise HTTPException(status_code=400, detail=str(exc)) from exc
        theory_model = None
        max_gap = None
        passed = None
        if req.compare:
            system = build(req.kappa, req.terms)
            theory = sol.survival_curve(system, req.z0, grid)
            theory_model = _curve_model(theory)
            mask = grid >= req.compare_from
            max_gap = float(np.max(np.abs(emp.values[mask] - theory.values[mask])))
            passed = max_gap <= req.tolerance
        samples = None
        if req.include_samples:
            horizon = params.horizon_over_tau
            samples = [
                [float(i), 0.0 if np.isnan(t) else 1.0,
                 horizon if np.isnan(t) else float(t)]
                for i, t in enumerate(result.trajectory_times)
            ]
        return SimulateResponse(
            empirical=_curve_model(emp),
            theory=theory_model,
            max_abs_gap=max_gap,
            tolerance=req.tolerance if req.compare else None,
            comparison_passed=passed,
            censored_count=result.censored_count,
            samples=samples,
        )

    @app.post("/escape", response_model=EscapeResponse)
    def escape(req: EscapeRequest):
        if req.z_max <= req.z_min:
            raise HTTPException(status_code=400, detail="z_max must exceed z_min")
        for kappa in req.kappas:
            _require_kappa(kappa)
            if kappa > 0.012:
                raise HTTPException(
                    status_code=400,
                    detail="escape-limit comparison expects small kappa (<= 0.012)",
                )
        grid = np.linspace(req.z_min, req.z_max, req.points)
        amps = []
        for kappa in req.kappas:
            system = build(kappa, 1)
            amps.append({"kappa": kappa,
                         "values": np.asarray(sol.escape_amplitude(system, grid)).tolist()})
        return EscapeResponse(
            z=grid.tolist(),
            escape_probability=(1.0 - 1.0 / grid).tolist(),
            amplitudes=amps,
        )

    @app.post("/convert", response_model=ConvertResponse)
    def convert(req: ConvertRequest):
        try:
            params = sol.TrapParams(k=req.k, zeta=req.zeta, L=req.L, r0=req.r0,
                                    D=req.D, temperature=req.temperature)
        except sol.InvalidParams as exc:
            raise HTTPException(status_code=400, detail=str(exc)) from exc
        dd = sol.to_dimensionless(params)
        return ConvertResponse(
            kappa=dd["kappa"], z=dd["z"], tau_seconds=dd["tau"],
            relaxation_rate_hz=1.0 / dd["tau"],
            D=params.D, temperature=params.temperature,
            equilibrium=sol.equilibrium_stats(params),
        )

    @app.post("/verify", response_model=VerifyResponse)
    def verify(req: VerifyRequest):
        try:
            results = verification.run_criteria(
                req.criteria, cache_dir=app.state.cache_dir,
                workers=max(req.workers, app.state.workers),
            )
        except ValueError as exc:
            raise HTTPException(status_code=400, detail=str(exc)) from exc
        models = [
            CriterionModel(cid=r.cid, description=r.description, passed=r.passed,
                           details=r.details, seconds=r.seconds, note=r.note)
            for r in results
        ]
        return VerifyResponse(results=models, all_passed=all(r.passed for r in results))

    return app


app = create_app()
