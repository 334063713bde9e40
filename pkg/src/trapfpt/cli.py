"""Command-line front end; a thin client of the HTTP service.

Without --server the service app is mounted in-process (same code path as a
remote instance); with --server URL requests go over the network.  The CLI
only parses flags, issues requests, and writes CSV/JSON files: all
computation happens behind the service interface.

Exit codes: 0 ok, 2 usage/validation, 3 numeric failure, 4 verification or
comparison failure.
"""

from __future__ import annotations

import argparse
import json
import sys

import httpx

from . import __version__

CSV_FMT = "{:.12g}"


class CliError(Exception):
    def __init__(self, code: int, message: str):
        super().__init__(message)
        self.code = code


def _client(args) -> httpx.Client:
    if args.server:
        return httpx.Client(base_url=args.server, timeout=None)
    import warnings

    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        from fastapi.testclient import TestClient

    from .service import create_app

    return TestClient(create_app(cache_dir=args.cache_dir, workers=args.workers))


def _post(client: httpx.Client, path: str, payload: dict) -> dict:
    resp = client.post(path, json=payload)
    if resp.status_code in (400, 422):
        try:
            detail = resp.json()["detail"]
        except Exception:
            detail = resp.text
        raise CliError(2, f"invalid request: {detail}")
    if resp.status_code >= 500:
        try:
            detail = resp.json()["detail"]
        except Exception:
            detail = resp.text
        raise CliError(3, f"numeric failure: {detail}")
    resp.raise_for_status()
    return resp.json()


def _floats(text: str) -> list:
    try:
        return [float(tok) for tok in text.split(",") if tok.strip() != ""]
    except ValueError as exc:
        raise CliError(2, f"could not parse float list {text!r}") from exc


def _zgrid(text: str, points: int) -> list:
    """Either 'a..b' (uniform grid with `points` samples) or 'z1,z2,...'."""
    if ".." in text:
        lo_s, hi_s = text.split("..", 1)
        try:
            lo, hi = float(lo_s), float(hi_s)
        except ValueError as exc:
            raise CliError(2, f"could not parse range {text!r}") from exc
        if hi <= lo:
            raise CliError(2, "range upper bound must exceed lower bound")
        step = (hi - lo) / (points - 1)
        return [lo + i * step for i in range(points)]
    return _floats(text)


def _write_csv(path: str, header: list, columns: list) -> None:
    n = len(columns[0])
    with open(path, "w", newline="\n") as fh:
        fh.write(",".join(header) + "\n")
        for i in range(n):
            fh.write(",".join(CSV_FMT.format(col[i]) for col in columns) + "\n")


def _curve_columns(curves: list, value_prefix: str):
    """Shared-abscissa curves to CSV columns named by kappa and z."""
    abscissa = curves[0]["abscissa"]
    header = ["t_over_tau"]
    cols = [abscissa]
    for c in curves:
        if c["abscissa"] != abscissa:
            raise CliError(3, "service returned curves on mismatched grids")
        meta = c["meta"]
        name = f"{value_prefix}_kappa{meta['kappa']:g}"
        if "z" in meta:
            name += f"_z{meta['z']:g}"
        header.append(name)
        cols.append(c["values"])
    return header, cols


def cmd_eigen(args, client) -> int:
    if args.kappa <= 0:
        raise CliError(2, "kappa = 0 is the potential-free case, where the "
                          "eigenfunction series is inapplicable; kappa must be positive")
    doc = _post(client, "/eigen", {
        "kappa": args.kappa, "count": args.count,
        "root_tol": args.root_tol, "quad_tol": args.quad_tol,
    })
    out = args.out or f"eigen_kappa{args.kappa:g}_n{args.count}.{args.format}"
    if args.format == "json":
        with open(out, "w", newline="\n") as fh:
            json.dump(doc, fh, indent=1)
            fh.write("\n")
    else:
        header = ["n", "alpha_n", "lambda_n_tau", "N_n", "c_n"]
        modes = doc["modes"]
        cols = [
            [m["n"] for m in modes],
            [m["alpha"] for m in modes],
            [m["lambda_tau"] for m in modes],
            [m["norm"] for m in modes],
            [m["amp"] for m in modes],
        ]
        _write_csv(out, header, cols)
    print(f"wrote {out} ({doc['count']} modes, kappa={doc['kappa']:g})")
    return 0


def cmd_survival(args, client) -> int:
    doc = _post(client, "/survival", {
        "kappas": _floats(args.kappa), "zs": _floats(args.z),
        "t_min": args.tmin, "t_max": args.tmax, "points": args.points,
        "terms": args.terms, "clamp": not args.no_clamp,
    })
    header, cols = _curve_columns(doc["curves"], "S")
    out = args.out or "survival.csv"
    _write_csv(out, header, cols)
    print(f"wrote {out} ({len(doc['curves'])} curves)")
    return 0


def cmd_fpt(args, client) -> int:
    doc = _post(client, "/fpt", {
        "kappas": _floats(args.kappa), "zs": _floats(args.z),
        "t_min": args.tmin, "t_max": args.tmax, "points": args.points,
        "terms": args.terms,
    })
    curves = doc["curves"]
    header, cols = _curve_columns(curves, "P")
    unreliable = curves[0]["meta"]["unreliable"]
    if args.include_early:
        header.append("early_unreliable")
        cols.append([1.0 if u else 0.0 for u in unreliable])
    else:
        keep = [i for i, u in enumerate(unreliable) if not u]
        cols = [[col[i] for i in keep] for col in cols]
    out = args.out or "fpt.csv"
    _write_csv(out, header, cols)
    dropped = sum(1 for u in unreliable if u) if not args.include_early else 0
    print(f"wrote {out} ({len(curves)} curves; {dropped} early-time rows suppressed)")
    return 0


def cmd_mfpt(args, client) -> int:
    zs = _zgrid(args.z, args.z_points)
    doc = _post(client, "/mfpt", {
        "kappas": _floats(args.kappa), "z_min": zs[0], "z_max": zs[-1],
        "points": len(zs), "terms": args.terms,
    })
    curves = doc["curves"]
    header = ["z"] + [f"mfpt_over_tau_kappa{c['meta']['kappa']:g}" for c in curves]
    cols = [curves[0]["abscissa"]] + [c["values"] for c in curves]
    out = args.out or "mfpt.csv"
    _write_csv(out, header, cols)
    print(f"wrote {out} ({len(curves)} curves)")
    return 0


def cmd_simulate(args, client) -> int:
    payload = {
        "kappa": args.kappa, "z0": args.z, "dt_over_tau": args.dt,
        "horizon_over_tau": args.horizon, "trajectories": args.n,
        "master_seed": args.seed, "compare": args.compare,
        "terms": args.terms, "tolerance": args.tolerance,
        "include_samples": args.dump_samples is not None,
        "workers": args.workers,
    }
    if args.grid:
        payload["grid"] = _floats(args.grid)
    doc = _post(client, "/simulate", payload)
    emp = doc["empirical"]
    header = ["t_over_tau", "S_emp", "std_err"]
    cols = [emp["abscissa"], emp["values"], emp["stderr"]]
    if doc["theory"] is not None:
        gaps = [abs(e - t) for e, t in zip(emp["values"], doc["theory"]["values"])]
        header += ["S_theory", "abs_gap"]
        cols += [doc["theory"]["values"], gaps]
    out = args.out or "simulate.csv"
    _write_csv(out, header, cols)
    report = {
        "kappa": args.kappa, "z0": args.z, "dt_over_tau": args.dt,
        "horizon_over_tau": args.horizon, "trajectories": args.n,
        "master_seed": args.seed, "censored_count": doc["censored_count"],
        "max_abs_gap": doc["max_abs_gap"], "tolerance": doc["tolerance"],
        "comparison_passed": doc["comparison_passed"],
    }
    report_path = args.report or "simulate_report.json"
    with open(report_path, "w", newline="\n") as fh:
        json.dump(report, fh, indent=1)
        fh.write("\n")
    if args.dump_samples:
        with open(args.dump_samples, "w", newline="\n") as fh:
            fh.write("trajectory_index,captured,t_over_tau\n")
            for idx, cap, t in doc["samples"]:
                fh.write(f"{int(idx)},{int(cap)},{CSV_FMT.format(t)}\n")
    print(f"wrote {out} and {report_path}")
    if args.compare:
        print(f"max |S_emp - S_theory| = {doc['max_abs_gap']:.6g} "
              f"(tolerance {args.tolerance:g})")
        if not doc["comparison_passed"]:
            print("comparison FAILED", file=sys.stderr)
            return 4
    return 0


def cmd_escape(args, client) -> int:
    zs = _zgrid(args.z, args.z_points)
    doc = _post(client, "/escape", {
        "kappas": _floats(args.kappas), "z_min": zs[0], "z_max": zs[-1],
        "points": len(zs),
    })
    header = ["z", "escape_probability"]
    cols = [doc["z"], doc["escape_probability"]]
    for amp in doc["amplitudes"]:
        header.append(f"amp_kappa{amp['kappa']:g}")
        cols.append(amp["values"])
    out = args.out or "escape.csv"
    _write_csv(out, header, cols)
    print(f"wrote {out}")
    return 0


def cmd_verify(args, client) -> int:
    payload = {"workers": args.workers}
    if args.criteria:
        payload["criteria"] = [int(tok) for tok in args.criteria.split(",")]
    doc = _post(client, "/verify", payload)
    for res in doc["results"]:
        status = "PASS" if res["passed"] else "FAIL"
        line = f"criterion {res['cid']:>2}: {status} ({res['seconds']:.1f}s) - {res['description']}"
        if not res["passed"] and res["note"]:
            line += f" [known limit: {res['note']}]"
        print(line)
    if args.report:
        with open(args.report, "w", newline="\n") as fh:
            json.dump(doc, fh, indent=1)
            fh.write("\n")
        print(f"wrote {args.report}")
    return 0 if doc["all_passed"] else 4


def cmd_serve(args, client) -> int:
    import uvicorn

    from .service import create_app

    uvicorn.run(create_app(cache_dir=args.cache_dir, workers=args.workers),
                host=args.host, port=args.port)
    return 0


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(
        prog="trapfpt",
        description="First-passage statistics of a trapped diffusing particle: "
                    "eigenfunction series, Monte Carlo validation, figure data.",
    )
    p.add_argument("--version", action="version", version=__version__)
    p.add_argument("--server", default=None,
                   help="base URL of a running service (default: in-process)")
    p.add_argument("--cache-dir", default=None,
                   help="eigen-system cache directory (default: $TRAPFPT_CACHE_DIR "
                        "or ~/.cache/trapfpt)")
    p.add_argument("--workers", type=int, default=1, help="worker processes for simulation")
    sub = p.add_subparsers(dest="command", required=True)

    sp = sub.add_parser("eigen", help="eigenvalue/normalization/amplitude table")
    sp.add_argument("--kappa", type=float, required=True)
    sp.add_argument("--count", type=int, default=25)
    sp.add_argument("--root-tol", type=float, default=1e-10)
    sp.add_argument("--quad-tol", type=float, default=1e-10)
    sp.add_argument("--format", choices=("json", "csv"), default="json")
    sp.add_argument("--out", default=None)
    sp.set_defaults(fn=cmd_eigen)

    sp = sub.add_parser("survival", help="survival probability curves S(t/tau | z)")
    sp.add_argument("--kappa", required=True, help="comma-separated kappa list")
    sp.add_argument("--z", required=True, help="comma-separated z list")
    sp.add_argument("--tmin", type=float, default=0.0)
    sp.add_argument("--tmax", type=float, default=6.0)
    sp.add_argument("--points", type=int, default=121)
    sp.add_argument("--terms", type=int, default=25)
    sp.add_argument("--no-clamp", action="store_true",
                    help="emit raw series values (may leave [0,1])")
    sp.add_argument("--out", default=None)
    sp.set_defaults(fn=cmd_survival)

    sp = sub.add_parser("fpt", help="first-passage time density curves")
    sp.add_argument("--kappa", required=True)
    sp.add_argument("--z", required=True)
    sp.add_argument("--tmin", type=float, default=0.0)
    sp.add_argument("--tmax", type=float, default=1.0)
    sp.add_argument("--points", type=int, default=97)
    sp.add_argument("--terms", type=int, default=50)
    sp.add_argument("--include-early", action="store_true",
                    help="keep (flagged) rows below 0.03 tau instead of dropping them")
    sp.add_argument("--out", default=None)
    sp.set_defaults(fn=cmd_fpt)

    sp = sub.add_parser("mfpt", help="mean first-passage time vs initial radius")
    sp.add_argument("--kappa", required=True)
    sp.add_argument("--z", default="1..20", help="'a..b' range or comma list")
    sp.add_argument("--z-points", type=int, default=77)
    sp.add_argument("--terms", type=int, default=25)
    sp.add_argument("--out", default=None)
    sp.set_defaults(fn=cmd_mfpt)

    sp = sub.add_parser("simulate", help="Monte Carlo FPT run with empirical survival")
    sp.add_argument("--kappa", type=float, required=True)
    sp.add_argument("--z", type=float, required=True)
    sp.add_argument("--dt", type=float, default=1e-3)
    sp.add_argument("--horizon", type=float, default=5.0)
    sp.add_argument("--n", type=int, required=True)
    sp.add_argument("--seed", type=int, default=0)
    sp.add_argument("--grid", default=None, help="comma list of t/tau sample points")
    sp.add_argument("--compare", action="store_true",
                    help="also emit the series curve and max-gap report")
    sp.add_argument("--terms", type=int, default=25)
    sp.add_argument("--tolerance", type=float, default=0.01)
    sp.add_argument("--dump-samples", default=None,
                    help="write per-trajectory CSV (index, captured, t_over_tau)")
    sp.add_argument("--out", default=None)
    sp.add_argument("--report", default=None)
    sp.set_defaults(fn=cmd_simulate)

    sp = sub.add_parser("escape", help="escape-probability limit data (small kappa)")
    sp.add_argument("--kappas", required=True, help="comma list, each <= 0.012")
    sp.add_argument("--z", default="1..20")
    sp.add_argument("--z-points", type=int, default=39)
    sp.add_argument("--out", default=None)
    sp.set_defaults(fn=cmd_escape)

    sp = sub.add_parser("verify", help="run the acceptance criteria")
    sp.add_argument("--criteria", default=None, help="comma list like 1,2,5 (default all)")
    sp.add_argument("--report", default=None, help="write JSON report here")
    sp.set_defaults(fn=cmd_verify)

    sp = sub.add_parser("serve", help="run the HTTP service")
    sp.add_argument("--host", default="127.0.0.1")
    sp.add_argument("--port", type=int, default=8000)
    sp.set_defaults(fn=cmd_serve)

    return p


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        if args.fn is cmd_serve:
            return args.fn(args, None)
        with _client(args) as client:
            return args.fn(args, client)
    except CliError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return exc.code
    except httpx.HTTPError as exc:
        print(f"error: transport failure: {exc}", file=sys.stderr)
        return 3
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except ArithmeticError as exc:
        print(f"error: numeric failure: {exc}", file=sys.stderr)
        return 3


if __name__ == "__main__":
    sys.exit(main())
