"""``gridplan`` command line."""

from __future__ import annotations

import argparse
import logging
import sys
from pathlib import Path

log = logging.getLogger("gridplan")


def _cmd_cluster(args) -> int:
    from .repdays import duration_curve_error, read_profiles_csv, represent, write_errors_csv, write_repdays_csv

    profiles = read_profiles_csv(args.inp)
    rep = represent(profiles, k=args.k, linkage=args.linkage)
    write_repdays_csv(rep, args.out)
    if args.errors:
        write_errors_csv(duration_curve_error(profiles, rep), args.errors)
    print(f"{rep.k} representative days from {rep.n_days} days -> {args.out}")
    return 0


def _cmd_resource(args) -> int:
    from .repdays import read_profiles_csv
    from .vre import (build_regional_resources, read_land_csv, read_raster_csv, sample_raster,
                      summarize_potentials, write_inventory_csv, write_series_csv)

    grid = read_land_csv(args.land)
    raster = read_raster_csv(args.raster)
    sample = sample_raster(grid, raster, args.points, args.seed)
    wind = solar = None
    if args.profiles:
        by_id = {p.series_id: p.values for p in read_profiles_csv(args.profiles)}
        wind = {r: by_id[f"{r}_wind_cf"] for r in grid.regions if f"{r}_wind_cf" in by_id}
        solar = {r: by_id[f"{r}_solar_cf"] for r in grid.regions if f"{r}_solar_cf" in by_id}
    resources = build_regional_resources(grid, sample, wind_hourly=wind, solar_hourly=solar)
    write_inventory_csv(resources, args.out)
    if args.series and wind:
        write_series_csv(resources, args.series)
    inv = summarize_potentials(resources)
    print(inv.to_frame("GW").round(2).to_string(index=False))
    print(f"inventory -> {args.out}")
    return 0


def _load_lp(path):
    from .lpsolve import LinearProgram, read_interchange

    path = Path(path)
    return read_interchange(path) if path.suffix.lower() == ".mps" else LinearProgram.load(path)


def _cmd_solve(args) -> int:
    from .lpsolve import SimplexOptions, SolveOptions, check_solution, solve, write_solution_csv

    lp = _load_lp(args.lp)
    opts = SolveOptions(method=args.method, simplex=SimplexOptions(max_iterations=args.max_iterations))
    sol = solve(lp, opts)
    write_solution_csv(lp, sol, args.out)
    print(f"status {sol.status.value}, objective {sol.objective:.12g}, {sol.iterations} iterations "
          f"({sol.method}, {sol.wall_time:.2f} s) -> {args.out}")
    if sol.optimal:
        rep = check_solution(lp, sol)
        print(f"max row violation {rep.max_row_violation:.3g}, bound violation {rep.max_bound_violation:.3g}")
    return 0 if sol.optimal else 2


def _cmd_export(args) -> int:
    from .esom import write_model_dump
    from .lpsolve import write_interchange

    if args.lp:
        lp = _load_lp(args.lp)
    elif args.config:
        from .runner import apply_scenario, build, load_config, load_inputs

        cfg = load_config(args.config)
        lp = build(apply_scenario(load_inputs(cfg), cfg)).lp
    else:
        raise SystemExit("export needs --lp or --config")
    out = Path(args.out) if args.out else Path(f"model.{ {'mps': 'mps', 'bin': 'bin', 'dump': 'txt'}[args.format] }")
    if args.format == "mps":
        write_interchange(lp, out)
    elif args.format == "bin":
        lp.save(out)
    else:
        write_model_dump(lp, out)
    print(f"{lp.n_rows} rows, {lp.n_cols} columns, {lp.A.nnz} nonzeros -> {out}")
    return 0


def _cmd_run(args) -> int:
    import dataclasses

    from .runner import RunError, load_config, run

    cfg = load_config(args.config)
    if args.out:
        cfg = dataclasses.replace(cfg, output=Path(args.out))
    try:
        res = run(cfg)
    except RunError as exc:
        print(f"run failed: {exc}", file=sys.stderr)
        if exc.report.get("irreducible"):
            print("irreducible constraint groups: " + ", ".join(exc.report["irreducible"]), file=sys.stderr)
        return 2
    if args.save_lp:
        res.model.lp.save(args.save_lp)
    print(f"{cfg.run_id}: objective {res.objective:.12g} -> {cfg.output}")
    return 0


def _resolve_run(name: str, runs_dir: str) -> Path:
    p = Path(name)
    if (p / "manifest.json").exists():
        return p
    q = Path(runs_dir) / name
    if (q / "manifest.json").exists():
        return q
    raise SystemExit(f"no run directory found for {name!r}")


def _emit(df, out) -> None:
    from .runner import write_table

    if out:
        write_table(df, out)
        print(f"-> {out}")
    else:
        print(df.to_csv(index=False, float_format="%.6g"), end="")


def _cmd_report(args) -> int:
    from .runner import report_capacity_diff, report_emissions, report_storage_envelope

    if args.report == "diff":
        df = report_capacity_diff(_resolve_run(args.a, args.runs_dir), _resolve_run(args.b, args.runs_dir))
    elif args.report == "emissions":
        df = report_emissions([_resolve_run(r, args.runs_dir) for r in args.runs])
    else:
        df = report_storage_envelope(_resolve_run(args.run, args.runs_dir), by_reservoir=args.by_reservoir)
    _emit(df, args.out)
    return 0


def _cmd_synth(args) -> int:
    from .runner import SCENARIOS, TRADE_VARIANTS
    from .synthetic import write_dataset

    out = Path(args.out)
    files = write_dataset(out / "data", preset=args.preset, seed=args.seed)
    for name in SCENARIOS:
        for trade in TRADE_VARIANTS:
            text = (f"[scenario]\nname = {name}\ntrade_cost = {trade}\n\n[inputs]\ndir = data\n\n"
                    f"[model]\nrep_days = {args.rep_days}\nseed = 42\n\n[solver]\nmethod = auto\n\n"
                    f"[output]\ndir = runs/{name.lower()}_{trade}\n")
            (out / f"{name.lower()}_{trade}.cfg").write_text(text, encoding="utf-8")
    print(f"dataset ({len(files)} files) and 6 scenario configs -> {out}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="gridplan", description=__doc__)
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)

    c = sub.add_parser("cluster", help="pick representative days from hourly profiles")
    c.add_argument("--k", type=int, default=15)
    c.add_argument("--in", dest="inp", required=True, help="hourly profiles CSV")
    c.add_argument("--out", required=True)
    c.add_argument("--errors", help="optional duration-curve error CSV")
    c.add_argument("--linkage", choices=("ward", "centroid"), default="ward")
    c.set_defaults(func=_cmd_cluster)

    r = sub.add_parser("resource", help="wind/solar potentials per CF bin from land and a CF raster")
    r.add_argument("--land", required=True)
    r.add_argument("--raster", required=True)
    r.add_argument("--points", type=int, default=10_000, help="sample points per cell")
    r.add_argument("--seed", type=int, default=42)
    r.add_argument("--out", default="inventory.csv")
    r.add_argument("--profiles", help="hourly profiles CSV, to write bin-scaled wind series")
    r.add_argument("--series", help="output CSV for scaled hourly series")
    r.set_defaults(func=_cmd_resource)

    s = sub.add_parser("solve", help="solve a saved LP")
    s.add_argument("--lp", required=True, help="model file (.bin from export, or .mps)")
    s.add_argument("--out", required=True)
    s.add_argument("--method", choices=("auto", "simplex", "highs"), default="auto")
    s.add_argument("--max-iterations", type=int, default=50_000)
    s.set_defaults(func=_cmd_solve)

    e = sub.add_parser("export", help="write an LP as MPS, binary or readable dump")
    e.add_argument("--format", choices=("mps", "bin", "dump"), default="mps")
    e.add_argument("--lp", help="existing model file")
    e.add_argument("--config", help="scenario config to build the LP from")
    e.add_argument("--out")
    e.set_defaults(func=_cmd_export)

    u = sub.add_parser("run", help="run one scenario config")
    u.add_argument("--config", required=True)
    u.add_argument("--out", help="override the output directory")
    u.add_argument("--save-lp", help="also save the assembled LP (binary)")
    u.set_defaults(func=_cmd_run)

    rep = sub.add_parser("report", help="post-process run directories")
    rsub = rep.add_subparsers(dest="report", required=True)
    d = rsub.add_parser("diff", help="cumulative capacity a - b in GW")
    d.add_argument("--a", required=True)
    d.add_argument("--b", required=True)
    em = rsub.add_parser("emissions", help="annual MtCO2 per scenario")
    em.add_argument("--runs", nargs="+", required=True)
    st = rsub.add_parser("storage", help="per-timeslice reservoir envelope across years")
    st.add_argument("--run", required=True)
    st.add_argument("--by-reservoir", action="store_true")
    for q in (d, em, st):
        q.add_argument("--runs-dir", default="runs")
        q.add_argument("--out")
    rep.set_defaults(func=_cmd_report)

    y = sub.add_parser("synth", help="write a synthetic dataset and scenario configs")
    y.add_argument("--out", default="demo")
    y.add_argument("--preset", choices=("basin", "desk"), default="basin")
    y.add_argument("--rep-days", type=int, default=15)
    y.add_argument("--seed", type=int, default=7)
    y.set_defaults(func=_cmd_synth)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    from .lpsolve import LPError
    from .runner import ConfigError

    try:
        return args.func(args)
    except (ConfigError, LPError, ValueError, FileNotFoundError) as exc:
        print(f"gridplan {args.command}: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
