"""Command line: ``prandtl-lab <subcommand> [--config FILE] [--set section.key=value ...]``.

Exit codes: 0 success, 1 invalid input, 2 the method left its validity
regime (monotonicity, CFL or Picard gate).
"""

from __future__ import annotations

import argparse
import csv
import json
import math
import sys
import time
import warnings
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path

import numpy as np

from . import __version__
from .config import RunConfig, parse_config, parse_config_text, with_overrides, write_manifest
from .errors import NumericalGateError, ValidationError
from .experiments import (COMMUTATOR_GRID, MOLLIFIER_GRID, commutator_corpus, commutator_laws, mollifier_corpus,
                          mollifier_laws, variation)
from .grid import Field, GridSpec, read_field_csv, write_field_csv
from .linearized import energy_probe, shear_background, solve_w
from .manufactured import w_solution
from .nash_moser import run, sine_gauss, stability_experiment
from .norms import lambda_30, norm_A, norm_C, norm_D, norm_Linf, norm_report
from .oracle import solve_nonlinear
from .shear import (ShearProfile, burgers_residual, heat_residual, shift_ratio_diagnostics,
                    solve_heat_kernel)


def _json_default(obj):
    if isinstance(obj, np.integer):
        return int(obj)
    if isinstance(obj, np.floating):
        return float(obj)
    if isinstance(obj, np.ndarray):
        return obj.tolist()
    raise TypeError(type(obj).__name__)


def _dump(path: Path, payload: dict):
    path.write_text(json.dumps(payload, indent=2, default=_json_default, allow_nan=True))


def _write_rows(path: Path, header: list[str], rows):
    with open(path, "w", newline="") as fh:
        out = csv.writer(fh)
        out.writerow(header)
        for row in rows:
            out.writerow([f"{v:.17g}" if isinstance(v, float) else v for v in row])


def _load_config(args) -> RunConfig:
    cfg = parse_config(args.config) if args.config else RunConfig()
    return with_overrides(cfg, args.set or [])


def _prepare(args, cfg: RunConfig) -> Path:
    out = Path(args.out) if args.out else cfg.output_dir() / args.command
    write_manifest(cfg, out, " ".join(args.argv) or args.command)
    return out


def _initial_perturbation(cfg: RunConfig, spec: GridSpec) -> Field:
    p = cfg["perturbation"]
    if p["family"] == "zero":
        return Field.zeros(spec, has_time=False)
    return sine_gauss(spec, p["eps"], p["mode"])


def _shear(cfg: RunConfig):
    return solve_heat_kernel(cfg.profile(), cfg.grid())


# ---------------------------------------------------------------------------
# subcommands; each returns (summary dict, exit code)

def cmd_shear_flow(args, cfg):
    out = _prepare(args, cfg)
    flow = _shear(cfg)
    spec = flow.spec
    rows = []
    for i, t in enumerate(spec.t):
        for k, y in enumerate(spec.y):
            rows.append([float(t), float(y), *(float(flow.column(n)[i, k]) for n in
                                               ("u_s", "d_y_u_s", "d2_y_u_s", "d3_y_u_s", "alpha"))])
    _write_rows(out / "shear.csv", ["t", "y", "u_s", "d_y_u_s", "d2_y_u_s", "d3_y_u_s", "alpha"], rows)
    y_bar = min(1.0, spec.Y / 4)
    ry, rt = shift_ratio_diagnostics(flow, y_bar, spec.T / 4)
    summary = {
        "heat_residual": heat_residual(flow, "kernel"),
        "heat_residual_lattice": heat_residual(flow, "lattice"),
        "min_dy": float(flow.column("d_y_u_s").min()),
        "burgers_residual": burgers_residual(flow),
        "shift_ratios": {"y_bar": y_bar, "t_bar": spec.T / 4, "ratio_y": ry, "ratio_t": rt},
    }
    _dump(out / "diagnostics.json", summary)
    return summary, 0


def cmd_norms(args, cfg):
    f = read_field_csv(args.field)
    mode = cfg["norms"]["tangential_index_mode"]
    reports = [json.loads(norm_report(f, k, ell, lam, mode).to_json()) for k, ell, lam in cfg["norms"]["track"]]
    summary = {"field": str(args.field), "reports": reports}
    if args.out:
        Path(args.out).mkdir(parents=True, exist_ok=True)
        _dump(Path(args.out) / "norms.json", summary)
    return summary, 0


def cmd_mollifier_check(args, cfg):
    out = _prepare(args, cfg)
    if args.quick:
        corpus = mollifier_corpus(MOLLIFIER_GRID.replace(n_t=33, n_x=32, n_y=65), size=6, seed=cfg["output"]["seed"])
        comm_spec = COMMUTATOR_GRID.replace(n_x=16, n_y=385)
        k_ys = (2, 8, 32)
    else:
        corpus = mollifier_corpus(seed=cfg["output"]["seed"])
        comm_spec = COMMUTATOR_GRID
        k_ys = (2, 4, 8, 16, 24, 32, 48, 64, 96, 128)
    laws = mollifier_laws(corpus).as_dict()
    shear = solve_heat_kernel(ShearProfile(), comm_spec)
    comm = commutator_laws(commutator_corpus(shear, k_ys), shear)
    summary = {"mollifier": laws, "commutator": comm}
    _dump(out / "mollifier_check.json", summary)
    return summary, 0


def cmd_run_linearized(args, cfg):
    out = _prepare(args, cfg)
    flow = _shear(cfg)
    spec = flow.spec
    bg = shear_background(flow)
    ell = cfg["norms"]["track"][0][1] if cfg["norms"]["track"] else 1.0
    exact = None
    if cfg["shear"]["profile"] == "erf_canonical":
        w_star, u_star, f = w_solution(spec, cfg["shear"]["width"], cfg["perturbation"]["mode"])
        exact = u_star
    else:
        f = Field.from_function(spec, lambda t, x, y: t * np.sin(2 * math.pi * x / spec.L_x) * y * np.exp(-y))
        f = f * bg.d_y_u_tilde
    sol = solve_w(bg, f, ell, args.lam)
    for name in ("w", "u", "v"):
        write_field_csv(getattr(sol, name), out / f"{name}.csv")
    _write_rows(out / "energy_trace.csv", ["step", "t", "value"],
                ([i, float(spec.t[i]), float(e)] for i, e in enumerate(sol.energy_trace)))
    summary = {"residual_w": sol.residual_w, "residual_uv": sol.residual_uv,
               "energy": energy_probe(sol, bg, args.lam, ell, lambda_30(bg, flow, ell))}
    if exact is not None:
        summary["manufactured_error_rel"] = norm_A(sol.u - exact, 0, 0) / norm_A(exact, 0, 0)
    _dump(out / "residuals.json", summary)
    return summary, 0


TRACE_TAIL = ["du_norm", "dv_norm", "e_norm", "residual", "lambda3", "identity_rel", "telescoping_rel",
              "e2_form_gap_rel", "source_norm", "mollified_div_rel"]


def _nash_moser(cfg: RunConfig, out: Path) -> dict:
    flow = _shear(cfg)
    spec = flow.spec
    icfg = cfg.iteration()
    result = run(icfg, flow, _initial_perturbation(cfg, spec))
    w_keys = [k for k in (result.trace[0] if len(result.trace) > 1 else {}) if k.startswith("w_norm_")]
    header = ["n", "theta", "dtheta", *w_keys, *TRACE_TAIL]
    _write_rows(out / "trace.csv", header,
                ([rec.get(h, float("nan")) for h in header] for rec in result.trace))
    write_field_csv(result.state.u_field(flow), out / "u.csv")
    write_field_csv(Field(spec, result.state.v), out / "v.csv")
    hist = [r["residual"] for r in result.trace]
    summary = {"config": cfg.values, "outcome": result.outcome, "message": result.message,
               "wall_time": result.wall_time, "residual_first": hist[0], "residual_last": hist[-1],
               "residual_ratio": hist[-1] / hist[0] if hist[0] else 0.0, "steps": result.state.n}
    _dump(out / "run.json", summary)
    return summary


def cmd_run_nash_moser(args, cfg):
    out = _prepare(args, cfg)
    summary = _nash_moser(cfg, out)
    return summary, 2 if summary["outcome"] == "gate" else 0


def cmd_run_oracle(args, cfg):
    out = _prepare(args, cfg)
    flow = _shear(cfg)
    start = time.perf_counter()
    res = solve_nonlinear(_initial_perturbation(cfg, flow.spec), flow, cfg.oracle())
    write_field_csv(res.u, out / "u.csv")
    write_field_csv(res.v, out / "v.csv")
    summary = {"config": cfg.values, "picard_max_count": int(res.picard_counts.max(initial=0)),
               "picard_mean_count": float(res.picard_counts.mean()) if res.picard_counts.size else 0.0,
               "wall_time": time.perf_counter() - start}
    _dump(out / "run.json", summary)
    return summary, 0


def cmd_compare(args, cfg):
    a, b = read_field_csv(args.a), read_field_csv(args.b)
    if a.spec != b.spec or a.has_time != b.has_time:
        raise ValidationError("the two fields live on different grids")
    d = a - b
    mode = cfg["norms"]["tangential_index_mode"]
    rows = []
    for k, ell, _ in cfg["norms"]["track"]:
        rows.append({"k": k, "ell": ell, "A": norm_A(d, k, ell, mode), "C": norm_C(d, k, ell, mode),
                     "D": norm_D(d, k, ell, mode)})
    summary = {"a": str(args.a), "b": str(args.b), "norms": rows, "Linf": norm_Linf(d)}
    if args.out:
        Path(args.out).mkdir(parents=True, exist_ok=True)
        _dump(Path(args.out) / "compare.json", summary)
    return summary, 0


def cmd_stability(args, cfg):
    out = _prepare(args, cfg)
    flow = _shear(cfg)
    icfg = cfg.iteration()
    mode = cfg["perturbation"]["mode"]
    rows = []
    for eps in args.eps:
        res = stability_experiment(icfg, flow, sine_gauss(flow.spec, eps, mode), sine_gauss(flow.spec, eps / 2, mode))
        rows.append([eps, res["ratio"], res["numerator"], res["denominator"]])
    _write_rows(out / "stability.csv", ["eps", "ratio", "numerator", "denominator"], rows)
    ratios = [r[1] for r in rows]
    summary = {"eps": list(args.eps), "ratios": ratios, "variation": variation(ratios)}
    _dump(out / "stability.json", summary)
    return summary, 0


def _sweep_one(job):
    text, out = job
    cfg = parse_config_text(text, "<sweep>")
    out = Path(out)
    write_manifest(cfg, out, "sweep member")
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        try:
            s = _nash_moser(cfg, out)
        except NumericalGateError as exc:
            return {"outcome": "gate", "message": str(exc), "residual_first": float("nan"),
                    "residual_last": float("nan"), "residual_ratio": float("nan"), "wall_time": 0.0}
    return s


def cmd_sweep(args, cfg):
    out = _prepare(args, cfg)
    jobs = []
    for i, value in enumerate(args.values):
        member = with_overrides(cfg, [f"{args.param}={value}"])
        jobs.append((member.to_text(), str(out / f"member_{i:03d}")))
    if args.workers > 1:
        with ProcessPoolExecutor(max_workers=args.workers) as pool:
            results = list(pool.map(_sweep_one, jobs))
    else:
        results = [_sweep_one(j) for j in jobs]
    header = ["value", "outcome", "residual_first", "residual_last", "residual_ratio", "wall_time"]
    _write_rows(out / "sweep.csv", header,
                ([v, r["outcome"], r["residual_first"], r["residual_last"], r["residual_ratio"], r["wall_time"]]
                 for v, r in zip(args.values, results)))
    summary = {"param": args.param, "values": list(args.values),
               "results": [{k: r[k] for k in header[1:]} for r in results]}
    _dump(out / "sweep.json", summary)
    return summary, 2 if any(r["outcome"] == "gate" for r in results) else 0


# ---------------------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", type=Path, help="key = value config file")
    common.add_argument("--set", action="append", metavar="SECTION.KEY=VALUE", help="override one config key")
    common.add_argument("--out", help="output directory (default: <output.directory>/<subcommand>)")
    common.add_argument("--quiet", action="store_true", help="print nothing on success")
    common.add_argument("--json", action="store_true", help="print the summary as JSON")

    p = argparse.ArgumentParser(prog="prandtl-lab", description=__doc__.splitlines()[0])
    p.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = p.add_subparsers(dest="command", required=True)

    sub.add_parser("shear-flow", parents=[common], help="heat-kernel shear flow and its diagnostics")
    s = sub.add_parser("norms", parents=[common], help="anisotropic norms of a field CSV")
    s.add_argument("field", type=Path)
    s = sub.add_parser("mollifier-check", parents=[common], help="smoothing and commutator law corpora")
    s.add_argument("--quick", action="store_true", help="small corpus on coarse grids")
    s = sub.add_parser("run-linearized", parents=[common], help="linearized solve via the w-transform")
    s.add_argument("--lam", type=float, default=0.0, help="exponential weight lambda in the energy trace")
    sub.add_parser("run-nash-moser", parents=[common], help="Nash-Moser iteration around the shear flow")
    sub.add_parser("run-oracle", parents=[common], help="direct nonlinear solver")
    s = sub.add_parser("compare", parents=[common], help="norms of the difference of two field CSVs")
    s.add_argument("a", type=Path)
    s.add_argument("b", type=Path)
    s = sub.add_parser("stability", parents=[common], help="stability ratio over perturbation pairs")
    s.add_argument("--eps", type=float, nargs="+", default=[0.002, 0.005, 0.01, 0.015, 0.02])
    s = sub.add_parser("sweep", parents=[common], help="Nash-Moser runs over one varied config key")
    s.add_argument("--param", required=True, metavar="SECTION.KEY")
    s.add_argument("--values", required=True, nargs="+")
    s.add_argument("--workers", type=int, default=1)
    return p


COMMANDS = {
    "shear-flow": cmd_shear_flow, "norms": cmd_norms, "mollifier-check": cmd_mollifier_check,
    "run-linearized": cmd_run_linearized, "run-nash-moser": cmd_run_nash_moser, "run-oracle": cmd_run_oracle,
    "compare": cmd_compare, "stability": cmd_stability, "sweep": cmd_sweep,
}


def _print_summary(summary: dict, as_json: bool):
    if as_json:
        print(json.dumps(summary, default=_json_default))
        return
    for key, value in summary.items():
        if key == "config":
            continue
        if isinstance(value, float):
            print(f"{key}: {value:.6g}")
        else:
            print(f"{key}: {json.dumps(value, default=_json_default)}")


def main(argv=None) -> int:
    argv = sys.argv[1:] if argv is None else list(argv)
    args = build_parser().parse_args(argv)
    args.argv = argv
    try:
        cfg = _load_config(args)
        summary, code = COMMANDS[args.command](args, cfg)
    except ValidationError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except NumericalGateError as exc:
        print(f"gate: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 2
    if args.json:
        _print_summary(summary, True)
    elif not args.quiet:
        _print_summary(summary, False)
    return code
