"""Command line entry point: ``eills {fit,path,bench,simulate,popdiag}``.

Results go to stdout (or ``--out DIR``), progress and errors to stderr.
All variable indices in files and JSON are 1-based, matching the ``x1..xp``
CSV columns. Exit codes: 0 ok, 2 configuration error, 3 data error,
4 solver error.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import math
import sys
from dataclasses import dataclass, field
from itertools import combinations
from pathlib import Path
from typing import Optional

from .data import load_csv, compute_stats, sample_size_diagnostics, write_csv
from .exceptions import ConfigurationError, EillsError, SolverError, ValidationError
from .experiments import BenchRow, run_bench, thread_count
from .plotting import emit_svg
from .population import MAX_P_GAMMA, summarize, support_diagnostics
from .scm import LinearScmSpec, example1_spec, example_a1_spec, parse_benchmark, simulate_benchmark
from .solver import SearchConfig, gamma_path, l0_exhaustive

EXIT_OK, EXIT_CONFIG, EXIT_DATA, EXIT_SOLVER = 0, 2, 3, 4

#: gamma grid of the coefficient-path figure
DEFAULT_GAMMA_GRID = (
    [0.0, 1.0, 2.0, 3.0, 8.0]
    + [5.0 * k for k in range(1, 20)]
    + [100.0 * j for j in range(1, 10)]
    + [1000.0 * l for l in range(1, 11)]
)
DEFAULT_N_GRID = [100 * k for k in range(1, 11)] + [1500, 2000]


@dataclass
class ExperimentConfig:
    command: str
    input: Optional[str] = None
    gamma: float = 20.0
    gamma_grid: list = field(default_factory=lambda: sorted(set(DEFAULT_GAMMA_GRID)))
    lam: float = 0.0
    weights: str = "proportional"
    n_grid: list = field(default_factory=lambda: list(DEFAULT_N_GRID))
    n: int = 300
    replications: int = 500
    base_seed: int = 0
    output_dir: Optional[Path] = None
    max_support: Optional[int] = None
    center: bool = False
    estimators: list = field(default_factory=lambda: ["eills", "pooled_ls", "ls_on_S*", "ls_on_Gc"])

    def __post_init__(self):
        if self.replications < 1:
            raise ConfigurationError("--reps must be at least 1")
        if not self.gamma_grid or not self.n_grid:
            raise ConfigurationError("grids must be nonempty")
        if self.output_dir is not None:
            self.output_dir = Path(self.output_dir)
            self.output_dir.mkdir(parents=True, exist_ok=True)


def _fmt(x):
    return format(float(x), ".17g")


def _num(x):
    """JSON-safe float: non-finite values become strings."""
    x = float(x)
    if math.isfinite(x):
        return x
    return "inf" if x > 0 else ("-inf" if x < 0 else "nan")


def _floats(text):
    try:
        return [float(v) for v in text.split(",") if v.strip()]
    except ValueError:
        raise ConfigurationError(f"expected comma-separated numbers, got {text!r}") from None


def _emit(cfg, name, text):
    if cfg.output_dir is None:
        sys.stdout.write(text)
    else:
        (cfg.output_dir / name).write_text(text, encoding="utf-8")


def _dumps(obj):
    return json.dumps(obj, indent=2) + "\n"


def _load(cfg):
    if cfg.input is None:
        raise ConfigurationError("an input CSV is required")
    if not Path(cfg.input).exists():
        raise ValidationError(f"input file {cfg.input} does not exist")
    return load_csv(cfg.input, center=cfg.center, weights=cfg.weights)


def _search_config(cfg, gamma=None):
    return SearchConfig(
        gamma=cfg.gamma if gamma is None else gamma,
        lam=cfg.lam,
        max_support_size=cfg.max_support,
    )


def fit_to_dict(result, diagnostics=None):
    out = {
        "beta": [float(b) for b in result.beta],
        "support": [j + 1 for j in result.support],
        "objective": {k: float(v) for k, v in result.objective.as_dict().items()},
        "gamma": result.gamma,
        "lambda": result.lam,
    }
    if diagnostics is not None:
        out["diagnostics"] = diagnostics.as_dict()
    return out


def cmd_fit(cfg):
    ds = _load(cfg)
    stats = compute_stats(ds)
    result = l0_exhaustive(stats, ds.weights, _search_config(cfg))
    _emit(cfg, "fit.json", _dumps(fit_to_dict(result, sample_size_diagnostics(ds))))
    return result


def cmd_path(cfg):
    grid = list(cfg.gamma_grid)
    if any(b < a for a, b in zip(grid, grid[1:])):
        raise ConfigurationError("--gamma-grid must be ascending")
    ds = _load(cfg)
    stats = compute_stats(ds)
    results = gamma_path(stats, ds.weights, grid, cfg.lam, _search_config(cfg))
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["gamma"] + [f"beta_{j + 1}" for j in range(ds.p)] + ["support"])
    for r in results:
        mask = "".join("1" if b != 0 else "0" for b in r.beta)
        w.writerow([_fmt(r.gamma)] + [_fmt(b) for b in r.beta] + [mask])
    _emit(cfg, "path.csv", buf.getvalue())
    if cfg.output_dir is not None and len(grid) > 1:
        series = {f"x{j + 1}": ([r.gamma for r in results], [r.beta[j] for r in results]) for j in range(ds.p)}
        emit_svg(series, cfg.output_dir / "path.svg", title="EILLS coefficient path", xlabel="gamma", ylabel="coefficient")
    return results


def cmd_bench(cfg):
    name, params = parse_benchmark(cfg.input or "fig2")
    workers = thread_count()
    rows, _ = run_bench(
        benchmark=name,
        params=params,
        n_grid=cfg.n_grid,
        reps=cfg.replications,
        base_seed=cfg.base_seed,
        estimators=cfg.estimators,
        gamma=cfg.gamma,
        lam=cfg.lam,
        weights=cfg.weights,
        workers=workers,
        progress=True,
    )
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(BenchRow.FIELDS)
    for row in rows:
        w.writerow([v if isinstance(v, (str, int)) else _fmt(v) for v in row.values()])
    _emit(cfg, "bench.csv", buf.getvalue())
    if cfg.output_dir is not None:
        names = list(dict.fromkeys(r.estimator for r in rows))
        err = {e: ([r.n for r in rows if r.estimator == e], [r.mean_sq_error for r in rows if r.estimator == e]) for e in names}
        logy = all(r.mean_sq_error > 0 for r in rows)
        emit_svg(err, cfg.output_dir / "bench_error.svg", title="mean squared l2 error", xlabel="n", ylabel="error", logy=logy)
        if "eills" in names:
            sel = [r for r in rows if r.estimator == "eills"]
            emit_svg(
                {"in S*": ([r.n for r in sel], [r.mean_hits_S for r in sel]), "in G": ([r.n for r in sel], [r.mean_hits_G for r in sel])},
                cfg.output_dir / "bench_selection.svg",
                title="EILLS selected variables",
                xlabel="n",
                ylabel="count",
            )
    return rows


def cmd_simulate(cfg):
    name, params = parse_benchmark(cfg.input or "fig2")
    if cfg.output_dir is None:
        raise ConfigurationError("simulate needs --out DIR for the CSV and its ground-truth sidecar")
    ds, truth = simulate_benchmark(name, params, cfg.n, cfg.base_seed, weights=cfg.weights)
    write_csv(ds, cfg.output_dir / "data.csv")
    (cfg.output_dir / "truth.json").write_text(_dumps(truth.to_sidecar()), encoding="utf-8")
    return ds, truth


def _load_spec(text):
    path = Path(text)
    if path.exists():
        try:
            return LinearScmSpec.from_dict(json.loads(path.read_text(encoding="utf-8")))
        except json.JSONDecodeError as exc:
            raise ValidationError(f"{path}: invalid JSON ({exc})") from None
    name, params = parse_benchmark(text)
    vals = _floats(",".join(params))
    if name == "example1" and len(vals) == 2:
        return example1_spec(*vals)
    if name == "example_a1" and len(vals) >= 6:
        return example_a1_spec(*vals[:4], vals[4:])
    raise ValidationError(f"{text!r} is neither a spec JSON file nor example1:s1,s2 / example_a1:s,h,v1,v2,v0...")


def cmd_popdiag(cfg):
    if cfg.input is None:
        raise ConfigurationError("popdiag needs a spec JSON file")
    spec = _load_spec(cfg.input)
    summary = summarize(spec)
    report = summary.to_dict()
    if spec.p <= MAX_P_GAMMA:
        if not summary.G_omega:
            report["gamma_star"] = 0.0
            report["gamma_star_note"] = "no spurious supports"
        else:
            report["gamma_star"] = _num(summary.gamma_star)
        table = []
        for k in range(spec.p + 1):
            for S in combinations(range(spec.p), k):
                d = support_diagnostics(summary, spec, S)
                row = d.to_dict()
                row["xi_S"] = _num(row["xi_S"])
                table.append(row)
        report["supports"] = table
    _emit(cfg, "popdiag.json", _dumps(report))
    return report


COMMANDS = {"fit": cmd_fit, "path": cmd_path, "bench": cmd_bench, "simulate": cmd_simulate, "popdiag": cmd_popdiag}


def build_parser():
    parser = argparse.ArgumentParser(prog="eills", description="Environment invariant linear least squares")
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p, data=True):
        p.add_argument("--weights", choices=["equal", "proportional"], default="proportional")
        p.add_argument("--out", type=Path, default=None, help="output directory (default: stdout)")
        if data:
            p.add_argument("--center", action="store_true", help="mean-center each environment")
            p.add_argument("--max-support", type=int, default=None)
            p.add_argument("--lambda", dest="lam", type=float, default=0.0)

    p = sub.add_parser("fit", help="fit EILLS to a CSV")
    p.add_argument("input")
    p.add_argument("--gamma", type=float, default=20.0)
    common(p)

    p = sub.add_parser("path", help="coefficient path over a gamma grid")
    p.add_argument("input")
    p.add_argument("--gamma-grid", default=None, help="comma-separated ascending grid")
    common(p)

    p = sub.add_parser("bench", help="replicated simulation benchmark")
    p.add_argument("input", nargs="?", default="fig2", help="benchmark tag, e.g. fig2 or example1:1,-0.5")
    p.add_argument("--gamma", type=float, default=20.0)
    p.add_argument("--lambda", dest="lam", type=float, default=0.0)
    p.add_argument("--n-grid", default=None)
    p.add_argument("--reps", type=int, default=500)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--estimators", default="eills,pooled_ls,ls_on_S*,ls_on_Gc")
    p.add_argument("--weights", choices=["equal", "proportional"], default="equal")
    p.add_argument("--out", type=Path, default=None)

    p = sub.add_parser("simulate", help="write a simulated CSV plus truth.json")
    p.add_argument("input", nargs="?", default="fig2")
    p.add_argument("--n", type=int, default=300, help="samples per environment")
    p.add_argument("--n-grid", default=None, help="alias: first entry is used as --n")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--weights", choices=["equal", "proportional"], default="equal")
    p.add_argument("--out", type=Path, required=True)

    p = sub.add_parser("popdiag", help="population diagnostics of a linear SCM spec")
    p.add_argument("input", help="spec JSON or example1:s1,s2")
    p.add_argument("--weights", choices=["equal"], default="equal", help="only equal weights are supported")
    p.add_argument("--out", type=Path, default=None)
    return parser


def config_from_args(args) -> ExperimentConfig:
    kw = {"command": args.command, "input": getattr(args, "input", None), "output_dir": args.out}
    for name in ("gamma", "lam", "weights", "center"):
        if hasattr(args, name):
            kw[name] = getattr(args, name)
    if getattr(args, "max_support", None) is not None:
        kw["max_support"] = args.max_support
    if getattr(args, "gamma_grid", None):
        kw["gamma_grid"] = _floats(args.gamma_grid)
    if getattr(args, "n_grid", None):
        kw["n_grid"] = [int(v) for v in _floats(args.n_grid)]
    if hasattr(args, "reps"):
        kw["replications"] = args.reps
    if hasattr(args, "seed"):
        kw["base_seed"] = args.seed
    if hasattr(args, "estimators"):
        kw["estimators"] = [e for e in args.estimators.split(",") if e.strip()]
    if args.command == "simulate":
        kw["n"] = kw["n_grid"][0] if "n_grid" in kw else args.n
    return ExperimentConfig(**kw)


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        cfg = config_from_args(args)
        COMMANDS[cfg.command](cfg)
    except ConfigurationError as exc:
        return _fail(exc, EXIT_CONFIG)
    except ValidationError as exc:
        return _fail(exc, EXIT_DATA)
    except (SolverError, EillsError) as exc:
        return _fail(exc, EXIT_SOLVER)
    return EXIT_OK


def _fail(exc, code):
    sys.stderr.write(json.dumps({"error": type(exc).__name__, "message": str(exc)}) + "\n")
    return code


if __name__ == "__main__":
    sys.exit(main())
