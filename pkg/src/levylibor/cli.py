"""Command-line harness: price, compare, bench and validate.

Every CSV is written with a manifest beside it (``<csv>.manifest.ini``).
The manifest is itself a config file: running the same command on it
reproduces the CSV byte for byte.  Timings live only in the manifest.
"""

from __future__ import annotations

import argparse
import csv
import hashlib
import io
import itertools
import math
import platform
import sys
import time
from dataclasses import replace
from importlib import metadata
from pathlib import Path

import numpy as np

from .config import ConfigError, ExperimentConfig, load_config, parse_config
from .driver import LevyDriverSpec, NigParams
from .drift import DriftMode, DriftSizeError, drift_cost
from .market import TenorStructure, VolatilityStructure, check_conditions
from .pricing import Caplet, black_inputs
from .simulation import RunSpec, SimulationError, run_experiment

__all__ = [
    "PRICE_COLUMNS",
    "COMPARE_COLUMNS",
    "BENCH_COLUMNS",
    "cmd_price",
    "cmd_compare",
    "cmd_bench",
    "cmd_validate",
    "git_blob_hash",
    "main",
]

CSV_SCHEMA = 1
PRICE_COLUMNS = [
    "scheme", "mode", "product", "kind", "expiry", "end", "strike",
    "price", "std_error", "half_width", "implied_vol", "n_paths",
]  # fmt: skip
COMPARE_COLUMNS = [
    "scheme", "mode", "base_scheme", "base_mode", "product", "kind", "expiry", "end", "strike",
    "price_diff_bp", "price_diff_se_bp", "iv_diff_bp", "iv_diff_se_bp",
]  # fmt: skip
BENCH_COLUMNS = [
    "sweep", "scheme", "mode", "n_rates", "paths", "status",
    "cumulant_evals", "product_terms", "multiply_adds", "last_rate_cumulant_evals", "wall_seconds",
]  # fmt: skip


def git_blob_hash(data: bytes) -> str:
    """Content hash as computed by ``git hash-object``."""
    return hashlib.sha1(b"blob %d\0" % len(data) + data).hexdigest()


def _fmt(v, precision: int) -> str:
    if v is None:
        return ""
    if isinstance(v, (bool, np.bool_)):
        return "true" if v else "false"
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    if isinstance(v, (float, np.floating)):
        if math.isnan(v):
            return "nan"
        return f"{float(v):.{precision}g}"
    return str(v)


def _csv_bytes(columns: list[str], rows: list[dict], precision: int) -> bytes:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(columns)
    for r in rows:
        w.writerow([_fmt(r.get(c), precision) for c in columns])
    return buf.getvalue().encode("utf-8")


def _versions() -> dict[str, str]:
    try:
        pkg = metadata.version("artifact")
    except metadata.PackageNotFoundError:
        pkg = "unknown"
    import scipy

    return {"package": pkg, "python": platform.python_version(), "numpy": np.__version__, "scipy": scipy.__version__}


def _write_outputs(out_dir: Path, name: str, data: bytes, cfg: ExperimentConfig, command: str, extra: dict) -> Path:
    out_dir.mkdir(parents=True, exist_ok=True)
    path = out_dir / name
    path.write_bytes(data)
    lines = [
        f"# re-run with: levylibor {command} --config {name}.manifest.ini",
        cfg.to_ini().rstrip("\n"),
        "",
        "[run]",
        f"command = {command}",
        f"csv_schema = {command}/{CSV_SCHEMA}",
    ]
    lines += [f"version_{k} = {v}" for k, v in _versions().items()]
    lines += [f"{k} = {v}" for k, v in extra.items()]
    lines += ["", "[outputs]", f"csv = {name}", f"git_blob_sha1 = {git_blob_hash(data)}", ""]
    (out_dir / f"{name}.manifest.ini").write_text("\n".join(lines), encoding="utf-8")
    return path


def _runs(cfg: ExperimentConfig) -> list[RunSpec]:
    return [RunSpec.of(s, m) for s, m in itertools.product(cfg.simulation.schemes, cfg.simulation.modes)]


def _product_fields(prod) -> dict:
    return {
        "product": prod.label,
        "kind": prod.kind,
        "expiry": prod.expiry,
        "end": getattr(prod, "end", None),
        "strike": None if math.isnan(prod.strike) else prod.strike,
    }


def _timing_extra(result, threads: int) -> dict:
    extra = {"threads": threads, "wall_seconds": f"{result.wall_time:.3f}", "failed_paths": result.n_failed}
    for r in result.runs:
        key = r.spec.label.replace("/", "_")
        extra[f"seconds_{key}"] = f"{r.wall_time:.3f}"
        extra[f"cumulant_evals_{key}"] = r.cost.cumulant_evals
        extra[f"product_terms_{key}"] = r.cost.product_terms
    return extra


def cmd_price(cfg: ExperimentConfig, *, threads: int = 1) -> tuple[bytes, dict]:
    """One row per product per (scheme, mode): price, standard error, implied vol."""
    model = cfg.model.build()
    products = cfg.build_products(model)
    sim = cfg.simulation
    result = run_experiment(
        model, _runs(cfg), sim.grid(), sim.rng(), sim.paths, products, threads=threads, grouping=sim.grouping
    )
    rows = []
    for r in result.runs:
        for e in r.estimates:
            rows.append(
                {
                    "scheme": r.spec.scheme.value,
                    "mode": r.spec.mode.value,
                    **_product_fields(e.product),
                    "price": e.price,
                    "std_error": e.std_error,
                    "half_width": e.half_width,
                    "implied_vol": e.implied_vol,
                    "n_paths": e.n_paths,
                }
            )
    return _csv_bytes(PRICE_COLUMNS, rows, cfg.output.precision), _timing_extra(result, threads)


def cmd_compare(cfg: ExperimentConfig, *, threads: int = 1) -> tuple[bytes, dict]:
    """Paired differences of every (scheme, mode) against the first, on common increments.

    Implied-vol standard errors use the Black vega of the baseline implied vol.
    """
    runs = _runs(cfg)
    if len(runs) < 2:
        raise ConfigError("simulation", "schemes", "compare needs at least two scheme/mode combinations")
    model = cfg.model.build()
    products = cfg.build_products(model)
    sim = cfg.simulation
    result = run_experiment(model, runs, sim.grid(), sim.rng(), sim.paths, products, threads=threads, grouping=sim.grouping)
    base = result.runs[0]
    rows = []
    for d, r in zip(result.differences, result.runs[1:]):
        for k, prod in enumerate(products):
            iv_b, iv_r = base.estimates[k].implied_vol, r.estimates[k].implied_vol
            iv_diff = iv_se = None
            if iv_b is not None:
                iv_diff = (iv_r - iv_b) * 1e4
                vega = _vega_at(prod, model, iv_b)
                iv_se = d.std_error[k] / vega * 1e4 if vega else float("nan")
            rows.append(
                {
                    "scheme": r.spec.scheme.value,
                    "mode": r.spec.mode.value,
                    "base_scheme": base.spec.scheme.value,
                    "base_mode": base.spec.mode.value,
                    **_product_fields(prod),
                    "price_diff_bp": d.diff[k] * 1e4,
                    "price_diff_se_bp": d.std_error[k] * 1e4,
                    "iv_diff_bp": iv_diff,
                    "iv_diff_se_bp": iv_se,
                }
            )
    return _csv_bytes(COMPARE_COLUMNS, rows, cfg.output.precision), _timing_extra(result, threads)


def _vega_at(prod, model, vol: float) -> float | None:
    inputs = black_inputs(prod, model)
    if inputs is None or not vol or not math.isfinite(vol):
        return None
    f, annuity, t = inputs
    sd = vol * math.sqrt(t)
    d1 = (math.log(f / prod.strike) + 0.5 * sd * sd) / sd
    return annuity * f * math.sqrt(t) * math.exp(-0.5 * d1 * d1) / math.sqrt(2 * math.pi)


def _bench_run(cfg: ExperimentConfig, n: int, paths: int, mode: str, sweep: str, threads: int) -> dict:
    b = cfg.bench
    row = {"sweep": sweep, "scheme": b.scheme, "mode": mode, "n_rates": n, "paths": paths}
    if DriftMode(mode) is DriftMode.FULL and n - 1 > b.max_subsequent:
        return {**row, "status": f"refused: {n - 1} subsequent rates > max_subsequent {b.max_subsequent}"}
    model = replace(cfg.model, n_rates=n).build()
    sim = cfg.simulation
    spec = RunSpec.of(b.scheme, mode)
    # the literal subset expansion, so wall time follows the reference algorithm
    t0 = time.perf_counter()
    try:
        result = run_experiment(
            model, [spec], sim.grid(), sim.rng(), paths, [Caplet(float(model.curve.forwards[-1]), n)],
            threads=threads, grouping="none",
        )  # fmt: skip
    except DriftSizeError as exc:
        return {**row, "status": f"refused: {exc}"}
    wall = time.perf_counter() - t0
    cost = result.runs[0].cost
    return {
        **row,
        "status": "ok",
        "cumulant_evals": cost.cumulant_evals,
        "product_terms": cost.product_terms,
        "multiply_adds": cost.multiply_adds,
        "last_rate_cumulant_evals": drift_cost(n - 1, DriftMode.FULL if mode == "frozen" else mode).cumulant_evals,
        "wall_seconds": wall,
    }


def bench_fits(rows: list[dict]) -> dict[str, float]:
    """Growth exponents: log-log slope in paths; per-rate growth factor (Full) or log-log slope in N."""
    fits: dict[str, float] = {}
    ok = [r for r in rows if r.get("status") == "ok"]
    for mode in sorted({r["mode"] for r in ok}):
        by_paths = [r for r in ok if r["mode"] == mode and r["sweep"] == "paths"]
        if len(by_paths) >= 2:
            x = np.log([r["paths"] for r in by_paths])
            y = np.log([r["wall_seconds"] for r in by_paths])
            fits[f"{mode}_paths_loglog_slope"] = float(np.polyfit(x, y, 1)[0])
        by_n = [r for r in ok if r["mode"] == mode and r["sweep"] == "rates"]
        if len(by_n) >= 2:
            n = np.array([r["n_rates"] for r in by_n], dtype=float)
            for key in ("wall_seconds", "last_rate_cumulant_evals"):
                y = np.log([r[key] for r in by_n])
                fits[f"{mode}_{key}_growth_per_rate"] = float(np.exp(np.polyfit(n, y, 1)[0]))
                fits[f"{mode}_{key}_loglog_slope_in_n"] = float(np.polyfit(np.log(n), y, 1)[0])
    return fits


def cmd_bench(cfg: ExperimentConfig, *, threads: int = 1) -> tuple[bytes, dict]:
    """Wall time and drift-cost counters over N and over path counts, with fitted exponents."""
    b = cfg.bench
    rows = []
    for mode in b.modes:
        for n in b.n_values:
            rows.append(_bench_run(cfg, n, b.n_paths, mode, "rates", threads))
        for paths in b.path_values:
            rows.append(_bench_run(cfg, b.path_n, paths, mode, "paths", threads))
    fits = bench_fits(rows)
    extra = {"threads": threads, **{f"fit_{k}": f"{v:.6g}" for k, v in fits.items()}}
    return _csv_bytes(BENCH_COLUMNS, rows, cfg.output.precision), extra


def cmd_validate(cfg: ExperimentConfig):
    """Model-condition report for the configured model; works on raw inputs."""
    m = cfg.model
    tenor = TenorStructure.uniform(m.n_rates, m.accrual)
    discount = np.exp(-m.flat_rate * tenor.dates[1:])
    vols = VolatilityStructure.flat(m.n_rates, m.vol) if m.n_rates > 0 else None
    driver = LevyDriverSpec(NigParams(m.alpha, m.beta, m.mu, m.delta_bar), m.c)
    return check_conditions(tenor, discount, vols, driver)


def _parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="levylibor", description="Monte Carlo pricing in Lévy LIBOR models")
    sub = p.add_subparsers(dest="command", required=True)
    for name, help_ in (
        ("price", "price the configured products"),
        ("compare", "paired differences between scheme/mode runs"),
        ("bench", "cost scaling in rates and paths"),
        ("validate", "check the model conditions"),
    ):
        s = sub.add_parser(name, help=help_)
        s.add_argument("--config", type=Path, help="INI config (defaults reproduce the reference setup)")
        s.add_argument("--seed", type=int, help="override [simulation] seed")
        s.add_argument("--threads", type=int, default=1, help="worker threads; never changes results")
        s.add_argument("--out", type=Path, default=Path("."), help="output directory")
        if name in ("price", "compare"):
            s.add_argument("--schemes", help="comma-separated override of [simulation] schemes")
            s.add_argument("--modes", help="comma-separated override of [simulation] modes")
            s.add_argument("--paths", type=int, help="override [simulation] paths")
    return p


def _apply_overrides(cfg: ExperimentConfig, args) -> ExperimentConfig:
    sim = cfg.simulation
    if args.seed is not None:
        sim = replace(sim, seed=args.seed)
    for key in ("schemes", "modes"):
        v = getattr(args, key, None)
        if v:
            sim = replace(sim, **{key: tuple(x.strip() for x in v.split(",") if x.strip())})
    if getattr(args, "paths", None) is not None:
        sim = replace(sim, paths=args.paths)
    # round-trip through the parser so overrides get the same validation
    return parse_config(replace(cfg, simulation=sim).to_ini())


def main(argv: list[str] | None = None) -> int:
    args = _parser().parse_args(argv)
    if args.threads < 1:
        print("error: --threads must be >= 1", file=sys.stderr)
        return 2
    try:
        cfg = _apply_overrides(load_config(args.config), args)
        if args.command == "validate":
            report = cmd_validate(cfg)
            print(report)
            return 0 if report.ok else 1
        commands = {"price": cmd_price, "compare": cmd_compare, "bench": cmd_bench}
        data, extra = commands[args.command](cfg, threads=args.threads)
        name = getattr(cfg.output, f"{args.command}_csv")
        path = _write_outputs(args.out, name, data, cfg, args.command, extra)
        print(f"wrote {path}")
        for k, v in extra.items():
            if k.startswith("fit_"):
                print(f"{k[4:]} = {v}")
        return 0
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    except SimulationError as exc:
        print(f"simulation error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    raise SystemExit(main())
