"""Command-line entry point: ``critnorm {simulate,norms,monitor,verify}``.

Exit codes: 0 success, 2 user or configuration error, 3 blow-up suspected
(non-finite values during time stepping), 4 internal invariant violation
(including failed inequality suites).
"""

from __future__ import annotations

import argparse
import datetime as _dt
import hashlib
import json
import logging
import math
import os
import sys
from pathlib import Path
from typing import Sequence

from . import inequality_lab
from .config import RunConfig, load_config
from .errors import BlowUpSuspected, ConfigurationError, CritnormError, ParameterError, ShapeError, ValidationError
from .littlewood_paley import NormSpec, norm
from .monitors import (
    MonitorAggregator,
    MonitorSeries,
    MonitorSpec,
    gronwall_envelope,
    klips_from_series,
    monitor_snapshots,
)
from .ns_solver import integrate
from .snapshot import read_snapshot, write_snapshot
from .spectral_core import set_workers

EXIT_OK = 0
EXIT_USAGE = 2
EXIT_BLOWUP = 3
EXIT_INVARIANT = 4

DEFAULT_MONITORS = ("EnergyBalance", "CriterionIntegral", "VorticityL32", "HThetaEnergy")

log = logging.getLogger("critnorm")


class _Parser(argparse.ArgumentParser):
    """argparse exits with status 2 on usage errors, which matches our convention."""


def _threads(value: int | None) -> int:
    if value is not None:
        return max(1, int(value))
    env = os.environ.get("CRITNORM_THREADS", "").strip()
    if env:
        try:
            return max(1, int(env))
        except ValueError:
            raise ConfigurationError(f"CRITNORM_THREADS must be an integer, got {env!r}") from None
    return 1


def _utc_now() -> str:
    return _dt.datetime.now(_dt.timezone.utc).replace(microsecond=0).isoformat()


def _sha256(path: Path) -> str:
    return hashlib.sha256(path.read_bytes()).hexdigest()


def _json_safe(x):
    if isinstance(x, float) and not math.isfinite(x):
        return "nan" if math.isnan(x) else ("inf" if x > 0 else "-inf")
    if isinstance(x, dict):
        return {str(k): _json_safe(v) for k, v in x.items()}
    if isinstance(x, (list, tuple)):
        return [_json_safe(v) for v in x]
    return x


def _write_manifest(out: Path, body: dict) -> Path:
    """Manifest with a file inventory; ``created_utc`` is the only non-reproducible field."""
    files = {}
    for p in sorted(out.rglob("*")):
        if p.is_file() and p.name != "manifest.json":
            files[p.relative_to(out).as_posix()] = _sha256(p)
    doc = dict(body)
    doc["files"] = files
    doc["created_utc"] = _utc_now()
    path = out / "manifest.json"
    path.write_text(json.dumps(_json_safe(doc), sort_keys=True, indent=2, allow_nan=False) + "\n")
    return path


def _write_series(out: Path, series: dict[str, MonitorSeries], figures: bool) -> None:
    mdir = out / "monitors"
    mdir.mkdir(parents=True, exist_ok=True)
    for name, s in sorted(series.items()):
        (mdir / f"{name}.csv").write_text(s.to_csv())
    if figures and series:
        from .plotting import plot_monitor_series

        plot_monitor_series(series, out / "figures")


def _series_summaries(series: dict[str, MonitorSeries], specs: Sequence[MonitorSpec]) -> tuple[dict, dict[str, MonitorSeries]]:
    """Derived diagnostics for the manifest plus extra series (envelope margins)."""
    summary: dict = {
        "final_integrals": {name: s.final_integral for name, s in sorted(series.items())},
    }
    extra: dict[str, MonitorSeries] = {}
    if "klips_c1_energy" in series:
        summary["klips_residuals"] = [float(x) for x in klips_from_series(series)]
    for spec in specs:
        if spec.kind != "GronwallEnvelope":
            continue
        crit_name = next(n for n in series if n.startswith("criterion_"))
        env = gronwall_envelope(
            series[crit_name],
            float(series["vorticity_l32"].values[0]),
            spec.gronwall_c,
            spec.p,
            series["omega34_l2"].values,
            series["grad_omega34_l2sq"].values,
            series["d3v3_htheta"].values,
            series["grad_d3v3_htheta_sq"].values,
        )
        summary["gronwall_envelope"] = {
            "C": env.C,
            "holds": env.holds,
            "min_vorticity_margin": float(env.vorticity_margin.min()) if env.times.size else 0.0,
            "min_htheta_margin": float(env.htheta_margin.min()) if env.times.size else 0.0,
        }
        extra["envelope_vorticity_margin"] = MonitorSeries("envelope_vorticity_margin", env.times, env.vorticity_margin)
        extra["envelope_htheta_margin"] = MonitorSeries("envelope_htheta_margin", env.times, env.htheta_margin)
    return summary, extra


def _config_from_args(args) -> tuple[RunConfig, Path]:
    cfg = load_config(args.config)
    if args.seed is not None:
        cfg = cfg.model_copy(update={"initial": cfg.initial.model_copy(update={"seed": int(args.seed)})})
    out = args.out or cfg.output_dir
    if not out:
        raise ConfigurationError("no output directory: pass --out or set output_dir in the config")
    return cfg, Path(out)


# ---------------------------------------------------------------------------
# Subcommands
# ---------------------------------------------------------------------------


def cmd_simulate(args) -> int:
    cfg, out = _config_from_args(args)
    threads = _threads(args.threads)
    grid = cfg.build_grid()
    solver = cfg.build_solver()
    specs = cfg.build_monitors() or [MonitorSpec(k) for k in DEFAULT_MONITORS]
    v0 = cfg.build_initial(grid)
    figures = cfg.figures and not args.no_figures

    out.mkdir(parents=True, exist_ok=True)
    manifest = {
        "command": "simulate",
        "config": _json_safe(cfg.model_dump(mode="json")),
        "incomplete": True,
        "status": "running",
    }
    _write_manifest(out, manifest)
    set_workers(threads)
    snap_dir = out / "snapshots"
    if cfg.save_snapshots:
        snap_dir.mkdir(exist_ok=True)
    agg = MonitorAggregator(specs, threads=threads)

    def on_snapshot(state, step):
        if cfg.save_snapshots:
            write_snapshot(snap_dir / f"step_{step:07d}.cnf", state)
        agg.submit(state)

    code = EXIT_OK
    try:
        traj = integrate(v0, solver, on_snapshot=on_snapshot, keep_snapshots=False)
    except BlowUpSuspected as exc:
        traj = getattr(exc, "trajectory", None)
        manifest["status"] = "blow-up-suspected"
        manifest["blowup_step"] = exc.step
        code = EXIT_BLOWUP
    series = agg.finish()
    summary, extra = _series_summaries(series, specs) if code == EXIT_OK else ({}, {})
    series.update(extra)
    _write_series(out, series, figures)
    if traj is not None:
        manifest["steps"] = int(len(traj.step_times)) - 1
        manifest["cfl_advisories"] = traj.cfl_advisories
        manifest["energy_identity_residual"] = traj.energy_residual()
    manifest.update(summary)
    if code == EXIT_OK:
        manifest["status"] = "ok"
        manifest["incomplete"] = False
    _write_manifest(out, manifest)
    print(f"simulate: {manifest['status']}; energy identity residual {manifest.get('energy_identity_residual', float('nan')):.3e}; output in {out}")
    return code


def _read(path):
    try:
        return read_snapshot(path)
    except (OSError, ValidationError) as exc:
        raise ConfigurationError(f"cannot read snapshot {path}: {exc}") from exc


def _vector_norm(fields, spec: NormSpec) -> float:
    return math.sqrt(sum(norm(f, spec) ** 2 for f in fields))


def cmd_norms(args) -> int:
    specs = []
    for text in args.spec or []:
        try:
            specs.append((text, NormSpec.parse(text)))
        except ParameterError as exc:
            raise ConfigurationError(f"bad norm spec {text!r}: {exc}") from exc
    if not specs:
        raise ConfigurationError("norms needs at least one --spec")
    snap = _read(args.snapshot)
    fields = snap.fields
    if args.component is not None:
        if not 1 <= args.component <= len(fields):
            raise ConfigurationError(f"component must lie in 1..{len(fields)}")
        fields = (fields[args.component - 1],)
    for text, spec in specs:
        print(f"{text} {_vector_norm(fields, spec):.12g}")
    return EXIT_OK


def _snapshot_paths(items: Sequence[str]) -> list[Path]:
    paths: list[Path] = []
    for item in items:
        p = Path(item)
        if p.is_dir():
            paths.extend(sorted(p.glob("*.cnf")))
        elif p.is_file():
            paths.append(p)
        else:
            raise ConfigurationError(f"no such snapshot file or directory: {item}")
    if not paths:
        raise ConfigurationError("no snapshots found")
    return paths


def cmd_monitor(args) -> int:
    if args.config:
        cfg = load_config(args.config)
        specs = cfg.build_monitors()
        figures = cfg.figures and not args.no_figures
    else:
        specs, figures = [], not args.no_figures
    specs = specs or [MonitorSpec(k) for k in DEFAULT_MONITORS]
    if not args.out:
        raise ConfigurationError("monitor needs --out")
    paths = _snapshot_paths(args.snapshots)
    threads = _threads(args.threads)
    states = []
    for p in paths:
        states.append(_read(p).velocity())
    states.sort(key=lambda s: s.time)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    set_workers(threads)
    series = monitor_snapshots(states, specs, threads=threads)
    summary, extra = _series_summaries(series, specs)
    series.update(extra)
    _write_series(out, series, figures)
    manifest = {
        "command": "monitor",
        "snapshots": [p.name for p in paths],
        "monitors": [s.kind for s in specs],
        "incomplete": False,
        "status": "ok",
        **summary,
    }
    _write_manifest(out, manifest)
    print(f"monitor: {len(states)} snapshots, {len(series)} series written to {out}")
    return EXIT_OK


def cmd_verify(args) -> int:
    suite = args.suite
    ids = inequality_lab.SUITE_IDS if suite == "all" else (suite,)
    for lid in ids:
        if lid not in inequality_lab.SUITES:
            raise ConfigurationError(f"unknown suite id {lid!r}; known: all, {', '.join(inequality_lab.SUITE_IDS)}")
    if args.count is not None and args.count < 1:
        raise ConfigurationError("--count must be >= 1")
    if args.refine_count is not None and args.refine_count < 0:
        raise ConfigurationError("--refine-count must be >= 0")
    threads = _threads(args.threads)
    out = Path(args.out or "verify_reports")
    out.mkdir(parents=True, exist_ok=True)
    seed = 0 if args.seed is None else int(args.seed)
    count = inequality_lab.DEFAULT_COUNT if args.count is None else args.count
    refine = inequality_lab.DEFAULT_REFINE_COUNT if args.refine_count is None else args.refine_count
    failed = []
    for lid in ids:
        rep = inequality_lab.run_suite(lid, seed=seed, count=count, refine_count=refine, threads=threads)
        (out / f"{lid}.json").write_text(rep.to_json())
        if not args.no_figures:
            from .plotting import plot_report

            (out / "figures").mkdir(exist_ok=True)
            plot_report(rep, out / "figures" / f"{lid}.png")
        worst = max((c.refinement_change for c in rep.checks if not c.informational), default=0.0)
        print(
            f"{lid}: {'PASS' if rep.passed else 'FAIL'} checks={len(rep.checks)} "
            f"hard_violations={len(rep.hard_violations)} violations={len(rep.violations)} "
            f"max_refinement_change={worst:.3g}"
        )
        if not rep.passed:
            failed.append(lid)
    return EXIT_INVARIANT if failed else EXIT_OK


# ---------------------------------------------------------------------------
# Parser
# ---------------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="critnorm", description="Critical-norm toolkit for periodic Navier-Stokes flows.")
    parser.add_argument("-v", "--verbose", action="store_true", help="log progress to stderr")
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p, config_required: bool = False):
        p.add_argument("--config", required=config_required, help="YAML run configuration")
        p.add_argument("--seed", type=int, default=None, help="override the random seed")
        p.add_argument("--out", default=None, help="output directory")
        p.add_argument("--threads", type=int, default=None, help="worker threads (default: CRITNORM_THREADS or 1)")
        p.add_argument("--spec", action="append", default=None, help="norm spec such as 'htheta:theta=0.125' (repeatable)")
        p.add_argument("--no-figures", action="store_true", help="skip PNG figures")

    p = sub.add_parser("simulate", help="integrate a configured run and write snapshots, monitor CSVs and a manifest")
    common(p, config_required=True)
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("norms", help="evaluate norm specs on a snapshot file")
    p.add_argument("snapshot")
    p.add_argument("--component", type=int, default=None, help="1-based component; default combines all components in l^2")
    common(p)
    p.set_defaults(func=cmd_norms)

    p = sub.add_parser("monitor", help="recompute monitor series from stored snapshots")
    p.add_argument("snapshots", nargs="+", help="snapshot files or directories of *.cnf files")
    common(p)
    p.set_defaults(func=cmd_monitor)

    p = sub.add_parser("verify", help="run inequality suites ('all' or a lemma id)")
    p.add_argument("suite")
    p.add_argument("--count", type=int, default=None, help=f"corpus size at the base grid (default {inequality_lab.DEFAULT_COUNT})")
    p.add_argument("--refine-count", type=int, default=None, help=f"samples repeated on the refined grid (default {inequality_lab.DEFAULT_REFINE_COUNT})")
    common(p)
    p.set_defaults(func=cmd_verify)
    return parser


def main(argv: Sequence[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except (ConfigurationError, ParameterError) as exc:
        print(f"critnorm: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (ValidationError, ShapeError) as exc:
        print(f"critnorm: invariant violation: {exc}", file=sys.stderr)
        return EXIT_INVARIANT
    except CritnormError as exc:  # pragma: no cover - remaining toolkit errors
        print(f"critnorm: error: {exc}", file=sys.stderr)
        return EXIT_INVARIANT


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
