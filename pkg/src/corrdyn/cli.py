"""Batch command-line front end.

Usage: corrdyn <command> --config <file> [--seed N] [--out DIR]

Commands: degrees, orbits, ds-measure, entropy, pressure, ruelle,
variational.  Configuration is a JSON document; every run writes a
deterministic report.json plus flat CSV tables into the output
directory, with wall-clock timings isolated in metadata.json so that
identical configs and seeds reproduce byte-identical result files.
"""

from __future__ import annotations

import argparse
import csv
import json
import math
import os
import sys
import time
from datetime import datetime, timezone
from pathlib import Path

import numpy as np

from . import __version__
from .correspondence import Correspondence, expansivity_probe, load_correspondence
from .errors import (ConfigMismatch, CorrdynError, DegenerateStart,
                     DegreeConditionError, InvalidComponent, NonConvergence,
                     NotConverged, ParseError, PreimageOutsideSupport,
                     ScheduleEmpty, TrajectoryEscape)
from .functions import named_function
from .grid import SphereGrid
from .measures import (PathMeasure, SpherePartition, VariationalEntry,
                       check_shift_invariance, empirical_invariant_measure,
                       pushforward, variational_check)
from .paths import ForwardPath, enumerate_backward_paths, enumerate_forward_paths
from .pressure import (circle_start_sampler, entropy_estimate,
                       grid_start_sampler, pressure_estimate)
from .pullback import check_backward_invariance, ds_support, pullback_iterate
from .sphere import SpherePoint, sph_dist
from .transfer import (ActiveGrid, GridFunction, TransferKernel,
                       adjoint_fixed_point, convergence_check, holder_norm,
                       normalize, power_iteration)

EXIT_CONFIG = 2
EXIT_PRECONDITION = 3
EXIT_NUMERICAL = 4
EXIT_MISMATCH = 5

_DEFAULTS = {
    "n_cells": 2000,
    "seed": 0,
    "workers": 1,
}


class RunConfig:
    """Effective configuration: file values over defaults, CLI overrides."""

    def __init__(self, raw: dict, seed=None, out=None, base_dir: Path | None = None):
        self.raw = dict(raw)
        self.base_dir = base_dir or Path.cwd()
        merged = dict(_DEFAULTS)
        merged.update(raw)
        if seed is not None:
            merged["seed"] = seed
        if out is not None:
            merged["out"] = str(out)
        env_workers = os.environ.get("CORRDYN_WORKERS")
        if env_workers:
            merged["workers"] = int(env_workers)
        if "correspondence" not in merged:
            raise ConfigMismatch("config is missing the correspondence path")
        merged.setdefault("out", "corrdyn-out")
        self.effective = merged

    def __getitem__(self, key):
        return self.effective[key]

    def section(self, name: str) -> dict:
        value = self.effective.get(name, {})
        if not isinstance(value, dict):
            raise ConfigMismatch(f"config section {name!r} must be an object")
        return value

    def load_correspondence(self) -> Correspondence:
        path = Path(self.effective["correspondence"])
        if not path.is_absolute():
            path = self.base_dir / path
        return load_correspondence(path.read_text())

    def grid(self) -> SphereGrid:
        return SphereGrid(int(self.effective["n_cells"]))

    def out_dir(self) -> Path:
        path = Path(self.effective["out"])
        path.mkdir(parents=True, exist_ok=True)
        return path


def _point_from_config(value) -> SpherePoint:
    if value == "inf":
        return SpherePoint.infinity()
    if isinstance(value, (int, float)):
        return SpherePoint.from_complex(complex(value, 0.0))
    if isinstance(value, (list, tuple)) and len(value) == 2:
        return SpherePoint.from_complex(complex(value[0], value[1]))
    raise ConfigMismatch(f"cannot read a sphere point from {value!r}")


def _point_angles(p: SpherePoint):
    x, y, z = p.unit_vector()
    theta = math.acos(max(-1.0, min(1.0, z)))
    phi = math.atan2(y, x) % (2.0 * math.pi)
    return theta, phi


def _write_csv(path: Path, header, rows):
    with path.open("w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(header)
        for row in rows:
            writer.writerow([repr(v) if isinstance(v, float) else v for v in row])


def _write_measure_csv(path: Path, measure):
    rows = []
    for idx in np.nonzero(measure.weights)[0]:
        theta, phi = measure.grid.cell_center_angles(int(idx))
        rows.append((int(idx), float(theta), float(phi), float(measure.weights[idx])))
    _write_csv(path, ("cell", "theta", "phi", "weight"), rows)


def _write_paths_csv(path: Path, paths):
    rows = []
    for pid, p in enumerate(paths):
        for step, point in enumerate(p.points):
            theta, phi = _point_angles(point)
            symbol = p.symbols[step - 1] if step >= 1 else ""
            branch = p.branches[step - 1] if step >= 1 else ""
            rows.append((pid, step, float(theta), float(phi), symbol, branch))
    _write_csv(path, ("path", "step", "theta", "phi", "symbol", "branch"), rows)


def _write_cylinders_csv(path: Path, mu: PathMeasure):
    rows = []
    for key in sorted(mu.cylinders):
        word = "|".join(f"{c}:{s}" for c, s in key)
        rows.append((word, float(mu.cylinders[key])))
    _write_csv(path, ("word", "weight"), rows)


# ---------------------------------------------------------------------------
# Commands
# ---------------------------------------------------------------------------


def cmd_degrees(config: RunConfig) -> dict:
    corr = config.load_correspondence()
    d_fwd, d_top, per = corr.degrees()
    report = {
        "components": corr.n_components,
        "d_fwd": d_fwd,
        "d_top": d_top,
        "per_component": [
            {"lambda": lam, "delta": delta, "multiplicity": m}
            for lam, delta, m in per
        ],
    }
    out = config.out_dir()
    _write_csv(out / "degrees.csv",
               ("component", "lambda", "delta", "multiplicity"),
               [(t + 1, lam, delta, m) for t, (lam, delta, m) in enumerate(per)])
    return report


def _cmd_orbits(config: RunConfig, corr: Correspondence) -> dict:
    section = config.section("orbits")
    start = _point_from_config(section.get("start", [0.5, 0.3]))
    depth = int(section.get("depth", 6))
    cap = int(section.get("cap", 512))
    direction = section.get("direction", "forward")
    seed = config["seed"]
    if direction == "forward":
        paths, truncated = enumerate_forward_paths(corr, start, depth, cap=cap,
                                                   seed=seed)
    elif direction == "backward":
        paths, truncated = enumerate_backward_paths(corr, start, depth, cap=cap,
                                                    seed=seed)
    else:
        raise ConfigMismatch(f"unknown orbit direction {direction!r}")
    _write_paths_csv(config.out_dir() / "paths.csv", paths)
    return {"direction": direction, "depth": depth, "count": len(paths),
            "truncated": truncated}


def _cmd_ds_measure(config: RunConfig, corr: Correspondence) -> dict:
    section = config.section("ds_measure")
    grid = config.grid()
    start = _point_from_config(section.get("start", [0.5, 0.3]))
    levels = pullback_iterate(
        corr, start, n=int(section.get("levels", 12)),
        cap=int(section.get("cap", 8192)), seed=config["seed"], grid=grid)
    support = ds_support(levels, threshold=float(section.get("threshold", 0.5)),
                         cert_bound=float(section.get("cert_bound", 0.05)))
    invariance = check_backward_invariance(corr, support.cells, grid,
                                           samples=int(section.get("samples", 64)),
                                           seed=config["seed"])
    out = config.out_dir()
    _write_measure_csv(out / "final_level.csv", levels[-1])
    _write_csv(out / "support_cells.csv", ("cell",),
               [(c,) for c in sorted(support.cells)])
    return {
        "levels": len(levels) - 1,
        "certificate": support.certificate,
        "support_cells": len(support.cells),
        "core_cells": len(support.core),
        "backward_invariance": {
            "violations": invariance.violations,
            "total": invariance.total,
            "passed": invariance.passed,
        },
    }


def _starts_config(section: dict, grid: SphereGrid):
    mode = section.get("starts", "grid")
    if mode == "grid":
        return grid_start_sampler(grid)
    if mode == "circle":
        return circle_start_sampler(float(section.get("radius", 1.0)))
    raise ConfigMismatch(f"unknown start sampler {mode!r}")


def _pressure_like(config: RunConfig, corr: Correspondence, name: str) -> dict:
    section = config.section(name)
    grid = config.grid()
    schedule = [tuple(row) for row in section.get("schedule", [[4, 0.05], [8, 0.05]])]
    sampler = _starts_config(section, grid)
    common = dict(schedule=schedule,
                  start_points=int(section.get("start_points", 64)),
                  seed=config["seed"], start_sampler=sampler,
                  cap=int(section.get("cap", 4096)), grid=grid)
    if name == "pressure":
        f_label = section.get("f", "zero")
        report = pressure_estimate(corr, named_function(f_label),
                                   f_label=f_label, **common)
    else:
        report = entropy_estimate(corr, **common)
    rows = [(r.n, r.eps, r.sep_value, r.span_value, r.n_paths, r.n_separated,
             r.n_spanning, int(r.truncated)) for r in report.rows]
    _write_csv(config.out_dir() / f"{name}_rows.csv",
               ("n", "eps", "sep_sum", "span_sum", "paths", "sep_count",
                "span_count", "truncated"), rows)
    return {
        "pressure": report.pressure,
        "f": report.f_label,
        "richardson_slope": report.richardson_slope,
        "extrapolated": report.extrapolated,
        "rows": len(report.rows),
        "truncated": report.truncated,
        "start_points": report.n_starts,
    }


def _ruelle_objects(config: RunConfig, corr: Correspondence):
    section = config.section("ruelle")
    grid = config.grid()
    pb = section.get("pullback", {})
    start = _point_from_config(pb.get("start", [0.5, 0.3]))
    levels = pullback_iterate(corr, start, n=int(pb.get("levels", 10)),
                              cap=int(pb.get("cap", 4096)),
                              seed=config["seed"], grid=grid)
    support = ds_support(levels, threshold=float(pb.get("threshold", 0.5)),
                         cert_bound=float(pb.get("cert_bound", 0.05)))
    active = ActiveGrid(grid, support.core)
    kernel = TransferKernel(corr, active)
    f_label = section.get("f", "zero")
    f = GridFunction.from_callable(active, named_function(f_label))
    return section, grid, active, kernel, f, f_label


def _cmd_ruelle(config: RunConfig, corr: Correspondence) -> dict:
    section, grid, active, kernel, f, f_label = _ruelle_objects(config, corr)
    tol = float(section.get("tol", 1e-10))
    probe_pairs = []
    rng = np.random.default_rng(config["seed"])
    for _ in range(int(section.get("probe_pairs", 50))):
        idx = int(rng.integers(active.n_active))
        center = active.centers[idx]
        other = min((c for c in active.centers if c is not center),
                    key=lambda c: sph_dist(center, c))
        probe_pairs.append((center, other))
    try:
        probe = expansivity_probe(corr, probe_pairs,
                                  samples=len(probe_pairs), seed=config["seed"],
                                  probe_scale=1.0)
    except CorrdynError:
        probe = None
    spectral = power_iteration(corr, f, tol=tol,
                               max_iter=int(section.get("max_iter", 2000)),
                               seed=config["seed"], kernel=kernel,
                               expansivity=probe)
    weights = normalize(f, spectral, kernel)
    adjoint = adjoint_fixed_point(corr, f, spectral, tol=tol,
                                  kernel=kernel, seed=config["seed"],
                                  depth=int(section.get("depth", 2)))
    g_label = section.get("convergence_g", "re")
    g = GridFunction.from_callable(active, named_function(g_label))
    conv = convergence_check(corr, f, g, spectral, adjoint.nu,
                             n_max=int(section.get("n_max", 40)), kernel=kernel)
    invariance = check_shift_invariance(adjoint.mu0, tol=10.0 * tol)
    lam_probe = probe.lambda_estimate if probe and probe.is_expansive else 2.0
    holder = holder_norm(f, lam=min(max(lam_probe, 1.5), 4.0),
                         k_max=int(section.get("holder_scales", 10)))

    out = config.out_dir()
    rows = []
    for pos, cell in enumerate(active.cells):
        theta, phi = grid.cell_center_angles(cell)
        rows.append((cell, float(theta), float(phi),
                     float(spectral.h.values[pos]),
                     float(adjoint.nu.weights[cell])))
    _write_csv(out / "spectral.csv", ("cell", "theta", "phi", "h", "nu"), rows)
    _write_csv(out / "convergence.csv", ("n", "error"),
               list(enumerate(conv.errors, start=1)))
    _write_cylinders_csv(out / "mu0_cylinders.csv", adjoint.mu0)
    return {
        "f": f_label,
        "lambda": spectral.lam,
        "iterations": spectral.iterations,
        "residual": spectral.residual,
        "gap_estimate": spectral.gap_estimate,
        "row_sum_error": float(np.abs(weights.row_sums - 1.0).max()),
        "adjoint_unique": adjoint.unique,
        "invariance_defect": invariance.defect,
        "convergence_rate": conv.rate,
        "final_error": conv.errors[-1],
        "expansive": None if probe is None else probe.is_expansive,
        "holder_member": holder.is_member,
        "holder_norm": holder.alpha_norm,
        "active_cells": active.n_active,
    }


def _variational_entries(config: RunConfig, corr: Correspondence,
                         grid: SphereGrid, section: dict):
    entries = []
    depth = int(section.get("depth", 4))
    # Dirac path measures at the fixed points of every component.
    for point, _ in corr.fixed_points():
        t = min(range(1, corr.n_components + 1),
                key=lambda t: corr.incidence_residual(point, point, t))
        if corr.incidence_residual(point, point, t) > 1e-8:
            continue
        fiber = corr.forward_images(point)
        branch = min((b for b in fiber.branches if b.component == t),
                     key=lambda b: sph_dist(b.point, point), default=None)
        if branch is None or sph_dist(branch.point, point) > 1e-6:
            continue
        path = ForwardPath((point,) * (depth + 1), (t,) * depth,
                           (branch.branch_index,) * depth)
        mu = PathMeasure.from_paths(grid, [path])
        label = "fixed_inf" if point.is_infinity else f"fixed_{point.to_complex():.3f}"
        entries.append(VariationalEntry(label, pushforward(mu, 0), (mu,)))
    # Empirical invariant measures from random trajectories.
    for k in range(int(section.get("empirical", 2))):
        mu = empirical_invariant_measure(
            corr, _point_from_config(section.get("start", [0.5, 0.3])),
            n_burn=int(section.get("n_burn", 50)),
            n_keep=int(section.get("n_keep", 5000)),
            depth=depth, seed=config["seed"] + k, grid=grid)
        entries.append(VariationalEntry(f"empirical_{k}", pushforward(mu, 0), (mu,)))
    return entries


def _cmd_variational(config: RunConfig, corr: Correspondence) -> dict:
    section = config.section("variational")
    grid = config.grid()
    f_label = section.get("f", "zero")
    report_path = section.get("pressure_report")
    if report_path is not None:
        stored = json.loads(Path(report_path).read_text())
        stored_f = stored.get("results", {}).get("f")
        if stored_f != f_label:
            raise ConfigMismatch(
                f"pressure report was computed with f={stored_f!r}, "
                f"variational config uses f={f_label!r}")
        pressure_value = float(stored["results"]["pressure"])
    else:
        sub = dict(section.get("pressure", {}))
        sub.setdefault("f", f_label)
        inner = RunConfig({**config.effective, "pressure": sub},
                          base_dir=config.base_dir)
        pressure_value = _pressure_like(inner, corr, "pressure")["pressure"]

    entries = _variational_entries(config, corr, grid, section)
    partitions = [SpherePartition.trivial(grid),
                  SpherePartition.sectors(grid, 2, 4)]
    report = variational_check(corr, named_function(f_label), entries,
                               pressure_value, partitions=partitions,
                               n_max=int(section.get("n_max", 4)),
                               slack=float(section.get("slack", 0.05)))
    rows = [(r.label, r.entropy, r.integral, r.value, r.gap, int(r.within))
            for r in report.rows]
    _write_csv(config.out_dir() / "variational.csv",
               ("label", "entropy", "integral", "value", "gap", "within"), rows)
    return {
        "f": f_label,
        "pressure": report.pressure,
        "rows": len(report.rows),
        "all_within": report.all_within,
        "best_value": report.best_value,
        "best_gap": report.best_gap,
    }


_PIPELINES = {
    "orbits": _cmd_orbits,
    "ds-measure": _cmd_ds_measure,
    "entropy": lambda cfg, corr: _pressure_like(cfg, corr, "entropy"),
    "pressure": lambda cfg, corr: _pressure_like(cfg, corr, "pressure"),
    "ruelle": _cmd_ruelle,
    "variational": _cmd_variational,
}


def cmd_pipeline(config: RunConfig, command: str) -> dict:
    if command not in _PIPELINES:
        raise ConfigMismatch(f"unknown command {command!r}")
    corr = config.load_correspondence()
    return _PIPELINES[command](config, corr)


# ---------------------------------------------------------------------------
# Entry point
# ---------------------------------------------------------------------------


def _exit_code(err: Exception) -> int:
    if isinstance(err, ConfigMismatch):
        return EXIT_MISMATCH
    if isinstance(err, (ParseError, InvalidComponent)):
        return EXIT_CONFIG
    if isinstance(err, (ScheduleEmpty, DegreeConditionError, ValueError)):
        return EXIT_PRECONDITION
    if isinstance(err, (NonConvergence, NotConverged, DegenerateStart,
                        TrajectoryEscape, PreimageOutsideSupport)):
        return EXIT_NUMERICAL
    return 1


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        prog="corrdyn",
        description="Batch dynamics of holomorphic correspondences")
    parser.add_argument("command",
                        choices=["degrees", "orbits", "ds-measure", "entropy",
                                 "pressure", "ruelle", "variational"])
    parser.add_argument("--config", required=True, help="JSON configuration file")
    parser.add_argument("--seed", type=int, default=None,
                        help="override the config seed")
    parser.add_argument("--out", default=None, help="output directory")
    args = parser.parse_args(argv)

    started = time.time()
    try:
        config_path = Path(args.config)
        raw = json.loads(config_path.read_text())
        config = RunConfig(raw, seed=args.seed, out=args.out,
                           base_dir=config_path.resolve().parent)
        if args.command == "degrees":
            results = cmd_degrees(config)
        else:
            results = cmd_pipeline(config, args.command)
    except json.JSONDecodeError as err:
        print(f"corrdyn: config parse failure: {err}", file=sys.stderr)
        return EXIT_CONFIG
    except OSError as err:
        print(f"corrdyn: cannot read input: {err}", file=sys.stderr)
        return EXIT_CONFIG
    except CorrdynError as err:
        print(f"corrdyn: {type(err).__name__}: {err}", file=sys.stderr)
        return _exit_code(err)
    except ValueError as err:
        print(f"corrdyn: ValueError: {err}", file=sys.stderr)
        return EXIT_PRECONDITION

    elapsed = time.time() - started
    out = config.out_dir()
    report = {
        "command": args.command,
        "version": __version__,
        "config": config.effective,
        "results": results,
    }
    (out / "report.json").write_text(json.dumps(report, sort_keys=True, indent=2) + "\n")
    metadata = {
        "started": datetime.fromtimestamp(started, timezone.utc).isoformat(),
        "wall_seconds": elapsed,
    }
    (out / "metadata.json").write_text(json.dumps(metadata, sort_keys=True, indent=2) + "\n")
    print(json.dumps({"command": args.command, **results}, sort_keys=True))
    return 0


if __name__ == "__main__":
    sys.exit(main())
