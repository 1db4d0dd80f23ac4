"""Batch experiment runner and service entry points.

Subcommands: `run` (config-driven sweep of relocation runs, CSV/JSON/PNG
artifacts plus a per-cell summary), `render` (one frame with a ground-truth
sidecar), `serve` (HTTP session service), `sweep-report` (rebuild the summary
from artifacts on disk).
"""

from __future__ import annotations

import json
import math
import statistics
import sys
from concurrent.futures import ThreadPoolExecutor
from dataclasses import replace
from itertools import product
from pathlib import Path

import click
import numpy as np

from .controller import (
    SessionConfig,
    Status,
    TrajectoryRow,
    read_trajectory_csv,
    run_to_termination,
    save_report,
    start_session,
    write_trajectory_csv,
)
from .core import make_rng
from .imgio import write_pgm16, write_png8
from .navigation import draw_ball_png, simulate_bisection
from .scene import (
    PRESETS,
    LightSourceSpec,
    NoiseSpec,
    SceneSpec,
    render_source,
)

EXIT_OK = 0
EXIT_RUN_FAILED = 1
EXIT_BAD_CONFIG = 2

SWEEP_AXES = ("mu", "ambiguity_beta_deg", "pixel_sigma", "preset")


class ConfigError(Exception):
    """Invalid experiment configuration; message is user-facing."""


def _load_json(path: Path) -> dict:
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as err:
        raise ConfigError(f"{path}: {err.strerror}") from err
    try:
        return json.loads(text)
    except json.JSONDecodeError as err:
        raise ConfigError(f"{path}:{err.lineno}:{err.colno}: {err.msg}") from err


def _validate_base(doc: dict) -> SessionConfig:
    preset = doc.get("scene", {}).get("preset")
    if preset is not None and preset not in PRESETS:
        raise ConfigError(f"scene.preset: unknown preset {preset!r}; choose from {PRESETS}")
    try:
        return SessionConfig.from_json(doc)
    except (ValueError, KeyError, TypeError) as err:
        raise ConfigError(f"config: {err}") from err


def expand_sweep(doc: dict) -> list[dict]:
    """Cross product of the sweep axes as per-run override dicts."""
    sweep = doc.get("sweep", {})
    unknown = set(sweep) - set(SWEEP_AXES)
    if unknown:
        raise ConfigError(f"sweep: unknown axes {sorted(unknown)}; supported {SWEEP_AXES}")
    axes = [(k, sweep[k]) for k in SWEEP_AXES if k in sweep]
    for name, values in axes:
        if not isinstance(values, list):
            raise ConfigError(f"sweep.{name}: expected a list")
    if not axes:
        return [{}]
    cells = []
    for combo in product(*(vals for _, vals in axes)):
        cells.append({name: value for (name, _), value in zip(axes, combo)})
    return cells


def _cell_config(base: SessionConfig, cell: dict, repeat: int) -> SessionConfig:
    cfg = base
    if "mu" in cell:
        cfg = replace(cfg, mu=float(cell["mu"]))
    if "ambiguity_beta_deg" in cell:
        cfg = replace(cfg, ambiguity_beta_deg=float(cell["ambiguity_beta_deg"]))
    if "pixel_sigma" in cell:
        cfg = replace(cfg, noise=NoiseSpec(float(cell["pixel_sigma"]), cfg.noise.actuator_sigma))
    if "preset" in cell:
        if cell["preset"] not in PRESETS:
            raise ConfigError(f"sweep.preset: unknown preset {cell['preset']!r}")
        cfg = replace(cfg, scene=replace(cfg.scene, preset=cell["preset"]))
    return replace(cfg, seed=cfg.seed + repeat)


def _cell_key(cell: dict) -> str:
    return ",".join(f"{k}={cell[k]}" for k in SWEEP_AXES if k in cell) or "base"


def _run_label(cell: dict, repeat: int) -> str:
    return f"{_cell_key(cell)},rep={repeat}"


def _pose_sim_rows(trace) -> list[TrajectoryRow]:
    rows = []
    for i in range(trace.m_history.shape[0]):
        pose = trace.poses[min(i, trace.poses.shape[0] - 1)]
        rows.append(
            TrajectoryRow(
                t=i + 1,
                r=float(pose[0]),
                theta_deg=float(pose[1]),
                phi_deg=float(pose[2]),
                lambda_r=float(trace.lam_history[i, 0]),
                lambda_theta=float(trace.lam_history[i, 1]),
                lambda_phi=float(trace.lam_history[i, 2]),
                m_r=int(trace.m_history[i, 0]),
                m_theta=int(trace.m_history[i, 1]),
                m_phi=int(trace.m_history[i, 2]),
                goodness=math.nan,
                mse=math.nan,
                psnr=math.nan,
                ssim=math.nan,
            )
        )
    return rows


def _run_one(doc: dict, cfg: SessionConfig, run_dir: Path) -> dict:
    run_dir.mkdir(parents=True, exist_ok=True)
    mode = doc.get("mode", "rendered")
    if mode == "pose_sim":
        target = np.asarray(doc.get("target", [60.0, -70.0, 80.0]), dtype=float)
        init = np.asarray(doc.get("init", [0.0, 0.0, 0.0]), dtype=float)
        lam0 = np.asarray(list(cfg.lambda0), dtype=float)
        trace = simulate_bisection(target, init, lam0, cfg.mu, max_iter=cfg.max_iter)
        rows = _pose_sim_rows(trace)
        write_trajectory_csv(rows, run_dir / "trajectory.csv")
        result = {
            "status": "converged" if trace.converged else "max_iter",
            "iterations": trace.iterations,
            "best_goodness": math.nan,
            "final_metrics": None,
            "mode": "pose_sim",
        }
        (run_dir / "report.json").write_text(json.dumps(result, indent=2), encoding="utf-8")
    else:
        session = start_session(cfg.scene, cfg.source_kind, cfg.ref_pose, cfg.init_pose, cfg)
        report = run_to_termination(session)
        write_trajectory_csv(report.trajectory, run_dir / "trajectory.csv")
        save_report(report, run_dir / "report.json")
        draw_ball_png(session.last_ball, run_dir / "ball.png")
        if session.best_image is not None:
            write_pgm16(session.best_image, run_dir / "best.pgm")
        fm = report.final_metrics
        result = {
            "status": report.status.value,
            "iterations": report.iterations,
            "best_goodness": report.best_goodness,
            "final_metrics": fm.to_json() if fm else None,
            "mode": "rendered",
        }
    (run_dir / "config.json").write_text(json.dumps(cfg.to_json(), indent=2), encoding="utf-8")
    return result


def summarize(results: list[dict]) -> dict:
    """Per-cell mean and variance of iteration count and accuracy metrics."""
    cells: dict[str, list[dict]] = {}
    for r in results:
        cells.setdefault(r["cell"], []).append(r)

    def agg(values):
        values = [v for v in values if v is not None and not (isinstance(v, float) and math.isnan(v))]
        if not values:
            return {"mean": None, "variance": None, "n": 0}
        return {
            "mean": statistics.fmean(values),
            "variance": statistics.pvariance(values) if len(values) > 1 else 0.0,
            "n": len(values),
        }

    out = {}
    for cell, rs in sorted(cells.items()):
        metrics = {
            "iterations": agg([r["iterations"] for r in rs]),
            "best_goodness": agg([r["best_goodness"] for r in rs]),
            "converged_fraction": agg(
                [1.0 if r["status"] == Status.CONVERGED.value else 0.0 for r in rs]
            ),
        }
        for name in ("mse", "psnr", "ssim", "ms_ssim"):
            metrics[name] = agg(
                [(r.get("final_metrics") or {}).get(name) for r in rs]
            )
        out[cell] = metrics
    return out


def _write_summary(summary: dict, out_dir: Path) -> None:
    (out_dir / "summary.json").write_text(json.dumps(summary, indent=2), encoding="utf-8")
    lines = ["cell,metric,mean,variance,n"]
    for cell, metrics in summary.items():
        for name, a in metrics.items():
            lines.append(f"{cell},{name},{a['mean']},{a['variance']},{a['n']}")
    (out_dir / "summary.csv").write_text("\n".join(lines) + "\n", encoding="utf-8")


def run_experiment(config_path: Path, out_dir: Path, seed: int | None, parallel: int) -> int:
    doc = _load_json(config_path)
    if seed is not None:
        doc["seed"] = seed
    base = _validate_base(doc)
    cells = expand_sweep(doc)
    repeats = int(doc.get("repeats", 1))
    jobs = []
    for cell in cells:
        for rep in range(repeats):
            jobs.append((cell, rep))
    click.echo(f"sweep: {len(cells)} cell(s) x {repeats} repeat(s) = {len(jobs)} run(s)")
    out_dir.mkdir(parents=True, exist_ok=True)
    (out_dir / "config.json").write_text(json.dumps(doc, indent=2), encoding="utf-8")

    def execute(idx_job):
        idx, (cell, rep) = idx_job
        cfg = _cell_config(base, cell, rep)
        label = _run_label(cell, rep)
        run_dir = out_dir / "runs" / f"{idx:03d}_{label.replace(',', '_').replace('=', '-')}"
        result = _run_one(doc, cfg, run_dir)
        result["cell"] = _cell_key(cell)
        result["run_dir"] = str(run_dir.relative_to(out_dir))
        click.echo(
            f"  [{idx + 1}/{len(jobs)}] {label}: {result['status']} in {result['iterations']} it"
        )
        return result

    def safe_execute(item):
        try:
            return execute(item), None
        except Exception as err:
            return None, err

    if parallel > 1 and len(jobs) > 1:
        with ThreadPoolExecutor(max_workers=parallel) as pool:
            outcomes = list(pool.map(safe_execute, enumerate(jobs)))
    else:
        outcomes = [safe_execute(item) for item in enumerate(jobs)]

    results: list[dict] = []
    failures = 0
    for res, err in outcomes:
        if err is not None:
            failures += 1
            click.echo(f"run failed: {err}", err=True)
        else:
            results.append(res)

    summary = summarize(results)
    _write_summary(summary, out_dir)
    (out_dir / "results.json").write_text(json.dumps(results, indent=2), encoding="utf-8")
    return EXIT_OK if failures == 0 else EXIT_RUN_FAILED


def rebuild_summary(out_dir: Path) -> dict:
    """Recompute the summary from per-run artifacts (reports + trajectories)."""
    results = []
    results_doc = _load_json(out_dir / "results.json")
    for rec in results_doc:
        run_dir = out_dir / rec["run_dir"]
        report = _load_json(run_dir / "report.json")
        rows = read_trajectory_csv(run_dir / "trajectory.csv")
        iterations = rows[-1].t if rows else 0
        if iterations != report["iterations"]:
            raise ConfigError(
                f"{run_dir}: trajectory rows ({iterations}) disagree with report "
                f"({report['iterations']})"
            )
        results.append(
            {
                "cell": rec["cell"],
                "status": report["status"],
                "iterations": iterations,
                "best_goodness": report["best_goodness"],
                "final_metrics": report.get("final_metrics"),
            }
        )
    return summarize(results)


@click.group()
def main() -> None:
    """Light-source relocation experiments and services."""


@main.command("run")
@click.option("--config", "config_path", required=True, type=click.Path(path_type=Path))
@click.option("--out", "out_dir", required=True, type=click.Path(path_type=Path))
@click.option("--seed", type=int, default=None, help="override the config seed")
@click.option("--parallel", type=int, default=1, show_default=True)
def run_cmd(config_path: Path, out_dir: Path, seed: int | None, parallel: int) -> None:
    """Execute a (possibly swept) batch of relocation runs."""
    try:
        code = run_experiment(config_path, out_dir, seed, parallel)
    except ConfigError as err:
        click.echo(str(err), err=True)
        sys.exit(EXIT_BAD_CONFIG)
    sys.exit(code)


@main.command("render")
@click.option("--config", "config_path", required=True, type=click.Path(path_type=Path))
@click.option("--out", "out_path", required=True, type=click.Path(path_type=Path))
@click.option("--seed", type=int, default=None)
def render_cmd(config_path: Path, out_path: Path, seed: int | None) -> None:
    """Render one frame to PNG + 16-bit PGM with a ground-truth JSON sidecar."""
    try:
        doc = _load_json(config_path)
        scene_doc = doc.get("scene", {})
        if scene_doc.get("preset") not in PRESETS:
            raise ConfigError(f"scene.preset: unknown preset {scene_doc.get('preset')!r}")
        spec = SceneSpec.from_json(scene_doc)
        source = LightSourceSpec.from_json(doc["source"])
        noise = NoiseSpec.from_json(doc.get("noise", {}))
        run_seed = seed if seed is not None else doc.get("seed", 0)
    except (KeyError, ValueError) as err:
        click.echo(f"config: {err}", err=True)
        sys.exit(EXIT_BAD_CONFIG)
    except ConfigError as err:
        click.echo(str(err), err=True)
        sys.exit(EXIT_BAD_CONFIG)
    scene = spec.make()
    rng = make_rng(run_seed)
    img = render_source(scene, source, noise=noise, rng=rng)
    out_path.parent.mkdir(parents=True, exist_ok=True)
    png_path = out_path if out_path.suffix == ".png" else out_path.with_suffix(".png")
    pgm_path = png_path.with_suffix(".pgm")
    peak = write_png8(img, png_path)
    write_pgm16(img, pgm_path, peak=peak)
    sidecar = {
        "scene": spec.to_json(),
        "source": source.to_json(),
        "apl_vector": [float(v) for v in source.apl_vector().vec],
        "snsl_extent_ratio": source.snsl_extent_ratio,
        "noise": noise.to_json(),
        "seed": run_seed,
        "peak": peak,
    }
    png_path.with_suffix(".json").write_text(json.dumps(sidecar, indent=2), encoding="utf-8")
    click.echo(f"wrote {png_path}, {pgm_path}, {png_path.with_suffix('.json')}")
    sys.exit(EXIT_OK)


@main.command("serve")
@click.option("--config", "config_path", type=click.Path(path_type=Path), default=None)
@click.option("--port", type=int, default=8321, show_default=True)
@click.option("--host", default="127.0.0.1", show_default=True)
def serve_cmd(config_path: Path | None, port: int, host: str) -> None:
    """Start the HTTP/SSE session service."""
    import uvicorn

    from .service import create_app

    base = None
    if config_path is not None:
        try:
            base = _validate_base(_load_json(config_path))
        except ConfigError as err:
            click.echo(str(err), err=True)
            sys.exit(EXIT_BAD_CONFIG)
    uvicorn.run(create_app(base), host=host, port=port, log_level="warning")


@main.command("sweep-report")
@click.option("--out", "out_dir", required=True, type=click.Path(path_type=Path))
def sweep_report_cmd(out_dir: Path) -> None:
    """Rebuild and print the per-cell summary from artifacts on disk."""
    try:
        summary = rebuild_summary(out_dir)
    except ConfigError as err:
        click.echo(str(err), err=True)
        sys.exit(EXIT_BAD_CONFIG)
    _write_summary(summary, out_dir)
    for cell, metrics in summary.items():
        it = metrics["iterations"]
        g = metrics["best_goodness"]
        click.echo(
            f"{cell}: iterations {it['mean']} +- {it['variance']} (n={it['n']}), "
            f"goodness {g['mean']} +- {g['variance']}"
        )
    sys.exit(EXIT_OK)


if __name__ == "__main__":
    main()
