"""Experiment runner for the source-recovery benchmark.

Every run is one (manifold, chart, method, draw, seed) cell.  A draw fixes
the random g-orthonormal frame and a seed fixes the source sample, so the
data stream depends only on (master seed, manifold, draw, seed).  All charts
of a manifold therefore see the same sources, and RICA (which always works
in the intrinsic chart) reports identical numbers on every chart row.
Baseline randomness is keyed by chart and method on top of that.
"""
from __future__ import annotations

import csv
import io
import json
import math
import os
import zlib
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field, replace

import numpy as np

from . import __version__, _kernels
from .baselines.fastica import FastIcaConfig, fastica_fit
from .baselines.mobius import TrainConfig, nlica_fit
from .core import (
    disentanglement_tensor,
    disentanglement_tensor_shortcut,
    rica_diagonalize,
    rica_recover,
)
from .errors import ConfigError, RicaError
from .manifolds import KINDS, ManifoldSpec, base_point, intrinsic_metric, parse_chart, table_rows
from .metrics import mcc, total_correlation
from .sources import (
    SourceConfig,
    chart_observations,
    generate,
    ground_truth_spectrum,
    latent_hessian,
    random_g_frame,
    tangent_source_density,
)

__all__ = [
    "METHODS",
    "RS_GRID",
    "B_GRID",
    "CSV_HEADER",
    "PROFILES",
    "ExperimentConfig",
    "RunRecord",
    "CellResult",
    "load_config",
    "run_table",
    "run_eigengap_sweep",
    "run_base_scale_sweep",
    "aggregate",
    "emit_outputs",
    "results_csv",
]

METHODS = ("rica", "fastica", "nlica")
RS_GRID = (0.999, 0.99, 0.97, 0.95, 0.9, 0.85, 0.75, 0.6)
B_GRID = (0.05, 0.1, 0.2, 0.35, 0.5, 0.75, 1.0, 1.5, 2.0)
CSV_HEADER = (
    "manifold", "chart", "method", "n", "N", "b", "r_s", "seed", "draw",
    "mcc", "tc", "frac_out_of_radius", "warnings",
)
RADIUS_WARN_FRACTION = 0.01

PROFILES = {
    "desk": dict(n_target=8, N=5000, seeds=3, draws=3, nlica_steps=3000),
    "paper-scale": dict(n_target=32, N=10000, seeds=5, draws=5, nlica_steps=30000),
}


@dataclass(frozen=True)
class ExperimentConfig:
    """Experiment grid and scale.

    ``charts`` lists ``manifold:chart`` pairs; empty means every chart of
    every selected manifold, in table order.
    """

    manifolds: tuple = KINDS
    charts: tuple = ()
    n_target: int = 8
    N: int = 5000
    b: float = 0.3
    r_s: float = 0.85
    seeds: int = 3
    draws: int = 3
    methods: tuple = METHODS
    nlica_steps: int = 3000
    nlica_batch: int = 128
    nlica_lr: float = 1e-3
    nlica_weight_decay: float = 1e-4
    nlica_layers: int = 8
    fastica_max_iters: int = 200
    fastica_tol: float = 1e-4
    tc_k: int = 3
    rica_mode: str = "shortcut"
    master_seed: int = 0
    output_dir: str = "rica-out"
    workers: int = 1
    rs_grid: tuple = RS_GRID
    b_grid: tuple = B_GRID

    def __post_init__(self):
        for name in ("manifolds", "charts", "methods", "rs_grid", "b_grid"):
            object.__setattr__(self, name, tuple(getattr(self, name)))
        if not self.methods:
            raise ConfigError("at least one method is required")
        bad = [m for m in self.methods if m not in METHODS]
        if bad:
            raise ConfigError(f"unknown methods {bad}; choose from {METHODS}")
        bad = [m for m in self.manifolds if m not in KINDS]
        if bad or not self.manifolds:
            raise ConfigError(f"unknown or empty manifold list {list(self.manifolds)}")
        if self.seeds < 1 or self.draws < 1:
            raise ConfigError("seeds and draws must be at least 1")
        if self.n_target < 1 or self.N < 3:
            raise ConfigError("n must be positive and N at least 3")
        if self.b <= 0 or not 0 < self.r_s <= 1:
            raise ConfigError("b must be positive and r_s in (0, 1]")
        if any(not 0 < r <= 1 for r in self.rs_grid):
            raise ConfigError("r_s grid values must lie in (0, 1]")
        if any(not v > 0 for v in self.b_grid):
            raise ConfigError("b grid values must be positive")
        if self.rica_mode not in ("shortcut", "coordinate"):
            raise ConfigError("rica_mode must be 'shortcut' or 'coordinate'")
        if self.workers < 1:
            raise ConfigError("workers must be at least 1")
        for pair in self.charts:
            kind, _, chart = str(pair).partition(":")
            try:
                parse_chart(kind, chart)
            except (RicaError, KeyError) as exc:
                raise ConfigError(f"bad chart entry {pair!r}: {exc}") from exc

    def rows(self):
        """(spec, chart) pairs in table order, filtered by manifolds and charts."""
        wanted = None
        if self.charts:
            wanted = set()
            for pair in self.charts:
                kind, _, chart = pair.partition(":")
                wanted.add((kind, parse_chart(kind, chart).name))
        out = []
        for spec, chart in table_rows(self.n_target):
            if spec.kind not in self.manifolds:
                continue
            if wanted is not None and (spec.kind, chart.name) not in wanted:
                continue
            out.append((spec, chart))
        return out

    def train_config(self, scales) -> TrainConfig:
        return TrainConfig(
            steps=self.nlica_steps,
            batch=self.nlica_batch,
            lr=self.nlica_lr,
            weight_decay=self.nlica_weight_decay,
            prior_scales=tuple(float(s) for s in scales),
            n_layers=self.nlica_layers,
        )


_FIELD_TYPES = {
    "manifolds": list, "charts": list, "methods": list, "rs_grid": list, "b_grid": list,
    "n_target": int, "N": int, "seeds": int, "draws": int, "nlica_steps": int,
    "nlica_batch": int, "nlica_layers": int, "fastica_max_iters": int, "tc_k": int,
    "master_seed": int, "workers": int,
    "b": float, "r_s": float, "nlica_lr": float, "nlica_weight_decay": float,
    "fastica_tol": float,
    "rica_mode": str, "output_dir": str,
}


def load_config(path=None, profile=None, overrides=None) -> ExperimentConfig:
    """Merge, lowest precedence first: profile, config file keys, explicit overrides.

    A ``profile`` key inside the file is used only when no profile argument
    is given.
    """
    data = {}
    if path is not None:
        try:
            with open(path, encoding="utf-8") as fh:
                data = json.load(fh)
        except OSError as exc:
            raise ConfigError(f"cannot read config {path}: {exc}") from exc
        except json.JSONDecodeError as exc:
            raise ConfigError(f"config {path} is not valid JSON: {exc}") from exc
        if not isinstance(data, dict):
            raise ConfigError(f"config {path} must hold a single object of key-value pairs")
    file_profile = data.pop("profile", None)
    profile = profile if profile is not None else file_profile
    values = {}
    if profile is not None:
        if profile not in PROFILES:
            raise ConfigError(f"unknown profile {profile!r}; choose from {sorted(PROFILES)}")
        values.update(PROFILES[profile])
    values.update(data)
    values.update({k: v for k, v in (overrides or {}).items() if v is not None})
    clean = {}
    for key, val in values.items():
        if key not in _FIELD_TYPES:
            raise ConfigError(f"unknown config key {key!r}")
        typ = _FIELD_TYPES[key]
        try:
            if typ is list:
                if isinstance(val, str):
                    val = [v.strip() for v in val.split(",") if v.strip()]
                clean[key] = tuple(val)
            else:
                clean[key] = typ(val)
        except (TypeError, ValueError) as exc:
            raise ConfigError(f"config key {key!r}: cannot convert {val!r}") from exc
    for key in ("rs_grid", "b_grid"):
        if key in clean:
            try:
                clean[key] = tuple(float(v) for v in clean[key])
            except ValueError as exc:
                raise ConfigError(f"{key} must hold numbers") from exc
    return ExperimentConfig(**clean)


# -- random streams ------------------------------------------------------------

def _tag(name: str) -> int:
    return zlib.crc32(name.encode("utf-8"))


def _rng(*keys) -> np.random.Generator:
    return np.random.default_rng(np.random.SeedSequence([int(k) for k in keys]))


# -- one cell ------------------------------------------------------------------

@dataclass
class RunRecord:
    manifold: str
    chart: str
    method: str
    n: int
    N: int
    b: float
    r_s: float
    seed: int
    draw: int
    mcc: float
    tc: float
    frac_out_of_radius: float
    warnings: list = field(default_factory=list)
    failed: bool = False
    row_order: int = 0


def _scores(s_true, latents, ok, k, warnings):
    if ok is not None and not ok.all():
        warnings.append(f"dropped_rows={int((~ok).sum())}")
        s_true, latents = s_true[ok], latents[ok]
    return mcc(s_true, latents).mcc, total_correlation(latents, k).tc_nats


def _rica(spec, frame, src, batch, mode):
    m = intrinsic_metric(spec)
    x0 = base_point(spec)
    if mode == "shortcut":
        D = disentanglement_tensor_shortcut(frame, latent_hessian(src))
    else:
        D = disentanglement_tensor(tangent_source_density(spec, frame, src), m, x0)
    eig = rica_diagonalize(D, m)
    return rica_recover(spec, x0, eig.frame, batch.x)


def _run_group(job):
    """All cells sharing one data stream: (manifold, draw, seed) and a set of charts."""
    cfg, spec, charts, b, r_s, draw, seed = job
    master = cfg.master_seed
    mtag = _tag(spec.kind)
    src = SourceConfig(spec.dim, b=b, r_s=r_s, N=cfg.N)
    records = []
    m = intrinsic_metric(spec)
    frame = random_g_frame(m, base_point(spec), _rng(master, mtag, 1, draw))
    batch = generate(spec, src, frame, _rng(master, mtag, 2, draw, seed))
    frac_out = float(np.mean(~batch.in_radius))
    base_warn = []
    if frac_out > RADIUS_WARN_FRACTION:
        base_warn.append(f"frac_out_of_radius={frac_out:.4f}")

    def record(chart, method, score_fn):
        warns = list(base_warn)
        failed = False
        try:
            mcc_v, tc_v = score_fn(warns)
        except (RicaError, ValueError, ArithmeticError, np.linalg.LinAlgError) as exc:
            warns.append(f"failed:{type(exc).__name__}:{exc}")
            mcc_v = tc_v = float("nan")
            failed = True
        records.append(RunRecord(
            spec.kind, chart.name, method, spec.dim, cfg.N, b, r_s, seed, draw,
            float(mcc_v), float(tc_v), frac_out, warns, failed,
        ))

    rica_scores = None
    if "rica" in cfg.methods:
        def rica_fn(warns):
            latents, ok = _rica(spec, frame, src, batch, cfg.rica_mode)
            return _scores(batch.s, latents, ok, cfg.tc_k, warns)
        for chart in charts:
            if rica_scores is None:
                record(chart, "rica", rica_fn)
                rica_scores = records[-1]
            else:
                first = rica_scores
                records.append(replace(first, chart=chart.name, warnings=list(first.warnings)))

    need_baselines = any(mth in cfg.methods for mth in ("fastica", "nlica"))
    for chart in charts:
        if not need_baselines:
            break
        z = chart_observations(spec, chart, batch.x)
        finite = np.all(np.isfinite(z), axis=1)
        ctag = _tag(chart.name)
        if "fastica" in cfg.methods:
            def fastica_fn(warns):
                rng = _rng(master, mtag, 3, ctag, _tag("fastica"), draw, seed)
                res = fastica_fit(
                    z[finite],
                    FastIcaConfig(spec.dim, cfg.fastica_max_iters, cfg.fastica_tol,
                                  int(rng.integers(2**31 - 1))),
                )
                if not res.converged:
                    warns.append("fastica_not_converged")
                lat = np.full((z.shape[0], spec.dim), np.nan)
                lat[finite] = res.latents
                return _scores(batch.s, lat, finite, cfg.tc_k, warns)
            record(chart, "fastica", fastica_fn)
        if "nlica" in cfg.methods:
            def nlica_fn(warns):
                rng = _rng(master, mtag, 3, ctag, _tag("nlica"), draw, seed)
                res = nlica_fit(z[finite], cfg.train_config(src.scales), rng)
                if res.reduction != "center":
                    warns.append(f"reduction={res.reduction}")
                lat = np.full((z.shape[0], spec.dim), np.nan)
                idx = np.flatnonzero(finite)
                lat[idx[res.ok]] = res.latents[res.ok]
                return _scores(batch.s, lat, np.all(np.isfinite(lat), axis=1), cfg.tc_k, warns)
            record(chart, "nlica", nlica_fn)
    return records


def _execute(cfg: ExperimentConfig, jobs):
    if cfg.workers > 1:
        with ProcessPoolExecutor(max_workers=cfg.workers) as pool:
            parts = list(pool.map(_run_group, jobs))
    else:
        parts = [_run_group(job) for job in jobs]
    return [rec for part in parts for rec in part]


_METHOD_ORDER = {m: i for i, m in enumerate(METHODS)}


def _sort(records, row_index):
    for rec in records:
        rec.row_order = row_index[(rec.manifold, rec.chart)]
    return sorted(
        records,
        key=lambda r: (r.b, -r.r_s, r.row_order, _METHOD_ORDER[r.method], r.draw, r.seed),
    )


def _jobs(cfg, b, r_s):
    rows = cfg.rows()
    by_kind = {}
    for spec, chart in rows:
        by_kind.setdefault(spec.kind, (spec, []))[1].append(chart)
    jobs = []
    for spec, charts in by_kind.values():
        for draw in range(cfg.draws):
            for seed in range(cfg.seeds):
                jobs.append((cfg, spec, tuple(charts), b, r_s, draw, seed))
    index = {(s.kind, c.name): i for i, (s, c) in enumerate(rows)}
    return jobs, index


def run_table(cfg: ExperimentConfig) -> list:
    """Per-run records for the main table at (cfg.b, cfg.r_s), sorted in table order."""
    jobs, index = _jobs(cfg, cfg.b, cfg.r_s)
    if not jobs:
        raise ConfigError("the manifold and chart filters leave no table rows")
    return _sort(_execute(cfg, jobs), index)


def run_eigengap_sweep(cfg: ExperimentConfig, rs_grid=None):
    """Per-run records plus aggregate rows (manifold, chart, r_s, min_gap, method, stats)."""
    grid = tuple(rs_grid if rs_grid is not None else cfg.rs_grid)
    if any(not 0 < r <= 1 for r in grid):
        raise ConfigError("r_s grid values must lie in (0, 1]")
    records = []
    index = None
    for r_s in grid:
        jobs, index = _jobs(cfg, cfg.b, r_s)
        records.extend(_execute(cfg, jobs))
    records = _sort(records, index)
    rows = []
    for cell in aggregate(records):
        spec = ManifoldSpec.for_target(cell.manifold, cfg.n_target)
        _, gap = ground_truth_spectrum(SourceConfig(spec.dim, b=cell.b, r_s=cell.r_s, N=cfg.N))
        rows.append(dict(
            manifold=cell.manifold, chart=cell.chart, r_s=cell.r_s, min_gap=gap,
            method=cell.method, mcc_mean=cell.mcc_mean, mcc_std=cell.mcc_std,
            tc_mean=cell.tc_mean, tc_std=cell.tc_std,
        ))
    return records, rows


def run_base_scale_sweep(cfg: ExperimentConfig, b_grid=None):
    """Per-run records plus aggregate rows (manifold, chart, b, frac_out_of_radius, method, stats)."""
    grid = tuple(b_grid if b_grid is not None else cfg.b_grid)
    if any(not v > 0 for v in grid):
        raise ConfigError("b grid values must be positive")
    records = []
    index = None
    for b in grid:
        jobs, index = _jobs(cfg, b, cfg.r_s)
        records.extend(_execute(cfg, jobs))
    records = _sort(records, index)
    rows = []
    for cell in aggregate(records):
        rows.append(dict(
            manifold=cell.manifold, chart=cell.chart, b=cell.b,
            frac_out_of_radius=cell.frac_out_of_radius, method=cell.method,
            mcc_mean=cell.mcc_mean, mcc_std=cell.mcc_std,
        ))
    return records, rows


# -- aggregation and output ----------------------------------------------------

@dataclass
class CellResult:
    manifold: str
    chart: str
    method: str
    mcc_mean: float
    mcc_std: float
    tc_mean: float
    tc_std: float
    n: int
    N: int
    b: float
    r_s: float
    seed_count: int
    draw_count: int
    frac_out_of_radius: float
    warnings: list = field(default_factory=list)


def _mean_std(vals):
    vals = np.asarray([v for v in vals if np.isfinite(v)], dtype=float)
    if vals.size == 0:
        return float("nan"), float("nan")
    std = float(np.std(vals, ddof=1)) if vals.size > 1 else 0.0
    return float(np.mean(vals)), std


def aggregate(records) -> list:
    """Pool every run of a (manifold, chart, method, b, r_s) cell over seeds and draws."""
    groups = {}
    for rec in records:
        key = (rec.b, -rec.r_s, rec.row_order, _METHOD_ORDER[rec.method],
               rec.manifold, rec.chart, rec.method)
        groups.setdefault(key, []).append(rec)
    cells = []
    for key in sorted(groups):
        recs = groups[key]
        r0 = recs[0]
        mcc_mean, mcc_std = _mean_std([r.mcc for r in recs])
        tc_mean, tc_std = _mean_std([r.tc for r in recs])
        warns = []
        for r in recs:
            for w in r.warnings:
                tagged = f"draw={r.draw},seed={r.seed}:{w}"
                warns.append(tagged)
        cells.append(CellResult(
            r0.manifold, r0.chart, r0.method, mcc_mean, mcc_std, tc_mean, tc_std,
            r0.n, r0.N, r0.b, r0.r_s,
            len({r.seed for r in recs}), len({r.draw for r in recs}),
            float(np.mean([r.frac_out_of_radius for r in recs])), warns,
        ))
    return cells


def _fmt(v):
    if isinstance(v, float):
        return format(v, ".17g")
    return str(v)


def results_csv(records) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(CSV_HEADER)
    for r in records:
        w.writerow([
            r.manifold, r.chart, r.method, r.n, r.N, _fmt(float(r.b)), _fmt(float(r.r_s)),
            r.seed, r.draw, _fmt(r.mcc), _fmt(r.tc), _fmt(r.frac_out_of_radius),
            ";".join(r.warnings),
        ])
    return buf.getvalue()


def _json_safe(obj):
    if isinstance(obj, float):
        return obj if math.isfinite(obj) else None
    if isinstance(obj, dict):
        return {k: _json_safe(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_json_safe(v) for v in obj]
    return obj


def _write(path, text):
    try:
        with open(path, "w", encoding="utf-8", newline="") as fh:
            fh.write(text)
    except OSError as exc:
        raise OSError(f"cannot write {path}: {exc}") from exc


def emit_outputs(records, output_dir, cfg: ExperimentConfig, sweep=None, plot=False, command="table"):
    """Write results.csv and summary.json (plus the sweep table and SVG charts when given).

    ``sweep`` is ``(name, rows, x_key)`` from one of the sweep runners.
    Returns the list of written paths.
    """
    try:
        os.makedirs(output_dir, exist_ok=True)
    except OSError as exc:
        raise OSError(f"cannot create output directory {output_dir}: {exc}") from exc
    paths = []
    p = os.path.join(output_dir, "results.csv")
    _write(p, results_csv(records))
    paths.append(p)

    cells = aggregate(records)
    summary = {
        "command": command,
        "library_version": __version__,
        "kernel_backend": _kernels.BACKEND,
        "config": asdict(cfg),
        "rng": {
            "master_seed": cfg.master_seed,
            "streams": "SeedSequence([master, crc32(manifold), purpose, ...]); "
                       "frame purpose=1 keyed by draw, sources purpose=2 keyed by draw and seed, "
                       "baselines purpose=3 keyed by chart, method, draw and seed",
        },
        "methods": {
            "rica": f"{cfg.rica_mode} disentanglement tensor, generalized eigenproblem with g",
            "fastica": "symmetric fixed point, logcosh contrast, eigh whitening",
            "nlica": f"{cfg.nlica_layers} Mobius layers, AdamW, inputs centered and PCA-reduced when m > n",
            "tc": f"Kraskov algorithm 1, k={cfg.tc_k}, columns standardized",
        },
        "cells": [asdict(c) for c in cells],
        "failed_runs": sum(1 for r in records if r.failed),
    }
    if sweep is not None:
        name, rows, _ = sweep
        summary["sweep"] = {"name": name, "rows": rows}
    p = os.path.join(output_dir, "summary.json")
    _write(p, json.dumps(_json_safe(summary), indent=2, sort_keys=True) + "\n")
    paths.append(p)

    if sweep is not None:
        name, rows, x_key = sweep
        p = os.path.join(output_dir, f"{name}.csv")
        buf = io.StringIO()
        if rows:
            w = csv.DictWriter(buf, fieldnames=list(rows[0]), lineterminator="\n")
            w.writeheader()
            for row in rows:
                w.writerow({k: _fmt(v) for k, v in row.items()})
        _write(p, buf.getvalue())
        paths.append(p)
        if plot:
            from .plots import sweep_svg

            for kind in sorted({r["manifold"] for r in rows}):
                sub = [r for r in rows if r["manifold"] == kind]
                p = os.path.join(output_dir, f"{name}_{kind}.svg")
                _write(p, sweep_svg(sub, x_key, title=f"{kind}: MCC vs {x_key}"))
                paths.append(p)
    return paths
