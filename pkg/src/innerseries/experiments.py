"""The four-experiment harness: full pipelines on both "sensor" arms, weight
alignment, metrics, JSON reports, and SVG figures.

Experiments:
  sine         analytic 1-D oracle; the inner series is the sign of the
               signal's derivative
  monotone-1d  broadband 1-D signal vs a monotone nonlinear re-sensing of it
  lifted-2d    2-D latent lifted into 6-D two different ways, reduced by PCA
  mixture-2d   two independent non-Gaussian sources vs their fixed nonlinear
               mixture
"""

from __future__ import annotations

import time
from dataclasses import dataclass, field as dc_field
from pathlib import Path

import numpy as np

from . import ingest, serialize, svgplot
from .estimate import accumulate_moments, build_grid, estimate_velocity
from .frames import (
    align_frame_field,
    check_transform_law,
    frame_residuals,
    solve_frame,
)
from .model import FrameField, Trajectory, VelocitySeries, WeightSeries
from .reconstruct import integrate_weights
from .weights import (
    align_weight_series,
    compute_weights,
    cross_channel_correlation,
    separability_report,
    write_csv_weights,
)

EXPERIMENT_NAMES = ("sine", "monotone-1d", "lifted-2d", "mixture-2d")

REPORT_SCHEMA = 1


@dataclass
class ExperimentConfig:
    seed: int = 0
    samples: int | None = None
    bins: tuple[int, ...] | None = None
    min_count: int | None = None
    scheme: str = "central"
    transform: str = "cubic"  # monotone-1d only: "cubic" or "identity"


@dataclass(frozen=True)
class Criterion:
    name: str
    value: float
    threshold: float
    op: str  # ">=" or "<"

    @property
    def passed(self) -> bool:
        return bool(
            self.value >= self.threshold if self.op == ">=" else self.value < self.threshold
        )


@dataclass
class ExperimentReport:
    experiment: str
    config: dict
    metrics: dict
    criteria: list[Criterion]
    artifacts: dict = dc_field(default_factory=dict)

    @property
    def passed(self) -> bool:
        return all(c.passed for c in self.criteria)

    def to_dict(self) -> dict:
        return {
            "schema": REPORT_SCHEMA,
            "experiment": self.experiment,
            "config": self.config,
            "metrics": self.metrics,
            "criteria": [
                {
                    "name": c.name,
                    "value": float(c.value),
                    "threshold": float(c.threshold),
                    "op": c.op,
                    "passed": c.passed,
                }
                for c in self.criteria
            ],
            "artifacts": self.artifacts,
            "passed": self.passed,
        }


@dataclass
class PipelineResult:
    traj: Trajectory
    vel: VelocitySeries
    field: FrameField
    weights: WeightSeries
    moments: dict
    max_whiten_residual: float
    max_offdiag_residual: float
    n_skipped_bins: int


def run_pipeline(
    traj: Trajectory,
    bins: tuple[int, ...],
    min_count: int | None = None,
    scheme: str = "central",
) -> PipelineResult:
    """trajectory -> velocity -> grid -> moments -> aligned frames -> weights."""
    vel = estimate_velocity(traj, scheme)
    grid = build_grid(traj, bins, min_count)
    moments = accumulate_moments(traj, vel, grid)
    frames = {}
    skipped = 0
    for key, mom in moments.items():
        try:
            frames[key] = solve_frame(mom)
        except ValueError:
            skipped += 1
    field = align_frame_field(grid, frames)
    r1 = r2 = 0.0
    for key, fr in field.frames.items():
        a, b = frame_residuals(fr, moments[key])
        r1, r2 = max(r1, a), max(r2, b)
    w = compute_weights(traj, vel, field)
    return PipelineResult(traj, vel, field, w, moments, r1, r2, skipped)


def analytic_sine_weights(a: float, times: np.ndarray) -> WeightSeries:
    """Closed-form inner series of a sine signal: sgn(a cos t), with the +
    sign convention; exact zeros are kept as 0 and excluded from scoring."""
    if a == 0:
        raise ValueError("amplitude must be nonzero")
    times = np.asarray(times, dtype=float)
    vals = np.sign(a * np.cos(times))[:, None]
    dt = float(times[1] - times[0]) if len(times) > 1 else 1.0
    return WeightSeries(vals, np.ones(len(times), dtype=bool), dt=dt)


def sine_sign_match(
    traj: Trajectory, w: WeightSeries, a: float, interior: float = 0.95
) -> float:
    """Fraction of scored samples whose weight sign matches the analytic
    sign of a cos(t), after one global reflection."""
    ref = analytic_sine_weights(a, traj.times)
    score_mask = (
        w.valid_mask
        & (np.abs(traj.samples[:, 0]) < interior * abs(a))
        & (ref.values[:, 0] != 0)
    )
    if not score_mask.any():
        raise ValueError("no samples to score")
    wv = w.values[score_mask, 0]
    rv = ref.values[score_mask, 0]
    flip = np.sign(np.sum(wv * rv)) or 1.0
    return float(np.mean(np.sign(flip * wv) == rv))


# ---------------------------------------------------------------------------
# the experiments
# ---------------------------------------------------------------------------

def _sine(cfg: ExperimentConfig) -> tuple[dict, list[Criterion], dict]:
    a = 1.0
    n = cfg.samples or 100_000
    bins = cfg.bins or (128,)
    traj = ingest.gen_sine(a, 0.01, n)
    res = run_pipeline(traj, bins, cfg.min_count, cfg.scheme)

    match = sine_sign_match(traj, res.weights, a)
    c11_err = 0.0
    for key, mom in res.moments.items():
        xc = res.field.grid.center(key)[0]
        c11_err = max(c11_err, abs(mom.c2[0, 0] - (a * a - xc * xc)))

    k0 = int(np.flatnonzero(res.weights.valid_mask)[0])
    steps = min(1000, len(res.weights) - k0)
    w_tail = WeightSeries(
        res.weights.values[k0:],
        res.weights.valid_mask[k0:],
        dt=res.weights.dt,
    )
    rec, truncated = integrate_weights(
        w_tail, res.field, traj.samples[k0], steps
    )
    true = traj.samples[k0 : k0 + rec.n_samples, 0]
    rel_rmse = float(
        np.sqrt(np.mean((rec.samples[:, 0] - true) ** 2))
        / np.sqrt(np.mean(true**2))
    )

    metrics = {
        "sign_match_fraction": match,
        "c11_max_abs_error": c11_err,
        "max_whiten_residual": res.max_whiten_residual,
        "max_offdiag_residual": res.max_offdiag_residual,
        "reconstruction_rel_rmse": rel_rmse,
        "reconstruction_truncated": truncated,
        "n_occupied_bins": len(res.field.frames),
    }
    criteria = [
        Criterion("sign_match_fraction", match, 0.95, ">="),
        Criterion("c11_max_abs_error", c11_err, 0.05, "<"),
        Criterion("max_whiten_residual", res.max_whiten_residual, 1e-10, "<"),
        Criterion("max_offdiag_residual", res.max_offdiag_residual, 1e-8, "<"),
        Criterion("reconstruction_rel_rmse", rel_rmse, 0.05, "<"),
    ]
    extras = {
        "arms": [("x", res)],
        "plot": [
            ("x", traj.times, traj.samples[:, 0]),
            ("w", traj.times, res.weights.values[:, 0]),
            ("w_analytic", traj.times, analytic_sine_weights(a, traj.times).values[:, 0]),
        ],
        "window": (1.0, 2.0),
    }
    return metrics, criteria, extras


def _monotone_1d(cfg: ExperimentConfig) -> tuple[dict, list[Criterion], dict]:
    n = cfg.samples or 500_000
    bins = cfg.bins or (128,)
    traj = ingest.gen_broadband(n, seed=cfg.seed, amplitude=1.0)
    if cfg.transform == "identity":
        spec = ingest.TransformSpec.identity()
    else:
        spec = ingest.TransformSpec(
            "monotone-polynomial",
            {"coeffs": [0.0, 1.0, 0.0, 0.5], "domain": (-1.2, 1.2)},
        )
    traj_p = ingest.apply_transform(traj, spec)
    res = run_pipeline(traj, bins, cfg.min_count, cfg.scheme)
    res_p = run_pipeline(traj_p, bins, cfg.min_count, cfg.scheme)
    _, corrs = align_weight_series(res.weights, res_p.weights)
    corr = float(np.min(corrs))
    metrics = {
        "aligned_weight_correlation": corr,
        "max_whiten_residual": max(res.max_whiten_residual, res_p.max_whiten_residual),
        "max_offdiag_residual": max(res.max_offdiag_residual, res_p.max_offdiag_residual),
    }
    criteria = [
        Criterion("aligned_weight_correlation", corr, 0.95, ">="),
        Criterion("max_whiten_residual", metrics["max_whiten_residual"], 1e-10, "<"),
        Criterion("max_offdiag_residual", metrics["max_offdiag_residual"], 1e-8, "<"),
    ]
    t = traj.times
    extras = {
        "arms": [("x", res), ("xprime", res_p)],
        "plot": [
            ("x", t, traj.samples[:, 0]),
            ("xprime", t, traj_p.samples[:, 0]),
            ("w", t, res.weights.values[:, 0]),
            ("wprime", t, res_p.weights.values[:, 0]),
        ],
        "window": (t[n // 2], t[n // 2 + min(2000, n // 4)]),
    }
    return metrics, criteria, extras


def _lifted_2d(cfg: ExperimentConfig) -> tuple[dict, list[Criterion], dict]:
    n = cfg.samples or 150_000
    bins = cfg.bins or (4, 4)
    _, lifted = ingest.gen_lifted_latent(n, cfg.seed)
    x, frac_a = ingest.pca_embed(lifted, 2)
    distorted = Trajectory(
        ingest.distort_lift(lifted.samples), lifted.dt, lifted.channel_names
    )
    xp, frac_b = ingest.pca_embed(distorted, 2)
    res = run_pipeline(x, bins, cfg.min_count, cfg.scheme)
    res_p = run_pipeline(xp, bins, cfg.min_count, cfg.scheme)
    _, corrs = align_weight_series(res.weights, res_p.weights)
    corr = float(np.min(corrs))
    top2_a = float(np.sum(frac_a))
    top2_b = float(np.sum(frac_b))
    metrics = {
        "aligned_weight_correlation_min": corr,
        "per_channel_correlations": [float(c) for c in corrs],
        "pca_top2_fraction_arm1": top2_a,
        "pca_top2_fraction_arm2": top2_b,
        "max_whiten_residual": max(res.max_whiten_residual, res_p.max_whiten_residual),
        "max_offdiag_residual": max(res.max_offdiag_residual, res_p.max_offdiag_residual),
    }
    criteria = [
        Criterion("pca_top2_fraction_arm1", top2_a, 0.99, ">="),
        Criterion("pca_top2_fraction_arm2", top2_b, 0.99, ">="),
        Criterion("aligned_weight_correlation_min", corr, 0.9, ">="),
        Criterion("max_whiten_residual", metrics["max_whiten_residual"], 1e-10, "<"),
        Criterion("max_offdiag_residual", metrics["max_offdiag_residual"], 1e-8, "<"),
    ]
    t = x.times
    extras = {
        "arms": [("x", res), ("xprime", res_p)],
        "plot": [
            ("w1", t, res.weights.values[:, 0]),
            ("wprime1", t, res_p.weights.values[:, 0]),
            ("w2", t, res.weights.values[:, 1]),
            ("wprime2", t, res_p.weights.values[:, 1]),
        ],
        "window": (t[n // 2], t[n // 2 + min(1500, n // 4)]),
    }
    return metrics, criteria, extras


def _mixture_2d(cfg: ExperimentConfig) -> tuple[dict, list[Criterion], dict]:
    n = cfg.samples or 500_000
    bins_src = (cfg.bins or (16, 16))[:1]
    bins_mix = cfg.bins or (16, 16)
    dt = 1.0 / 16000
    box = 2.0e4  # keeps both sources inside the +-2^15 mixing domain
    s1 = ingest.gen_bounded_walk(
        n, seed=cfg.seed, dim=1, box=box, dt=dt, noise="laplace"
    )
    s2 = ingest.gen_bounded_walk(
        n, seed=cfg.seed + 1, dim=1, box=box, dt=dt, noise="uniform"
    )
    res1 = run_pipeline(s1, bins_src, cfg.min_count, cfg.scheme)
    res2 = run_pipeline(s2, bins_src, cfg.min_count, cfg.scheme)
    stacked = Trajectory(
        np.concatenate([s1.samples, s2.samples], axis=1), dt, ("s1", "s2")
    )
    mixed = ingest.mix_two_sources(stacked)
    xprime, _ = ingest.pca_embed(mixed, 2)
    res_mix = run_pipeline(xprime, bins_mix, cfg.min_count, cfg.scheme)
    rep = separability_report(
        res_mix.weights, [res1.weights, res2.weights]
    )
    metrics = {
        "min_channel_corr": rep.min_channel_corr,
        "max_cross_corr": rep.max_cross_corr,
        "per_channel_correlations": [float(c) for c in rep.channel_correlations],
        "matched_perm": rep.permutation.perm.tolist(),
        "matched_signs": rep.permutation.signs.tolist(),
        "max_whiten_residual": max(
            res1.max_whiten_residual, res2.max_whiten_residual, res_mix.max_whiten_residual
        ),
        "max_offdiag_residual": max(
            res1.max_offdiag_residual, res2.max_offdiag_residual, res_mix.max_offdiag_residual
        ),
    }
    criteria = [
        Criterion("min_channel_corr", rep.min_channel_corr, 0.9, ">="),
        Criterion("max_cross_corr", rep.max_cross_corr, 0.05, "<"),
        Criterion("max_whiten_residual", metrics["max_whiten_residual"], 1e-10, "<"),
        Criterion("max_offdiag_residual", metrics["max_offdiag_residual"], 1e-8, "<"),
    ]
    t = xprime.times
    extras = {
        "arms": [("s1", res1), ("s2", res2), ("mixture", res_mix)],
        "plot": [
            ("w_s1", t, res1.weights.values[:, 0]),
            ("wprime1", t, res_mix.weights.values[:, 0]),
            ("w_s2", t, res2.weights.values[:, 0]),
            ("wprime2", t, res_mix.weights.values[:, 1]),
        ],
        "window": (t[n // 2], t[n // 2 + min(2000, n // 4)]),
    }
    return metrics, criteria, extras


_RUNNERS = {
    "sine": _sine,
    "monotone-1d": _monotone_1d,
    "lifted-2d": _lifted_2d,
    "mixture-2d": _mixture_2d,
}

_RUNTIME_LIMITS = {"sine": 10.0, "monotone-1d": 30.0, "lifted-2d": 60.0, "mixture-2d": 60.0}


def run_experiment(
    name: str, cfg: ExperimentConfig | None = None, out_dir=None
) -> ExperimentReport:
    """Run one named experiment; optionally serialize intermediates, SVG
    figures, and the JSON report into out_dir."""
    if name not in _RUNNERS:
        raise ValueError(f"unknown experiment {name!r}; choose from {EXPERIMENT_NAMES}")
    cfg = cfg or ExperimentConfig()
    t_start = time.perf_counter()
    try:
        metrics, criteria, extras = _RUNNERS[name](cfg)
    except Exception as err:
        raise RuntimeError(f"experiment {name!r} failed during pipeline: {err}") from err
    elapsed = time.perf_counter() - t_start
    metrics["runtime_seconds"] = elapsed
    criteria.append(Criterion("runtime_seconds", elapsed, _RUNTIME_LIMITS[name], "<"))

    report = ExperimentReport(
        experiment=name,
        config={
            "seed": cfg.seed,
            "samples": cfg.samples,
            "bins": list(cfg.bins) if cfg.bins else None,
            "min_count": cfg.min_count,
            "scheme": cfg.scheme,
            "transform": cfg.transform,
        },
        metrics=metrics,
        criteria=criteria,
    )
    if out_dir is not None:
        out = Path(out_dir)
        out.mkdir(parents=True, exist_ok=True)
        for arm_name, res in extras["arms"]:
            wpath = out / f"{name}.{arm_name}.weights.csv"
            fpath = out / f"{name}.{arm_name}.field.json"
            write_csv_weights(res.weights, wpath)
            serialize.dump_json(serialize.field_to_dict(res.field), fpath)
            report.artifacts[f"{arm_name}.weights"] = str(wpath)
            report.artifacts[f"{arm_name}.field"] = str(fpath)
        svg_path = out / f"{name}.weights.svg"
        svgplot.plot_svg(
            [svgplot.PlotSeries(lbl, t, v) for lbl, t, v in extras["plot"]],
            extras["window"],
            svg_path,
        )
        report.artifacts["figure"] = str(svg_path)
        rpath = out / f"{name}.report.json"
        serialize.dump_json(report.to_dict(), rpath)
        report.artifacts["report"] = str(rpath)
    return report


def linear_map_law_check(
    seed: int = 0, n: int = 60_000, bins: tuple[int, int] = (6, 6)
) -> tuple[float, int]:
    """Estimate frames from 2-D data and from the same data under a fixed
    invertible linear map (shared bin assignment), then verify the covariant
    transformation law bin by bin.

    Returns (max residual over checked bins, number of bins checked).
    """
    traj = ingest.gen_bounded_walk(
        n, seed=seed, dim=2, box=1.0, dt=1.0, noise=("laplace", "uniform")
    )
    lin = np.array([[1.2, 0.4], [-0.3, 0.9]])
    vel = estimate_velocity(traj, "central")
    grid = build_grid(traj, bins)
    moments = accumulate_moments(traj, vel, grid)
    vel_p = VelocitySeries(vel.values @ lin.T, vel.valid_mask)
    traj_p = Trajectory(traj.samples @ lin.T, traj.dt)
    moments_p = accumulate_moments(traj_p, vel_p, grid)
    jac = np.linalg.inv(lin)  # dx/dx'
    worst = 0.0
    checked = 0
    for key, mom in moments.items():
        fr = solve_frame(mom)
        fr_p = solve_frame(moments_p[key])
        if fr.degenerate_flag or fr_p.degenerate_flag:
            continue
        residual, _ = check_transform_law(fr.m, fr_p.m, jac)
        worst = max(worst, residual)
        checked += 1
    if checked == 0:
        raise RuntimeError("no non-degenerate bins to check")
    return worst, checked
