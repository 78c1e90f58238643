"""Experiment runner: scenario -> filter ensemble -> per-frame log and metrics."""
from __future__ import annotations

import csv
import io
import json
import logging
import math
from dataclasses import dataclass, field, fields, replace
from pathlib import Path

import numpy as np

from .builtin_scenarios import BUILTINS, get_builtin
from .errors import InvalidConfigError, InvalidInputError, ScenarioError
from .feedback import FeedbackConfig, SafetyMonitor
from .op_update import Ensemble, OpConfig
from .particle_filter import DEFAULT_PARTICLES, NoiseModel
from .pose_math import wrap_angle
from .scenario import NoiseSpec, ScenarioSpec, generate_frames, load_scenario

log = logging.getLogger(__name__)

CSV_COLUMNS = (
    "frame", "object_id", "hypothesis",
    "gt_tx", "gt_ty", "gt_tz", "gt_th", "gt_ph", "gt_ps",
    "est_tx", "est_ty", "est_tz", "est_th", "est_ph", "est_ps",
    "occluded", "occluder_id", "trace_q", "alert",
)


@dataclass(frozen=True)
class FilterNoise:
    """Standard deviations of the filter's process and measurement models."""

    process_std_t: float = 0.005
    process_std_r: float = 0.02
    meas_std_t: float = 0.003
    meas_std_r: float = 0.01

    def model(self) -> NoiseModel:
        return NoiseModel.isotropic(self.process_std_t, self.process_std_r,
                                    self.meas_std_t, self.meas_std_r)


@dataclass
class RunConfig:
    scenario: str | ScenarioSpec = "general_op"
    filter_kind: str = "opf"
    seed: int = 0
    n_particles: int = DEFAULT_PARTICLES
    op: OpConfig = field(default_factory=OpConfig)
    feedback: FeedbackConfig = field(default_factory=FeedbackConfig)
    filter_noise: FilterNoise = field(default_factory=FilterNoise)
    noise: NoiseSpec | None = None
    out: str | None = None

    def __post_init__(self):
        if self.filter_kind not in ("opf", "pf"):
            raise InvalidConfigError(f"filter kind must be 'opf' or 'pf', got {self.filter_kind!r}")
        if self.n_particles < 1:
            raise InvalidConfigError("particle count must be >= 1")

    def scene(self) -> ScenarioSpec:
        return resolve_scenario(self.scenario)


def resolve_scenario(scenario) -> ScenarioSpec:
    if isinstance(scenario, ScenarioSpec):
        return scenario
    if scenario in BUILTINS:
        return get_builtin(scenario)
    return load_scenario(scenario)


@dataclass
class ResultRow:
    frame: int
    object_id: str
    hypothesis: int
    gt: np.ndarray
    est: np.ndarray
    occluded: bool
    occluder_id: object
    trace_q: float
    alert: bool
    # not serialized
    status: str = "visible"
    alpha_step: float = 1.0
    velocity: float = 0.0
    fed: np.ndarray | None = None
    measured: bool = True

    def csv_fields(self) -> list[str]:
        return [str(self.frame), str(self.object_id), str(self.hypothesis),
                *(_fmt(v) for v in self.gt), *(_fmt(v) for v in self.est),
                "1" if self.occluded else "0",
                "" if self.occluder_id is None else str(self.occluder_id),
                _fmt(self.trace_q), "1" if self.alert else "0"]


def _fmt(x: float) -> str:
    s = f"{float(x):.9g}"
    return "0" if s == "-0" else s


@dataclass
class ResultLog:
    scenario: str
    filter_kind: str
    seed: int
    target: str
    frame_rate: float
    rows: list[ResultRow] = field(default_factory=list)
    events: list[tuple] = field(default_factory=list)
    summary: dict = field(default_factory=dict)

    def track(self, object_id=None, hypothesis: int = 0) -> list[ResultRow]:
        oid = self.target if object_id is None else object_id
        return [r for r in self.rows if r.object_id == oid and r.hypothesis == hypothesis]

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(CSV_COLUMNS)
        for r in self.rows:
            w.writerow(r.csv_fields())
        return buf.getvalue()

    def write_csv(self, path) -> None:
        Path(path).write_text(self.to_csv())


def error_distance(estimates, ground_truth, selector: str = "translation") -> float:
    """Mean Euclidean error over aligned tracks.

    Inputs are (n, 3) arrays (or (n, 6) poses, sliced by ``selector``).
    Rotation differences are wrapped per component.
    """
    est = np.asarray(estimates, dtype=float)
    gt = np.asarray(ground_truth, dtype=float)
    if est.shape != gt.shape:
        raise InvalidInputError(f"track shapes differ: {est.shape} vs {gt.shape}")
    if est.shape[0] == 0:
        raise InvalidInputError("empty tracks")
    if est.shape[1] == 6:
        sl = slice(0, 3) if selector == "translation" else slice(3, 6)
        est, gt = est[:, sl], gt[:, sl]
    d = est - gt
    if selector == "rotation":
        d = wrap_angle(d)
    elif selector != "translation":
        raise InvalidInputError(f"unknown selector {selector!r}")
    return float(np.mean(np.linalg.norm(d, axis=1)))


def _initial_poses(scene: ScenarioSpec, first_frame) -> dict:
    out = {}
    for o in scene.objects:
        m = first_frame.measurements.get(o.id)
        out[o.id] = m if m is not None else o.waypoints[0].pose
    return out


def run_experiment(cfg: RunConfig) -> ResultLog:
    """Simulate the scenario, run the chosen filter, and log every hypothesis."""
    scene = cfg.scene()
    sim_ss, filt_ss = np.random.SeedSequence(cfg.seed).spawn(2)
    frames = list(generate_frames(scene, sim_ss, cfg.noise))
    noise = cfg.filter_noise.model()
    ens = Ensemble(_initial_poses(scene, frames[0][0]), kind=cfg.filter_kind, cfg=cfg.op,
                   noise=noise, n_particles=cfg.n_particles, frame_rate=scene.frame_rate,
                   seed=filt_ss)
    fb = cfg.feedback.resolved(ens.visible_trace)
    monitors: dict = {}
    out = ResultLog(scene.name, cfg.filter_kind, cfg.seed, scene.target_id, scene.frame_rate)
    for mf, truth in frames:
        results = ens.step_frame(mf.frame, mf.measurements)
        live = set()
        for r in results:
            key = (r.object_id, r.hypothesis)
            live.add(key)
            mon = monitors.setdefault(key, SafetyMonitor(fb.eps_safe))
            ev = mon.update(r.trace_q)
            if ev is not None:
                out.events.append((mf.frame, r.object_id, r.hypothesis, ev, r.trace_q))
            out.rows.append(ResultRow(
                frame=mf.frame, object_id=r.object_id, hypothesis=r.hypothesis,
                gt=truth[r.object_id].as_array(), est=r.pose.as_array(),
                occluded=not r.measured, occluder_id=r.occluder_id, trace_q=r.trace_q,
                alert=mon.alert, status=r.status.value, alpha_step=r.alpha_step,
                velocity=r.velocity,
                fed=None if r.fed_measurement is None else r.fed_measurement.as_array(),
                measured=r.measured))
        for key in [k for k in monitors if k not in live]:
            del monitors[key]
    tr = out.track()
    est = np.array([r.est for r in tr])
    gt = np.array([r.gt for r in tr])
    out.summary = {
        "translation_error": error_distance(est, gt, "translation"),
        "rotation_error": error_distance(est, gt, "rotation"),
        "frames": len(tr),
        "occluded_frames": sum(r.occluded for r in tr),
        "eps_safe": fb.eps_safe,
    }
    if cfg.out:
        out.write_csv(cfg.out)
    return out


# -------------------------------------------------------------------- report

METRICS = (("translation", "translation_error"), ("rotation", "rotation_error"))


@dataclass(frozen=True)
class ReportRow:
    filter_kind: str
    metric: str
    mean: float
    std: float
    runs: int


@dataclass
class CompareReport:
    scenario: str
    rows: list[ReportRow]

    def get(self, filter_kind: str, metric: str) -> ReportRow:
        for r in self.rows:
            if r.filter_kind == filter_kind and r.metric == metric:
                return r
        raise KeyError((filter_kind, metric))

    def ratios(self) -> dict:
        """OPF / PF mean error per metric (needs both filter kinds)."""
        return {m: self.get("opf", m).mean / self.get("pf", m).mean for m, _ in METRICS}

    def check(self, max_ratio: float = 0.5) -> bool:
        return all(r <= max_ratio for r in self.ratios().values())

    def text(self) -> str:
        head = ("filter", "metric", "mean", "std", "runs")
        body = [(r.filter_kind, f"{r.metric} error", f"{r.mean:.6g}", f"{r.std:.4g}", str(r.runs))
                for r in self.rows]
        widths = [max(len(x[i]) for x in [head, *body]) for i in range(len(head))]
        lines = [f"scenario: {self.scenario}",
                 "  ".join(h.ljust(w) for h, w in zip(head, widths))]
        lines.append("  ".join("-" * w for w in widths))
        lines += ["  ".join(c.ljust(w) for c, w in zip(row, widths)) for row in body]
        return "\n".join(lines)

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["scenario", "filter", "metric", "mean", "std", "runs"])
        for r in self.rows:
            w.writerow([self.scenario, r.filter_kind, r.metric, _fmt(r.mean), _fmt(r.std), r.runs])
        return buf.getvalue()


def compare_report(logs) -> CompareReport:
    """Mean and (population) std of each error metric per filter kind."""
    logs = sorted(logs, key=lambda lg: (lg.filter_kind, lg.seed))
    if not logs:
        raise InvalidInputError("compare_report needs at least one log")
    kinds = [k for k in ("opf", "pf") if any(lg.filter_kind == k for lg in logs)]
    rows = []
    for kind in kinds:
        sel = [lg for lg in logs if lg.filter_kind == kind]
        for metric, key in METRICS:
            vals = np.array([lg.summary[key] for lg in sel])
            rows.append(ReportRow(kind, metric, float(vals.mean()), float(vals.std()), len(vals)))
    return CompareReport(logs[0].scenario, rows)


def run_compare(base: RunConfig, seeds) -> tuple[CompareReport, list[ResultLog]]:
    logs = []
    for kind in ("opf", "pf"):
        for s in seeds:
            logs.append(run_experiment(replace(base, filter_kind=kind, seed=int(s), out=None)))
    return compare_report(logs), logs


# -------------------------------------------------------------------- config

_CONFIG_SECTIONS = {"op": OpConfig, "feedback": FeedbackConfig, "filter": FilterNoise,
                    "noise": NoiseSpec}


def load_config(path, base: RunConfig | None = None) -> RunConfig:
    """Apply a JSON overrides file (sections ``op``, ``feedback``, ``filter``, ``noise``)."""
    base = base or RunConfig()
    try:
        doc = json.loads(Path(path).read_text())
    except OSError as exc:
        raise ScenarioError(f"cannot read config: {exc.strerror}", str(path)) from None
    except json.JSONDecodeError as exc:
        raise ScenarioError(exc.msg, f"{path}: line {exc.lineno} column {exc.colno}") from None
    return apply_config(doc, base)


def apply_config(doc: dict, base: RunConfig) -> RunConfig:
    if not isinstance(doc, dict):
        raise ScenarioError("expected an object", "config")
    extra = sorted(set(doc) - set(_CONFIG_SECTIONS))
    if extra:
        raise ScenarioError(f"unknown section(s) {extra}", "config")
    updates = {}
    attr = {"op": "op", "feedback": "feedback", "filter": "filter_noise", "noise": "noise"}
    for sec, cls in _CONFIG_SECTIONS.items():
        if sec not in doc:
            continue
        vals = doc[sec]
        if not isinstance(vals, dict):
            raise ScenarioError("expected an object", f"config.{sec}")
        names = {f.name for f in fields(cls)}
        bad = sorted(set(vals) - names)
        if bad:
            raise ScenarioError(f"unknown key(s) {bad}", f"config.{sec}")
        current = getattr(base, attr[sec]) or cls()
        try:
            updates[attr[sec]] = replace(current, **vals)
        except (TypeError, ValueError) as exc:
            raise ScenarioError(str(exc), f"config.{sec}") from None
    return replace(base, **updates)


# ---------------------------------------------------------------------- svg

def svg_line_chart(series: dict, title: str = "", width: int = 640, height: int = 240) -> str:
    """Minimal SVG line chart; ``series`` maps a label to ``(xs, ys)``."""
    colors = ("#1f77b4", "#d62728", "#2ca02c", "#9467bd")
    pad = 36
    xs_all = np.concatenate([np.asarray(x, float) for x, _ in series.values()])
    ys_all = np.concatenate([np.asarray(y, float) for _, y in series.values()])
    x0, x1 = float(xs_all.min()), float(xs_all.max())
    y0, y1 = float(min(ys_all.min(), 0.0)), float(ys_all.max())
    x1 = x1 if x1 > x0 else x0 + 1
    y1 = y1 if y1 > y0 else y0 + 1

    def px(x):
        return pad + (x - x0) / (x1 - x0) * (width - 2 * pad)

    def py(y):
        return height - pad - (y - y0) / (y1 - y0) * (height - 2 * pad)

    parts = [f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}">',
             f'<text x="{pad}" y="20" font-size="13">{title}</text>',
             f'<rect x="{pad}" y="{pad}" width="{width - 2 * pad}" height="{height - 2 * pad}" '
             'fill="none" stroke="#999"/>',
             f'<text x="2" y="{pad + 4}" font-size="10">{y1:.3g}</text>',
             f'<text x="2" y="{height - pad}" font-size="10">{y0:.3g}</text>']
    for i, (label, (xs, ys)) in enumerate(series.items()):
        c = colors[i % len(colors)]
        pts = " ".join(f"{px(x):.1f},{py(y):.1f}" for x, y in zip(xs, ys) if math.isfinite(y))
        parts.append(f'<polyline fill="none" stroke="{c}" stroke-width="1.2" points="{pts}"/>')
        parts.append(f'<text x="{width - pad - 90}" y="{pad + 14 + 14 * i}" font-size="11" '
                     f'fill="{c}">{label}</text>')
    parts.append("</svg>")
    return "\n".join(parts)


def log_charts(logs) -> str:
    """Translation error and trace-of-Q charts for the target of each log, stacked."""
    err, trace = {}, {}
    for lg in logs:
        tr = lg.track()
        frames = [r.frame for r in tr]
        d = [float(np.linalg.norm(r.est[:3] - r.gt[:3])) for r in tr]
        err[f"{lg.filter_kind} s{lg.seed}"] = (frames, d)
        trace[f"{lg.filter_kind} s{lg.seed}"] = (frames, [r.trace_q for r in tr])
    a = svg_line_chart(err, "translation error (m)")
    b = svg_line_chart(trace, "trace of effective Q")
    return a + "\n" + b
