"""Result serialization and report emission: metrics CSV, markdown table,
and small self-contained SVG figures (calibration curves, regression
uncertainty bands, classification uncertainty heatmaps, u-vs-error).

The CSV layout is fixed: ``method,seed,accuracy_or_mae,raulc,roc_auc,
pr_auc,train_time_ratio,size_ratio,inference_time_ratio`` with one row
per seed plus an aggregate row carrying ``mean±std`` cells.
"""

from __future__ import annotations

import json
import time
from pathlib import Path

import numpy as np

from uqkit.metrics import record_errors
from uqkit.records import uncertainties_of
from uqkit.runner import RunResult

# the report CSV carries exactly these metric columns (spearman and the
# calibration curve live in result.json)
CSV_METRICS = ("accuracy_or_mae", "raulc", "roc_auc", "pr_auc",
               "train_time_ratio", "size_ratio", "inference_time_ratio")
CSV_COLUMNS = "method,seed," + ",".join(CSV_METRICS)
FORMATS = ("csv", "md", "svg")


def _to_jsonable(value):
    if isinstance(value, np.ndarray):
        return value.tolist()
    if isinstance(value, (np.floating, np.integer)):
        return value.item()
    if isinstance(value, dict):
        return {k: _to_jsonable(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [_to_jsonable(v) for v in value]
    return value


def serialize_result(result: RunResult) -> dict:
    per_seed = []
    for s in result.per_seed:
        errors = record_errors(s.records_id, result.config.task)
        per_seed.append({
            "seed": s.seed,
            "metrics": _to_jsonable(s.metrics),
            "calibration": _to_jsonable(s.calibration),
            "figures": _to_jsonable(s.figures),
            "u_vs_error": _to_jsonable(
                [list(uncertainties_of(s.records_id)), list(errors)]),
        })
    return {
        "method": result.method,
        "task": result.config.task,
        "dataset": result.config.dataset["name"],
        "config": dict(result.config.canonical_items()),
        "config_hash": result.config.hash(),
        "seeds": result.seeds,
        "per_seed": per_seed,
        "aggregate": _to_jsonable(result.aggregate),
        "errors": result.errors,
    }


def write_result(result: RunResult, out_dir) -> Path:
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    payload = serialize_result(result)
    path = out_dir / "result.json"
    path.write_text(json.dumps(payload, sort_keys=True, indent=1),
                    encoding="utf-8")
    provenance = {
        "config_hash": payload["config_hash"],
        "written_at_unix": time.time(),
        "passes_per_sample": {
            str(s.seed): s.metrics["inference_time_ratio"]
            for s in result.per_seed
        },
        "failed_seeds": result.errors,
    }
    (out_dir / "provenance.json").write_text(
        json.dumps(provenance, sort_keys=True, indent=1), encoding="utf-8")
    return path


def load_result(out_dir) -> dict:
    path = Path(out_dir) / "result.json"
    if not path.exists():
        raise FileNotFoundError(f"{path} not found; run an experiment first")
    return json.loads(path.read_text(encoding="utf-8"))


# -- tables -------------------------------------------------------------------

def _fmt(value: float) -> str:
    return repr(float(value))


def metrics_csv(payload: dict) -> str:
    lines = [CSV_COLUMNS]
    for s in payload["per_seed"]:
        cells = [payload["method"], str(s["seed"])]
        cells += [_fmt(s["metrics"][k]) for k in CSV_METRICS]
        lines.append(",".join(cells))
    agg = payload["aggregate"]
    cells = [payload["method"], "mean±std"]
    cells += [f"{agg[k][0]:.6g}±{agg[k][1]:.6g}" for k in CSV_METRICS]
    lines.append(",".join(cells))
    return "\n".join(lines) + "\n"


_MD_HEADERS = (
    ("accuracy_or_mae", "Accuracy/MAE"), ("raulc", "rAULC"),
    ("roc_auc", "ROC-AUC"), ("pr_auc", "PR-AUC"),
    ("train_time_ratio", "Time"), ("size_ratio", "Size"),
    ("inference_time_ratio", "Inference"),
)


def metrics_markdown(payloads: list[dict]) -> str:
    lines = ["| Method | " + " | ".join(h for _, h in _MD_HEADERS) + " |",
             "|" + "---|" * (len(_MD_HEADERS) + 1)]
    for payload in payloads:
        agg = payload["aggregate"]
        cells = [payload["method"]]
        for key, _ in _MD_HEADERS:
            mean, std = agg[key]
            cells.append(f"{mean:.3f}±{std:.3f}")
        lines.append("| " + " | ".join(cells) + " |")
    return "\n".join(lines) + "\n"


# -- svg ------------------------------------------------------------------------

_W, _H, _PAD = 480, 360, 46


class _Frame:
    """Maps data coordinates onto the pixel frame and draws axes."""

    def __init__(self, xs, ys, title=""):
        self.x0, self.x1 = float(np.min(xs)), float(np.max(xs))
        self.y0, self.y1 = float(np.min(ys)), float(np.max(ys))
        if self.x1 == self.x0:
            self.x1 += 1.0
        if self.y1 == self.y0:
            self.y1 += 1.0
        self.parts = [
            f'<rect x="{_PAD}" y="{_PAD}" width="{_W - 2 * _PAD}" '
            f'height="{_H - 2 * _PAD}" fill="none" stroke="black"/>',
            f'<text x="{_W / 2}" y="20" text-anchor="middle" '
            f'font-size="13">{title}</text>',
            f'<text x="{_PAD}" y="{_H - 8}" font-size="10">{self.x0:.3g}</text>',
            f'<text x="{_W - _PAD}" y="{_H - 8}" text-anchor="end" '
            f'font-size="10">{self.x1:.3g}</text>',
            f'<text x="6" y="{_H - _PAD}" font-size="10">{self.y0:.3g}</text>',
            f'<text x="6" y="{_PAD + 10}" font-size="10">{self.y1:.3g}</text>',
        ]

    def px(self, x):
        return _PAD + (x - self.x0) / (self.x1 - self.x0) * (_W - 2 * _PAD)

    def py(self, y):
        return _H - _PAD - (y - self.y0) / (self.y1 - self.y0) * (_H - 2 * _PAD)

    def polyline(self, xs, ys, color="steelblue", width=1.5, dash=""):
        pts = " ".join(f"{self.px(x):.2f},{self.py(y):.2f}"
                       for x, y in zip(xs, ys))
        dash_attr = f' stroke-dasharray="{dash}"' if dash else ""
        self.parts.append(
            f'<polyline points="{pts}" fill="none" stroke="{color}" '
            f'stroke-width="{width}"{dash_attr}/>'
        )

    def circles(self, xs, ys, color="black", r=1.6, opacity=0.6):
        for x, y in zip(xs, ys):
            self.parts.append(
                f'<circle cx="{self.px(x):.2f}" cy="{self.py(y):.2f}" '
                f'r="{r}" fill="{color}" fill-opacity="{opacity}"/>'
            )

    def polygon(self, xs, ys, color="steelblue", opacity=0.25):
        pts = " ".join(f"{self.px(x):.2f},{self.py(y):.2f}"
                       for x, y in zip(xs, ys))
        self.parts.append(
            f'<polygon points="{pts}" fill="{color}" fill-opacity="{opacity}" '
            f'stroke="none"/>'
        )

    def cell(self, x, y, w, h, color):
        self.parts.append(
            f'<rect x="{self.px(x):.2f}" y="{self.py(y + h):.2f}" '
            f'width="{abs(self.px(x + w) - self.px(x)):.2f}" '
            f'height="{abs(self.py(y) - self.py(y + h)):.2f}" '
            f'fill="{color}" stroke="none"/>'
        )

    def render(self) -> str:
        body = "\n".join(self.parts)
        return (f'<svg xmlns="http://www.w3.org/2000/svg" width="{_W}" '
                f'height="{_H}">\n{body}\n</svg>\n')


_SEED_COLORS = ("steelblue", "darkorange", "seagreen", "crimson", "purple")


def calibration_svg(payload: dict) -> str:
    frame = _Frame([0, 1], [0, 1],
                   title=f"calibration: {payload['method']}")
    frame.polyline([0, 1], [0, 1], color="gray", width=1.0, dash="4 3")
    for i, s in enumerate(payload["per_seed"]):
        pts = s["calibration"]
        xs = [0.0] + [p[0] for p in pts]
        ys = [0.0] + [p[1] for p in pts]
        frame.polyline(xs, ys, color=_SEED_COLORS[i % len(_SEED_COLORS)])
    return frame.render()


def u_vs_error_svg(payload: dict) -> str:
    s = payload["per_seed"][0]
    us, errs = s["u_vs_error"]
    frame = _Frame(us, errs, title=f"uncertainty vs error: {payload['method']}")
    frame.circles(us, errs, color="steelblue")
    return frame.render()


def band_svg(payload: dict) -> str:
    fig = payload["per_seed"][0]["figures"]
    xs = fig["probe_x"]
    pred = np.asarray(fig["probe_pred"])
    u = np.asarray(fig["probe_u"])
    lo, hi = pred - u, pred + u
    all_y = list(hi) + list(lo) + list(fig["train_y"])
    frame = _Frame(xs, all_y, title=f"uncertainty band: {payload['method']}")
    frame.polygon(list(xs) + list(reversed(xs)),
                  list(hi) + list(reversed(list(lo))))
    frame.polyline(xs, pred, color="navy")
    frame.circles(fig["train_x"], fig["train_y"], color="gray", r=1.2)
    return frame.render()


def heatmap_svg(payload: dict) -> str:
    fig = payload["per_seed"][0]["figures"]
    grid = np.asarray(fig["grid"])
    u = np.asarray(fig["grid_u"])
    res = int(round(np.sqrt(len(grid))))
    frame = _Frame(grid[:, 0], grid[:, 1],
                   title=f"uncertainty heatmap: {payload['method']}")
    span_x = (grid[:, 0].max() - grid[:, 0].min()) / max(res - 1, 1)
    span_y = (grid[:, 1].max() - grid[:, 1].min()) / max(res - 1, 1)
    top = u.max() if u.max() > 0 else 1.0
    for (x, y), value in zip(grid, u):
        level = int(255 * (1.0 - value / top))
        frame.cell(x - span_x / 2, y - span_y / 2, span_x, span_y,
                   f"rgb(255,{level},{level})")
    pts = np.asarray(fig["train_xy"])
    labels = np.asarray(fig["train_labels"])
    frame.circles(pts[labels == 0, 0], pts[labels == 0, 1], color="blue")
    frame.circles(pts[labels == 1, 0], pts[labels == 1, 1], color="red")
    return frame.render()


# -- emission -------------------------------------------------------------------

def emit_report(payload_or_result, formats, out_dir) -> list[Path]:
    """Write the requested report artifacts; returns the file paths."""
    if isinstance(payload_or_result, RunResult):
        payload = serialize_result(payload_or_result)
    else:
        payload = payload_or_result
    if isinstance(formats, str):
        formats = [f.strip() for f in formats.split(",") if f.strip()]
    unknown = set(formats) - set(FORMATS)
    if unknown:
        raise ValueError(f"unknown report formats {sorted(unknown)}; "
                         f"valid: {FORMATS}")
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    written = []

    def emit(name: str, text: str):
        path = out_dir / name
        path.write_text(text, encoding="utf-8")
        written.append(path)

    if "csv" in formats:
        emit("metrics.csv", metrics_csv(payload))
    if "md" in formats:
        emit("metrics.md", metrics_markdown([payload]))
    if "svg" in formats:
        emit("calibration.svg", calibration_svg(payload))
        emit("u_vs_error.svg", u_vs_error_svg(payload))
        figures = payload["per_seed"][0]["figures"]
        if "probe_x" in figures:
            emit("uncertainty_band.svg", band_svg(payload))
        if "grid" in figures:
            emit("uncertainty_heatmap.svg", heatmap_svg(payload))
    return written
