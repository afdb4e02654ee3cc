"""JSON result files and static HTML heat-map reports."""

from __future__ import annotations

import html
import json
from pathlib import Path

from .core import AttributionResult, FeaturePartition, Mode
from .errors import ReportError

SCHEMA_VERSION = 1


def intensities(display: tuple[float, ...] | list[float]) -> list[float]:
    """Per-feature shading in [0, 1]: ``display_i / max(display)``."""
    peak = max(display, default=0.0)
    if peak <= 0:
        return [0.0] * len(display)
    return [min(1.0, max(0.0, d / peak)) for d in display]


def to_json_dict(result: AttributionResult) -> dict:
    part = result.partition
    return {
        "version": SCHEMA_VERSION,
        "source_id": part.source_id,
        "task": result.task,
        "model_id": result.model_id,
        "splitter": part.splitter_name,
        "comparator": result.comparator,
        "mode": result.mode.value,
        "sampling_ratio": result.sampling_ratio,
        "seed": result.seed,
        "coalition_count": result.coalition_count,
        "features": [
            {
                "index": f.index,
                "text": f.text,
                "byte_start": f.byte_start,
                "byte_end": f.byte_end,
                "raw": r,
                "display": d,
            }
            for f, r, d in zip(part, result.raw, result.display)
        ],
        "output_text": result.output_text,
    }


def from_json_dict(d: dict) -> AttributionResult:
    if d.get("version") != SCHEMA_VERSION:
        raise ReportError(f"unsupported result version {d.get('version')!r}")
    feats = d["features"]
    part = FeaturePartition.from_texts(d["source_id"], [f["text"] for f in feats], d["splitter"])
    for f, g in zip(part, feats):
        if (f.byte_start, f.byte_end) != (g["byte_start"], g["byte_end"]):
            raise ReportError(f"feature {f.index} offsets disagree with its text")
    return AttributionResult(
        partition=part,
        raw=tuple(f["raw"] for f in feats),
        display=tuple(f["display"] for f in feats),
        mode=Mode.parse(d["mode"]),
        sampling_ratio=d["sampling_ratio"],
        seed=d["seed"],
        coalition_count=d["coalition_count"],
        task=d["task"],
        model_id=d["model_id"],
        comparator=d["comparator"],
        output_text=d["output_text"],
    )


def emit_json(result: AttributionResult, path: str | Path) -> Path:
    path = Path(path)
    try:
        path.write_text(json.dumps(to_json_dict(result), indent=2, ensure_ascii=False) + "\n", encoding="utf-8")
    except OSError as exc:
        raise ReportError(f"cannot write {path}: {exc}") from exc
    return path


def load_json(path: str | Path) -> AttributionResult:
    try:
        body = json.loads(Path(path).read_text(encoding="utf-8"))
    except (OSError, ValueError) as exc:
        raise ReportError(f"cannot read {path}: {exc}") from exc
    try:
        return from_json_dict(body)
    except (KeyError, TypeError, ValueError) as exc:
        raise ReportError(f"malformed result file {path}: {exc}") from exc


_STYLE = """\
body { font-family: system-ui, sans-serif; margin: 2em; color: #111; }
.pane { display: flex; gap: 2em; align-items: flex-start; }
.pane > section { flex: 1; min-width: 0; }
pre { white-space: pre-wrap; font-family: ui-monospace, monospace; font-size: 14px;
      border: 1px solid #ccc; padding: 1em; line-height: 1.7; }
.feat { border-radius: 3px; }
.pct { font-size: 10px; color: #333; vertical-align: super; margin: 0 2px; }
table { border-collapse: collapse; margin-top: 1em; }
td, th { border: 1px solid #ccc; padding: 2px 8px; text-align: right; }
td.t { text-align: left; font-family: ui-monospace, monospace; }
"""


def render_html(result: AttributionResult, model_output: str | None = None) -> str:
    """Self-contained page: input features shaded by attribution, model output
    alongside."""
    model_output = result.output_text if model_output is None else model_output
    shades = intensities(result.display)
    spans = []
    rows = []
    for f, d, a, raw in zip(result.partition, result.display, shades, result.raw):
        label = f"{d * 100:.1f}%"
        spans.append(
            f'<span class="feat" data-index="{f.index}" '
            f'style="background-color: rgba(0, 160, 60, {a:.4f})" title="{label}">'
            f"{html.escape(f.text)}</span>"
            f'<span class="pct">{label}</span>'
        )
        snippet = f.text.strip().splitlines()[0] if f.text.strip() else ""
        rows.append(
            f"<tr><td>{f.index}</td><td class=\"t\">{html.escape(snippet[:80])}</td>"
            f"<td>{raw:.6f}</td><td>{label}</td></tr>"
        )
    title = html.escape(f"Attribution for {result.partition.source_id}")
    meta = html.escape(
        f"model {result.model_id or '?'} | comparator {result.comparator or '?'} | "
        f"{result.mode.value} | {result.coalition_count} coalitions"
    )
    return (
        "<!DOCTYPE html>\n"
        '<html lang="en">\n<head>\n<meta charset="utf-8">\n'
        f"<title>{title}</title>\n<style>\n{_STYLE}</style>\n</head>\n<body>\n"
        f"<h1>{title}</h1>\n<p>{meta}</p>\n"
        '<div class="pane">\n'
        f'<section><h2>Input</h2>\n<pre class="input">{"".join(spans)}</pre></section>\n'
        f'<section><h2>Model output</h2>\n<pre class="output">{html.escape(model_output)}</pre></section>\n'
        "</div>\n"
        "<table>\n<tr><th>#</th><th>feature</th><th>raw</th><th>share</th></tr>\n"
        + "\n".join(rows)
        + "\n</table>\n</body>\n</html>\n"
    )


def emit_html(result: AttributionResult, model_output: str | None, path: str | Path) -> Path:
    path = Path(path)
    try:
        path.write_text(render_html(result, model_output), encoding="utf-8")
    except OSError as exc:
        raise ReportError(f"cannot write {path}: {exc}") from exc
    return path
