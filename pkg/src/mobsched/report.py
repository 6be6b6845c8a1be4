"""Charts and text summaries from a campaign report directory.

SVG is written directly; each chart is a handful of line/rect primitives
whose coordinates come straight from the CSV values.
"""

from __future__ import annotations

import csv
import json
from html import escape
from pathlib import Path

PALETTE = {
    1: "#4e79a7", 2: "#f28e2b", 3: "#e15759", 4: "#76b7b2",
    5: "#59a14f", 6: "#edc948", 7: "#b07aa1",
}
SERIES_COLORS = ("#1f2933", "#c0392b", "#2e86c1")
OBJECTIVES = ("speed", "stack", "cmp")
W, H, PAD = 720, 300, 40


class ReportError(Exception):
    pass


def read_rounds(directory) -> list[dict]:
    path = Path(directory) / "rounds.csv"
    if not path.is_file():
        raise ReportError(f"missing {path}")
    with open(path, newline="") as fh:
        return list(csv.DictReader(fh))


def chart_data(rows: list[dict]) -> dict:
    masks = [int(r["mask"]) for r in rows]
    n = len(masks)
    counts = {m: masks.count(m) for m in range(1, 8)}
    shares = {str(m): (100.0 * c / n if n else 0.0) for m, c in counts.items()}
    states = [r["state"] for r in rows]
    state_share = {s: (100.0 * states.count(s) / n if n else 0.0)
                   for s in ("exploration", "exploitation")}
    series = {o: [float(r[f"v_{o}"]) for r in rows] for o in OBJECTIVES}
    return {
        "rounds": n,
        "bands": masks,
        "series": series,
        "combination_share": shares,
        "state_share": state_share,
    }


def _svg(body: list[str], title: str, width: int = W, height: int = H) -> str:
    return "\n".join([
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}" '
        f'viewBox="0 0 {width} {height}">',
        f"<title>{escape(title)}</title>",
        f'<rect x="0" y="0" width="{width}" height="{height}" fill="#ffffff"/>',
        f'<text x="{width / 2}" y="20" text-anchor="middle" font-size="14">{escape(title)}</text>',
        *body,
        "</svg>",
    ]) + "\n"


def objective_chart(data: dict) -> str:
    """Normalised objective lines over combination-coloured round bands."""
    n = data["rounds"]
    inner_w, inner_h = W - 2 * PAD, H - 2 * PAD
    body = []
    if n:
        bw = inner_w / n
        for k, mask in enumerate(data["bands"]):
            body.append(f'<rect class="band" data-mask="{mask}" x="{PAD + k * bw:.3f}" '
                        f'y="{PAD}" width="{bw:.3f}" height="{inner_h}" '
                        f'fill="{PALETTE.get(mask, "#cccccc")}" fill-opacity="0.25"/>')
    for color, (name, values) in zip(SERIES_COLORS, data["series"].items()):
        if not values:
            continue
        top = max(values) or 1.0
        step = inner_w / max(len(values), 1)
        pts = " ".join(f"{PAD + (k + 0.5) * step:.3f},{PAD + inner_h * (1 - v / top):.3f}"
                       for k, v in enumerate(values))
        body.append(f'<polyline class="series" data-objective="{name}" fill="none" '
                    f'stroke="{color}" stroke-width="1.5" points="{pts}"/>')
    body.append(f'<line x1="{PAD}" y1="{H - PAD}" x2="{W - PAD}" y2="{H - PAD}" stroke="#000"/>')
    return _svg(body, "Per-round objective values (normalised to max) and selected combinations")


def bar_chart(shares: dict, title: str, colors=None) -> str:
    body = []
    items = list(shares.items())
    inner_w, inner_h = W - 2 * PAD, H - 2 * PAD
    bw = inner_w / max(len(items), 1)
    for k, (label, pct) in enumerate(items):
        h = inner_h * pct / 100.0
        color = (colors or {}).get(label, "#4e79a7")
        x = PAD + k * bw
        body.append(f'<rect class="bar" data-label="{escape(label)}" data-share="{pct!r}" '
                    f'x="{x + 0.1 * bw:.3f}" y="{H - PAD - h:.3f}" width="{0.8 * bw:.3f}" '
                    f'height="{h:.3f}" fill="{color}"/>')
        body.append(f'<text x="{x + bw / 2:.3f}" y="{H - PAD + 14}" text-anchor="middle" '
                    f'font-size="10">{escape(label)} ({pct:.1f}%)</text>')
    return _svg(body, title)


def text_summary(data: dict, summary: dict | None = None) -> str:
    lines = [f"rounds: {data['rounds']}"]
    if summary:
        for key in ("target", "cumulative_execs", "nic_execs", "nic_share", "pool_size",
                    "edges", "good_seed_fraction"):
            if key in summary:
                lines.append(f"{key}: {summary[key]}")
        for name, v in summary.get("objective_means", {}).items():
            lines.append(f"mean {name}: {v:.4f}")
    lines.append("combination share (%):")
    for mask, pct in data["combination_share"].items():
        lines.append(f"  {mask}: {pct:.2f}")
    lines.append("state share (%):")
    for state, pct in data["state_share"].items():
        lines.append(f"  {state}: {pct:.2f}")
    return "\n".join(lines) + "\n"


def render_report(directory, out=None) -> dict:
    """Write charts, chart data and summary.txt; return the chart data."""
    directory = Path(directory)
    out = Path(out) if out is not None else directory
    out.mkdir(parents=True, exist_ok=True)
    data = chart_data(read_rounds(directory))
    summary = None
    if (directory / "summary.json").is_file():
        summary = json.loads((directory / "summary.json").read_text())
    combo_colors = {str(m): c for m, c in PALETTE.items()}
    (out / "objectives.svg").write_text(objective_chart(data))
    (out / "combinations.svg").write_text(
        bar_chart(data["combination_share"], "Selected objective combinations", combo_colors))
    (out / "states.svg").write_text(
        bar_chart(data["state_share"], "Fuzzing state share",
                  {"exploration": "#59a14f", "exploitation": "#e15759"}))
    (out / "chart_data.json").write_text(json.dumps(data, indent=1, sort_keys=True) + "\n")
    (out / "summary.txt").write_text(text_summary(data, summary))
    return data
