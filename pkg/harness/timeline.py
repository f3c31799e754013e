"""
Self-contained SVG timeline of one scheduled episode.

Two mode bands (backbone level, head level) colour every control step;
rho and the three motion speeds are drawn as curves over the same x axis.
"""

import logging
import xml.etree.ElementTree as ET
from pathlib import Path
from typing import Sequence

from models import BACKBONE_LEVELS, HEAD_LEVELS
from signals.observation import SPEED_SCALES
from scheduler.rollout import StepRecord

logger = logging.getLogger(__name__)

SVG_NS = "http://www.w3.org/2000/svg"

# Level 0 is the darkest: full compute stands out against reuse.
BACKBONE_COLORS = ("#08306b", "#2171b5", "#6baed6", "#c6dbef", "#f7fbff")
HEAD_COLORS = ("#7f2704", "#f16913", "#fdd0a2")
CURVE_COLORS = {"rho": "#000000", "v_grip": "#2ca02c", "v_trans": "#d62728", "v_rot": "#9467bd"}

WIDTH = 900
MARGIN = 60
BAND_HEIGHT = 24
PLOT_HEIGHT = 200


def _text(parent: ET.Element, x: float, y: float, label: str, size: int = 11, anchor: str = "start") -> None:
    node = ET.SubElement(parent, "text", x=f"{x:.1f}", y=f"{y:.1f}", attrib={
        "font-size": str(size), "font-family": "sans-serif", "text-anchor": anchor})
    node.text = label


def _band(svg: ET.Element, y: float, levels: Sequence[int], colors: Sequence[str], step_w: float, label: str) -> None:
    _text(svg, MARGIN - 6, y + BAND_HEIGHT * 0.7, label, anchor="end")
    # Consecutive equal levels merge into one rect.
    start = 0
    for i in range(1, len(levels) + 1):
        if i == len(levels) or levels[i] != levels[start]:
            ET.SubElement(svg, "rect", x=f"{MARGIN + start * step_w:.2f}", y=f"{y:.1f}",
                          width=f"{(i - start) * step_w:.2f}", height=str(BAND_HEIGHT),
                          fill=colors[levels[start]], attrib={"data-level": str(levels[start])})
            start = i


def _curve(svg: ET.Element, values: Sequence[float], top: float, step_w: float, color: str, name: str) -> None:
    points = []
    for i, v in enumerate(values):
        v = min(max(v, 0.0), 1.0)
        x = MARGIN + (i + 0.5) * step_w
        y = top + PLOT_HEIGHT * (1.0 - v)
        points.append(f"{x:.2f},{y:.2f}")
    ET.SubElement(svg, "polyline", points=" ".join(points), fill="none", stroke=color,
                  attrib={"stroke-width": "1.5", "data-series": name})


def render_timeline(rows: Sequence[StepRecord], title: str = "") -> ET.Element:
    steps = max(len(rows), 1)
    step_w = (WIDTH - 2 * MARGIN) / steps
    band_top = 40
    plot_top = band_top + 2 * BAND_HEIGHT + 30
    height = plot_top + PLOT_HEIGHT + 70

    svg = ET.Element("svg", xmlns=SVG_NS, width=str(WIDTH), height=str(height),
                     viewBox=f"0 0 {WIDTH} {height}")
    ET.SubElement(svg, "rect", x="0", y="0", width=str(WIDTH), height=str(height), fill="#ffffff")
    _text(svg, MARGIN, 22, title or f"{len(rows)} control steps", size=14)

    # 1. Mode bands
    _band(svg, band_top, [r.backbone for r in rows], BACKBONE_COLORS, step_w, "backbone")
    _band(svg, band_top + BAND_HEIGHT + 4, [r.head for r in rows], HEAD_COLORS, step_w, "head")

    # 2. Signal curves; speeds scaled by the policy-input normalizers
    ET.SubElement(svg, "rect", x=str(MARGIN), y=str(plot_top), width=f"{WIDTH - 2 * MARGIN}",
                  height=str(PLOT_HEIGHT), fill="none", stroke="#999999")
    if rows:
        grip_scale, trans_scale, rot_scale = SPEED_SCALES
        _curve(svg, [r.rho for r in rows], plot_top, step_w, CURVE_COLORS["rho"], "rho")
        _curve(svg, [r.v_grip / grip_scale for r in rows], plot_top, step_w, CURVE_COLORS["v_grip"], "v_grip")
        _curve(svg, [r.v_trans / trans_scale for r in rows], plot_top, step_w, CURVE_COLORS["v_trans"], "v_trans")
        _curve(svg, [r.v_rot / rot_scale for r in rows], plot_top, step_w, CURVE_COLORS["v_rot"], "v_rot")

    # 3. Legend
    y = plot_top + PLOT_HEIGHT + 25
    x = MARGIN
    for name, color in CURVE_COLORS.items():
        ET.SubElement(svg, "rect", x=f"{x}", y=f"{y - 9}", width="10", height="10", fill=color)
        _text(svg, x + 14, y, name)
        x += 80
    for level in range(BACKBONE_LEVELS):
        ET.SubElement(svg, "rect", x=f"{x}", y=f"{y - 9}", width="10", height="10", fill=BACKBONE_COLORS[level])
        _text(svg, x + 14, y, f"B{level}")
        x += 40
    for level in range(HEAD_LEVELS):
        ET.SubElement(svg, "rect", x=f"{x}", y=f"{y - 9}", width="10", height="10", fill=HEAD_COLORS[level])
        _text(svg, x + 14, y, f"H{level}")
        x += 40
    return svg


def write_timeline_svg(path: Path, rows: Sequence[StepRecord], title: str = "") -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    tree = ET.ElementTree(render_timeline(rows, title))
    tree.write(path, encoding="utf-8", xml_declaration=True)
    logger.info(f"🖼️ Timeline written to {path}")
    return path
