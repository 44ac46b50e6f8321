"""SVG rendering: ECG window with distance-map overlay, and F1-vs-SNR line charts.

ECG is drawn in blue, the distance map in red on its own [0, 1] scale, detected
peaks in green and false positives / false negatives as yellow glyphs. Each
plotted series is a ``<g class="series" data-label=...>`` element.
"""
from __future__ import annotations

import xml.etree.ElementTree as ET
from typing import Mapping, Optional, Sequence

import numpy as np

from .errors import ConfigError
from .evaluation.matching import DEFAULT_TOL_MS, match_peaks

ECG_COLOR = "#1f4fd8"
DT_COLOR = "#d62728"
PEAK_COLOR = "#2ca02c"
ERROR_COLOR = "#f2c200"
SVG_NS = "http://www.w3.org/2000/svg"
_PALETTE = ("#1f4fd8", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#17becf")


def _num(v: float) -> str:
    return f"{v:.2f}"


def _points(xs: np.ndarray, ys: np.ndarray) -> str:
    return " ".join(f"{_num(x)},{_num(y)}" for x, y in zip(xs, ys))


class _Canvas:
    def __init__(self, width: int, height: int, margin: int = 40, title: str = ""):
        self.width, self.height, self.margin = width, height, margin
        self.root = ET.Element("svg", {
            "xmlns": SVG_NS, "width": str(width), "height": str(height),
            "viewBox": f"0 0 {width} {height}",
        })
        ET.SubElement(self.root, "rect", {"x": "0", "y": "0", "width": str(width),
                                          "height": str(height), "fill": "white"})
        if title:
            t = ET.SubElement(self.root, "text", {"x": str(margin), "y": str(margin // 2 + 4),
                                                  "font-size": "14", "font-family": "sans-serif"})
            t.text = title

    @property
    def plot_w(self) -> float:
        return self.width - 2 * self.margin

    @property
    def plot_h(self) -> float:
        return self.height - 2 * self.margin

    def sx(self, frac) -> np.ndarray:
        return self.margin + np.asarray(frac, dtype=np.float64) * self.plot_w

    def sy(self, frac) -> np.ndarray:
        # frac 0 at the bottom, 1 at the top
        return self.height - self.margin - np.asarray(frac, dtype=np.float64) * self.plot_h

    def group(self, label: str, cls: str = "series") -> ET.Element:
        return ET.SubElement(self.root, "g", {"class": cls, "data-label": label})

    def to_string(self) -> str:
        ET.indent(self.root)
        return ET.tostring(self.root, encoding="unicode") + "\n"


def _unit(y: np.ndarray, lo: Optional[float] = None, hi: Optional[float] = None) -> np.ndarray:
    lo = float(np.min(y)) if lo is None else lo
    hi = float(np.max(y)) if hi is None else hi
    if hi - lo < 1e-12:
        return np.full(y.shape, 0.5)
    return (y - lo) / (hi - lo)


def _glyph(parent: ET.Element, x: float, y: float, kind: str) -> None:
    if kind == "fp":
        # cross
        d = f"M{_num(x - 5)},{_num(y - 5)} L{_num(x + 5)},{_num(y + 5)} M{_num(x - 5)},{_num(y + 5)} L{_num(x + 5)},{_num(y - 5)}"
        ET.SubElement(parent, "path", {"d": d, "stroke": ERROR_COLOR, "stroke-width": "2.5", "fill": "none"})
    else:
        # open triangle
        d = f"M{_num(x)},{_num(y - 6)} L{_num(x + 6)},{_num(y + 5)} L{_num(x - 6)},{_num(y + 5)} Z"
        ET.SubElement(parent, "path", {"d": d, "stroke": ERROR_COLOR, "stroke-width": "2", "fill": "none"})


def window_svg(samples, fs: float, dt=None, peaks: Optional[Sequence[int]] = None,
               reference: Optional[Sequence[int]] = None, overlay_dt: bool = True,
               tol_ms: float = DEFAULT_TOL_MS, title: str = "",
               width: int = 1000, height: int = 320) -> str:
    """One ECG window with optional distance-map overlay, peaks and FP/FN markers.

    ``dt`` may be a :class:`~rpeakkit.dtmap.DistanceMap` or an array aligned with
    ``samples``. Peak and reference indices are at ``fs``.
    """
    x = np.asarray(samples, dtype=np.float64)
    if x.size < 2:
        raise ConfigError("need at least two samples to plot")
    if overlay_dt and dt is None:
        raise ConfigError("distance-map overlay requested but no distance map given")
    cv = _Canvas(width, height, title=title)
    n = x.size
    t = np.arange(n) / max(n - 1, 1)
    ecg_y = _unit(x)

    ET.SubElement(cv.root, "rect", {
        "x": _num(cv.margin), "y": _num(cv.margin), "width": _num(cv.plot_w),
        "height": _num(cv.plot_h), "fill": "none", "stroke": "#999999"})
    g = cv.group("ecg")
    ET.SubElement(g, "polyline", {"points": _points(cv.sx(t), cv.sy(ecg_y)), "fill": "none",
                                  "stroke": ECG_COLOR, "stroke-width": "1"})

    if overlay_dt and dt is not None:
        d = np.asarray(getattr(dt, "values", dt), dtype=np.float64)
        if d.size != n:
            raise ConfigError(f"distance map has {d.size} samples, window has {n}")
        g = cv.group("dt")
        ET.SubElement(g, "polyline", {"points": _points(cv.sx(t), cv.sy(np.clip(d, 0.0, 1.0))),
                                      "fill": "none", "stroke": DT_COLOR, "stroke-width": "1"})
        # secondary axis labels for the [0, 1] distance scale
        for v in (0.0, 1.0):
            lbl = ET.SubElement(cv.root, "text", {
                "x": _num(cv.width - cv.margin + 4), "y": _num(float(cv.sy(v)) + 4),
                "font-size": "10", "fill": DT_COLOR, "font-family": "sans-serif"})
            lbl.text = f"{v:g}"

    p = np.asarray([] if peaks is None else peaks, dtype=np.int64)
    p = p[(p >= 0) & (p < n)]
    if p.size:
        g = cv.group("peaks")
        for i in p.tolist():
            ET.SubElement(g, "circle", {"cx": _num(float(cv.sx(t[i]))), "cy": _num(float(cv.sy(ecg_y[i]))),
                                        "r": "4", "fill": PEAK_COLOR})

    if reference is not None:
        ref = np.asarray(reference, dtype=np.int64)
        ref = ref[(ref >= 0) & (ref < n)]
        mr = match_peaks(np.sort(p), np.sort(ref), fs, tol_ms)
        hit_p = {a for a, _ in mr.pairs}
        hit_r = {b for _, b in mr.pairs}
        fps = [i for i in p.tolist() if i not in hit_p]
        fns = [i for i in ref.tolist() if i not in hit_r]
        if fps:
            g = cv.group("false_positives", cls="markers")
            for i in fps:
                _glyph(g, float(cv.sx(t[i])), float(cv.sy(ecg_y[i])) - 12, "fp")
        if fns:
            g = cv.group("false_negatives", cls="markers")
            for i in fns:
                _glyph(g, float(cv.sx(t[i])), float(cv.sy(ecg_y[i])) - 12, "fn")
    return cv.to_string()


def sweep_svg(curves: Mapping[str, Sequence[tuple]], title: str = "F1 vs SNR",
              width: int = 640, height: int = 400) -> str:
    """Line chart of F1 against SNR; ``curves`` maps detector name to (snr_db, f1) pairs."""
    cv = _Canvas(width, height, margin=50, title=title)
    all_snr = [s for pts in curves.values() for s, _ in pts]
    lo, hi = (min(all_snr), max(all_snr)) if all_snr else (0.0, 1.0)
    if hi - lo < 1e-12:
        lo, hi = lo - 1.0, hi + 1.0
    ET.SubElement(cv.root, "rect", {
        "x": _num(cv.margin), "y": _num(cv.margin), "width": _num(cv.plot_w),
        "height": _num(cv.plot_h), "fill": "none", "stroke": "#999999"})
    for v in (0.0, 0.5, 1.0):
        lbl = ET.SubElement(cv.root, "text", {"x": _num(cv.margin - 30), "y": _num(float(cv.sy(v)) + 4),
                                              "font-size": "10", "font-family": "sans-serif"})
        lbl.text = f"{v:.1f}"
    for s in sorted(set(all_snr)):
        lbl = ET.SubElement(cv.root, "text", {
            "x": _num(float(cv.sx((s - lo) / (hi - lo))) - 6), "y": _num(cv.height - cv.margin + 16),
            "font-size": "10", "font-family": "sans-serif"})
        lbl.text = f"{s:g}"
    for k, (name, pts) in enumerate(curves.items()):
        pts = sorted(pts)
        color = _PALETTE[k % len(_PALETTE)]
        g = cv.group(name)
        xs = cv.sx([(s - lo) / (hi - lo) for s, _ in pts])
        ys = cv.sy([f for _, f in pts])
        ET.SubElement(g, "polyline", {"points": _points(xs, ys), "fill": "none",
                                      "stroke": color, "stroke-width": "2"})
        for x, y in zip(xs, ys):
            ET.SubElement(g, "circle", {"cx": _num(x), "cy": _num(y), "r": "3", "fill": color})
        leg = ET.SubElement(cv.root, "text", {
            "x": _num(cv.width - cv.margin - 110), "y": _num(cv.margin + 14 + 14 * k),
            "font-size": "11", "fill": color, "font-family": "sans-serif"})
        leg.text = name
    return cv.to_string()


def series_labels(svg_text: str) -> list:
    """Labels of the plotted series in an SVG produced by this module."""
    root = ET.fromstring(svg_text)
    return [g.get("data-label") for g in root.iter(f"{{{SVG_NS}}}g") if g.get("class") == "series"]


def marker_labels(svg_text: str) -> list:
    root = ET.fromstring(svg_text)
    return [g.get("data-label") for g in root.iter(f"{{{SVG_NS}}}g") if g.get("class") == "markers"]
