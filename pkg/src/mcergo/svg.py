"""Deterministic log-log SVG charts.

Hand-rolled SVG 1.1 output so that identical input produces byte-identical
files; no plotting dependency.
"""
from __future__ import annotations

import math

from .errors import EmptySeries

_WIDTH = 640
_HEIGHT = 480
_MARGIN_L = 70
_MARGIN_R = 20
_MARGIN_T = 40
_MARGIN_B = 50
_COLORS = ("#1b6ca8", "#c0392b", "#27ae60", "#8e44ad", "#d68910", "#16a085")


def _fmt(x: float) -> str:
    return f"{x:.3f}"


def emit_svg(series, path, title="", xlabel="", ylabel=""):
    """Write a log-log line chart.

    Parameters
    ----------
    series : list of (label, points)
        Each ``points`` is a nonempty sequence of (x, y) pairs with
        strictly positive coordinates.
    path : file path
        Destination; bytes are a pure function of the arguments.

    Raises
    ------
    EmptySeries
        If there are no series or a series has no points.
    """
    series = list(series)
    if not series or any(len(pts) == 0 for _, pts in series):
        raise EmptySeries("need at least one series with at least one point")
    for _, pts in series:
        for x, y in pts:
            if x <= 0.0 or y <= 0.0:
                raise EmptySeries("log-log chart needs positive coordinates")

    xs = [math.log10(x) for _, pts in series for x, _ in pts]
    ys = [math.log10(y) for _, pts in series for _, y in pts]
    x_lo, x_hi = min(xs), max(xs)
    y_lo, y_hi = min(ys), max(ys)
    if x_hi - x_lo < 1e-9:
        x_lo, x_hi = x_lo - 0.5, x_hi + 0.5
    if y_hi - y_lo < 1e-9:
        y_lo, y_hi = y_lo - 0.5, y_hi + 0.5

    plot_w = _WIDTH - _MARGIN_L - _MARGIN_R
    plot_h = _HEIGHT - _MARGIN_T - _MARGIN_B

    def px(lx):
        return _MARGIN_L + (lx - x_lo) / (x_hi - x_lo) * plot_w

    def py(ly):
        return _HEIGHT - _MARGIN_B - (ly - y_lo) / (y_hi - y_lo) * plot_h

    out = []
    out.append('<?xml version="1.0" encoding="UTF-8"?>')
    out.append(
        f'<svg xmlns="http://www.w3.org/2000/svg" version="1.1" '
        f'width="{_WIDTH}" height="{_HEIGHT}" viewBox="0 0 {_WIDTH} {_HEIGHT}">'
    )
    out.append(f'<rect width="{_WIDTH}" height="{_HEIGHT}" fill="white"/>')
    if title:
        out.append(
            f'<text x="{_WIDTH // 2}" y="24" text-anchor="middle" '
            f'font-family="sans-serif" font-size="16">{_esc(title)}</text>'
        )
    # frame
    out.append(
        f'<rect x="{_MARGIN_L}" y="{_MARGIN_T}" width="{plot_w}" height="{plot_h}" '
        f'fill="none" stroke="#444444" stroke-width="1"/>'
    )
    # decade ticks
    for d in range(math.floor(x_lo), math.floor(x_hi) + 1):
        if x_lo <= d <= x_hi:
            x = px(d)
            out.append(
                f'<line x1="{_fmt(x)}" y1="{_HEIGHT - _MARGIN_B}" x2="{_fmt(x)}" '
                f'y2="{_HEIGHT - _MARGIN_B + 5}" stroke="#444444"/>'
            )
            out.append(
                f'<text x="{_fmt(x)}" y="{_HEIGHT - _MARGIN_B + 18}" text-anchor="middle" '
                f'font-family="sans-serif" font-size="11">1e{d}</text>'
            )
    for d in range(math.floor(y_lo), math.floor(y_hi) + 1):
        if y_lo <= d <= y_hi:
            y = py(d)
            out.append(
                f'<line x1="{_MARGIN_L - 5}" y1="{_fmt(y)}" x2="{_MARGIN_L}" '
                f'y2="{_fmt(y)}" stroke="#444444"/>'
            )
            out.append(
                f'<text x="{_MARGIN_L - 8}" y="{_fmt(y + 4)}" text-anchor="end" '
                f'font-family="sans-serif" font-size="11">1e{d}</text>'
            )
    if xlabel:
        out.append(
            f'<text x="{_MARGIN_L + plot_w // 2}" y="{_HEIGHT - 12}" text-anchor="middle" '
            f'font-family="sans-serif" font-size="13">{_esc(xlabel)}</text>'
        )
    if ylabel:
        cx, cy = 18, _MARGIN_T + plot_h // 2
        out.append(
            f'<text x="{cx}" y="{cy}" text-anchor="middle" font-family="sans-serif" '
            f'font-size="13" transform="rotate(-90 {cx} {cy})">{_esc(ylabel)}</text>'
        )
    for idx, (label, pts) in enumerate(series):
        color = _COLORS[idx % len(_COLORS)]
        coords = [(px(math.log10(x)), py(math.log10(y))) for x, y in pts]
        if len(coords) > 1:
            d = " ".join(f"{_fmt(x)},{_fmt(y)}" for x, y in coords)
            out.append(
                f'<polyline points="{d}" fill="none" stroke="{color}" stroke-width="1.5"/>'
            )
        for x, y in coords:
            out.append(f'<circle cx="{_fmt(x)}" cy="{_fmt(y)}" r="3" fill="{color}"/>')
        ly = _MARGIN_T + 16 + 16 * idx
        out.append(
            f'<line x1="{_MARGIN_L + plot_w - 130}" y1="{ly - 4}" '
            f'x2="{_MARGIN_L + plot_w - 110}" y2="{ly - 4}" stroke="{color}" stroke-width="2"/>'
        )
        out.append(
            f'<text x="{_MARGIN_L + plot_w - 104}" y="{ly}" font-family="sans-serif" '
            f'font-size="12">{_esc(label)}</text>'
        )
    out.append("</svg>")
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write("\n".join(out) + "\n")


def _esc(s: str) -> str:
    return s.replace("&", "&amp;").replace("<", "&lt;").replace(">", "&gt;")
