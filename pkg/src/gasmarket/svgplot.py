"""Small deterministic SVG charts: lines with optional shaded bands, and
bars with optional error whiskers.

CSV and JSON stay the canonical outputs; these charts exist so a run
directory can be inspected without any plotting stack.  Rendering is pure
string assembly with fixed number formatting, so identical inputs produce
identical bytes.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from xml.sax.saxutils import escape

import numpy as np

from .docio import atomic_write_text
from .errors import ConfigurationError

__all__ = ["LineSeries", "line_chart", "bar_chart", "nice_ticks", "save_svg"]

PALETTE = ("#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b")

_MARGIN_LEFT = 64.0
_MARGIN_RIGHT = 16.0
_MARGIN_TOP = 34.0
_MARGIN_BOTTOM = 46.0


def _fmt(v: float) -> str:
    """Fixed coordinate formatting so output bytes are reproducible."""
    return f"{v:.2f}".rstrip("0").rstrip(".")


def _fmt_tick(v: float) -> str:
    if v == 0:
        return "0"
    return f"{v:.4g}"


def nice_ticks(lo: float, hi: float, target: int = 5) -> list[float]:
    """Round tick positions covering [lo, hi] at a 1/2/5 step."""
    if not (math.isfinite(lo) and math.isfinite(hi)):
        raise ConfigurationError(f"tick range must be finite, got ({lo}, {hi})")
    if hi < lo:
        lo, hi = hi, lo
    if hi == lo:
        pad = 1.0 if lo == 0.0 else abs(lo) * 0.1
        lo, hi = lo - pad, hi + pad
    raw = (hi - lo) / max(target, 1)
    power = 10.0 ** math.floor(math.log10(raw))
    for mult in (1.0, 2.0, 5.0, 10.0):
        if raw <= mult * power:
            step = mult * power
            break
    first = math.ceil(lo / step) * step
    ticks = []
    v = first
    while v <= hi + step * 1e-9:
        ticks.append(0.0 if abs(v) < step * 1e-9 else v)
        v += step
    return ticks


@dataclass(frozen=True)
class LineSeries:
    """One polyline; ``band`` is an optional (lower, upper) shaded region."""

    x: np.ndarray
    y: np.ndarray
    label: str = ""
    band: tuple[np.ndarray, np.ndarray] | None = None

    def __post_init__(self):
        x = np.asarray(self.x, dtype=np.float64)
        y = np.asarray(self.y, dtype=np.float64)
        if x.ndim != 1 or x.shape != y.shape or x.size == 0:
            raise ConfigurationError(
                f"x and y must be matching nonempty 1-D arrays, got shapes "
                f"{x.shape} and {y.shape}")
        object.__setattr__(self, "x", x)
        object.__setattr__(self, "y", y)
        if self.band is not None:
            lo = np.asarray(self.band[0], dtype=np.float64)
            hi = np.asarray(self.band[1], dtype=np.float64)
            if lo.shape != x.shape or hi.shape != x.shape:
                raise ConfigurationError("band arrays must match x in shape")
            object.__setattr__(self, "band", (lo, hi))


class _Frame:
    """Maps data coordinates into the pixel rectangle of the plot area."""

    def __init__(self, x_lo, x_hi, y_lo, y_hi, width, height):
        if x_hi == x_lo:
            x_lo, x_hi = x_lo - 0.5, x_hi + 0.5
        if y_hi == y_lo:
            pad = 1.0 if y_lo == 0.0 else abs(y_lo) * 0.1
            y_lo, y_hi = y_lo - pad, y_hi + pad
        self.x_lo, self.x_hi = float(x_lo), float(x_hi)
        self.y_lo, self.y_hi = float(y_lo), float(y_hi)
        self.left = _MARGIN_LEFT
        self.right = width - _MARGIN_RIGHT
        self.top = _MARGIN_TOP
        self.bottom = height - _MARGIN_BOTTOM

    def px(self, x: float) -> float:
        span = self.x_hi - self.x_lo
        return self.left + (x - self.x_lo) / span * (self.right - self.left)

    def py(self, y: float) -> float:
        span = self.y_hi - self.y_lo
        return self.bottom - (y - self.y_lo) / span * (self.bottom - self.top)


def _header(width: int, height: int, title: str) -> list[str]:
    parts = [
        f'<svg xmlns="http://www.w3.org/2000/svg" viewBox="0 0 {width} {height}" '
        f'width="{width}" height="{height}" '
        f'font-family="sans-serif" font-size="12">',
        f'<rect width="{width}" height="{height}" fill="white"/>',
    ]
    if title:
        parts.append(
            f'<text x="{_fmt(width / 2)}" y="20" text-anchor="middle" '
            f'font-size="14">{escape(title)}</text>')
    return parts


def _axes(frame: _Frame, x_ticks, y_ticks, x_label, y_label,
          width, height, skip_x_grid=False) -> list[str]:
    parts = []
    for tick in y_ticks:
        y = frame.py(tick)
        parts.append(
            f'<line x1="{_fmt(frame.left)}" y1="{_fmt(y)}" x2="{_fmt(frame.right)}" '
            f'y2="{_fmt(y)}" stroke="#dddddd" stroke-width="1"/>')
        parts.append(
            f'<text x="{_fmt(frame.left - 6)}" y="{_fmt(y + 4)}" '
            f'text-anchor="end">{escape(_fmt_tick(tick))}</text>')
    for tick in x_ticks:
        x = frame.px(tick)
        if not skip_x_grid:
            parts.append(
                f'<line x1="{_fmt(x)}" y1="{_fmt(frame.top)}" x2="{_fmt(x)}" '
                f'y2="{_fmt(frame.bottom)}" stroke="#eeeeee" stroke-width="1"/>')
        parts.append(
            f'<text x="{_fmt(x)}" y="{_fmt(frame.bottom + 16)}" '
            f'text-anchor="middle">{escape(_fmt_tick(tick))}</text>')
    parts.append(
        f'<rect x="{_fmt(frame.left)}" y="{_fmt(frame.top)}" '
        f'width="{_fmt(frame.right - frame.left)}" '
        f'height="{_fmt(frame.bottom - frame.top)}" fill="none" '
        f'stroke="#333333" stroke-width="1"/>')
    if x_label:
        parts.append(
            f'<text x="{_fmt((frame.left + frame.right) / 2)}" '
            f'y="{_fmt(height - 10)}" text-anchor="middle">{escape(x_label)}</text>')
    if y_label:
        cx, cy = 16.0, (frame.top + frame.bottom) / 2
        parts.append(
            f'<text x="{_fmt(cx)}" y="{_fmt(cy)}" text-anchor="middle" '
            f'transform="rotate(-90 {_fmt(cx)} {_fmt(cy)})">{escape(y_label)}</text>')
    return parts


def line_chart(series: list[LineSeries], title: str = "", x_label: str = "",
               y_label: str = "", width: int = 640, height: int = 400) -> str:
    """Polyline chart; series with a band get it shaded behind the line."""
    if not series:
        raise ConfigurationError("need at least one series")
    xs = np.concatenate([s.x for s in series])
    ys = [np.concatenate([s.y for s in series])]
    for s in series:
        if s.band is not None:
            ys.extend(s.band)
    all_y = np.concatenate(ys)
    frame = _Frame(xs.min(), xs.max(), all_y.min(), all_y.max(), width, height)
    parts = _header(width, height, title)
    parts += _axes(frame, nice_ticks(frame.x_lo, frame.x_hi),
                   nice_ticks(frame.y_lo, frame.y_hi), x_label, y_label,
                   width, height)
    for i, s in enumerate(series):
        color = PALETTE[i % len(PALETTE)]
        if s.band is not None:
            lo, hi = s.band
            forward = [f"{_fmt(frame.px(x))},{_fmt(frame.py(v))}"
                       for x, v in zip(s.x, hi)]
            backward = [f"{_fmt(frame.px(x))},{_fmt(frame.py(v))}"
                        for x, v in zip(s.x[::-1], lo[::-1])]
            parts.append(
                f'<polygon points="{" ".join(forward + backward)}" '
                f'fill="{color}" fill-opacity="0.15" stroke="none"/>')
        points = " ".join(f"{_fmt(frame.px(x))},{_fmt(frame.py(y))}"
                          for x, y in zip(s.x, s.y))
        parts.append(
            f'<polyline points="{points}" fill="none" stroke="{color}" '
            f'stroke-width="1.5"/>')
        if s.label:
            ly = frame.top + 14 + 16 * i
            parts.append(
                f'<line x1="{_fmt(frame.left + 8)}" y1="{_fmt(ly - 4)}" '
                f'x2="{_fmt(frame.left + 28)}" y2="{_fmt(ly - 4)}" '
                f'stroke="{color}" stroke-width="1.5"/>')
            parts.append(
                f'<text x="{_fmt(frame.left + 33)}" y="{_fmt(ly)}">'
                f'{escape(s.label)}</text>')
    parts.append("</svg>")
    return "\n".join(parts) + "\n"


def bar_chart(labels, values, errors=None, title: str = "", y_label: str = "",
              width: int = 640, height: int = 400) -> str:
    """Vertical bars with optional symmetric error whiskers."""
    values = np.asarray(values, dtype=np.float64)
    labels = [str(v) for v in labels]
    if values.ndim != 1 or values.size == 0 or len(labels) != values.size:
        raise ConfigurationError(
            f"need matching labels and values, got {len(labels)} labels and "
            f"shape {values.shape}")
    if errors is not None:
        errors = np.asarray(errors, dtype=np.float64)
        if errors.shape != values.shape or np.any(errors < 0):
            raise ConfigurationError("errors must be nonnegative and match values")
    tops = values if errors is None else values + errors
    bottoms = values if errors is None else values - errors
    y_lo = min(0.0, float(bottoms.min()))
    y_hi = max(0.0, float(tops.max()))
    frame = _Frame(0.0, float(values.size), y_lo, y_hi, width, height)
    parts = _header(width, height, title)
    parts += _axes(frame, [], nice_ticks(frame.y_lo, frame.y_hi), "", y_label,
                   width, height, skip_x_grid=True)
    zero_y = frame.py(0.0)
    slot = (frame.right - frame.left) / values.size
    bar_w = slot * 0.7
    for i, (label, value) in enumerate(zip(labels, values)):
        x0 = frame.left + slot * i + (slot - bar_w) / 2
        y = frame.py(float(value))
        top, bot = min(y, zero_y), max(y, zero_y)
        parts.append(
            f'<rect x="{_fmt(x0)}" y="{_fmt(top)}" width="{_fmt(bar_w)}" '
            f'height="{_fmt(bot - top)}" fill="{PALETTE[0]}" fill-opacity="0.8"/>')
        if errors is not None and errors[i] > 0:
            cx = x0 + bar_w / 2
            e_top = frame.py(float(values[i] + errors[i]))
            e_bot = frame.py(float(values[i] - errors[i]))
            parts.append(
                f'<line x1="{_fmt(cx)}" y1="{_fmt(e_top)}" x2="{_fmt(cx)}" '
                f'y2="{_fmt(e_bot)}" stroke="#333333" stroke-width="1"/>')
            for ey in (e_top, e_bot):
                parts.append(
                    f'<line x1="{_fmt(cx - 4)}" y1="{_fmt(ey)}" '
                    f'x2="{_fmt(cx + 4)}" y2="{_fmt(ey)}" '
                    f'stroke="#333333" stroke-width="1"/>')
        parts.append(
            f'<text x="{_fmt(x0 + bar_w / 2)}" y="{_fmt(frame.bottom + 16)}" '
            f'text-anchor="middle">{escape(label)}</text>')
    parts.append("</svg>")
    return "\n".join(parts) + "\n"


def save_svg(path: str, svg: str) -> None:
    atomic_write_text(path, svg)
