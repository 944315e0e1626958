"""Static SVG line plot for MTM-versus-offset sweeps."""

from __future__ import annotations

from typing import Sequence

from .io import format_real

_W, _H = 480, 320
_L, _R, _T, _B = 60, 20, 20, 50


def _ticks(lo: float, hi: float, n: int = 5) -> list[float]:
    if hi <= lo:
        hi = lo + 1.0
    step = (hi - lo) / (n - 1)
    return [lo + k * step for k in range(n)]


def sweep_svg(offsets: Sequence[float], values: Sequence[float], fps: float | None = None) -> str:
    """Render ``values`` (MTM in ms) against injected ``offsets`` (frames).

    The numeric table is embedded in an XML comment so the figure can be
    re-read without parsing geometry.
    """
    xs = [float(x) for x in offsets]
    ys = [float(y) for y in values]
    x_lo, x_hi = min(xs), max(xs) if max(xs) > min(xs) else min(xs) + 1
    y_hi = max(max(ys), 1.0) * 1.1
    pw, ph = _W - _L - _R, _H - _T - _B

    def px(x):
        return _L + (x - x_lo) / (x_hi - x_lo) * pw

    def py(y):
        return _T + ph - y / y_hi * ph

    rows = "\n".join(f"  {format_real(x)},{format_real(y)}" for x, y in zip(xs, ys))
    out = [
        '<?xml version="1.0" encoding="UTF-8"?>',
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{_W}" height="{_H}" '
        f'viewBox="0 0 {_W} {_H}">',
        f"<!--\noffset_frames,mtm_ms\n{rows}\n-->",
        f'<rect x="0" y="0" width="{_W}" height="{_H}" fill="white"/>',
        f'<line x1="{_L}" y1="{_T + ph}" x2="{_L + pw}" y2="{_T + ph}" stroke="black"/>',
        f'<line x1="{_L}" y1="{_T}" x2="{_L}" y2="{_T + ph}" stroke="black"/>',
    ]
    for t in _ticks(x_lo, x_hi, 6):
        out.append(
            f'<text x="{px(t):.2f}" y="{_T + ph + 16}" font-size="11" '
            f'text-anchor="middle">{t:g}</text>'
        )
    for t in _ticks(0.0, y_hi, 5):
        out.append(
            f'<text x="{_L - 6}" y="{py(t) + 4:.2f}" font-size="11" '
            f'text-anchor="end">{t:.0f}</text>'
        )
    xlabel = "temporal offset (frames)"
    if fps:
        xlabel += f", 1 frame = {1000.0 / fps:g} ms"
    out.append(
        f'<text x="{_L + pw / 2:.2f}" y="{_H - 10}" font-size="12" '
        f'text-anchor="middle">{xlabel}</text>'
    )
    out.append(
        f'<text x="14" y="{_T + ph / 2:.2f}" font-size="12" text-anchor="middle" '
        f'transform="rotate(-90 14 {_T + ph / 2:.2f})">MTM (ms)</text>'
    )
    pts = " ".join(f"{px(x):.2f},{py(y):.2f}" for x, y in zip(xs, ys))
    out.append(f'<polyline points="{pts}" fill="none" stroke="#1f77b4" stroke-width="2"/>')
    for x, y in zip(xs, ys):
        out.append(f'<circle class="point" cx="{px(x):.2f}" cy="{py(y):.2f}" r="3.5" fill="#1f77b4"/>')
    out.append("</svg>")
    return "\n".join(out) + "\n"
