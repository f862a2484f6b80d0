"""Figure and trace exports: SVG panels plus structured-text data files.

Everything here writes plain SVG 1.1 by hand (the drawings are a handful of
polylines and rectangles) and JSON/JSONL for the regenerable raw data.
"""

from __future__ import annotations

import json
from pathlib import Path

import numpy as np

from . import geometry as geo

_SVG_HEADER = '<svg xmlns="http://www.w3.org/2000/svg" width="{w}" height="{h}" viewBox="0 0 {w} {h}">'


def _poly(points, stroke, width=1.5, opacity=1.0, fill="none"):
    pts = " ".join(f"{x:.2f},{y:.2f}" for x, y in points)
    return (f'<polyline points="{pts}" fill="{fill}" stroke="{stroke}" '
            f'stroke-width="{width}" stroke-opacity="{opacity}" />')


def _arrow_head(x0, y0, x1, y1, stroke, size=6.0):
    d = np.array([x1 - x0, y1 - y0])
    n = np.linalg.norm(d)
    if n < 1e-9:
        return ""
    d = d / n
    p = np.array([-d[1], d[0]])
    a = np.array([x1, y1]) - size * d + 0.5 * size * p
    b = np.array([x1, y1]) - size * d - 0.5 * size * p
    return _poly([(a[0], a[1]), (x1, y1), (b[0], b[1])], stroke)


def gesture_svg(frames: np.ndarray, size: int = 120, colors=("#1f77b4", "#d62728")) -> str:
    """One gesture cell: the two finger polylines with arrow heads."""
    f = np.asarray(frames)
    parts = [_SVG_HEADER.format(w=size, h=size),
             f'<rect width="{size}" height="{size}" fill="white" stroke="#ccc"/>']
    for i, color in enumerate(colors):
        pts = f[:, 2 * i:2 * i + 2] * size
        parts.append(_poly(pts, color))
        if len(pts) >= 2:
            parts.append(_arrow_head(*pts[-2], *pts[-1], color))
    parts.append("</svg>")
    return "".join(parts)


def traversal_grid_svg(grid: np.ndarray, cell: int = 120) -> str:
    """Rows are latent dimensions, columns the swept values."""
    d, v = grid.shape[0], grid.shape[1]
    w, h = v * cell, d * cell
    parts = [_SVG_HEADER.format(w=w, h=h)]
    for i in range(d):
        for j in range(v):
            inner = gesture_svg(grid[i, j], size=cell)
            body = inner[inner.index(">") + 1:-len("</svg>")]
            parts.append(f'<g transform="translate({j * cell},{i * cell})">{body}</g>')
    parts.append("</svg>")
    return "".join(parts)


def save_traversal(grid: np.ndarray, dims, values, out_dir, stem: str = "traversal"):
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    payload = {
        "dims": list(dims),
        "values": [float(v) for v in values],
        "gestures": grid.tolist(),
    }
    with open(out_dir / f"{stem}.json", "w", encoding="utf-8") as fh:
        json.dump(payload, fh)
    with open(out_dir / f"{stem}.svg", "w", encoding="utf-8") as fh:
        fh.write(traversal_grid_svg(grid))
    return out_dir / f"{stem}.json", out_dir / f"{stem}.svg"


def frame_2d_svg(object_vertices, target_vertices, fingers=None, size: int = 240,
                 label: str = "") -> str:
    """One 2D episode frame: target rectangle, object rectangle, finger arrows."""
    s = size

    def to_px(pts):
        return [(x * s, y * s) for x, y in np.asarray(pts)]

    parts = [_SVG_HEADER.format(w=s, h=s),
             f'<rect width="{s}" height="{s}" fill="white" stroke="#888"/>']
    tv = to_px(target_vertices) + to_px(target_vertices)[:1]
    ov = to_px(object_vertices) + to_px(object_vertices)[:1]
    parts.append(_poly(tv, "#000", width=2))
    parts.append(_poly(ov, "#d62728", width=2))
    if fingers is not None:
        f = np.asarray(fingers).reshape(-1)
        for i, color in enumerate(("#1f77b4", "#2ca02c")):
            x0, y0 = f[2 * i] * s, f[2 * i + 1] * s
            x1, y1 = f[4 + 2 * i] * s, f[5 + 2 * i] * s
            parts.append(_poly([(x0, y0), (x1, y1)], color, width=2))
            parts.append(_arrow_head(x0, y0, x1, y1, color))
    if label:
        parts.append(f'<text x="6" y="16" font-size="12" fill="#333">{label}</text>')
    parts.append("</svg>")
    return "".join(parts)


def _project_camera(pose, points, fov_scale: float = 0.8, z_push: float = 3.0):
    """Project world points into the camera's view (camera at pose, looking +z)."""
    m = geo.pose_to_matrix(pose)
    r, t = m[:3, :3], m[:3, 3]
    cam = (np.asarray(points) - t) @ r     # world -> camera frame
    out = []
    for p in cam:
        zz = p[2] + z_push
        if zz < 0.2:
            zz = 0.2
        out.append((0.5 + fov_scale * p[0] / zz, 0.5 + fov_scale * p[1] / zz))
    return out


def frame_3d_svg(state, fingers=None, size: int = 240, label: str = "") -> str:
    """Camera view plus bird's-eye view of the two arrows, side by side."""
    s = size
    parts = [_SVG_HEADER.format(w=2 * s + 10, h=s)]
    # camera view: green camera arrow is fixed in view, red target arrow projected
    parts.append(f'<rect width="{s}" height="{s}" fill="white" stroke="#888"/>')
    cam_own = [(0.5 * s, 0.62 * s), (0.5 * s, 0.38 * s)]
    parts.append(_poly(cam_own, "#2ca02c", width=3))
    parts.append(_arrow_head(*cam_own[0], *cam_own[1], "#2ca02c"))
    tgt = _project_camera(state.pose, state.target_vertices)
    tgt_px = [(x * s, y * s) for x, y in tgt]
    parts.append(_poly(tgt_px, "#d62728", width=3))
    parts.append(_arrow_head(*tgt_px[0], *tgt_px[1], "#d62728"))
    if fingers is not None:
        f = np.asarray(fingers).reshape(-1, 4)
        for i, color in enumerate(("#1f77b4", "#9467bd")):
            pts = [(row[2 * i] * 0.35 * s + 0.02 * s, row[2 * i + 1] * 0.35 * s + 0.02 * s) for row in f]
            parts.append(_poly(pts, color, width=2))
            if len(pts) >= 2:
                parts.append(_arrow_head(*pts[-2], *pts[-1], color))
    if label:
        parts.append(f'<text x="6" y="{s - 8}" font-size="12" fill="#333">{label}</text>')
    # bird's eye: orthographic x-z plane, world units mapped into the panel
    def ortho(p):
        return ((p[0] + 4.0) / 8.0 * s + s + 10, (4.0 - p[2]) / 8.0 * s)
    parts.append(f'<g><rect x="{s + 10}" width="{s}" height="{s}" fill="#fafafa" stroke="#888"/></g>')
    world_arrow = state.object_vertices()
    for pts, color in ((state.target_vertices, "#d62728"), (world_arrow, "#2ca02c")):
        px = [ortho(p) for p in np.asarray(pts)]
        parts.append(_poly(px, color, width=3))
        parts.append(_arrow_head(*px[0], *px[1], color))
    parts.append("</svg>")
    return "".join(parts)


def write_rollout_trace(rows: list[dict], out_dir, stem: str = "rollout"):
    """JSONL per-step trace; one object per line."""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    path = out_dir / f"{stem}.jsonl"
    with open(path, "w", encoding="utf-8") as fh:
        for row in rows:
            fh.write(json.dumps(row) + "\n")
    return path
