"""Two-finger gesture handling: synthesis, fixed-length resampling, corpus IO.

A raw gesture is a timed, variable-length sequence of paired finger points
in normalized screen coordinates. Training consumes fixed-length gestures:
N rows of [f1x, f1y, f2x, f2y]. The corpus file is JSON lines, one gesture
per line: {"id": ..., "class": ..., "frames": [[t, f1x, f1y, f2x, f2y], ...]}.
"""

from __future__ import annotations

import json
from dataclasses import dataclass

import numpy as np

GESTURE_CLASSES = ("translation", "pinch", "rotation")
DEFAULT_NOISE_SIGMA = 0.003
DEFAULT_GESTURE_LEN = 10


class CorpusFormatError(ValueError):
    """A corpus line violates the schema; message names line and field."""


class DegenerateGestureError(ValueError):
    """The gesture has no motion, so arc-length resampling is undefined."""


@dataclass
class RawGesture:
    id: str
    label: str
    times: np.ndarray      # (n,) strictly increasing seconds
    fingers: np.ndarray    # (n, 4) = [f1x, f1y, f2x, f2y] in [0, 1]

    def validate(self, where: str = "gesture"):
        if self.label not in GESTURE_CLASSES:
            raise CorpusFormatError(f"{where}: unknown class {self.label!r}")
        if self.fingers.ndim != 2 or self.fingers.shape[1] != 4:
            raise CorpusFormatError(f"{where}: frames must be rows of [t, f1x, f1y, f2x, f2y]")
        if len(self.times) < 2:
            raise CorpusFormatError(f"{where}: needs at least 2 frames")
        if not np.all(np.diff(self.times) > 0):
            raise CorpusFormatError(f"{where}: timestamps not strictly increasing")
        if not np.all(np.isfinite(self.fingers)):
            raise CorpusFormatError(f"{where}: non-finite coordinate")
        if self.fingers.min() < 0.0 or self.fingers.max() > 1.0:
            raise CorpusFormatError(f"{where}: coordinate out of range [0, 1]")


def _ease_in_out(u: np.ndarray) -> np.ndarray:
    """Smoothstep progress profile: slow start, fast middle, slow end."""
    return u * u * (3.0 - 2.0 * u)


def _frame_times(n: int, rng: np.random.Generator) -> np.ndarray:
    dt = rng.uniform(0.008, 0.03, size=n - 1)
    return np.concatenate([[0.0], np.cumsum(dt)])


def generate_gesture(label: str, rng: np.random.Generator,
                     noise_sigma: float = DEFAULT_NOISE_SIGMA,
                     gesture_id: str | None = None) -> RawGesture:
    """Synthesize one raw gesture of the given class.

    translation: parallel finger paths, shared random direction, length in
    [0.1, 0.5], ease-in-out velocity. pinch: fingers slide along their
    joining line, converging or diverging. rotation: fingers orbit their
    midpoint by a random angle in +-[pi/6, pi]. Gaussian jitter of
    noise_sigma is added per frame (clipped back into [0, 1]).
    """
    if label not in GESTURE_CLASSES:
        raise ValueError(f"unknown gesture class {label!r}")
    n = int(rng.integers(12, 41))
    prog = _ease_in_out(np.linspace(0.0, 1.0, n))

    if label == "translation":
        ang = rng.uniform(0.0, 2.0 * np.pi)
        length = rng.uniform(0.1, 0.5)
        step = np.array([np.cos(ang), np.sin(ang)]) * length
        gap_ang = rng.uniform(0.0, 2.0 * np.pi)
        gap = np.array([np.cos(gap_ang), np.sin(gap_ang)]) * rng.uniform(0.08, 0.3)
        f1_start = _fit_anchor(rng, np.vstack([np.zeros(2), step, gap, gap + step]))
        f1 = f1_start + prog[:, None] * step
        f2 = f1 + gap
    elif label == "pinch":
        ang = rng.uniform(0.0, 2.0 * np.pi)
        u = np.array([np.cos(ang), np.sin(ang)])
        if rng.random() < 0.5:
            s0, s1 = rng.uniform(0.25, 0.5), rng.uniform(0.04, 0.15)   # converge
        else:
            s0, s1 = rng.uniform(0.04, 0.15), rng.uniform(0.25, 0.5)   # diverge
        sep = s0 + prog * (s1 - s0)
        smax = max(s0, s1)
        mid = _fit_anchor(rng, np.vstack([-0.5 * smax * u, 0.5 * smax * u]))
        f1 = mid - 0.5 * sep[:, None] * u
        f2 = mid + 0.5 * sep[:, None] * u
    else:  # rotation
        radius = rng.uniform(0.05, 0.25)
        sweep = rng.choice([-1.0, 1.0]) * rng.uniform(np.pi / 6.0, np.pi)
        phase0 = rng.uniform(0.0, 2.0 * np.pi)
        mid = _fit_anchor(rng, radius * np.array([[-1.0, -1.0], [1.0, 1.0]]))
        ang = phase0 + prog * sweep
        f1 = mid + radius * np.stack([np.cos(ang), np.sin(ang)], axis=1)
        f2 = mid - radius * np.stack([np.cos(ang), np.sin(ang)], axis=1)

    frames = np.concatenate([f1, f2], axis=1)
    if noise_sigma > 0:
        frames = frames + rng.normal(0.0, noise_sigma, size=frames.shape)
        frames = np.clip(frames, 0.0, 1.0)
    gid = gesture_id if gesture_id is not None else f"{label}-{rng.integers(1 << 31)}"
    return RawGesture(id=gid, label=label, times=_frame_times(n, rng), fingers=frames)


def _fit_anchor(rng: np.random.Generator, offsets: np.ndarray, margin: float = 0.02) -> np.ndarray:
    """Anchor point such that anchor + every offset stays inside the margin box."""
    lo = margin - offsets.min(axis=0)
    hi = (1.0 - margin) - offsets.max(axis=0)
    if np.any(hi < lo):
        raise ValueError("gesture extent exceeds the unit square")
    return rng.uniform(lo, hi)


def resample_dynamic(g: RawGesture, n: int = DEFAULT_GESTURE_LEN) -> np.ndarray:
    """Resample both polylines at N equidistant values of the combined arc length.

    The two fingers share one progress parameter: the cumulative sum of both
    fingers' segment lengths. Endpoints are preserved exactly and every output
    point lies on the original polyline of its finger.
    """
    if n < 2:
        raise ValueError("resample length must be >= 2")
    f = np.asarray(g.fingers, dtype=np.float64)
    d1 = np.linalg.norm(np.diff(f[:, 0:2], axis=0), axis=1)
    d2 = np.linalg.norm(np.diff(f[:, 2:4], axis=0), axis=1)
    seg = d1 + d2
    total = seg.sum()
    if total <= 0.0:
        raise DegenerateGestureError("gesture has no motion (zero combined arc length)")
    cum = np.concatenate([[0.0], np.cumsum(seg)])
    params = np.linspace(0.0, total, n)
    idx = np.searchsorted(cum, params, side="right") - 1
    idx = np.clip(idx, 0, len(seg) - 1)
    frac = np.where(seg[idx] > 0, (params - cum[idx]) / np.where(seg[idx] > 0, seg[idx], 1.0), 0.0)
    out = f[idx] + frac[:, None] * (f[idx + 1] - f[idx])
    out[0] = f[0]
    out[-1] = f[-1]
    return out


def to_raw(frames: np.ndarray, gesture_id: str = "resampled", label: str = "translation") -> RawGesture:
    """Wrap an N x 4 gesture as a raw gesture with synthetic uniform timestamps."""
    frames = np.asarray(frames, dtype=np.float64)
    return RawGesture(id=gesture_id, label=label,
                      times=np.arange(len(frames), dtype=np.float64) / 60.0,
                      fingers=frames)


def generate_corpus(count_per_class: int, rng: np.random.Generator,
                    noise_sigma: float = DEFAULT_NOISE_SIGMA,
                    classes=GESTURE_CLASSES) -> list[RawGesture]:
    out = []
    for label in classes:
        for i in range(count_per_class):
            out.append(generate_gesture(label, rng, noise_sigma, gesture_id=f"{label}-{i:05d}"))
    return out


def save_corpus(corpus, path):
    with open(path, "w", encoding="utf-8") as fh:
        for g in corpus:
            frames = [[float(t), *[float(v) for v in row]]
                      for t, row in zip(g.times, g.fingers)]
            fh.write(json.dumps({"id": g.id, "class": g.label, "frames": frames}) + "\n")


def load_corpus(path) -> list[RawGesture]:
    out = []
    with open(path, "r", encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.strip()
            if not line:
                continue
            out.append(parse_gesture_record(line, where=f"line {lineno}"))
    return out


def parse_gesture_record(text_or_obj, where: str = "record") -> RawGesture:
    if isinstance(text_or_obj, str):
        try:
            obj = json.loads(text_or_obj)
        except json.JSONDecodeError as e:
            raise CorpusFormatError(f"{where}: invalid JSON ({e.msg})") from e
    else:
        obj = text_or_obj
    if not isinstance(obj, dict):
        raise CorpusFormatError(f"{where}: expected an object")
    for field in ("id", "class", "frames"):
        if field not in obj:
            raise CorpusFormatError(f"{where}: missing field {field!r}")
    frames = obj["frames"]
    if not isinstance(frames, list) or len(frames) < 2:
        raise CorpusFormatError(f"{where}: field 'frames' needs at least 2 rows")
    try:
        arr = np.asarray(frames, dtype=np.float64)
    except (TypeError, ValueError) as e:
        raise CorpusFormatError(f"{where}: field 'frames' is not numeric") from e
    if arr.ndim != 2 or arr.shape[1] != 5:
        raise CorpusFormatError(f"{where}: field 'frames' rows must be [t, f1x, f1y, f2x, f2y]")
    times, fingers = arr[:, 0], arr[:, 1:5]
    if not np.all(np.diff(times) > 0):
        raise CorpusFormatError(f"{where}: field 'frames' timestamps not strictly increasing")
    if fingers.min() < 0.0 or fingers.max() > 1.0:
        bad = int(np.argwhere((fingers < 0.0) | (fingers > 1.0))[0][0])
        raise CorpusFormatError(f"{where}: coordinate out of range in frame {bad}")
    g = RawGesture(id=str(obj["id"]), label=str(obj["class"]), times=times, fingers=fingers)
    g.validate(where)
    return g


def resampled_matrix(corpus, n: int = DEFAULT_GESTURE_LEN) -> np.ndarray:
    """Stack a corpus into an (M, n, 4) array of fixed-length gestures."""
    return np.stack([resample_dynamic(g, n) for g in corpus])
