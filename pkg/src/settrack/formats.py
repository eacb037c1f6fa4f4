"""Config files and the CSV formats for detections, ground truth and tracks."""
from __future__ import annotations

import csv
import math
from pathlib import Path

import numpy as np

from .errors import DataError
from .metrics import GroundTruthFrame, TrackFrame
from .models import ModelParams

# config key -> ModelParams field
CONFIG_KEYS = {
    "lambda": "birth_rate",
    "mu": "death_rate",
    "sigma_p": "dash_power_sigma",
    "nu": "false_rate",
    "xi": "miss_rate",
    "tau": "dt",
    "t_assign": "assign_threshold",
    "t_fm": "fm_threshold",
    "alpha0": "gamma_alpha0",
    "beta0": "gamma_beta0",
    "area_min": "bbox_area_min",
    "area_max": "bbox_area_max",
    "report_conf": "report_conf",
    "n_particles": "n_particles",
    "max_em_steps": "max_em_steps",
    "arena": "arena",
}
_INT_KEYS = {"n_particles", "max_em_steps"}


def parse_config(text: str, source: str = "<config>") -> dict:
    """Parse ``key = value`` lines into ModelParams field values.  ``#`` starts a comment."""
    out = {}
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        key, sep, value = (s.strip() for s in line.partition("="))
        if not sep or not value:
            raise DataError(f"{source}:{lineno}: expected 'key = value'")
        if key not in CONFIG_KEYS:
            raise DataError(f"{source}:{lineno}: unknown key {key!r}")
        try:
            if key == "arena":
                v = tuple(float(x) for x in value.split())
                if len(v) != 4:
                    raise ValueError("arena needs four numbers")
            elif key in _INT_KEYS:
                v = int(value)
            else:
                v = float(value)
        except ValueError as e:
            raise DataError(f"{source}:{lineno}: bad value for {key}: {e}") from None
        out[CONFIG_KEYS[key]] = v
    return out


def load_config(path) -> dict:
    path = Path(path)
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as e:
        raise DataError(f"cannot read config {path}: {e.strerror}") from None
    return parse_config(text, str(path))


def make_params(config: dict | None = None, overrides: dict | None = None) -> ModelParams:
    """ModelParams from defaults, then config values, then overrides (``None`` entries ignored)."""
    values = dict(config or {})
    values.update({k: v for k, v in (overrides or {}).items() if v is not None})
    try:
        return ModelParams(**values)
    except ValueError as e:
        raise DataError(f"invalid parameters: {e}") from None


def format_config(params: ModelParams) -> str:
    lines = []
    for key, name in CONFIG_KEYS.items():
        v = getattr(params, name)
        text = " ".join(repr(float(x)) for x in v) if key == "arena" else repr(v)
        lines.append(f"{key} = {text}")
    return "\n".join(lines) + "\n"


# -- CSV ------------------------------------------------------------------------


def _rows(path, required: list[str], optional: tuple[str, ...] = ()):
    """Yield ``(lineno, {column: text})`` for each data row; validates the header."""
    path = Path(path)
    try:
        fh = path.open(newline="", encoding="utf-8")
    except OSError as e:
        raise DataError(f"cannot read {path}: {e.strerror}") from None
    with fh:
        reader = csv.reader(fh)
        try:
            header = [h.strip() for h in next(reader)]
        except StopIteration:
            return  # a zero-byte file holds no records
        missing = [c for c in required if c not in header]
        unknown = [c for c in header if c not in required and c not in optional]
        if missing or unknown:
            raise DataError(f"{path}:1: header must contain {required}"
                            + (f" (optional {list(optional)})" if optional else "") + f", got {header}")
        for row in reader:
            if not row or all(not c.strip() for c in row):
                continue
            if len(row) != len(header):
                raise DataError(f"{path}:{reader.line_num}: expected {len(header)} fields, got {len(row)}")
            yield reader.line_num, dict(zip(header, (c.strip() for c in row)))


def _num(text: str, kind, path, lineno, col):
    try:
        v = kind(text)
    except ValueError:
        raise DataError(f"{path}:{lineno}: bad {col} {text!r}") from None
    if kind is float and not math.isfinite(v):
        raise DataError(f"{path}:{lineno}: {col} must be finite")
    return v


def _frame_range(frames: dict, n_frames: int | None):
    if not frames and not n_frames:
        return range(0)
    lo = min(0, min(frames, default=0))
    hi = max(max(frames, default=-1) + 1, lo + (n_frames or 0))
    return range(lo, hi)


def read_detections(path, params: ModelParams, n_frames: int | None = None):
    """Per-frame ``(m, 3)`` detection arrays, frames contiguous from ``min(0, first)``.

    Detections with a bounding-box area outside ``[A', A'']`` get confidence
    0; a missing confidence column gives ``params.default_confidence``.
    Returns ``(frame_ids, detection_sets)``.
    """
    by_frame: dict[int, list] = {}
    for lineno, row in _rows(path, ["frame", "x", "y"], ("confidence", "bbox_area")):
        t = _num(row["frame"], int, path, lineno, "frame")
        x = _num(row["x"], float, path, lineno, "x")
        y = _num(row["y"], float, path, lineno, "y")
        c = params.default_confidence
        if row.get("confidence", "") != "":
            c = _num(row["confidence"], float, path, lineno, "confidence")
            if not 0.0 <= c <= 1.0:
                raise DataError(f"{path}:{lineno}: confidence {c} outside [0, 1]")
        if row.get("bbox_area", "") != "":
            area = _num(row["bbox_area"], float, path, lineno, "bbox_area")
            if not params.bbox_area_min <= area <= params.bbox_area_max:
                c = 0.0
        by_frame.setdefault(t, []).append((x, y, c))
    frames = _frame_range(by_frame, n_frames)
    return list(frames), [np.array(by_frame.get(t, []), dtype=float).reshape(-1, 3) for t in frames]


def write_detections(path, detection_sets, t0: int = 0) -> None:
    # repr keeps every float exact, so reading back reproduces the arrays
    with Path(path).open("w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["frame", "x", "y", "confidence"])
        for k, O in enumerate(detection_sets):
            for x, y, c in np.asarray(O, dtype=float).reshape(-1, 3):
                w.writerow([t0 + k, repr(float(x)), repr(float(y)), repr(float(c))])


def read_truth(path, n_frames: int | None = None) -> list[GroundTruthFrame]:
    by_frame: dict[int, list] = {}
    for lineno, row in _rows(path, ["frame", "gt_id", "x", "y"]):
        t = _num(row["frame"], int, path, lineno, "frame")
        by_frame.setdefault(t, []).append((_num(row["gt_id"], int, path, lineno, "gt_id"),
                                           _num(row["x"], float, path, lineno, "x"),
                                           _num(row["y"], float, path, lineno, "y")))
    out = []
    for t in _frame_range(by_frame, n_frames):
        rows = by_frame.get(t, [])
        try:
            out.append(GroundTruthFrame(t, [r[0] for r in rows], [r[1:] for r in rows]))
        except ValueError as e:
            raise DataError(f"{path}: {e}") from None
    return out


def write_truth(path, frames: list[GroundTruthFrame]) -> None:
    with Path(path).open("w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["frame", "gt_id", "x", "y"])
        for f in frames:
            for gid, s in zip(f.ids, f.states):
                w.writerow([f.t, int(gid), f"{s[0]:.6f}", f"{s[1]:.6f}"])


def read_tracks(path, n_frames: int | None = None) -> list[TrackFrame]:
    by_frame: dict[int, list] = {}
    cols = ["frame", "rho", "x", "y", "vx", "vy", "confidence"]
    for lineno, row in _rows(path, cols):
        t = _num(row["frame"], int, path, lineno, "frame")
        vals = [_num(row[c], float, path, lineno, c) for c in cols[2:]]
        by_frame.setdefault(t, []).append((_num(row["rho"], int, path, lineno, "rho"), *vals))
    out = []
    for t in _frame_range(by_frame, n_frames):
        rows = by_frame.get(t, [])
        try:
            out.append(TrackFrame(t, [r[0] for r in rows], [r[1:5] for r in rows], [r[5] for r in rows]))
        except ValueError as e:
            raise DataError(f"{path}: {e}") from None
    return out


def write_tracks(path, frames: list[TrackFrame]) -> None:
    with Path(path).open("w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["frame", "rho", "x", "y", "vx", "vy", "confidence"])
        for f in frames:
            for rho, s, c in zip(f.rhos, f.states, f.conf):
                s = np.concatenate((s, np.zeros(4)))[:4]  # position-only tracks get zero velocity
                w.writerow([f.t, int(rho), *(f"{v:.6f}" for v in s), f"{c:.6f}"])
