"""CLEAR MOT (MOTA, MOTP, identity switches) and trajectory-level MT / FM."""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import linear_sum_assignment


def _rows(a, n: int) -> np.ndarray:
    a = np.asarray(a, dtype=float)
    return a.reshape(n, -1) if a.size else np.zeros((n, 2))


@dataclass
class GroundTruthFrame:
    """Ground truth at one frame.  ``states`` rows start with ``(x, y)``; velocities are optional."""

    t: int
    ids: np.ndarray
    states: np.ndarray

    def __post_init__(self):
        self.ids = np.asarray(self.ids, dtype=int).reshape(-1)
        self.states = _rows(self.states, len(self.ids))
        if len(set(self.ids.tolist())) != len(self.ids):
            raise ValueError(f"duplicate gt ids in frame {self.t}")

    @property
    def objects(self) -> list[tuple[int, float, float]]:
        return [(int(i), float(s[0]), float(s[1])) for i, s in zip(self.ids, self.states)]


@dataclass
class TrackFrame:
    t: int
    rhos: np.ndarray
    states: np.ndarray  # rows start with (x, y)
    conf: np.ndarray | None = None

    def __post_init__(self):
        self.rhos = np.asarray(self.rhos, dtype=int).reshape(-1)
        self.states = _rows(self.states, len(self.rhos))
        if self.conf is None:
            self.conf = np.ones(len(self.rhos))
        self.conf = np.asarray(self.conf, dtype=float).reshape(-1)
        if len(set(self.rhos.tolist())) != len(self.rhos):
            raise ValueError(f"duplicate track ids in frame {self.t}")

    @property
    def tracks(self) -> list[tuple[int, float, float, float]]:
        return [(int(r), float(s[0]), float(s[1]), float(c)) for r, s, c in zip(self.rhos, self.states, self.conf)]


@dataclass
class MotReport:
    mota: float
    motp: float
    ids: int
    mt: int = 0
    fm: int = 0
    n_gt_tracks: int = 0
    g: list[int] = field(default_factory=list)
    a: list[int] = field(default_factory=list)
    n: list[int] = field(default_factory=list)
    m: list[int] = field(default_factory=list)
    dist: list[float] = field(default_factory=list)
    # per frame: {gt_id: rho} of the matches made
    correspondences: list[dict[int, int]] = field(default_factory=list)

    @property
    def misses(self) -> int:
        return sum(self.g) - sum(self.n)

    @property
    def false_positives(self) -> int:
        return sum(self.a) - sum(self.n)

    def as_rows(self) -> list[tuple[str, float]]:
        return [("MOTA", self.mota), ("MOTP", self.motp), ("IDS", self.ids), ("MT", self.mt),
                ("FM", self.fm), ("GT", self.n_gt_tracks), ("FN", self.misses), ("FP", self.false_positives)]


def _match_frame(gt: GroundTruthFrame, tr: TrackFrame, prev: dict[int, int], thr: float):
    gxy = gt.states[:, :2]
    txy = tr.states[:, :2]
    d = np.sqrt(((gxy[:, None, :] - txy[None, :, :]) ** 2).sum(-1)) if len(gxy) and len(txy) else np.zeros((len(gxy), len(txy)))
    rho_col = {int(r): k for k, r in enumerate(tr.rhos)}
    match: dict[int, int] = {}
    dist: dict[int, float] = {}
    used_g, used_t = set(), set()
    # keep last frame's pairings that are still close enough
    for gi, g in enumerate(gt.ids):
        r = prev.get(int(g))
        k = rho_col.get(r) if r is not None else None
        if k is not None and k not in used_t and d[gi, k] <= thr:
            match[int(g)] = r
            dist[int(g)] = float(d[gi, k])
            used_g.add(gi)
            used_t.add(k)
    rows = [i for i in range(len(gt.ids)) if i not in used_g]
    cols = [k for k in range(len(tr.rhos)) if k not in used_t]
    if rows and cols:
        sub = d[np.ix_(rows, cols)]
        big = thr * 10.0 + 1.0
        cost = np.where(sub <= thr, sub, big)
        ri, ci = linear_sum_assignment(cost)
        for a, b in zip(ri, ci):
            if sub[a, b] <= thr:
                g = int(gt.ids[rows[a]])
                match[g] = int(tr.rhos[cols[b]])
                dist[g] = float(sub[a, b])
    return match, dist


def clear_mot(gt: list[GroundTruthFrame], tr: list[TrackFrame], dist_threshold: float = 1.0) -> MotReport:
    """CLEAR MOT scores with ``MOTP = 1 - mean match distance`` (meters).

    A mismatch is counted when a ground-truth object is matched to a
    different track than at its previous match.
    """
    if len(gt) != len(tr) or any(g.t != r.t for g, r in zip(gt, tr)):
        raise ValueError("ground-truth and track frames are not aligned")
    last: dict[int, int] = {}  # gt id -> rho of its most recent match
    prev: dict[int, int] = {}
    rep = MotReport(math.nan, math.nan, 0)
    for g, r in zip(gt, tr):
        match, dist = _match_frame(g, r, prev, dist_threshold)
        mism = sum(1 for gid, rho in match.items() if gid in last and last[gid] != rho)
        last.update(match)
        prev = match
        rep.g.append(len(g.ids))
        rep.a.append(len(r.rhos))
        rep.n.append(len(match))
        rep.m.append(mism)
        rep.dist.append(sum(dist.values()))
        rep.correspondences.append(match)
    sg, sn = sum(rep.g), sum(rep.n)
    rep.ids = sum(rep.m)
    rep.motp = 1.0 - sum(rep.dist) / sn if sn else math.nan
    err = sum(rep.g) + sum(rep.a) - 2 * sn + rep.ids
    rep.mota = 1.0 - err / sg if sg else (1.0 if err == 0 else -math.inf)
    rep.mt, rep.fm = trajectory_metrics(gt, tr, rep.correspondences)
    rep.n_gt_tracks = len({int(i) for f in gt for i in f.ids})
    return rep


def trajectory_metrics(gt: list[GroundTruthFrame], tr, correspondences: list[dict[int, int]],
                       mostly: float = 0.8) -> tuple[int, int]:
    """Mostly-tracked count (tracked in at least ``mostly`` of its frames) and fragmentations."""
    status: dict[int, list[bool]] = {}
    for g, match in zip(gt, correspondences):
        for gid in g.ids:
            status.setdefault(int(gid), []).append(int(gid) in match)
    mt = fm = 0
    for seq in status.values():
        if sum(seq) >= mostly * len(seq) - 1e-9:
            mt += 1
        fm += sum(1 for a, b in zip(seq, seq[1:]) if a and not b)
    return mt, fm
