"""EM extraction of identified objects from a particle population.

Every state in every particle is labeled with a candidate identity: one of
last cycle's identities or a fresh candidate per current detection.  The M
step scores candidates by how their labeled states split across detection
pools; the E step relabels each particle by a best assignment on those
scores.  Identity ids (``rho``) are stored per state in the particles so
labels carry across resampling.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.optimize import linear_sum_assignment

from .models import ModelParams, as_detections, log_clutter, loglik_matrix
from .observation import joint_likelihood_from_logs

# bonus (in log space) for keeping a state's current label; only breaks exact ties
_KEEP_BONUS = 1e-9


@dataclass(frozen=True)
class Identity:
    s: np.ndarray
    c: float
    rho: int

    def __eq__(self, other):
        return (isinstance(other, Identity) and self.rho == other.rho and self.c == other.c
                and np.array_equal(self.s, other.s))

    __hash__ = None


@dataclass
class EMResult:
    identities: list[Identity]
    labels: list[np.ndarray]   # per particle, rho of each state
    next_rho: int
    iterations: int
    objective: list[float]     # labeling objective after each E step


def state_keys(particles, O, params: ModelParams) -> list[np.ndarray]:
    """Detection index matched to each state under its particle's best association, ``len(O)`` if none.

    Uses each particle's cached association when present.
    """
    O = as_detections(O)
    n_o = len(O)
    lq = None
    out = []
    for p in particles:
        k = len(p.state)
        obs = p.cached_obs
        if obs is None:
            if lq is None:
                lq = log_clutter(O, params)
            obs = joint_likelihood_from_logs(loglik_matrix(p.state, O, params), lq, params)
        key = obs.best_assoc.detection_of(k) if k else np.zeros(0, dtype=int)
        out.append(np.where(key < 0, n_o, key))
    return out


def build_detection_pools(particles, O, params: ModelParams) -> list[list[tuple[int, int]]]:
    """For each detection, the ``(particle, row)`` states matched to it."""
    O = as_detections(O)
    pools: list[list[tuple[int, int]]] = [[] for _ in range(len(O))]
    for i, key in enumerate(state_keys(particles, O, params)):
        for r, o in enumerate(key):
            if o < len(O):
                pools[o].append((i, r))
    return pools


def _m_step(lab, keys, n_cand: int, n_o: int, n: int) -> np.ndarray:
    T = np.zeros((n_cand, n_o + 1))
    for lb, ky in zip(lab, keys):
        on = lb >= 0
        np.add.at(T, (lb[on], ky[on]), 1.0)
    return T / n


def _nearest_detection(xy: np.ndarray, O: np.ndarray) -> np.ndarray:
    d2 = ((xy[:, None, :] - O[None, :, :2]) ** 2).sum(-1)
    return np.argmin(d2, axis=1)


def _e_step(T, lab, keys, designated, n_prev: int, eps: float):
    n_cand = T.shape[0]
    floor = np.full(n_cand, eps)
    # prefer opening a new candidate over diluting an existing identity
    floor[:n_prev] = 0.5 * eps
    cache: dict[bytes, tuple[np.ndarray, float]] = {}
    new_lab, total = [], 0.0
    for lb, ky, dz in zip(lab, keys, designated):
        if len(ky) == 0:
            new_lab.append(lb)
            continue
        sig = ky.tobytes() + b"|" + lb.tobytes() + b"|" + dz.tobytes()
        hit = cache.get(sig)
        if hit is None:
            S = np.maximum(T[:, ky].T, floor[None, :])
            rows = np.flatnonzero(dz >= 0)
            S[rows, dz[rows]] = np.maximum(S[rows, dz[rows]], 1.5 * eps)
            cost = -np.log(S)
            cur = np.flatnonzero(lb >= 0)
            cost[cur, lb[cur]] -= _KEEP_BONUS
            r, c = linear_sum_assignment(cost)
            out = np.empty(len(ky), dtype=int)
            out[r] = c
            hit = (out, float(np.log(S[r, c]).sum()))
            cache[sig] = hit
        new_lab.append(hit[0])
        total += hit[1]
    return new_lab, total


def em_identify(particles, O, prev: list[Identity], params: ModelParams, next_rho: int = 0,
                keys: list[np.ndarray] | None = None) -> EMResult:
    """Label every particle state with an identity and summarize the pools.

    ``particles`` carry ``state``, ``labels`` (rho per state, -1 unlabeled)
    and optionally ``cached_obs``.  Identities whose pools end up empty are
    dropped; surviving new candidates receive fresh ids starting at
    ``next_rho``.
    """
    O = as_detections(O)
    n = len(particles)
    n_o = len(O)
    if keys is None:
        keys = state_keys(particles, O, params)
    n_prev = len(prev)
    max_k = max((len(p.state) for p in particles), default=0)
    n_cand = n_prev + n_o
    n_cand += max(0, max_k - n_cand)
    if n == 0 or max_k == 0:
        return EMResult([], [np.zeros(0, dtype=int) for _ in particles], next_rho, 0, [])
    col_of_rho = {h.rho: j for j, h in enumerate(prev)}
    lab = [np.array([col_of_rho.get(int(r), -1) for r in p.labels], dtype=int) for p in particles]
    designated = []
    for p, ky in zip(particles, keys):
        dz = np.where(ky < n_o, n_prev + ky, -1)
        miss = np.flatnonzero(ky >= n_o)
        if n_o and len(miss):
            dz[miss] = n_prev + _nearest_detection(p.state[miss, :2], O)
        designated.append(dz.astype(int))
    eps = 1.0 / (n * (n_cand + 1))
    objective = []
    it = 0
    for it in range(1, params.max_em_steps + 1):
        T = _m_step(lab, keys, n_cand, n_o, n)
        new_lab, obj = _e_step(T, lab, keys, designated, n_prev, eps)
        objective.append(obj)
        same = all(np.array_equal(a, b) for a, b in zip(lab, new_lab))
        lab = new_lab
        if same:
            break

    counts = np.zeros(n_cand, dtype=int)
    sums = np.zeros((n_cand, 4))
    for p, lb in zip(particles, lab):
        np.add.at(counts, lb, 1)
        np.add.at(sums, lb, p.state)
    rho_of = np.full(n_cand, -1, dtype=int)
    identities = []
    for j in range(n_cand):
        if counts[j] == 0:
            continue
        if j < n_prev:
            rho_of[j] = prev[j].rho
        else:
            rho_of[j] = next_rho
            next_rho += 1
        identities.append(Identity(sums[j] / counts[j], counts[j] / n, int(rho_of[j])))
    identities.sort(key=lambda h: h.rho)
    labels = [rho_of[lb] if len(lb) else np.zeros(0, dtype=int) for lb in lab]
    return EMResult(identities, labels, next_rho, it, objective)


def report(identities: list[Identity], R: float) -> list[Identity]:
    """Identities with confidence at least ``R``, by id."""
    if not 0.0 <= R <= 1.0:
        raise ValueError("R must lie in [0, 1]")
    return sorted((h for h in identities if h.c >= R), key=lambda h: h.rho)

