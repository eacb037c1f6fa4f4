"""Frame-by-frame tracking loop: particle filter update then identity extraction."""
from __future__ import annotations

import numpy as np

from .filter import UpdateStats, initial_particles, update
from .identify import Identity, em_identify, report
from .metrics import TrackFrame
from .models import ModelParams, as_detections, in_arena


class Tracker:
    """Online tracker.

    Detections outside the arena are dropped on input: the clutter model has
    no mass there, so a single such detection would zero every particle's
    likelihood.
    """

    def __init__(self, params: ModelParams, seed: int | None = None, rng: np.random.Generator | None = None,
                 **obs_kw):
        self.params = params
        self.rng = rng if rng is not None else np.random.default_rng(seed)
        self.obs_kw = obs_kw
        self.particles = initial_particles(params)
        self.identities: list[Identity] = []
        self.next_rho = 0
        self.t = 0
        self.last_stats = UpdateStats()

    def step(self, O) -> list[Identity]:
        """Consume one detection set; return the identities above the report confidence."""
        O = as_detections(O)
        O = O[in_arena(O[:, :2], self.params.arena)]
        self.particles = update(self.particles, O, self.params, self.rng, self.last_stats, **self.obs_kw)
        em = em_identify(self.particles, O, self.identities, self.params, self.next_rho)
        for p, lb in zip(self.particles, em.labels):
            p.labels = lb
        self.identities = em.identities
        self.next_rho = em.next_rho
        self.t += 1
        return report(self.identities, self.params.report_conf)

    def run(self, frames, t0: int = 0) -> list[TrackFrame]:
        out = []
        for k, O in enumerate(frames):
            hs = self.step(O)
            out.append(TrackFrame(t0 + k, [h.rho for h in hs],
                                  np.array([h.s for h in hs]).reshape(-1, 4), [h.c for h in hs]))
        return out
