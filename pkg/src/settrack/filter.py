"""Set-valued particle filter.

Each particle is a ``(k, 4)`` array of object states.  Proposals come from
the motion model followed by a refinement step that births objects at
detections the best association calls false; motion and proposal weights of
the result are estimated from the two proposal populations with a
negative-binomial cardinality times a Gaussian KDE over positions.
"""
from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field

import numpy as np
from scipy.special import gammaln

from .models import ModelParams, advance, as_detections, as_states, log_clutter, loglik_matrix, sample_accel
from .observation import ObsResult, joint_likelihood_from_logs

log = logging.getLogger(__name__)


@dataclass
class WeightedParticle:
    state: np.ndarray
    weight: float
    cached_obs: ObsResult | None = None
    # per-state identity ids carried between frames, -1 when unlabeled
    labels: np.ndarray | None = None

    def __post_init__(self):
        self.state = as_states(self.state)
        if self.labels is None:
            self.labels = np.full(len(self.state), -1, dtype=int)

    def copy(self) -> "WeightedParticle":
        return WeightedParticle(self.state.copy(), self.weight, self.cached_obs, self.labels.copy())


@dataclass
class PosteriorDensityEstimator:
    """``Pr(X | population)``: NB(r, p) cardinality and a unit-bandwidth position KDE.

    ``prior_weight`` mixes a uniform-over-arena component into the KDE as if
    that many extra kernel points were spread evenly; 0 gives the plain KDE.
    """

    r: float
    p: float
    kde_points: np.ndarray
    prior_weight: float = 0.0
    arena_area: float = 1.0

    @property
    def beta(self) -> float:
        return 1.0 / self.p - 1.0

    def log_nb(self, n) -> np.ndarray:
        n = np.asarray(n, dtype=float)
        return (gammaln(n + self.r) - gammaln(n + 1) - gammaln(self.r)
                + n * math.log(self.p) + self.r * math.log1p(-self.p))

    def log_kde(self, xy: np.ndarray) -> np.ndarray:
        xy = np.asarray(xy, dtype=float).reshape(-1, 2)
        h = len(self.kde_points)
        if h == 0 and self.prior_weight == 0:
            return np.full(len(xy), -np.inf)
        if h:
            d2 = ((xy[:, None, :] - self.kde_points[None, :, :]) ** 2).sum(-1)
            s = np.exp(-0.5 * d2).sum(1) / (2.0 * math.pi)
        else:
            s = np.zeros(len(xy))
        s = s + self.prior_weight / self.arena_area
        with np.errstate(divide="ignore"):
            return np.log(s) - math.log(h + self.prior_weight)


def fit_density(population, alpha0: float, beta0: float, prior_weight: float = 0.0,
                arena_area: float = 1.0) -> PosteriorDensityEstimator:
    """Gamma-Poisson posterior predictive over counts plus a KDE over every object position."""
    pop = [as_states(X) for X in population]
    if not pop:
        raise ValueError("population must be nonempty")
    alpha = alpha0 + sum(len(X) for X in pop)
    beta = beta0 + len(pop)
    pts = np.vstack([X[:, :2] for X in pop]) if pop else np.zeros((0, 2))
    return PosteriorDensityEstimator(alpha, 1.0 / (1.0 + beta), pts, prior_weight, arena_area)


def log_set_density(X, est: PosteriorDensityEstimator) -> float:
    """``log( n! NB(n) prod_s KDE(s) )``."""
    X = as_states(X)
    n = len(X)
    out = float(gammaln(n + 1) + est.log_nb(n))
    if n:
        out += float(np.sum(est.log_kde(X[:, :2])))
    return out


def set_density(X, est: PosteriorDensityEstimator) -> float:
    return math.exp(log_set_density(X, est))


# -- proposals ----------------------------------------------------------------


def _motion(X: np.ndarray, params: ModelParams, rng: np.random.Generator):
    """Motion-only proposal; also returns the source row of each output (-1 for births)."""
    keep = np.flatnonzero(rng.random(len(X)) < math.exp(-params.death_rate * params.dt))
    moved = advance(X[keep], sample_accel(len(keep), params.dash_power_sigma, rng), params.dt)
    nb = rng.poisson(params.birth_rate * params.dt) if params.birth_rate > 0 else 0
    if nb:
        x0, y0, x1, y1 = params.arena
        born = np.column_stack((rng.uniform(x0, x1, nb), rng.uniform(y0, y1, nb), np.zeros((nb, 2))))
        moved = np.vstack((moved, born))
        keep = np.concatenate((keep, np.full(nb, -1)))
    return moved, keep


def propose_motion(X, params: ModelParams, rng: np.random.Generator) -> np.ndarray:
    """Deaths at rate mu, random-acceleration moves, Poisson(lambda tau) uniform zero-velocity births."""
    return _motion(as_states(X), params, rng)[0]


@dataclass
class Proposal:
    motion: np.ndarray        # X', motion only
    state: np.ndarray         # returned proposal
    obs: ObsResult            # joint likelihood of ``state``
    source: np.ndarray        # previous-row index per returned row, -1 for new objects
    refined: bool = False


def _refine(X_prev: np.ndarray, O: np.ndarray, lq: np.ndarray, params: ModelParams,
            rng: np.random.Generator, **obs_kw) -> Proposal:
    Xm, src = _motion(X_prev, params, rng)
    L = loglik_matrix(Xm, O, params)
    obs_m = joint_likelihood_from_logs(L, lq, params, **obs_kw)
    F = obs_m.best_assoc.F
    if not F:
        return Proposal(Xm, Xm, obs_m, src)
    Fo = O[list(F)]
    fire = rng.random(len(Fo)) < Fo[:, 2]
    if not fire.any():
        return Proposal(Xm, Xm, obs_m, src)
    Fo = Fo[fire]
    pos = Fo[:, :2] + rng.standard_normal((len(Fo), 2)) @ params._cov_chol.T
    born = np.column_stack((pos, np.zeros((len(Fo), 2))))
    X2 = np.vstack((Xm, born))
    obs_r = joint_likelihood_from_logs(np.vstack((L, loglik_matrix(born, O, params))), lq, params, **obs_kw)
    if obs_r.log_likelihood > obs_m.log_likelihood:
        return Proposal(Xm, X2, obs_r, np.concatenate((src, np.full(len(born), -1))), True)
    return Proposal(Xm, Xm, obs_m, src)


def propose_refined(X_prev, O, params: ModelParams, rng: np.random.Generator, **obs_kw):
    """Motion proposal, births from the best association's false set, then keep the likelier of the two.

    Returns ``(state, ObsResult)``.
    """
    O = as_detections(O)
    p = _refine(as_states(X_prev), O, log_clutter(O, params), params, rng, **obs_kw)
    return p.state, p.obs


# -- weight update and resampling ----------------------------------------------


def systematic_indices(weights, n: int, rng: np.random.Generator) -> np.ndarray:
    w = np.asarray(weights, dtype=float)
    cs = np.cumsum(w / w.sum())
    cs[-1] = 1.0
    pos = (rng.random() + np.arange(n)) / n
    return np.searchsorted(cs, pos, side="right")


def resample(particles: list[WeightedParticle], rng: np.random.Generator, n: int | None = None):
    """Systematic resampling to ``n`` (default: same size) equally weighted copies."""
    n = len(particles) if n is None else n
    idx = systematic_indices([p.weight for p in particles], n, rng)
    out = []
    for i in idx:
        q = particles[i].copy()
        q.weight = 1.0 / n
        out.append(q)
    return out


@dataclass
class UpdateStats:
    n_refined: int = 0
    degenerate: bool = False
    log_weights: np.ndarray = field(default_factory=lambda: np.zeros(0))


def update(prev: list[WeightedParticle], O, params: ModelParams, rng: np.random.Generator,
           stats: UpdateStats | None = None, **obs_kw) -> list[WeightedParticle]:
    """One filtering step: propose, weight by ``m o / p``, normalize, resample."""
    O = as_detections(O)
    lq = log_clutter(O, params)
    props = [_refine(p.state, O, lq, params, rng, **obs_kw) for p in prev]
    est_m = fit_density([q.motion for q in props], params.gamma_alpha0, params.gamma_beta0,
                        params.kde_prior_weight, params.arena_area)
    est_p = fit_density([q.state for q in props], params.gamma_alpha0, params.gamma_beta0,
                        params.kde_prior_weight, params.arena_area)
    logw = np.empty(len(prev))
    for k, (p, q) in enumerate(zip(prev, props)):
        lw = math.log(p.weight) if p.weight > 0 else -math.inf
        # accepted motion-only proposals go through both estimators too
        lw += log_set_density(q.state, est_m) - log_set_density(q.state, est_p)
        logw[k] = lw + q.obs.log_likelihood
    degenerate = not np.isfinite(logw).any()
    if degenerate:
        log.warning("all particle weights vanished; resetting to uniform")
        w = np.full(len(prev), 1.0 / len(prev))
    else:
        w = np.exp(logw - logw.max())
        w /= w.sum()
    if stats is not None:
        stats.n_refined = sum(q.refined for q in props)
        stats.degenerate = degenerate
        stats.log_weights = logw
    weighted = []
    for p, q, wk in zip(prev, props, w):
        labels = np.full(len(q.state), -1, dtype=int)
        kept = q.source >= 0
        labels[kept] = p.labels[q.source[kept]]
        weighted.append(WeightedParticle(q.state, float(wk), q.obs, labels))
    return resample(weighted, rng, params.n_particles)


def initial_particles(params: ModelParams, states=None) -> list[WeightedParticle]:
    X = as_states(states if states is not None else np.zeros((0, 4)))
    n = params.n_particles
    return [WeightedParticle(X.copy(), 1.0 / n) for _ in range(n)]
