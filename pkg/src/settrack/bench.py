"""Pruning-error experiment: pruned vs exact joint and matched likelihoods on a simulated scene."""
from __future__ import annotations

import math
import time
from dataclasses import dataclass, field

import numpy as np

from .models import ModelParams, log_clutter, loglik_matrix
from .observation import count_exact_terms, joint_likelihood_from_logs, joint_loglik_dp, permanent
from .sim import Scenario, simulate

BENCH_FRAMES = 1000


def bench_params(**changes) -> ModelParams:
    """World model of the pruning experiment: births 0.06/s, deaths 0.02/s."""
    return ModelParams(birth_rate=0.06, death_rate=0.02).with_(**changes)


def bench_scenario(seed: int, n_frames: int = BENCH_FRAMES, params: ModelParams | None = None) -> Scenario:
    # objects bounce off the walls so every detection stays inside the clutter support
    return simulate(params or bench_params(), n_frames, seed, initial="stationary", reflect=True)


def _rel(v_log: float, w_log: float) -> float:
    if v_log == -math.inf:
        return 0.0 if w_log == -math.inf else math.inf
    return abs(1.0 - math.exp(w_log - v_log))


@dataclass
class PruneStats:
    t_assign: float
    t_fm: float
    matched_before: list[int] = field(default_factory=list)   # m! per subproblem
    matched_after: list[int] = field(default_factory=list)    # ranked assignments summed
    matched_err: list[float] = field(default_factory=list)
    joint_before: list[int] = field(default_factory=list)
    joint_after: list[int] = field(default_factory=list)
    joint_err: list[float] = field(default_factory=list)
    seconds: float = 0.0

    @staticmethod
    def _rate(before, after) -> float:
        return 1.0 - float(np.mean(after)) / float(np.mean(before)) if before else math.nan

    @property
    def matched_rate(self) -> float:
        return self._rate(self.matched_before, self.matched_after)

    @property
    def joint_rate(self) -> float:
        return self._rate(self.joint_before, self.joint_after)

    @property
    def matched_mean_err(self) -> float:
        return float(np.mean(self.matched_err)) if self.matched_err else math.nan

    @property
    def joint_mean_err(self) -> float:
        return float(np.mean(self.joint_err)) if self.joint_err else math.nan

    def summary(self) -> dict:
        def mm(v):
            return (float(np.mean(v)), int(np.max(v))) if v else (math.nan, 0)
        mb, mbx = mm(self.matched_before)
        ma, max_ = mm(self.matched_after)
        jb, jbx = mm(self.joint_before)
        ja, jax = mm(self.joint_after)
        return {
            "t_assign": self.t_assign, "t_fm": self.t_fm,
            "matched_avg_terms_before": mb, "matched_max_terms_before": mbx,
            "matched_avg_terms_after": ma, "matched_max_terms_after": max_,
            "matched_pruning_rate": self.matched_rate, "matched_rel_error": self.matched_mean_err,
            "joint_avg_terms_before": jb, "joint_max_terms_before": jbx,
            "joint_avg_terms_after": ja, "joint_max_terms_after": jax,
            "joint_pruning_rate": self.joint_rate, "joint_rel_error": self.joint_mean_err,
            "n_matched": len(self.matched_err), "n_joint": len(self.joint_err), "seconds": self.seconds,
        }


def prune_bench(scenario: Scenario, t_assign: float, t_fm: float, *, absorb: bool = False,
                impl=None, params: ModelParams | None = None) -> PruneStats:
    """Compare pruned and exact evaluation frame by frame.

    The matched likelihood is checked on every subproblem the pruned joint
    evaluation visits; both parts skip problems whose largest assignment is
    smaller than 2 x 2.
    """
    params = params or scenario.params
    st = PruneStats(t_assign, t_fm)
    for frame, O in zip(scenario.frames, scenario.detections):
        S = frame.states
        n_s, n_o = len(S), len(O)
        if min(n_s, n_o) < 2:
            continue
        L = loglik_matrix(S, O, params)
        lq = log_clutter(O, params)
        trace: list = []
        t0 = time.perf_counter()
        res = joint_likelihood_from_logs(L, lq, params, t_assign=t_assign, t_fm=t_fm, absorb=absorb,
                                         trace=trace, impl=impl)
        st.seconds += time.perf_counter() - t0
        st.joint_before.append(count_exact_terms(n_o, n_s))
        st.joint_after.append(res.terms_evaluated)
        st.joint_err.append(_rel(joint_loglik_dp(L, lq, params), res.log_likelihood))
        for fmask, mmask, size, lm, n_assign in trace:
            if size < 2:
                continue
            rows = [r for r in range(n_s) if not (mmask >> r) & 1]
            cols = [o for o in range(n_o) if not (fmask >> o) & 1]
            sub = L[np.ix_(rows, cols)]
            rmax = np.max(sub, axis=1)
            rmax[~np.isfinite(rmax)] = 0.0
            shift = float(rmax.sum())
            exact = permanent(np.exp(sub - rmax[:, None]))
            st.matched_before.append(math.factorial(size))
            st.matched_after.append(n_assign)
            st.matched_err.append(_rel(math.log(exact) + shift if exact > 0 else -math.inf, lm))
    return st


def sweep(scenario: Scenario, t_assigns=(0.01, 0.1, 0.5, 1.0), t_fms=(1e-4, 1e-3, 1e-2),
          fixed_assign: float = 0.1, fixed_fm: float = 1e-3, **kw) -> dict[str, list[PruneStats]]:
    """Vary one threshold with the other held at its default, as in the two error-vs-threshold curves."""
    return {
        "t_assign": [prune_bench(scenario, t, fixed_fm, **kw) for t in t_assigns],
        "t_fm": [prune_bench(scenario, fixed_assign, t, **kw) for t in t_fms],
    }
