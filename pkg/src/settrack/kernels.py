"""Kernel backend selection.

The compiled extension is used when it imports; set ``SETTRACK_PURE_PYTHON=1``
to force the pure-Python fallback.  Both backends expose ``hungarian``,
``murty`` and ``joint_loglik`` with identical contracts.
"""
from __future__ import annotations

import os

import numpy as np

from . import _pykernels

try:
    from . import _ckernels
except ImportError:  # extension not built
    _ckernels = None


def available_backends() -> list[str]:
    return ["python"] + (["cython"] if _ckernels is not None else [])


def get_backend(name: str | None = None):
    if name is None:
        name = "python" if os.environ.get("SETTRACK_PURE_PYTHON") or _ckernels is None else "cython"
    if name == "cython":
        if _ckernels is None:
            raise ImportError("compiled kernels are not built")
        return _ckernels
    if name == "python":
        return _pykernels
    raise ValueError(f"unknown backend {name!r}")


backend = get_backend()
BACKEND = backend.BACKEND


def hungarian(cost, impl=None):
    return (impl or backend).hungarian(_as_rows(cost, impl))


def murty(cost, max_log_ratio=np.inf, cap=10_000, impl=None):
    return (impl or backend).murty(_as_rows(cost, impl), max_log_ratio, cap)


def joint_loglik(L, lq, nu_tau, xi_tau, t_assign, t_fm, cap=10_000, absorb=False, trace=None,
                 prio_shift=0.0, impl=None):
    impl = impl or backend
    L = np.ascontiguousarray(L, dtype=float)
    lq = np.ascontiguousarray(lq, dtype=float)
    if impl is _pykernels:
        L, lq = L.tolist(), lq.tolist()
    return impl.joint_loglik(L, lq, nu_tau, xi_tau, t_assign, t_fm, cap, absorb, trace, prio_shift)


def _as_rows(cost, impl):
    if isinstance(cost, np.ndarray):
        return cost.tolist()
    return cost
