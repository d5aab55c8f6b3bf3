"""Minibatch coordinate descent and accelerated coordinate descent.

Both methods use the direct full-vector recursion: each iteration costs
``O(n)`` vector work plus the partial derivatives for the sampled set.
Work is counted in coordinate-gradient evaluations; one epoch is ``n`` of
them.
"""
import logging
import time
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from . import eso as eso_mod
from .sampling import draw

log = logging.getLogger(__name__)


class SolverError(RuntimeError):
    """A run aborted (non-finite iterate or objective). ``trace`` holds what was recorded."""

    def __init__(self, msg, trace=None):
        super().__init__(msg)
        self.trace = trace


@dataclass
class Checkpoint:
    iter: int
    epochs: float
    coord_evals: int
    f: float
    gap: Optional[float] = None
    potential: Optional[float] = None
    wall_ms: Optional[float] = None


@dataclass
class SolverTrace:
    checkpoints: list = field(default_factory=list)
    meta: dict = field(default_factory=dict)
    status: str = "budget"
    x: Optional[np.ndarray] = None
    experimental: bool = False

    def first_reaching(self, target_gap):
        """First checkpoint with ``gap <= target_gap``, or ``None``."""
        for ck in self.checkpoints:
            if ck.gap is not None and ck.gap <= target_gap:
                return ck
        return None

    def at_iter(self, k):
        for ck in self.checkpoints:
            if ck.iter == k:
                return ck
        raise KeyError(k)


@dataclass
class SolverState:
    x: np.ndarray
    y: np.ndarray
    z: np.ndarray
    k: int = 0
    coord_evals: int = 0


@dataclass(frozen=True)
class PotentialRecord:
    pk: float
    fgap: float
    znorm: float


def potential(state, problem, step):
    """Lyapunov value ``fgap / theta^2 + ||z - x*||_w^2 / (2 (1 - theta))``."""
    if problem.fstar is None or problem.xstar is None:
        raise ValueError("potential needs a known optimum (fstar and xstar)")
    if step.w is None:
        raise ValueError("step parameters carry no weight vector w")
    fgap = problem.value(state.y) - problem.fstar
    dz = state.z - problem.xstar
    znorm = float(np.sum(step.w * dz * dz))
    theta = step.theta
    return PotentialRecord(fgap / theta**2 + znorm / (2 * (1 - theta)), fgap, znorm)


def _law_meta(law, eso):
    return {
        "n": law.n,
        "variant": law.variant.value,
        "tau": law.tau,
        "expected_size": law.expected_size,
        "p_min": float(law.p.min()),
        "p_max": float(law.p.max()),
        "delta": law.delta,
        "n_clipped": law.n_clipped,
        "eso_mode": eso.mode.value,
        "c": eso.c,
        "v_min": float(eso.v.min()),
        "v_max": float(eso.v.max()),
    }


def _certify(problem, law, eso):
    if problem.smoothness_exact and not eso_mod.eso_holds(law, problem.smoothness, eso.v):
        gap = eso_mod.verify_eso(law, problem.smoothness, eso.v)
        raise ValueError(f"ESO parameters are not valid for this sampling (PSD gap {gap:.3e})")


class _Recorder:
    """Checkpoint bookkeeping shared by both methods."""

    def __init__(self, problem, trace, every, at_iters, eps, timing):
        self.problem = problem
        self.trace = trace
        self.n = problem.n
        self.step = max(1, int(round(every * self.n))) if every else None
        self.next_evals = self.step
        self.at_iters = set(at_iters or ())
        self.eps = eps
        self.t0 = time.perf_counter() if timing else None
        self.last_iter = -1

    def due(self, k, evals):
        return (self.step is not None and evals >= self.next_evals) or k in self.at_iters

    def record(self, k, evals, point, pot=None):
        """Append a checkpoint; return True when the gap target is met."""
        f = self.problem.value(point)
        if not np.isfinite(f) or not np.all(np.isfinite(point)):
            raise SolverError(f"non-finite iterate or objective at iteration {k} (f={f})", self.trace)
        fstar = self.problem.fstar
        gap = None if fstar is None else f - fstar
        wall = None if self.t0 is None else (time.perf_counter() - self.t0) * 1e3
        self.trace.checkpoints.append(Checkpoint(k, evals / self.n, evals, f, gap, pot, wall))
        self.last_iter = k
        if self.step is not None:
            while self.next_evals <= evals:
                self.next_evals += self.step
        return self.eps is not None and gap is not None and gap <= self.eps


def cd_run(
    problem,
    law,
    eso,
    budget_epochs,
    rng,
    eps=None,
    every=1.0,
    at_iters=(),
    max_iter=None,
    x0=None,
    project=False,
    timing=False,
):
    """Minibatch CD: ``x_i <- x_i - grad_i f(x) / v_i`` for ``i`` in the sampled set.

    Stops after ``budget_epochs`` epochs, ``max_iter`` iterations, or once the
    gap drops to ``eps`` at a checkpoint. Checkpoints are taken every
    ``every`` epochs and at the iterations in ``at_iters``.
    """
    _certify(problem, law, eso)
    n = problem.n
    v = eso.v
    proj = problem.projection if project else None
    x = np.zeros(n) if x0 is None else np.array(x0, dtype=float)
    if proj is not None:
        x = proj(x)
    trace = SolverTrace(meta={"method": "cd", **_law_meta(law, eso)})
    rec = _Recorder(problem, trace, every, at_iters, eps, timing)
    budget = budget_epochs * n
    k = evals = 0
    if rec.record(0, 0, x):
        trace.status = "converged"
        trace.x = x
        return trace
    while evals < budget and (max_iter is None or k < max_iter):
        S = draw(law, rng)
        if S.size:
            x[S] -= problem.partials(S, x) / v[S]
            if proj is not None:
                x[S] = proj(x[S])
            evals += S.size
        k += 1
        if rec.due(k, evals) and rec.record(k, evals, x):
            trace.status = "converged"
            break
    if rec.last_iter != k:
        rec.record(k, evals, x)
    trace.x = x
    return trace


def acd_run(
    problem,
    law,
    eso,
    sigma,
    budget_epochs,
    rng,
    eps=None,
    every=1.0,
    at_iters=(),
    max_iter=None,
    x0=None,
    project=False,
    timing=False,
):
    """Accelerated CD with arbitrary sampling.

    Per iteration::

        x = (1 - theta) y + theta z
        y = x - sum_{i in S} grad_i f(x) / v_i e_i
        z = (z + eta sigma_w x - sum_{i in S} eta p_i / v_i grad_i f(x) e_i) / (1 + eta sigma_w)

    with ``sigma_w = min_i p_i^2 sigma / v_i``, ``theta`` from
    :func:`mbacd.eso.step_params` and ``eta = 1 / theta``. Each sampled
    partial derivative is evaluated once and used in both updates. With
    ``project=True`` the problem's projection is applied to ``y`` and ``z``
    after every update (no convergence theory backs this).
    """
    _certify(problem, law, eso)
    step = eso_mod.acd_step_params(law, eso, sigma)
    theta, eta, sw = step.theta, step.eta, step.sigma_w
    n = problem.n
    v = eso.v
    y_coef = 1.0 / v
    z_coef = eta * law.p / v
    mix = eta * sw
    shrink = 1.0 / (1.0 + mix)
    proj = problem.projection if project else None
    y = np.zeros(n) if x0 is None else np.array(x0, dtype=float)
    if proj is not None:
        y = proj(y)
    z = y.copy()
    x = y.copy()
    track = problem.fstar is not None and problem.xstar is not None

    trace = SolverTrace(
        meta={"method": "acd", "theta": theta, "sigma_w": sw, "sigma": sigma, **_law_meta(law, eso)},
        experimental=proj is not None,
    )
    rec = _Recorder(problem, trace, every, at_iters, eps, timing)

    def pot():
        if not track:
            return None
        return potential(SolverState(x, y, z), problem, step).pk

    budget = budget_epochs * n
    k = evals = 0
    if rec.record(0, 0, y, pot()):
        trace.status = "converged"
        trace.x = y
        return trace
    while evals < budget and (max_iter is None or k < max_iter):
        x = (1 - theta) * y + theta * z
        S = draw(law, rng)
        y = x.copy()
        z = z + mix * x
        if S.size:
            g = problem.partials(S, x)
            y[S] -= y_coef[S] * g
            z[S] -= z_coef[S] * g
            evals += S.size
        z *= shrink
        if proj is not None:
            y = proj(y)
            z = proj(z)
        k += 1
        if rec.due(k, evals) and rec.record(k, evals, y, pot()):
            trace.status = "converged"
            break
    if rec.last_iter != k:
        rec.record(k, evals, y, pot())
    trace.x = y
    return trace


def prox_acd_run(problem, law, eso, sigma, budget_epochs, rng, **kwargs):
    """ACD with the problem's projection applied to ``y`` and ``z`` (experimental)."""
    return acd_run(problem, law, eso, sigma, budget_epochs, rng, project=True, **kwargs)


def agd_run(problem, L, sigma_w, iters, x0=None):
    """Full-gradient AGD in two-sequence momentum form, returning all ``y`` iterates.

    ``y_{k+1} = x_{k+1} - grad f(x_{k+1}) / L`` and
    ``x_{k+2} = 2 (1 - theta) y_{k+1} - (1 - theta)^2 y_k + theta^2 x_{k+1}``,
    the ``z``-free form of ACD with full sampling.
    """
    theta = eso_mod.step_params(sigma_w).theta
    y_prev = np.zeros(problem.n) if x0 is None else np.array(x0, dtype=float)
    x = y_prev.copy()
    ys = []
    for _ in range(iters):
        y = x - problem.grad(x) / L
        ys.append(y)
        x, y_prev = 2 * (1 - theta) * y - (1 - theta) ** 2 * y_prev + theta**2 * x, y
    return ys
