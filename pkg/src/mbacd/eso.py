"""ESO parameters, leading constants and step parameters.

Two different constructions of the leading constant ``c(S, M)`` exist and
they are kept apart on purpose:

* :func:`c_accelerated` -- ``lambda_max(P' o M')`` with ``v = c p**2``
  (the form used to configure ACD);
* :func:`c_plain` -- ``lambda_max(P'' o M)`` with ``v = c p``
  (stepsizes ``1 / (c p_i)`` for plain minibatch CD).

Every ``v`` built here can be certified with :func:`verify_eso`, which checks
``P o M <= Diag(p o v)`` through the smallest eigenvalue of the difference.
"""
import enum
from dataclasses import dataclass
from typing import Optional

import numpy as np

from . import linalg
from .sampling import Variant, build_law, probability_matrix

ESO_RTOL = 1e-9


class EsoMode(str, enum.Enum):
    ACCELERATED = "accelerated"
    PLAIN = "plain"
    CLOSED_C1 = "closed-c1"
    CLOSED_C2 = "closed-c2"
    CLOSED_C3 = "closed-c3"
    TAU_NICE = "tau-nice"


@dataclass(frozen=True, eq=False)
class EsoParams:
    """ESO vector ``v``, the constant ``c`` behind it and how it was built.

    For :attr:`EsoMode.TAU_NICE`, ``v`` is not a multiple of a power of
    ``p``; there ``c`` holds ``max_i v_i / p_i``, the constant of the plain
    CD rate.
    """

    v: np.ndarray
    c: float
    mode: EsoMode

    def __post_init__(self):
        v = np.array(self.v, dtype=float)
        if np.any(~np.isfinite(v)) or np.any(v <= 0):
            raise ValueError("ESO parameters must be finite and positive")
        v.setflags(write=False)
        object.__setattr__(self, "v", v)


@dataclass(frozen=True, eq=False)
class StepParams:
    sigma_w: float
    theta: float
    eta: float
    w: Optional[np.ndarray] = None


def eso_tau_nice(M, tau):
    """``v_i = (1 - beta) M_ii + beta L`` for the tau-nice sampling."""
    M = linalg.as_symmetric(M)
    n = M.shape[0]
    d = np.diag(M).copy()
    if n == 1:
        return EsoParams(d, float(d[0]), EsoMode.TAU_NICE)
    if not (1 <= tau <= n and int(tau) == tau):
        raise ValueError(f"tau must be an integer in [1, {n}]")
    L = linalg.lambda_max(M)
    beta = (tau - 1) / (n - 1)
    v = (1 - beta) * d + beta * L
    # zero-curvature coordinates still need a finite stepsize
    v = np.maximum(v, 1e-15 * L)
    return EsoParams(v, float(np.max(v * n / tau)), EsoMode.TAU_NICE)


def _law_and_matrix(law, M):
    M = linalg.as_symmetric(M)
    if M.shape[0] != law.n:
        raise ValueError(f"law has n={law.n} but M is {M.shape[0]}x{M.shape[0]}")
    return M, probability_matrix(law)


def c_accelerated(law, M):
    M, P = _law_and_matrix(law, M)
    p = law.p
    P1 = linalg.diag_scale(p**-0.5, P, p**-0.5)
    M1 = linalg.diag_scale(1 / p, M, 1 / p)
    c = linalg.lambda_max(linalg.hadamard(P1, M1))
    return EsoParams(c * p**2, c, EsoMode.ACCELERATED)


def c_plain(law, M):
    M, P = _law_and_matrix(law, M)
    p = law.p
    P2 = linalg.diag_scale(1 / p, P, 1 / p)
    c = linalg.lambda_max(linalg.hadamard(P2, M))
    return EsoParams(c * p, c, EsoMode.PLAIN)


def closed_form_c(M, tau, which, delta=None):
    """Closed-form plain-CD constants for the three reference samplings.

    ``which`` is ``"C1"`` (tau-nice), ``"C2"`` (independent uniform) or
    ``"C3"`` (independent ``p_i = M_ii / (delta + M_ii)``). For C3, ``delta``
    is solved from ``tau`` when not given.
    """
    M = linalg.as_symmetric(M)
    n = M.shape[0]
    which = str(which).upper()
    if n == 1:
        return float(M[0, 0])
    D = np.diag(np.diag(M))
    if which == "C1":
        return n / tau * linalg.lambda_max((tau - 1) / (n - 1) * M + (n - tau) / (n - 1) * D)
    if which == "C2":
        return linalg.lambda_max(M + (n - tau) / tau * D)
    if which == "C3":
        if delta is None:
            delta = build_law(Variant.INDEP_CD, M, tau).delta
        return linalg.lambda_max(M) + delta
    raise ValueError(f"unknown closed form {which!r}; expected C1, C2 or C3")


_CLOSED_FOR = {
    Variant.TAU_NICE: ("C1", EsoMode.CLOSED_C1),
    Variant.INDEP_UNIFORM: ("C2", EsoMode.CLOSED_C2),
    Variant.INDEP_CD: ("C3", EsoMode.CLOSED_C3),
}


def closed_form_eso(law, M):
    """``v = c p`` from the closed form matching ``law``'s variant."""
    if law.variant not in _CLOSED_FOR:
        raise ValueError(f"no closed form for {law.variant.value} sampling")
    which, mode = _CLOSED_FOR[law.variant]
    c = closed_form_c(M, law.tau, which, delta=law.delta)
    return EsoParams(c * law.p, c, mode)


def build_eso(law, M, mode):
    """Dispatch on ``mode``: accelerated, plain, closed or tau-nice."""
    mode = str(getattr(mode, "value", mode)).lower()
    if mode == "accelerated":
        return c_accelerated(law, M)
    if mode == "plain":
        return c_plain(law, M)
    if mode in ("closed", "closed-c1", "closed-c2", "closed-c3"):
        return closed_form_eso(law, M)
    if mode == "tau-nice":
        if law.variant is not Variant.TAU_NICE:
            raise ValueError("the tau-nice ESO only applies to tau-nice sampling")
        return eso_tau_nice(M, law.tau)
    raise ValueError(f"unknown ESO mode {mode!r}")


def rate_lower_bound(M, tau, sigma):
    """``sum_i sqrt(M_ii) / (tau sqrt(sigma))``: no law of size tau beats it."""
    if sigma <= 0 or tau < 1:
        raise ValueError("need sigma > 0 and tau >= 1")
    d = np.diag(np.asarray(M, dtype=float))
    return float(np.sum(np.sqrt(d)) / (tau * np.sqrt(sigma)))


def canonicalize_eso(law, eso):
    """Replace ``v`` by ``c p**2`` with ``c = max_j v_j / p_j**2``.

    The result dominates ``v`` elementwise, so it is again an ESO, and it
    leaves the ACD rate unchanged.
    """
    p2 = law.p**2
    c = float(np.max(eso.v / p2))
    return EsoParams(c * p2, c, eso.mode)


def sigma_weighted(sigma, law, v):
    """Strong-convexity modulus in the ``w = v / p**2`` norm: ``min p**2 sigma / v``."""
    if sigma <= 0:
        raise ValueError("sigma must be positive")
    v = getattr(v, "v", v)
    return float(np.min(law.p**2 * sigma / np.asarray(v)))


def step_params(sigma_w, w=None):
    """Momentum ``theta`` solving ``1 + sigma_w / theta = 1 / (1 - theta)``."""
    if not sigma_w > 0:
        raise ValueError(f"sigma_w must be positive, got {sigma_w}")
    if sigma_w > 1:
        # roundoff above the bound sigma_w <= p_i^2 <= 1 is tolerated
        if sigma_w > 1 + 1e-12:
            raise ValueError(f"sigma_w must not exceed 1, got {sigma_w}")
        sigma_w = 1.0
    theta = 2 * sigma_w / (np.sqrt(sigma_w**2 + 4 * sigma_w) + sigma_w)
    return StepParams(float(sigma_w), float(theta), float(1 / theta), w)


def acd_step_params(law, eso, sigma):
    """Step parameters for ACD from the Euclidean strong-convexity modulus."""
    sw = sigma_weighted(sigma, law, eso.v)
    return step_params(sw, w=eso.v / law.p**2)


def verify_eso(law, M, v):
    """``lambda_min(Diag(p o v) - P o M)``; nonnegative certifies the ESO."""
    M, P = _law_and_matrix(law, M)
    v = np.asarray(getattr(v, "v", v), dtype=float)
    return linalg.lambda_min(np.diag(law.p * v) - P * M)


def eso_holds(law, M, v, rtol=ESO_RTOL):
    v = np.asarray(getattr(v, "v", v), dtype=float)
    return verify_eso(law, M, v) >= -rtol * float(np.max(law.p * v))
