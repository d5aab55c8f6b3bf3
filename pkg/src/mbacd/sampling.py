"""Minibatch sampling laws over coordinates ``{0, ..., n-1}``.

A :class:`SamplingLaw` is fully resolved at construction: it carries the
inclusion probabilities ``p`` and, for the root-solved importance laws, the
scalar ``delta`` that produced them. Draws use a caller-owned
``numpy.random.Generator``; every variant consumes a fixed, documented number
of uniform variates per draw so a run is reproducible from its seed alone.
"""
import enum
from dataclasses import dataclass
from typing import Optional

import numpy as np
from scipy import optimize

from .linalg import as_symmetric


class Variant(str, enum.Enum):
    TAU_NICE = "tau-nice"
    INDEP_UNIFORM = "indep-uniform"
    INDEP_SQRT = "indep-sqrt"  # S2: p proportional to sqrt(M_ii), clipped at 1
    INDEP_ACD = "indep-acd"  # S3 for ACD: p_i^2 / M_ii proportional to 1 - p_i
    INDEP_CD = "indep-cd"  # S3 for CD: p_i = M_ii / (delta + M_ii)
    SERIAL = "serial"
    FULL = "full"

    @property
    def independent(self):
        return self in (Variant.INDEP_UNIFORM, Variant.INDEP_SQRT, Variant.INDEP_ACD, Variant.INDEP_CD)

    @classmethod
    def parse(cls, name):
        aliases = {"s1": cls.TAU_NICE, "s2": cls.INDEP_SQRT, "s3": cls.INDEP_ACD, "nice": cls.TAU_NICE}
        key = str(name).strip().lower()
        if key in aliases:
            return aliases[key]
        try:
            return cls(key)
        except ValueError:
            choices = ", ".join(v.value for v in cls)
            raise ValueError(f"unknown sampling variant {name!r} (choose from {choices})") from None


@dataclass(frozen=True, eq=False)
class SamplingLaw:
    """A resolved sampling: variant, probability vector and nominal size.

    ``tau`` is the nominal expected minibatch size. It equals ``p.sum()``
    except for :attr:`Variant.INDEP_SQRT` laws where probabilities were
    clipped to 1; ``n_clipped`` counts those coordinates and
    :attr:`expected_size` gives the true ``E|S|``.
    """

    variant: Variant
    p: np.ndarray
    tau: float
    delta: Optional[float] = None
    n_clipped: int = 0

    def __post_init__(self):
        p = np.array(self.p, dtype=float)
        if p.ndim != 1 or p.size < 1:
            raise ValueError("probability vector must be a non-empty 1-d array")
        if np.any(p <= 0) or np.any(p > 1):
            raise ValueError("sampling is not proper: need 0 < p_i <= 1")
        p.setflags(write=False)
        object.__setattr__(self, "p", p)

    @property
    def n(self):
        return self.p.shape[0]

    @property
    def expected_size(self):
        """``E|S|``: exact for fixed-size laws, ``sum(p)`` for independent ones."""
        if self.variant in (Variant.SERIAL, Variant.TAU_NICE, Variant.FULL):
            return float(self.tau)
        return float(self.p.sum())

    @property
    def beta(self):
        """``(tau - 1) / (n - 1)`` for tau-nice laws (1 when ``n == 1``)."""
        if self.n == 1:
            return 1.0
        return (self.tau - 1) / (self.n - 1)

    @classmethod
    def serial(cls, p):
        p = np.asarray(p, dtype=float)
        if abs(p.sum() - 1) > 1e-9:
            raise ValueError("serial sampling probabilities must sum to 1")
        return cls(Variant.SERIAL, p, 1.0)

    @classmethod
    def full(cls, n):
        return cls(Variant.FULL, np.ones(n), float(n))


def _diag(M):
    d = np.diag(as_symmetric(M)).copy()
    if np.all(d == 0):
        raise ValueError("smoothness matrix has an all-zero diagonal")
    return d


def _importance_diag(M):
    d = _diag(M)
    if np.any(d <= 0):
        raise ValueError("importance samplings need M_ii > 0 for every coordinate")
    return d


def acd_probabilities(d, delta):
    """Probabilities with ``p_i^2 / (d_i (1 - p_i)) = 2 / delta``."""
    return 2.0 * d / (np.sqrt(d * d + 2.0 * d * delta) + d)


def cd_probabilities(d, delta):
    return d / (delta + d)


def _solve_delta(prob, d, tau, upper):
    """Find ``delta >= 0`` with ``sum(prob(d, delta)) == tau``.

    ``sum(prob(d, .))`` is continuous and strictly decreasing from ``n`` at
    zero; ``upper`` is doubled until the sum drops below ``tau``.
    """
    n = d.shape[0]
    if tau >= n:
        return 0.0
    excess = lambda delta: float(np.sum(prob(d, delta))) - tau  # noqa: E731
    hi = upper
    while excess(hi) > 0:
        hi *= 2.0
    return optimize.brentq(excess, 0.0, hi, xtol=1e-300, rtol=4 * np.finfo(float).eps, maxiter=500)


def build_law(variant, M, tau):
    """Construct a sampling law for smoothness matrix ``M`` and size ``tau``.

    ``tau`` must be an integer for :attr:`Variant.TAU_NICE`. Serial laws use
    ``p_i`` proportional to ``sqrt(M_ii)``; build other serial laws with
    :meth:`SamplingLaw.serial`.
    """
    variant = Variant.parse(variant) if not isinstance(variant, Variant) else variant
    M = as_symmetric(M)
    n = M.shape[0]
    _diag(M)
    if variant is Variant.FULL:
        return SamplingLaw.full(n)
    if variant is Variant.SERIAL:
        root = np.sqrt(_importance_diag(M))
        return SamplingLaw.serial(root / root.sum())

    if not 1 <= tau <= n:
        raise ValueError(f"tau must lie in [1, n={n}], got {tau}")
    if variant is Variant.TAU_NICE:
        if int(tau) != tau:
            raise ValueError("tau-nice sampling needs an integer tau")
        tau = int(tau)
        return SamplingLaw(variant, np.full(n, tau / n), tau)
    tau = float(tau)
    if variant is Variant.INDEP_UNIFORM:
        return SamplingLaw(variant, np.full(n, tau / n), tau)

    d = _importance_diag(M)
    if variant is Variant.INDEP_SQRT:
        root = np.sqrt(d)
        p = tau * root / root.sum()
        clipped = p > 1
        p[clipped] = 1.0
        return SamplingLaw(variant, p, tau, n_clipped=int(clipped.sum()))

    if variant is Variant.INDEP_CD:
        prob = cd_probabilities
    else:
        prob = acd_probabilities
    delta = _solve_delta(prob, d, tau, d.sum() / tau)
    p = np.minimum(prob(d, delta), 1.0)
    return SamplingLaw(variant, p, tau, delta=delta)


def probability_matrix(law):
    """Analytic ``P_ij = Prob(i in S and j in S)``."""
    n, p = law.n, law.p
    v = law.variant
    if v is Variant.FULL or (n == 1 and v is Variant.TAU_NICE):
        return np.ones((n, n))
    if v is Variant.TAU_NICE:
        beta = law.beta
        return (law.tau / n) * ((1 - beta) * np.eye(n) + beta * np.ones((n, n)))
    if v is Variant.SERIAL:
        return np.diag(p)
    P = np.outer(p, p)
    P[np.diag_indices(n)] = p
    return P


def draw(law, rng):
    """Draw one coordinate subset as a sorted integer array.

    Variate consumption per draw: tau-nice uses ``tau`` uniforms (partial
    Fisher-Yates), independent laws use ``n`` uniforms in index order,
    serial uses one, full uses none. Independent draws may be empty.
    """
    n, v = law.n, law.variant
    if v is Variant.FULL:
        return np.arange(n)
    if v is Variant.TAU_NICE:
        tau = int(law.tau)
        u = rng.random(tau)
        idx = np.arange(n)
        for i in range(tau):
            j = i + int(u[i] * (n - i))
            idx[i], idx[j] = idx[j], idx[i]
        return np.sort(idx[:tau])
    if v is Variant.SERIAL:
        cdf = np.cumsum(law.p)
        i = int(np.searchsorted(cdf, rng.random() * cdf[-1], side="right"))
        return np.array([min(i, n - 1)])
    return np.flatnonzero(rng.random(n) < law.p)


def draw_many(law, rng, draws):
    """Indicator matrix of ``draws`` consecutive draws, shape ``(draws, n)``.

    Consumes the generator exactly as ``draws`` calls to :func:`draw` would.
    """
    n, v = law.n, law.variant
    out = np.zeros((draws, n), dtype=bool)
    if v is Variant.FULL:
        out[:] = True
    elif v is Variant.TAU_NICE:
        tau = int(law.tau)
        u = rng.random((draws, tau))
        idx = np.tile(np.arange(n), (draws, 1))
        rows = np.arange(draws)
        for i in range(tau):
            j = i + (u[:, i] * (n - i)).astype(np.int64)
            a, b = idx[rows, i].copy(), idx[rows, j].copy()
            idx[rows, i], idx[rows, j] = b, a
        out[rows[:, None], idx[:, :tau]] = True
    elif v is Variant.SERIAL:
        cdf = np.cumsum(law.p)
        i = np.searchsorted(cdf, rng.random(draws) * cdf[-1], side="right")
        out[np.arange(draws), np.minimum(i, n - 1)] = True
    else:
        out[:] = rng.random((draws, n)) < law.p
    return out


def empirical_probability_matrix(law, rng, draws):
    if draws < 1:
        raise ValueError("draws must be positive")
    X = draw_many(law, rng, draws).astype(float)
    return (X.T @ X) / draws
