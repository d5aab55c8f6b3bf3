"""Problem oracles: quadratics, regularized logistic regression and the SVM dual.

Each oracle exposes ``value``, ``grad`` and ``partials`` (the partial
derivatives for a subset of coordinates), a smoothness matrix ``M`` and a
strong-convexity modulus ``sigma``. ``smoothness_exact`` is ``False`` once
``M`` has been replaced by a diagonal estimate; solvers then skip ESO
certification and nothing theoretical should be asserted about the run.
"""
import dataclasses
import logging
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np
from scipy import special

from . import linalg

log = logging.getLogger(__name__)


def nonnegative_projection(x):
    return np.maximum(x, 0.0)


@dataclass(eq=False)
class Problem:
    """Base oracle. Subclasses implement ``value`` and ``partials``."""

    smoothness: np.ndarray
    sigma: float
    smoothness_exact: bool = True
    projection: Optional[Callable] = None
    fstar: Optional[float] = None
    xstar: Optional[np.ndarray] = None
    name: str = "problem"

    @property
    def n(self):
        return self.smoothness.shape[0]

    def value(self, x):
        raise NotImplementedError

    def grad(self, x):
        return self.partials(np.arange(self.n), x)

    def partials(self, idx, x):
        raise NotImplementedError

    def grad_coord(self, i, x):
        return float(self.partials(np.array([i]), x)[0])

    def with_estimated_smoothness(self, factor, sigma=None):
        """Copy of the oracle with ``M`` replaced by ``factor * Diag(M)``.

        ``sigma`` defaults to the smallest diagonal entry of the exact ``M``.
        """
        exact_diag = np.diag(self.smoothness)
        return dataclasses.replace(
            self,
            smoothness=estimate_smoothness_diag(exact_diag, factor),
            sigma=float(np.min(exact_diag)) if sigma is None else sigma,
            smoothness_exact=False,
        )


@dataclass(eq=False)
class QuadraticProblem(Problem):
    """``f(x) = x'Hx / 2 - b'x``; ``H`` defaults to the smoothness matrix.

    ``H`` is kept apart from :attr:`smoothness` so that swapping in an
    estimated smoothness matrix leaves the objective unchanged.
    """

    b: np.ndarray = field(default=None)
    H: np.ndarray = field(default=None)

    def __post_init__(self):
        if self.H is None:
            self.H = self.smoothness

    def value(self, x):
        return float(0.5 * x @ (self.H @ x) - self.b @ x)

    def grad(self, x):
        return self.H @ x - self.b

    def partials(self, idx, x):
        return self.H[idx] @ x - self.b[idx]


@dataclass(eq=False)
class LogisticProblem(Problem):
    """``(1/m) sum_j log(1 + exp(-b_j A_j x)) + (lam/2) ||x||^2``."""

    A: np.ndarray = field(default=None)
    b: np.ndarray = field(default=None)
    lam: float = 0.0

    def value(self, x):
        margins = -self.b * (self.A @ x)
        return float(np.mean(np.logaddexp(0.0, margins)) + 0.5 * self.lam * x @ x)

    def _residual(self, x):
        return -self.b * special.expit(-self.b * (self.A @ x)) / self.A.shape[0]

    def grad(self, x):
        return self.A.T @ self._residual(x) + self.lam * x

    def partials(self, idx, x):
        return self.A[:, idx].T @ self._residual(x) + self.lam * x[idx]


@dataclass(eq=False)
class SvmDualProblem(Problem):
    """Smooth part of the squared-hinge SVM dual; the orthant is a projection.

    ``value`` returns the smooth part only. Iterates produced with
    :attr:`projection` are feasible, where it coincides with the full
    objective.
    """

    At: np.ndarray = field(default=None)  # A with column i scaled by b_i
    lam: float = 0.0

    def value(self, x):
        n = x.shape[0]
        r = self.At @ x
        return float(r @ r / (self.lam * n * n) - x.sum() / n + x @ x / (4 * n))

    def grad(self, x):
        n = x.shape[0]
        return 2 * self.At.T @ (self.At @ x) / (self.lam * n * n) - 1 / n + x / (2 * n)

    def partials(self, idx, x):
        n = x.shape[0]
        r = self.At @ x
        return 2 * self.At[:, idx].T @ r / (self.lam * n * n) - 1 / n + x[idx] / (2 * n)


def quadratic_problem(M, b, name="quadratic"):
    M = linalg.as_symmetric(M)
    b = np.asarray(b, dtype=float)
    if b.shape != (M.shape[0],):
        raise ValueError("b must be a vector matching M")
    if np.any(np.diag(M) <= 0):
        raise ValueError("quadratic needs M_ii > 0")
    sigma = linalg.lambda_min(M)
    # eigenvalues at roundoff scale mean a singular M, not a tiny modulus
    if sigma <= M.shape[0] * np.finfo(float).eps * linalg.lambda_max(M):
        sigma = 0.0
    xstar = np.linalg.lstsq(M, b, rcond=None)[0]
    fstar = float(0.5 * xstar @ (M @ xstar) - b @ xstar)
    return QuadraticProblem(M, sigma, fstar=fstar, xstar=xstar, name=name, b=b)


def synthetic_matrix(problem_type, n, rng):
    """Smoothness matrix of the five synthetic quadratic families."""
    if problem_type in (1, 5) and n % 2:
        raise ValueError(f"type {problem_type} needs an even n")
    if problem_type == 1:
        A = rng.standard_normal((n // 2, n))
        return A.T @ A + np.eye(n)
    if problem_type == 2:
        A = rng.standard_normal((2 * n, n))
        return A.T @ A + np.eye(n)
    if problem_type == 3:
        return np.diag(np.arange(1.0, n + 1))
    if problem_type == 4:
        A = np.zeros((n, n))
        A[: n - 1, : n - 1] = 1.0
        A[n - 1, n - 1] = n
        return A + np.eye(n)
    if problem_type == 5:
        A = rng.standard_normal((n // 2, n))
        D = np.arange(1.0, n // 2 + 1) / np.sqrt(n)
        return A.T @ (D[:, None] * A) + np.eye(n)
    raise ValueError(f"synthetic problem type must be 1..5, got {problem_type}")


def synthetic_generator(problem_type, n, seed):
    """Quadratic ``x'Mx/2 - b'x`` with ``M`` from family 1-5 and ``b ~ N(0, I)``."""
    rng = np.random.default_rng(seed)
    M = synthetic_matrix(int(problem_type), n, rng)
    b = rng.standard_normal(n)
    return quadratic_problem(M, b, name=f"synthetic:{problem_type}")


def logistic_problem(A, b, lam=None, fstar=True):
    """Regularized logistic regression on data ``A`` (m x n), labels ``b``.

    ``lam`` defaults to the mean diagonal of the data part of the smoothness
    matrix, ``(1/(4m)) sum_j A_ji^2``.
    """
    A = np.asarray(A, dtype=float)
    b = np.asarray(b, dtype=float)
    if A.ndim != 2 or A.size == 0:
        raise ValueError("logistic regression needs a non-empty data matrix")
    m, n = A.shape
    if b.shape != (m,) or not np.all(np.isin(b, (-1.0, 1.0))):
        raise ValueError("labels must be a vector of -1/+1 with one entry per row")
    data_part = A.T @ A / (4 * m)
    if lam is None:
        lam = float(np.mean(np.diag(data_part)))
    if not lam > 0:
        raise ValueError("lambda must be positive")
    M = data_part + lam * np.eye(n)
    prob = LogisticProblem(M, lam, name="logistic", A=A, b=b, lam=lam)
    if fstar:
        attach_reference_solution(prob)
    return prob


def svm_dual_problem(A, b, lam=None, fstar=True):
    """Squared-hinge SVM dual over the nonnegative orthant.

    ``A`` is (features m) x (examples n) and ``b`` holds the n labels, so the
    dual variable has one entry per example. ``lam`` defaults to the largest
    squared example norm divided by 10.
    """
    A = np.asarray(A, dtype=float)
    b = np.asarray(b, dtype=float)
    if A.ndim != 2 or A.size == 0:
        raise ValueError("SVM dual needs a non-empty data matrix")
    m, n = A.shape
    if b.shape != (n,):
        raise ValueError("labels must have one entry per column of A")
    At = A * b[None, :]
    gram = At.T @ At
    if lam is None:
        lam = float(np.max(np.diag(gram))) / 10
    if not lam > 0:
        raise ValueError("lambda must be positive")
    M = 2 * gram / (lam * n * n) + np.eye(n) / (2 * n)
    prob = SvmDualProblem(
        M, 1 / (2 * n), projection=nonnegative_projection, name="svm-dual", At=At, lam=lam
    )
    if fstar:
        attach_reference_solution(prob)
    return prob


def estimate_smoothness_diag(exact_diag, factor):
    if not factor > 0:
        raise ValueError("factor must be positive")
    return np.diag(factor * np.asarray(exact_diag, dtype=float))


def rescale_corrupt(A, rng=None, row_scale=None, col_scale=None):
    """Multiply row j by ``r_j`` and column i by ``c_i``, both U[0, 1] by default."""
    A = np.asarray(A, dtype=float)
    m, n = A.shape
    if row_scale is None:
        row_scale = rng.random(m)
    if col_scale is None:
        col_scale = rng.random(n)
    return np.asarray(row_scale)[:, None] * A * np.asarray(col_scale)[None, :]


def reference_solution(problem, tol=1e-13, maxiter=200_000):
    """Minimize with (projected) constant-momentum AGD on the exact ``M``.

    Stops once the gradient-mapping certificate ``||G||^2 / (2 sigma)`` drops
    below ``tol * max(1, |f|)``. Returns ``(x, f(x))``.
    """
    L = linalg.lambda_max(problem.smoothness)
    mu = problem.sigma
    q = np.sqrt(mu / L)
    momentum = (1 - q) / (1 + q)
    proj = problem.projection or (lambda z: z)
    x = proj(np.zeros(problem.n))
    x_prev = x
    for k in range(maxiter):
        y = x + momentum * (x - x_prev)
        x_prev = x
        x = proj(y - problem.grad(y) / L)
        gmap = L * (y - x)
        if gmap @ gmap / (2 * mu) <= tol * max(1.0, abs(problem.value(x))):
            break
    else:
        log.warning("reference solve stopped after %d iterations", maxiter)
    # a few plain steps settle the final iterate
    for _ in range(10):
        x = proj(x - problem.grad(x) / L)
    return x, problem.value(x)


def attach_reference_solution(problem):
    x, f = reference_solution(problem)
    problem.xstar, problem.fstar = x, f
    return problem
