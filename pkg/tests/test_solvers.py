import numpy as np
import pytest

from mbacd import eso, linalg, problems, solvers
from mbacd.eso import EsoMode, EsoParams, StepParams
from mbacd.sampling import SamplingLaw, build_law, draw
from mbacd.solvers import SolverError, SolverState

from conftest import random_spd


def quad(seed=0, n=12):
    rng = np.random.default_rng(seed)
    return problems.quadratic_problem(random_spd(rng, n), rng.standard_normal(n))


def reference_acd(prob, law, v, sigma, iters, seed):
    """Coordinate-loop transcription of the ACD recursion, for cross-checking."""
    rng = np.random.default_rng(seed)
    p = law.p
    sw = min(p[i] ** 2 * sigma / v[i] for i in range(prob.n))
    theta = (np.sqrt(sw * sw + 4 * sw) - sw) / 2
    eta = 1 / theta
    w = v / p**2
    y = np.zeros(prob.n)
    z = np.zeros(prob.n)
    for _ in range(iters):
        x = (1 - theta) * y + theta * z
        S = draw(law, rng)
        g = prob.grad(x)
        y = x.copy()
        znew = z + eta * sw * x
        for i in S:
            y[i] -= g[i] / v[i]
            znew[i] -= eta / (p[i] * w[i]) * g[i]
        z = znew / (1 + eta * sw)
    return y


def test_full_cd_is_gradient_descent():
    prob = quad()
    L = linalg.lambda_max(prob.smoothness)
    law = SamplingLaw.full(prob.n)
    v = EsoParams(np.full(prob.n, L), L, EsoMode.PLAIN)
    tr = solvers.cd_run(prob, law, v, 1e9, np.random.default_rng(0), max_iter=100, at_iters=range(101), every=None)
    x = np.zeros(prob.n)
    fs = [prob.value(x)]
    for _ in range(100):
        x = x - prob.grad(x) / L
        fs.append(prob.value(x))
    assert np.allclose(tr.x, x, rtol=0, atol=1e-10)
    rec = [ck.f for ck in tr.checkpoints]
    assert np.allclose(rec, fs, rtol=0, atol=1e-10)
    assert np.all(np.diff(rec) <= 1e-14)


def test_cd_fixed_point():
    prob = quad(1)
    law = build_law("tau-nice", prob.smoothness, 3)
    v = eso.eso_tau_nice(prob.smoothness, 3)
    tr = solvers.cd_run(prob, law, v, 5, np.random.default_rng(0), x0=prob.xstar)
    assert np.allclose(tr.x, prob.xstar, atol=1e-12)


def test_acd_fixed_point():
    prob = quad(2)
    law = build_law("indep-acd", prob.smoothness, 3)
    v = eso.c_accelerated(law, prob.smoothness)
    tr = solvers.acd_run(prob, law, v, prob.sigma, 5, np.random.default_rng(0), x0=prob.xstar)
    assert np.allclose(tr.x, prob.xstar, atol=1e-12)
    assert all(abs(ck.gap) <= 1e-12 for ck in tr.checkpoints)


@pytest.mark.parametrize("variant, tau", [("tau-nice", 3), ("indep-acd", 2.5), ("indep-uniform", 1), ("serial", 1)])
def test_acd_matches_coordinate_loop_reference(variant, tau):
    prob = quad(3, n=8)
    law = build_law(variant, prob.smoothness, tau)
    v = eso.c_accelerated(law, prob.smoothness)
    tr = solvers.acd_run(prob, law, v, prob.sigma, 1e9, np.random.default_rng(9), max_iter=60, every=None)
    ref = reference_acd(prob, law, v.v, prob.sigma, 60, 9)
    assert np.allclose(tr.x, ref, rtol=1e-12, atol=1e-12)


def test_coord_evals_count_sampled_sizes():
    prob = quad(4, n=10)
    law = build_law("indep-uniform", prob.smoothness, 2)
    v = eso.c_plain(law, prob.smoothness)
    tr = solvers.cd_run(prob, law, v, 1e9, np.random.default_rng(5), max_iter=40, at_iters=range(41), every=None)
    rng = np.random.default_rng(5)
    sizes = np.cumsum([0] + [draw(law, rng).size for _ in range(40)])
    assert [ck.coord_evals for ck in tr.checkpoints] == sizes.tolist()
    assert [ck.iter for ck in tr.checkpoints] == list(range(41))
    assert len(set(np.diff(sizes))) > 1  # sizes vary from draw to draw


def test_empty_draws_still_average():
    prob = quad(5, n=3)
    law = build_law("indep-uniform", prob.smoothness, 1)
    v = eso.c_accelerated(law, prob.smoothness)
    # (2/3)^3 of the draws are empty; the loop reference handles them naturally
    tr = solvers.acd_run(prob, law, v, prob.sigma, 1e9, np.random.default_rng(2), max_iter=200, every=None)
    ref = reference_acd(prob, law, v.v, prob.sigma, 200, 2)
    assert np.allclose(tr.x, ref, rtol=1e-11, atol=1e-12)


def test_cd_serial_uniform_decay_on_diagonal_quadratic():
    n = 50
    prob = problems.synthetic_generator(3, n, 0)
    law = SamplingLaw.serial(np.full(n, 1 / n))
    v = EsoParams(np.diag(prob.smoothness).copy(), 1.0, EsoMode.PLAIN)
    ratios = []
    for seed in range(50):
        tr = solvers.cd_run(prob, law, v, 1, np.random.default_rng(seed), every=1.0)
        ratios.append(tr.checkpoints[-1].gap / tr.checkpoints[0].gap)
    ratios = np.array(ratios)
    se = ratios.std(ddof=1) / np.sqrt(ratios.size)
    # exact minimization of the sampled coordinate: each term survives n draws w.p. (1 - 1/n)^n
    assert abs(ratios.mean() - (1 - 1 / n) ** n) <= 3 * se
    r = (1 - prob.sigma / (n * np.max(np.diag(prob.smoothness)))) ** n
    assert ratios.mean() <= 1.5 * r


def test_potential_examples():
    prob = problems.quadratic_problem(np.eye(1), np.zeros(1))
    step = StepParams(0.1, 0.5, 2.0, w=np.ones(1))
    rec = solvers.potential(SolverState(np.zeros(1), np.array([np.sqrt(2.0)]), np.ones(1)), prob, step)
    assert rec.pk == pytest.approx(5.0)
    assert rec.pk >= rec.fgap / 0.25
    at = solvers.potential(SolverState(np.zeros(1), np.zeros(1), np.zeros(1)), prob, step)
    assert at.pk == 0.0
    with pytest.raises(ValueError):
        prob.fstar = None
        solvers.potential(SolverState(np.zeros(1), np.zeros(1), np.zeros(1)), prob, step)


def test_potential_contracts_in_expectation():
    n = 30
    prob = problems.synthetic_generator(3, n, 0)
    law = build_law("indep-acd", prob.smoothness, 4)
    v = eso.c_accelerated(law, prob.smoothness)
    theta = eso.acd_step_params(law, v, prob.sigma).theta
    ks = np.sort(np.random.default_rng(0).choice(np.arange(1, 300), 20, replace=False))
    at = sorted(set(ks) | set(ks + 1))
    ratios = np.zeros((40, ks.size))
    for seed in range(40):
        tr = solvers.acd_run(prob, law, v, prob.sigma, 1e9, np.random.default_rng(seed),
                             max_iter=301, at_iters=at, every=None)
        pot = {ck.iter: ck.potential for ck in tr.checkpoints}
        ratios[seed] = [pot[k + 1] / pot[k] for k in ks]
    mean = ratios.mean(axis=0)
    se = ratios.std(axis=0, ddof=1) / np.sqrt(ratios.shape[0])
    assert np.all(mean <= (1 - theta) + 3 * se)


def test_eps_stop_and_budget():
    prob = quad(6)
    law = build_law("tau-nice", prob.smoothness, 4)
    v = eso.c_accelerated(law, prob.smoothness)
    tr = solvers.acd_run(prob, law, v, prob.sigma, 1e4, np.random.default_rng(0), eps=1e-6)
    assert tr.status == "converged"
    assert tr.checkpoints[-1].gap <= 1e-6
    tr = solvers.acd_run(prob, law, v, prob.sigma, 2, np.random.default_rng(0))
    assert tr.status == "budget"
    assert tr.checkpoints[-1].coord_evals >= 2 * prob.n
    epochs = [ck.epochs for ck in tr.checkpoints]
    assert epochs == sorted(epochs)


def test_invalid_eso_is_rejected():
    prob = quad(7)
    law = build_law("tau-nice", prob.smoothness, 4)
    bad = EsoParams(np.diag(prob.smoothness) * 0.01, 1.0, EsoMode.PLAIN)
    with pytest.raises(ValueError, match="ESO"):
        solvers.cd_run(prob, law, bad, 1, np.random.default_rng(0))
    with pytest.raises(ValueError):
        solvers.acd_run(prob, law, eso.c_accelerated(law, prob.smoothness), 0.0, 1, np.random.default_rng(0))


def test_divergence_aborts_with_partial_trace():
    prob = quad(8).with_estimated_smoothness(1e-3)
    law = build_law("tau-nice", prob.smoothness, 2)
    v = eso.eso_tau_nice(prob.smoothness, 2)
    with pytest.raises(SolverError) as err, np.errstate(all="ignore"):
        solvers.cd_run(prob, law, v, 1e4, np.random.default_rng(0), every=0.5)
    assert err.value.trace is not None and len(err.value.trace.checkpoints) > 0


def test_runs_are_deterministic():
    prob = quad(9)
    law = build_law("indep-acd", prob.smoothness, 3)
    v = eso.c_accelerated(law, prob.smoothness)
    a = solvers.acd_run(prob, law, v, prob.sigma, 10, np.random.default_rng(4))
    b = solvers.acd_run(prob, law, v, prob.sigma, 10, np.random.default_rng(4))
    assert a.checkpoints == b.checkpoints
    assert np.array_equal(a.x, b.x)


def test_prox_acd_without_projection_equals_acd():
    prob = quad(10)
    law = build_law("indep-acd", prob.smoothness, 3)
    v = eso.c_accelerated(law, prob.smoothness)
    a = solvers.acd_run(prob, law, v, prob.sigma, 5, np.random.default_rng(1))
    b = solvers.prox_acd_run(prob, law, v, prob.sigma, 5, np.random.default_rng(1))
    assert np.array_equal(a.x, b.x)


def test_prox_acd_on_svm_dual():
    rng = np.random.default_rng(0)
    A = rng.standard_normal((20, 10))
    labels = np.where(rng.random(10) < 0.5, -1.0, 1.0)
    prob = problems.svm_dual_problem(A, labels)
    law = build_law("indep-acd", prob.smoothness, 3)
    v = eso.c_accelerated(law, prob.smoothness)
    seen = []

    class Watch:
        def __call__(self, x):
            out = np.maximum(x, 0.0)
            seen.append(out.min())
            return out

    prob.projection = Watch()
    tr = solvers.prox_acd_run(prob, law, v, prob.sigma, 200, np.random.default_rng(0))
    assert tr.experimental
    assert min(seen) >= 0.0
    assert np.all(tr.x >= 0)
    assert tr.checkpoints[-1].f < 0.0
    assert tr.checkpoints[-1].gap <= 1e-6


def test_agd_helper_matches_full_acd():
    prob = quad(11)
    L = linalg.lambda_max(prob.smoothness)
    law = SamplingLaw.full(prob.n)
    v = EsoParams(np.full(prob.n, L), L, EsoMode.ACCELERATED)
    ys = solvers.agd_run(prob, L, prob.sigma / L, 50)
    tr = solvers.acd_run(prob, law, v, prob.sigma, 1e9, np.random.default_rng(0), max_iter=50, every=None)
    assert np.allclose(tr.x, ys[-1], rtol=0, atol=1e-10)
