"""End-to-end acceptance checks, one test per criterion.

Each test measures its own wall time against the stated budget. The terminal
summary prints a PASS/FAIL line per criterion (see conftest.py).
"""
import math
import time

import numpy as np
import pytest

from ebransac import experiments as E
from ebransac import gibbs, synth
from ebransac.baselines import exponential_mle, gaussian_mle, lms_fit
from ebransac.core import CallableLossModel, Dataset, mean_loss
from ebransac.ebr import EbrConfig, ebr_loss, ebr_loss_grad, fit
from ebransac.models import ExponentialModel, GaussianModel, LinearRegressionModel, kld_gaussian
from ebransac.theory import (DiscreteDistribution, brute_force_minimizer, discrete_ebr_loss, h_beta,
                             solve_t_cut)
from oracles import all_selections, central_diff, rel_err, trapezoid_population_loss

BETAS_DISCRETE = (-3.0, -1.0, 0.0, 1.0, 3.0)
# grid resolution per support size, keeping the brute-force search inside budget
RESOLUTION = {2: 2000, 3: 300, 4: 80, 5: 35, 6: 20}
SEEDS = range(10)


class Budget:
    def __init__(self, seconds):
        self.seconds = seconds

    def __enter__(self):
        self.start = time.perf_counter()
        return self

    def __exit__(self, *exc):
        self.elapsed = time.perf_counter() - self.start
        if exc[0] is None:
            assert self.elapsed < self.seconds, f"took {self.elapsed:.1f}s, budget {self.seconds}s"


@pytest.fixture(scope="module")
def random_qs():
    rng = np.random.default_rng(1001)
    qs = []
    for _ in range(100):
        k = int(rng.integers(2, 7))
        qs.append(DiscreteDistribution.normalized(rng.dirichlet(np.ones(k))))
    return qs


def test_criterion_01_cutoff_minimizer_matches_brute_force(random_qs):
    with Budget(120):
        worst = -math.inf
        for q in random_qs:
            for beta in BETAS_DISCRETE:
                sol = solve_t_cut(q, beta)
                closed = discrete_ebr_loss(q, sol.p.probs, beta)
                brute = discrete_ebr_loss(q, brute_force_minimizer(q, beta, RESOLUTION[q.K]).probs, beta)
                worst = max(worst, closed - brute)
                assert closed <= brute + 1e-6
                assert np.array_equal(sol.p.probs > 0, q.probs > sol.t_cut)
    print(f"max(closed - brute) = {worst:.3e}")


def test_criterion_02_cutoff_monotone_limits_and_residual(random_qs):
    grid = np.linspace(-10.0, 10.0, 50)
    with Budget(30):
        worst = 0.0
        for q in random_qs:
            cuts = []
            for beta in grid:
                sol = solve_t_cut(q, beta)
                res = abs(h_beta(q, beta, sol.t_cut))
                worst = max(worst, res)
                assert res <= 1e-10
                cuts.append(sol.t_cut)
            assert all(a > b for a, b in zip(cuts, cuts[1:]))
            assert solve_t_cut(q, 20.0).t_cut <= math.exp(-20.0)
            assert solve_t_cut(q, -20.0).t_cut >= 0.999 * q.t_star
    print(f"max |h| on grid = {worst:.3e}")


def _grad_instances(rng):
    for _ in range(20):
        n = int(rng.integers(5, 40))
        x = rng.normal(0, 2, n)
        yield (LinearRegressionModel(), Dataset(x, 1.5 * x - 0.5 + rng.normal(0, 1, n)),
               np.array([rng.uniform(-3, 3), rng.uniform(-3, 3)]))
        yield (GaussianModel(), Dataset(rng.normal(0, 1.5, n)),
               np.array([rng.uniform(-2, 2), rng.uniform(0.3, 3)]))
        yield (ExponentialModel(), Dataset(rng.exponential(1.0, n)), np.array([rng.uniform(0.2, 4)]))


def test_criterion_03_gradient_matches_finite_differences():
    rng = np.random.default_rng(303)
    with Budget(10):
        worst = 0.0
        for model, data, theta in _grad_instances(rng):
            for beta in (-2.0, 0.0, 5.0):
                g = ebr_loss_grad(model, theta, data, beta)
                fd = central_diff(lambda t: ebr_loss(model, t, data, beta), theta)
                err = rel_err(g, fd)
                worst = max(worst, err)
                assert err <= 1e-6
    print(f"max relative gradient error = {worst:.3e}")


def test_criterion_04_marginal_over_selections():
    rng = np.random.default_rng(404)
    model = LinearRegressionModel()
    with Budget(30):
        worst = 0.0
        for n in (3, 7, 12):
            x = rng.uniform(-2, 2, n)
            data = Dataset(x, x + 1 + rng.normal(0, 0.5, n))
            selections = all_selections(n)
            for _ in range(10):
                theta = rng.normal([1, 1], 0.7)
                beta = rng.uniform(-1, 3)
                total = math.fsum(math.exp(gibbs.joint_log_density_unnorm(model, theta, w, data, beta))
                                  for w in selections)
                expected = math.expm1(-n * ebr_loss(model, theta, data, beta))
                err = abs(total - expected) / abs(expected)
                worst = max(worst, err)
                assert err <= 1e-10
    print(f"max relative error = {worst:.3e}")


def test_criterion_05_sampler_exactness():
    vals = np.zeros(2)
    model = CallableLossModel(1, lambda th, d: vals[int(d.input[0])], lambda th, d: [0.0])
    data = Dataset(np.arange(2.0))
    rng = np.random.default_rng(505)
    n = 100_000
    with Budget(10):
        counts = {(0, 1): 0, (1, 0): 0, (1, 1): 0}
        proposals = 0
        for _ in range(n):
            w, draws = gibbs.sample_w(model, [0.0], data, 0.0, rng, return_draws=True)
            counts[tuple(w.tolist())] += 1
            proposals += draws
    for c in counts.values():
        assert abs(c / n - 1 / 3) <= 0.01
    psi = (1 + math.exp(0.0)) ** 2 - 1
    rate = psi / (psi + 1)
    sigma = math.sqrt(rate * (1 - rate) / proposals)
    assert abs(n / proposals - rate) <= 3 * sigma
    print(f"frequencies {counts}; acceptance {n / proposals:.4f} vs {rate:.4f}")


def test_criterion_06_linreg_beats_least_squares():
    model = LinearRegressionModel()
    wins, mses = 0, []
    with Budget(120):
        for seed in SEEDS:
            data = synth.generate(synth.preset("linreg", seed))
            eb = fit(model, data, EbrConfig(5.0, init=E.INIT_BOXES["linreg"], rng_seed=seed)).theta_star
            mse = E.metric("linreg", eb)
            mses.append(mse)
            wins += mse < E.metric("linreg", lms_fit(data))
    print(f"wins {wins}/10, median MSE {np.median(mses):.3e}")
    assert wins >= 9
    assert np.median(mses) < 0.05


def test_criterion_07_gaussian_kld_and_locality():
    model = GaussianModel()
    wins = monotone = 0
    with Budget(180):
        for seed in SEEDS:
            data = synth.generate(synth.preset("gaussian", seed))

            def run(beta):
                return fit(model, data, EbrConfig(beta, init=E.INIT_BOXES["gaussian"], rng_seed=seed)).theta_star

            wins += kld_gaussian(run(5.0), (-1.0, 0.2)) < kld_gaussian(gaussian_mle(data), (-1.0, 0.2))
            sigmas = [run(b)[1] for b in (-2.0, -1.0, 0.0, 1.0)]
            monotone += all(a <= b for a, b in zip(sigmas, sigmas[1:]))
    print(f"KLD wins {wins}/10, sigma monotone {monotone}/10")
    assert wins >= 9
    assert monotone >= 8


def test_criterion_08_exponential_rates_and_jump(tmp_path):
    grid = [round(4.0 + 0.05 * i, 10) for i in range(81)]
    with Budget(600):
        for seed in SEEDS:
            data = synth.generate(synth.preset("exponential", seed))
            assert 0.58 <= exponential_mle(data) <= 0.73
            lam = fit(ExponentialModel(), data,
                      EbrConfig(4.0, init=E.INIT_BOXES["exponential"], rng_seed=seed)).theta_star[0]
            assert 1.6 <= lam <= 2.4
        cfg = E.ExperimentConfig(preset="exponential", betas=grid, methods=["ebr"], seeds=list(SEEDS),
                                 out_dir=str(tmp_path))
        path = E.run_beta_sweep(cfg).paths[0]
        jumps = E.detect_jump_csv(path)
    for seed, jump in jumps.items():
        print(f"seed {seed}: {jump}")
        assert jump is not None
        assert 5.65 <= jump.beta_c <= 7.65
        assert jump.magnitude > 0.8


def test_criterion_09_population_landscape(tmp_path):
    r = 200 / 240
    lam_ml = 1 / (r * 0.5 + (1 - r) * 6.5)
    with Budget(120):
        cfg = E.ExperimentConfig(preset="exponential", betas=[5.0, 6.5, 8.0], out_dir=str(tmp_path))
        out = E.run_landscape(cfg)
        assert out.failures == 0
        minima = E.landscape_minima(out.rows)
        worst = 0.0
        for beta, lam, val, *_ in out.rows[::20]:
            diff = abs(val - trapezoid_population_loss(lam, beta, r))
            worst = max(worst, diff)
            assert diff <= 1e-8
    glob = {b: min(m, key=lambda t: t[1])[0] for b, m in minima.items()}
    print(f"minima {minima}; max quadrature gap {worst:.2e}")
    assert len(minima[5.0]) == 1 and abs(glob[5.0] - 2.0) < 0.2
    assert abs(glob[8.0] - lam_ml) < 0.05
    assert len(minima[6.5]) == 2


def test_criterion_10_alternation_monotone_and_converges():
    model = LinearRegressionModel()
    converged = 0
    with Budget(60):
        for run in range(100):
            data = synth.generate(synth.preset("linreg", run % 10))
            rng = np.random.default_rng([1010, run])
            w0 = np.zeros(len(data), np.int8)
            w0[rng.choice(len(data), 2, replace=False)] = 1
            trace = gibbs.alternate_maximize(model, data, 5.0, w0, max_rounds=20)
            dens = [gibbs.joint_log_density_unnorm(model, r.theta, r.w, data, 5.0) for r in trace.rounds]
            half = trace.log_densities()
            assert all(b >= a for a, b in zip(dens, dens[1:]))
            assert all(b >= a for a, b in zip(half, half[1:]))
            converged += trace.converged
    print(f"converged {converged}/100")
    assert converged >= 90


def test_criterion_11_large_beta_recovers_least_squares():
    model = LinearRegressionModel()
    data, labels = synth.generate_labeled(synth.preset("linreg", 0))
    clean = data.subset(np.flatnonzero(labels == 1))
    beta = 50.0
    rng = np.random.default_rng(1111)
    with Budget(30):
        theta = fit(model, clean, EbrConfig(beta, init=E.INIT_BOXES["linreg"])).theta_star
        gap = float(np.max(np.abs(theta - np.asarray(lms_fit(clean)))))
        assert gap <= 1e-4
        for _ in range(100):
            th = rng.uniform([-5, -10], [5, 10])
            losses = model.losses(th, clean)
            lhs = abs(ebr_loss(model, th, clean, beta) + beta - mean_loss(model, th, clean))
            with np.errstate(over="ignore"):
                bound = float(np.mean(np.exp(losses - beta)))
            # rounding of L_ER near -beta in float64
            slack = 16 * np.finfo(float).eps * (beta + losses.max())
            assert lhs <= bound + slack
    print(f"max |theta - LMS| = {gap:.2e}")
