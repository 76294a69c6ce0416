"""Acceptance suite: one test per criterion, each reporting a PASS/FAIL line.

Run alone with ``pytest tests/test_acceptance.py -v``; the lines are repeated
in the terminal summary under "acceptance criteria".
"""

import itertools

import numpy as np
import pytest

from conftest import record_criterion
from curveclust import (
    Dataset,
    DesignSpec,
    RegressionMixture,
    RobustConfig,
    bspline_design,
    build_designs,
    e_step,
    equispaced_knots,
    fit_robust,
    gen_three_class,
    gen_waveform,
    loglik,
    m_step_proportions,
    map_partition,
    misclassification_error,
    prune,
    rand_index,
    robust_pi_update,
    spline_design,
)
from curveclust.em import FitError, _m_step_regression, init_from_partition, run_em
from curveclust.metrics import evaluate, match_labels
from curveclust.mixture import log_density_matrix, variance_floor
from curveclust.robust import RobustState, init_robust, robust_step
from curveclust.simulators import truth
from test_em import _loop_oracle
from test_metrics import brute_misclassification, brute_rand, set_partitions

SEEDS = range(1, 21)


def model_specs(x_min, x_max, knots):
    return {
        "PRM p=4": DesignSpec.polynomial(4),
        f"SRM cubic {knots} knots": DesignSpec.equispaced("spline", 4, knots, x_min, x_max),
        f"bSRM cubic {knots} knots": DesignSpec.equispaced("bspline", 4, knots, x_min, x_max),
    }


def score(ds, spec, scenario):
    model, tau, trace = fit_robust(ds, spec, RobustConfig())
    z = map_partition(tau)
    tr = truth(scenario, ds.curves[0].x)
    X = build_designs(Dataset(ds.curves[:1]), spec).X[0]
    rep = evaluate(z, ds.labels, model.mean_curves(X), tr["means"])
    mapping = match_labels(z, ds.labels)
    sigma = np.full(3, np.nan)
    pi = np.full(3, np.nan)
    for h, c in mapping.items():
        sigma[c - 1] = np.sqrt(model.sigma2[h - 1])
        pi[c - 1] = model.pi[h - 1]
    return {"K": model.K, "misc": rep.misclassification_rate, "approx": rep.approx_error,
            "sigma": sigma, "pi": pi, "trace": trace}


@pytest.fixture(scope="module")
def three_class_runs():
    runs = {}
    for seed in SEEDS:
        ds = gen_three_class(100, seed, fixed_counts=True)
        for name, spec in model_specs(0.0, 1.0, 4).items():
            runs.setdefault(name, []).append(score(ds, spec, "three_class"))
    return runs


def test_criterion_1_three_class_recovery(three_class_runs):
    ok_all = True
    details = []
    for name, runs in three_class_runs.items():
        k3 = [r for r in runs if r["K"] == 3]
        zero = sum(r["misc"] == 0.0 for r in k3)
        sig_dev = max(np.nanmax(np.abs(r["sigma"] - 0.1)) for r in k3) if k3 else np.inf
        pi_dev = max(np.nanmax(np.abs(r["pi"] - [0.4, 0.3, 0.3])) for r in k3) if k3 else np.inf
        approx = max(r["approx"] for r in k3) if k3 else np.inf
        ok = len(k3) >= 18 and zero >= 18 and sig_dev <= 0.01 and pi_dev <= 0.02 and approx < 1e-3
        ok_all &= ok
        details.append(f"{name}: K=3 {len(k3)}/20, 0% error {zero}/20, max|sigma-0.1|={sig_dev:.4f}, "
                       f"max|pi-pi0|={pi_dev:.4f}, max approx={approx:.2e}")
    record_criterion(1, ok_all, "; ".join(details))
    assert ok_all


@pytest.mark.slow
def test_criterion_2_waveform_benchmark():
    limits = {"PRM p=4": 0.065, "SRM cubic 3 knots": 0.05, "bSRM cubic 3 knots": 0.045}
    runs = {name: [] for name in limits}
    for seed in SEEDS:
        ds = gen_waveform(500, seed)
        for name, spec in model_specs(1.0, 21.0, 3).items():
            runs[name].append(score(ds, spec, "waveform"))
    ok_all = True
    details = []
    for name, rs in runs.items():
        k3 = sum(r["K"] == 3 for r in rs)
        misc = float(np.mean([r["misc"] for r in rs]))
        ok = k3 >= 18 and misc <= limits[name]
        ok_all &= ok
        details.append(f"{name}: K=3 {k3}/20, mean misclassification {100 * misc:.2f}% (limit {100 * limits[name]:.1f}%)")
    record_criterion(2, ok_all, "; ".join(details))
    assert ok_all


def test_criterion_3_trace_shape(three_class_runs):
    bad = []
    worst_k2 = 0
    worst_iter = 0
    for name, runs in three_class_runs.items():
        for i, r in enumerate(runs):
            K = r["trace"].K
            worst_k2 = max(worst_k2, K[min(2, len(K) - 1)])
            worst_iter = max(worst_iter, r["trace"].n_iter)
            ok = (K[0] == 100 and K[min(2, len(K) - 1)] < 50 and all(b <= a for a, b in zip(K, K[1:]))
                  and r["trace"].converged and r["trace"].n_iter <= 60)
            if not ok:
                bad.append(f"{name} seed {SEEDS[i]}")
    passed = not bad
    record_criterion(3, passed, f"60 runs, largest K after 2 iterations {worst_k2}, "
                                f"most iterations {worst_iter}, failing runs {bad or 'none'}")
    assert passed


def test_criterion_4_reduction_oracle():
    rng = np.random.default_rng(404)
    worst = 0.0
    for _ in range(50):
        n, m, K = int(rng.integers(3, 11)), int(rng.integers(2, 9)), int(rng.integers(1, 4))
        p = int(rng.integers(0, min(m, 3)))
        x = np.sort(rng.uniform(0, 1, m))
        designs = build_designs(Dataset.from_arrays(x, rng.normal(size=(n, m))), DesignSpec.polynomial(p))
        model = RegressionMixture(rng.dirichlet(np.ones(K)), rng.normal(size=(K, p + 1)), rng.uniform(0.2, 2, K))
        floor = variance_floor(designs)
        state = RobustState(model, 0.0, np.arange(K), log_density_matrix(model, designs))
        new, *_ = robust_step(state, designs, floor, m, do_prune=False, fixed_lambda=0.0)
        tau = e_step(model, designs)
        beta, sigma2, *_ = _m_step_regression(tau, designs, floor)
        pi = m_step_proportions(tau)
        worst = max(worst, np.max(np.abs(new.model.pi - pi)), np.max(np.abs(new.model.beta - beta)),
                    np.max(np.abs(new.model.sigma2 - sigma2)))
    passed = worst <= 1e-10
    record_criterion(4, passed, f"50 instances, largest parameter difference {worst:.2e}")
    assert passed


def _property_checks():
    rng = np.random.default_rng(505)
    results = {}

    # partition of unity and nonnegativity
    worst = 0.0
    neg = False
    x = np.concatenate([[0.0, 1.0], rng.uniform(0, 1, 10_000 - 2)])
    for M in range(1, 5):
        for L in range(11):
            spec = DesignSpec("bspline", M - 1, tuple(equispaced_knots(0, 1, L)), (0.0, 1.0))
            B = bspline_design(x, spec)
            worst = max(worst, float(np.max(np.abs(B.sum(axis=1) - 1))))
            neg |= bool(np.any(B < 0))
    results["partition of unity"] = (worst <= 1e-12 and not neg, f"{worst:.1e}")

    # span equivalence
    worst = 0.0
    for M, L in itertools.product(range(1, 5), (0, 2, 5, 8)):
        xs = np.sort(rng.uniform(0, 1, 150))
        xs[[0, -1]] = 0.0, 1.0
        knots = tuple(np.sort(rng.uniform(0.05, 0.95, L)))
        S = spline_design(xs, DesignSpec("spline", M - 1, knots, (0.0, 1.0)))
        B = bspline_design(xs, DesignSpec("bspline", M - 1, knots, (0.0, 1.0)))
        y = np.cos(5 * xs) + rng.normal(scale=0.3, size=xs.size)
        w = np.sqrt(rng.uniform(0.05, 4, xs.size))
        fit = lambda A: A @ np.linalg.lstsq(A * w[:, None], y * w, rcond=None)[0]
        worst = max(worst, float(np.max(np.abs(fit(S) - fit(B)))))
    results["span equivalence"] = (worst <= 1e-8, f"{worst:.1e}")

    # sum-to-one of the penalized proportion update
    worst = 0.0
    for _ in range(1000):
        K = int(rng.integers(1, 15))
        out = robust_pi_update(rng.dirichlet(np.ones(K), size=int(rng.integers(1, 50))),
                               rng.dirichlet(np.ones(K)), float(rng.uniform()), clamp=False)
        worst = max(worst, abs(out.sum() - 1))
    results["pi update sums to one"] = (worst <= 1e-12, f"{worst:.1e}")

    # EM monotonicity and simplex invariants
    worst_drop = 0.0
    simplex_ok = True
    for s in range(100):
        r = np.random.default_rng(s)
        designs = build_designs(gen_three_class(int(r.integers(15, 50)), s), DesignSpec.polynomial(int(r.integers(1, 5))))
        K = int(r.integers(1, 5))
        z = r.integers(0, K, designs.n)
        z[:K] = np.arange(K)
        floor = variance_floor(designs)
        model = init_from_partition(z, K, designs, floor)
        prev = -np.inf
        for _ in range(100):
            tau = e_step(model, designs)
            ll = loglik(model, designs)
            simplex_ok &= bool(np.allclose(tau.sum(axis=1), 1, atol=1e-10) and abs(model.pi.sum() - 1) < 1e-10)
            if np.isfinite(prev):
                worst_drop = max(worst_drop, prev - ll)
            prev = ll
            if np.any(tau.sum(axis=0) < 1e-10):
                break
            beta, sigma2, *_ = _m_step_regression(tau, designs, floor)
            model = RegressionMixture(m_step_proportions(tau), beta, sigma2)
    results["EM monotonicity"] = (worst_drop <= 1e-9, f"largest drop {worst_drop:.1e}")

    # simplex invariants through robust iterations and prunes
    for s in range(5):
        designs = build_designs(gen_three_class(60, 100 + s), DesignSpec.polynomial(3))
        floor = variance_floor(designs)
        model, _ = init_robust(designs, floor)
        state = RobustState(model, 1.0, np.arange(designs.n), log_density_matrix(model, designs))
        for _ in range(30):
            state, tau, *_ = robust_step(state, designs, floor, 50, scale_by_max_pi=True)
            simplex_ok &= bool(np.allclose(tau.sum(axis=1), 1, atol=1e-12) and np.all(tau >= 0)
                               and abs(state.model.pi.sum() - 1) < 1e-12 and np.all(state.model.pi >= 0))
    results["simplex invariants"] = (simplex_ok, "")

    # matching metrics against brute force over all partitions of n <= 7
    ok = True
    for n in range(2, 8):
        parts = list(set_partitions(n))
        panel = parts if n <= 5 else [parts[i] for i in rng.choice(len(parts), 6, replace=False)] + [parts[-1]]
        for zt in panel:
            for zh in parts:
                ok &= abs(misclassification_error(zh, zt) - brute_misclassification(zh, zt)) < 1e-12
                ok &= abs(rand_index(zh, zt) - brute_rand(zh, zt)) < 1e-12
    for _ in range(200):
        a, b = rng.integers(1, 6, 25), rng.integers(1, 6, 25)
        perm = rng.permutation(5) + 1
        ok &= abs(misclassification_error(perm[a - 1], b) - misclassification_error(a, b)) < 1e-12
        ok &= abs(rand_index(perm[a - 1], b) - rand_index(b, a)) < 1e-12
    results["matching metrics"] = (ok, "")

    # weighted normal equations
    worst = 0.0
    for _ in range(100):
        x = np.sort(rng.uniform(0, 1, 4))
        Y = rng.normal(size=(3, 4))
        tau = rng.dirichlet(np.ones(2), size=3)
        designs = build_designs(Dataset.from_arrays(x, Y), DesignSpec.polynomial(1))
        beta, sigma2, *_ = _m_step_regression(tau, designs, 1e-300)
        ob, os2 = _loop_oracle(tau, x, Y, 1)
        worst = max(worst, float(np.max(np.abs(beta - ob))), float(np.max(np.abs(sigma2 - os2))))
    results["normal equations"] = (worst <= 1e-8, f"{worst:.1e}")
    return results


def test_criterion_5_property_suites():
    results = _property_checks()
    passed = all(ok for ok, _ in results.values())
    detail = ", ".join(f"{k} {'ok' if ok else 'FAILED'}{' (' + v + ')' if v else ''}" for k, (ok, v) in results.items())
    record_criterion(5, passed, detail)
    assert passed


def test_criterion_6_penalized_objective(three_class_runs):
    bad = []
    for name, runs in three_class_runs.items():
        for i, r in enumerate(runs):
            pen = r["trace"].column("penalized_loglik")
            if not pen[-1] > pen[1]:
                bad.append(f"{name} seed {SEEDS[i]}")
    passed = not bad
    record_criterion(6, passed, f"final penalized log-likelihood above iteration-1 value in "
                                f"{60 - len(bad)}/60 runs")
    assert passed
