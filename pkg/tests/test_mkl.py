import numpy as np
import pytest

from mksvdd.data import gen_2d_target
from mksvdd.kernels import KernelDictionary, KernelSpec, combine
from mksvdd.mkl import (
    METHOD_FAMILIES,
    MklConfig,
    duality_gap,
    fit_method,
    fit_mkl,
    mkl_gradient,
    mkl_objective,
)
from mksvdd.models import fit_svdd
from mksvdd.qp import QpProblem, solve


def rbf_dict(X, sigmas):
    return KernelDictionary.from_data([KernelSpec.rbf(s) for s in sigmas], X)


def explicit_objective(dictionary, d, alpha):
    """Weighted double-sum form of the enclosing-ball objective."""
    total = 0.0
    for w, g in zip(d, dictionary.grams):
        K = g.values
        lin = sum(alpha[i] * K[i, i] for i in range(len(alpha)))
        quad = sum(
            alpha[i] * alpha[j] * K[i, j]
            for i in range(len(alpha))
            for j in range(len(alpha))
        )
        total += w * (lin - quad)
    return total


class TestObjective:
    def test_single_kernel_equals_dual_objective(self):
        X = gen_2d_target(1, 1, 12)
        d = rbf_dict(X, [1.0])
        J, sol = mkl_objective(d, [1.0], 0.3, "svdd")
        K = d.grams[0].values
        direct = solve(QpProblem(K, np.diag(K).copy(), 0.3))
        assert J == direct.objective

    def test_duplicated_kernel_same_objective(self):
        X = gen_2d_target(2, 1, 10)
        single = rbf_dict(X, [0.7])
        double = rbf_dict(X, [0.7, 0.7])
        J1, _ = mkl_objective(single, [1.0], 0.4, "svdd")
        J2, _ = mkl_objective(double, [0.5, 0.5], 0.4, "svdd")
        assert J2 == pytest.approx(J1, abs=1e-10)

    def test_matches_explicit_sums(self):
        X = gen_2d_target(3, 2, 14)
        d = rbf_dict(X, [0.5, 1.0, 5.0])
        w = np.array([0.2, 0.5, 0.3])
        J, sol = mkl_objective(d, w, 0.25, "svdd", kkt_tol=1e-10)
        assert J == pytest.approx(explicit_objective(d, w, sol.alpha), abs=1e-8)

    def test_ocsvm_objective_is_half_quadratic(self):
        X = gen_2d_target(4, 1, 10)
        d = rbf_dict(X, [0.5, 2.0])
        w = np.array([0.6, 0.4])
        J, sol = mkl_objective(d, w, 0.5, "ocsvm", kkt_tol=1e-10)
        K = combine(d, w).values
        assert J == pytest.approx(0.5 * sol.alpha @ K @ sol.alpha, abs=1e-10)

    def test_bad_kind(self):
        X = gen_2d_target(1, 1, 5)
        with pytest.raises(ValueError, match="kind"):
            mkl_objective(rbf_dict(X, [1.0]), [1.0], 0.5, "other")


class TestGradient:
    def test_single_kernel_gradient_equals_objective(self):
        # with one kernel, J(d) = d_1 * dJ/dd_1 and d_1 = 1
        X = gen_2d_target(5, 1, 12)
        d = rbf_dict(X, [1.0])
        for kind in ("svdd", "ocsvm"):
            J, sol = mkl_objective(d, [1.0], 0.3, kind, kkt_tol=1e-10)
            g = mkl_gradient(d, sol, kind)
            assert g.shape == (1,)
            assert g[0] == pytest.approx(J, abs=1e-10)

    def test_duplicated_kernel_equal_components(self):
        X = gen_2d_target(6, 1, 10)
        d = rbf_dict(X, [0.7, 0.7])
        for kind in ("svdd", "ocsvm"):
            _, sol = mkl_objective(d, [0.5, 0.5], 0.4, kind)
            g = mkl_gradient(d, sol, kind)
            assert g[0] == g[1]

    def test_euler_identity(self):
        X = gen_2d_target(7, 2, 16)
        d = rbf_dict(X, [0.5, 1.0, 5.0])
        w = np.array([0.3, 0.4, 0.3])
        for kind in ("svdd", "ocsvm"):
            J, sol = mkl_objective(d, w, 0.2, kind, kkt_tol=1e-10)
            g = mkl_gradient(d, sol, kind)
            assert float(w @ g) == pytest.approx(J, rel=1e-10)

    def test_finite_differences(self):
        rng = np.random.default_rng(8)
        X = gen_2d_target(8, 2, 18)
        d = rbf_dict(X, [0.5, 1.0, 5.0])
        w = np.array([0.35, 0.35, 0.30])
        for kind in ("svdd", "ocsvm"):
            _, sol = mkl_objective(d, w, 0.25, kind, kkt_tol=1e-12)
            g = mkl_gradient(d, sol, kind)
            for _ in range(5):
                u = rng.standard_normal(3)
                u -= u.mean()
                u /= np.linalg.norm(u)
                eps = 1e-5
                Jp, _ = mkl_objective(d, w + eps * u, 0.25, kind, kkt_tol=1e-12)
                Jm, _ = mkl_objective(d, w - eps * u, 0.25, kind, kkt_tol=1e-12)
                fd = (Jp - Jm) / (2 * eps)
                assert fd == pytest.approx(float(g @ u), rel=1e-4, abs=1e-9)

    def test_stale_alpha_dimension(self):
        X = gen_2d_target(9, 1, 10)
        d = rbf_dict(X, [1.0])
        _, sol = mkl_objective(d, [1.0], 0.3, "svdd")
        other = rbf_dict(gen_2d_target(9, 1, 12), [1.0])
        with pytest.raises(ValueError, match="alpha length"):
            mkl_gradient(other, sol, "svdd")


class TestDualityGap:
    def test_single_kernel_gap_zero_exactly(self):
        X = gen_2d_target(10, 1, 12)
        d = rbf_dict(X, [1.0])
        for kind in ("svdd", "ocsvm"):
            J, sol = mkl_objective(d, [1.0], 0.3, kind)
            assert duality_gap(d, [1.0], sol, kind, objective=J) == 0.0

    def test_duplicated_kernels_gap_zero(self):
        X = gen_2d_target(11, 1, 10)
        d = rbf_dict(X, [0.7, 0.7])
        for kind in ("svdd", "ocsvm"):
            J, sol = mkl_objective(d, [0.3, 0.7], 0.4, kind)
            assert duality_gap(d, [0.3, 0.7], sol, kind) == 0.0

    def test_nonnegative_at_init_small_at_convergence(self):
        X = gen_2d_target(12, 2, 20)
        d = rbf_dict(X, [0.5, 1.0, 5.0])
        uniform = np.full(3, 1 / 3)
        J0, sol0 = mkl_objective(d, uniform, 0.2, "svdd")
        assert duality_gap(d, uniform, sol0, "svdd") >= 0.0
        cfg = MklConfig(C=0.2, gap_tol=1e-4)
        model, trace = fit_mkl(d, cfg, "svdd")
        assert trace.converged
        _, sol = mkl_objective(d, model.weights, 0.2, "svdd")
        gap = duality_gap(d, model.weights, sol, "svdd")
        assert gap <= 1e-4 * max(abs(trace.steps[-1].objective), 1e-12)

    def test_stale_objective_detected(self):
        X = gen_2d_target(13, 1, 10)
        d = rbf_dict(X, [0.5, 5.0])
        J, sol = mkl_objective(d, [0.5, 0.5], 0.4, "svdd")
        with pytest.raises(ValueError, match="stale"):
            duality_gap(d, [0.5, 0.5], sol, "svdd", objective=J + 0.5)


class TestFitMkl:
    def test_single_kernel_immediate(self):
        X = gen_2d_target(14, 1, 15)
        d = rbf_dict(X, [1.0])
        cfg = MklConfig(C=0.2)
        model, trace = fit_mkl(d, cfg, "svdd")
        assert model.weights.tolist() == [1.0]
        assert len(trace.steps) == 1
        assert trace.converged
        direct = fit_svdd(d, [1.0], 0.2)
        assert model.threshold == direct.threshold
        assert (model.alpha.alpha == direct.alpha.alpha).all()

    def test_lambda_below_resolution_identical(self):
        X = gen_2d_target(15, 2, 20)
        d = rbf_dict(X, [0.5, 1.0, 5.0])
        runs = []
        for lam in (0.0, 1e-12):
            model, trace = fit_mkl(d, MklConfig(C=0.2, lam=lam), "svdd")
            runs.append((model, trace))
        t0, t1 = runs[0][1], runs[1][1]
        assert len(t0.steps) == len(t1.steps)
        for a, b in zip(t0.steps, t1.steps):
            assert (a.weights == b.weights).all()
            assert a.objective == b.objective
        assert (runs[0][0].weights == runs[1][0].weights).all()

    def test_slim_zero_equals_plain_bitwise(self):
        X = gen_2d_target(16, 2, 20)
        d = rbf_dict(X, [0.5, 1.0, 5.0])
        plain_model, plain_trace = fit_method("mk-svdd", d, 0.2, lam=0.7)
        slim_model, slim_trace = fit_method("slim-mk-svdd", d, 0.2, lam=0.0)
        assert len(plain_trace.steps) == len(slim_trace.steps)
        for a, b in zip(plain_trace.steps, slim_trace.steps):
            assert (a.weights == b.weights).all()
            assert a.objective == b.objective
        assert (plain_model.weights == slim_model.weights).all()

    def test_loose_kernel_wins_at_lambda_zero(self):
        X = gen_2d_target(17, 1, 30)
        d = rbf_dict(X, [0.1, 100.0])
        model, trace = fit_mkl(d, MklConfig(C=0.2), "svdd")
        assert model.weights[1] > 0.9

    def test_slim_shifts_weight_and_cardinality(self):
        for seed in (5, 21):
            X = gen_2d_target(seed, 2, 40)
            d = rbf_dict(X, [0.1, 100.0])
            loose, _ = fit_mkl(d, MklConfig(C=0.2, lam=0.0), "svdd")
            tight, _ = fit_mkl(d, MklConfig(C=0.2, lam=1.0), "svdd")
            assert tight.weights[0] > loose.weights[0]
            assert tight.card > loose.card

    def test_objective_non_increasing_lambda_zero(self):
        for kind in ("svdd", "ocsvm"):
            X = gen_2d_target(18, 2, 25)
            d = rbf_dict(X, [0.5, 1.0, 5.0, 10.0])
            _, trace = fit_mkl(d, MklConfig(C=0.15), kind)
            objs = [s.objective for s in trace.steps]
            assert all(b <= a + 1e-12 for a, b in zip(objs, objs[1:]))

    def test_simplex_preserved_on_every_iterate(self):
        X = gen_2d_target(19, 2, 25)
        d = rbf_dict(X, [0.1, 0.5, 1.0, 5.0, 100.0])
        _, trace = fit_mkl(d, MklConfig(C=0.1, lam=0.05), "svdd")
        for step in trace.steps:
            assert (step.weights >= 0.0).all()
            assert abs(step.weights.sum() - 1.0) <= 1e-10

    def test_kkt_at_convergence(self):
        X = gen_2d_target(20, 2, 25)
        d = rbf_dict(X, [0.5, 1.0, 5.0])
        cfg = MklConfig(C=0.2, gap_tol=1e-6)
        model, trace = fit_mkl(d, cfg, "svdd")
        assert trace.converged
        _, sol = mkl_objective(d, model.weights, 0.2, "svdd")
        g = mkl_gradient(d, sol, "svdd")
        active = model.weights > 0.05
        if active.sum() > 1:
            mu = g[active].mean()
            scale = max(abs(trace.steps[-1].objective), 1.0)
            assert np.abs(g[active] - mu).max() <= 1e-4 * scale

    def test_trace_csv(self, tmp_path):
        X = gen_2d_target(22, 1, 15)
        d = rbf_dict(X, [0.5, 5.0])
        _, trace = fit_mkl(d, MklConfig(C=0.3), "svdd")
        out = tmp_path / "trace.csv"
        trace.to_csv(out)
        lines = out.read_text().strip().splitlines()
        assert lines[0].startswith("iteration,objective,gap,card,step_size,d0,d1")
        assert len(lines) == len(trace.steps) + 1


class TestFitMethod:
    def test_table_covers_six_methods(self):
        assert sorted(METHOD_FAMILIES) == [
            "mk-ocsvm",
            "mk-svdd",
            "ocsvm",
            "slim-mk-ocsvm",
            "slim-mk-svdd",
            "svdd",
        ]

    def test_single_kernel_requires_one_entry(self):
        X = gen_2d_target(23, 1, 10)
        d = rbf_dict(X, [0.5, 5.0])
        with pytest.raises(ValueError, match="single-kernel"):
            fit_method("svdd", d, 0.3)

    def test_unknown_method(self):
        X = gen_2d_target(23, 1, 10)
        with pytest.raises(ValueError, match="unknown method"):
            fit_method("deep-svdd", rbf_dict(X, [1.0]), 0.3)

    def test_single_kernel_has_no_trace(self):
        X = gen_2d_target(24, 1, 10)
        model, trace = fit_method("ocsvm", rbf_dict(X, [1.0]), 0.5)
        assert trace is None
        assert model.kind == "ocsvm"
