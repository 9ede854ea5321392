"""Dual IV solver: oracle agreement, stationarity, saddle geometry."""

import numpy as np
import pytest

from ivbandit import (
    InputError,
    KernelSpec,
    TripleDataset,
    closed_form_feature_space,
    dual_coefficients,
    feature_map,
    fit,
    gram,
    naive_krr_fit,
    objective_report,
    oracle_predict_many,
    predict,
    predict_many,
)

LIN = KernelSpec.linear()
POLY21 = KernelSpec.polynomial(2, 1.0)


def make_triples(n, d_x, d_z, seed=0):
    """Generic well-scaled (x, y, z) rows; any joint law works for the
    algebraic fit-vs-closed-form identity."""
    rng = np.random.default_rng(seed)
    zs = rng.normal(size=(n, d_z))
    mix = rng.normal(size=(d_z, d_x))
    xs = zs @ mix + 0.3 * rng.normal(size=(n, d_x))
    ys = np.tanh(xs @ rng.normal(size=d_x)) + 0.1 * rng.normal(size=n)
    return TripleDataset(xs, ys, zs)


def rel_close(a, b, tol):
    return np.all(np.abs(a - b) <= tol * (1.0 + np.abs(b)))


class TestTripleDataset:
    def test_row_count_mismatch(self):
        with pytest.raises(InputError):
            TripleDataset(np.ones((3, 2)), np.ones(2), np.ones((3, 1)))

    def test_non_finite(self):
        ys = np.array([1.0, np.nan])
        with pytest.raises(InputError):
            TripleDataset(np.ones((2, 1)), ys, np.ones((2, 1)))

    def test_empty(self):
        with pytest.raises(InputError):
            TripleDataset(np.empty((0, 1)), np.empty(0), np.empty((0, 1)))


class TestFit:
    def test_single_point_zero_reward(self):
        data = TripleDataset([[1.0]], [0.0], [[1.0]])
        model = fit(data, LIN, LIN, 0.5, 0.5)
        np.testing.assert_allclose(model.thetas, [0.0])

    def test_agrees_with_feature_space_oracle(self):
        data = make_triples(20, 2, 2, seed=1)
        model = fit(data, LIN, LIN, 0.1, 0.1)
        w = closed_form_feature_space(
            data, feature_map(LIN, 2), feature_map(LIN, 3), 0.1, 0.1
        )
        rng = np.random.default_rng(2)
        xt = rng.normal(size=(100, 2))
        assert rel_close(
            predict_many(model, xt),
            oracle_predict_many(feature_map(LIN, 2), w, xt),
            1e-8,
        )

    def test_rank_deficient_gram(self):
        # linear kernel with n > d makes K singular; the minimum-norm
        # least-squares path must still match the oracle
        data = make_triples(15, 2, 2, seed=3)
        model = fit(data, LIN, LIN, 0.05, 0.05)
        w = closed_form_feature_space(
            data, feature_map(LIN, 2), feature_map(LIN, 3), 0.05, 0.05
        )
        xt = np.random.default_rng(4).normal(size=(50, 2))
        assert rel_close(
            predict_many(model, xt),
            oracle_predict_many(feature_map(LIN, 2), w, xt),
            1e-8,
        )

    def test_stationarity_residual(self):
        data = make_triples(30, 3, 2, seed=5)
        lam1, lam2 = 0.2, 0.3
        model = fit(data, POLY21, POLY21, lam1, lam2)
        # rebuild the linear system independently of the solver internals
        n = data.n
        kmat = gram(POLY21, data.xs, data.xs)
        yz = data.yz_pairs()
        lmat = gram(POLY21, yz, yz)
        m = kmat @ np.linalg.solve(lmat + n * lam1 * np.eye(n), lmat)
        lhs = (m @ kmat + n * lam2 * kmat) @ model.thetas
        rhs = m @ data.ys
        assert np.linalg.norm(lhs - rhs) <= 1e-8 * np.linalg.norm(rhs)
        assert model.diagnostics.theta <= 1e-8
        assert model.diagnostics.first_stage <= 1e-8

    def test_shrinkage_in_lambda2(self):
        data = make_triples(25, 2, 2, seed=6)
        kmat = gram(LIN, data.xs, data.xs)
        norms = []
        for lam2 in (0.01, 0.1, 1.0, 10.0, 100.0):
            model = fit(data, LIN, LIN, 0.1, lam2)
            norms.append(np.linalg.norm(kmat @ model.thetas))
        assert all(a >= b - 1e-12 for a, b in zip(norms, norms[1:]))

    def test_invalid_lambdas(self):
        data = make_triples(5, 1, 1)
        with pytest.raises(InputError):
            fit(data, LIN, LIN, 0.0, 0.1)
        with pytest.raises(InputError):
            fit(data, LIN, LIN, 0.1, -1.0)


class TestPredict:
    def test_zero_coefficients(self):
        data = make_triples(6, 2, 2, seed=7)
        model = fit(data, LIN, LIN, 0.5, 0.5)
        model.thetas = np.zeros_like(model.thetas)
        assert predict(model, [1.0, 2.0]) == 0.0

    def test_single_training_point(self):
        x0 = np.array([0.4, -1.0])
        data = TripleDataset(x0[None, :], [1.0], [[0.2]])
        model = fit(data, POLY21, LIN, 0.5, 0.5)
        model.thetas = np.array([1.0])
        from ivbandit import eval_kernel

        x = np.array([2.0, 0.5])
        np.testing.assert_allclose(predict(model, x), eval_kernel(POLY21, x0, x))

    def test_dimension_mismatch(self):
        data = make_triples(5, 2, 2)
        model = fit(data, LIN, LIN, 0.5, 0.5)
        with pytest.raises(InputError):
            predict(model, [1.0, 2.0, 3.0])


class TestClosedForm:
    def test_zero_rewards_give_zero_weights(self):
        data = make_triples(12, 2, 2, seed=8)
        data = TripleDataset(data.xs, np.zeros(12), data.zs)
        w = closed_form_feature_space(
            data, feature_map(POLY21, 2), feature_map(POLY21, 3), 0.1, 0.1
        )
        np.testing.assert_allclose(w, 0.0, atol=1e-14)

    def test_large_lambda2_shrinks_weights(self):
        data = make_triples(12, 2, 2, seed=9)
        norms = [
            np.linalg.norm(
                closed_form_feature_space(
                    data, feature_map(POLY21, 2), feature_map(POLY21, 3), 0.1, lam2
                )
            )
            for lam2 in (1e2, 1e4, 1e6)
        ]
        assert norms[0] > norms[1] > norms[2]


class TestNaiveKrr:
    def test_interpolates_constant_reward(self):
        rng = np.random.default_rng(10)
        xs = rng.normal(size=(10, 2))
        data = TripleDataset(xs, np.full(10, 3.5), rng.normal(size=(10, 2)))
        model = naive_krr_fit(data, POLY21, 1e-10)
        np.testing.assert_allclose(predict_many(model, xs), 3.5, atol=1e-5)

    def test_invalid_lambda(self):
        with pytest.raises(InputError):
            naive_krr_fit(make_triples(5, 1, 1), LIN, 0.0)

    def test_bias_floor_under_strong_confounding(self):
        # at rho=0.01 the context is nearly the confounder itself, so the
        # regression of y on x carries an irreducible bias.  The floor is
        # the population L2 projection error, computed here in explicit
        # feature coordinates on a large sample; finite-n ridge errors must
        # stay above it at every size
        from ivbandit import (
            ConfoundedEnv,
            KernelSpec,
            collect_dataset,
            featurize_many,
            sample_env,
        )

        poly31 = KernelSpec.polynomial(3, 1.0)
        phi = feature_map(poly31, 4)

        def setup(seed):
            ss = np.random.SeedSequence(seed)
            env_ss, round_ss, arm_ss, _ = ss.spawn(4)
            spec = sample_env(4, 0.01, env_ss)
            env = ConfoundedEnv(spec, np.random.default_rng(round_ss))
            return spec, env, np.random.default_rng(arm_ss)

        floors, medians = [], {n: [] for n in (250, 1000)}
        for s in range(8):
            spec, env, arm_rng = setup(70_000 + s)
            big = collect_dataset(env, 60_000, arm_rng)
            truth_big = (big.xs @ spec.alpha + 1.0) ** 3
            feats = featurize_many(phi, big.xs)
            coef, *_ = np.linalg.lstsq(feats, big.ys, rcond=None)
            floors.append(np.sqrt(np.mean((feats @ coef - truth_big) ** 2)))
            test = collect_dataset(env, 10_000, arm_rng)
            truth = (test.xs @ spec.alpha + 1.0) ** 3
            for n in (250, 1000):
                d = collect_dataset(env, n, arm_rng)
                model = naive_krr_fit(d, poly31, np.sqrt(35 / n))
                err = np.sqrt(np.mean((predict_many(model, test.xs) - truth) ** 2))
                medians[n].append(err)

        floor = float(np.median(floors))
        assert floor > 0.2  # the bias is a genuinely positive floor
        for n in (250, 1000):
            assert np.median(medians[n]) >= 0.9 * floor, (n, medians[n], floor)


class TestObjectiveReport:
    def test_all_zero(self):
        data = make_triples(8, 2, 2, seed=11)
        rep = objective_report(
            data, np.zeros(8), np.zeros(8), POLY21, POLY21, 0.1, 0.2
        )
        assert rep.psi_hat == 0.0
        assert rep.primal_norm_sq == 0.0

    def test_zero_dual_leaves_penalty(self):
        data = make_triples(8, 2, 2, seed=12)
        rng = np.random.default_rng(13)
        theta = rng.normal(size=8)
        lam2 = 0.7
        rep = objective_report(data, theta, np.zeros(8), POLY21, POLY21, 0.1, lam2)
        kmat = gram(POLY21, data.xs, data.xs)
        np.testing.assert_allclose(rep.psi_hat, lam2 / 2.0 * theta @ kmat @ theta)

    def test_length_mismatch(self):
        data = make_triples(8, 2, 2)
        with pytest.raises(InputError):
            objective_report(data, np.zeros(7), np.zeros(8), LIN, LIN, 0.1, 0.1)

    def test_overflowing_terms_raise(self):
        from ivbandit import NumericalError

        data = make_triples(4, 2, 2)
        with pytest.raises(NumericalError):
            objective_report(
                data, np.full(4, 1e300), np.full(4, 1e300), POLY21, POLY21, 0.1, 0.1
            )

    def test_saddle_point_geometry(self):
        # dims chosen so both Gram matrices are nonsingular at n=8, making
        # the saddle strict in every direction
        data = make_triples(8, 3, 3, seed=14)
        lam1, lam2 = 0.3, 0.4
        model = fit(data, POLY21, POLY21, lam1, lam2)
        beta = dual_coefficients(data, model, POLY21)

        def psi(th, be):
            return objective_report(
                data, th, be, POLY21, POLY21, lam1, lam2
            ).psi_hat

        base = psi(model.thetas, beta)
        rng = np.random.default_rng(15)
        eps = 1e-4
        for _ in range(20):
            v = rng.normal(size=8)
            v /= np.linalg.norm(v)
            # the fitted f is the minimizer, the recovered u the maximizer
            assert psi(model.thetas + eps * v, beta) > base
            assert psi(model.thetas - eps * v, beta) > base
            assert psi(model.thetas, beta + eps * v) < base
            assert psi(model.thetas, beta - eps * v) < base
