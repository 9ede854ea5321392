"""Kernel evaluation, Gram PSD-ness, and the feature-map oracle."""

import itertools
import math

import numpy as np
import pytest

from ivbandit import (
    InputError,
    KernelSpec,
    UnsupportedKernelError,
    eval_kernel,
    feature_map,
    featurize,
    gram,
    monomial_exponents,
    space_dim,
)

POLY31 = KernelSpec.polynomial(3, 1.0)

ALL_SPECS = [
    KernelSpec.linear(),
    KernelSpec.polynomial(1, 1.0),
    KernelSpec.polynomial(2, 1.0),
    POLY31,
    KernelSpec.polynomial(3, 0.0),
    KernelSpec.rbf(0.7),
]

FINITE_SPECS = [s for s in ALL_SPECS if s.finite_rank]


def count_monomials_bruteforce(dim, max_degree):
    """Independent oracle: count exponent tuples with total degree <= p."""
    total = 0
    for exps in itertools.product(range(max_degree + 1), repeat=dim):
        if sum(exps) <= max_degree:
            total += 1
    return total


class TestKernelSpec:
    def test_validation(self):
        with pytest.raises(InputError):
            KernelSpec.polynomial(0, 1.0)
        with pytest.raises(InputError):
            KernelSpec.polynomial(2, -0.5)
        with pytest.raises(InputError):
            KernelSpec.rbf(0.0)
        with pytest.raises(InputError):
            KernelSpec("sobolev")

    def test_dict_round_trip(self):
        for spec in ALL_SPECS:
            assert KernelSpec.from_dict(spec.to_dict()) == spec


class TestEvalKernel:
    def test_poly31_offset_pair(self):
        # (1*1 + 1)^3
        assert eval_kernel(POLY31, [1, 0, 0, 0], [1, 0, 0, 0]) == 8.0

    def test_linear_zero_vector(self):
        assert eval_kernel(KernelSpec.linear(), [2, 3], [0, 0]) == 0.0

    def test_symmetry(self):
        rng = np.random.default_rng(11)
        for spec in ALL_SPECS:
            for _ in range(50):
                w, wp = rng.normal(size=(2, 3))
                assert eval_kernel(spec, w, wp) == eval_kernel(spec, wp, w)

    def test_dimension_mismatch(self):
        with pytest.raises(InputError):
            eval_kernel(POLY31, [1, 2], [1, 2, 3])


class TestGram:
    def test_single_point(self):
        x = np.array([0.3, -1.2])
        g = gram(POLY31, x[None, :], x[None, :])
        assert g.shape == (1, 1)
        np.testing.assert_allclose(g[0, 0], eval_kernel(POLY31, x, x))

    def test_exact_symmetry(self):
        rng = np.random.default_rng(5)
        pts = rng.normal(size=(12, 3))
        for spec in ALL_SPECS:
            g = gram(spec, pts, pts)
            assert np.array_equal(g, g.T)

    @pytest.mark.parametrize("spec", ALL_SPECS, ids=str)
    def test_psd_up_to_tolerance(self, spec):
        rng = np.random.default_rng(17)
        for n in (10, 50):
            pts = rng.uniform(-2, 2, size=(n, 4))
            g = gram(spec, pts, pts)
            eigs = np.linalg.eigvalsh(g)
            assert eigs.min() >= -1e-9 * np.trace(g)

    def test_matches_eval_kernel(self):
        rng = np.random.default_rng(23)
        rows = rng.normal(size=(4, 3))
        cols = rng.normal(size=(5, 3))
        for spec in ALL_SPECS:
            g = gram(spec, rows, cols)
            for i in range(4):
                for j in range(5):
                    np.testing.assert_allclose(
                        g[i, j], eval_kernel(spec, rows[i], cols[j]), rtol=1e-12
                    )

    def test_empty_input(self):
        with pytest.raises(InputError):
            gram(POLY31, np.empty((0, 2)), np.empty((0, 2)))

    def test_dimension_mismatch(self):
        with pytest.raises(InputError):
            gram(POLY31, np.ones((2, 2)), np.ones((2, 3)))


class TestFeatureMap:
    def test_linear_is_identity(self):
        fm = feature_map(KernelSpec.linear(), 2)
        np.testing.assert_array_equal(featurize(fm, [3.0, -4.0]), [3.0, -4.0])

    def test_poly11_scalar(self):
        # (t*u + 1)^1 = 1*1 + t*u
        fm = feature_map(KernelSpec.polynomial(1, 1.0), 1)
        np.testing.assert_allclose(featurize(fm, [2.5]), [1.0, 2.5])

    def test_output_dim_poly31_dim4(self):
        assert feature_map(POLY31, 4).output_dim == 35

    def test_graded_lex_order(self):
        assert monomial_exponents(2, 2) == [
            (0, 0),
            (1, 0),
            (0, 1),
            (2, 0),
            (1, 1),
            (0, 2),
        ]

    def test_monomial_count_matches_binomial(self):
        for d in range(1, 7):
            for p in range(1, 5):
                expected = math.comb(d + p, p)
                assert len(monomial_exponents(d, p)) == expected
                assert count_monomials_bruteforce(d, p) == expected

    def test_rbf_has_no_feature_map(self):
        with pytest.raises(UnsupportedKernelError):
            feature_map(KernelSpec.rbf(1.0), 3)

    def test_dimension_mismatch(self):
        fm = feature_map(POLY31, 3)
        with pytest.raises(InputError):
            featurize(fm, [1.0, 2.0])

    def test_kernel_trick_example(self):
        fm = feature_map(POLY31, 2)
        w, wp = np.array([0.5, 0.5]), np.array([1.0, 1.0])
        k_val = eval_kernel(POLY31, w, wp)
        assert k_val == (0.5 + 0.5 + 1.0) ** 3
        np.testing.assert_allclose(featurize(fm, w) @ featurize(fm, wp), k_val)

    @pytest.mark.parametrize("spec", FINITE_SPECS, ids=str)
    def test_kernel_trick_random_pairs(self, spec):
        rng = np.random.default_rng(31)
        for dim in (1, 2, 4):  # 1000+ pairs per spec across the dims
            fm = feature_map(spec, dim)
            ws = rng.uniform(-2, 2, size=(340, dim))
            wps = rng.uniform(-2, 2, size=(340, dim))
            for w, wp in zip(ws, wps):
                k_val = eval_kernel(spec, w, wp)
                dot = featurize(fm, w) @ featurize(fm, wp)
                assert abs(dot - k_val) <= 1e-10 * (1.0 + abs(k_val))


class TestSpaceDim:
    def test_linear(self):
        assert space_dim(KernelSpec.linear(), 2) == 2

    def test_polynomial_with_offset(self):
        assert space_dim(POLY31, 4) == 35
        assert space_dim(POLY31, 3) == 20

    def test_homogeneous_polynomial(self):
        # offset 0 keeps only the degree-exactly-p monomials
        assert space_dim(KernelSpec.polynomial(3, 0.0), 4) == math.comb(6, 3)

    def test_rbf_is_infinite(self):
        with pytest.raises(UnsupportedKernelError):
            space_dim(KernelSpec.rbf(1.0), 2)
