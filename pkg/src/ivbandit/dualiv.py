"""Dual instrumental-variable regression in RKHSs.

Denote by k the kernel over regressors x and by l the kernel over the
concatenated (y, z) pairs.  The regularized saddle objective over the two
induced spaces H and U is

    psi(f, u) = (1/n) sum_i (f(x_i) - y_i) u(y_i, z_i) + (lambda2/2) ||f||_H^2
                - (1/2n) sum_i u(y_i, z_i)^2 - (lambda1/2) ||u||_U^2,

minimized over f and maximized over u.  With Gram matrices K and L the
saddle point has the closed form

    M = K (L + n*lambda1*I)^{-1} L,      theta = (M K + n*lambda2*K)^{-1} M y,

and the fitted function is f(x) = sum_i theta_i k(x_i, x).  The first solve
is symmetric positive definite and done by Cholesky; the second can be
singular when K is rank deficient, so it is solved as a truncated-spectral
least-squares problem returning the minimum-norm theta (predictions depend
on theta only through K theta, so this choice is prediction-equivalent).

:func:`closed_form_feature_space` re-derives the same estimator through
explicit empirical covariance operators in monomial feature coordinates and
serves as the independent oracle for :func:`fit`.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.linalg import LinAlgError, cho_factor, cho_solve

from .errors import InputError, NumericalError, UnsupportedKernelError
from .kernels import FeatureMap, KernelSpec, featurize_many, gram

# relative cutoff for discarding singular values in the theta solve
_SVD_RCOND = 1e-10
# fitted models must reproduce their linear systems to this relative residual
_RESIDUAL_TOL = 1e-8


@dataclass
class TripleDataset:
    """Sampled (x, y, z) rows: regressors, rewards, instruments."""

    xs: np.ndarray  # (n, d_x)
    ys: np.ndarray  # (n,)
    zs: np.ndarray  # (n, d_z)

    def __post_init__(self):
        self.xs = np.atleast_2d(np.asarray(self.xs, dtype=np.float64))
        self.ys = np.asarray(self.ys, dtype=np.float64).ravel()
        self.zs = np.atleast_2d(np.asarray(self.zs, dtype=np.float64))
        n = self.xs.shape[0]
        if n < 1:
            raise InputError("dataset needs at least one row")
        if self.ys.shape[0] != n or self.zs.shape[0] != n:
            raise InputError("xs, ys, zs must have equal row counts")
        for name, arr in (("xs", self.xs), ("ys", self.ys), ("zs", self.zs)):
            if not np.all(np.isfinite(arr)):
                raise InputError(f"non-finite entries in {name}")

    @property
    def n(self) -> int:
        return self.xs.shape[0]

    def yz_pairs(self) -> np.ndarray:
        """Rows (y_i, z_i1, ..., z_id) feeding the l-kernel, unrescaled."""
        return np.hstack([self.ys[:, None], self.zs])


@dataclass(frozen=True)
class SolveDiagnostics:
    """Relative residuals of the two linear solves inside a fit."""

    first_stage: float  # ||(L + n*lambda1*I) W - L|| / ||L||
    theta: float  # ||(M K + n*lambda2*K) theta - M y|| / ||M y||


@dataclass(eq=False)
class DualIVModel:
    """Fitted dual coefficients plus everything needed to predict."""

    thetas: np.ndarray
    train_xs: np.ndarray
    k_spec: KernelSpec
    lambda1: float
    lambda2: float
    diagnostics: SolveDiagnostics


def _spd_solve(matrix: np.ndarray, rhs: np.ndarray, what: str) -> np.ndarray:
    try:
        return cho_solve(cho_factor(matrix, lower=True), rhs)
    except LinAlgError as exc:
        raise NumericalError(
            f"Cholesky factorization failed for {what}",
            cond_estimate=float(np.linalg.cond(matrix)),
        ) from exc


def _relative_residual(matrix, solution, rhs) -> float:
    num = np.linalg.norm(matrix @ solution - rhs)
    den = np.linalg.norm(rhs)
    return float(num / den) if den > 0 else float(num)


def fit(
    data: TripleDataset,
    k: KernelSpec,
    l: KernelSpec,
    lambda1: float,
    lambda2: float,
) -> DualIVModel:
    """Solve the dual IV regression on one dataset (Gram-matrix path)."""
    if lambda1 <= 0 or lambda2 <= 0:
        raise InputError("lambda1 and lambda2 must be positive")
    n = data.n
    kmat = gram(k, data.xs, data.xs)
    yz = data.yz_pairs()
    lmat = gram(l, yz, yz)

    first = lmat + n * lambda1 * np.eye(n)
    smat = _spd_solve(first, lmat, "L + n*lambda1*I")
    resid1 = _relative_residual(first, smat, lmat)

    m = kmat @ smat
    a = m @ kmat + n * lambda2 * kmat
    rhs = m @ data.ys
    theta, *_ = np.linalg.lstsq(a, rhs, rcond=_SVD_RCOND)
    resid2 = _relative_residual(a, theta, rhs)
    if resid2 > _RESIDUAL_TOL:
        # push-through fallback: (S K + n*lambda2*I) theta = S y is the same
        # system with K cancelled, and is always nonsingular
        s_sym = (smat + smat.T) / 2.0
        alt = np.linalg.solve(s_sym @ kmat + n * lambda2 * np.eye(n), s_sym @ data.ys)
        alt_resid = _relative_residual(a, alt, rhs)
        if alt_resid < resid2:
            theta, resid2 = alt, alt_resid
        if resid2 > _RESIDUAL_TOL:
            raise NumericalError(
                f"theta solve residual {resid2:.3e} exceeds {_RESIDUAL_TOL:.0e}",
                cond_estimate=float(np.linalg.cond(a)),
            )

    return DualIVModel(
        thetas=theta,
        train_xs=data.xs.copy(),
        k_spec=k,
        lambda1=float(lambda1),
        lambda2=float(lambda2),
        diagnostics=SolveDiagnostics(first_stage=resid1, theta=resid2),
    )


def naive_krr_fit(data: TripleDataset, k: KernelSpec, lam: float) -> DualIVModel:
    """Kernel ridge regression of y on x, ignoring the instrument.

    The baseline that stays biased under confounding: theta solves
    (K + n*lam*I) theta = y.  Both regularizer slots of the returned model
    record ``lam``.
    """
    if lam <= 0:
        raise InputError("lam must be positive")
    n = data.n
    kmat = gram(k, data.xs, data.xs)
    a = kmat + n * lam * np.eye(n)
    theta = _spd_solve(a, data.ys, "K + n*lam*I")
    resid = _relative_residual(a, theta, data.ys)
    return DualIVModel(
        thetas=theta,
        train_xs=data.xs.copy(),
        k_spec=k,
        lambda1=float(lam),
        lambda2=float(lam),
        diagnostics=SolveDiagnostics(first_stage=resid, theta=resid),
    )


def predict(model: DualIVModel, x) -> float:
    """Evaluate the fitted function at one point."""
    arr = np.asarray(x, dtype=np.float64).ravel()
    if arr.shape[0] != model.train_xs.shape[1]:
        raise InputError(
            f"expected dim {model.train_xs.shape[1]}, got {arr.shape[0]}"
        )
    return float(predict_many(model, arr[None, :])[0])


def predict_many(model: DualIVModel, xs) -> np.ndarray:
    """Evaluate the fitted function at each row of ``xs``."""
    g = gram(model.k_spec, model.train_xs, xs)
    return model.thetas @ g


def closed_form_feature_space(
    data: TripleDataset,
    phi: FeatureMap,
    varphi: FeatureMap,
    lambda1: float,
    lambda2: float,
) -> np.ndarray:
    """Explicit-covariance solution in feature coordinates (the fit oracle).

    Builds the empirical operators C_yz = Ups^T Ups / n,
    C_xyz = Phi^T Ups / n and r = Ups^T y / n from the monomial features and
    returns the primal weight vector

        w = (C_xyz (C_yz + lambda1*I)^{-1} C_xyz^T + lambda2*I)^{-1}
            C_xyz (C_yz + lambda1*I)^{-1} r,

    so the oracle prediction at x is <featurize(phi, x), w>.  Raises
    :class:`UnsupportedKernelError` via the feature maps if either kernel is
    infinite rank.
    """
    if lambda1 <= 0 or lambda2 <= 0:
        raise InputError("lambda1 and lambda2 must be positive")
    if not (phi.spec.finite_rank and varphi.spec.finite_rank):
        raise UnsupportedKernelError("closed form needs finite-rank kernels")
    n = data.n
    phi_mat = featurize_many(phi, data.xs)
    ups = featurize_many(varphi, data.yz_pairs())
    c_yz = ups.T @ ups / n
    c_xyz = phi_mat.T @ ups / n
    r = ups.T @ data.ys / n

    reg1 = c_yz + lambda1 * np.eye(c_yz.shape[0])
    inner = _spd_solve(reg1, np.hstack([c_xyz.T, r[:, None]]), "C_yz + lambda1*I")
    a = c_xyz @ inner[:, :-1] + lambda2 * np.eye(phi_mat.shape[1])
    b = c_xyz @ inner[:, -1]
    return _spd_solve((a + a.T) / 2.0, b, "closed-form primal system")


def oracle_predict_many(phi: FeatureMap, weights: np.ndarray, xs) -> np.ndarray:
    """Predictions of a closed-form weight vector at each row of ``xs``."""
    return featurize_many(phi, xs) @ weights


def dual_coefficients(data: TripleDataset, model: DualIVModel, l: KernelSpec) -> np.ndarray:
    """Recover the u-side coefficients of the fitted saddle point.

    beta = (L + n*lambda1*I)^{-1} (K theta - y), expressing the inner
    maximizer in the span of the l-kernel sections at the training pairs.
    """
    n = data.n
    kmat = gram(model.k_spec, data.xs, data.xs)
    yz = data.yz_pairs()
    lmat = gram(l, yz, yz)
    return _spd_solve(
        lmat + n * model.lambda1 * np.eye(n),
        kmat @ model.thetas - data.ys,
        "L + n*lambda1*I",
    )


@dataclass(frozen=True)
class ObjectiveReport:
    """Term-by-term evaluation of the empirical saddle objective."""

    psi_hat: float
    primal_risk: float  # (1/2n) sum_i (f(x_i) - y_i)^2
    dual_norm_sq: float  # ||u||_U^2
    primal_norm_sq: float  # ||f||_H^2


def objective_report(
    data: TripleDataset,
    f_coeffs,
    u_coeffs,
    k: KernelSpec,
    l: KernelSpec,
    lambda1: float,
    lambda2: float,
) -> ObjectiveReport:
    """Evaluate psi_hat for coefficient vectors in the two kernel spans."""
    theta = np.asarray(f_coeffs, dtype=np.float64).ravel()
    beta = np.asarray(u_coeffs, dtype=np.float64).ravel()
    n = data.n
    if theta.shape[0] != n or beta.shape[0] != n:
        raise InputError("coefficient vectors must have length n")
    kmat = gram(k, data.xs, data.xs)
    yz = data.yz_pairs()
    lmat = gram(l, yz, yz)
    with np.errstate(over="ignore", invalid="ignore"):
        f_vals = kmat @ theta
        u_vals = lmat @ beta
        primal_norm_sq = float(theta @ f_vals)
        dual_norm_sq = float(beta @ u_vals)
        psi = (
            float(np.mean((f_vals - data.ys) * u_vals))
            + lambda2 / 2.0 * primal_norm_sq
            - float(np.mean(u_vals**2)) / 2.0
            - lambda1 / 2.0 * dual_norm_sq
        )
        primal_risk = 0.5 * float(np.mean((f_vals - data.ys) ** 2))
    report = ObjectiveReport(
        psi_hat=psi,
        primal_risk=primal_risk,
        dual_norm_sq=dual_norm_sq,
        primal_norm_sq=primal_norm_sq,
    )
    for name, value in vars(report).items():
        if not np.isfinite(value):
            raise NumericalError(f"objective term {name} is not finite")
    return report
