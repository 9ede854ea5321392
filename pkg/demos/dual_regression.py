"""Dual IV regression on the confounded polynomial environment.

Fits the dual estimator and the naive kernel ridge baseline on the same
confounded sample, evaluates both against the true structural function with
fresh Monte-Carlo draws, and verifies the solver against its explicit
feature-space closed form.

Worth knowing: on this generative process the naive baseline's bias is
bounded by the confounder scale (sigma ~ 0.32), which is small relative to
the structural signal, so the dual estimator's extra projection cost is not
repaid in L2 error here -- the regret experiments, not this regression
comparison, are where the instrument earns its keep.
"""

import numpy as np

from ivbandit import (
    ConfoundedEnv,
    KernelSpec,
    closed_form_feature_space,
    collect_dataset,
    feature_map,
    fit,
    naive_krr_fit,
    oracle_predict_many,
    predict_many,
    sample_env,
)

POLY = KernelSpec.polynomial(3, 1.0)
RHO, N = 0.7, 500

ss = np.random.SeedSequence(12)
env_ss, round_ss, arm_ss, reward_ss = ss.spawn(4)
spec = sample_env(4, RHO, env_ss)
env = ConfoundedEnv(spec, np.random.default_rng(round_ss), np.random.default_rng(reward_ss))
arm_rng = np.random.default_rng(arm_ss)

data = collect_dataset(env, N, arm_rng)
lam = np.sqrt(35 / N)
print(f"rho={RHO}, n={N}, lambda1=lambda2={lam:.4f}")

dual = fit(data, POLY, POLY, lam, lam)
naive = naive_krr_fit(data, POLY, lam)
print(f"solve residuals: first stage {dual.diagnostics.first_stage:.2e}, "
      f"theta {dual.diagnostics.theta:.2e}")

test = collect_dataset(env, 10_000, arm_rng)
truth = (test.xs @ spec.alpha + 1.0) ** 3
for name, model in (("dual IV", dual), ("naive KRR", naive)):
    err = np.sqrt(np.mean((predict_many(model, test.xs) - truth) ** 2))
    print(f"{name:9s} L2 error vs structural truth: {err:.4f}")

# cross-check the Gram-matrix solver against the explicit covariance path
phi = feature_map(POLY, 4)
w = closed_form_feature_space(data, phi, feature_map(POLY, 3), lam, lam)
gap = np.max(np.abs(predict_many(dual, test.xs[:200]) - oracle_predict_many(phi, w, test.xs[:200])))
print(f"\nmax |gram-path - feature-path| on 200 points: {gap:.2e}")
