"""Least-favorable priors and the chi-square yardstick.

Samples the three null priors, verifies draw-by-draw validity (exact
null constraint, sparsity cap, eigenvalue window), and compares the
Monte Carlo chi-square divergence of the covariance-perturbation prior
against the exact hypergeometric MGF bound.
"""

import math

import numpy as np

from adaptest import make_loading
from adaptest.model import JointCovariance
from adaptest.priors import (
    chi2_mixture_mc,
    hypergeometric_mgf,
    sample_comp_prior,
    sample_nu1_prior,
    sample_nu2_prior,
)
from adaptest.profiles import nu1 as nu1_value

p, k_u, n = 400, 16, 1200
sigma_star = 5.0
xi = make_loading(np.concatenate((np.ones(150), np.zeros(p - 150))))

print("=== one draw from each prior ===")
d2 = sample_nu2_prior(xi, k_u, n, p, sigma_star, seed=1)
print(f"nu2:  kappa={d2.kappa:.5f} sparsity={d2.sparsity} eigs=[{d2.eig_min:.4f},{d2.eig_max:.4f}] "
      f"residual={d2.constraint_residual(xi):.1e} valid={d2.valid}")
tau1 = 0.0125 * nu1_value(xi, k_u) / math.sqrt(n)
d1 = sample_nu1_prior(xi, k_u, n, tau1, seed=1, sigma_star=sigma_star)
print(f"nu1:  kappa={d1.kappa:.5f} sparsity={d1.sparsity} Sigma=I "
      f"residual={d1.constraint_residual(xi):.1e} valid={d1.valid}")
dc = sample_comp_prior(xi, k_u, n, p, 1, seed=1, sigma_star=sigma_star)
print(f"comp: kappa={dc.kappa:.5f} sparsity={dc.sparsity} eigs=[{dc.eig_min:.4f},{dc.eig_max:.4f}] "
      f"valid={dc.valid}")

print("\n=== validity rates over 2000 draws ===")
for name, sampler in {
    "nu2": lambda s: sample_nu2_prior(xi, k_u, n, p, sigma_star, seed=s),
    "nu1": lambda s: sample_nu1_prior(xi, k_u, n, tau1, seed=s, sigma_star=sigma_star),
    "comp": lambda s: sample_comp_prior(xi, k_u, n, p, 1, seed=s, sigma_star=sigma_star),
}.items():
    valid = sum(sampler(s).valid for s in range(2000))
    print(f"  {name}: {valid / 2000:.3f}")

print("\n=== chi-square of the nu2 mixture vs the hypergeometric bound ===")
ref = JointCovariance(sigma_z=np.diag(np.concatenate(([sigma_star**2], np.ones(p)))))
est, se = chi2_mixture_mc(
    lambda s: sample_nu2_prior(xi, k_u, n, p, sigma_star, seed=s), ref, n, 200, seed=9, valid_only=True
)
c1 = 0.05
c3 = 2.0 * (1.0 / sigma_star**2 + 1.0)
bound = hypergeometric_mgf(p - k_u // 4, k_u // 4, c3 * c1**2) - 1.0
print(f"  MC estimate: {est:.6f} +- {se:.6f}")
print(f"  exact overlap-MGF bound: {bound:.6f}  (estimate below bound: {est <= bound + 3 * se})")
