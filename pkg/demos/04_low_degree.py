"""Low-degree likelihood-ratio norms on a desk-scale instance.

Builds a tiny computational-prior mixture, evaluates LD(D) exactly in
the Hermite basis for increasing degree D, and shows the sandwich
1 <= LD(D) <= 1 + chi^2 tightening as D grows, together with the
uniform log-bound.
"""

import numpy as np

from adaptest import make_loading
from adaptest.lowdeg import hermite_moment, ld_norm, ld_uniform_bound
from adaptest.priors import chi2_pair_closed_form, sample_comp_prior

n, p = 2, 3
xi = make_loading([1.0, 0.9, 0.8])


def sampler(seed):
    return sample_comp_prior(
        xi, 1, n, p, 1, c8=0.4, c9=0.05, seed=seed, sigma_star=1.0,
        k_eff_override=2, s1_override=1, allow_tiny=True,
    )


draws, s = [], 0
while len(draws) < 60:
    d = sampler(s)
    s += 1
    if d.valid:
        draws.append(d)

pairs = [(draws[i], draws[i + 1]) for i in range(0, len(draws) - 1, 2)]
chi2 = float(np.mean([chi2_pair_closed_form(a, b, n) for a, b in pairs])) - 1.0
print(f"reference 1 + chi^2 over {len(pairs)} pairs: {1 + chi2:.10f}")
print(f"{'D':>3} {'LD(D)':>14} {'log uniform bound':>20}")
for deg in range(7):
    val = ld_norm(draws, deg, n)
    print(f"{deg:>3} {val:>14.10f} {ld_uniform_bound(n, p, max(deg, 1)):>20.2f}")

print("\nrank-one Hermite moments of one draw pair (degree-balanced only):")
r1, c1 = draws[0].rank_one_factors()
for mu, nu in (((1, 0, 0), (1,)), ((0, 1, 0), (1,)), ((2, 0, 0), (2,)), ((1, 1, 0), (2,))):
    print(f"  mu={mu} nu={nu}: {hermite_moment(mu, nu, r1, c1):+.6e}")
print("any unbalanced pair vanishes exactly:",
      hermite_moment((1, 0, 0), (2,), r1, c1) == 0.0)
