"""Evaluate the closed-form regret-bound remainders across horizons.

The bounds grow like sqrt(T) log T; this prints them for the benchmark
geometry together with the divergence bound for the heavy-tailed prior.
"""

import math

from jumpclust import (
    regret_bound_anytime,
    regret_bound_fixed,
    regret_bound_horizon,
    regret_bound_student,
    student_dim_constant,
    student_kl_bound,
)

K, D, R, P = 10, 2, 15.0, 20

print(f"remainders for k={K}, d={D}, R={R}, p={P} (uniform-ball prior):")
print(f"{'T':>6} {'fixed(lam=0.2)':>16} {'horizon-tuned':>16} {'anytime':>16}")
for horizon in (50, 100, 200, 1000, 10_000):
    fixed = regret_bound_fixed(K, horizon, D, R, 0.2, 0.0, P)
    tuned = regret_bound_horizon(K, horizon, D, R, 0.0, P)
    adaptive = regret_bound_anytime(K, horizon, D, R, 0.0, P)
    print(f"{horizon:>6} {fixed:>16.0f} {tuned:>16.0f} {adaptive:>16.0f}")

print("\nnormalized by sqrt(T) log T (the bounds' growth rate):")
for horizon in (50, 200, 1000, 10_000):
    adaptive = regret_bound_anytime(K, horizon, D, R, 0.0, P)
    print(f"  T={horizon:>6}: {adaptive / (math.sqrt(horizon) * math.log(horizon)):.1f}")

print(f"\nheavy-tailed prior, dimension constant c_d: d=1 -> {student_dim_constant(1):.6f}"
      f" (= 4/pi), d=2 -> {student_dim_constant(2):.6f}")
norms = [7.0] * K
plain = regret_bound_student(K, 200, D, R, 1.0, 0.0, P, norms, adaptive=False)
adapt = regret_bound_student(K, 200, D, R, 1.0, 0.0, P, norms, adaptive=True)
print(f"heavy-tailed remainder at T=200: {plain:.0f} (fixed tuning) / {adapt:.0f} (adaptive)")

kl = student_kl_bound(2, 1, [[0.2], [-0.4]], 0.2, [0.5, 0.6], 1.0, 1.0, 0.3, 3)
print(f"divergence bound for a 2-block truncated family vs its prior: {kl:.3f}")
