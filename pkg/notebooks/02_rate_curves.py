"""
Rate curves of Hamilton trajectories
====================================

F(a0) is the action of the Hamilton path launched with adjoint a0 on the
empty-vertex density.  Its stopping time T_a0 moves monotonically from
1/(d+1) (a0 -> -inf) to 1/2 (a0 at its critical value), so deviations of the
independent-set size reduce to a root find in a0.
"""

# %%
import numpy as np

from greedy_ldp import alpha0_for_time, deviation_rate, jamming_constant, rate_curve_regular
from greedy_ldp.deviations import LOWER, UPPER, epsilon_limit, rate_vs_epsilon

# %% [markdown]
# F(a0) for d = 2..10.  Points past the critical launch are NaN.

# %%
grid = np.round(np.linspace(-1.0, 0.6, 9), 3)
print("a0     " + " ".join(f"{a:>8}" for a in grid))
for d in range(2, 11):
    c = rate_curve_regular(d, grid=grid, threads=1)
    print(f"d={d:<4} " + " ".join(f"{f:8.4f}" for f in c.F_values))

# %% [markdown]
# Reachable deviations and the rate of P(T_N*/N >= T* + eps) or <= T* - eps.

# %%
for d in (2, 3, 6):
    print(f"d={d}: T*={jamming_constant(d):.4f}, upward eps < {epsilon_limit(d, UPPER):.4f},"
          f" downward eps < {epsilon_limit(d, LOWER):.4f}")
eps = [0.01, 0.02, 0.04, 0.06]
for d in (2, 3, 6):
    up = rate_vs_epsilon(d, eps, UPPER, threads=1)[:, 3]
    down = rate_vs_epsilon(d, eps, LOWER, threads=1)[:, 3]
    print(f"d={d} upper {np.round(up, 5)} lower {np.round(down, 5)}")

# %%
a0 = alpha0_for_time(3, 0.425)
print("d=3: a0 reaching T = 0.425 is", a0, "with rate", deviation_rate(3, 0.05, UPPER))
