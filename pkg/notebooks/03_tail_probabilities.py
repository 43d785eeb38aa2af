"""
Tail probabilities at moderate N
================================

Empirical log P(T_N*/N >= T* + eps) for d = 2, eps = 0.05, against the
predicted decay rate.  Beyond N of about 100 the event is too rare for plain
Monte Carlo, so only the small-N end of the line is visible.
"""

# %%
import numpy as np

from greedy_ldp import deviation_rate, jamming_constant, make_regular
from greedy_ldp.montecarlo import tail_probability

# %%
d, eps = 2, 0.05
F = deviation_rate(d, eps, "upper")
threshold = jamming_constant(d) + eps
print(f"predicted slope of log P against N: {-F:.4f}")

rows = []
for N in (25, 50, 75, 100):
    t = tail_probability(make_regular(d, N), threshold, replicas=100_000, seed=N)
    rows.append((N, t.hits, t.log_p))
    print(f"N={N:4d} hits={t.hits:6d} log p = {t.log_p:8.3f}  CI=({t.ci_low:.2e}, {t.ci_high:.2e})")

Ns, _, logs = map(np.array, zip(*rows))
ok = np.isfinite(logs)
print("fitted slope:", np.polyfit(Ns[ok], logs[ok], 1)[0])
