# %% [markdown]
# Racing stopping rules on the same random walks
#
# Every policy sees identical paths (common random numbers), so differences
# in mean reward are not sampling noise between policies.

# %%
import numpy as np

from expert_timing.simulator import FinalStop, FixedLIL, Hindsight, ImmediateStop, OptimalTable, monte_carlo
from expert_timing.solver import SolverConfig, solve

T, n, seed = 200, 50_000, 42
table = solve(SolverConfig(T=T, gamma=0.01))
policies = [Hindsight(), OptimalTable(table), FixedLIL(0.2), ImmediateStop(), FinalStop()]
results = monte_carlo(policies, T, n, seed, keep_paths=True)

# %%
print(f"solver says Psi({T}) = {table.capital_psi[T]:.4f}")
for r in results:
    print(f"{r.policy:<10} mean={r.mean_reward:.4f} +- {r.stderr:.4f}   mean stop t={r.mean_stop_time:6.1f}")

# %% the hindsight oracle beats the optimal rule on every path, by a lot on average
gap = results[0].rewards - results[1].rewards
print(f"hindsight - optimal: min {gap.min():.2e}, mean {gap.mean():.3f}")

# %% where the optimal rule stops (counts by remaining time)
hist = results[1].stop_time_histogram
early = sum(v for t, v in hist.items() if t > T // 2)
print(f"stops in the first half of the horizon: {early / n:.1%}; at t=1: {hist.get(1, 0) / n:.1%}")
