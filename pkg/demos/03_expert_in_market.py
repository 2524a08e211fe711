# %% [markdown]
# An expert deciding when to trade in an LMSR market
#
# The market's belief x_t and the expert's y_t both drift toward the outcome.
# The expert speaks once, as soon as (y_t - x_t)**2 >= q theta(t)**2.

# %%
import math

import numpy as np

from expert_timing.model import MarketState, expert_immediate_reward, quality_term, should_predict
from expert_timing.simulator import expert_scenario, sample_scenario
from expert_timing.solver import SolverConfig, solve

T = 100
table = solve(SolverConfig(T=T, gamma=0.01, store_full_grid=True))

# %% one path, narrated
q = 0.5
path = sample_scenario(T, q, seed=3)
for t in range(T, 0, -1):
    state = MarketState(t=t, x_t=float(path.x[t - 1]), y_t=float(path.y[t - 1]), q=q)
    if should_predict(state, float(table.theta[t])):
        break
r = expert_immediate_reward(state)
print(f"expert speaks at t={t}: gap={state.deviation:+.3f}, expected reward "
      f"{r.deviation_term:.3f} (gap) + {r.quality_term:.3f} (quality)")

# %% many paths: realized score agrees with the policy's expected reward
for q in (0.2, 0.5, 0.8):
    rep = expert_scenario(T, q, seed=11, table=table, n=20_000)
    print(f"q={q}: realized {rep.mean_realized:.4f} +- {rep.stderr_realized:.4f}, "
          f"expected {rep.mean_expected:.4f}, quality-only {quality_term(q):.4f}, "
          f"mean stop t={rep.mean_stop_time:.1f}, share of losing trades {rep.fraction_negative:.1%}")
