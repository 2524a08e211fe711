# %% [markdown]
# When to stop a Gaussian walk
#
# We watch S_T, S_{T-1}, ..., S_1 and may stop once, collecting S_t**2 / t.
# The solver finds the threshold theta(t) above which stopping is optimal.

# %%
import numpy as np

from expert_timing.solver import SolverConfig, solve

T = 400
table = solve(SolverConfig(T=T, gamma=0.01, store_full_grid=True))
print(f"Psi({T}) = {table.capital_psi[T]:.4f}  (error estimate {table.accumulated_error_bound:.1e})")

# %% the threshold in units of sqrt(t), next to the LIL scale 2 log log t
for t in (2, 5, 10, 50, 100, 200, 400):
    ll = 2 * np.log(np.log(t)) if t >= 3 else float("nan")
    print(f"t={t:>4}  theta={table.theta[t]:7.3f}  theta^2/t={table.theta[t] ** 2 / t:6.3f}"
          f"  psi_t(0)={table.psi0[t]:6.3f}  2loglog t={ll:6.3f}")

# %% value profile at t = 100: above theta the value is just the stop reward
t = 100
c = np.linspace(0, 1.4 * table.theta[t], 8)
for ci, v in zip(c, table.psi(t, c)):
    tag = "stop" if ci >= table.theta[t] else "wait"
    print(f"c={ci:6.2f}  psi={v:7.4f}  c^2/t={ci * ci / t:7.4f}  {tag}")

# %% the waiting premium psi - c^2/t shrinks to zero at the threshold
excess = table.psi(t, c) - c * c / t
print("excess:", np.round(excess, 4))
