"""``expert-timing`` command line: solve, profile, simulate, bounds, verify.

Exit codes: 0 success, 2 domain error, 3 capacity, 4 verification failure.
"""

from __future__ import annotations

import argparse
import json
import math
import sys
import time
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

from . import io as aio
from .bounds import LOWER_EPS_GRID, UPPER_EPS_GRID, bound_report, best_lower_bound, best_upper_bound
from .errors import CapacityError, DomainError, StateError
from .simulator import (
    MAX_DRAWS,
    FinalStop,
    FixedLIL,
    Hindsight,
    ImmediateStop,
    OptimalTable,
    expert_scenario,
    monte_carlo,
)
from .solver import SolverConfig, solve
from .verify import run_verification

EXIT_OK = 0
EXIT_DOMAIN = 2
EXIT_CAPACITY = 3
EXIT_VERIFY = 4

COMMANDS = ("solve", "profile", "simulate", "bounds", "verify")


@dataclass(frozen=True)
class RunConfig:
    command: str
    T: int
    epsilon: float = 0.1
    gamma: float | None = None
    q: float | None = None
    n: int = 100_000
    seed: int = 42
    out: str = "out"
    refine_theta: bool = True
    store_grid: bool = False
    dump_paths: bool = False
    t: int | None = None
    extra: dict = field(default_factory=dict)

    def validate(self) -> None:
        if self.command not in COMMANDS:
            raise DomainError(f"unknown command {self.command!r}")
        if self.T < 1:
            raise DomainError(f"T must be >= 1, got {self.T}")
        if not 0 < self.epsilon < 1 and self.command != "bounds":
            raise DomainError(f"epsilon must be in (0, 1), got {self.epsilon}")
        if self.command == "bounds" and not self.epsilon > 0:
            raise DomainError(f"epsilon must be > 0, got {self.epsilon}")
        if self.gamma is not None and not (math.isfinite(self.gamma) and self.gamma > 0):
            raise DomainError(f"gamma must be > 0, got {self.gamma}")
        if self.q is not None and not 0 < self.q < 1:
            raise DomainError(f"q must be in (0, 1), got {self.q}")
        if self.n < 1:
            raise DomainError(f"n must be >= 1, got {self.n}")
        if self.seed < 0:
            raise DomainError(f"seed must be >= 0, got {self.seed}")
        if self.t is not None and not 1 <= self.t <= self.T:
            raise DomainError(f"t must be in [1, T={self.T}], got {self.t}")
        if self.command == "bounds" and self.T <= 10:
            raise DomainError(f"no bound is admissible at T={self.T} (needs T > 10)")
        if self.command == "simulate" and self.n * self.T > MAX_DRAWS:
            raise CapacityError(f"n T = {self.n * self.T:.3g} draws exceeds the limit {MAX_DRAWS:.3g}")

    def solver_config(self, store_full_grid: bool | None = None) -> SolverConfig:
        return SolverConfig(T=self.T, epsilon=self.epsilon, gamma=self.gamma,
                            refine_theta=self.refine_theta,
                            store_full_grid=self.store_grid if store_full_grid is None else store_full_grid)

    def manifest(self) -> dict:
        d = asdict(self)
        d.pop("extra")
        d.update(self.extra)
        return d


def _solve(cfg: RunConfig, store_full_grid: bool | None = None):
    t0 = time.perf_counter()
    table = solve(cfg.solver_config(store_full_grid))
    return table, time.perf_counter() - t0


def cmd_solve(cfg: RunConfig) -> int:
    table, wall = _solve(cfg)
    T = cfg.T
    out = Path(cfg.out)
    files = list(aio.save_policy(table, out, include_rows=cfg.store_grid))
    aio.write_manifest(out, "solve", {**cfg.manifest(), "solver": table.config.to_dict()}, files)
    kind = "certified" if table.certified else "heuristic"
    print(f"T={T} gamma={table.config.gamma:.6g} h={table.config.h:.6g}")
    print(f"theta(T)   = {table.theta[T]:.10g}")
    print(f"psi_T(0)   = {table.psi0[T]:.10g}")
    print(f"Psi(T)     = {table.capital_psi[T]:.10g}")
    print(f"error      = {table.accumulated_error_bound:.4g} ({kind})")
    print(f"wall time  = {wall:.2f} s")
    return EXIT_OK


def cmd_profile(cfg: RunConfig) -> int:
    t = cfg.T if cfg.t is None else cfg.t
    table, _ = _solve(cfg, store_full_grid=True)
    row = table.row(t)
    th = float(table.theta[t])
    c_max = max(th * 1.5, th + 20 * row.gamma, 1.0)
    c = np.arange(0.0, c_max + row.gamma / 2, row.gamma)
    psi = table.psi(t, c)
    out = Path(cfg.out)
    f2 = aio.atomic_write_text(out / "figure2.csv", aio.figure2_csv_text(table))
    f3 = aio.atomic_write_text(out / "figure3.csv", aio.profile_csv_text(c, psi))
    aio.write_manifest(out, "profile", {**cfg.manifest(), "profile_t": t,
                                        "solver": table.config.to_dict()}, [f2, f3])
    print(f"t={t} theta={th:.10g} theta^2/t={th * th / t:.10g} psi_t(0)={table.psi0[t]:.10g}")
    return EXIT_OK


def cmd_simulate(cfg: RunConfig) -> int:
    T = cfg.T
    table, _ = _solve(cfg, store_full_grid=cfg.q is not None)
    pols = [Hindsight(), OptimalTable(table)]
    if T >= 16:
        pols.append(FixedLIL(0.2))
    pols += [ImmediateStop(), FinalStop()]
    res = monte_carlo(pols, T, cfg.n, cfg.seed, keep_paths=cfg.dump_paths)
    out = Path(cfg.out)
    files = [aio.atomic_write_text(out / "sim.csv", aio.sim_csv_text(res))]
    if cfg.dump_paths:
        files.append(aio.atomic_write_text(out / "paths.csv", aio.paths_csv_text(res)))
    print(f"{'policy':<12} {'mean':>10} {'stderr':>10} {'mean_t':>8}")
    for r in res:
        print(f"{r.policy:<12} {r.mean_reward:>10.5f} {r.stderr:>10.5f} {r.mean_stop_time:>8.2f}")
    print(f"Psi(T)={table.capital_psi[T]:.6f}")
    if cfg.q is not None:
        rep = expert_scenario(T, cfg.q, cfg.seed, table, n=cfg.n)
        doc = {k: v for k, v in asdict(rep).items() if k not in ("realized", "expected")}
        files.append(aio.atomic_write_text(out / "scenario.json", json.dumps(doc, indent=1) + "\n"))
        print(f"scenario q={cfg.q}: realized={rep.mean_realized:.5f}+-{rep.stderr_realized:.5f} "
              f"expected={rep.mean_expected:.5f}")
    aio.write_manifest(out, "simulate", {**cfg.manifest(), "solver": table.config.to_dict()}, files)
    return EXIT_OK


def cmd_bounds(cfg: RunConfig) -> int:
    eps = sorted(set(np.round(np.concatenate([UPPER_EPS_GRID, LOWER_EPS_GRID, [cfg.epsilon]]), 10)))
    reps = [bound_report(cfg.T, float(e)) for e in eps]
    out = Path(cfg.out)
    f = aio.atomic_write_text(out / "bounds.csv", aio.bounds_csv_text(reps))
    aio.write_manifest(out, "bounds", cfg.manifest(), [f])
    up, eu = best_upper_bound(cfg.T)
    print(f"T={cfg.T} best upper={up:.6g} (eps={eu:g})")
    if cfg.T > 16:
        lo, el = best_lower_bound(cfg.T)
        print(f"T={cfg.T} best lower={lo:.6g} (eps={el:g}){' vacuous' if lo <= 0 else ''}")
    return EXIT_OK


def cmd_verify(cfg: RunConfig) -> int:
    checks = run_verification(T=cfg.T, n=cfg.n, seed=cfg.seed,
                              gamma=0.01 if cfg.gamma is None else cfg.gamma, epsilon=cfg.epsilon)
    for c in checks:
        print(c.line())
    ok = all(c.passed for c in checks)
    out = Path(cfg.out)
    f = aio.atomic_write_text(out / "verify.json", json.dumps(
        [{"name": c.name, "passed": c.passed, "detail": c.detail} for c in checks], indent=1) + "\n")
    aio.write_manifest(out, "verify", cfg.manifest(), [f])
    print("ALL PASS" if ok else "FAILED")
    return EXIT_OK if ok else EXIT_VERIFY


HANDLERS = {"solve": cmd_solve, "profile": cmd_profile, "simulate": cmd_simulate,
            "bounds": cmd_bounds, "verify": cmd_verify}


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="expert-timing", description=__doc__.splitlines()[0])
    sub = p.add_subparsers(dest="command", required=True)
    for name in COMMANDS:
        s = sub.add_parser(name)
        s.add_argument("--T", type=int, required=name != "verify", default=100)
        s.add_argument("--epsilon", type=float, default=0.1)
        s.add_argument("--gamma", type=float, default=None)
        s.add_argument("--q", type=float, default=None)
        s.add_argument("--n", type=lambda v: int(float(v)), default=100_000)
        s.add_argument("--seed", type=int, default=42)
        s.add_argument("--out", default="out")
        s.add_argument("--refine-theta", action=argparse.BooleanOptionalAction, default=True)
        s.add_argument("--store-grid", action="store_true")
        s.add_argument("--dump-paths", action="store_true")
        if name == "profile":
            s.add_argument("--t", type=int, default=None, help="profile time (default T)")
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        cfg = RunConfig(command=args.command, T=args.T, epsilon=args.epsilon, gamma=args.gamma,
                        q=args.q, n=args.n, seed=args.seed, out=args.out,
                        refine_theta=args.refine_theta, store_grid=args.store_grid,
                        dump_paths=args.dump_paths, t=getattr(args, "t", None))
        cfg.validate()
        return HANDLERS[cfg.command](cfg)
    except (DomainError, StateError) as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_DOMAIN
    except CapacityError as e:
        print(f"capacity error: {e}", file=sys.stderr)
        return EXIT_CAPACITY


if __name__ == "__main__":
    sys.exit(main())
