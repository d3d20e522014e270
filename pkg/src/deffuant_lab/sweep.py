"""Theta sweeps: order parameter per trial, Wilson intervals, crossing of 1/2."""
from __future__ import annotations

import csv
import json
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace

import numpy as np
from scipy.stats import binomtest

from ._reals import format_real
from .dynamics import SimParams, classify_outcome, run_simulation, trial_seed

ORDER_PARAMETERS = ("no_blocked_fraction", "consensus_fraction")
CROSSING_LEVEL = 0.5


@dataclass(frozen=True)
class SweepSpec:
    """Sweep of ``base`` over ``theta_grid``; ``base.theta`` is ignored.

    Trial ``j`` uses the seed derived from ``(master_seed, j)`` at every
    theta, so grid points share their initial configurations and event
    streams (common random numbers).
    """

    base: SimParams
    theta_grid: tuple[float, ...]
    trials: int = 50
    order_parameter: str = "no_blocked_fraction"
    master_seed: int = 0
    consensus_tol: float = 1e-3

    def __post_init__(self):
        grid = tuple(float(t) for t in self.theta_grid)
        object.__setattr__(self, "theta_grid", grid)
        if len(grid) == 0 or any(b <= a for a, b in zip(grid, grid[1:])):
            raise ValueError("theta_grid must be non-empty and strictly increasing")
        if self.trials < 1:
            raise ValueError("trials must be >= 1")
        if self.order_parameter not in ORDER_PARAMETERS:
            raise ValueError(f"order_parameter must be one of {ORDER_PARAMETERS}")


def theta_range(start: float, stop: float, step: float) -> tuple[float, ...]:
    """Inclusive grid ``start, start+step, ..., stop`` rounded to clean decimals."""
    n = int(round((stop - start) / step))
    return tuple(round(start + i * step, 12) for i in range(n + 1))


@dataclass
class TrialRow:
    theta: float
    trial: int
    order_parameter: int
    blocked_fraction: float
    max_dev: float
    outcome: str


@dataclass
class SweepResult:
    thetas: np.ndarray
    successes: np.ndarray
    trials: int
    estimates: np.ndarray
    wilson_lo: np.ndarray
    wilson_hi: np.ndarray
    theta_c_hat: float | None
    theta_c_predicted: float | None = None
    order_parameter: str = "no_blocked_fraction"
    rows: list[TrialRow] = field(default_factory=list)

    def to_dict(self) -> dict:
        return {
            "order_parameter": self.order_parameter,
            "trials": self.trials,
            "theta_c_hat": self.theta_c_hat,
            "theta_c_predicted": self.theta_c_predicted,
            "points": [{"theta": float(t), "successes": int(s), "estimate": float(e),
                        "wilson_lo": float(lo), "wilson_hi": float(hi)}
                       for t, s, e, lo, hi in zip(self.thetas, self.successes, self.estimates,
                                                  self.wilson_lo, self.wilson_hi)],
        }

    def write(self, out_dir) -> None:
        """``results.csv`` (one row per trial), ``sweep.csv`` and ``summary.json``."""
        from pathlib import Path
        out = Path(out_dir)
        out.mkdir(parents=True, exist_ok=True)
        write_rows(self.rows, out / "results.csv")
        with open(out / "sweep.csv", "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["theta", "estimate", "wilson_lo", "wilson_hi", "successes", "trials"])
            for t, e, lo, hi, s in zip(self.thetas, self.estimates, self.wilson_lo,
                                       self.wilson_hi, self.successes):
                w.writerow([format_real(float(t)), format_real(float(e)), format_real(float(lo)),
                            format_real(float(hi)), int(s), self.trials])
        (out / "summary.json").write_text(json.dumps(self.to_dict(), indent=2))


def write_rows(rows, path) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["theta", "trial", "order_parameter", "blocked_fraction", "max_dev"])
        for r in sorted(rows, key=lambda r: (r.theta, r.trial)):
            w.writerow([format_real(r.theta), r.trial, r.order_parameter,
                        format_real(r.blocked_fraction), format_real(r.max_dev)])


def wilson_interval(successes: int, trials: int, level: float = 0.95) -> tuple[float, float]:
    ci = binomtest(int(successes), int(trials)).proportion_ci(confidence_level=level, method="wilson")
    return float(ci.low), float(ci.high)


def crossing(thetas, estimates, level: float = CROSSING_LEVEL) -> float | None:
    """First upward crossing of ``level`` by linear interpolation.

    ``None`` when the estimates never reach ``level`` or already sit at or
    above it at the first grid point (crossing outside the grid).
    """
    th = np.asarray(thetas, dtype=float)
    est = np.asarray(estimates, dtype=float)
    if est[0] >= level:
        return None
    for i in range(len(th) - 1):
        if est[i] < level <= est[i + 1]:
            return float(th[i] + (level - est[i]) * (th[i + 1] - th[i]) / (est[i + 1] - est[i]))
    return None


def _trial(args):
    params, trial, order_parameter, consensus_tol = args
    s = run_simulation(params)
    outcome = classify_outcome(s, params.theta, consensus_tol)
    if order_parameter == "no_blocked_fraction":
        op = int(s.blocked_edge_fraction == 0)
    else:
        op = int(outcome == "consensus_proxy")
    return TrialRow(params.theta, trial, op, s.blocked_edge_fraction,
                    s.max_deviation_from_mean, outcome)


def run_sweep(spec: SweepSpec, jobs: int = 1, theta_c_predicted: float | None = None) -> SweepResult:
    """Run ``trials`` simulations per grid point and locate the crossing.

    Output is independent of ``jobs``: rows are sorted by (theta, trial)
    before aggregation.
    """
    tasks = []
    for j in range(spec.trials):
        seed = trial_seed(spec.master_seed, j)
        for th in spec.theta_grid:
            p = replace(spec.base, theta=th, seed=seed, record_events=False)
            tasks.append((p, j, spec.order_parameter, spec.consensus_tol))
    if jobs > 1:
        with ProcessPoolExecutor(max_workers=jobs) as ex:
            rows = list(ex.map(_trial, tasks, chunksize=max(1, len(tasks) // (4 * jobs))))
    else:
        rows = [_trial(t) for t in tasks]
    rows.sort(key=lambda r: (r.theta, r.trial))
    thetas = np.array(spec.theta_grid)
    succ = np.array([sum(r.order_parameter for r in rows if r.theta == th) for th in thetas])
    est = succ / spec.trials
    ci = np.array([wilson_interval(s, spec.trials) for s in succ])
    return SweepResult(thetas, succ, spec.trials, est, ci[:, 0], ci[:, 1],
                       crossing(thetas, est), theta_c_predicted, spec.order_parameter, rows)


def monotone_within_wilson(result: SweepResult) -> bool:
    """No later grid point lies entirely below an earlier one's Wilson interval."""
    for i in range(len(result.thetas)):
        for j in range(i + 1, len(result.thetas)):
            if result.wilson_hi[j] < result.wilson_lo[i]:
                return False
    return True


def sweep_from_config(cfg: dict, trials: int | None = None, seed: int | None = None) -> SweepSpec:
    """Build a :class:`SweepSpec` from a parsed config (see :mod:`config`)."""
    from ._reals import ConfigError, parse_real

    sw = cfg.get("sweep") or {}
    dyn = cfg["dynamics"]
    try:
        if "theta_grid" in sw:
            grid = tuple(parse_real(t) for t in sw["theta_grid"])
        elif all(k in sw for k in ("theta_start", "theta_stop", "theta_step")):
            grid = theta_range(parse_real(sw["theta_start"]), parse_real(sw["theta_stop"]),
                               parse_real(sw["theta_step"]))
        else:
            raise ConfigError("sweep needs theta_grid or theta_start/theta_stop/theta_step")
        base = SimParams(cfg["lattice"], theta=1.0, mu=dyn["mu"], t_max=dyn["t_max"],
                         metric=cfg["metric"], distribution=cfg["distribution"], seed=0)
        return SweepSpec(base, grid, trials=int(trials or sw.get("trials", 50)),
                         order_parameter=sw.get("order_parameter", "no_blocked_fraction"),
                         master_seed=int(seed if seed is not None else sw.get("master_seed", dyn["seed"])),
                         consensus_tol=parse_real(sw.get("consensus_tol", 1e-3)))
    except ConfigError:
        raise
    except (KeyError, TypeError, ValueError) as exc:
        raise ConfigError(f"bad sweep section: {exc}") from exc

