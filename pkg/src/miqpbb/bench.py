"""Batch runs over instance directories and Dolan-More performance profiles."""

from __future__ import annotations

import csv
import math
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path

from .bnb import MiqpStatus, SolveOptions, solve_miqp
from .instance_io import read_instance

CSV_COLUMNS = ["instance", "n", "n1", "m", "kind", "status", "value", "nodes",
               "it_root", "it_mean", "ptime", "time"]
PROFILE_COLUMNS = ["config", "tau", "rho"]
TIME_FLOOR = 1e-3

CONFIGS = {
    "default": {},
    "no-early-pruning": {"early_pruning": False},
    "no-warmstart": {"warmstart": False},
    "plain": {"early_pruning": False, "warmstart": False},
}


def run_one(path, config: str, time_limit, tol: float = 1e-5) -> dict:
    inst = read_instance(path)
    opts = SolveOptions(time_limit=time_limit, tol=tol, **CONFIGS[config])
    res = solve_miqp(inst, opts)
    return {
        "instance": Path(path).name,
        "n": inst.n,
        "n1": inst.n1,
        "m": inst.m,
        "kind": inst.metadata.get("kind", ""),
        "status": res.status.value,
        "value": repr(res.value),
        "nodes": res.nodes,
        "it_root": res.it_root,
        "it_mean": f"{res.it_per_node_mean:.6f}",
        "ptime": f"{res.preprocess_seconds:.3f}",
        "time": f"{res.solve_seconds:.3f}",
    }


def run_batch(paths, config: str, time_limit, jobs: int = 1, tol: float = 1e-5) -> list:
    paths = sorted(paths, key=lambda p: Path(p).name)
    if jobs > 1:
        with ProcessPoolExecutor(jobs) as pool:
            rows = list(pool.map(run_one, paths, [config] * len(paths),
                                 [time_limit] * len(paths), [tol] * len(paths)))
    else:
        rows = [run_one(p, config, time_limit, tol) for p in paths]
    return sorted(rows, key=lambda r: r["instance"])


def write_rows(path, rows, columns=CSV_COLUMNS) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.DictWriter(fh, fieldnames=columns)
        w.writeheader()
        w.writerows(rows)


def solved(row) -> bool:
    return row["status"] in (MiqpStatus.OPTIMAL.value, MiqpStatus.INFEASIBLE.value)


def averages(rows) -> dict:
    """Means over solved instances only."""
    done = [r for r in rows if solved(r)]
    if not done:
        return {"solved": 0}
    out = {"solved": len(done)}
    for key in ("nodes", "it_root", "it_mean", "ptime", "time"):
        out[key] = sum(float(r[key]) for r in done) / len(done)
    return out


def performance_profile(times: dict) -> list:
    """Profile points ``(config, tau, rho)``.

    ``times`` maps config name to ``{instance: seconds or None}`` where
    ``None`` marks an unsolved run.  Instances nobody solved are dropped;
    ``rho`` is evaluated at every distinct ratio observed.
    """
    configs = list(times)
    instances = sorted({i for t in times.values() for i in t})
    ratios = {s: [] for s in configs}
    for inst in instances:
        vals = {s: times[s].get(inst) for s in configs}
        good = [max(v, TIME_FLOOR) for v in vals.values() if v is not None]
        if not good:
            continue
        best = min(good)
        for s in configs:
            v = vals[s]
            ratios[s].append(math.inf if v is None else max(v, TIME_FLOOR) / best)
    taus = sorted({r for rs in ratios.values() for r in rs if math.isfinite(r)})
    points = []
    for s in configs:
        rs = ratios[s]
        for tau in taus:
            rho = sum(r <= tau for r in rs) / len(rs) if rs else 0.0
            points.append({"config": s, "tau": tau, "rho": rho})
    return points
