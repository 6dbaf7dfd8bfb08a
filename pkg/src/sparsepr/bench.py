"""Benchmark harness: run solver cells over instance grids, emit CSV rows.

Each (family, size, alpha, rho, solver, repeat) cell builds a deterministic
PageRank instance, runs the solver, and records counters, support volumes,
the certified gap bound, and wall time.  Per-instance complexity predictors
(the conditioning against the crossover thresholds that decide which solver
family should win) are emitted as '#' comment lines after the data rows so
the CSV schema stays fixed.
"""

from __future__ import annotations

import dataclasses
import json
import time

import numpy as np

from .oracle import random_graph_instance
from .problem import build_pagerank_quadratic, internal_volume, volume
from .solvers import aspr, cdpr, ista_baseline

__all__ = ["RunRecord", "CSV_HEADER", "BENCH_FAMILIES", "SOLVER_TOKENS",
           "run_cell", "bench_grid", "predictor_comment"]

CSV_HEADER = ("family,n,alpha,rho,solver,variant,stages,inner_iters,"
              "nnz_touched,full_gradients,support_size,vol_supp,ivol_supp,"
              "gap,wall_ns")

BENCH_FAMILIES = ("grid", "sbm", "star", "path", "cycle")

# solver tokens accepted by --solvers; aspr carries its variant after a colon
SOLVER_TOKENS = ("ista", "cdpr", "aspr", "aspr:early", "aspr:constraints")


@dataclasses.dataclass
class RunRecord:
    """One benchmark cell, losslessly serializable (floats round-trip)."""

    family: str
    n: int
    alpha: float
    rho: float
    solver: str
    variant: str
    stages: int
    inner_iters: int
    nnz_touched: int
    full_gradients: int
    support_size: int
    vol_supp: int
    ivol_supp: int
    gap: float
    wall_ns: int
    seed: int = 0
    eps: float = 0.0

    def to_csv_row(self):
        return ",".join([
            self.family, str(self.n), repr(self.alpha), repr(self.rho),
            self.solver, self.variant, str(self.stages),
            str(self.inner_iters), str(self.nnz_touched),
            str(self.full_gradients), str(self.support_size),
            str(self.vol_supp), str(self.ivol_supp), repr(self.gap),
            str(self.wall_ns),
        ])

    def to_json(self):
        return json.dumps(dataclasses.asdict(self))

    @classmethod
    def from_json(cls, text):
        return cls(**json.loads(text))


def _size_params(family, size):
    size = int(size)
    if family == "grid":
        return {"rows": size, "cols": size}
    if family == "star":
        return {"leaves": size - 1}
    if family == "sbm":
        return {"sizes": [size // 2, size - size // 2]}
    return {"n": size}


def run_cell(family, size, alpha, rho, solver_token, seed, eps=1e-6,
             tol_neg=None, params=None):
    """Build one deterministic instance and run one solver on it."""
    p = dict(params or {})
    p.update(_size_params(family, size))
    p["alpha"] = alpha
    p["rho"] = rho
    inst = random_graph_instance(family, p, seed)
    q = build_pagerank_quadratic(inst)

    name, _, variant = solver_token.partition(":")
    variant = variant or "plain"
    t0 = time.perf_counter_ns()
    if name == "cdpr":
        sol = cdpr(q, tol_neg=tol_neg)
    elif name == "ista":
        sol = ista_baseline(q, eps, tol_neg=tol_neg)
    elif name == "aspr":
        sol = aspr(q, eps, variant=variant, tol_neg=tol_neg)
    else:
        raise ValueError("unknown solver token %r (choose from %s)"
                         % (solver_token, ", ".join(SOLVER_TOKENS)))
    wall = time.perf_counter_ns() - t0

    supp = sol.support
    gap = 0.0 if sol.gap_bound == "exact" else float(sol.gap_bound)
    return RunRecord(
        family=family, n=q.n, alpha=float(alpha), rho=float(rho),
        solver=name, variant=variant,
        stages=sol.counters.stages, inner_iters=sol.counters.inner_iters,
        nnz_touched=sol.counters.nnz_touched,
        full_gradients=sol.counters.full_gradients,
        support_size=int(supp.size),
        vol_supp=volume(q, supp), ivol_supp=internal_volume(q, supp),
        gap=gap, wall_ns=int(wall), seed=int(seed), eps=float(eps),
    )


def predictor_comment(record):
    """Crossover predictors for one instance, as a '#' CSV comment.

    With k = |support|, vol and ivol its volumes, and kappa = L/alpha = 1/alpha:
    the conjugate solver beats the baseline when kappa > max(k^3/vol, k),
    the staged accelerated solver when kappa > max((k*ivol/vol)^2, k), and
    the conjugate solver beats the accelerated one when kappa > (k^2/ivol)^2.
    """
    k = max(record.support_size, 1)
    vol = max(record.vol_supp, 1)
    ivol = max(record.ivol_supp, 1)
    kappa = 1.0 / record.alpha
    cdpr_thr = max(k ** 3 / vol, k)
    aspr_thr = max((k * ivol / vol) ** 2, k)
    duel_thr = (k ** 2 / ivol) ** 2
    return ("# predictors family=%s n=%d alpha=%r solver=%s variant=%s "
            "kappa=%r supp=%d cdpr_vs_ista_thr=%r aspr_vs_ista_thr=%r "
            "cdpr_vs_aspr_thr=%r" % (
                record.family, record.n, record.alpha, record.solver,
                record.variant, kappa, record.support_size, cdpr_thr,
                aspr_thr, duel_thr))


def bench_grid(families, sizes, alphas, rhos, solvers, seed, repeat=1,
               eps=1e-6):
    """Yield RunRecords over the full cell grid, deterministically ordered.

    The instance seed for a cell depends on (family, size, alpha, rho,
    repeat index) but not on the solver, so every solver sees the same
    instance within a cell.
    """
    for family in families:
        for size in sizes:
            for alpha in alphas:
                for rho in rhos:
                    for r in range(repeat):
                        fam_tag = sum(family.encode("utf-8"))
                        cell_seed = int(np.random.SeedSequence(
                            [seed, r, int(size), fam_tag,
                             int(alpha * 1e9) & 0xFFFFFFFF,
                             int(rho * 1e9) & 0xFFFFFFFF],
                        ).generate_state(1)[0])
                        for token in solvers:
                            yield run_cell(family, size, alpha, rho, token,
                                           cell_seed, eps=eps)
