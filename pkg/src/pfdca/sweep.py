"""Hyperparameter sweep harness: run the solver over geometric grids of
(beta, alpha) for a range of code cardinalities with random restarts,
collect trade-off points on the information plane, and extract the
empirical lower frontier.

Seeds derive from a stable hash of (base seed, grid indices, restart)
so the sweep is reproducible and independent of execution schedule.
"""

import csv
import io
import json
import os
from dataclasses import dataclass, field
from enum import Enum
from multiprocessing import get_context

import numpy as np

from .dca import DcaConfig, InnerKind, dca_run
from .probability import JointXY

CSV_HEADER = [
    "solver",
    "q",
    "beta",
    "alpha",
    "card_z",
    "restart",
    "seed",
    "i_zx_bits",
    "i_zy_bits",
    "loss_nats",
    "converged",
    "iterations",
    "stationarity_gap",
]

PARETO_BIN_BITS = 0.02


class Solver(str, Enum):
    DCA_RIDGE = "dca_ridge"
    DCA_SPARSE = "dca_sparse"
    GREEDY = "greedy"
    EXHAUSTIVE = "exhaustive"


_SOLVER_Q = {
    Solver.DCA_RIDGE: 2,
    Solver.DCA_SPARSE: 1,
    Solver.GREEDY: 0,
    Solver.EXHAUSTIVE: 0,
}


@dataclass(frozen=True)
class TradeoffPoint:
    """One achieved (I(Z;X), I(Z;Y)) pair plus its provenance."""

    solver: Solver
    beta: float
    alpha: float
    card_z: int
    restart: int
    seed: int
    i_zx_bits: float
    i_zy_bits: float
    loss_nats: float
    converged: bool
    iterations: int
    stationarity_gap: float

    @property
    def q(self) -> int:
        return _SOLVER_Q[self.solver]


def geomspace(lo: float, hi: float, n: int) -> list[float]:
    """n geometrically spaced points, endpoints included exactly."""
    if not (0 < lo < hi):
        raise ValueError("need 0 < lo < hi")
    if n < 2:
        raise ValueError("need at least two points")
    return [float(v) for v in np.geomspace(lo, hi, n)]


def _default_grid() -> tuple:
    return tuple(geomspace(0.1, 10.0, 16))


@dataclass(frozen=True)
class SweepConfig:
    beta_grid: tuple = field(default_factory=_default_grid)
    alpha_grid: tuple = field(default_factory=_default_grid)
    card_z_values: tuple | None = None  # None: 2 .. max(|X|, |Y|) + 1
    restarts: int = 10
    inner_kind: InnerKind = InnerKind.RIDGE
    base_seed: int = 0
    outer_tol: float = 1e-6
    outer_max_iter: int = 10000
    inner_tol: float = 1e-9
    inner_max_iter: int = 5000

    def __post_init__(self):
        for name in ("beta_grid", "alpha_grid"):
            grid = tuple(float(v) for v in getattr(self, name))
            if not grid or min(grid) <= 0 or list(grid) != sorted(grid):
                raise ValueError(f"{name} must be positive and sorted ascending")
            object.__setattr__(self, name, grid)
        if self.card_z_values is not None:
            values = tuple(int(v) for v in self.card_z_values)
            if not values or min(values) < 1:
                raise ValueError("card_z_values must be positive")
            object.__setattr__(self, "card_z_values", values)
        if self.restarts < 1:
            raise ValueError("restarts must be >= 1")
        object.__setattr__(self, "inner_kind", InnerKind(self.inner_kind))

    def resolve_card_z(self, j: JointXY) -> tuple:
        if self.card_z_values is not None:
            return self.card_z_values
        return tuple(range(2, max(j.n_x, j.n_y) + 2))


def derive_seed(base_seed: int, beta_idx: int, alpha_idx: int, card_z: int, restart: int) -> int:
    """Stable 64-bit seed for one sweep cell."""
    ss = np.random.SeedSequence((int(base_seed), beta_idx, alpha_idx, card_z, restart))
    return int(ss.generate_state(1, dtype=np.uint64)[0])


def _run_cell_full(args):
    """(TradeoffPoint, DcaResult) for one grid cell."""
    j, cfg, beta_idx, alpha_idx, card_z, restart = args
    beta = cfg.beta_grid[beta_idx]
    alpha = cfg.alpha_grid[alpha_idx]
    seed = derive_seed(cfg.base_seed, beta_idx, alpha_idx, card_z, restart)
    run_cfg = DcaConfig(
        beta=beta,
        alpha=alpha,
        inner_kind=cfg.inner_kind,
        outer_tol=cfg.outer_tol,
        outer_max_iter=cfg.outer_max_iter,
        inner_tol=cfg.inner_tol,
        inner_max_iter=cfg.inner_max_iter,
        seed=seed,
    )
    res = dca_run(j, card_z, run_cfg)
    solver = Solver.DCA_RIDGE if cfg.inner_kind is InnerKind.RIDGE else Solver.DCA_SPARSE
    point = TradeoffPoint(
        solver=solver,
        beta=beta,
        alpha=alpha,
        card_z=card_z,
        restart=restart,
        seed=seed,
        i_zx_bits=res.i_zx_bits,
        i_zy_bits=res.i_zy_bits,
        loss_nats=res.loss_nats,
        converged=res.converged,
        iterations=res.iterations,
        stationarity_gap=res.stationarity_gap,
    )
    return point, res


def _run_cell(args) -> TradeoffPoint:
    return _run_cell_full(args)[0]


def sweep_tasks(j: JointXY, cfg: SweepConfig) -> list:
    """Grid-ordered task tuples consumed by the cell runners."""
    return [
        (j, cfg, bi, ai, card_z, restart)
        for bi in range(len(cfg.beta_grid))
        for ai in range(len(cfg.alpha_grid))
        for card_z in cfg.resolve_card_z(j)
        for restart in range(cfg.restarts)
    ]


def resolve_jobs(n_jobs: int | None = None) -> int:
    """Worker count: explicit argument, else PF_THREADS, else 1."""
    if n_jobs is None:
        env = os.environ.get("PF_THREADS", "").strip()
        n_jobs = int(env) if env else 1
    return max(1, n_jobs)


def run_sweep(j: JointXY, cfg: SweepConfig, n_jobs: int | None = None) -> list[TradeoffPoint]:
    """One solver run per (beta, alpha, card_z, restart) cell.

    Output order is deterministic (grid order) regardless of the worker
    count used to compute it.
    """
    tasks = sweep_tasks(j, cfg)
    jobs = resolve_jobs(n_jobs)
    if jobs == 1 or len(tasks) < 4:
        return [_run_cell(t) for t in tasks]
    with get_context("fork").Pool(processes=jobs) as pool:
        points = pool.map(_run_cell, tasks, chunksize=max(1, len(tasks) // (jobs * 8)))
    return points


def pareto_frontier(points: list, bin_width_bits: float = PARETO_BIN_BITS) -> list:
    """Lower frontier of the information plane.

    Points are binned by utility ``i_zx_bits``; the minimum-leakage
    point per bin survives, then any point beaten by another with
    strictly higher utility and no more leakage is dropped. Every
    returned point is one of the inputs.
    """
    if bin_width_bits <= 0:
        raise ValueError("bin_width_bits must be positive")
    best: dict = {}
    for p in points:
        key = int(np.floor(p.i_zx_bits / bin_width_bits))
        cur = best.get(key)
        if cur is None or p.i_zy_bits < cur.i_zy_bits:
            best[key] = p
    kept = list(best.values())
    survivors = [
        p
        for p in kept
        if not any(r.i_zx_bits > p.i_zx_bits and r.i_zy_bits <= p.i_zy_bits for r in kept if r is not p)
    ]
    survivors.sort(key=lambda p: (p.i_zx_bits, p.i_zy_bits))
    return survivors


def _format_value(v) -> str:
    if isinstance(v, bool):
        return "true" if v else "false"
    if isinstance(v, float):
        return format(v + 0.0 if v != 0.0 else 0.0, ".12g")
    if isinstance(v, Solver):
        return v.value
    return str(v)


def point_to_record(p: TradeoffPoint) -> dict:
    return {
        "solver": p.solver.value,
        "q": p.q,
        "beta": p.beta,
        "alpha": p.alpha,
        "card_z": p.card_z,
        "restart": p.restart,
        "seed": p.seed,
        "i_zx_bits": p.i_zx_bits,
        "i_zy_bits": p.i_zy_bits,
        "loss_nats": p.loss_nats,
        "converged": p.converged,
        "iterations": p.iterations,
        "stationarity_gap": p.stationarity_gap,
    }


def points_to_csv(points: list) -> str:
    out = io.StringIO()
    writer = csv.writer(out, lineterminator="\n")
    writer.writerow(CSV_HEADER)
    for p in points:
        rec = point_to_record(p)
        writer.writerow([_format_value(rec[k]) for k in CSV_HEADER])
    return out.getvalue()


def write_points_csv(points: list, path) -> None:
    with open(path, "w", encoding="utf-8", newline="") as fh:
        fh.write(points_to_csv(points))


def write_points_json(points: list, path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        json.dump([point_to_record(p) for p in points], fh, indent=1)
        fh.write("\n")


def read_points_csv(path) -> list:
    """Parse a sweep/baseline CSV back into trade-off points.

    Raises ValueError on any schema mismatch.
    """
    with open(path, "r", encoding="utf-8", newline="") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise ValueError(f"{path}: empty file") from None
        if header != CSV_HEADER:
            raise ValueError(f"{path}: unexpected header {header!r}")
        points = []
        for row in reader:
            if len(row) != len(CSV_HEADER):
                raise ValueError(f"{path}: row with {len(row)} fields")
            try:
                points.append(
                    TradeoffPoint(
                        solver=Solver(row[0]),
                        beta=float(row[2]),
                        alpha=float(row[3]),
                        card_z=int(row[4]),
                        restart=int(row[5]),
                        seed=int(row[6]),
                        i_zx_bits=float(row[7]),
                        i_zy_bits=float(row[8]),
                        loss_nats=float(row[9]),
                        converged=row[10] == "true",
                        iterations=int(row[11]),
                        stationarity_gap=float(row[12]),
                    )
                )
            except ValueError as exc:
                raise ValueError(f"{path}: bad row {row!r}: {exc}") from exc
    return points
