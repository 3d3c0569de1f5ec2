"""Beam switch-off optimization: turn off SSB beams subject to a cardinality
bound while minimizing the mean per-cell RSRP degradation.

The objective averages, over populated grid cells, the gap between the
best per-cell beam mean with everything on and the best mean restricted to
the enabled subset.  Cells that lose every observed beam are charged down
to a configurable floor, which keeps the objective finite and monotone.

Solvers: an exhaustive oracle (small cardinalities), a binary genetic
algorithm (tournament selection, uniform crossover, bit-flip mutation and
cardinality repair) and a density-based heuristic that keeps the beams
dominating the densest measurement clusters.
"""
from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from itertools import combinations

import numpy as np
from scipy.spatial import cKDTree

from .layout import GridSpec
from .link import MeasurementTrace

DEFAULT_PENALTY_FLOOR_DBM = -120.0
EXHAUSTIVE_GUARD = 1_000_000


@dataclass(frozen=True)
class SwitchOffProblem:
    """Per-cell, per-beam statistics backing the switch-off objective.

    ``table`` holds the per-cell dB-mean RSRP of each beam (-inf where the
    beam was never detected in the cell); ``rsrp_max`` is the per-cell best
    with every beam enabled.  ``points``/``point_beam`` retain the raw
    per-burst strongest observations for density-based solvers.
    """
    grid: GridSpec
    beam_ids: tuple
    table: np.ndarray       # (n_cells_populated, n_beams) dBm, -inf absent
    rsrp_max: np.ndarray    # (n_cells_populated,)
    cell_flat: np.ndarray   # flat grid index of each populated cell
    xi: int
    points: np.ndarray      # (n_bursts, 3): x, y, strongest RSRP
    point_beam: np.ndarray  # (n_bursts,) strongest-beam column
    penalty_floor: float = DEFAULT_PENALTY_FLOOR_DBM

    @property
    def n_cells(self) -> int:
        return len(self.rsrp_max)

    @property
    def n_beams(self) -> int:
        return len(self.beam_ids)


@dataclass(frozen=True)
class BeamMask:
    """On/off state of every beam in the configuration, one bit per beam."""
    bits: tuple[int, ...]

    def __post_init__(self):
        bits = tuple(int(b) for b in self.bits)
        if any(b not in (0, 1) for b in bits):
            raise ValueError("mask bits must be 0 or 1")
        object.__setattr__(self, "bits", bits)

    def __len__(self) -> int:
        return len(self.bits)

    def __iter__(self):
        return iter(self.bits)

    @property
    def popcount(self) -> int:
        return sum(self.bits)

    def feasible(self, xi: int) -> bool:
        return 1 <= self.popcount <= xi

    def as_array(self) -> np.ndarray:
        return np.asarray(self.bits, dtype=bool)

    @classmethod
    def all_on(cls, n: int) -> "BeamMask":
        return cls(tuple(1 for _ in range(n)))

    @classmethod
    def from_enabled(cls, n: int, enabled) -> "BeamMask":
        bits = [0] * n
        for k in enabled:
            bits[k] = 1
        return cls(tuple(bits))


@dataclass(frozen=True)
class SolverResult:
    mask: BeamMask
    objective: float       # dB, >= 0
    evaluations: int
    solver: str
    seed: int | None = None
    extras: dict | None = None

    def enabled(self, beam_ids) -> list:
        return [beam_ids[k] for k, bit in enumerate(self.mask.bits) if bit]


def build_problem(trace: MeasurementTrace, grid: GridSpec, xi: int,
                  penalty_floor: float = DEFAULT_PENALTY_FLOOR_DBM) -> SwitchOffProblem:
    """Aggregate a trace into the per-cell per-beam mean table."""
    if xi < 1:
        raise ValueError("cardinality bound xi must be >= 1")
    if trace.n_samples == 0:
        raise ValueError("trace is empty")
    best, col = trace.strongest()
    ok = col >= 0
    if not ok.any():
        raise ValueError("trace visited no cells with detected beams")
    finite = np.isfinite(trace.rsrp)
    rows, beams = np.nonzero(finite)
    ix, iy = grid.indices(trace.positions)
    flat = iy * grid.nx + ix
    n_beams = len(trace.beam_ids)
    acc = np.zeros((grid.n_cells, n_beams))
    cnt = np.zeros((grid.n_cells, n_beams))
    np.add.at(acc, (flat[rows], beams), trace.rsrp[rows, beams])
    np.add.at(cnt, (flat[rows], beams), 1.0)
    populated = np.flatnonzero(cnt.sum(axis=1) > 0)
    with np.errstate(invalid="ignore"):
        table = np.where(cnt[populated] > 0, acc[populated] / cnt[populated], -np.inf)
    rsrp_max = table.max(axis=1)
    points = np.column_stack([trace.positions[ok], best[ok]])
    return SwitchOffProblem(grid, trace.beam_ids, table, rsrp_max, populated,
                            int(xi), points, col[ok], penalty_floor)


def _as_mask_array(problem: SwitchOffProblem, mask) -> np.ndarray:
    if isinstance(mask, BeamMask):
        m = mask.as_array()
    else:
        m = np.asarray(mask, dtype=bool)
    if m.shape != (problem.n_beams,):
        raise ValueError(f"mask must have one bit per beam ({problem.n_beams})")
    return m


def objective(problem: SwitchOffProblem, mask) -> float:
    """Mean per-cell degradation (dB) of the enabled subset; 0 for all-on."""
    m = _as_mask_array(problem, mask)
    if not m.any():
        raise ValueError("mask enables no beam")
    return float(_objective_batch(problem, m[None, :])[0])


def _objective_batch(problem: SwitchOffProblem, masks: np.ndarray) -> np.ndarray:
    """Objective of several masks at once; masks is (n_masks, n_beams) bool."""
    chunk = max(1, int(3e7 / (problem.n_cells * problem.n_beams + 1)))
    out = np.empty(len(masks))
    for lo in range(0, len(masks), chunk):
        part = masks[lo:lo + chunk]
        restricted = np.where(part[:, None, :], problem.table[None, :, :], -np.inf).max(axis=2)
        uncovered = ~np.isfinite(restricted)
        restricted = np.where(uncovered, problem.penalty_floor, restricted)
        out[lo:lo + chunk] = np.mean(problem.rsrp_max[None, :] - restricted, axis=1)
    return out


def solve_exhaustive(problem: SwitchOffProblem) -> SolverResult:
    """Enumerate every non-empty mask with popcount <= xi (guarded).

    Ties break toward the lexicographically smallest mask tuple.
    """
    n, xi = problem.n_beams, problem.xi
    if xi >= n:
        # enabling beams never hurts, so all-on attains the 0 dB optimum
        mask = np.ones(n, dtype=bool)
        return SolverResult(BeamMask.all_on(n), objective(problem, mask),
                            1, "exhaustive")
    if math.comb(n, xi) > EXHAUSTIVE_GUARD:
        raise ValueError(
            f"C({n}, {xi}) exceeds the {EXHAUSTIVE_GUARD} mask guard; use solve_ga")
    best_obj = math.inf
    best_mask: tuple | None = None
    evaluations = 0
    for k in range(1, xi + 1):
        idx = np.array(list(combinations(range(n), k)))
        masks = np.zeros((len(idx), n), dtype=bool)
        masks[np.arange(len(idx))[:, None], idx] = True
        objs = _objective_batch(problem, masks)
        evaluations += len(masks)
        for row in np.flatnonzero(objs <= min(best_obj, objs.min())):
            mask_t = tuple(int(b) for b in masks[row])
            obj = float(objs[row])
            if obj < best_obj or (obj == best_obj and mask_t < best_mask):
                best_obj, best_mask = obj, mask_t
    return SolverResult(BeamMask(best_mask), best_obj, evaluations, "exhaustive")


# ---------------------------------------------------------------------------
# genetic algorithm

@dataclass(frozen=True)
class GaParams:
    pop_size: int = 80
    generations: int = 200
    tournament_k: int = 3
    crossover_rate: float = 0.9
    mutation_rate: float | None = None  # defaults to 1/n_beams

    def __post_init__(self):
        if self.pop_size < 2 or self.generations < 1 or self.tournament_k < 1:
            raise ValueError("invalid GA parameters")
        if not (0.0 <= self.crossover_rate <= 1.0):
            raise ValueError("crossover_rate must be within [0, 1]")


def _repair(problem: SwitchOffProblem, mask: np.ndarray, rng) -> np.ndarray:
    """Enforce 1 <= popcount <= xi.

    Over-full masks drop their lowest-contribution beams one at a time,
    contribution being the number of populated cells a beam currently wins
    among the enabled set.  Empty masks enable one random beam.
    """
    if not mask.any():
        mask = mask.copy()
        mask[int(rng.integers(problem.n_beams))] = True
        return mask
    while mask.sum() > problem.xi:
        enabled = np.flatnonzero(mask)
        sub = problem.table[:, enabled]
        winner = enabled[np.argmax(sub, axis=1)]
        covered = np.isfinite(sub.max(axis=1))
        wins = np.zeros(problem.n_beams)
        np.add.at(wins, winner[covered], 1.0)
        drop = enabled[int(np.argmin(wins[enabled]))]
        mask = mask.copy()
        mask[drop] = False
    return mask


def solve_ga(problem: SwitchOffProblem, params: GaParams = GaParams(),
             seed: int = 0) -> SolverResult:
    """Binary GA with elitism of one and cardinality repair.

    Deterministic for a fixed (problem, params, seed).
    """
    n = problem.n_beams
    rng = np.random.default_rng(seed)
    p_mut = params.mutation_rate if params.mutation_rate is not None else 1.0 / n
    evaluations = 0

    def evaluate(pop: np.ndarray) -> np.ndarray:
        nonlocal evaluations
        evaluations += len(pop)
        return _objective_batch(problem, pop)

    pop = np.zeros((params.pop_size, n), dtype=bool)
    for i in range(params.pop_size):
        k = int(rng.integers(1, problem.xi + 1))
        pop[i, rng.choice(n, size=min(k, n), replace=False)] = True
    fit = evaluate(pop)

    for _gen in range(params.generations):
        elite = pop[int(np.argmin(fit))].copy()
        # tournament selection
        draws = rng.integers(params.pop_size, size=(params.pop_size, params.tournament_k))
        parents = pop[draws[np.arange(params.pop_size), np.argmin(fit[draws], axis=1)]]
        children = parents.copy()
        for i in range(0, params.pop_size - 1, 2):
            if rng.random() < params.crossover_rate:
                swap = rng.random(n) < 0.5
                a, b = children[i].copy(), children[i + 1].copy()
                children[i, swap], children[i + 1, swap] = b[swap], a[swap]
        flip = rng.random(children.shape) < p_mut
        children ^= flip
        children = np.array([_repair(problem, c, rng) for c in children])
        children[0] = elite
        pop = children
        fit = evaluate(pop)

    best = int(np.argmin(fit))
    return SolverResult(BeamMask(tuple(int(b) for b in pop[best])), float(fit[best]),
                        evaluations, "ga", seed=seed)


# ---------------------------------------------------------------------------
# density-based selection

def _dbscan(points: np.ndarray, eps: float, min_pts: int) -> tuple[np.ndarray, np.ndarray]:
    """Plain DBSCAN: returns (labels, core mask); label -1 marks noise.

    Points are visited in canonical (lexicographic) order so the outcome is
    independent of input ordering.
    """
    order = np.lexsort(points.T[::-1])
    pts = points[order]
    tree = cKDTree(pts)
    neighbors = tree.query_ball_point(pts, r=eps)
    core = np.array([len(nb) >= min_pts for nb in neighbors])
    labels = np.full(len(pts), -1, dtype=int)
    cluster = 0
    for i in range(len(pts)):
        if labels[i] != -1 or not core[i]:
            continue
        labels[i] = cluster
        frontier = [i]
        while frontier:
            j = frontier.pop()
            for k in neighbors[j]:
                if labels[k] == -1:
                    labels[k] = cluster
                    if core[k]:
                        frontier.append(k)
        cluster += 1
    inv = np.empty(len(order), dtype=int)
    inv[order] = np.arange(len(order))
    return labels[inv], core[inv]


def solve_dbscan(problem: SwitchOffProblem, eps: float, min_pts: int,
                 xi: int | None = None, rsrp_weight: float = 0.1) -> SolverResult:
    """Keep the beams that dominate the densest measurement clusters.

    Clusters are found over (x, y, rsrp * rsrp_weight) points of per-burst
    strongest observations; beams are ranked by how many core points they
    win and the top xi are enabled.  Falls back to raw strongest counts when
    no point is dense enough (flagged in ``extras``).
    """
    if eps <= 0:
        raise ValueError("eps must be > 0")
    if min_pts < 1:
        raise ValueError("min_pts must be >= 1")
    xi = problem.xi if xi is None else int(xi)
    feats = problem.points.copy()
    feats[:, 2] *= rsrp_weight
    labels, core = _dbscan(feats, eps, min_pts)
    fallback = not core.any()
    counted = np.ones(len(feats), dtype=bool) if fallback else core
    counts = np.zeros(problem.n_beams)
    np.add.at(counts, problem.point_beam[counted], 1.0)
    ranking = np.lexsort((np.arange(problem.n_beams), -counts))
    mask = np.zeros(problem.n_beams, dtype=bool)
    mask[ranking[:max(1, min(xi, problem.n_beams))]] = True
    obj = objective(problem, mask)
    extras = {
        "n_clusters": int(labels.max() + 1),
        "n_core": int(core.sum()),
        "fallback": bool(fallback),
    }
    return SolverResult(BeamMask(tuple(int(b) for b in mask)), obj, 1, "dbscan", extras=extras)


def problem_to_csv(problem: SwitchOffProblem, path) -> None:
    """Export the per-cell per-beam mean table for external solvers.

    One row per populated cell: cell indices, the all-on best, then one
    column per beam (empty where the beam was never observed in the cell).
    """
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["cell_ix", "cell_iy", "rsrp_max_dbm"]
                   + [str(b) for b in problem.beam_ids])
        for row, flat in enumerate(problem.cell_flat):
            iy, ix = divmod(int(flat), problem.grid.nx)
            means = ["" if not np.isfinite(v) else f"{v:.4f}"
                     for v in problem.table[row]]
            w.writerow([ix, iy, f"{problem.rsrp_max[row]:.4f}"] + means)
