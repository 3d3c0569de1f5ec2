import math
from itertools import combinations

import numpy as np
import pytest

from beamfactory.beams import SsbId
from beamfactory.layout import GridSpec
from beamfactory.switchoff import (BeamMask, GaParams, SwitchOffProblem, build_problem,
                                   objective, solve_dbscan, solve_exhaustive, solve_ga)
from conftest import make_trace

B34, B35, B36 = SsbId("B", 3, 4), SsbId("B", 3, 5), SsbId("B", 3, 6)


def toy_problem(table, xi, points=None, point_beam=None, floor=-120.0):
    """Problem built straight from a per-cell per-beam mean table."""
    table = np.asarray(table, dtype=float)
    table = np.where(np.isnan(table), -np.inf, table)
    n_cells, n_beams = table.shape
    if points is None:
        points = np.zeros((n_cells, 3))
        point_beam = np.argmax(table, axis=1)
    return SwitchOffProblem(
        grid=GridSpec((0.0, 0.0), 1.0, 1.0, n_cells, 1),
        beam_ids=tuple(range(n_beams)),
        table=table,
        rsrp_max=table.max(axis=1),
        cell_flat=np.arange(n_cells),
        xi=xi,
        points=np.asarray(points, dtype=float),
        point_beam=np.asarray(point_beam, dtype=int),
        penalty_floor=floor,
    )


class TestBuildProblem:
    def test_single_cell_max(self):
        trace = make_trace("B", [(0.5, 0.5)] * 2,
                           [{B34: -60.0, B35: -70.0}] * 2)
        problem = build_problem(trace, GridSpec((0.0, 0.0), 1.0, 1.0, 1, 1), xi=1)
        assert problem.rsrp_max[0] == pytest.approx(-60.0)
        assert problem.n_cells == 1

    def test_populated_cell_count(self):
        trace = make_trace("B", [(0.5, 0.5), (1.5, 0.5), (2.5, 0.5)],
                           [{B34: -60.0}, {B34: -65.0}, {B35: -70.0}])
        problem = build_problem(trace, GridSpec((0.0, 0.0), 1.0, 1.0, 5, 1), xi=2)
        assert problem.n_cells == 3

    def test_per_beam_db_means(self):
        trace = make_trace("B", [(0.5, 0.5)] * 2,
                           [{B34: -60.0}, {B34: -70.0}])
        problem = build_problem(trace, GridSpec((0.0, 0.0), 1.0, 1.0, 1, 1), xi=1)
        col = problem.beam_ids.index(B34)
        assert problem.table[0, col] == pytest.approx(-65.0)

    def test_xi_validation(self):
        trace = make_trace("B", [(0.5, 0.5)], [{B34: -60.0}])
        with pytest.raises(ValueError):
            build_problem(trace, GridSpec((0.0, 0.0), 1.0, 1.0, 1, 1), xi=0)

    def test_trace_without_detections_rejected(self):
        trace = make_trace("B", [(0.5, 0.5)], [{}])
        with pytest.raises(ValueError):
            build_problem(trace, GridSpec((0.0, 0.0), 1.0, 1.0, 1, 1), xi=1)


class TestObjective:
    def test_all_on_is_exactly_zero(self):
        problem = toy_problem([[-60.0, -70.0], [-80.0, -72.5]], xi=2)
        assert objective(problem, BeamMask.all_on(2)) == 0.0

    def test_disable_stronger_beam(self):
        problem = toy_problem([[-60.0, -70.0]], xi=1)
        assert objective(problem, (0, 1)) == pytest.approx(10.0, abs=1e-12)

    def test_mean_over_cells(self):
        problem = toy_problem([[-60.0, -70.0], [-75.0, -75.0]], xi=1)
        assert objective(problem, (0, 1)) == pytest.approx(5.0, abs=1e-12)

    def test_all_zero_mask_rejected(self):
        problem = toy_problem([[-60.0, -70.0]], xi=1)
        with pytest.raises(ValueError):
            objective(problem, (0, 0))

    def test_uncovered_cell_penalty(self):
        problem = toy_problem([[-60.0, np.nan], [np.nan, -70.0]], xi=1, floor=-120.0)
        # beam 0 on: cell 1 saw only beam 1 -> charged down to the floor
        expected = (0.0 + (-70.0 - (-120.0))) / 2.0
        assert objective(problem, (1, 0)) == pytest.approx(expected, abs=1e-12)

    def test_nonnegative_for_all_masks(self):
        rng = np.random.default_rng(1)
        problem = toy_problem(rng.uniform(-100, -60, size=(6, 5)), xi=5)
        for bits in combinations(range(5), 2):
            assert objective(problem, BeamMask.from_enabled(5, bits)) >= 0.0


class TestExhaustive:
    def test_matches_manual_enumeration(self):
        rng = np.random.default_rng(3)
        table = rng.uniform(-100, -60, size=(5, 4))
        table[2, 1] = -np.inf
        problem = toy_problem(table, xi=2)
        result = solve_exhaustive(problem)
        # independent brute force in plain python
        best = math.inf
        for k in (1, 2):
            for idx in combinations(range(4), k):
                degr = []
                for c in range(5):
                    enabled = [table[c, j] for j in idx if np.isfinite(table[c, j])]
                    top = max(enabled) if enabled else -120.0
                    degr.append(max(table[c]) - top)
                best = min(best, sum(degr) / len(degr))
        assert result.objective == pytest.approx(best, abs=1e-12)
        assert result.evaluations == math.comb(4, 1) + math.comb(4, 2)

    def test_xi_at_least_beam_count_gives_all_on(self):
        problem = toy_problem([[-60.0, -70.0, -65.0]], xi=3)
        result = solve_exhaustive(problem)
        assert result.mask.bits == (1, 1, 1)
        assert result.objective == 0.0

    def test_evaluation_count_27_beams(self):
        rng = np.random.default_rng(0)
        problem = toy_problem(rng.uniform(-100, -60, size=(10, 27)), xi=3)
        result = solve_exhaustive(problem)
        expected = math.comb(27, 3) + math.comb(27, 2) + math.comb(27, 1)
        assert result.evaluations == expected

    def test_guard(self):
        rng = np.random.default_rng(0)
        problem = toy_problem(rng.uniform(-100, -60, size=(4, 27)), xi=13)
        with pytest.raises(ValueError, match="guard"):
            solve_exhaustive(problem)

    def test_feasibility(self):
        rng = np.random.default_rng(2)
        problem = toy_problem(rng.uniform(-100, -60, size=(8, 9)), xi=3)
        result = solve_exhaustive(problem)
        assert 1 <= result.mask.popcount <= 3


class TestGa:
    def problem(self, xi=3, n_beams=10, n_cells=40, seed=0):
        rng = np.random.default_rng(seed)
        return toy_problem(rng.uniform(-100, -60, size=(n_cells, n_beams)), xi=xi)

    def test_deterministic(self):
        problem = self.problem()
        a = solve_ga(problem, seed=5)
        b = solve_ga(problem, seed=5)
        assert a.mask == b.mask and a.objective == b.objective
        assert a.evaluations == b.evaluations

    def test_finds_optimum_on_small_problem(self):
        problem = self.problem(xi=2, n_beams=8)
        oracle = solve_exhaustive(problem)
        for seed in range(5):
            assert solve_ga(problem, seed=seed).objective == pytest.approx(
                oracle.objective, abs=1e-12)

    def test_xi_equal_beam_count_converges_to_all_on(self):
        problem = self.problem(xi=6, n_beams=6)
        result = solve_ga(problem, seed=1)
        assert result.objective == 0.0

    def test_feasible_output(self):
        problem = self.problem(xi=3)
        result = solve_ga(problem, seed=2)
        assert result.mask.feasible(problem.xi)

    def test_monotone_in_xi_via_oracle(self):
        rng = np.random.default_rng(11)
        table = rng.uniform(-100, -60, size=(30, 12))
        opt3 = solve_exhaustive(toy_problem(table, xi=3)).objective
        opt5 = solve_exhaustive(toy_problem(table, xi=5)).objective
        assert opt5 <= opt3

    def test_params_validation(self):
        with pytest.raises(ValueError):
            GaParams(pop_size=1)
        with pytest.raises(ValueError):
            GaParams(crossover_rate=1.5)


class TestDbscan:
    def test_two_groups_two_beams(self):
        rng = np.random.default_rng(4)
        g1 = rng.normal((0.0, 0.0), 0.3, size=(20, 2))
        g2 = rng.normal((100.0, 100.0), 0.3, size=(20, 2))
        points = np.vstack([np.column_stack([g1, np.full(20, -70.0)]),
                            np.column_stack([g2, np.full(20, -75.0)])])
        point_beam = np.array([0] * 20 + [1] * 20)
        table = np.array([[-70.0, -100.0], [-100.0, -75.0]])
        problem = toy_problem(table, xi=2, points=points, point_beam=point_beam)
        result = solve_dbscan(problem, eps=2.0, min_pts=4, xi=2)
        assert result.extras["n_clusters"] == 2
        assert result.mask.bits == (1, 1)
        assert not result.extras["fallback"]

    def test_isolated_point_is_noise(self):
        rng = np.random.default_rng(6)
        dense = np.column_stack([rng.normal(0, 0.2, size=(30, 2)),
                                 np.full(30, -70.0)])
        lone = np.array([[50.0, 50.0, -60.0]])
        points = np.vstack([dense, lone])
        point_beam = np.array([0] * 30 + [1])
        table = np.array([[-70.0, -60.0]])
        problem = toy_problem(table, xi=1, points=points, point_beam=point_beam)
        result = solve_dbscan(problem, eps=2.0, min_pts=4, xi=1)
        # the lone point is noise: beam 1 collects no core points
        assert result.mask.bits == (1, 0)

    def test_order_invariance(self):
        rng = np.random.default_rng(7)
        points = np.column_stack([rng.uniform(0, 10, size=(60, 2)),
                                  rng.uniform(-90, -60, 60)])
        point_beam = rng.integers(0, 3, size=60)
        table = rng.uniform(-90, -60, size=(5, 3))
        problem = toy_problem(table, xi=2, points=points, point_beam=point_beam)
        resa = solve_dbscan(problem, eps=3.0, min_pts=3, xi=2)
        perm = rng.permutation(60)
        shuffled = toy_problem(table, xi=2, points=points[perm],
                               point_beam=point_beam[perm])
        resb = solve_dbscan(shuffled, eps=3.0, min_pts=3, xi=2)
        assert resa.mask == resb.mask
        assert resa.extras["n_clusters"] == resb.extras["n_clusters"]

    def test_fallback_without_core_points(self):
        rng = np.random.default_rng(8)
        points = np.column_stack([rng.uniform(0, 1000, size=(10, 2)),
                                  np.full(10, -70.0)])
        point_beam = np.array([0] * 7 + [1] * 3)
        table = np.array([[-70.0, -71.0]])
        problem = toy_problem(table, xi=1, points=points, point_beam=point_beam)
        result = solve_dbscan(problem, eps=0.5, min_pts=4, xi=1)
        assert result.extras["fallback"]
        assert result.mask.bits == (1, 0)  # raw strongest-count ranking

    def test_parameter_validation(self):
        problem = toy_problem([[-60.0, -70.0]], xi=1)
        with pytest.raises(ValueError):
            solve_dbscan(problem, eps=0.0, min_pts=3)
        with pytest.raises(ValueError):
            solve_dbscan(problem, eps=1.0, min_pts=0)


class TestBeamMask:
    def test_bits_validated(self):
        with pytest.raises(ValueError):
            BeamMask((0, 2, 1))

    def test_popcount_and_feasibility(self):
        mask = BeamMask.from_enabled(5, [0, 3])
        assert mask.popcount == 2
        assert mask.feasible(2) and not mask.feasible(1)

    def test_all_on(self):
        assert BeamMask.all_on(3).bits == (1, 1, 1)


class TestProblemExport:
    def test_csv_round_readable(self, tmp_path):
        from beamfactory.switchoff import problem_to_csv
        trace = make_trace("B", [(0.5, 0.5), (1.5, 0.5)],
                           [{B34: -60.0, B35: -70.0}, {B35: -72.0}])
        problem = build_problem(trace, GridSpec((0.0, 0.0), 1.0, 1.0, 2, 1), xi=1)
        path = tmp_path / "problem.csv"
        problem_to_csv(problem, path)
        lines = path.read_text().splitlines()
        assert lines[0].startswith("cell_ix,cell_iy,rsrp_max_dbm,B-1-1,")
        assert len(lines) == 1 + problem.n_cells
        first = lines[1].split(",")
        assert first[0] == "0" and first[1] == "0"
        assert float(first[2]) == pytest.approx(-60.0)
