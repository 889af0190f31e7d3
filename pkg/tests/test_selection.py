import math

import numpy as np
import pytest

from conftest import make_model
from doublevq import selection
from doublevq.selection import SweepError, SweepGrid, SweepResult
from doublevq.series import LagSpec, TimeSeries, split_counts
from doublevq.som import SomConfig


@pytest.mark.parametrize("pred,actual,expected", [([1, 2], [1, 3], 1.0), ([4, 5], [4, 5], 0.0),
                                                  ([0, 0, 0], [1, 2, 3], 14.0)])
def test_sse_examples(pred, actual, expected):
    assert selection.sse(pred, actual) == expected


def test_sse_length_mismatch():
    with pytest.raises(ValueError):
        selection.sse([1.0], [1.0, 2.0])


class TestValidationScore:
    def test_exact_model_scores_zero(self):
        # one cluster, one deformation (+1, +1): reproduces a unit ramp
        model = make_model([[0.0, 0.0]], [[1.0, 1.0]], [[1]])
        score = selection.validation_score(model, [1.0, 2.0], [3.0, 4.0, 5.0], n_paths=10)
        assert score == 0.0

    def test_zero_deformation_on_constant(self):
        model = make_model([[0.0, 0.0]], [[0.0, 0.0]], [[1]])
        assert selection.validation_score(model, [7.0, 7.0], [7.0] * 12, n_paths=5) == 0.0

    @pytest.mark.parametrize("h", [1, 5, 30])
    def test_ramp_closed_form(self, h):
        c = 2.0
        model = make_model([[0.0, 0.0]], [[0.0, 0.0]], [[1]])
        truth = c + np.arange(1, h + 1)
        score = selection.validation_score(model, [c, c], truth, horizon=h, n_paths=3)
        assert score == h * (h + 1) * (2 * h + 1) / 6

    def test_horizon_longer_than_segment(self):
        model = make_model([[0.0, 0.0]], [[0.0, 0.0]], [[1]])
        with pytest.raises(ValueError):
            selection.validation_score(model, [1.0, 1.0], [1.0, 1.0], horizon=3)


def alt_splits():
    x = TimeSeries(np.arange(400) % 2)
    return split_counts(x, (300, 100))


class TestSweep:
    def test_single_cell(self):
        learn, valid = alt_splits()
        res = selection.sweep(learn, valid, LagSpec(1, (0, 1)), SweepGrid((1,), (1,), 10, 5),
                              SomConfig(1))
        assert res.sse_surface.shape == (1, 1) and res.best == (1, 1)

    def test_alternating_selects_two_by_two(self):
        learn, valid = alt_splits()
        res = selection.sweep(learn, valid, LagSpec(1, (0, 1)),
                              SweepGrid((2, 4), (2, 4), 20, 10), SomConfig(1))
        assert res.sse_surface[0, 0] == 0.0
        assert res.best == (2, 2)
        assert np.all(np.isfinite(res.sse_surface))

    def test_jobs_and_repeats_identical(self):
        learn, valid = split_counts(TimeSeries(np.sin(np.arange(500) / 4)), (350, 150))
        grid = SweepGrid((2, 5), (3, 6), 20, 20)
        runs = [selection.sweep(learn, valid, LagSpec(1, (0, 1, 2)), grid, SomConfig(1),
                                seed=3, jobs=j) for j in (1, 1, 4)]
        assert runs[0].to_csv() == runs[1].to_csv() == runs[2].to_csv()

    def test_failed_cells_are_recorded(self):
        learn, valid = alt_splits()
        # validation horizon too long for the segment: every cell fails
        with pytest.raises(SweepError):
            selection.sweep(learn, valid, LagSpec(1, (0, 1)), SweepGrid((1,), (1,), 500, 5),
                            SomConfig(1))

    def test_partial_failure_keeps_surface(self):
        grid = SweepGrid((1, 2), (1,))
        surface = np.array([[math.inf], [3.0]])
        res = SweepResult(grid, surface, [["failed: boom"], ["ok"]])
        assert res.best == (2, 1)
        assert "failed: boom" in res.to_csv()

    def test_refit_is_deterministic(self):
        learn, valid = alt_splits()
        spec = LagSpec(1, (0, 1))
        a = selection.refit_best(learn, valid, spec, (2, 2), SomConfig(1), seed=5)
        b = selection.refit_best(learn, valid, spec, (2, 2), SomConfig(1), seed=5)
        assert a.dumps() == b.dumps()
        assert a.transition.counts.sum() == 400 - 2


class TestTieBreak:
    def test_prefers_smaller_total_then_smaller_n1(self):
        grid = SweepGrid((1, 2, 3), (1, 2, 3))
        surface = np.full((3, 3), 5.0)
        surface[2, 0] = surface[0, 2] = surface[1, 1] = 1.0
        res = SweepResult(grid, surface, [["ok"] * 3] * 3)
        assert res.best == (1, 3)
        assert res.best_sse == 1.0


class TestGridParsing:
    def test_range_with_step(self):
        values = selection.parse_range("5:200:5")
        assert len(values) == 40 and values[0] == 5 and values[-1] == 200

    def test_list_and_single(self):
        assert selection.parse_range("2,4,8") == [2, 4, 8]
        assert selection.parse_range("7") == [7]

    @pytest.mark.parametrize("bad", ["5:1", "1:5:0", "1:2:3:4"])
    def test_bad_ranges(self, bad):
        with pytest.raises(ValueError):
            selection.parse_range(bad)

    def test_grid_validation(self):
        with pytest.raises(ValueError):
            SweepGrid((), (1,))
        with pytest.raises(ValueError):
            SweepGrid((0,), (1,))

    def test_full_scale_grid_accepted(self):
        axis = selection.parse_range("1:200")
        grid = SweepGrid(axis, axis)
        assert len(grid.n1_values) * len(grid.n2_values) == 40_000
