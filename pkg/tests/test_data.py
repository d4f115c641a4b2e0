"""Core data model: construction, validation, losses, CSV round trip."""

import io

import numpy as np
import pytest

from stcv.data import (
    DataError,
    FoldAssignment,
    Location,
    LossValue,
    SpaceTimeDataset,
    build_dataset,
    mse_loss,
    read_dataset_csv,
    write_dataset_csv,
)

from conftest import make_grid_dataset


def _tables(n_loc, n_times, p=2, missing=()):
    locs = [(f"s{i}", (float(i), 0.0)) for i in range(n_loc)]
    times = np.arange(1.0, n_times + 1.0)
    rng = np.random.default_rng(7)
    outcome = {}
    covs = {}
    for i in range(n_loc):
        for j, t in enumerate(times):
            key = (f"s{i}", float(t))
            outcome[key] = None if (i, j) in missing else float(rng.normal())
            covs[key] = rng.normal(size=p)
    return locs, times, outcome, covs


class TestBuildDataset:
    def test_complete_4x3_has_12_cells(self):
        ds = build_dataset(*_tables(4, 3))
        assert ds.n_obs == 12
        assert ds.n_locations == 4
        assert ds.n_times == 3

    def test_duplicate_cell_rejected_naming_key(self):
        locs, times, outcome, covs = _tables(2, 2)
        items = list(outcome.items()) + [(("s0", 1.0), 0.5)]
        with pytest.raises(DataError, match=r"s0.*1\.0"):
            build_dataset(locs, times, items, covs)

    def test_50x10_with_5_missing_has_495_usable(self):
        missing = {(0, 0), (3, 2), (10, 9), (25, 5), (49, 1)}
        ds = build_dataset(*_tables(50, 10, missing=missing))
        assert ds.n_obs == 50 * 10 - 5

    def test_covariate_length_mismatch_rejected(self):
        locs, times, outcome, covs = _tables(2, 2)
        covs[("s1", 2.0)] = np.zeros(5)
        with pytest.raises(DataError, match="length mismatch"):
            build_dataset(locs, times, outcome, covs)

    def test_unknown_location_rejected(self):
        locs, times, outcome, covs = _tables(2, 2)
        outcome[("nowhere", 1.0)] = 0.0
        with pytest.raises(DataError, match="nowhere"):
            build_dataset(locs, times, outcome, covs)


class TestDatasetInvariants:
    def test_needs_two_locations(self):
        with pytest.raises(DataError, match="2 locations"):
            make_grid_dataset(n_locations=1)

    def test_duplicate_ids_rejected(self):
        locs = [Location("a", (0.0, 0.0)), Location("a", (1.0, 0.0))]
        with pytest.raises(DataError, match="duplicate"):
            SpaceTimeDataset(locs, [1.0], np.zeros((2, 1)), np.zeros((2, 1, 1)))

    def test_times_must_increase(self):
        locs = [Location("a", (0.0, 0.0)), Location("b", (1.0, 0.0))]
        with pytest.raises(DataError, match="increasing"):
            SpaceTimeDataset(locs, [2.0, 1.0], np.zeros((2, 2)), np.zeros((2, 2, 1)))

    def test_nonfinite_coords_rejected(self):
        with pytest.raises(DataError, match="non-finite"):
            Location("a", (np.nan, 0.0))

    def test_observed_cell_needs_complete_covariates(self):
        locs = [Location("a", (0.0, 0.0)), Location("b", (1.0, 0.0))]
        X = np.zeros((2, 1, 2))
        X[0, 0, 1] = np.nan
        with pytest.raises(DataError, match="incomplete covariate"):
            SpaceTimeDataset(locs, [1.0], np.zeros((2, 1)), X)

    def test_missing_cell_may_lack_covariates(self):
        locs = [Location("a", (0.0, 0.0)), Location("b", (1.0, 0.0))]
        y = np.array([[np.nan], [1.0]])
        X = np.zeros((2, 1, 2))
        X[0, 0, :] = np.nan
        ds = SpaceTimeDataset(locs, [1.0], y, X)
        assert ds.n_obs == 1

    def test_observation_enumeration_row_major(self):
        ds = make_grid_dataset(n_locations=3, n_times=2, missing=[(1, 0)])
        assert ds.n_obs == 5
        np.testing.assert_array_equal(ds.obs_loc, [0, 0, 1, 2, 2])
        np.testing.assert_array_equal(ds.obs_time, [0, 1, 1, 0, 1])

    def test_accessors_align(self, grid_dataset):
        ds = grid_dataset
        idx = [1, 3]
        np.testing.assert_array_equal(
            ds.obs_y(idx), ds.obs_y()[idx]
        )
        np.testing.assert_array_equal(ds.obs_X(idx), ds.obs_X()[idx])
        np.testing.assert_array_equal(ds.obs_coords(idx), ds.obs_coords()[idx])
        np.testing.assert_array_equal(ds.obs_times(idx), ds.obs_times()[idx])

    def test_subset_locations(self, grid_dataset):
        sub = grid_dataset.subset_locations([0, 2])
        assert sub.n_locations == 2
        assert [l.id for l in sub.locations] == ["s0", "s2"]
        np.testing.assert_array_equal(sub.outcomes, grid_dataset.outcomes[[0, 2]])


class TestLossValue:
    def test_rejects_negative(self):
        with pytest.raises(DataError):
            LossValue(-1.0, 3)

    def test_rejects_zero_count(self):
        with pytest.raises(DataError):
            LossValue(1.0, 0)


class TestFoldAssignment:
    def test_overlapping_folds_rejected(self):
        with pytest.raises(DataError, match="overlaps"):
            FoldAssignment(
                (np.array([0, 1]), np.array([1, 2])),
                (np.array([2]), np.array([0])),
                "observation",
            )

    def test_unknown_unit_rejected(self):
        with pytest.raises(DataError, match="unit"):
            FoldAssignment((np.array([0]),), (np.array([1]),), "week")


class TestMseLoss:
    def test_identity_is_zero(self):
        assert mse_loss([1.0, 2.0], [1.0, 2.0]).value == 0.0

    def test_unit_offsets(self):
        lv = mse_loss([0.0, 0.0], [1.0, 1.0])
        assert lv.value == 1.0
        assert lv.n == 2

    def test_hand_value(self):
        # (1 + 4 + 0) / 3
        assert mse_loss([1, 2, 3], [2, 4, 3]).value == pytest.approx(5.0 / 3.0, abs=1e-15)

    def test_permutation_invariant(self):
        y = np.array([0.3, -1.2, 2.0, 0.7])
        p = np.array([0.1, -1.0, 2.5, 0.0])
        perm = [2, 0, 3, 1]
        assert mse_loss(y, p).value == pytest.approx(mse_loss(y[perm], p[perm]).value)

    def test_constant_shift(self):
        y = np.array([1.0, -2.0, 0.5])
        assert mse_loss(y, y + 3.0).value == pytest.approx(9.0)

    def test_length_mismatch(self):
        with pytest.raises(DataError):
            mse_loss([1.0], [1.0, 2.0])

    def test_nonfinite_rejected(self):
        with pytest.raises(DataError):
            mse_loss([np.nan], [1.0])


class TestCsvRoundTrip:
    def test_lossless_round_trip(self):
        ds = make_grid_dataset(n_locations=5, n_times=4, p=3, missing=[(2, 1), (0, 3)])
        buf = io.StringIO()
        write_dataset_csv(ds, buf)
        buf.seek(0)
        back, names = read_dataset_csv(buf)
        assert names == ["x1", "x2", "x3"]
        np.testing.assert_array_equal(back.times, ds.times)
        np.testing.assert_array_equal(back.outcomes, ds.outcomes)
        np.testing.assert_array_equal(back.covariates, ds.covariates)
        np.testing.assert_array_equal(back.coords, ds.coords)

    def test_round_trip_bit_exact_rewrite(self):
        ds = make_grid_dataset(n_locations=3, n_times=3, seed=5)
        buf = io.StringIO()
        write_dataset_csv(ds, buf)
        first = buf.getvalue()
        back, _ = read_dataset_csv(io.StringIO(first))
        buf2 = io.StringIO()
        write_dataset_csv(back, buf2)
        assert buf2.getvalue() == first

    def test_missing_outcome_written_empty(self):
        ds = make_grid_dataset(n_locations=2, n_times=1, missing=[(0, 0)])
        buf = io.StringIO()
        write_dataset_csv(ds, buf)
        lines = buf.getvalue().splitlines()
        assert lines[1].split(",")[4] == ""

    def test_bad_header_rejected(self):
        with pytest.raises(DataError, match="header"):
            read_dataset_csv(io.StringIO("a,b,c\n1,2,3\n"))

    def test_malformed_row_reports_line(self):
        ds = make_grid_dataset(n_locations=2, n_times=1)
        buf = io.StringIO()
        write_dataset_csv(ds, buf)
        text = buf.getvalue().splitlines()
        text[2] = text[2].replace(",", ",bad", 1)
        joined = "\n".join(text) + "\n"
        with pytest.raises(DataError, match="line 3"):
            read_dataset_csv(io.StringIO(joined))

    def test_conflicting_coordinates_rejected(self):
        rows = [
            "location_id,x_coord,y_coord,time,y,x1",
            "a,0,0,1,1.0,0.5",
            "a,0,1,2,1.0,0.5",
        ]
        with pytest.raises(DataError, match="conflicting"):
            read_dataset_csv(io.StringIO("\n".join(rows) + "\n"))

    def test_wrong_covariate_name_count(self):
        ds = make_grid_dataset(p=2)
        with pytest.raises(DataError, match="covariate names"):
            write_dataset_csv(ds, io.StringIO(), covariate_names=["only_one"])
