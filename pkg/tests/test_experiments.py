import json
from dataclasses import replace

import numpy as np
import pytest

from topoeffect.exceptions import PositivityError, TopoEffectError
from topoeffect.experiments import (
    ExperimentConfig,
    emit_figure1_data,
    run_delta_sweep,
    run_noncommutation_demo,
    run_table1,
    sweep_to_csv,
    sweep_to_json,
)
from topoeffect.filtrations import GridSpec
from topoeffect.landscapes import LandscapeConfig
from topoeffect.synthgen import Design2D

SMALL = ExperimentConfig(deltas=(0.0, 0.6, 1.2), n_per_arm=40, n_total=200, n_reps=4,
                         n_big=200, n_truth_reps=3, seed=11)


class TestConfig:
    def test_defaults(self):
        c = ExperimentConfig()
        assert c.deltas == (0.0, 0.2, 0.4, 0.6, 0.8, 1.0, 1.2)
        assert (c.n_per_arm, c.n_total, c.n_reps, c.n_big, c.n_truth_reps) == (200, 600, 50, 5000, 20)

    @pytest.mark.parametrize("kw", [{"n_reps": 0}, {"deltas": (-0.1,)}, {"jobs": 0}])
    def test_invalid(self, kw):
        with pytest.raises(TopoEffectError):
            ExperimentConfig(**kw)


class TestSweep:
    @pytest.fixture(scope="class")
    @staticmethod
    def rows():
        return run_delta_sweep(SMALL)

    def test_one_row_per_delta_in_order(self, rows):
        assert [r.delta for r in rows] == [0.0, 0.6, 1.2]
        assert all(r.n_reps == 4 and r.topo_sd >= 0 and r.mean_effect_sd >= 0 for r in rows)

    def test_topological_effect_rises(self, rows):
        assert rows[-1].topo_mean > 3 * rows[0].topo_mean

    def test_csv_layout(self, rows):
        lines = sweep_to_csv(rows).splitlines()
        assert lines[0] == "delta,topo_mean,topo_sd,topo_se,mean_effect_mean,mean_effect_sd,mean_effect_se,n_reps"
        assert len(lines) == 4
        assert lines[1].split(",")[0] == "0.0000"
        r = rows[1]
        assert r.topo_se == pytest.approx(r.topo_sd / 2)

    def test_json(self, rows):
        data = json.loads(sweep_to_json(rows))
        assert [d["delta"] for d in data] == [0.0, 0.6, 1.2]

    def test_deterministic(self, rows):
        assert sweep_to_csv(run_delta_sweep(SMALL)) == sweep_to_csv(rows)

    def test_parallel_matches_sequential(self, rows):
        assert sweep_to_csv(run_delta_sweep(replace(SMALL, jobs=2))) == sweep_to_csv(rows)

    def test_frozen_grid_is_respected(self):
        cfg = replace(SMALL, deltas=(1.0,), n_reps=2, lcfg=LandscapeConfig(2, GridSpec(0, 1, 32)))
        assert len(run_delta_sweep(cfg)) == 1


class TestTable1:
    @pytest.fixture(scope="class")
    @staticmethod
    def report():
        return run_table1(SMALL)

    def test_five_rows(self, report):
        lines = report.to_csv().splitlines()
        assert lines[0] == "quantity,mean,sd"
        assert [l.split(",")[0] for l in lines[1:]] == [
            "Unadjusted mean contrast", "Adjusted mean ATE", "Unadjusted topological contrast",
            "Adjusted topological effect", "Ground-truth topological effect"]

    def test_replications_and_json(self, report):
        assert all(len(v) == 4 for v in report.replications.values())
        data = json.loads(report.to_json())
        assert data["unadjusted_mean"]["mean"] == pytest.approx(np.mean(report.replications["unadjusted_mean"]))
        assert data["supplementary"]["tate_hat"]["metric"] == "wasserstein:2"

    def test_unbiased_sd(self, report):
        v = report.replications["adjusted_topo"]
        assert report.adjusted_topo[1] == pytest.approx(np.std(v, ddof=1))

    def test_parallel_matches_sequential(self, report):
        assert run_table1(replace(SMALL, jobs=2)).to_json() == report.to_json()

    def test_positivity_error_names_replication(self):
        cfg = replace(SMALL, n_total=6, n_reps=3, lcfg=LandscapeConfig(3, GridSpec(0, 1, 16)))
        with pytest.raises(PositivityError) as info:
            run_table1(cfg)
        assert info.value.replication is not None
        assert "replication" in str(info.value)


class TestFigure1:
    def test_curves_and_diagrams(self):
        data = emit_figure1_data(grid=GridSpec(-4, 4, 401), n_samples=2000)
        i0 = int(np.argmin(np.abs(data.y)))
        assert data.control_density[i0] == pytest.approx(0.5699, abs=1e-4)
        np.testing.assert_allclose(data.treated_density, data.treated_density[::-1], atol=1e-15)
        assert len(data.diagrams["treated"]) == 1
        assert data.diagrams["treated"].persistence[0] > 0.2
        # the unimodal control can only show sampling ripples in its tails
        assert np.all(data.diagrams["control"].persistence < 0.01)
        assert data.curves_csv().splitlines()[0] == "y,control_density,treated_density"
        rows = data.diagrams_csv().splitlines()
        assert rows[0] == "arm,birth,death"
        assert sum(r.startswith("treated,") for r in rows) == 1


class TestNoncommutation:
    def test_gap_and_collapse(self):
        report = run_noncommutation_demo(replace(SMALL, n_reps=6), n_per_cell=150)
        assert report["design"]["mean_landscape_gap"] > 0.1
        assert report["identical_strata"]["mean_landscape_gap"] < report["design"]["mean_landscape_gap"] / 10
        assert report["identical_strata"]["m0"] == report["identical_strata"]["m1"]

    def test_deterministic(self):
        cfg = replace(SMALL, n_reps=2)
        assert run_noncommutation_demo(cfg, 60) == run_noncommutation_demo(cfg, 60)


def test_design_override():
    rows = run_delta_sweep(replace(SMALL, design=Design2D(sigma=0.3), deltas=(0.0,), n_reps=2))
    assert rows[0].delta == 0.0
