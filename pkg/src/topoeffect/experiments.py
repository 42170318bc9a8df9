"""Monte Carlo experiments: the separation sweep, the confounded comparison,
the motivating 1-D densities and the mixture (non-commutation) demo.

Every replication draws from its own random stream, ``SeededRng(seed)``
followed by a fixed experiment tag and the replication index, so results do not
depend on how replications are scheduled across worker processes.
"""
import csv
import io
import json
import math
from concurrent.futures import ProcessPoolExecutor
from contextlib import contextmanager
from dataclasses import dataclass, field

import numpy as np

from .diagrams import DiagramMetric
from .estimands import (
    adjusted_topological_effect,
    cell_diagrams,
    marginal_noncommutation_diagnostic,
    mean_effects,
    pooled_diagrams,
    stratum_summaries,
    tate_hat,
    unadjusted_topological_contrast,
)
from .exceptions import PositivityError, TopoEffectError
from .filtrations import GridSpec, SummaryConfig, density_superlevel_diagram_1d, summarize
from .landscapes import LandscapeConfig, average_landscapes, freeze_grid, landscape, weighted_l2_norm
from .synthgen import (
    FIG1_CONTROL,
    FIG1_TREATED,
    Design2D,
    SeededRng,
    draw_motivating_1d,
    draw_observational_2d,
    draw_stratified_2d,
    ground_truth_topological_effect,
    mixture_density_1d,
)

__all__ = [
    "DEFAULT_DELTAS",
    "ExperimentConfig",
    "SweepRow",
    "Table1Report",
    "run_delta_sweep",
    "sweep_to_csv",
    "sweep_to_json",
    "run_table1",
    "emit_figure1_data",
    "run_noncommutation_demo",
]

DEFAULT_DELTAS = (0.0, 0.2, 0.4, 0.6, 0.8, 1.0, 1.2)

# stream tags, one per experiment role
_PILOT, _SWEEP, _TABLE1, _TRUTH, _NONCOMMUTE, _FIG1 = range(6)


@dataclass(frozen=True)
class ExperimentConfig:
    design: Design2D = field(default_factory=Design2D)
    deltas: tuple = DEFAULT_DELTAS
    n_per_arm: int = 200
    n_total: int = 600
    n_reps: int = 50
    seed: int = 20240601
    summary: SummaryConfig = field(default_factory=SummaryConfig)
    lcfg: LandscapeConfig = field(default_factory=LandscapeConfig)
    metric: DiagramMetric = field(default_factory=DiagramMetric)
    n_big: int = 5000
    n_truth_reps: int = 20
    jobs: int = 1

    def __post_init__(self):
        for name in ("n_per_arm", "n_total", "n_reps", "n_big", "n_truth_reps", "jobs"):
            if int(getattr(self, name)) < 1:
                raise TopoEffectError(f"{name} must be >= 1")
        if any(d < 0 for d in self.deltas):
            raise TopoEffectError("deltas must be >= 0")
        object.__setattr__(self, "deltas", tuple(float(d) for d in self.deltas))

    @property
    def rng(self):
        return SeededRng(self.seed)


@contextmanager
def _executor(jobs):
    if jobs <= 1:
        yield None
    else:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            yield pool


def _map(executor, fn, argsets):
    if executor is None:
        return [fn(*a) for a in argsets]
    return list(executor.map(fn, *zip(*argsets)))


def _mean_sd(values):
    v = np.asarray(values, dtype=float)
    sd = float(np.std(v, ddof=1)) if v.size > 1 else 0.0
    return float(v.mean()), sd


def _fmt(x):
    return f"{x:.4f}"


@dataclass(frozen=True)
class SweepRow:
    delta: float
    topo_mean: float
    topo_sd: float
    mean_effect_mean: float
    mean_effect_sd: float
    n_reps: int

    @property
    def topo_se(self):
        return self.topo_sd / math.sqrt(self.n_reps)

    @property
    def mean_effect_se(self):
        return self.mean_effect_sd / math.sqrt(self.n_reps)


def _sweep_replication(design, n_per_arm, rng, summary, lcfg):
    sample = draw_stratified_2d(design, n_per_arm, rng)
    topo = adjusted_topological_effect(stratum_summaries(sample, summary, lcfg)).value
    return topo, mean_effects(sample)[1]


def _sweep_grid(config):
    if config.lcfg.frozen:
        return config.lcfg
    pilot = config.design.replace(delta=max(config.deltas))
    sample = draw_stratified_2d(pilot, config.n_per_arm, config.rng.child(_PILOT, _SWEEP))
    diagrams = cell_diagrams(sample, config.summary).values()
    return config.lcfg.with_grid(freeze_grid(diagrams, config.lcfg.n_nodes, config.lcfg.grid_scale))


def run_delta_sweep(config=None):
    """Adjusted topological and mean effects across cluster separations, without confounding.

    Each replication draws ``n_per_arm`` points per arm in each stratum. One
    landscape grid, frozen from a pilot draw at the largest separation, is
    shared by every replication at every separation.
    """
    config = config or ExperimentConfig()
    lcfg = _sweep_grid(config)
    rows = []
    with _executor(config.jobs) as pool:
        for i, delta in enumerate(config.deltas):
            design = config.design.replace(delta=delta)
            args = [(design, config.n_per_arm, config.rng.child(_SWEEP, i, r), config.summary, lcfg)
                    for r in range(config.n_reps)]
            results = np.array(_map(pool, _sweep_replication, args))
            topo_mean, topo_sd = _mean_sd(results[:, 0])
            mean_mean, mean_sd = _mean_sd(results[:, 1])
            rows.append(SweepRow(delta, topo_mean, topo_sd, mean_mean, mean_sd, config.n_reps))
    return rows


_SWEEP_HEADER = ["delta", "topo_mean", "topo_sd", "topo_se",
                 "mean_effect_mean", "mean_effect_sd", "mean_effect_se", "n_reps"]


def sweep_to_csv(rows):
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(_SWEEP_HEADER)
    for r in rows:
        writer.writerow([_fmt(r.delta), _fmt(r.topo_mean), _fmt(r.topo_sd), _fmt(r.topo_se),
                         _fmt(r.mean_effect_mean), _fmt(r.mean_effect_sd), _fmt(r.mean_effect_se),
                         r.n_reps])
    return buf.getvalue()


def sweep_to_json(rows):
    return json.dumps([{k: getattr(r, k) for k in _SWEEP_HEADER} for r in rows], indent=2)


@dataclass(frozen=True, eq=False)
class Table1Report:
    """Five (mean, sd) rows mirroring the confounded comparison, plus per-replication values."""

    unadjusted_mean: tuple
    adjusted_mean_ate: tuple
    unadjusted_topo: tuple
    adjusted_topo: tuple
    ground_truth_topo: tuple
    replications: dict
    tate_hat: tuple
    metric: str
    grid: GridSpec

    ROWS = (
        ("unadjusted_mean", "Unadjusted mean contrast"),
        ("adjusted_mean_ate", "Adjusted mean ATE"),
        ("unadjusted_topo", "Unadjusted topological contrast"),
        ("adjusted_topo", "Adjusted topological effect"),
        ("ground_truth_topo", "Ground-truth topological effect"),
    )

    def to_csv(self):
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(["quantity", "mean", "sd"])
        for key, label in self.ROWS:
            mean, sd = getattr(self, key)
            writer.writerow([label, _fmt(mean), _fmt(sd)])
        return buf.getvalue()

    def to_dict(self):
        out = {key: {"label": label, "mean": getattr(self, key)[0], "sd": getattr(self, key)[1]}
               for key, label in self.ROWS}
        out["supplementary"] = {
            "tate_hat": {"metric": self.metric, "mean": self.tate_hat[0], "sd": self.tate_hat[1]},
            "landscape_grid": str(self.grid),
        }
        out["replications"] = {k: [float(x) for x in v] for k, v in self.replications.items()}
        return out

    def to_json(self):
        return json.dumps(self.to_dict(), indent=2)


def _table1_replication(design, n_total, rng, summary, lcfg, metric, index):
    sample = draw_observational_2d(design, n_total, rng)
    try:
        summaries = stratum_summaries(sample, summary, lcfg)
        unadjusted_topo = unadjusted_topological_contrast(sample, summary, lcfg).value
    except PositivityError as err:
        raise PositivityError(err.t, err.z, err.count, err.minimum, replication=index) from None
    unadjusted_mean, adjusted_mean = mean_effects(sample)
    return (unadjusted_mean, adjusted_mean, unadjusted_topo,
            adjusted_topological_effect(summaries).value, tate_hat(summaries, metric).value)


def _table1_grid(config):
    if config.lcfg.frozen:
        return config.lcfg
    sample = draw_observational_2d(config.design, config.n_total, config.rng.child(_PILOT, _TABLE1))
    diagrams = [*cell_diagrams(sample, config.summary).values(),
                *pooled_diagrams(sample, config.summary).values()]
    return config.lcfg.with_grid(freeze_grid(diagrams, config.lcfg.n_nodes, config.lcfg.grid_scale))


def run_table1(config=None):
    """Confounded observational comparison at ``config.design`` (default delta = 1).

    The landscape grid is frozen from one pilot observational draw (cell and
    pooled diagrams) and shared by all replications and by the benchmark.
    """
    config = config or ExperimentConfig()
    lcfg = _table1_grid(config)
    args = [(config.design, config.n_total, config.rng.child(_TABLE1, r), config.summary,
             lcfg, config.metric, r) for r in range(config.n_reps)]
    with _executor(config.jobs) as pool:
        results = np.array(_map(pool, _table1_replication, args))
        truth = ground_truth_topological_effect(
            config.design, config.n_big, config.rng.child(_TRUTH), config.summary, lcfg,
            config.n_truth_reps, executor=pool,
        )
    names = ("unadjusted_mean", "adjusted_mean_ate", "unadjusted_topo", "adjusted_topo", "tate_hat")
    reps = {name: results[:, j] for j, name in enumerate(names)}
    return Table1Report(
        unadjusted_mean=_mean_sd(reps["unadjusted_mean"]),
        adjusted_mean_ate=_mean_sd(reps["adjusted_mean_ate"]),
        unadjusted_topo=_mean_sd(reps["unadjusted_topo"]),
        adjusted_topo=_mean_sd(reps["adjusted_topo"]),
        ground_truth_topo=truth,
        replications=reps,
        tate_hat=_mean_sd(reps["tate_hat"]),
        metric=str(config.metric),
        grid=lcfg.grid,
    )


@dataclass(frozen=True, eq=False)
class Figure1Data:
    y: np.ndarray
    control_density: np.ndarray
    treated_density: np.ndarray
    diagrams: dict

    def curves_csv(self):
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(["y", "control_density", "treated_density"])
        for row in zip(self.y, self.control_density, self.treated_density):
            writer.writerow([_fmt(v) for v in row])
        return buf.getvalue()

    def diagrams_csv(self):
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(["arm", "birth", "death"])
        for arm, diagram in self.diagrams.items():
            for b, d in diagram.pairs:
                writer.writerow([arm, _fmt(b), _fmt(d)])
        return buf.getvalue()

    def to_dict(self):
        return {
            "y": self.y.tolist(),
            "control_density": self.control_density.tolist(),
            "treated_density": self.treated_density.tolist(),
            "diagrams": {arm: d.to_dict() for arm, d in self.diagrams.items()},
        }


def emit_figure1_data(control=FIG1_CONTROL, treated=FIG1_TREATED, grid=GridSpec(-4.0, 4.0, 401),
                      n_samples=5000, seed=0, summary=None):
    """Analytic control/treated densities on ``grid`` and the KDE superlevel
    diagrams of one large sample from each law."""
    summary = summary or SummaryConfig("kde")
    grid = GridSpec.parse(grid)
    y = grid.nodes
    rng = SeededRng(seed).child(_FIG1)
    diagrams = {
        "control": density_superlevel_diagram_1d(
            draw_motivating_1d(control, n_samples, rng.child(0)), summary),
        "treated": density_superlevel_diagram_1d(
            draw_motivating_1d(treated, n_samples, rng.child(1)), summary),
    }
    return Figure1Data(y, mixture_density_1d(control, y), mixture_density_1d(treated, y), diagrams)


def _noncommute_replication(design, n, rng, summary, lcfg):
    sample = draw_stratified_2d(design, n, rng, arms=(0,))
    per = [summarize(sample.cell(0, z), summary) for z in (0, 1)]
    pooled = landscape(summarize(sample.arm(0), summary), lcfg).values
    averaged = average_landscapes([landscape(d, lcfg) for d in per], [0.5, 0.5])
    gap = marginal_noncommutation_diagnostic(sample, summary, lcfg, arm=0)
    return pooled, averaged, gap


def _noncommute_block(design, n, rng, config, lcfg, pool):
    args = [(design, n, rng.child(r), config.summary, lcfg) for r in range(config.n_reps)]
    results = _map(pool, _noncommute_replication, args)
    pooled = np.mean([r[0] for r in results], axis=0)
    averaged = np.mean([r[1] for r in results], axis=0)
    gaps = [r[2] for r in results]
    gap_mean, gap_sd = _mean_sd(gaps)
    return {
        "m0": list(design.m0),
        "m1": list(design.m1),
        "mean_landscape_gap": weighted_l2_norm(pooled - averaged, lcfg.grid),
        "replication_gap_mean": gap_mean,
        "replication_gap_sd": gap_sd,
        "pooled_norm": weighted_l2_norm(pooled, lcfg.grid),
        "averaged_norm": weighted_l2_norm(averaged, lcfg.grid),
    }


def run_noncommutation_demo(config=None, n_per_cell=200):
    """Compare the landscape of the pooled control arm with the Z-average of
    the stratum landscapes, at the configured design and with m0 moved onto m1.

    ``mean_landscape_gap`` is the distance between the Monte Carlo mean
    landscapes of the two constructions; ``replication_gap_*`` summarise the
    single-sample diagnostic, which keeps a positive noise floor.
    """
    config = config or ExperimentConfig()
    design = config.design
    if config.lcfg.frozen:
        lcfg = config.lcfg
    else:
        pilot = draw_stratified_2d(design, n_per_cell, config.rng.child(_PILOT, _NONCOMMUTE), arms=(0,))
        diagrams = [summarize(pilot.arm(0), config.summary),
                    *(summarize(pilot.cell(0, z), config.summary) for z in (0, 1))]
        lcfg = config.lcfg.with_grid(
            freeze_grid(diagrams, config.lcfg.n_nodes, config.lcfg.grid_scale))
    rng = config.rng.child(_NONCOMMUTE)
    with _executor(config.jobs) as pool:
        main = _noncommute_block(design, n_per_cell, rng.child(0), config, lcfg, pool)
        same = _noncommute_block(design.replace(m0=design.m1), n_per_cell, rng.child(1),
                                 config, lcfg, pool)
    return {
        "n_per_cell": n_per_cell,
        "n_reps": config.n_reps,
        "grid": str(lcfg.grid),
        "design": main,
        "identical_strata": same,
    }
