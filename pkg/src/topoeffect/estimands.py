"""Observable topological treatment-effect estimators and mean baselines.

Within each stratum z of a discrete covariate, the treated and control
outcome clouds are summarised by persistence diagrams. Conditional effects
compare the two diagrams (by a diagram metric, or by the difference of their
landscapes); averaged effects weight strata by the empirical law of Z, i.e.
by ``(n0 + n1) / N``.
"""
import csv
import io
import json
from dataclasses import dataclass, field

import numpy as np
from sklearn.base import BaseEstimator
from sklearn.utils.validation import check_is_fitted

from ._validation import check_point_cloud, check_strata, check_treatment
from .diagrams import DiagramMetric, PersistenceDiagram, diagram_distance
from .exceptions import (
    DiagnosticUndefinedError,
    IncompatibleLandscapeError,
    PositivityError,
    TopoEffectError,
)
from .filtrations import GridSpec, SummaryConfig, summarize
from .landscapes import (
    Landscape,
    LandscapeConfig,
    average_landscapes,
    freeze_grid,
    landscape,
    landscape_l2_distance,
    weighted_l2_norm,
)

__all__ = [
    "MIN_CELL_SIZE",
    "ObservationalSample",
    "StratumSummary",
    "EffectEstimate",
    "cell_diagrams",
    "pooled_diagrams",
    "stratum_summaries",
    "tcate_hat",
    "tate_hat",
    "etcate_hat",
    "etate_hat",
    "adjusted_topological_effect",
    "unadjusted_topological_contrast",
    "mean_effects",
    "marginal_noncommutation_diagnostic",
    "TopologicalEffectEstimator",
]

MIN_CELL_SIZE = 2


def _label(z):
    return z.item() if isinstance(z, np.generic) else z


@dataclass(frozen=True, eq=False)
class ObservationalSample:
    """Records (t, z, y) with binary t, discrete z and y in R^p.

    ``counterfactuals`` optionally holds ``(y0, y1)`` arrays from a simulator;
    no estimator reads them.
    """

    t: np.ndarray
    z: np.ndarray
    y: np.ndarray
    counterfactuals: tuple | None = field(default=None, repr=False)

    def __post_init__(self):
        y = check_point_cloud(self.y, "outcomes")
        object.__setattr__(self, "y", y)
        object.__setattr__(self, "t", check_treatment(self.t, y.shape[0]))
        object.__setattr__(self, "z", check_strata(self.z, y.shape[0]))

    def __len__(self):
        return self.y.shape[0]

    @property
    def strata(self):
        return [_label(v) for v in np.unique(self.z)]

    def cell(self, t, z):
        return self.y[(self.t == t) & (self.z == z)]

    def arm(self, t):
        return self.y[self.t == t]

    def z_weights(self):
        labels, counts = np.unique(self.z, return_counts=True)
        return {_label(k): c / len(self) for k, c in zip(labels, counts)}

    def swap_arms(self):
        return ObservationalSample(1 - self.t, self.z, self.y)

    def to_csv(self, with_counterfactuals=False):
        p = self.y.shape[1]
        header = ["t", "z"] + [f"y{j + 1}" for j in range(p)]
        if with_counterfactuals:
            if self.counterfactuals is None:
                raise TopoEffectError("sample carries no counterfactual record")
            header += [f"y0_{j + 1}" for j in range(p)] + [f"y1_{j + 1}" for j in range(p)]
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(header)
        for i in range(len(self)):
            row = [int(self.t[i]), _label(self.z[i])] + [repr(float(v)) for v in self.y[i]]
            if with_counterfactuals:
                y0, y1 = self.counterfactuals
                row += [repr(float(v)) for v in y0[i]] + [repr(float(v)) for v in y1[i]]
            writer.writerow(row)
        return buf.getvalue()

    @classmethod
    def from_csv(cls, text):
        """Read columns ``t``, ``z`` (optional) and ``y1..yp``; other columns are ignored."""
        reader = csv.DictReader(io.StringIO(text))
        ycols = sorted(
            (c for c in reader.fieldnames if c.startswith("y") and c[1:].isdigit()),
            key=lambda c: int(c[1:]),
        )
        if "t" not in reader.fieldnames or not ycols:
            raise TopoEffectError("observational CSV needs a 't' column and y1..yp columns")
        rows = list(reader)
        t = [int(float(r["t"])) for r in rows]
        z = [_parse_label(r["z"]) for r in rows] if "z" in reader.fieldnames else None
        y = [[float(r[c]) for c in ycols] for r in rows]
        return cls(np.array(t), None if z is None else np.array(z), np.array(y))


def _parse_label(text):
    try:
        return int(text)
    except ValueError:
        return text


@dataclass(frozen=True, eq=False)
class StratumSummary:
    z: object
    n0: int
    n1: int
    diagram0: PersistenceDiagram
    diagram1: PersistenceDiagram
    landscape0: Landscape
    landscape1: Landscape


@dataclass(frozen=True, eq=False)
class EffectEstimate:
    """One estimator's output.

    ``value`` is a float for distance-based effects and a flat vector for
    embedded ones; ``magnitude`` is the value itself or the vector's
    Riemann-weighted norm. ``per_stratum`` maps z to the stratum-level value.
    """

    kind: str
    value: object
    weights: dict | None = None
    per_stratum: dict | None = None
    stratum: object = None

    @property
    def magnitude(self):
        if np.ndim(self.value) == 0:
            return float(self.value)
        return self._norm

    def to_dict(self, include_vector=False):
        out = {"kind": self.kind, "value": self.magnitude}
        if self.stratum is not None:
            out["stratum"] = self.stratum
        if self.weights is not None:
            out["weights"] = {str(k): float(v) for k, v in self.weights.items()}
        if self.per_stratum is not None:
            out["per_stratum"] = {
                str(k): (float(v) if np.ndim(v) == 0 else None) for k, v in self.per_stratum.items()
            }
        if include_vector and np.ndim(self.value) > 0:
            out["vector"] = [float(v) for v in np.ravel(self.value)]
        return out


def _embedded(kind, vector, grid, **kwargs):
    est = EffectEstimate(kind, np.asarray(vector, dtype=float), **kwargs)
    object.__setattr__(est, "_norm", weighted_l2_norm(vector, grid))
    return est


def _check_cells(sample, strata, minimum, arms=(0, 1)):
    for z in strata:
        for t in arms:
            count = int(np.sum((sample.t == t) & (sample.z == z)))
            if count < minimum:
                raise PositivityError(t, z, count, minimum)


def cell_diagrams(sample, summary=None):
    """Diagram of every (t, z) cell, keyed by ``(t, z)``."""
    summary = summary or SummaryConfig()
    strata = sample.strata
    _check_cells(sample, strata, max(MIN_CELL_SIZE, summary.min_samples))
    return {(t, z): summarize(sample.cell(t, z), summary) for z in strata for t in (0, 1)}


def pooled_diagrams(sample, summary=None):
    """Diagram of each arm with strata pooled, keyed by t."""
    summary = summary or SummaryConfig()
    out = {}
    for t in (0, 1):
        cloud = sample.arm(t)
        if cloud.shape[0] < max(MIN_CELL_SIZE, summary.min_samples):
            raise PositivityError(t, "pooled", cloud.shape[0], MIN_CELL_SIZE)
        out[t] = summarize(cloud, summary)
    return out


def _frozen(lcfg, diagrams):
    lcfg = lcfg or LandscapeConfig()
    if lcfg.frozen:
        return lcfg
    return lcfg.with_grid(freeze_grid(diagrams, lcfg.n_nodes, lcfg.grid_scale))


def stratum_summaries(sample, summary=None, lcfg=None, diagrams=None):
    """One :class:`StratumSummary` per stratum, landscapes on one shared grid.

    Without a frozen grid in ``lcfg`` the grid is frozen over all cell
    diagrams of this sample. ``diagrams`` may pass precomputed cell diagrams.
    """
    diagrams = diagrams or cell_diagrams(sample, summary)
    lcfg = _frozen(lcfg, diagrams.values())
    out = []
    for z in sample.strata:
        d0, d1 = diagrams[(0, z)], diagrams[(1, z)]
        out.append(StratumSummary(
            z=z,
            n0=int(np.sum((sample.t == 0) & (sample.z == z))),
            n1=int(np.sum((sample.t == 1) & (sample.z == z))),
            diagram0=d0,
            diagram1=d1,
            landscape0=landscape(d0, lcfg),
            landscape1=landscape(d1, lcfg),
        ))
    return out


def _weights(summaries):
    total = sum(s.n0 + s.n1 for s in summaries)
    if not summaries or total == 0:
        raise TopoEffectError("need at least one populated stratum")
    return {s.z: (s.n0 + s.n1) / total for s in summaries}


def tcate_hat(s, metric=DiagramMetric()):
    """Diagram distance between the treated and control diagrams of one stratum."""
    return diagram_distance(s.diagram1, s.diagram0, metric)


def tate_hat(summaries, metric=DiagramMetric()):
    w = _weights(summaries)
    per = {s.z: tcate_hat(s, metric) for s in summaries}
    return EffectEstimate("tate_hat", sum(w[z] * v for z, v in per.items()), w, per)


def etcate_hat(s):
    """Flattened landscape difference ``landscape1 - landscape0`` for one stratum."""
    if s.landscape0.config != s.landscape1.config:
        raise IncompatibleLandscapeError("arms of a stratum use different landscape grids")
    return (s.landscape1.values - s.landscape0.values).ravel()


def etate_hat(summaries):
    w = _weights(summaries)
    grid = summaries[0].landscape0.grid
    vec = np.zeros_like(etcate_hat(summaries[0]))
    per = {}
    for s in summaries:
        if s.landscape0.grid != grid:
            raise IncompatibleLandscapeError("strata use different landscape grids")
        v = etcate_hat(s)
        per[s.z] = weighted_l2_norm(v, grid)
        vec = vec + w[s.z] * v
    return _embedded("etate_hat", vec, grid, weights=w, per_stratum=per)


def adjusted_topological_effect(summaries):
    """Stratum-weighted average of within-stratum landscape L2 distances."""
    w = _weights(summaries)
    per = {s.z: landscape_l2_distance(s.landscape1, s.landscape0) for s in summaries}
    return EffectEstimate(
        "adjusted_topological_effect", sum(w[z] * v for z, v in per.items()), w, per
    )


def unadjusted_topological_contrast(sample, summary=None, lcfg=None, diagrams=None):
    """Landscape distance between the pooled treated and pooled control diagrams."""
    diagrams = diagrams or pooled_diagrams(sample, summary)
    lcfg = _frozen(lcfg, diagrams.values())
    value = landscape_l2_distance(landscape(diagrams[1], lcfg), landscape(diagrams[0], lcfg))
    return EffectEstimate("unadjusted_topological_contrast", value)


def mean_effects(sample):
    """Unadjusted and Z-stratified differences in mean of the first outcome coordinate."""
    y = sample.y[:, 0]
    for t in (0, 1):
        if not np.any(sample.t == t):
            raise PositivityError(t, "pooled", 0, 1)
    unadjusted = float(y[sample.t == 1].mean() - y[sample.t == 0].mean())
    strata = sample.strata
    _check_cells(sample, strata, 1)
    adjusted = 0.0
    for z, w in sample.z_weights().items():
        in_z = sample.z == z
        adjusted += w * (y[in_z & (sample.t == 1)].mean() - y[in_z & (sample.t == 0)].mean())
    return unadjusted, float(adjusted)


def marginal_noncommutation_diagnostic(sample, summary=None, lcfg=None, arm=0, details=False):
    """Gap between the landscape of a pooled arm and the Z-average of its stratum landscapes.

    Averaging landscapes over strata is not the same as taking the landscape
    of the mixture, so a clearly positive gap shows that diagram construction
    does not commute with mixing over Z. Returns the Riemann-weighted L2 gap,
    or a dict with the norms involved when ``details`` is set.
    """
    summary = summary or SummaryConfig()
    strata = sample.strata
    if len(strata) < 2:
        raise DiagnosticUndefinedError("the mixture diagnostic needs at least two strata")
    _check_cells(sample, strata, max(MIN_CELL_SIZE, summary.min_samples), arms=(arm,))
    per = {z: summarize(sample.cell(arm, z), summary) for z in strata}
    pooled = summarize(sample.arm(arm), summary)
    lcfg = _frozen(lcfg, [pooled, *per.values()])
    counts = {z: int(np.sum((sample.t == arm) & (sample.z == z))) for z in strata}
    total = sum(counts.values())
    w = {z: c / total for z, c in counts.items()}
    lands = {z: landscape(d, lcfg) for z, d in per.items()}
    averaged = average_landscapes([lands[z] for z in strata], [w[z] for z in strata])
    pooled_land = landscape(pooled, lcfg)
    gap = weighted_l2_norm(pooled_land.values - averaged, lcfg.grid)
    if not details:
        return gap
    return {
        "arm": arm,
        "gap": gap,
        "weights": {str(z): w[z] for z in strata},
        "pooled_norm": weighted_l2_norm(pooled_land.values, lcfg.grid),
        "averaged_norm": weighted_l2_norm(averaged, lcfg.grid),
        "stratum_norms": {str(z): weighted_l2_norm(lands[z].values, lcfg.grid) for z in strata},
        "grid": str(lcfg.grid),
    }


class TopologicalEffectEstimator(BaseEstimator):
    """Fit every topological and mean-based effect estimator on one sample.

    ``fit(Y, t, z)`` takes outcomes of shape (n, p), binary treatment and a
    discrete stratum label (``z=None`` means a single stratum). One landscape
    grid is frozen over all cell and pooled diagrams unless ``grid`` is given.

    Fitted attributes: ``summaries_``, ``weights_``, ``tcate_`` (dict z ->
    float), ``tate_``, ``etate_``, ``adjusted_effect_``, ``unadjusted_effect_``,
    ``unadjusted_mean_``, ``adjusted_mean_``, ``grid_``.
    """

    def __init__(self, summary="vr0", metric="wasserstein:2", n_layers=3, grid=None,
                 n_nodes=256, grid_scale=1.25, bandwidth=None, mass_fraction=0.1,
                 infinite_bar_policy="drop"):
        self.summary = summary
        self.metric = metric
        self.n_layers = n_layers
        self.grid = grid
        self.n_nodes = n_nodes
        self.grid_scale = grid_scale
        self.bandwidth = bandwidth
        self.mass_fraction = mass_fraction
        self.infinite_bar_policy = infinite_bar_policy

    def _summary_config(self):
        if isinstance(self.summary, SummaryConfig):
            return self.summary
        kind = str(self.summary)
        if ":" in kind:
            return SummaryConfig.parse(kind, infinite_bar_policy=self.infinite_bar_policy)
        return SummaryConfig(kind, self.bandwidth, self.mass_fraction,
                             infinite_bar_policy=self.infinite_bar_policy)

    def fit(self, Y, t, z=None):
        sample = ObservationalSample(t, z, Y)
        summary = self._summary_config()
        metric = DiagramMetric.parse(self.metric)
        cells = cell_diagrams(sample, summary)
        pooled = pooled_diagrams(sample, summary)
        if self.grid is not None:
            grid = GridSpec.parse(self.grid)
        else:
            grid = freeze_grid([*cells.values(), *pooled.values()], self.n_nodes, self.grid_scale)
        lcfg = LandscapeConfig(self.n_layers, grid, self.n_nodes, self.grid_scale)

        self.summary_config_ = summary
        self.metric_ = metric
        self.grid_ = grid
        self.summaries_ = stratum_summaries(sample, summary, lcfg, diagrams=cells)
        self.weights_ = _weights(self.summaries_)
        self.tate_ = tate_hat(self.summaries_, metric)
        self.tcate_ = dict(self.tate_.per_stratum)
        self.etate_ = etate_hat(self.summaries_)
        self.adjusted_effect_ = adjusted_topological_effect(self.summaries_)
        self.unadjusted_effect_ = unadjusted_topological_contrast(sample, summary, lcfg, pooled)
        self.unadjusted_mean_, self.adjusted_mean_ = mean_effects(sample)
        return self

    def etcate(self, z):
        check_is_fitted(self, "summaries_")
        for s in self.summaries_:
            if s.z == z:
                return etcate_hat(s)
        raise KeyError(z)

    def report(self):
        """JSON-ready dict keyed by estimator kind, with per-stratum breakdowns."""
        check_is_fitted(self, "summaries_")
        strata = []
        for s in self.summaries_:
            strata.append({
                "z": s.z,
                "n0": s.n0,
                "n1": s.n1,
                "weight": self.weights_[s.z],
                "tcate_hat": self.tcate_[s.z],
                "etcate_hat_norm": self.etate_.per_stratum[s.z],
                "landscape_distance": self.adjusted_effect_.per_stratum[s.z],
                "n_pairs": [len(s.diagram0), len(s.diagram1)],
            })
        return {
            "config": {
                "summary": str(self.summary_config_),
                "metric": str(self.metric_),
                "n_layers": self.n_layers,
                "grid": str(self.grid_),
            },
            "tate_hat": self.tate_.to_dict(),
            "etate_hat": self.etate_.to_dict(),
            "adjusted_topological_effect": self.adjusted_effect_.to_dict(),
            "unadjusted_topological_contrast": self.unadjusted_effect_.to_dict(),
            "unadjusted_mean": {"kind": "unadjusted_mean", "value": self.unadjusted_mean_},
            "adjusted_mean_ate": {
                "kind": "adjusted_mean_ate",
                "value": self.adjusted_mean_,
                "weights": {str(k): float(v) for k, v in self.weights_.items()},
            },
            "strata": strata,
        }

    def to_json(self, indent=2):
        return json.dumps(self.report(), indent=indent)
