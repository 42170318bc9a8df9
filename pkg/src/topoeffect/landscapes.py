"""Persistence landscapes sampled on a fixed grid, and their distances."""
import csv
import io
from dataclasses import dataclass

import numpy as np
from sklearn.base import BaseEstimator, TransformerMixin
from sklearn.utils.validation import check_is_fitted

from .diagrams import PersistenceDiagram
from .exceptions import EssentialClassError, IncompatibleLandscapeError, TopoEffectError
from .filtrations import GridSpec

__all__ = [
    "LandscapeConfig",
    "Landscape",
    "freeze_grid",
    "landscape",
    "landscape_l2_distance",
    "landscape_sup_distance",
    "average_landscapes",
    "weighted_l2_norm",
    "LandscapeVectorizer",
]

DEFAULT_LAYERS = 3
DEFAULT_GRID_NODES = 256
DEFAULT_GRID_SCALE = 1.25


@dataclass(frozen=True)
class LandscapeConfig:
    """Number of layers and the evaluation grid.

    ``grid=None`` is only a placeholder: a concrete grid has to be frozen
    (see :func:`freeze_grid`) before any landscape is evaluated.
    """

    n_layers: int = DEFAULT_LAYERS
    grid: GridSpec | None = None
    n_nodes: int = DEFAULT_GRID_NODES
    grid_scale: float = DEFAULT_GRID_SCALE

    def __post_init__(self):
        if int(self.n_layers) != self.n_layers or self.n_layers < 1:
            raise TopoEffectError(f"need at least one landscape layer, got {self.n_layers}")
        if self.grid is not None:
            object.__setattr__(self, "grid", GridSpec.parse(self.grid))

    def with_grid(self, grid):
        return LandscapeConfig(self.n_layers, GridSpec.parse(grid), self.n_nodes, self.grid_scale)

    @property
    def frozen(self):
        return self.grid is not None


def freeze_grid(diagrams, n_nodes=DEFAULT_GRID_NODES, scale=DEFAULT_GRID_SCALE):
    """Grid ``[0, scale * max death]`` shared by a batch of diagrams."""
    deaths = [d.deaths.max() for d in diagrams if len(d)]
    top = max(deaths, default=0.0)
    if not np.isfinite(top):
        raise EssentialClassError("cannot freeze a grid over an infinite death")
    if top <= 0:
        top = 1.0
    return GridSpec(0.0, scale * float(top), n_nodes)


def _resolve(config, diagrams=()):
    if config.frozen:
        return config
    return config.with_grid(freeze_grid(diagrams, config.n_nodes, config.grid_scale))


@dataclass(frozen=True, eq=False)
class Landscape:
    """Layer ``k`` sampled at grid node ``g`` is ``values[k, g]``."""

    values: np.ndarray
    config: LandscapeConfig

    def __post_init__(self):
        v = np.array(self.values, dtype=float)
        if v.shape != (self.config.n_layers, self.config.grid.n_nodes):
            raise TopoEffectError(f"landscape values have shape {v.shape}, config disagrees")
        v.setflags(write=False)
        object.__setattr__(self, "values", v)

    @property
    def grid(self):
        return self.config.grid

    def flatten(self):
        return self.values.ravel()

    def to_csv(self):
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow([repr(float(t)) for t in self.grid.nodes])
        for row in self.values:
            writer.writerow([repr(float(v)) for v in row])
        return buf.getvalue()

    @classmethod
    def from_csv(cls, text):
        rows = list(csv.reader(io.StringIO(text)))
        nodes = np.array([float(v) for v in rows[0]])
        values = np.array([[float(v) for v in r] for r in rows[1:]])
        grid = GridSpec(nodes[0], nodes[-1], nodes.size)
        if not np.allclose(grid.nodes, nodes, rtol=0, atol=1e-12 * max(1.0, abs(grid.hi))):
            raise TopoEffectError("landscape header is not a uniform grid")
        return cls(values, LandscapeConfig(values.shape[0], grid))


def landscape(diagram, config=LandscapeConfig()):
    """Persistence landscape of a finite diagram.

    At node t, layer k is the k-th largest tent value max(0, min(t - b, d - t))
    over all pairs (b, d); layers beyond the number of pairs are zero.
    """
    if diagram.has_essential:
        raise EssentialClassError("landscapes need a finite diagram; apply a policy first")
    config = _resolve(config, [diagram])
    t = config.grid.nodes
    K = config.n_layers
    values = np.zeros((K, t.size))
    if len(diagram):
        b = diagram.births[:, None]
        d = diagram.deaths[:, None]
        tents = np.maximum(0.0, np.minimum(t[None, :] - b, d - t[None, :]))
        tents = -np.sort(-tents, axis=0)
        rows = min(K, tents.shape[0])
        values[:rows] = tents[:rows]
    return Landscape(values, config)


def _check_compatible(a, b):
    if a.config.n_layers != b.config.n_layers or a.grid != b.grid:
        raise IncompatibleLandscapeError("landscapes use different layers or grids")


def landscape_l2_distance(a, b):
    """Riemann-weighted L2 distance: sqrt(sum (a - b)^2 * grid step)."""
    _check_compatible(a, b)
    diff = a.values - b.values
    return float(np.sqrt(np.sum(diff * diff) * a.grid.step))


def landscape_sup_distance(a, b):
    _check_compatible(a, b)
    return float(np.max(np.abs(a.values - b.values)))


def weighted_l2_norm(vector, grid):
    """Riemann-weighted norm of a flattened landscape-shaped vector."""
    v = np.asarray(vector, dtype=float)
    return float(np.sqrt(np.sum(v * v) * grid.step))


def average_landscapes(landscapes, weights):
    """Weighted average of landscape values; returns a plain (K, G) array.

    Averages of landscapes need not be landscapes of any diagram, so the
    result is not wrapped in :class:`Landscape`.
    """
    first = landscapes[0]
    for other in landscapes[1:]:
        _check_compatible(first, other)
    w = np.asarray(weights, dtype=float)
    return np.tensordot(w, np.stack([ls.values for ls in landscapes]), axes=1)


class LandscapeVectorizer(BaseEstimator, TransformerMixin):
    """Turn persistence diagrams into flattened landscape vectors.

    ``fit`` freezes the grid from the training diagrams (``[0, grid_scale *
    max death]`` with ``n_nodes`` nodes) unless ``grid`` is given, so every
    diagram passed to ``transform`` afterwards is evaluated on the same grid.
    ``transform`` returns an array of shape (n_diagrams, n_layers * n_nodes).
    """

    def __init__(self, n_layers=DEFAULT_LAYERS, grid=None, n_nodes=DEFAULT_GRID_NODES,
                 grid_scale=DEFAULT_GRID_SCALE):
        self.n_layers = n_layers
        self.grid = grid
        self.n_nodes = n_nodes
        self.grid_scale = grid_scale

    def fit(self, X, y=None):
        diagrams = list(X)
        if self.grid is not None:
            grid = GridSpec.parse(self.grid)
        else:
            grid = freeze_grid(diagrams, self.n_nodes, self.grid_scale)
        self.config_ = LandscapeConfig(self.n_layers, grid, self.n_nodes, self.grid_scale)
        self.grid_ = grid
        return self

    def transform(self, X):
        check_is_fitted(self, "config_")
        rows = [landscape(_as_diagram(d), self.config_).flatten() for d in X]
        if not rows:
            return np.empty((0, self.n_layers * self.config_.grid.n_nodes))
        return np.vstack(rows)

    def distance(self, a, b):
        """Riemann-weighted L2 distance between two diagrams' landscapes."""
        check_is_fitted(self, "config_")
        return landscape_l2_distance(landscape(_as_diagram(a), self.config_),
                                     landscape(_as_diagram(b), self.config_))


def _as_diagram(d):
    return d if isinstance(d, PersistenceDiagram) else PersistenceDiagram(d)
