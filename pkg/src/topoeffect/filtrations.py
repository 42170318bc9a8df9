"""Summary maps from samples to 0-dimensional persistence diagrams.

Three constructions are provided:

* ``vr0_diagram``: Vietoris-Rips persistence of a point cloud in R^p. In
  dimension 0 the deaths are exactly the Euclidean MST edge lengths.
* ``density_superlevel_diagram_1d``: superlevel-set persistence of a Gaussian
  KDE evaluated on a uniform grid.
* ``dtm_sublevel_diagram_1d``: sublevel-set persistence of the empirical
  distance-to-a-measure on a uniform grid.
"""
import math
from dataclasses import dataclass

import numpy as np
from sklearn.base import BaseEstimator, TransformerMixin

from ._validation import check_point_cloud, check_samples_1d
from .diagrams import DROPPED, PersistenceDiagram, parse_policy
from .exceptions import CoverageError, TopoEffectError

__all__ = [
    "GridSpec",
    "SummaryConfig",
    "UnionFind",
    "euclidean_mst",
    "vr0_diagram",
    "silverman_bandwidth",
    "gaussian_kde_on_grid",
    "superlevel_diagram_on_grid",
    "sublevel_diagram_on_grid",
    "dtm_on_grid",
    "density_superlevel_diagram_1d",
    "dtm_sublevel_diagram_1d",
    "summarize",
    "PersistenceTransformer",
]

DEFAULT_KDE_NODES = 512


@dataclass(frozen=True)
class GridSpec:
    """Uniform partition of ``[lo, hi]`` into ``n_nodes`` nodes."""

    lo: float
    hi: float
    n_nodes: int

    def __post_init__(self):
        if not (math.isfinite(self.lo) and math.isfinite(self.hi) and self.lo < self.hi):
            raise TopoEffectError(f"grid needs finite lo < hi, got [{self.lo}, {self.hi}]")
        if int(self.n_nodes) != self.n_nodes or self.n_nodes < 2:
            raise TopoEffectError(f"grid needs at least 2 nodes, got {self.n_nodes}")
        object.__setattr__(self, "lo", float(self.lo))
        object.__setattr__(self, "hi", float(self.hi))
        object.__setattr__(self, "n_nodes", int(self.n_nodes))

    @property
    def nodes(self):
        return np.linspace(self.lo, self.hi, self.n_nodes)

    @property
    def step(self):
        return (self.hi - self.lo) / (self.n_nodes - 1)

    @classmethod
    def parse(cls, spec):
        """Parse ``"lo:hi:n"``."""
        if isinstance(spec, GridSpec):
            return spec
        parts = str(spec).split(":")
        if len(parts) != 3:
            raise TopoEffectError(f"grid must be 'lo:hi:n', got {spec!r}")
        return cls(float(parts[0]), float(parts[1]), int(parts[2]))

    def __str__(self):
        return f"{self.lo!r}:{self.hi!r}:{self.n_nodes}"


@dataclass(frozen=True)
class SummaryConfig:
    """Which summary map to apply.

    kind is ``"vr0"``, ``"kde"`` (density superlevel, 1-D) or ``"dtm"``
    (distance-to-a-measure sublevel, 1-D). ``bandwidth=None`` selects
    Silverman's rule; ``grid=None`` selects the default grid for the sample.
    """

    kind: str = "vr0"
    bandwidth: float | None = None
    mass_fraction: float = 0.1
    grid: GridSpec | None = None
    infinite_bar_policy: object = DROPPED

    def __post_init__(self):
        if self.kind not in ("vr0", "kde", "dtm"):
            raise TopoEffectError(f"unknown summary kind {self.kind!r}")
        if self.bandwidth is not None and not self.bandwidth > 0:
            raise TopoEffectError(f"bandwidth must be > 0, got {self.bandwidth}")
        if not 0 < self.mass_fraction < 1:
            raise TopoEffectError(f"mass fraction must lie in (0, 1), got {self.mass_fraction}")
        object.__setattr__(self, "infinite_bar_policy", parse_policy(self.infinite_bar_policy))

    @property
    def min_samples(self):
        return 1 if self.kind == "vr0" else 2

    @classmethod
    def parse(cls, spec, **kwargs):
        """Parse ``"vr0"``, ``"kde"``, ``"kde:<bandwidth>"``, ``"dtm"`` or ``"dtm:<m0>"``."""
        if isinstance(spec, SummaryConfig):
            return spec
        name, _, arg = str(spec).strip().lower().partition(":")
        if name == "vr0" and not arg:
            return cls("vr0", **kwargs)
        if name == "kde":
            return cls("kde", bandwidth=float(arg) if arg else None, **kwargs)
        if name == "dtm":
            return cls("dtm", mass_fraction=float(arg) if arg else 0.1, **kwargs)
        raise TopoEffectError(f"cannot parse summary {spec!r}")

    def __str__(self):
        if self.kind == "kde":
            return "kde" if self.bandwidth is None else f"kde:{self.bandwidth:g}"
        if self.kind == "dtm":
            return f"dtm:{self.mass_fraction:g}"
        return "vr0"


class UnionFind:
    """Disjoint sets with path compression and union by rank."""

    def __init__(self, n):
        self.parent = list(range(n))
        self.rank = [0] * n

    def find(self, i):
        root = i
        while self.parent[root] != root:
            root = self.parent[root]
        while self.parent[i] != root:
            self.parent[i], i = root, self.parent[i]
        return root

    def union(self, i, j):
        ri, rj = self.find(i), self.find(j)
        if ri == rj:
            return ri
        if self.rank[ri] < self.rank[rj]:
            ri, rj = rj, ri
        self.parent[rj] = ri
        if self.rank[ri] == self.rank[rj]:
            self.rank[ri] += 1
        return ri


def _squared_distances(A, x):
    """Squared distances from each row of A to x, summed over coordinates left to right.

    A fixed summation order makes every edge length reproducible to the last bit,
    independent of how numpy would vectorize a reduction.
    """
    diff = A - x
    acc = diff[:, 0] * diff[:, 0]
    for c in range(1, diff.shape[1]):
        acc += diff[:, c] * diff[:, c]
    return acc


def euclidean_mst(points):
    """Minimum spanning tree of the complete Euclidean graph (dense Prim, O(n^2)).

    Returns a list of ``(i, j, length)`` edges sorted by length. Distance rows
    are computed on demand against the points still outside the tree, so
    memory stays O(n p).
    """
    X = check_point_cloud(points)
    n = X.shape[0]
    if n == 1:
        return []
    # compact arrays over the points not yet in the tree
    rest = np.arange(1, n)
    rest_X = X[1:].copy()
    best = _squared_distances(rest_X, X[0])
    parent = np.zeros(n - 1, dtype=np.int64)
    edges = []
    while rest.size:
        k = int(np.argmin(best))
        node, sq = int(rest[k]), float(best[k])
        edges.append((int(parent[k]), node, math.sqrt(sq)))
        last = rest.size - 1
        rest[k], rest_X[k], best[k], parent[k] = rest[last], rest_X[last], best[last], parent[last]
        rest, rest_X, best, parent = rest[:last], rest_X[:last], best[:last], parent[:last]
        if not rest.size:
            break
        d = _squared_distances(rest_X, X[node])
        closer = d < best
        best[closer] = d[closer]
        parent[closer] = node
    edges.sort(key=lambda e: (e[2], min(e[0], e[1]), max(e[0], e[1])))
    return edges


def vr0_diagram(points, policy=DROPPED):
    """0-dimensional Vietoris-Rips diagram: one pair (0, l) per MST edge length l."""
    X = check_point_cloud(points)
    deaths = [length for _, _, length in euclidean_mst(X)]
    pairs = np.column_stack([np.zeros(len(deaths)), deaths]) if deaths else np.empty((0, 2))
    raw = PersistenceDiagram(
        np.vstack([pairs, [[0.0, np.inf]]]), homology_dim=0, infinite_bar_policy=None
    )
    return raw.apply_policy(policy)


def silverman_bandwidth(samples):
    x = np.asarray(samples, dtype=float)
    sd = np.std(x, ddof=1) if x.size > 1 else 0.0
    h = 1.06 * sd * x.size ** (-0.2)
    if not h > 0:
        raise TopoEffectError("Silverman bandwidth is zero; samples have no spread")
    return float(h)


def gaussian_kde_on_grid(samples, bandwidth, grid):
    x = np.asarray(samples, dtype=float)
    t = GridSpec.parse(grid).nodes
    u = (t[:, None] - x[None, :]) / bandwidth
    return np.exp(-0.5 * u**2).sum(axis=1) / (x.size * bandwidth * math.sqrt(2.0 * math.pi))


def _grid_persistence(values, descending):
    """0-D persistence of a function on a path graph by the elder rule.

    Nodes enter in order of level (descending for superlevel sets); equal
    levels enter by lower node index. On a merge the younger component dies,
    where younger means born later in the processing order. Returns finite
    (birth_level, death_level) pairs with nonzero persistence and the level of
    the essential component.
    """
    f = np.asarray(values, dtype=float)
    order = np.argsort(-f if descending else f, kind="stable")
    uf = UnionFind(f.size)
    # processing rank of the node that created the component, indexed by root
    birth_rank = np.empty(f.size, dtype=np.int64)
    active = np.zeros(f.size, dtype=bool)
    pairs = []
    for rank, node in enumerate(order):
        node = int(node)
        active[node] = True
        birth_rank[node] = rank
        for nb in (node - 1, node + 1):
            if not (0 <= nb < f.size and active[nb]):
                continue
            elder, younger = uf.find(nb), uf.find(node)
            if elder == younger:
                continue
            if birth_rank[elder] > birth_rank[younger]:
                elder, younger = younger, elder
            born = f[order[birth_rank[younger]]]
            if born != f[node]:
                pairs.append((float(born), float(f[node])))
            root = uf.union(elder, younger)
            birth_rank[root] = birth_rank[elder]
    essential = f[order[0]]
    return pairs, essential


def superlevel_diagram_on_grid(values, policy=DROPPED):
    """Superlevel-set 0-D persistence of grid values, stored as (death level, birth level)."""
    pairs, top = _grid_persistence(values, descending=True)
    rows = [(death, birth) for birth, death in pairs]
    policy = parse_policy(policy)
    if not policy.dropped:
        rows.append((min(policy.cap, top), top))
    arr = np.array(rows, dtype=float).reshape(-1, 2)
    return PersistenceDiagram(arr, 0, policy, orientation="superlevel")


def sublevel_diagram_on_grid(values, policy=DROPPED):
    pairs, bottom = _grid_persistence(values, descending=False)
    rows = list(pairs)
    policy = parse_policy(policy)
    if not policy.dropped:
        rows.append((bottom, max(policy.cap, bottom)))
    arr = np.array(rows, dtype=float).reshape(-1, 2)
    return PersistenceDiagram(arr, 0, policy, orientation="sublevel")


def dtm_on_grid(samples, mass_fraction, grid):
    """Empirical distance-to-a-measure with k0 = ceil(m0 * n) nearest samples."""
    x = np.asarray(samples, dtype=float)
    k0 = math.ceil(mass_fraction * x.size)
    if not 1 <= k0 <= x.size:
        raise TopoEffectError(f"need 1 <= ceil(m0 * n) <= n, got {k0} with n={x.size}")
    t = GridSpec.parse(grid).nodes
    sq = (t[:, None] - x[None, :]) ** 2
    nearest = np.partition(sq, k0 - 1, axis=1)[:, :k0]
    return np.sqrt(nearest.mean(axis=1))


def _check_covers(grid, lo, hi):
    if grid.lo > lo or grid.hi < hi:
        raise CoverageError(
            f"grid [{grid.lo}, {grid.hi}] does not cover required range [{lo}, {hi}]"
        )


def density_superlevel_diagram_1d(samples, config=None):
    """Superlevel persistence of a Gaussian KDE on a grid.

    The grid must cover the sample range padded by 3 bandwidths; by default
    it is exactly that range with 512 nodes.
    """
    config = config or SummaryConfig("kde")
    if config.kind != "kde":
        raise TopoEffectError(f"expected a 'kde' summary config, got {config.kind!r}")
    x = check_samples_1d(samples, minimum=2)
    h = config.bandwidth if config.bandwidth is not None else silverman_bandwidth(x)
    lo, hi = x.min() - 3 * h, x.max() + 3 * h
    grid = config.grid or GridSpec(lo, hi, DEFAULT_KDE_NODES)
    _check_covers(grid, lo, hi)
    return superlevel_diagram_on_grid(gaussian_kde_on_grid(x, h, grid), config.infinite_bar_policy)


def dtm_sublevel_diagram_1d(samples, config=None):
    """Sublevel persistence of the empirical DTM on a grid.

    The grid must cover the sample range; by default it pads the range by 10%
    on each side and uses 512 nodes.
    """
    config = config or SummaryConfig("dtm")
    if config.kind != "dtm":
        raise TopoEffectError(f"expected a 'dtm' summary config, got {config.kind!r}")
    x = check_samples_1d(samples, minimum=2)
    lo, hi = float(x.min()), float(x.max())
    pad = 0.1 * (hi - lo) if hi > lo else 1.0
    grid = config.grid or GridSpec(lo - pad, hi + pad, DEFAULT_KDE_NODES)
    _check_covers(grid, lo, hi)
    values = dtm_on_grid(x, config.mass_fraction, grid)
    return sublevel_diagram_on_grid(values, config.infinite_bar_policy)


def summarize(samples, config=None):
    """Apply the summary map selected by ``config`` to one sample."""
    config = config or SummaryConfig()
    if config.kind == "vr0":
        return vr0_diagram(samples, config.infinite_bar_policy)
    arr = np.asarray(samples, dtype=float)
    if arr.ndim == 2 and arr.shape[1] != 1:
        raise TopoEffectError(f"'{config.kind}' summaries need 1-D outcomes, got p={arr.shape[1]}")
    if config.kind == "kde":
        return density_superlevel_diagram_1d(arr, config)
    return dtm_sublevel_diagram_1d(arr, config)


class PersistenceTransformer(BaseEstimator, TransformerMixin):
    """Map each sample in a collection to its 0-dimensional persistence diagram.

    ``transform`` takes a sequence of point clouds (arrays of shape (n_i, p))
    and returns a list of :class:`PersistenceDiagram`. The transformer is
    stateless; ``fit`` only validates parameters.

    Parameters
    ----------
    summary : {"vr0", "kde", "dtm"}
    bandwidth : float or None
        KDE bandwidth, Silverman's rule when None.
    mass_fraction : float
        DTM mass parameter m0.
    grid : str, GridSpec or None
        Evaluation grid for the 1-D summaries.
    infinite_bar_policy : "drop" or float
    """

    def __init__(self, summary="vr0", bandwidth=None, mass_fraction=0.1, grid=None,
                 infinite_bar_policy="drop"):
        self.summary = summary
        self.bandwidth = bandwidth
        self.mass_fraction = mass_fraction
        self.grid = grid
        self.infinite_bar_policy = infinite_bar_policy

    def _config(self):
        return SummaryConfig(
            kind=self.summary,
            bandwidth=self.bandwidth,
            mass_fraction=self.mass_fraction,
            grid=None if self.grid is None else GridSpec.parse(self.grid),
            infinite_bar_policy=self.infinite_bar_policy,
        )

    def fit(self, X, y=None):
        self.config_ = self._config()
        return self

    def transform(self, X):
        config = getattr(self, "config_", None) or self._config()
        return [summarize(cloud, config) for cloud in X]
