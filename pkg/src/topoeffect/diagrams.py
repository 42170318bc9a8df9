"""Persistence diagrams and the bottleneck / p-Wasserstein diagram metrics.

Distances use the l-infinity ground metric on the (birth, death) plane, and
points may be matched to their orthogonal projection on the diagonal, which
costs half the persistence of the point.
"""
import csv
import io
import json
import math
from dataclasses import dataclass

import numpy as np
from scipy.optimize import linear_sum_assignment
from scipy.sparse import csr_matrix
from scipy.sparse.csgraph import maximum_bipartite_matching

from .exceptions import (
    DimensionMismatchError,
    EssentialClassError,
    InvalidOrderError,
    TopoEffectError,
)

__all__ = [
    "InfiniteBarPolicy",
    "DROPPED",
    "capped_at",
    "parse_policy",
    "PersistenceDiagram",
    "DiagramMetric",
    "bottleneck_distance",
    "wasserstein_distance",
    "diagram_distance",
]


@dataclass(frozen=True)
class InfiniteBarPolicy:
    """How the essential (never dying) class was handled.

    ``cap=None`` means the essential pair was dropped; otherwise its missing
    endpoint was replaced by ``cap``.
    """

    cap: float | None = None

    @property
    def dropped(self):
        return self.cap is None

    def __str__(self):
        return "dropped" if self.cap is None else f"capped:{self.cap!r}"

    def to_json(self):
        return "dropped" if self.cap is None else {"capped_at": self.cap}

    @classmethod
    def from_json(cls, obj):
        if obj is None:
            return None
        if obj == "dropped":
            return DROPPED
        if isinstance(obj, dict) and "capped_at" in obj:
            return capped_at(obj["capped_at"])
        raise TopoEffectError(f"unrecognised infinite-bar policy {obj!r}")


DROPPED = InfiniteBarPolicy()


def capped_at(value):
    value = float(value)
    if not math.isfinite(value):
        raise TopoEffectError("cap must be finite")
    return InfiniteBarPolicy(cap=value)


def parse_policy(policy):
    """Accept an InfiniteBarPolicy, ``"drop"``/``"dropped"``, a float cap, or ``"cap:<x>"``."""
    if isinstance(policy, InfiniteBarPolicy):
        return policy
    if policy is None or policy in ("drop", "dropped"):
        return DROPPED
    if isinstance(policy, str) and policy.startswith(("cap:", "capped:")):
        return capped_at(policy.split(":", 1)[1])
    if isinstance(policy, (int, float)):
        return capped_at(policy)
    raise TopoEffectError(f"unrecognised infinite-bar policy {policy!r}")


def _as_pairs(pairs):
    arr = np.asarray(pairs, dtype=float)
    if arr.size == 0:
        return np.empty((0, 2))
    if arr.ndim != 2 or arr.shape[1] != 2:
        raise TopoEffectError(f"pairs must have shape (n, 2), got {arr.shape}")
    return arr


@dataclass(frozen=True, eq=False)
class PersistenceDiagram:
    """A finite multiset of (birth, death) pairs in one homology dimension.

    ``infinite_bar_policy=None`` marks a raw diagram whose essential class is
    still present with death ``+inf``. Superlevel filtrations store each pair
    as (low level, high level) and set ``orientation="superlevel"`` so that
    death >= birth holds for every diagram.

    Pairs are kept sorted lexicographically; the order carries no meaning.
    """

    pairs: np.ndarray
    homology_dim: int = 0
    infinite_bar_policy: InfiniteBarPolicy | None = DROPPED
    orientation: str = "sublevel"

    def __post_init__(self):
        arr = _as_pairs(self.pairs)
        if np.any(np.isnan(arr)) or np.any(np.isinf(arr[:, 0])):
            raise TopoEffectError("births must be finite and no value may be NaN")
        finite = np.isfinite(arr[:, 1])
        if np.any(arr[finite, 1] < arr[finite, 0]):
            raise TopoEffectError("a pair has death < birth")
        if np.any(np.isneginf(arr[:, 1])):
            raise TopoEffectError("death may not be -inf")
        if self.infinite_bar_policy is not None and not np.all(finite):
            raise EssentialClassError(
                f"policy {self.infinite_bar_policy} forbids infinite deaths"
            )
        if self.orientation not in ("sublevel", "superlevel"):
            raise TopoEffectError(f"unknown orientation {self.orientation!r}")
        arr = arr[np.lexsort((arr[:, 1], arr[:, 0]))].copy()
        arr.setflags(write=False)
        object.__setattr__(self, "pairs", arr)
        object.__setattr__(self, "homology_dim", int(self.homology_dim))

    def __len__(self):
        return self.pairs.shape[0]

    def __eq__(self, other):
        if not isinstance(other, PersistenceDiagram):
            return NotImplemented
        return (
            self.homology_dim == other.homology_dim
            and self.infinite_bar_policy == other.infinite_bar_policy
            and self.orientation == other.orientation
            and np.array_equal(self.pairs, other.pairs)
        )

    __hash__ = None

    def __repr__(self):
        return (
            f"PersistenceDiagram(n_pairs={len(self)}, homology_dim={self.homology_dim}, "
            f"policy={self.infinite_bar_policy}, orientation={self.orientation!r})"
        )

    @property
    def births(self):
        return self.pairs[:, 0]

    @property
    def deaths(self):
        return self.pairs[:, 1]

    @property
    def persistence(self):
        return self.pairs[:, 1] - self.pairs[:, 0]

    @property
    def has_essential(self):
        return bool(np.any(np.isinf(self.pairs[:, 1])))

    def apply_policy(self, policy):
        """Resolve the essential class of a raw diagram; no-op if already resolved."""
        policy = parse_policy(policy)
        if self.infinite_bar_policy is not None:
            return self
        pairs = self.pairs
        inf = np.isinf(pairs[:, 1])
        if policy.dropped:
            pairs = pairs[~inf]
        else:
            pairs = pairs.copy()
            pairs[inf, 1] = np.maximum(policy.cap, pairs[inf, 0])
        return PersistenceDiagram(pairs, self.homology_dim, policy, self.orientation)

    def to_csv(self):
        """CSV with header ``birth,death``; raw diagrams must be resolved first."""
        if self.has_essential:
            raise EssentialClassError("apply an infinite-bar policy before CSV export")
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(["birth", "death"])
        for b, d in self.pairs:
            writer.writerow([repr(float(b)), repr(float(d))])
        return buf.getvalue()

    @classmethod
    def from_csv(cls, text, homology_dim=0, policy=DROPPED, orientation="sublevel"):
        rows = list(csv.DictReader(io.StringIO(text)))
        pairs = [(float(r["birth"]), float(r["death"])) for r in rows]
        return cls(np.array(pairs).reshape(-1, 2), homology_dim, parse_policy(policy), orientation)

    def to_dict(self):
        return {
            "homology_dim": self.homology_dim,
            "infinite_bar_policy": (
                None if self.infinite_bar_policy is None else self.infinite_bar_policy.to_json()
            ),
            "orientation": self.orientation,
            "pairs": [[float(b), None if math.isinf(d) else float(d)] for b, d in self.pairs],
        }

    def to_json(self):
        return json.dumps(self.to_dict())

    @classmethod
    def from_dict(cls, obj):
        pairs = [(b, math.inf if d is None else d) for b, d in obj["pairs"]]
        return cls(
            np.array(pairs, dtype=float).reshape(-1, 2),
            obj.get("homology_dim", 0),
            InfiniteBarPolicy.from_json(obj.get("infinite_bar_policy", "dropped")),
            obj.get("orientation", "sublevel"),
        )

    @classmethod
    def from_json(cls, text):
        return cls.from_dict(json.loads(text))


def _finite_pairs(a, b):
    if not isinstance(a, PersistenceDiagram):
        a = PersistenceDiagram(a)
    if not isinstance(b, PersistenceDiagram):
        b = PersistenceDiagram(b)
    if a.homology_dim != b.homology_dim:
        raise DimensionMismatchError(
            f"homology dimensions differ: {a.homology_dim} vs {b.homology_dim}"
        )
    if a.has_essential or b.has_essential:
        raise EssentialClassError("diagram carries an infinite bar; apply a policy first")
    return a.pairs, b.pairs


def _linf_costs(A, B):
    cross = np.max(np.abs(A[:, None, :] - B[None, :, :]), axis=2)
    return cross, (A[:, 1] - A[:, 0]) / 2.0, (B[:, 1] - B[:, 0]) / 2.0


def _perfect_matching_exists(cross, diag_a, diag_b, r):
    m, n = cross.shape
    # rows: points of A, then diagonal slots for B; columns: points of B, then slots for A
    rows, cols = np.nonzero(cross <= r)
    ia = np.flatnonzero(diag_a <= r)
    jb = np.flatnonzero(diag_b <= r)
    dd_r, dd_c = np.meshgrid(np.arange(m, m + n), np.arange(n, n + m), indexing="ij")
    r_idx = np.concatenate([rows, ia, m + jb, dd_r.ravel()])
    c_idx = np.concatenate([cols, n + ia, jb, dd_c.ravel()])
    graph = csr_matrix(
        (np.ones(r_idx.size, dtype=np.int8), (r_idx, c_idx)), shape=(m + n, m + n)
    )
    match = maximum_bipartite_matching(graph, perm_type="column")
    return bool(np.all(match >= 0))


def bottleneck_distance(a, b):
    """Exact bottleneck distance between two finite diagrams.

    Binary search over the finite set of candidate costs (pairwise l-inf
    distances and diagonal distances), testing each threshold for a perfect
    matching in the augmented bipartite graph.
    """
    A, B = _finite_pairs(a, b)
    if A.shape[0] == 0 and B.shape[0] == 0:
        return 0.0
    cross, diag_a, diag_b = _linf_costs(A, B)
    candidates = np.unique(np.concatenate([[0.0], cross.ravel(), diag_a, diag_b]))
    lo, hi = 0, candidates.size - 1
    while lo < hi:
        mid = (lo + hi) // 2
        if _perfect_matching_exists(cross, diag_a, diag_b, candidates[mid]):
            hi = mid
        else:
            lo = mid + 1
    return float(candidates[lo])


def wasserstein_distance(a, b, p=2.0):
    """p-Wasserstein diagram distance, solved exactly as a linear assignment."""
    p = float(p)
    if not (p >= 1.0 and math.isfinite(p)):
        raise InvalidOrderError(f"Wasserstein order must be finite and >= 1, got {p}")
    A, B = _finite_pairs(a, b)
    m, n = A.shape[0], B.shape[0]
    if m == 0 and n == 0:
        return 0.0
    cross, diag_a, diag_b = _linf_costs(A, B)
    cost = np.full((m + n, n + m), np.inf)
    cost[:m, :n] = cross**p
    cost[:m, n:][np.diag_indices(m)] = diag_a**p
    cost[m:, :n][np.diag_indices(n)] = diag_b**p
    cost[m:, n:] = 0.0
    row, col = linear_sum_assignment(cost)
    total = float(cost[row, col].sum())
    return total ** (1.0 / p)


@dataclass(frozen=True)
class DiagramMetric:
    """A diagram metric choice: ``DiagramMetric("bottleneck")`` or ``DiagramMetric("wasserstein", 2)``."""

    kind: str = "wasserstein"
    p: float | None = 2.0

    def __post_init__(self):
        if self.kind == "bottleneck":
            object.__setattr__(self, "p", None)
        elif self.kind == "wasserstein":
            p = float(self.p) if self.p is not None else float("nan")
            if not (p >= 1.0 and math.isfinite(p)):
                raise InvalidOrderError(f"Wasserstein order must be finite and >= 1, got {self.p}")
            object.__setattr__(self, "p", p)
        else:
            raise TopoEffectError(f"unknown diagram metric {self.kind!r}")

    @classmethod
    def parse(cls, spec):
        """Parse ``"bottleneck"`` or ``"wasserstein:p"``."""
        if isinstance(spec, DiagramMetric):
            return spec
        name, _, arg = str(spec).strip().lower().partition(":")
        if name == "bottleneck" and not arg:
            return cls("bottleneck")
        if name == "wasserstein":
            return cls("wasserstein", float(arg) if arg else 2.0)
        raise TopoEffectError(f"cannot parse metric {spec!r}")

    def __str__(self):
        return "bottleneck" if self.kind == "bottleneck" else f"wasserstein:{self.p:g}"

    def __call__(self, a, b):
        return diagram_distance(a, b, self)


def diagram_distance(a, b, metric=DiagramMetric()):
    metric = DiagramMetric.parse(metric)
    if metric.kind == "bottleneck":
        return bottleneck_distance(a, b)
    return wasserstein_distance(a, b, metric.p)
