"""Synthetic designs with mean-preserving topology change.

Random numbers come from numpy's PCG64 bit generator seeded through
``SeedSequence(seed, spawn_key=stream)``; normals use numpy's ziggurat
sampler. Both are fixed algorithms, so ``(seed, stream)`` determines every
draw on every platform.
"""
import math
from dataclasses import dataclass, field

import numpy as np

from .estimands import ObservationalSample
from .exceptions import TopoEffectError
from .filtrations import SummaryConfig, summarize
from .landscapes import LandscapeConfig, landscape, landscape_l2_distance

__all__ = [
    "SeededRng",
    "as_generator",
    "Design2D",
    "Design1D",
    "FIG1_CONTROL",
    "FIG1_TREATED",
    "draw_potential_outcomes_2d",
    "draw_observational_2d",
    "draw_stratified_2d",
    "draw_motivating_1d",
    "mixture_density_1d",
    "ground_truth_topological_effect",
]


@dataclass(frozen=True)
class SeededRng:
    """A reproducible random stream identified by a seed and a stream path.

    ``SeededRng(7).child(3)`` is the stream for replication 3 under seed 7;
    children are independent of one another and of their parent.
    """

    seed: int
    stream: tuple = ()

    def __post_init__(self):
        if isinstance(self.stream, int):
            object.__setattr__(self, "stream", (self.stream,))
        object.__setattr__(self, "stream", tuple(int(s) for s in self.stream))

    def child(self, *path):
        return SeededRng(self.seed, self.stream + tuple(path))

    def generator(self):
        seq = np.random.SeedSequence(int(self.seed) & (2**64 - 1), spawn_key=self.stream)
        return np.random.Generator(np.random.PCG64(seq))


def as_generator(rng):
    """Accept a SeededRng, an int seed, or an existing numpy Generator."""
    if isinstance(rng, np.random.Generator):
        return rng
    if isinstance(rng, SeededRng):
        return rng.generator()
    if isinstance(rng, (int, np.integer)):
        return SeededRng(int(rng)).generator()
    raise TopoEffectError(f"cannot build a random generator from {rng!r}")


def _check_prob(p, name, closed=False):
    ok = 0 <= p <= 1 if closed else 0 < p < 1
    if not ok:
        raise TopoEffectError(f"{name} must lie in {'[0, 1]' if closed else '(0, 1)'}, got {p}")


@dataclass(frozen=True)
class Design2D:
    """Control N2(m_z, s^2 I); treated is the equal mixture at m_z -/+ delta e1."""

    delta: float = 1.0
    m0: tuple = (-1.5, 0.0)
    m1: tuple = (1.5, 0.0)
    sigma: float = 0.18
    propensity: dict = field(default_factory=lambda: {0: 0.2, 1: 0.8})
    pz1: float = 0.5

    def __post_init__(self):
        if not self.sigma > 0:
            raise TopoEffectError(f"sigma must be > 0, got {self.sigma}")
        if not self.delta >= 0:
            raise TopoEffectError(f"delta must be >= 0, got {self.delta}")
        _check_prob(self.pz1, "P(Z=1)")
        for z in (0, 1):
            _check_prob(self.propensity[z], f"P(T=1|Z={z})")
        object.__setattr__(self, "m0", tuple(float(v) for v in self.m0))
        object.__setattr__(self, "m1", tuple(float(v) for v in self.m1))
        object.__setattr__(self, "propensity", {int(k): float(v) for k, v in self.propensity.items()})

    def mean(self, z):
        return np.array(self.m1 if z == 1 else self.m0)

    @property
    def z_weights(self):
        return {0: 1.0 - self.pz1, 1: self.pz1}

    def replace(self, **changes):
        kwargs = dict(delta=self.delta, m0=self.m0, m1=self.m1, sigma=self.sigma,
                      propensity=dict(self.propensity), pz1=self.pz1)
        kwargs.update(changes)
        return Design2D(**kwargs)


@dataclass(frozen=True)
class Design1D:
    """Equal mixture of N(m - delta, s^2) and N(m + delta, s^2); delta = 0 is unimodal."""

    m: float = 0.0
    sigma: float = 1.0
    delta: float = 0.0

    def __post_init__(self):
        if not self.sigma > 0:
            raise TopoEffectError(f"sigma must be > 0, got {self.sigma}")


FIG1_CONTROL = Design1D(m=0.0, sigma=0.7, delta=0.0)
FIG1_TREATED = Design1D(m=0.0, sigma=0.45, delta=1.3)


def _draw_2d(gen, mean, delta, sigma, t, n):
    noise = gen.standard_normal((n, 2))
    y = mean[None, :] + sigma * noise
    if t == 1:
        signs = np.where(gen.random(n) < 0.5, -1.0, 1.0)
        y[:, 0] += signs * delta
    return y


def draw_potential_outcomes_2d(design, z, t, n, rng):
    """n iid draws of Y(t) | Z=z as an (n, 2) array."""
    if n < 1:
        raise TopoEffectError(f"n must be >= 1, got {n}")
    if t not in (0, 1) or z not in (0, 1):
        raise TopoEffectError("t and z must be 0 or 1")
    gen = as_generator(rng)
    return _draw_2d(gen, design.mean(z), design.delta, design.sigma, t, n)


def draw_observational_2d(design, n, rng):
    """Observational sample of n units; both potential outcomes are retained.

    Z ~ Bernoulli(pz1), T ~ Bernoulli(propensity[Z]), and Y = Y(T). The
    counterfactual pair is kept in ``sample.counterfactuals`` for oracle checks.
    """
    if n < 1:
        raise TopoEffectError(f"n must be >= 1, got {n}")
    gen = as_generator(rng)
    z = (gen.random(n) < design.pz1).astype(np.int64)
    prop = np.where(z == 1, design.propensity[1], design.propensity[0])
    t = (gen.random(n) < prop).astype(np.int64)
    means = np.where(z[:, None] == 1, np.array(design.m1), np.array(design.m0))
    y0 = means + design.sigma * gen.standard_normal((n, 2))
    signs = np.where(gen.random(n) < 0.5, -1.0, 1.0)
    y1 = means + design.sigma * gen.standard_normal((n, 2))
    y1[:, 0] += signs * design.delta
    y = np.where(t[:, None] == 1, y1, y0)
    return ObservationalSample(t, z, y, counterfactuals=(y0, y1))


def draw_stratified_2d(design, n_per_cell, rng, arms=(0, 1)):
    """Sample with exactly ``n_per_cell`` units in every (t, z) cell.

    Cells are drawn directly from their conditional laws in the order
    z = 0, 1 and, within z, the listed arms. Treatment does not depend on Z
    here, so there is no confounding by construction.
    """
    if n_per_cell < 1:
        raise TopoEffectError(f"n_per_cell must be >= 1, got {n_per_cell}")
    gen = as_generator(rng)
    t, z, y = [], [], []
    for zz in (0, 1):
        for tt in arms:
            y.append(_draw_2d(gen, design.mean(zz), design.delta, design.sigma, tt, n_per_cell))
            t.append(np.full(n_per_cell, tt))
            z.append(np.full(n_per_cell, zz))
    return ObservationalSample(np.concatenate(t), np.concatenate(z), np.vstack(y))


def draw_motivating_1d(design, n, rng):
    """n iid draws from a 1-D design as a flat array."""
    if n < 1:
        raise TopoEffectError(f"n must be >= 1, got {n}")
    gen = as_generator(rng)
    x = design.m + design.sigma * gen.standard_normal(n)
    if design.delta:
        x += np.where(gen.random(n) < 0.5, -1.0, 1.0) * design.delta
    return x


def mixture_density_1d(design, y):
    y = np.asarray(y, dtype=float)
    c = 1.0 / (math.sqrt(2.0 * math.pi) * design.sigma)
    lo = np.exp(-0.5 * ((y - design.m + design.delta) / design.sigma) ** 2)
    hi = np.exp(-0.5 * ((y - design.m - design.delta) / design.sigma) ** 2)
    return 0.5 * c * (lo + hi)


def _truth_replication(design, n_big, rng, summary, lcfg):
    gen = as_generator(rng)
    effect = 0.0
    for z, w in design.z_weights.items():
        d0 = summarize(_draw_2d(gen, design.mean(z), design.delta, design.sigma, 0, n_big), summary)
        d1 = summarize(_draw_2d(gen, design.mean(z), design.delta, design.sigma, 1, n_big), summary)
        effect += w * landscape_l2_distance(landscape(d1, lcfg), landscape(d0, lcfg))
    return effect


def ground_truth_topological_effect(design, n_big, rng, summary=None, lcfg=None, n_reps=20,
                                    executor=None):
    """Counterfactual benchmark: landscape distance between large draws of Y(1)|z and Y(0)|z.

    Per replication the within-z distances are averaged with the true law of
    Z. ``lcfg`` must carry a frozen grid so the benchmark is comparable with
    the estimators it is checked against. Returns the Monte Carlo mean and
    the unbiased sd over ``n_reps`` replications.
    """
    summary = summary or SummaryConfig()
    lcfg = lcfg or LandscapeConfig()
    if not lcfg.frozen:
        raise TopoEffectError("the ground-truth benchmark needs a frozen landscape grid")
    if not isinstance(rng, SeededRng):
        raise TopoEffectError("pass a SeededRng so replications get their own streams")
    args = [(design, n_big, rng.child(r), summary, lcfg) for r in range(n_reps)]
    if executor is None:
        values = [_truth_replication(*a) for a in args]
    else:
        values = list(executor.map(_truth_replication, *zip(*args)))
    values = np.array(values)
    sd = float(np.std(values, ddof=1)) if n_reps > 1 else 0.0
    return float(values.mean()), sd
