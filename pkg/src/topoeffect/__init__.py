"""Persistent-homology treatment effects for mean-preserving shape changes."""
from .diagrams import (
    DROPPED,
    DiagramMetric,
    InfiniteBarPolicy,
    PersistenceDiagram,
    bottleneck_distance,
    capped_at,
    diagram_distance,
    wasserstein_distance,
)
from .estimands import (
    EffectEstimate,
    ObservationalSample,
    StratumSummary,
    TopologicalEffectEstimator,
    adjusted_topological_effect,
    etate_hat,
    etcate_hat,
    marginal_noncommutation_diagnostic,
    mean_effects,
    stratum_summaries,
    tate_hat,
    tcate_hat,
    unadjusted_topological_contrast,
)
from .filtrations import (
    GridSpec,
    PersistenceTransformer,
    SummaryConfig,
    density_superlevel_diagram_1d,
    dtm_sublevel_diagram_1d,
    euclidean_mst,
    vr0_diagram,
)
from .landscapes import (
    Landscape,
    LandscapeConfig,
    LandscapeVectorizer,
    landscape,
    landscape_l2_distance,
    landscape_sup_distance,
)
from .synthgen import (
    Design1D,
    Design2D,
    SeededRng,
    draw_motivating_1d,
    draw_observational_2d,
    draw_potential_outcomes_2d,
    ground_truth_topological_effect,
)

__version__ = "0.1.0"
