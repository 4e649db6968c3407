"""Key-point coverage analysis, GA subset selection, and homography evaluation."""

__version__ = "0.1.0"

from .pointset import FeatureSet, Point2, Region, distance, grid_counts
from .ripley import (
    EdgeCorrection,
    KProfile,
    RadiusGrid,
    coverage_alpha,
    edge_weight,
    k_estimate,
    k_theoretical,
    profile_alpha,
)
from .ga import (
    Chromosome,
    GaConfig,
    GenerationRecord,
    SelectionResult,
    crossover_one_point,
    evolve,
    fitness,
    mutate,
    roulette_select,
)
from .homography import (
    Correspondence,
    GrayImage,
    Homography,
    alignment_error,
    estimate_homography,
    reprojection_rmse,
    warp_image,
)
from .stats import (
    McNemarReport,
    SampleSummary,
    TTestReport,
    mcnemar,
    paired_outcomes,
    t_test_two_sample,
)

__all__ = [
    "__version__",
    "FeatureSet", "Point2", "Region", "distance", "grid_counts",
    "EdgeCorrection", "KProfile", "RadiusGrid", "coverage_alpha", "edge_weight",
    "k_estimate", "k_theoretical", "profile_alpha",
    "Chromosome", "GaConfig", "GenerationRecord", "SelectionResult",
    "crossover_one_point", "evolve", "fitness", "mutate", "roulette_select",
    "Correspondence", "GrayImage", "Homography", "alignment_error",
    "estimate_homography", "reprojection_rmse", "warp_image",
    "McNemarReport", "SampleSummary", "TTestReport", "mcnemar",
    "paired_outcomes", "t_test_two_sample",
]
