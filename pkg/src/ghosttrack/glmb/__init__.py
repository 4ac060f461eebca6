"""Labeled multi-Bernoulli tracking core with multipath association."""
from .birth import adaptive_birth, fixed_birth_density, fixed_births, make_fixed_birth
from .gibbs import gibbs_indices, gibbs_sample, matrix_violations
from .kernels import (AssociationTable, RowTable, ScanContext, association_weight_table,
                      clutter_density, table_from_weights)
from .recursion import (cardinality_distribution, extract_estimates, joint_predict_update,
                        map_component, prune_and_cap, reflector_lines)
from .tracker import VARIANTS, Tracker, variant_config
from .types import (OBJECT, REFLECTOR, BirthConfig, BirthEntry, FilterConfig, FixedBirth,
                    GlmbComponent, GlmbDensity, Label, TrackDensity, TrackEstimate)

__all__ = [
    "adaptive_birth", "fixed_birth_density", "fixed_births", "make_fixed_birth",
    "gibbs_indices", "gibbs_sample", "matrix_violations",
    "AssociationTable", "RowTable", "ScanContext", "association_weight_table", "clutter_density",
    "table_from_weights",
    "cardinality_distribution", "extract_estimates", "joint_predict_update", "map_component",
    "prune_and_cap", "reflector_lines",
    "VARIANTS", "Tracker", "variant_config",
    "OBJECT", "REFLECTOR", "BirthConfig", "BirthEntry", "FilterConfig", "FixedBirth",
    "GlmbComponent", "GlmbDensity", "Label", "TrackDensity", "TrackEstimate",
]
