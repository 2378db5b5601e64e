"""Candidate-based 3D canonicalization engine.

Generates a compact set of candidate canonical rotations per object
(geometric + semantic criteria, vertical + horizontal decomposition),
serves them to human annotators for one-click selection, and evaluates
canonical-pose quality with symmetry-aware metrics.
"""

from .candidates import CANDIDATE_TAGS, Candidate, CandidateSet, generate_candidates
from .criteria import (CriterionConfig, EnergyProfile, extrema_of_energy,
                       horizontal_geometric, horizontal_semantic, pca_align)
from .geometry import (LabeledCloud, NormalizationTransform, PcaFrame, Rotation,
                       chamfer_distance, geodesic_angle, normalize_to_unit_sphere,
                       principal_axes, rotate)
from .metrics import (ErrorSample, SymmetrySpec, accuracy_at,
                      gt_equivariance_consistency, instance_consistency, iqr,
                      mean_abs_error, sym_aware_angle)
from .stability import (Mesh, SupportCandidate, center_of_mass, select_upright,
                        support_candidates)
from .templates import CategoryTemplate

__all__ = [
    "CANDIDATE_TAGS", "Candidate", "CandidateSet", "CategoryTemplate",
    "CriterionConfig", "EnergyProfile", "ErrorSample", "LabeledCloud", "Mesh",
    "NormalizationTransform", "PcaFrame", "Rotation", "SupportCandidate",
    "SymmetrySpec", "accuracy_at", "center_of_mass", "chamfer_distance",
    "extrema_of_energy", "generate_candidates", "geodesic_angle",
    "gt_equivariance_consistency", "horizontal_geometric", "horizontal_semantic",
    "instance_consistency", "iqr", "mean_abs_error", "normalize_to_unit_sphere",
    "pca_align", "principal_axes", "rotate", "select_upright", "support_candidates",
    "sym_aware_angle",
]
