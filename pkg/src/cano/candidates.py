"""Compose the five candidate canonical rotations from the criteria outputs.

Tags, in fixed order:
  HS      horizontal semantic
  HG      horizontal geometric
  HG_FLIP horizontal geometric, 180-degree flip
  SUP_HS  vertical (support surface) then horizontal semantic
  PCA_HS  vertical (PCA) then horizontal semantic

A failed branch never drops an entry; it substitutes the documented
fallback and records a flag.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Any

import numpy as np

from .criteria import (CriterionConfig, horizontal_geometric, horizontal_semantic,
                       pca_align, pca_candidate_rotations, semantic_cost, shared_parts)
from .errors import (DegenerateGeometryError, NoStablePoseError, PcaDegenerateError,
                     SemanticUnavailableError)
from .geometry import LabeledCloud, Rotation, chamfer_distance, rotate
from .stability import Mesh, UprightScorer, select_upright, support_candidates
from .templates import CategoryTemplate

CANDIDATE_TAGS = ("HS", "HG", "HG_FLIP", "SUP_HS", "PCA_HS")

FLAG_CONTINUOUS_SYMMETRY = "continuous-symmetry"
FLAG_SEMANTIC_UNAVAILABLE = "semantic-unavailable"
FLAG_NO_STABLE_POSE = "no-stable-pose"
FLAG_PCA_DEGENERATE = "pca-degenerate"


@dataclass(frozen=True)
class Candidate:
    tag: str
    rotation: Rotation
    diagnostics: dict[str, Any]


@dataclass(frozen=True)
class CandidateSet:
    object_id: str
    candidates: tuple[Candidate, ...]
    flags: tuple[str, ...]

    def __post_init__(self):
        tags = tuple(c.tag for c in self.candidates)
        if tags != CANDIDATE_TAGS:
            raise ValueError(f"candidate tags must be {CANDIDATE_TAGS}, got {tags}")

    def by_tag(self, tag: str) -> Candidate:
        return self.candidates[CANDIDATE_TAGS.index(tag)]


def _semantic_on(cloud: LabeledCloud, template: CategoryTemplate,
                 cfg: CriterionConfig) -> tuple[Rotation, dict[str, Any]]:
    res = horizontal_semantic(cloud, template, cfg)
    return res.r_s, {"theta_deg": float(np.degrees(res.theta_star))}


def generate_candidates(object_mesh: Mesh | None, object_cloud: LabeledCloud,
                        template: CategoryTemplate,
                        cfg: CriterionConfig = CriterionConfig(),
                        object_id: str = "",
                        upright_scorer: UprightScorer | None = None) -> CandidateSet:
    """Run all criteria branches and assemble the fixed-five candidate set."""
    flags: list[str] = []

    geo = horizontal_geometric(object_cloud, template, cfg)
    if geo.continuous_symmetry:
        flags.append(FLAG_CONTINUOUS_SYMMETRY)
    theta_deg = float(np.degrees(geo.theta_star))
    e_at = float(np.interp(geo.theta_star % (2 * np.pi), geo.profile.thetas, geo.profile.e_g,
                           period=2 * np.pi))
    hg = Candidate("HG", geo.r_g, {"theta_deg": theta_deg, "e_g": e_at})
    hg_flip = Candidate("HG_FLIP", geo.r_invg,
                        {"theta_deg": float((theta_deg + 180.0) % 360.0)})

    semantic_ok = True
    try:
        sem = horizontal_semantic(object_cloud, template, cfg, geometric=geo)
        hs = Candidate("HS", sem.r_s, {"theta_deg": float(np.degrees(sem.theta_star))})
    except SemanticUnavailableError:
        semantic_ok = False
        flags.append(FLAG_SEMANTIC_UNAVAILABLE)
        hs = Candidate("HS", geo.r_g, {"fallback": "HG"})

    # vertical: support surface, then horizontal semantic on the uprighted cloud
    sup_diag: dict[str, Any] = {}
    try:
        if object_mesh is None:
            raise NoStablePoseError("no mesh available for support analysis")
        supports = support_candidates(object_mesh)
        chosen = select_upright(supports, scorer=upright_scorer, mesh=object_mesh)
        sup_diag = {"com_margin": chosen.com_margin, "polygon_area": chosen.polygon_area}
        if semantic_ok:
            r_s2, d = _semantic_on(rotate(object_cloud, chosen.rotation), template, cfg)
            sup_hs = Candidate("SUP_HS", r_s2 @ chosen.rotation, {**sup_diag, **d})
        else:
            sup_hs = Candidate("SUP_HS", chosen.rotation,
                               {**sup_diag, "fallback": "SUP-only"})
    except (NoStablePoseError, DegenerateGeometryError):
        if FLAG_NO_STABLE_POSE not in flags:
            flags.append(FLAG_NO_STABLE_POSE)
        sup_hs = Candidate("SUP_HS", hs.rotation, {"fallback": "HS"})

    # vertical: PCA with semantic polarity, then horizontal semantic
    try:
        if semantic_ok:
            pca = pca_align(object_cloud, template)
            pca_diag = {"pca_costs": [float(c) for c in pca.costs],
                        "pca_index": pca.index, "pca_ambiguous": pca.ambiguous}
            r_s3, d = _semantic_on(rotate(object_cloud, pca.r_pca), template, cfg)
            pca_hs = Candidate("PCA_HS", r_s3 @ pca.r_pca, {**pca_diag, **d})
        else:
            # no labels: resolve polarity by full-cloud Chamfer instead
            rots = pca_candidate_rotations(object_cloud, template)
            costs = [chamfer_distance(template.cloud.points, r.apply(object_cloud.points))
                     for r in rots]
            i = int(np.argmin(costs))
            pca_hs = Candidate("PCA_HS", rots[i],
                               {"fallback": "PCA-only", "pca_costs": costs, "pca_index": i})
    except (PcaDegenerateError, DegenerateGeometryError):
        flags.append(FLAG_PCA_DEGENERATE)
        pca_hs = Candidate("PCA_HS", hs.rotation, {"fallback": "HS"})

    return CandidateSet(object_id=object_id,
                        candidates=(hs, hg, hg_flip, sup_hs, pca_hs),
                        flags=tuple(flags))
