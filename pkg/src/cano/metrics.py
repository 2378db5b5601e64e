"""Symmetry-aware angular error and evaluation metrics (Acc@deg, Abs, IQR, IC, GEC)."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from .errors import InvalidInputError
from .geometry import LabeledCloud, Rotation, geodesic_angle, rotate


@dataclass(frozen=True)
class SymmetrySpec:
    """Per-category rotational symmetry: none, discrete n-fold, or continuous."""

    kind: str = "none"  # none | discrete | continuous
    axis: np.ndarray = field(default_factory=lambda: np.array([0.0, 0.0, 1.0]))
    angle_deg: float | None = None  # discrete only; must divide 360

    def __post_init__(self):
        if self.kind not in ("none", "discrete", "continuous"):
            raise InvalidInputError(f"unknown symmetry kind {self.kind!r}")
        axis = np.asarray(self.axis, dtype=np.float64)
        n = np.linalg.norm(axis)
        if n < 1e-12:
            raise InvalidInputError("symmetry axis must be nonzero")
        object.__setattr__(self, "axis", axis / n)
        if self.kind == "discrete":
            if self.angle_deg is None or self.angle_deg <= 0:
                raise InvalidInputError("discrete symmetry requires a positive angle")
            order = 360.0 / self.angle_deg
            if abs(order - round(order)) > 1e-9 or round(order) < 2:
                raise InvalidInputError("discrete symmetry angle must divide 360 with order >= 2")

    @property
    def order(self) -> int:
        if self.kind != "discrete":
            raise InvalidInputError("order is defined only for discrete symmetry")
        return int(round(360.0 / self.angle_deg))

    def elements(self) -> list[Rotation]:
        """The discrete symmetry rotations about the axis (identity included)."""
        if self.kind != "discrete":
            return [Rotation.identity()]
        step = np.radians(self.angle_deg)
        return [Rotation.about_axis(self.axis, j * step) for j in range(self.order)]


NO_SYMMETRY = SymmetrySpec()


@dataclass(frozen=True)
class ErrorSample:
    object_id: str
    predicted: Rotation
    ground_truth: Rotation
    symmetry: SymmetrySpec = NO_SYMMETRY

    @property
    def error_deg(self) -> float:
        return sym_aware_angle(self.predicted, self.ground_truth, self.symmetry)


def sym_aware_angle(pred: Rotation, gt: Rotation, sym: SymmetrySpec = NO_SYMMETRY) -> float:
    """Angular error in degrees, minimized over the symmetry group of gt.

    Continuous symmetry reduces to axis-alignment error (in-axis spin is free).
    """
    if sym.kind == "none":
        return geodesic_angle(pred, gt)
    if sym.kind == "discrete":
        return min(geodesic_angle(pred, gt @ s) for s in sym.elements())
    a, b = pred.apply(sym.axis), gt.apply(sym.axis)
    cos = min(1.0, max(-1.0, float(a @ b)))
    if cos > 1.0 - 1e-12:
        return 0.0
    return float(np.degrees(np.arccos(cos)))


def _errors(samples: Sequence) -> np.ndarray:
    if len(samples) == 0:
        raise InvalidInputError("no error samples")
    return np.array([s.error_deg if isinstance(s, ErrorSample) else float(s)
                     for s in samples])


def accuracy_at(samples: Sequence, threshold_deg: float) -> float:
    """Fraction of samples with error <= threshold."""
    errs = _errors(samples)
    return float((errs <= threshold_deg).mean())


def mean_abs_error(samples: Sequence) -> float:
    return float(_errors(samples).mean())


def iqr(samples: Sequence) -> float:
    """Q3 - Q1 with linear-interpolation (type-7) quantiles."""
    errs = _errors(samples)
    q1, q3 = np.percentile(errs, [25, 75])
    return float(q3 - q1)


Canonicalizer = Callable[[LabeledCloud], Rotation]
RotationSampler = Callable[[np.random.Generator], Rotation]


@dataclass(frozen=True)
class ConsistencyResult:
    value: float  # radians
    n_trials: int
    failures: int


def _canonical_orientations(canonicalizer: Canonicalizer, instance: LabeledCloud,
                            n_trials: int, seed: int,
                            sampler: RotationSampler | None) -> tuple[list[Rotation], int]:
    if n_trials < 2:
        raise InvalidInputError("need at least 2 trials")
    rng = np.random.default_rng(seed)
    sampler = sampler or Rotation.random
    orientations, failures = [], 0
    for _ in range(n_trials):
        r = sampler(rng)
        try:
            c = canonicalizer(rotate(instance, r))
        except Exception:
            failures += 1
            continue
        orientations.append(c @ r)
    return orientations, failures


def instance_consistency(canonicalizer: Canonicalizer, instance: LabeledCloud,
                         n_trials: int, seed: int = 0,
                         symmetry: SymmetrySpec = NO_SYMMETRY,
                         sampler: RotationSampler | None = None) -> ConsistencyResult:
    """Mean pairwise sym-aware distance (radians) of canonical orientations
    across seeded random re-orientations of one instance."""
    orients, failures = _canonical_orientations(canonicalizer, instance, n_trials, seed, sampler)
    if len(orients) < 2:
        raise InvalidInputError("fewer than 2 successful trials")
    dists = [np.radians(sym_aware_angle(orients[j], orients[l], symmetry))
             for j in range(len(orients)) for l in range(j + 1, len(orients))]
    return ConsistencyResult(float(np.mean(dists)), n_trials, failures)


def gt_equivariance_consistency(canonicalizer: Canonicalizer, instance: LabeledCloud,
                                gt_canonical: Rotation, n_trials: int, seed: int = 0,
                                symmetry: SymmetrySpec = NO_SYMMETRY,
                                sampler: RotationSampler | None = None) -> ConsistencyResult:
    """Mean sym-aware distance (radians) of canonical orientations to the
    annotated ground-truth canonical frame."""
    orients, failures = _canonical_orientations(canonicalizer, instance, n_trials, seed, sampler)
    if not orients:
        raise InvalidInputError("no successful trials")
    dists = [np.radians(sym_aware_angle(o, gt_canonical, symmetry)) for o in orients]
    return ConsistencyResult(float(np.mean(dists)), n_trials, failures)
