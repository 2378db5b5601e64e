"""Per-category canonical templates."""

from __future__ import annotations

from dataclasses import dataclass

from .geometry import LabeledCloud
from .metrics import NO_SYMMETRY, SymmetrySpec


@dataclass(frozen=True)
class CategoryTemplate:
    """The reference instance defining a category's canonical frame.

    The cloud is expected to be unit-sphere normalized; ``axis_convention``
    is a human-readable note such as "z = front, y = up".
    """

    category: str
    cloud: LabeledCloud
    symmetry: SymmetrySpec = NO_SYMMETRY
    axis_convention: str = ""
    template_id: str = ""
