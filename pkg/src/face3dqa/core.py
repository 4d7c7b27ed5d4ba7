"""Shared domain types for subjective quality assessment of generated 3D-face media.

Everything here is an immutable value object; instances can be shared freely
across threads. Wire formats (ratings JSONL, fixations JSON, manifest JSON)
live in :mod:`face3dqa.io`.
"""

from __future__ import annotations

import enum
import re
from dataclasses import dataclass, field
from datetime import datetime, timezone


class UnknownCategoryError(ValueError):
    """Raised when a string does not name one of the nine distortion categories."""


class PointOutOfBoundsError(ValueError):
    """Raised when a click point falls outside its image."""


class Dimension(enum.Enum):
    """The two independent rating dimensions."""

    QUALITY = "quality"
    AUTHENTICITY = "authenticity"

    def __str__(self) -> str:
        return self.value

    @classmethod
    def parse(cls, name: str) -> "Dimension":
        try:
            return cls(name.strip().lower())
        except ValueError:
            raise ValueError(f"unknown dimension: {name!r}") from None


class DistortionCategory(enum.Enum):
    """The nine distortion classes used to standardize free-text descriptions.

    Enum values are the canonical display strings.
    """

    EYE = "Eye Distortions"
    MOUTH = "Mouth Distortions"
    HAIR = "Hair Distortions"
    FACIAL_FEATURE = "Facial Feature Distortions"
    HEAD_STRUCTURE = "Head Structure Distortions"
    OVERLAP_OR_BLENDING = "Overlap or Blending Issues"
    BLURRING_EXPOSURE_GRAIN = "Blurring / Exposure / Grain"
    ACCESSORIES_OR_CLOTH = "Accessories or Cloth Distortions"
    NO_DISTORTION = "No Distortion"

    def __str__(self) -> str:
        return self.value


def _category_key(name: str) -> str:
    # case-insensitive and punctuation-tolerant: compare alphanumerics only
    return re.sub(r"[^a-z0-9]+", "", name.lower())


_CATEGORY_INDEX = {_category_key(c.value): c for c in DistortionCategory}


def parse_category(name: str) -> DistortionCategory:
    """Match ``name`` to one of the nine canonical categories.

    Matching ignores case and punctuation, so ``"no distortion"`` and
    ``"Blurring/Exposure/Grain"`` both resolve.
    """
    cat = _CATEGORY_INDEX.get(_category_key(name))
    if cat is None:
        raise UnknownCategoryError(f"unknown distortion category: {name!r}")
    return cat


class QualityLevel(enum.IntEnum):
    """Five ordered text quality levels; ordering follows the int value."""

    BAD = 1
    POOR = 2
    FAIR = 3
    GOOD = 4
    EXCELLENT = 5

    @property
    def label(self) -> str:
        return self.name.lower()


#: Slider range for both rating dimensions.
SCORE_MIN = 0.0
SCORE_MAX = 5.0


@dataclass(frozen=True)
class ItemId:
    """Identity of one generated face sample: opaque id plus generator tag."""

    id: str
    model_tag: str = ""

    def __post_init__(self) -> None:
        if not self.id:
            raise ValueError("item id must be non-empty")


@dataclass(frozen=True)
class RatingRecord:
    """One subject's raw slider score for one item on one dimension.

    The slider is continuous; the raw real value is stored unmodified.
    """

    subject_id: str
    item_id: str
    dimension: Dimension
    score: float
    timestamp: datetime

    @property
    def key(self) -> tuple[str, str, Dimension]:
        return (self.subject_id, self.item_id, self.dimension)

    def in_range(self) -> bool:
        return SCORE_MIN <= self.score <= SCORE_MAX


@dataclass(frozen=True)
class DistortionLabel:
    """Distortion categorization of one item by one annotator, with free text."""

    item_id: str
    annotator_id: str
    categories: frozenset[DistortionCategory]
    description: str = ""

    def __post_init__(self) -> None:
        if not self.categories:
            raise ValueError("categories must be non-empty")
        if DistortionCategory.NO_DISTORTION in self.categories and len(self.categories) > 1:
            raise ValueError("'No Distortion' excludes every other category")


@dataclass(frozen=True)
class FixationAnnotation:
    """Clicked distortion points of one annotator on one item's snapshot image.

    ``points`` may be empty (nothing marked). Every point must satisfy
    ``0 <= x < image_width`` and ``0 <= y < image_height``.
    """

    item_id: str
    annotator_id: str
    image_width: int
    image_height: int
    points: tuple[tuple[int, int], ...] = ()

    def __post_init__(self) -> None:
        if self.image_width <= 0 or self.image_height <= 0:
            raise ValueError("image dimensions must be positive")
        for x, y in self.points:
            if not (0 <= x < self.image_width and 0 <= y < self.image_height):
                raise PointOutOfBoundsError(
                    f"point ({x},{y}) outside {self.image_width}x{self.image_height} image"
                )


@dataclass(frozen=True)
class ManifestItem:
    """One dataset entry: identity plus the media paths that present it."""

    id: str
    model_tag: str = ""
    video: str = ""
    snapshot: str = ""
    snapshot_width: int | None = None
    snapshot_height: int | None = None

    def __post_init__(self) -> None:
        if not self.id:
            raise ValueError("manifest item id must be non-empty")

    @property
    def item_id(self) -> ItemId:
        return ItemId(self.id, self.model_tag)


@dataclass(frozen=True)
class DatasetManifest:
    """The item universe of one experiment."""

    items: tuple[ManifestItem, ...]

    def __post_init__(self) -> None:
        seen: set[str] = set()
        for it in self.items:
            if it.id in seen:
                raise ValueError(f"duplicate item id in manifest: {it.id!r}")
            seen.add(it.id)

    def ids(self) -> list[str]:
        return [it.id for it in self.items]

    def by_id(self, item_id: str) -> ManifestItem:
        for it in self.items:
            if it.id == item_id:
                return it
        raise KeyError(item_id)


@dataclass(frozen=True)
class ValidationFinding:
    kind: str  # "duplicate" | "out_of_range" | "unknown_item"
    message: str
    subject_id: str = ""
    item_id: str = ""


@dataclass
class ValidationReport:
    findings: list[ValidationFinding] = field(default_factory=list)

    @property
    def ok(self) -> bool:
        return not self.findings

    def of_kind(self, kind: str) -> list[ValidationFinding]:
        return [f for f in self.findings if f.kind == kind]


def validate_ratings(
    records: list[RatingRecord], known_items: set[str] | None = None
) -> ValidationReport:
    """Report duplicate keys, out-of-range scores, and unknown item ids.

    Report-only: never raises on bad data.
    """
    report = ValidationReport()
    seen: set[tuple[str, str, Dimension]] = set()
    for rec in records:
        if rec.key in seen:
            report.findings.append(
                ValidationFinding(
                    "duplicate",
                    f"duplicate rating for subject={rec.subject_id} item={rec.item_id} "
                    f"dimension={rec.dimension}",
                    subject_id=rec.subject_id,
                    item_id=rec.item_id,
                )
            )
        seen.add(rec.key)
        if not rec.in_range():
            report.findings.append(
                ValidationFinding(
                    "out_of_range",
                    f"score {rec.score} outside [{SCORE_MIN},{SCORE_MAX}] for "
                    f"subject={rec.subject_id} item={rec.item_id}",
                    subject_id=rec.subject_id,
                    item_id=rec.item_id,
                )
            )
        if known_items is not None and rec.item_id not in known_items:
            report.findings.append(
                ValidationFinding(
                    "unknown_item",
                    f"unknown item id {rec.item_id!r}",
                    subject_id=rec.subject_id,
                    item_id=rec.item_id,
                )
            )
    return report


def utcnow() -> datetime:
    return datetime.now(timezone.utc)
