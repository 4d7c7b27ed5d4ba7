"""Wire formats for the core types.

Ratings travel as JSON-lines (one object per line), fixation annotations and
distortion labels as JSON arrays, the dataset manifest as a single JSON
object. All files are UTF-8. Timestamps are RFC-3339.
"""

from __future__ import annotations

import json
from datetime import datetime, timezone
from pathlib import Path
from typing import Iterable

from .core import (
    DatasetManifest,
    Dimension,
    DistortionLabel,
    FixationAnnotation,
    ManifestItem,
    RatingRecord,
    parse_category,
)


class SchemaError(ValueError):
    """An input file does not match its expected schema."""


def parse_timestamp(value: str) -> datetime:
    # RFC-3339 allows a trailing Z; datetime.fromisoformat (3.10) does not.
    ts = datetime.fromisoformat(value.replace("Z", "+00:00"))
    if ts.tzinfo is None:
        ts = ts.replace(tzinfo=timezone.utc)
    return ts


def format_timestamp(ts: datetime) -> str:
    if ts.tzinfo is None:
        ts = ts.replace(tzinfo=timezone.utc)
    return ts.isoformat()


# -- ratings JSONL ----------------------------------------------------------


def rating_to_obj(rec: RatingRecord) -> dict:
    return {
        "subject_id": rec.subject_id,
        "item_id": rec.item_id,
        "dimension": rec.dimension.value,
        "score": rec.score,
        "timestamp": format_timestamp(rec.timestamp),
    }


def rating_from_obj(obj: dict, where: str = "") -> RatingRecord:
    try:
        return RatingRecord(
            subject_id=str(obj["subject_id"]),
            item_id=str(obj["item_id"]),
            dimension=Dimension.parse(obj["dimension"]),
            score=float(obj["score"]),
            timestamp=parse_timestamp(obj["timestamp"]),
        )
    except (KeyError, TypeError, ValueError) as exc:
        raise SchemaError(f"bad rating record{where}: {exc}") from exc


def write_ratings_jsonl(records: Iterable[RatingRecord], path: str | Path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for rec in records:
            fh.write(json.dumps(rating_to_obj(rec), sort_keys=True))
            fh.write("\n")


def read_ratings_jsonl(path: str | Path) -> list[RatingRecord]:
    records = []
    with open(path, "r", encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.strip()
            if not line:
                continue
            try:
                obj = json.loads(line)
            except json.JSONDecodeError as exc:
                raise SchemaError(f"{path}:{lineno}: not valid JSON: {exc}") from exc
            records.append(rating_from_obj(obj, where=f" at {path}:{lineno}"))
    return records


# -- fixations JSON ---------------------------------------------------------


def fixation_to_obj(ann: FixationAnnotation) -> dict:
    return {
        "item_id": ann.item_id,
        "annotator_id": ann.annotator_id,
        "image_width": ann.image_width,
        "image_height": ann.image_height,
        "points": [[x, y] for x, y in ann.points],
    }


def fixation_from_obj(obj: dict, where: str = "") -> FixationAnnotation:
    try:
        return FixationAnnotation(
            item_id=str(obj["item_id"]),
            annotator_id=str(obj["annotator_id"]),
            image_width=int(obj["image_width"]),
            image_height=int(obj["image_height"]),
            points=tuple((int(x), int(y)) for x, y in obj.get("points", [])),
        )
    except (KeyError, TypeError, ValueError) as exc:
        raise SchemaError(f"bad fixation annotation{where}: {exc}") from exc


def write_fixations_json(anns: Iterable[FixationAnnotation], path: str | Path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        json.dump([fixation_to_obj(a) for a in anns], fh, indent=2, sort_keys=True)
        fh.write("\n")


def read_fixations_json(path: str | Path) -> list[FixationAnnotation]:
    with open(path, "r", encoding="utf-8") as fh:
        data = json.load(fh)
    if not isinstance(data, list):
        raise SchemaError(f"{path}: expected a JSON array of fixation annotations")
    return [fixation_from_obj(obj, where=f" in {path}[{i}]") for i, obj in enumerate(data)]


# -- distortion labels JSON -------------------------------------------------


def label_to_obj(label: DistortionLabel) -> dict:
    return {
        "item_id": label.item_id,
        "annotator_id": label.annotator_id,
        "categories": sorted(c.value for c in label.categories),
        "description": label.description,
    }


def label_from_obj(obj: dict, where: str = "") -> DistortionLabel:
    try:
        return DistortionLabel(
            item_id=str(obj["item_id"]),
            annotator_id=str(obj.get("annotator_id", "")),
            categories=frozenset(parse_category(c) for c in obj["categories"]),
            description=str(obj.get("description", "")),
        )
    except (KeyError, TypeError, ValueError) as exc:
        raise SchemaError(f"bad distortion label{where}: {exc}") from exc


def write_labels_json(labels: Iterable[DistortionLabel], path: str | Path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        json.dump([label_to_obj(l) for l in labels], fh, indent=2, sort_keys=True)
        fh.write("\n")


def read_labels_json(path: str | Path) -> list[DistortionLabel]:
    with open(path, "r", encoding="utf-8") as fh:
        data = json.load(fh)
    if not isinstance(data, list):
        raise SchemaError(f"{path}: expected a JSON array of distortion labels")
    return [label_from_obj(obj, where=f" in {path}[{i}]") for i, obj in enumerate(data)]


# -- dataset manifest -------------------------------------------------------


def manifest_item_to_obj(it: ManifestItem) -> dict:
    obj: dict = {"id": it.id, "model_tag": it.model_tag, "video": it.video, "snapshot": it.snapshot}
    if it.snapshot_width is not None:
        obj["snapshot_width"] = it.snapshot_width
    if it.snapshot_height is not None:
        obj["snapshot_height"] = it.snapshot_height
    return obj


def write_manifest(manifest: DatasetManifest, path: str | Path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(
            {"items": [manifest_item_to_obj(it) for it in manifest.items]},
            fh,
            indent=2,
            sort_keys=True,
        )
        fh.write("\n")


def load_manifest(path: str | Path, strict: bool = False) -> DatasetManifest:
    """Load a manifest; with ``strict`` every media path must resolve on disk.

    Relative media paths are resolved against the manifest's directory.
    """
    path = Path(path)
    with open(path, "r", encoding="utf-8") as fh:
        data = json.load(fh)
    if not isinstance(data, dict) or not isinstance(data.get("items"), list):
        raise SchemaError(f"{path}: manifest must be an object with an 'items' array")
    items = []
    for i, obj in enumerate(data["items"]):
        try:
            items.append(
                ManifestItem(
                    id=str(obj["id"]),
                    model_tag=str(obj.get("model_tag", "")),
                    video=str(obj.get("video", "")),
                    snapshot=str(obj.get("snapshot", "")),
                    snapshot_width=(
                        int(obj["snapshot_width"]) if "snapshot_width" in obj else None
                    ),
                    snapshot_height=(
                        int(obj["snapshot_height"]) if "snapshot_height" in obj else None
                    ),
                )
            )
        except (KeyError, TypeError, ValueError) as exc:
            raise SchemaError(f"bad manifest item at {path}[items][{i}]: {exc}") from exc
    manifest = DatasetManifest(items=tuple(items))
    if strict:
        base = path.parent
        for it in manifest.items:
            for media in (it.video, it.snapshot):
                if media and not (base / media).exists():
                    raise FileNotFoundError(f"manifest media path not found: {base / media}")
    return manifest
