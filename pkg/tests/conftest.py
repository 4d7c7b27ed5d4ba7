from datetime import datetime, timezone

import pytest

from face3dqa.core import Dimension, RatingRecord

T0 = datetime(2025, 6, 1, 12, 0, 0, tzinfo=timezone.utc)


def rating(subject: str, item: str, dim: Dimension, score: float) -> RatingRecord:
    return RatingRecord(subject_id=subject, item_id=item, dimension=dim,
                        score=score, timestamp=T0)


def ratings_for_subject(subject: str, scores_by_item: dict[str, float],
                        dims=(Dimension.QUALITY, Dimension.AUTHENTICITY)):
    """One record per (item, dimension) with the same score on both dimensions."""
    return [rating(subject, item, dim, score)
            for item, score in scores_by_item.items() for dim in dims]


@pytest.fixture
def tmp_manifest(tmp_path):
    """Small three-item manifest on disk, with snapshot dimensions."""
    from face3dqa.core import DatasetManifest, ManifestItem
    from face3dqa.io import write_manifest

    manifest = DatasetManifest(items=tuple(
        ManifestItem(id=f"item-{i}", model_tag=f"gen{i % 2}",
                     video=f"clips/item-{i}.mp4", snapshot=f"snaps/item-{i}.png",
                     snapshot_width=1536, snapshot_height=512)
        for i in range(3)
    ))
    path = tmp_path / "manifest.json"
    write_manifest(manifest, path)
    return manifest, path
