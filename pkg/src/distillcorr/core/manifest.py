"""JSON-lines annotation manifest for correspondence pairs.

One record per line:

    {
      "schema_version": 1,
      "source": {"path": "...", "id": "...", "category": "cat"},
      "target": {"path": "...", "id": "...", "category": "cat"},
      "keypoints": [
        {"src": {"x": 1.0, "y": 2.0, "label": "left paw", "visible": true},
         "tgt": {"x": 3.0, "y": 4.0, "label": "left paw", "visible": true}},
        ...
      ],
      "target_bbox": [x_min, y_min, x_max, y_max]   # optional
      "source_bbox": [...]                           # optional
    }

Paths are resolved relative to the manifest file unless absolute.
"""
from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path
from typing import Iterator, Optional

from .types import BoundingBox, Keypoint

SCHEMA_VERSION = 1


@dataclass(frozen=True)
class PairRecord:
    """One manifest line; images stay on disk until loaded."""

    source_path: Path
    target_path: Path
    source_id: str
    target_id: str
    keypoints: tuple  # ((Keypoint, Keypoint), ...)
    category: Optional[str] = None
    target_bbox: Optional[BoundingBox] = None
    source_bbox: Optional[BoundingBox] = None


def _kp_to_json(kp: Keypoint) -> dict:
    d = {"x": float(kp.x), "y": float(kp.y), "visible": bool(kp.visible)}
    if kp.label is not None:
        d["label"] = kp.label
    return d


def _kp_from_json(d: dict) -> Keypoint:
    return Keypoint(
        x=float(d["x"]), y=float(d["y"]),
        label=d.get("label"), visible=bool(d.get("visible", True)),
    )


def record_to_json(rec: PairRecord) -> dict:
    out = {
        "schema_version": SCHEMA_VERSION,
        "source": {"path": str(rec.source_path), "id": rec.source_id},
        "target": {"path": str(rec.target_path), "id": rec.target_id},
        "keypoints": [
            {"src": _kp_to_json(s), "tgt": _kp_to_json(t)} for s, t in rec.keypoints
        ],
    }
    if rec.category is not None:
        out["source"]["category"] = rec.category
        out["target"]["category"] = rec.category
    if rec.target_bbox is not None:
        b = rec.target_bbox
        out["target_bbox"] = [b.x_min, b.y_min, b.x_max, b.y_max]
    if rec.source_bbox is not None:
        b = rec.source_bbox
        out["source_bbox"] = [b.x_min, b.y_min, b.x_max, b.y_max]
    return out


def record_from_json(d: dict, base: Optional[Path] = None) -> PairRecord:
    version = d.get("schema_version")
    if version != SCHEMA_VERSION:
        raise ValueError(f"unsupported manifest schema_version {version!r}")

    def resolve(p: str) -> Path:
        path = Path(p)
        if base is not None and not path.is_absolute():
            path = base / path
        return path

    kps = tuple(
        (_kp_from_json(e["src"]), _kp_from_json(e["tgt"])) for e in d.get("keypoints", [])
    )

    def bbox(key: str) -> Optional[BoundingBox]:
        if key not in d:
            return None
        x0, y0, x1, y1 = d[key]
        return BoundingBox(x0, y0, x1, y1)

    return PairRecord(
        source_path=resolve(d["source"]["path"]),
        target_path=resolve(d["target"]["path"]),
        source_id=str(d["source"]["id"]),
        target_id=str(d["target"]["id"]),
        keypoints=kps,
        category=d["source"].get("category"),
        target_bbox=bbox("target_bbox"),
        source_bbox=bbox("source_bbox"),
    )


def write_manifest(records, path) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w") as f:
        for rec in records:
            f.write(json.dumps(record_to_json(rec), sort_keys=True) + "\n")


def read_manifest(path) -> list[PairRecord]:
    return list(iter_manifest(path))


def iter_manifest(path) -> Iterator[PairRecord]:
    path = Path(path)
    base = path.parent
    with open(path) as f:
        for line in f:
            line = line.strip()
            if line:
                yield record_from_json(json.loads(line), base=base)
