"""Line-delimited JSON corpus manifests.

One record per sample: image path (relative to the manifest), class
label string, integer membrane bbox, line intensities, faint flag, and
the generator seed plus enough scene geometry (line polygons) for
attribution forensics. Keys are sorted and floats rounded on write so
identical corpora serialize to identical bytes.
"""
from __future__ import annotations

import json
import math
import os
from pathlib import Path


def bbox_round_out(bbox) -> tuple:
    """Float (x, y, w, h) -> smallest enclosing integer box."""
    x, y, w, h = bbox
    x0 = math.floor(x)
    y0 = math.floor(y)
    x1 = math.ceil(x + w)
    y1 = math.ceil(y + h)
    return (x0, y0, x1 - x0, y1 - y0)


def _round_poly(poly, nd=4):
    return [[round(float(a), nd), round(float(b), nd)] for a, b in poly]


def record_for(path: str, params, gt) -> dict:
    return {
        "path": path,
        "class": gt.label.display,
        "bbox": list(bbox_round_out(gt.membrane_bbox)),
        "control_intensity": round(float(gt.control_intensity), 6),
        "test_intensity": round(float(gt.test_intensity), 6),
        "faint": bool(gt.faint),
        "seed": int(params.seed),
        "canvas": [params.canvas_w, params.canvas_h],
        "rotation_deg": round(float(params.rotation_deg), 4),
        "noise_sigma": round(float(params.noise_sigma), 6),
        "illumination_gain": round(float(params.illumination_gain), 6),
        "membrane_polygon": _round_poly(gt.membrane_polygon),
        "control_polygon": _round_poly(gt.control_polygon),
        "test_polygon": _round_poly(gt.test_polygon),
    }


def write_manifest(path, records) -> None:
    path = Path(path)
    tmp = path.with_suffix(path.suffix + ".tmp")
    with open(tmp, "w") as f:
        for rec in records:
            f.write(json.dumps(rec, sort_keys=True) + "\n")
    os.replace(tmp, path)


def read_manifest(path):
    records = []
    with open(path) as f:
        for line in f:
            line = line.strip()
            if line:
                records.append(json.loads(line))
    return records


def image_path(manifest_path, record) -> Path:
    return Path(manifest_path).parent / record["path"]
