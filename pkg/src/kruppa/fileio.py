"""Text formats: correspondences, intrinsics, results.

Correspondences are JSON lines, one ``{"x1": .., "y1": .., "x2": .., "y2": ..}``
object per pair; blank lines and lines starting with ``#`` are skipped.
Intrinsics and results are single JSON documents. Floats are written with
Python's shortest round-trip repr, keys sorted, so equal inputs give equal
bytes.
"""
from __future__ import annotations

import json
import math
import sys

import numpy as np

from .errors import ParseError, ValidationError
from .geometry import Intrinsics
from .types import Correspondences, EssentialModel, RelativePose

FIELDS = ("x1", "y1", "x2", "y2")


def _open_read(path):
    if str(path) == "-":
        return sys.stdin.read()
    with open(path, encoding="utf-8") as fh:
        return fh.read()


def parse_correspondences(text: str) -> Correspondences:
    rows = []
    for n, line in enumerate(text.splitlines(), start=1):
        s = line.strip()
        if not s or s.startswith("#"):
            continue
        try:
            rec = json.loads(s)
        except json.JSONDecodeError as exc:
            raise ParseError(f"malformed record ({exc.msg})", n) from None
        if not isinstance(rec, dict):
            raise ParseError("record must be a JSON object", n)
        missing = [k for k in FIELDS if k not in rec]
        if missing:
            raise ParseError(f"missing field(s) {', '.join(missing)}", n)
        vals = []
        for k in FIELDS:
            v = rec[k]
            if isinstance(v, bool) or not isinstance(v, (int, float)):
                raise ParseError(f"field {k} is not a number", n)
            if not math.isfinite(v):
                raise ValidationError(f"field {k} is not finite", n)
            vals.append(float(v))
        rows.append(vals)
    if not rows:
        return Correspondences(np.zeros((0, 2)), np.zeros((0, 2)))
    a = np.array(rows)
    return Correspondences(a[:, :2], a[:, 2:])


def read_correspondences(path) -> Correspondences:
    return parse_correspondences(_open_read(path))


def format_correspondences(c: Correspondences) -> str:
    lines = []
    for (x1, y1), (x2, y2) in zip(c.x1, c.x2):
        rec = {"x1": float(x1), "y1": float(y1), "x2": float(x2), "y2": float(y2)}
        lines.append(json.dumps(rec))
    return "".join(l + "\n" for l in lines)


def write_correspondences(path, c: Correspondences):
    write_text(path, format_correspondences(c))


def read_intrinsics(path) -> tuple:
    """(Intrinsics, image size or None) from ``{"k": [9 values], "image_size": [w, h]}``."""
    text = _open_read(path)
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ParseError(f"malformed intrinsics ({exc.msg})", exc.lineno) from None
    if not isinstance(doc, dict) or "k" not in doc:
        raise ParseError("intrinsics file needs a field k", 1)
    k = doc["k"]
    if not (isinstance(k, list) and len(k) == 9 and all(isinstance(v, (int, float)) and not isinstance(v, bool) for v in k)):
        raise ParseError("k must hold 9 numbers (row-major 3x3)", 1)
    if not all(math.isfinite(v) for v in k):
        raise ValidationError("k has a non-finite entry", 1)
    size = doc.get("image_size")
    return Intrinsics(np.array(k, dtype=float).reshape(3, 3)), (tuple(size) if size is not None else None)


def intrinsics_record(k: Intrinsics, image_size=None) -> dict:
    rec = {"k": floats(k.k)}
    if image_size is not None:
        rec["image_size"] = [int(v) for v in image_size]
    return rec


def model_record(m: EssentialModel, pose: RelativePose | None = None) -> dict:
    rec = {"source": m.source, "matrix": floats(m.matrix), "residual": float(m.residual)}
    if pose is not None:
        rec["pose"] = pose_record(pose)
    return rec


def pose_record(p: RelativePose) -> dict:
    return {"rotation": floats(p.rotation), "translation": floats(p.translation)}


def floats(a):
    return [float(v) for v in np.asarray(a, dtype=float).ravel()]


def dumps(doc) -> str:
    return json.dumps(doc, sort_keys=True, indent=1, allow_nan=False) + "\n"


def write_result(path, result: dict):
    write_text(path, dumps(result))


def read_result(path) -> dict:
    text = _open_read(path)
    try:
        return json.loads(text)
    except json.JSONDecodeError as exc:
        raise ParseError(f"malformed result ({exc.msg})", exc.lineno) from None


def write_text(path, text: str):
    if path is None or str(path) == "-":
        sys.stdout.write(text)
        sys.stdout.flush()
        return
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(text)
