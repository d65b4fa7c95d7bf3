"""Readers and writers for frame, annotation, geometry, bundle and metrics files.

Frame files come in two variants. Text::

    SFRD1 <n> <count>
    frame <id>
    <n rows of n space-separated decimals>
    ...

Binary: a 16-byte header (``SFRB``, u32 n, u32 count, u32 reserved), then
``count`` row-major n x n grids of little-endian float32. Binary frames are
numbered 0..count-1.
"""

from __future__ import annotations

import csv
import struct
from pathlib import Path

import numpy as np

from .errors import SFRError
from .types import CameraIntrinsics, CropBox, DepthFrame, JointSetUVD, NormalizationCube

TEXT_MAGIC = "SFRD1"
BINARY_MAGIC = b"SFRB"
ANNOTATION_HEADER = ("frame_id", "joint_id", "u", "v", "d")
GEOMETRY_HEADER = ("frame_id", "fx", "fy", "cx", "cy", "cube_x", "cube_y", "cube_z", "cube_edge",
                   "crop_u0", "crop_v0", "crop_w", "crop_h")
MANIFEST_HEADER = ("frame_id", "joint_id", "kind", "file")


class FormatError(SFRError, ValueError):
    """Malformed input file; the message names the file and line."""


def fmt(x) -> str:
    return repr(float(x))


# frames

def write_frames(path, frames, ids=None, binary: bool = False) -> None:
    grids = [f.values if isinstance(f, DepthFrame) else np.asarray(f, dtype=float) for f in frames]
    n = grids[0].shape[0] if grids else 0
    if binary:
        with open(path, "wb") as fh:
            fh.write(BINARY_MAGIC + struct.pack("<III", n, len(grids), 0))
            for g in grids:
                fh.write(np.ascontiguousarray(g, dtype="<f4").tobytes())
        return
    ids = [str(i) for i in range(len(grids))] if ids is None else [str(i) for i in ids]
    with open(path, "w") as fh:
        fh.write(f"{TEXT_MAGIC} {n} {len(grids)}\n")
        for fid, g in zip(ids, grids):
            fh.write(f"frame {fid}\n")
            for row in g:
                fh.write(" ".join(fmt(x) for x in row) + "\n")


def read_grids(path):
    """Return (ids, list of float arrays) without DepthFrame validation."""
    path = Path(path)
    with open(path, "rb") as fh:
        head = fh.read(4)
    if head == BINARY_MAGIC:
        return _read_binary(path)
    return _read_text(path)


def read_frames(path):
    """Return (ids, list of DepthFrame)."""
    ids, grids = read_grids(path)
    frames = []
    for fid, g in zip(ids, grids):
        try:
            frames.append(DepthFrame(g))
        except ValueError as e:
            raise FormatError(f"{path}: frame {fid}: {e}") from None
    return ids, frames


def _read_binary(path):
    data = Path(path).read_bytes()
    if len(data) < 16:
        raise FormatError(f"{path}: truncated header")
    n, count, _ = struct.unpack("<III", data[4:16])
    expected = 16 + 4 * n * n * count
    if len(data) != expected:
        raise FormatError(f"{path}: expected {expected} bytes for {count} frames of {n}x{n}, got {len(data)}")
    arr = np.frombuffer(data, dtype="<f4", offset=16).astype(float).reshape(count, n, n)
    return [str(i) for i in range(count)], list(arr)


def _read_text(path):
    with open(path) as fh:
        lines = fh.read().splitlines()
    if not lines:
        raise FormatError(f"{path}: no frames (empty file)")
    head = lines[0].split()
    if len(head) != 3 or head[0] != TEXT_MAGIC:
        raise FormatError(f"{path}:1: expected header '{TEXT_MAGIC} <n> <count>'")
    try:
        n, count = int(head[1]), int(head[2])
    except ValueError:
        raise FormatError(f"{path}:1: resolution and count must be integers") from None
    ids, grids = [], []
    pos = 1
    for _ in range(count):
        if pos >= len(lines):
            raise FormatError(f"{path}:{pos + 1}: expected 'frame <id>', got end of file")
        tag = lines[pos].split()
        if len(tag) != 2 or tag[0] != "frame":
            raise FormatError(f"{path}:{pos + 1}: expected 'frame <id>'")
        ids.append(tag[1])
        rows = []
        for r in range(n):
            ln = pos + 2 + r
            if ln > len(lines):
                raise FormatError(f"{path}:{ln}: frame {tag[1]} ends after {r} of {n} rows")
            try:
                row = [float(x) for x in lines[ln - 1].split()]
            except ValueError:
                raise FormatError(f"{path}:{ln}: non-numeric depth value") from None
            if len(row) != n:
                raise FormatError(f"{path}:{ln}: expected {n} values, got {len(row)}")
            rows.append(row)
        grids.append(np.array(rows))
        pos += n + 1
    if any(ln.strip() for ln in lines[pos:]):
        raise FormatError(f"{path}:{pos + 1}: trailing content after {count} frames")
    return ids, grids


# annotations and predictions

def write_annotations(path, joint_sets: dict) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(ANNOTATION_HEADER)
        for fid, js in joint_sets.items():
            arr = js.joints if isinstance(js, JointSetUVD) else np.asarray(js)
            for j, (u, v, d) in enumerate(arr):
                w.writerow([fid, j, fmt(u), fmt(v), fmt(d)])


def read_annotations(path) -> dict:
    """Map frame id -> JointSetUVD, in file order. Joint ids must run 0..J-1."""
    rows: dict[str, dict[int, tuple]] = {}
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None:
            raise FormatError(f"{path}: empty annotation file")
        if tuple(h.strip() for h in header) != ANNOTATION_HEADER:
            raise FormatError(f"{path}:1: expected header {','.join(ANNOTATION_HEADER)}")
        for lineno, row in enumerate(reader, start=2):
            if not row:
                continue
            if len(row) != 5:
                raise FormatError(f"{path}:{lineno}: expected 5 fields, got {len(row)}")
            try:
                fid, j = row[0].strip(), int(row[1])
                u, v, d = (float(x) for x in row[2:])
            except ValueError:
                raise FormatError(f"{path}:{lineno}: malformed row {','.join(row)!r}") from None
            if not all(0.0 <= x <= 1.0 for x in (u, v, d)):
                raise FormatError(f"{path}:{lineno}: coordinates must lie in [0, 1]")
            frame_rows = rows.setdefault(fid, {})
            if j in frame_rows:
                raise FormatError(f"{path}:{lineno}: duplicate joint {j} for frame {fid}")
            frame_rows[j] = (u, v, d)
    out = {}
    for fid, joints in rows.items():
        if sorted(joints) != list(range(len(joints))):
            raise FormatError(f"{path}: frame {fid} joint ids are not 0..{len(joints) - 1}")
        out[fid] = JointSetUVD(np.array([joints[j] for j in range(len(joints))]))
    return out


# camera geometry

def write_geometry(path, geometry: dict) -> None:
    """``geometry`` maps frame id -> (CameraIntrinsics, NormalizationCube, CropBox)."""
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(GEOMETRY_HEADER)
        for fid, (intr, cube, crop) in geometry.items():
            w.writerow([fid] + [fmt(x) for x in (intr.fx, intr.fy, intr.cx, intr.cy, *cube.center, cube.edge,
                                                 crop.u0, crop.v0, crop.width, crop.height)])


def read_geometry(path) -> dict:
    out = {}
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None or tuple(h.strip() for h in header) != GEOMETRY_HEADER:
            raise FormatError(f"{path}:1: expected header {','.join(GEOMETRY_HEADER)}")
        for lineno, row in enumerate(reader, start=2):
            if not row:
                continue
            try:
                vals = [float(x) for x in row[1:]]
                if len(vals) != 12:
                    raise ValueError
                intr = CameraIntrinsics(*vals[0:4])
                cube = NormalizationCube(tuple(vals[4:7]), vals[7])
                crop = CropBox(*vals[8:12])
            except ValueError as e:
                raise FormatError(f"{path}:{lineno}: malformed geometry row ({e or 'bad field count'})") from None
            out[row[0].strip()] = (intr, cube, crop)
    return out


# SFR bundles

def write_bundle(directory, entries) -> None:
    """Write grids plus manifest.csv.

    ``entries`` yields (frame_id, joint_id, kind, grid) with kind in
    {heatmap, depthmap}; each grid goes to its own single-frame binary file.
    """
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    with open(directory / "manifest.csv", "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(MANIFEST_HEADER)
        for fid, j, kind, grid in entries:
            name = f"f{fid}_j{j}_{kind}.sfrb"
            write_frames(directory / name, [grid], binary=True)
            w.writerow([fid, j, kind, name])


def read_bundle(directory) -> dict:
    """Map frame id -> {"heatmap": (J, n, n), "depthmap": (J, n, n)}."""
    directory = Path(directory)
    grids: dict = {}
    with open(directory / "manifest.csv", newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None or tuple(header) != MANIFEST_HEADER:
            raise FormatError(f"{directory / 'manifest.csv'}:1: expected header {','.join(MANIFEST_HEADER)}")
        for lineno, row in enumerate(reader, start=2):
            if len(row) != 4:
                raise FormatError(f"{directory / 'manifest.csv'}:{lineno}: expected 4 fields")
            fid, j, kind, name = row[0], int(row[1]), row[2], row[3]
            _, g = _read_binary(directory / name)
            grids.setdefault(fid, {}).setdefault(kind, {})[j] = g[0]
    out = {}
    for fid, kinds in grids.items():
        out[fid] = {kind: np.stack([by_joint[j] for j in sorted(by_joint)]) for kind, by_joint in kinds.items()}
    return out


# metrics

def write_metrics(path, per_joint, overall, thresholds, fractions) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["[per_joint]"])
        w.writerow(["joint_id", "mean_mm"])
        for j, e in enumerate(per_joint):
            w.writerow([j, fmt(e)])
        w.writerow(["overall", fmt(overall)])
        w.writerow(["[threshold_curve]"])
        w.writerow(["threshold_mm", "fraction"])
        for t, f in zip(thresholds, fractions):
            w.writerow([fmt(t), fmt(f)])


def read_metrics(path):
    """Return (per_joint array, overall, thresholds, fractions)."""
    section = None
    per_joint, overall, thr, frac = [], None, [], []
    with open(path, newline="") as fh:
        for row in csv.reader(fh):
            if not row:
                continue
            if row[0].startswith("["):
                section = row[0]
                continue
            if row[0] in ("joint_id", "threshold_mm"):
                continue
            if section == "[per_joint]":
                if row[0] == "overall":
                    overall = float(row[1])
                else:
                    per_joint.append(float(row[1]))
            elif section == "[threshold_curve]":
                thr.append(float(row[0]))
                frac.append(float(row[1]))
    return np.array(per_joint), overall, np.array(thr), np.array(frac)
