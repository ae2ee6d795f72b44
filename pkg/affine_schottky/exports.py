"""
Report and Point Cloud Exports
Atomic JSON/CSV writers and the wings / domains / tiles samplers used for
external plotting, plus the trace table.
"""

import json
import logging
import math
import os
from enum import Enum
from pathlib import Path
from typing import Any, Iterable, List, Union

import numpy as np
import pandas as pd

from .affine import AffineDeformation, TileTrace, cone_boundary_cloud
from .errors import SpecValidationError
from .mtis import sample_wing
from .schottky import SchottkyGroup, Side

logger = logging.getLogger("AffineSchottkyCLI")

SCHEMA_VERSION = 1
EXPORT_KINDS = ("wings", "domains", "tiles")


def schema_header(kind: str) -> str:
    return f"# affine-schottky {kind} v{SCHEMA_VERSION}"


def coordinate_columns(dim: int) -> List[str]:
    return [f"x{k}" for k in range(dim)]


def _atomic_write_text(path: Union[str, Path], text: str) -> None:
    path = str(path)
    directory = os.path.dirname(path)
    if directory:
        os.makedirs(directory, exist_ok=True)
    temp_file = path + ".tmp"
    try:
        with open(temp_file, 'w', encoding='utf-8', newline='') as f:
            f.write(text)
        os.replace(temp_file, path)
    except Exception as e:
        logger.error(f"Failed to write {path}: {e}")
        if os.path.exists(temp_file):
            os.remove(temp_file)
        raise


def to_jsonable(obj: Any) -> Any:
    """Plain JSON values: numpy scalars and arrays unpacked, floats at 12 significant digits."""
    if isinstance(obj, dict):
        return {str(k): to_jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [to_jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return to_jsonable(obj.tolist())
    if isinstance(obj, Enum):
        return to_jsonable(obj.value)
    if isinstance(obj, (bool, np.bool_)):
        return bool(obj)
    if isinstance(obj, (int, np.integer)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        value = float(obj)
        if math.isnan(value):
            return "nan"
        if math.isinf(value):
            return "inf" if value > 0 else "-inf"
        return float(f"{value:.12g}")
    return obj


def dumps_report(report: Any) -> str:
    return json.dumps(to_jsonable(report), sort_keys=True, indent=2, ensure_ascii=False) + "\n"


def write_json_report(report: Any, path: Union[str, Path]) -> None:
    _atomic_write_text(path, dumps_report(report))
    logger.info(f"Report written to {path}")


def write_csv(frame: pd.DataFrame, path: Union[str, Path], kind: str) -> None:
    """CSV with the versioned schema comment as first line."""
    body = frame.to_csv(index=False, float_format="%.12g", lineterminator="\n")
    _atomic_write_text(path, schema_header(kind) + "\n" + body)
    logger.info(f"Wrote {len(frame)} {kind} rows to {path}")


def load_points(path: Union[str, Path], dim: int) -> np.ndarray:
    """
    Points file: CSV with columns x0..x{dim-1} (other columns ignored),
    or headerless rows of dim numbers. Comment lines start with '#'.
    """
    try:
        frame = pd.read_csv(path, comment="#")
    except (OSError, pd.errors.ParserError, pd.errors.EmptyDataError) as e:
        raise SpecValidationError(f"cannot read points from {path}: {e}") from e
    columns = coordinate_columns(dim)
    if all(c in frame.columns for c in columns):
        values = frame[columns]
    else:
        frame = pd.read_csv(path, comment="#", header=None)
        values = frame
    try:
        X = values.to_numpy(dtype=float)
    except ValueError as e:
        raise SpecValidationError(f"non-numeric point coordinates in {path}") from e
    if X.ndim != 2 or X.shape[1] != dim:
        raise SpecValidationError(f"points in {path} must have {dim} coordinates, got shape {X.shape}")
    if not np.all(np.isfinite(X)):
        raise SpecValidationError(f"points in {path} must be finite")
    return X


def _cloud_frame(X: np.ndarray, dim: int, **labels: Any) -> pd.DataFrame:
    frame = pd.DataFrame(X, columns=coordinate_columns(dim))
    for position, (name, value) in enumerate(labels.items()):
        frame.insert(position, name, value)
    return frame


def wings_cloud(group: SchottkyGroup, resolution: int, seed: int = 0) -> pd.DataFrame:
    """N0-unit samples of the positive wings of V_< and V_> for every generator."""
    if resolution < 1:
        raise SpecValidationError(f"resolution must be positive, got {resolution}")
    dim = group.ctx.dim
    parts = []
    for i, g in enumerate(group.generators):
        for k, side in enumerate((Side.PLUS, Side.MINUS)):
            rng = np.random.default_rng([seed, 41, i, k])
            X = sample_wing(group.domain_wing(i, side), rng, resolution)
            parts.append(_cloud_frame(X, dim, generator=i, side=side.value))
    return pd.concat(parts, ignore_index=True)


def _radius(deformation: AffineDeformation, radius_factor: float) -> float:
    return float(radius_factor * (1.0 + np.max(np.linalg.norm(deformation.centers, axis=1))))


def domains_cloud(
    deformation: AffineDeformation, resolution: int, seed: int = 0, radius_factor: float = 10.0
) -> pd.DataFrame:
    """Boundary clouds of the 2n closed cones H_i^sigma(t), apex first."""
    if resolution < 1:
        raise SpecValidationError(f"resolution must be positive, got {resolution}")
    dim = deformation.ctx.dim
    radius = _radius(deformation, radius_factor)
    parts = []
    for k, (i, sigma) in enumerate(deformation.domains()):
        rng = np.random.default_rng([seed, 43, k])
        X = cone_boundary_cloud(deformation, i, sigma, rng, resolution, radius)
        parts.append(_cloud_frame(X, dim, generator=i, side=sigma))
    return pd.concat(parts, ignore_index=True)


def _fundamental_boundary(deformation: AffineDeformation, resolution: int, seed: int, radius: float):
    """Pieces of the boundary of H0: each face of H~_j^- and H~_j^+ = gamma_j(face of H_j^-)."""
    pieces = []
    for j in range(deformation.n):
        rng = np.random.default_rng([seed, 47, j])
        P = cone_boundary_cloud(deformation, j, -1, rng, resolution, radius)
        pieces.append((j, -1, P))
        pieces.append((j, 1, deformation.gammas[j](P)))
    return pieces


def tiles_cloud(
    deformation: AffineDeformation, resolution: int, seed: int = 0, radius_factor: float = 10.0
) -> pd.DataFrame:
    """Boundaries of H0 (tile "e") and of the first-generation tiles gamma_i^sigma(H0)."""
    if resolution < 1:
        raise SpecValidationError(f"resolution must be positive, got {resolution}")
    dim = deformation.ctx.dim
    pieces = _fundamental_boundary(deformation, resolution, seed, _radius(deformation, radius_factor))
    parts = [
        _cloud_frame(P, dim, tile="e", face_generator=j, face_side=tau)
        for j, tau, P in pieces
    ]
    for i in range(deformation.n):
        for sigma in (1, -1):
            gamma = deformation.gammas[i] if sigma == 1 else deformation.gamma_inverses[i]
            label = chr(ord("a") + i) if sigma == 1 else chr(ord("A") + i)
            for j, tau, P in pieces:
                with np.errstate(over="ignore", invalid="ignore"):
                    image = gamma(P)
                image = image[np.all(np.isfinite(image), axis=1)]
                parts.append(_cloud_frame(image, dim, tile=label, face_generator=j, face_side=tau))
    return pd.concat(parts, ignore_index=True)


def traces_table(traces: Iterable[TileTrace], dim: int) -> pd.DataFrame:
    """
    One row per trace step: the generator (i, sigma) whose region held the
    point, the point itself and the gap data of that step. A point already
    in H0 gives a single row with empty step columns.
    """
    rows = []
    columns = coordinate_columns(dim)
    for p, trace in enumerate(traces):
        gaps = trace.gaps.entries if trace.gaps is not None else []
        if not trace.letters:
            row = {"step": None, "i": None, "sigma": None}
            row.update(dict(zip(columns, trace.x0)))
            row.update({"a_k": None, "delta_k": None, "cyclic": None, "status": trace.status.value, "point": p})
            rows.append(row)
            continue
        for k, letter in enumerate(trace.letters):
            entry = gaps[k] if k < len(gaps) else None
            row = {"step": k, "i": letter.index, "sigma": letter.sign}
            row.update(dict(zip(columns, trace.points[k])))
            row.update({
                "a_k": entry.a_k if entry else None,
                "delta_k": entry.delta_k if entry else None,
                "cyclic": entry.cyclic if entry else None,
                "status": trace.status.value,
                "point": p,
            })
            rows.append(row)
    frame = pd.DataFrame(rows, columns=["step", "i", "sigma", *columns, "a_k", "delta_k", "cyclic", "status", "point"])
    return frame.astype({"step": "Int64", "i": "Int64", "sigma": "Int64", "point": "int64"})
