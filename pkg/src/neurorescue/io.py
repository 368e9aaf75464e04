"""File exports: activity snapshots, trajectories, feature models, plans.

Activity matrices serialize as row-major CSV with 6 decimal places (top
grid row first) or as 8-bit grayscale PGM with the linear map
[-D, B] -> [0, 255]. A feature CSV plus a matrix CSV fully persist a
learned model for later heuristic planning.
"""

from __future__ import annotations

import os

import numpy as np

from .environment import GridSpec
from .features import FeatureStore
from .field import NeuralField, ShuntingParams
from .planner import HeuristicPath


class ExportError(Exception):
    pass


def field_to_csv(fld: NeuralField) -> str:
    rows = []
    for iy in range(fld.grid.height - 1, -1, -1):
        rows.append(",".join(f"{fld.zeta[ix, iy]:.6f}"
                             for ix in range(fld.grid.width)))
    return "\n".join(rows)


def field_to_pgm(fld: NeuralField, params: ShuntingParams) -> bytes:
    span = params.b + params.d
    scaled = np.clip((fld.zeta + params.d) / span, 0.0, 1.0) * 255.0
    pixels = np.rint(scaled).astype(np.uint8)
    header = f"P5\n{fld.grid.width} {fld.grid.height}\n255\n".encode("ascii")
    body = bytes(pixels[ix, iy]
                 for iy in range(fld.grid.height - 1, -1, -1)
                 for ix in range(fld.grid.width))
    return header + body


def trajectories_to_csv(robots) -> str:
    lines = ["tick,robot_id,x,y,theta,idle_flag"]
    for robot in robots:
        prev = None
        for tick, pose in enumerate(robot.trajectory):
            idle = int(prev is not None and pose == prev)
            lines.append(f"{tick},{robot.id},{pose[0]:.6f},{pose[1]:.6f},"
                         f"{pose[2]:.6f},{idle}")
            prev = pose
    return "\n".join(lines)


def features_to_csv(store: FeatureStore) -> str:
    lines = ["id,x,y,degree,represented_count"]
    for fid in sorted(store.features):
        feat = store.features[fid]
        x, y = store.position(feat)
        lines.append(f"{fid},{x:.6f},{y:.6f},{feat.degree},{len(feat.represented)}")
    return "\n".join(lines)


def matrix_to_csv(store: FeatureStore) -> str:
    k = len(store.matrix_ids)
    return "\n".join(
        ",".join(f"{store.matrix[g, h]:.6f}" for h in range(k))
        for g in range(k))


def load_feature_model(features_csv: str, matrix_csv: str,
                       grid: GridSpec) -> FeatureStore:
    """Rebuild a FeatureStore from its two persisted CSV files."""
    store = FeatureStore(grid)
    rows = [ln for ln in features_csv.strip().splitlines() if ln][1:]
    id_map = {}
    for row in rows:
        fid, x, y, degree, _count = row.split(",")
        feat = store.add(grid.cell_of((float(x), float(y))))
        feat.degree = int(degree)
        id_map[int(fid)] = feat.id
    k = len(rows)
    mat = np.zeros((k, k))
    mrows = [ln for ln in matrix_csv.strip().splitlines() if ln]
    if len(mrows) != k:
        raise ExportError(f"matrix has {len(mrows)} rows for {k} features")
    for g, row in enumerate(mrows):
        values = row.split(",")
        if len(values) != k:
            raise ExportError("feature matrix is not square")
        mat[g] = [float(v) for v in values]
    if not np.allclose(mat, mat.T):
        raise ExportError("feature matrix is not symmetric")
    store.matrix = mat
    store.matrix_ids = sorted(store.features)
    return store


def plan_to_csv(path: HeuristicPath) -> str:
    lines = ["idx,x,y"]
    for i, (x, y) in enumerate(path.waypoints):
        lines.append(f"{i},{x:.6f},{y:.6f}")
    lines.append(f"# length_m={path.length:.6f} "
                 f"waypoint_count={len(path.waypoints)} "
                 f"expanded_nodes={path.expanded_nodes}")
    return "\n".join(lines)


def write_text(path: str, content: str, overwrite: bool = False):
    _check(path, overwrite)
    with open(path, "w") as fh:
        fh.write(content)


def write_bytes(path: str, content: bytes, overwrite: bool = False):
    _check(path, overwrite)
    with open(path, "wb") as fh:
        fh.write(content)


def _check(path: str, overwrite: bool):
    if os.path.exists(path) and not overwrite:
        raise ExportError(f"refusing to overwrite {path} (pass overwrite)")
    parent = os.path.dirname(os.path.abspath(path))
    if not os.path.isdir(parent):
        raise ExportError(f"output directory {parent} does not exist")
