"""Sparse roadmap extraction from executed trajectories.

A trajectory cell becomes a feature-neuron candidate when the robot turns
sharply there; candidates must then clear a spacing threshold against the
existing set, survive the activity check (features on negative-activity
cells are dropped), and a fusion pass prunes close, high-degree, mutually
visible features. Visibility between cells uses a supercover line walk:
every cell the straight segment touches, corner grazes included, must have
non-negative activity, so the clearance halo around obstacles blocks links
that plain line-of-sight would accept.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .environment import Cell, GridSpec
from .field import NeuralField, ShuntingParams


class FeatureError(Exception):
    pass


# ---------------------------------------------------------------------------
# Supercover traversal (exact integer arithmetic)
# ---------------------------------------------------------------------------

def supercover_cells(a: Cell, b: Cell) -> list[Cell]:
    """All cells touched by the closed segment between two cell centers.

    Exact: works in doubled integer coordinates (cell centers become odd
    integers), so corner and edge grazes are included deterministically.
    """
    if a == b:
        return [a]
    x0, y0 = 2 * a[0] + 1, 2 * a[1] + 1
    x1, y1 = 2 * b[0] + 1, 2 * b[1] + 1
    if x0 == x1:
        cx = (x0 - 1) // 2
        lo, hi = sorted((a[1], b[1]))
        return [(cx, cy) for cy in range(lo, hi + 1)]
    if x0 > x1:
        x0, y0, x1, y1 = x1, y1, x0, y0
    dx, dy = x1 - x0, y1 - y0

    cells: list[Cell] = []
    for cx in range((x0 - 1) // 2, (x1 - 1) // 2 + 1):
        xl = max(2 * cx, x0)
        xr = min(2 * cx + 2, x1)
        # y-range of the segment inside this column, as fractions over dx
        na = y0 * dx + (xl - x0) * dy
        nb = y0 * dx + (xr - x0) * dy
        nmin, nmax = (na, nb) if na <= nb else (nb, na)
        den = 2 * dx
        # rows cy with [ymin, ymax] overlapping [2cy, 2cy+2] (closed)
        cy_lo = -((-(nmin - den)) // den)   # ceil((nmin - den)/den)
        cy_hi = nmax // den                 # floor(nmax/den)
        for cy in range(cy_lo, cy_hi + 1):
            cells.append((cx, int(cy)))
    return cells


def collision_free_link(a: Cell, b: Cell, fld: NeuralField) -> bool:
    """True iff every cell the straight segment a-b touches has zeta >= 0."""
    for (cx, cy) in supercover_cells(a, b):
        if not fld.grid.in_bounds((cx, cy)):
            return False
        if fld.zeta[cx, cy] < 0.0:
            return False
    return True


# ---------------------------------------------------------------------------
# Feature store
# ---------------------------------------------------------------------------

@dataclass
class FeatureNeuron:
    id: int
    cell: Cell
    degree: int = 0
    represented: set[Cell] = field(default_factory=set)


@dataclass
class Representativeness:
    ratio: float
    represented: int
    total: int


class FeatureStore:
    """Shared set of feature neurons plus their pairwise link matrix.

    The matrix row/column order follows ascending feature id; entries hold
    the metric distance for visible pairs and 0 otherwise.
    """

    def __init__(self, grid: GridSpec):
        self.grid = grid
        self.features: dict[int, FeatureNeuron] = {}
        self.matrix = np.zeros((0, 0))
        self.matrix_ids: list[int] = []
        self._next_id = 0

    def __len__(self) -> int:
        return len(self.features)

    def ordered(self) -> list[FeatureNeuron]:
        """Features in ascending row-major cell order (y, then x)."""
        return sorted(self.features.values(), key=lambda f: (f.cell[1], f.cell[0]))

    def position(self, feature: FeatureNeuron) -> tuple[float, float]:
        return self.grid.cell_center(feature.cell)

    def add(self, cell: Cell) -> FeatureNeuron:
        feat = FeatureNeuron(id=self._next_id, cell=cell)
        self._next_id += 1
        self.features[feat.id] = feat
        return feat

    def remove(self, fid: int):
        del self.features[fid]

    def nearest(self, point: tuple[float, float],
                exclude: int | None = None) -> FeatureNeuron | None:
        best, best_key = None, None
        for feat in self.features.values():
            if feat.id == exclude:
                continue
            px, py = self.position(feat)
            key = (math.hypot(px - point[0], py - point[1]), feat.id)
            if best_key is None or key < best_key:
                best, best_key = feat, key
        return best

    def distance(self, f1: FeatureNeuron, f2: FeatureNeuron) -> float:
        p1, p2 = self.position(f1), self.position(f2)
        return math.hypot(p1[0] - p2[0], p1[1] - p2[1])


# ---------------------------------------------------------------------------
# Extraction channels (applied in order: angle, distance, activity)
# ---------------------------------------------------------------------------

def angle_candidate(theta_prev: float, theta_curr: float, cell: Cell,
                    th_theta_rad: float) -> Cell | None:
    """The cell is a candidate iff the wrapped heading change exceeds Th_theta."""
    delta = math.fmod(theta_curr - theta_prev, 2.0 * math.pi)
    if delta > math.pi:
        delta -= 2.0 * math.pi
    elif delta < -math.pi:
        delta += 2.0 * math.pi
    return cell if abs(delta) > th_theta_rad else None


def distance_channel(candidate: Cell, store: FeatureStore, th1: float) -> bool:
    """Accept the candidate iff no existing feature lies within Th1 meters."""
    point = store.grid.cell_center(candidate)
    nearest = store.nearest(point)
    if nearest is None:
        return True
    px, py = store.position(nearest)
    return math.hypot(px - point[0], py - point[1]) > th1


def activity_channel(store: FeatureStore, fld: NeuralField) -> list[int]:
    """Drop features whose cell turned negative; returns the removed ids."""
    removed = [f.id for f in store.ordered() if fld.zeta[f.cell[0], f.cell[1]] < 0.0]
    for fid in removed:
        store.remove(fid)
    return removed


def update_feature_matrix(store: FeatureStore, fld: NeuralField) -> np.ndarray:
    """Rebuild the pairwise link matrix and the per-feature degrees."""
    ids = sorted(store.features)
    k = len(ids)
    mat = np.zeros((k, k))
    for gi in range(k):
        fg = store.features[ids[gi]]
        for hi in range(gi + 1, k):
            fh = store.features[ids[hi]]
            if collision_free_link(fg.cell, fh.cell, fld):
                dist = store.distance(fg, fh)
                mat[gi, hi] = dist
                mat[hi, gi] = dist
    for idx, fid in enumerate(ids):
        store.features[fid].degree = int(np.count_nonzero(mat[idx]))
    store.matrix = mat
    store.matrix_ids = ids
    return mat


def secondary_fusion(store: FeatureStore, fld: NeuralField, th2: float) -> list[int]:
    """Prune close, mutually visible features among those with degree > 3.

    Scans the high-degree features in ascending cell order and removes the
    later one of the first offending consecutive pair, repeating until no
    removal fires. Returns the removed ids.
    """
    removed: list[int] = []
    while True:
        update_feature_matrix(store, fld)
        busy = [f for f in store.ordered() if f.degree > 3]
        fired = False
        for f1, f2 in zip(busy, busy[1:]):
            if (store.distance(f1, f2) < th2
                    and collision_free_link(f1.cell, f2.cell, fld)):
                store.remove(f2.id)
                removed.append(f2.id)
                fired = True
                break
        if not fired:
            return removed


def representativeness(store: FeatureStore, fld: NeuralField) -> Representativeness:
    """Fraction of free (zeta >= 0) cells whose nearest feature is visible.

    Each free cell picks its single nearest feature; if that link fails the
    collision check the cell stays unrepresented (no fallback to the second
    nearest).
    """
    free = np.argwhere(fld.zeta >= 0.0)
    total = len(free)
    if total == 0:
        raise FeatureError("no free cells: representativeness undefined")
    for feat in store.features.values():
        feat.represented = set()
    if not store.features:
        return Representativeness(0.0, 0, total)

    ids = sorted(store.features)
    pos = np.array([store.position(store.features[fid]) for fid in ids])
    ln = store.grid.cell_length
    centers = (free + 0.5) * ln
    dists = np.linalg.norm(centers[:, None, :] - pos[None, :, :], axis=2)
    nearest_idx = np.argmin(dists, axis=1)

    count = 0
    for row, fi in zip(free, nearest_idx):
        cell = (int(row[0]), int(row[1]))
        feat = store.features[ids[int(fi)]]
        if collision_free_link(cell, feat.cell, fld):
            feat.represented.add(cell)
            count += 1
    return Representativeness(count / total, count, total)


def optimize_feature(candidate: Cell, store: FeatureStore, fld: NeuralField,
                     params: ShuntingParams) -> bool:
    """Replace the feature nearest to the candidate if the candidate sits
    closer (on average) to that feature's represented cells and sees them all.

    Only meaningful once every free cell is represented; returns True when a
    replacement happened. A replacement that would strand any cell outside
    the incumbent's cluster (its nearest-feature assignment shifts onto a
    blocked line) is rolled back: the cluster test alone cannot guarantee
    coverage stays complete.
    """
    point = store.grid.cell_center(candidate)
    incumbent = store.nearest(point)
    if incumbent is None or not incumbent.represented:
        return False
    cluster = sorted(incumbent.represented)
    for cell in cluster:
        if not collision_free_link(candidate, cell, fld):
            return False
    ln = store.grid.cell_length

    def mean_dist(origin: Cell) -> float:
        ox, oy = (origin[0] + 0.5) * ln, (origin[1] + 0.5) * ln
        return sum(math.hypot(ox - (c[0] + 0.5) * ln, oy - (c[1] + 0.5) * ln)
                   for c in cluster) / len(cluster)

    if mean_dist(candidate) >= mean_dist(incumbent.cell):
        return False
    before = representativeness(store, fld)
    old_cell = incumbent.cell
    store.remove(incumbent.id)
    fresh = store.add(candidate)
    fresh.represented = set(cluster)
    after = representativeness(store, fld)
    if after.ratio < before.ratio:
        store.remove(fresh.id)
        store.add(old_cell)
        update_feature_matrix(store, fld)
        representativeness(store, fld)
        return False
    update_feature_matrix(store, fld)
    return True
