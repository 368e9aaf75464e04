"""Fast path queries over the learned feature graph.

Start and target poses attach to their nearest visible feature neuron; the
query then runs Dijkstra over the feature matrix (positive entries are
edges) extended with the two attachment segments, plus the direct
start-target segment when that segment itself passes the collision check.
Queries are read-only over a snapshot and never touch the neural field.
"""

from __future__ import annotations

import heapq
import math
from dataclasses import dataclass

from .environment import Cell, Point
from .features import FeatureStore, collision_free_link
from .field import NeuralField


class AttachmentError(Exception):
    """No feature neuron is visible from the pose."""


class NoPathError(Exception):
    """Start and target attach to disconnected components."""


@dataclass
class PlanQuery:
    start: Point
    target: Point
    store: FeatureStore
    fld: NeuralField


@dataclass
class HeuristicPath:
    waypoints: list[Point]
    length: float
    expanded_nodes: int


def attach_endpoint(pose: Point, store: FeatureStore,
                    fld: NeuralField) -> int:
    """Nearest feature neuron with a clear link to the pose's cell."""
    cell = store.grid.cell_of(pose)
    if fld.zeta[cell[0], cell[1]] < 0.0:
        raise AttachmentError(f"pose {pose} lies on a negative-activity cell")
    ranked = sorted(store.features.values(),
                    key=lambda f: (_dist(store.position(f), pose), f.id))
    for feat in ranked:
        if collision_free_link(cell, feat.cell, fld):
            return feat.id
    raise AttachmentError(f"no feature neuron reachable from {pose}")


def _dist(p: Point, q: Point) -> float:
    return math.hypot(p[0] - q[0], p[1] - q[1])


def plan_via_matrix(query: PlanQuery) -> HeuristicPath:
    """Shortest waypoint route from start to target over the feature graph.

    Runs a backward label-correcting search (Dijkstra) from the target; the
    expanded-node count reported is the number of neighbor examinations,
    which is bounded by a constant times the squared feature count.
    """
    store, fld = query.store, query.fld
    start_fid = attach_endpoint(query.start, store, fld)
    target_fid = attach_endpoint(query.target, store, fld)

    ids = store.matrix_ids
    index = {fid: i for i, fid in enumerate(ids)}
    n = len(ids)
    START, TARGET = n, n + 1
    positions = [store.position(store.features[fid]) for fid in ids]
    positions += [query.start, query.target]

    adjacency: list[list[tuple[int, float]]] = [[] for _ in range(n + 2)]
    for g in range(n):
        for h in range(g + 1, n):
            w = float(store.matrix[g, h])
            if w > 0.0:
                adjacency[g].append((h, w))
                adjacency[h].append((g, w))
    s_att = (index[start_fid], _dist(query.start, positions[index[start_fid]]))
    t_att = (index[target_fid], _dist(query.target, positions[index[target_fid]]))
    adjacency[START].append(s_att)
    adjacency[s_att[0]].append((START, s_att[1]))
    adjacency[TARGET].append(t_att)
    adjacency[t_att[0]].append((TARGET, t_att[1]))
    start_cell = store.grid.cell_of(query.start)
    target_cell = store.grid.cell_of(query.target)
    if collision_free_link(start_cell, target_cell, fld):
        direct = _dist(query.start, query.target)
        adjacency[START].append((TARGET, direct))
        adjacency[TARGET].append((START, direct))

    cost = [math.inf] * (n + 2)
    parent = [-1] * (n + 2)
    cost[TARGET] = 0.0
    heap = [(0.0, TARGET)]
    expanded = 0
    done = [False] * (n + 2)
    while heap:
        c, node = heapq.heappop(heap)
        if done[node]:
            continue
        done[node] = True
        if node == START:
            break
        for nbr, w in adjacency[node]:
            expanded += 1
            if c + w < cost[nbr]:
                cost[nbr] = c + w
                parent[nbr] = node
                heapq.heappush(heap, (cost[nbr], nbr))
    if math.isinf(cost[START]):
        raise NoPathError("start and target are not connected in the feature graph")

    waypoints = []
    node = START
    while node != -1:
        waypoints.append(positions[node])
        node = parent[node]
    return HeuristicPath(waypoints=waypoints, length=cost[START],
                         expanded_nodes=expanded)
