"""Discrete grid world: obstacle geometry, motion schedules, robots, targets.

The world lives on a regular grid of square cells with side ``cell_length``
meters. Analytic obstacles are circles described by a center and a size
``lam`` (the squared radius); polygonal shapes (walls, L/U shapes, doors)
are explicit cell lists. Moving obstacles advance by a constant velocity
per tick and halt at a stop position; sudden obstacles contribute nothing
before their trigger tick.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field, replace

import numpy as np

Cell = tuple[int, int]
Point = tuple[float, float]


class ScenarioError(Exception):
    """Base class for scenario parsing and validation failures."""


class SchemaError(ScenarioError):
    """The scenario document violates the expected schema."""


class RobotPlacementError(ScenarioError):
    """A robot is placed on a cell that is not free."""


class TargetPlacementError(ScenarioError):
    """A target is placed on a cell that is not free."""


class UnsupportedGeometryError(ScenarioError):
    """Requested an analytic quantity on a cell-list obstacle."""


@dataclass(frozen=True)
class GridSpec:
    """Grid dimensions in cells plus the metric side length of one cell."""

    width: int
    height: int
    cell_length: float = 1.0

    def __post_init__(self):
        if self.width < 1 or self.height < 1:
            raise SchemaError("grid dimensions must be at least 1x1")
        if self.cell_length <= 0:
            raise SchemaError("cell_length must be positive")

    @property
    def shape(self) -> tuple[int, int]:
        return (self.width, self.height)

    def in_bounds(self, cell: Cell) -> bool:
        return 0 <= cell[0] < self.width and 0 <= cell[1] < self.height

    def contains_point(self, p: Point) -> bool:
        return (0.0 <= p[0] <= self.width * self.cell_length
                and 0.0 <= p[1] <= self.height * self.cell_length)

    def cell_center(self, cell: Cell) -> Point:
        ln = self.cell_length
        return ((cell[0] + 0.5) * ln, (cell[1] + 0.5) * ln)

    def cell_of(self, p: Point) -> Cell:
        ln = self.cell_length
        ix = min(int(p[0] / ln), self.width - 1)
        iy = min(int(p[1] / ln), self.height - 1)
        return (max(ix, 0), max(iy, 0))

    def cell_centers(self) -> tuple[np.ndarray, np.ndarray]:
        """Meshgrid of cell-center coordinates, shape (width, height)."""
        ln = self.cell_length
        xs = (np.arange(self.width) + 0.5) * ln
        ys = (np.arange(self.height) + 0.5) * ln
        return np.meshgrid(xs, ys, indexing="ij")


@dataclass(frozen=True)
class Obstacle:
    """One obstacle; either analytic (center + lam) or an explicit cell list.

    kind: "static", "moving" (constant velocity, halts at stop_center) or
    "sudden" (inactive before trigger_tick).
    """

    kind: str = "static"
    center: Point | None = None
    lam: float | None = None
    cells: frozenset[Cell] | None = None
    velocity: Point = (0.0, 0.0)
    stop_center: Point | None = None
    trigger_tick: int = 0

    def __post_init__(self):
        if self.kind not in ("static", "moving", "sudden"):
            raise SchemaError(f"unknown obstacle kind {self.kind!r}")
        if self.cells is None:
            if self.center is None or self.lam is None:
                raise SchemaError("analytic obstacle needs center and lambda")
            if self.lam <= 0:
                raise SchemaError("obstacle lambda must be positive")
        if self.kind == "moving" and self.stop_center is None:
            raise SchemaError("moving obstacle needs stop_center")

    @property
    def analytic(self) -> bool:
        return self.cells is None

    def active(self, tick: int) -> bool:
        if self.kind == "sudden":
            return tick >= self.trigger_tick
        return True

    def center_at(self, tick: int) -> Point:
        """Obstacle center after `tick` ticks, clamped componentwise at stop."""
        if self.center is None:
            raise UnsupportedGeometryError("cell-list obstacle has no center")
        if self.kind != "moving":
            return self.center
        cx, cy = self.center
        vx, vy = self.velocity
        sx, sy = self.stop_center
        x = cx + vx * tick
        y = cy + vy * tick
        if vx > 0:
            x = min(x, sx)
        elif vx < 0:
            x = max(x, sx)
        if vy > 0:
            y = min(y, sy)
        elif vy < 0:
            y = max(y, sy)
        return (x, y)


def gamma(point: Point, obstacle: Obstacle, tick: int) -> float:
    """Normalized squared distance to an analytic obstacle's center.

    Values: 1 on the surface, >1 outside, <1 inside.
    """
    if not obstacle.analytic:
        raise UnsupportedGeometryError("cell-list obstacles define no gamma")
    cx, cy = obstacle.center_at(tick)
    return ((point[0] - cx) ** 2 + (point[1] - cy) ** 2) / obstacle.lam


@dataclass
class RobotState:
    """A single omnidirectional robot and its execution bookkeeping."""

    id: int
    pose: tuple[float, float, float]  # x, y, theta
    speed: float = 1.0
    assigned_target: int | None = None
    trajectory: list[tuple[float, float, float]] = field(default_factory=list)
    idle_steps: int = 0
    path_length: float = 0.0
    collisions: int = 0

    def __post_init__(self):
        if not self.trajectory:
            self.trajectory.append(self.pose)

    @property
    def position(self) -> Point:
        return (self.pose[0], self.pose[1])


@dataclass
class Target:
    id: int
    position: Point
    status: str = "pending"  # pending | assigned | rescued

    @property
    def rescued(self) -> bool:
        return self.status == "rescued"


@dataclass
class Environment:
    """World snapshot: grid, obstacles, robots, targets, current tick.

    Only the simulation loop mutates robots/targets; everything else reads.
    """

    grid: GridSpec
    obstacles: list[Obstacle] = field(default_factory=list)
    robots: list[RobotState] = field(default_factory=list)
    targets: list[Target] = field(default_factory=list)
    tick: int = 0

    def is_free(self, point: Point, tick: int | None = None) -> bool:
        """True iff the point lies outside every obstacle active at `tick`."""
        t = self.tick if tick is None else tick
        if not self.grid.contains_point(point):
            return False
        cell = self.grid.cell_of(point)
        for obs in self.obstacles:
            if not obs.active(t):
                continue
            if obs.analytic:
                if gamma(point, obs, t) <= 1.0:
                    return False
            elif cell in obs.cells:
                return False
        return True

    def cell_free(self, cell: Cell, tick: int | None = None) -> bool:
        return (self.grid.in_bounds(cell)
                and self.is_free(self.grid.cell_center(cell), tick))

    def obstacle_mask(self, tick: int | None = None) -> np.ndarray:
        """Boolean (width, height) array, True where the cell center is blocked."""
        t = self.tick if tick is None else tick
        xs, ys = self.grid.cell_centers()
        mask = np.zeros(self.grid.shape, dtype=bool)
        for obs in self.obstacles:
            if not obs.active(t):
                continue
            if obs.analytic:
                cx, cy = obs.center_at(t)
                mask |= ((xs - cx) ** 2 + (ys - cy) ** 2) / obs.lam <= 1.0
            else:
                for (ix, iy) in obs.cells:
                    if self.grid.in_bounds((ix, iy)):
                        mask[ix, iy] = True
        return mask

    def pending_targets(self) -> list[Target]:
        return [t for t in self.targets if not t.rescued]


def step_environment(env: Environment) -> Environment:
    """Advance the world one tick: movers slide (clamped), suddens trigger.

    Robots and targets are carried over by reference; the simulation loop is
    the single writer for those.
    """
    return replace(env, tick=env.tick + 1)


# ---------------------------------------------------------------------------
# Scenario documents
# ---------------------------------------------------------------------------

PARAM_KEYS = ("a", "b", "d", "mu", "e", "sigma", "beta", "r0", "dt_neural",
              "relax_iters", "th_theta_deg", "th1", "th2", "v", "dt_sim")


def _require(cond: bool, msg: str):
    if not cond:
        raise SchemaError(msg)


def load_scenario(text: str):
    """Parse a scenario document (JSON) into (GridSpec, Environment, ShuntingParams).

    Angles are degrees in the document and radians internally; lengths are
    meters throughout. Parameters not present take the standard defaults.
    """
    from .field import ShuntingParams

    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise SchemaError(f"not valid JSON: {exc}") from exc
    _require(isinstance(doc, dict), "top level must be an object")

    gspec = doc.get("grid", {})
    _require(isinstance(gspec, dict), "grid must be an object")
    _require("width" in gspec and "height" in gspec, "grid needs width and height")
    grid = GridSpec(int(gspec["width"]), int(gspec["height"]),
                    float(gspec.get("cell_length", 1.0)))

    pdoc = doc.get("params", {})
    _require(isinstance(pdoc, dict), "params must be an object")
    unknown = set(pdoc) - set(PARAM_KEYS)
    _require(not unknown, f"unknown params keys: {sorted(unknown)}")
    kwargs = {}
    for key in PARAM_KEYS:
        if key in pdoc:
            kwargs[key] = pdoc[key]
    params = ShuntingParams.from_document(kwargs)

    obstacles = []
    for i, odoc in enumerate(doc.get("obstacles", [])):
        _require(isinstance(odoc, dict), f"obstacle {i} must be an object")
        kind = odoc.get("kind", "static")
        cells = None
        if "cells" in odoc:
            cells = frozenset((int(c[0]), int(c[1])) for c in odoc["cells"])
        center = tuple(odoc["center"]) if "center" in odoc else None
        lam = float(odoc["lambda"]) if "lambda" in odoc else None
        obstacles.append(Obstacle(
            kind=kind,
            center=center,
            lam=lam,
            cells=cells,
            velocity=tuple(odoc.get("velocity", (0.0, 0.0))),
            stop_center=tuple(odoc["stop_center"]) if "stop_center" in odoc else None,
            trigger_tick=int(odoc.get("trigger_tick", 0)),
        ))

    env = Environment(grid=grid, obstacles=obstacles)

    robots = doc.get("robots", [])
    _require(len(robots) >= 1, "scenario needs at least one robot")
    for i, rdoc in enumerate(robots):
        _require("x" in rdoc and "y" in rdoc, f"robot {i} needs x and y")
        pose = (float(rdoc["x"]), float(rdoc["y"]),
                math.radians(float(rdoc.get("theta", 0.0))))
        if not env.is_free((pose[0], pose[1]), 0):
            raise RobotPlacementError(f"robot {i} at ({pose[0]}, {pose[1]}) is not in free space")
        env.robots.append(RobotState(id=i, pose=pose, speed=params.v))

    for i, tdoc in enumerate(doc.get("targets", [])):
        _require("x" in tdoc and "y" in tdoc, f"target {i} needs x and y")
        pos = (float(tdoc["x"]), float(tdoc["y"]))
        if not env.is_free(pos, 0):
            raise TargetPlacementError(f"target {i} at {pos} is not in free space")
        env.targets.append(Target(id=i, position=pos))

    return grid, env, params


def serialize_scenario(grid: GridSpec, env: Environment, params) -> str:
    """Inverse of load_scenario; returns a JSON document string."""
    doc = {
        "grid": {"width": grid.width, "height": grid.height,
                 "cell_length": grid.cell_length},
        "params": params.to_document(),
        "robots": [{"x": r.pose[0], "y": r.pose[1],
                    "theta": math.degrees(r.pose[2])} for r in env.robots],
        "targets": [{"x": t.position[0], "y": t.position[1]} for t in env.targets],
        "obstacles": [],
    }
    for obs in env.obstacles:
        odoc: dict = {"kind": obs.kind}
        if obs.analytic:
            odoc["center"] = list(obs.center)
            odoc["lambda"] = obs.lam
        else:
            odoc["cells"] = sorted([list(c) for c in obs.cells])
        if obs.kind == "moving":
            odoc["velocity"] = list(obs.velocity)
            odoc["stop_center"] = list(obs.stop_center)
        if obs.kind == "sudden":
            odoc["trigger_tick"] = obs.trigger_tick
        doc["obstacles"].append(odoc)
    return json.dumps(doc, indent=2, sort_keys=True)
