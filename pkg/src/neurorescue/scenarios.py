"""Built-in rescue worlds and the random scenario generator.

Placements are written in 1-based grid coordinates (cell (i, j) sits at
metric center (i-0.5, j-0.5) for unit cells) and converted to metric
positions. Each world carries a benchmark query: the start/target pair the
method comparison is measured on after the learning phase.
"""

from __future__ import annotations

import math
import random
from dataclasses import dataclass, field as dc_field

from .environment import (Cell, Environment, GridSpec, Obstacle, Point,
                          RobotState, Target)
from .field import ShuntingParams


@dataclass
class Scenario:
    name: str
    grid: GridSpec
    env: Environment
    params: ShuntingParams
    query: tuple[Point, Point] | None = None
    trap_region: tuple[float, float, float, float] | None = None  # x0,x1,y0,y1
    trigger_tick: int | None = None
    meta: dict = dc_field(default_factory=dict)


def _pc(i: float, j: float, ln: float = 1.0) -> Point:
    """Metric center of 1-based grid coordinate (i, j)."""
    return ((i - 0.5) * ln, (j - 0.5) * ln)


def _cells(xs, ys) -> frozenset[Cell]:
    """Cell list from 1-based coordinate ranges (inclusive)."""
    return frozenset((x - 1, y - 1) for x in xs for y in ys)


def _world(name: str, grid: GridSpec, params: ShuntingParams,
           robots: list[Point], targets: list[Point],
           obstacles: list[Obstacle], **kw) -> Scenario:
    env = Environment(grid=grid, obstacles=obstacles)
    for i, pos in enumerate(robots):
        env.robots.append(RobotState(id=i, pose=(pos[0], pos[1], 0.0),
                                     speed=params.v))
    for i, pos in enumerate(targets):
        env.targets.append(Target(id=i, position=pos))
    return Scenario(name=name, grid=grid, env=env, params=params, **kw)


STATIC_TARGETS = [(8, 35), (15, 15), (30, 10), (54, 11), (36, 29),
                  (59, 28), (60, 45), (63, 67), (23, 55), (7, 52)]


def static_rescue() -> Scenario:
    """Two robots, ten targets, a handful of round obstacles, nothing moves."""
    grid = GridSpec(70, 70)
    params = ShuntingParams()
    obstacles = [
        Obstacle(center=_pc(11, 25), lam=1.0),
        Obstacle(center=_pc(20, 40), lam=2.0),
    ]
    return _world("static", grid, params,
                  robots=[_pc(1, 35), _pc(70, 35)],
                  targets=[_pc(i, j) for i, j in STATIC_TARGETS],
                  obstacles=obstacles,
                  query=(_pc(35, 2), _pc(60, 52)))


def moving_rescue() -> Scenario:
    """A corridor toward the target is sealed mid-run by a descending block,
    turning the corridor walls into a trap the robot must back out of."""
    grid = GridSpec(70, 70)
    params = ShuntingParams()
    obstacles = [
        Obstacle(cells=_cells(range(18, 49), [36])),
        Obstacle(cells=_cells(range(18, 49), [44])),
        Obstacle(kind="moving", center=_pc(50, 70), lam=6.25,
                 velocity=(0.0, -1.0), stop_center=_pc(50, 40)),
    ]
    return _world("moving", grid, params,
                  robots=[_pc(1, 35)],
                  targets=[_pc(63, 40)],
                  obstacles=obstacles,
                  query=(_pc(1, 35), _pc(63, 40)),
                  trap_region=(17.0, 50.0, 35.0, 44.0))


def sudden_rescue() -> Scenario:
    """An L-shaped wall drops right in front of the eastbound robot."""
    grid = GridSpec(70, 70)
    params = ShuntingParams()
    trigger = 30
    lshape = _cells([32], range(27, 44)) | _cells(range(22, 32), [43])
    obstacles = [
        Obstacle(kind="sudden", cells=lshape, trigger_tick=trigger),
    ]
    return _world("sudden", grid, params,
                  robots=[_pc(1, 35)],
                  targets=[_pc(63, 35)],
                  obstacles=obstacles,
                  query=(_pc(1, 35), _pc(63, 35)),
                  trigger_tick=trigger)


def house_rescue(door_open: bool = True) -> Scenario:
    """Two-room house: a dividing wall with door L (toggleable) plus an east
    wing wall with a far door, so a closed door L forces a long detour."""
    grid = GridSpec(70, 70)
    params = ShuntingParams()
    divider = (_cells([35], range(1, 33)) | _cells([35], range(38, 66)))
    east_wing = _cells(range(36, 65), [50])
    obstacles = [Obstacle(cells=divider), Obstacle(cells=east_wing)]
    if not door_open:
        obstacles.append(Obstacle(kind="sudden", cells=_cells([35], range(33, 38)),
                                  trigger_tick=0))
    name = "house_open" if door_open else "house_closed"
    return _world(name, grid, params,
                  robots=[_pc(5, 35)],
                  targets=[_pc(12, 12), _pc(59, 12), _pc(60, 35),
                           _pc(13, 57), _pc(59, 60)],
                  obstacles=obstacles,
                  query=(_pc(5, 35), _pc(60, 35)))


def clearance_map() -> Scenario:
    """Staggered blocks with a 4-cell gap; the safety threshold decides
    whether the robot threads the gap, hugs corners, or swings wide."""
    grid = GridSpec(40, 40)
    params = ShuntingParams()
    obstacles = [
        Obstacle(cells=_cells(range(14, 18), range(8, 21))),
        Obstacle(cells=_cells(range(22, 26), range(20, 33))),
    ]
    return _world("clearance", grid, params,
                  robots=[_pc(5, 20)],
                  targets=[_pc(35, 20)],
                  obstacles=obstacles,
                  query=(_pc(5, 20), _pc(35, 20)))


def sweep_base() -> Scenario:
    """Open world with an off-center target, used by the parameter sweeps."""
    grid = GridSpec(70, 70)
    params = ShuntingParams()
    return _world("sweep_base", grid, params,
                  robots=[_pc(5, 35)],
                  targets=[_pc(10, 35)],
                  obstacles=[],
                  query=(_pc(5, 35), _pc(10, 35)))


def empty_small() -> Scenario:
    """10x10 empty sanity world."""
    grid = GridSpec(10, 10)
    params = ShuntingParams()
    return _world("empty10", grid, params,
                  robots=[_pc(1, 1)],
                  targets=[_pc(8, 8)],
                  obstacles=[],
                  query=(_pc(1, 1), _pc(8, 8)))


def random_scenario(seed: int, n_robots: int = 2, n_targets: int = 5,
                    n_obstacles: int = 6, width: int = 70,
                    height: int = 70) -> Scenario:
    """Seeded world with rejection-sampled free placements."""
    rng = random.Random(seed)
    grid = GridSpec(width, height)
    params = ShuntingParams()
    obstacles = []
    for _ in range(n_obstacles):
        cx = rng.uniform(8.0, width - 8.0)
        cy = rng.uniform(8.0, height - 8.0)
        obstacles.append(Obstacle(center=(cx, cy), lam=rng.uniform(2.0, 6.0)))
    env = Environment(grid=grid, obstacles=obstacles)

    def free_spot() -> Point:
        for _ in range(10_000):
            cell = (rng.randrange(width), rng.randrange(height))
            point = grid.cell_center(cell)
            if env.is_free(point, 0) and all(
                    math.hypot(point[0] - r.pose[0], point[1] - r.pose[1]) > 2.0
                    for r in env.robots):
                return point
        raise RuntimeError("could not place entity in free space")

    scenario = Scenario(name=f"random-{seed}", grid=grid, env=env, params=params)
    for i in range(n_robots):
        pos = free_spot()
        env.robots.append(RobotState(id=i, pose=(pos[0], pos[1], 0.0),
                                     speed=params.v))
    for i in range(n_targets):
        env.targets.append(Target(id=i, position=free_spot()))
    scenario.query = (env.robots[0].position, env.targets[0].position)
    return scenario


BUILTINS = {
    "static": static_rescue,
    "moving": moving_rescue,
    "sudden": sudden_rescue,
    "house_open": lambda: house_rescue(True),
    "house_closed": lambda: house_rescue(False),
    "clearance": clearance_map,
    "sweep_base": sweep_base,
    "empty10": empty_small,
}


def builtin(name: str) -> Scenario:
    if name not in BUILTINS:
        raise KeyError(f"unknown builtin scenario {name!r}")
    return BUILTINS[name]()
