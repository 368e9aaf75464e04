"""Robot steering on the activity landscape and activity-based task assignment.

The command neuron is the 8-neighbor of maximal activity; a robot with no
positive option waits in place for activity to propagate. Targets are
assigned to whichever robot reads the strictly highest activity in that
target's field (ties stay unassigned for the round).
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .environment import Cell, Environment, RobotState
from .field import NEIGHBOR_OFFSETS, NeuralField, ShuntingParams


class NavigationError(Exception):
    pass


def wrap_angle(angle: float) -> float:
    """Wrap an angle to (-pi, pi]."""
    wrapped = math.fmod(angle + math.pi, 2.0 * math.pi)
    if wrapped <= 0.0:
        wrapped += 2.0 * math.pi
    return wrapped - math.pi


def command_neuron(fld: NeuralField, current: Cell,
                   heading: float = 0.0) -> Cell:
    """Pick the next cell: the in-bounds neighbor with maximal activity.

    Ties break by smallest heading change from `heading`, then row-major
    order. When no neighbor beats the current cell and the current activity
    is non-positive, the robot stays put (idle).
    """
    best: Cell | None = None
    best_key = None
    for dx, dy in NEIGHBOR_OFFSETS:
        cell = (current[0] + dx, current[1] + dy)
        if not fld.grid.in_bounds(cell):
            continue
        zeta = float(fld.zeta[cell[0], cell[1]])
        turn = abs(wrap_angle(math.atan2(dy, dx) - heading))
        key = (-zeta, turn, cell[1], cell[0])
        if best_key is None or key < best_key:
            best_key = key
            best = cell
    current_zeta = float(fld.zeta[current[0], current[1]])
    if best is None:
        return current
    best_zeta = float(fld.zeta[best[0], best[1]])
    if best_zeta <= current_zeta and current_zeta <= 0.0:
        return current
    return best


def advance_robot(robot: RobotState, next_cell: Cell, env: Environment,
                  params: ShuntingParams) -> bool:
    """Move the robot onto next_cell's center (or idle if next_cell is current).

    Heading turns toward the step direction and the robot lands exactly on
    the cell center, so one tick covers 1 or sqrt(2) cell lengths. Returns
    True if the robot moved. A non-free destination records a collision and
    halts the robot for the tick.
    """
    grid = env.grid
    cur_cell = grid.cell_of(robot.position)
    if next_cell == cur_cell:
        robot.idle_steps += 1
        robot.trajectory.append(robot.pose)
        return False
    if abs(next_cell[0] - cur_cell[0]) > 1 or abs(next_cell[1] - cur_cell[1]) > 1:
        raise NavigationError(f"step {cur_cell} -> {next_cell} is not a neighbor move")
    tx, ty = grid.cell_center(next_cell)
    x, y, _ = robot.pose
    theta = math.atan2(ty - y, tx - x)
    dist = math.hypot(tx - x, ty - y)
    if not env.is_free((tx, ty)):
        robot.collisions += 1
        robot.idle_steps += 1
        robot.trajectory.append(robot.pose)
        return False
    robot.pose = (x + dist * math.cos(theta), y + dist * math.sin(theta), theta)
    robot.path_length += dist
    robot.trajectory.append(robot.pose)
    return True


@dataclass
class ActivityMatrix:
    """Activity of each robot's cell in each pending target's field."""

    robot_ids: list[int]
    target_ids: list[int]
    values: np.ndarray  # shape (robots, targets)


@dataclass
class Assignment:
    """Map target id -> robot id; missing ids are unassigned this round."""

    by_target: dict[int, int]

    def targets_of(self, robot_id: int) -> list[int]:
        return [t for t, r in self.by_target.items() if r == robot_id]


def build_activity_matrix(robots: list[RobotState], target_ids: list[int],
                          fields: dict[int, NeuralField]) -> ActivityMatrix:
    """Read every robot's cell activity out of every pending target's field."""
    values = np.zeros((len(robots), len(target_ids)))
    for c, tid in enumerate(target_ids):
        if tid not in fields:
            raise NavigationError(f"no relaxed field for pending target {tid}")
        fld = fields[tid]
        for i, robot in enumerate(robots):
            cx, cy = fld.grid.cell_of(robot.position)
            values[i, c] = fld.zeta[cx, cy]
    return ActivityMatrix([r.id for r in robots], list(target_ids), values)


def assign_targets(matrix: ActivityMatrix) -> Assignment:
    """Assign each target to the robot with the strict column maximum.

    Exact ties leave the target unassigned for this round; a robot may hold
    several targets and serves the one with highest activity first.
    """
    if not np.all(np.isfinite(matrix.values)):
        raise NavigationError("activity matrix contains non-finite entries")
    by_target: dict[int, int] = {}
    for c, tid in enumerate(matrix.target_ids):
        column = matrix.values[:, c]
        best = int(np.argmax(column))
        if np.count_nonzero(column == column[best]) > 1:
            continue
        by_target[tid] = matrix.robot_ids[best]
    return Assignment(by_target)
