"""Simulation orchestration, benchmark harness, and parameter sweeps.

One tick runs in a fixed order: environment step, field relaxation, task
(re)assignment, robot decisions and moves, feature extraction, then matrix
and representativeness upkeep. Everything is deterministic given the
scenario, method, and seed.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, replace

import numpy as np

from . import io as nr_io
from .environment import (Environment, Obstacle, RobotState, Target,
                          step_environment)
from .features import (FeatureStore, Representativeness, activity_channel,
                       angle_candidate, collision_free_link, distance_channel,
                       optimize_feature, representativeness, secondary_fusion,
                       update_feature_matrix)
from .field import (NeuralField, ShuntingParams, assemble_external_input,
                    relax)
from .navigation import (advance_robot, assign_targets, build_activity_matrix,
                         command_neuron)
from .planner import (AttachmentError, NoPathError, PlanQuery, plan_via_matrix)
from .scenarios import Scenario, builtin

METHODS = ("binn", "flbbinn")
SATURATION_LEVEL = 0.8  # fraction of B counting as a saturated neuron


class RunError(Exception):
    pass


@dataclass
class RobotSummary:
    id: int
    path_length: float
    steps: int
    idle_steps: int
    collisions: int


@dataclass
class RescueReport:
    scenario: str
    method: str
    seed: int
    completed: bool
    ticks: int
    robots: list[RobotSummary]
    rescued: list[tuple[int, int, int]]  # (tick, target_id, robot_id)
    target_count: int
    field_neurons: int
    feature_count: int
    relax_iters_per_tick: list[int]
    collision_events: int
    r_rep: float
    planning_ready_tick: int | None
    plan_fallbacks: int

    @property
    def path_length(self) -> float:
        return sum(r.path_length for r in self.robots)

    @property
    def steps(self) -> int:
        return sum(r.steps for r in self.robots)

    @property
    def idle_steps(self) -> int:
        return sum(r.idle_steps for r in self.robots)

    def to_json(self) -> str:
        doc = {
            "scenario": self.scenario, "method": self.method, "seed": self.seed,
            "completed": self.completed, "ticks": self.ticks,
            "robots": [vars(r) for r in self.robots],
            "rescued": self.rescued, "target_count": self.target_count,
            "field_neurons": self.field_neurons,
            "feature_count": self.feature_count,
            "relax_iters_per_tick": self.relax_iters_per_tick,
            "collision_events": self.collision_events,
            "r_rep": self.r_rep,
            "planning_ready_tick": self.planning_ready_tick,
            "plan_fallbacks": self.plan_fallbacks,
        }
        return json.dumps(doc, sort_keys=True)


class RescueSimulation:
    """Drives one rescue run; method 'binn' navigates the neural field only,
    'flbbinn' additionally learns features (or, with a preloaded model,
    plans waypoint routes over the feature matrix)."""

    def __init__(self, scenario: Scenario, method: str = "binn", seed: int = 0,
                 store: FeatureStore | None = None, ticks_max: int | None = None):
        if method not in METHODS:
            raise RunError(f"unknown method {method!r}")
        scenario.params.validate()
        self.scenario = scenario
        self.method = method
        self.seed = seed
        self.grid = scenario.grid
        self.params = scenario.params
        self.env = scenario.env
        self.ticks_max = ticks_max or 10 * (self.grid.width + self.grid.height)
        self.learning = method == "flbbinn" and store is None
        self.planning = method == "flbbinn" and store is not None
        self.store = store if store is not None else FeatureStore(self.grid)

        self.reference = NeuralField.zeros(self.grid)
        self.assignment_fields: dict[int, NeuralField] = {}
        self.nav_fields: dict[int, NeuralField] = {}
        self.assignment: dict[int, int] = {}
        self.objectives: dict[int, int | None] = {r.id: None for r in self.env.robots}
        self.plans: dict[int, list[tuple[float, float]]] = {}
        self.fallback: dict[int, bool] = {r.id: False for r in self.env.robots}
        self.plan_fallbacks = 0

        self.rescued_events: list[tuple[int, int, int]] = []
        self.relax_iters_per_tick: list[int] = []
        self.r_rep = Representativeness(0.0, 0, 1)
        self.r_rep_history: list[float] = []
        self.planning_ready_tick: int | None = None
        self._leg_start = {r.id: self.grid.cell_of(r.position)
                           for r in self.env.robots}
        self._last_heading: dict[int, float | None] = {r.id: None
                                                       for r in self.env.robots}
        self._features_dirty = self.learning

    # -- per-tick phases ----------------------------------------------------

    def run(self, snapshot_every: int = 0, outdir: str | None = None,
            fmt: str = "csv") -> RescueReport:
        while self.env.pending_targets() and self.env.tick < self.ticks_max:
            self.step_tick()
            if snapshot_every and outdir and self.env.tick % snapshot_every == 0:
                self._snapshot(outdir, fmt)
        return self.report()

    def step_tick(self):
        self.env = step_environment(self.env)
        mask = self.env.obstacle_mask()
        iters = self._relax_fields(mask)
        self._assign(mask)
        self._choose_objectives()
        iters += self._relax_nav_fields(mask)
        self.relax_iters_per_tick.append(iters)
        self._act(mask)
        if self.learning:
            self._learn()

    def _relax_fields(self, mask) -> int:
        iters = 0
        if self.learning or self.planning:
            self.reference.external = assemble_external_input(
                self.env, self.grid, self.params, target_ids=[], mask=mask)
            self.reference, used = relax(self.reference, self.params)
            iters += used
        pending = self.env.pending_targets()
        if len(self.env.robots) > 1 or len(pending) > 1:
            alive = {t.id for t in pending}
            for tid in list(self.assignment_fields):
                if tid not in alive:
                    del self.assignment_fields[tid]
            for target in pending:
                fld = self.assignment_fields.get(target.id)
                if fld is None:
                    fld = NeuralField.zeros(self.grid)
                    self.assignment_fields[target.id] = fld
                fld.external = assemble_external_input(
                    self.env, self.grid, self.params,
                    target_ids=[target.id], mask=mask)
                self.assignment_fields[target.id], used = relax(fld, self.params)
                iters += used
        else:
            self.assignment_fields.clear()
        return iters

    def _assign(self, mask):
        pending = self.env.pending_targets()
        self.assignment = {t: r for t, r in self.assignment.items()
                           if any(p.id == t for p in pending)}
        unassigned = [t.id for t in pending if t.id not in self.assignment]
        if not unassigned:
            return
        if len(self.env.robots) == 1:
            for tid in unassigned:
                self.assignment[tid] = self.env.robots[0].id
        else:
            matrix = build_activity_matrix(self.env.robots, unassigned,
                                           self.assignment_fields)
            self.assignment.update(assign_targets(matrix).by_target)
        for target in pending:
            if target.id in self.assignment and target.status == "pending":
                target.status = "assigned"

    def _choose_objectives(self):
        for robot in self.env.robots:
            held = [t for t, r in self.assignment.items() if r == robot.id]
            if not held:
                self._set_objective(robot, None)
                continue
            if len(held) == 1 or not self.assignment_fields:
                self._set_objective(robot, held[0])
                continue
            cell = self.grid.cell_of(robot.position)
            best = max(held, key=lambda t: (
                self.assignment_fields[t].zeta[cell[0], cell[1]], -t))
            self._set_objective(robot, best)

    def _set_objective(self, robot: RobotState, tid: int | None):
        if self.objectives.get(robot.id) != tid:
            self.objectives[robot.id] = tid
            robot.assigned_target = tid
            if robot.id in self.nav_fields:
                self.nav_fields[robot.id].zeta[:] = 0.0
            self.plans.pop(robot.id, None)

    def _relax_nav_fields(self, mask) -> int:
        iters = 0
        for robot in self.env.robots:
            tid = self.objectives[robot.id]
            if self.planning and not self.fallback[robot.id]:
                continue
            fld = self.nav_fields.get(robot.id)
            if fld is None:
                fld = NeuralField.zeros(self.grid)
                self.nav_fields[robot.id] = fld
            fld.external = assemble_external_input(
                self.env, self.grid, self.params,
                target_ids=[tid] if tid is not None else [],
                exclude_robot=robot, inject_robots=True, mask=mask)
            self.nav_fields[robot.id], used = relax(fld, self.params)
            iters += used
        return iters

    def _act(self, mask):
        for robot in self.env.robots:
            cell = self.grid.cell_of(robot.position)
            if mask[cell[0], cell[1]]:
                # an obstacle moved onto the robot; halt and flag
                robot.collisions += 1
                robot.idle_steps += 1
                robot.trajectory.append(robot.pose)
                continue
            if self.objectives[robot.id] is None:
                robot.idle_steps += 1
                robot.trajectory.append(robot.pose)
                continue
            if self.planning and not self.fallback[robot.id]:
                self._follow_plan(robot)
            else:
                self._follow_field(robot)
            self._check_rescue(robot)

    def _follow_field(self, robot: RobotState):
        fld = self.nav_fields[robot.id]
        cell = self.grid.cell_of(robot.position)
        nxt = command_neuron(fld, cell, robot.pose[2])
        if nxt != cell:
            occupied = {self.grid.cell_of(r.position)
                        for r in self.env.robots if r.id != robot.id}
            if nxt in occupied:
                nxt = cell
        moved = advance_robot(robot, nxt, self.env, self.params)
        if moved and self.learning:
            self._extract_from_move(robot)

    def _follow_plan(self, robot: RobotState):
        tid = self.objectives[robot.id]
        target = self.env.targets[tid]
        if robot.id not in self.plans:
            try:
                self.plans[robot.id] = self._make_plan(robot, target)
            except (AttachmentError, NoPathError):
                self._engage_fallback(robot)
                robot.idle_steps += 1
                robot.trajectory.append(robot.pose)
                return
        waypoints = self.plans[robot.id]
        x, y, theta = robot.pose
        while waypoints and math.hypot(waypoints[0][0] - x, waypoints[0][1] - y) < 1e-9:
            waypoints.pop(0)
        if not waypoints:
            robot.idle_steps += 1
            robot.trajectory.append(robot.pose)
            return
        wx, wy = waypoints[0]
        dist = math.hypot(wx - x, wy - y)
        hop = min(self.params.v * self.params.dt_sim, dist)
        theta = math.atan2(wy - y, wx - x)
        nx, ny = x + hop * math.cos(theta), y + hop * math.sin(theta)
        if not self.env.is_free((nx, ny)):
            self._engage_fallback(robot)
            robot.idle_steps += 1
            robot.trajectory.append(robot.pose)
            return
        robot.pose = (nx, ny, theta)
        robot.path_length += hop
        robot.trajectory.append(robot.pose)

    def _make_plan(self, robot: RobotState, target) -> list[tuple[float, float]]:
        query = PlanQuery(start=robot.position, target=target.position,
                          store=self.store, fld=self.reference)
        plan = plan_via_matrix(query)
        cells = [self.grid.cell_of(p) for p in plan.waypoints]
        for a, b in zip(cells, cells[1:]):
            if not collision_free_link(a, b, self.reference):
                raise NoPathError("stale plan segment failed re-validation")
        return list(plan.waypoints[1:])

    def _engage_fallback(self, robot: RobotState):
        if not self.fallback[robot.id]:
            self.fallback[robot.id] = True
            self.plan_fallbacks += 1

    def _check_rescue(self, robot: RobotState):
        cell = self.grid.cell_of(robot.position)
        for target in self.env.pending_targets():
            if self.grid.cell_of(target.position) == cell:
                target.status = "rescued"
                self.rescued_events.append((self.env.tick, target.id, robot.id))
                self.assignment.clear()
                self.plans.clear()
                if self.learning:
                    self._batch_candidates(robot, target)
                self._leg_start[robot.id] = cell

    # -- feature learning ---------------------------------------------------

    def _extract_from_move(self, robot: RobotState):
        poses = robot.trajectory
        curr = math.atan2(poses[-1][1] - poses[-2][1], poses[-1][0] - poses[-2][0])
        prev = self._last_heading[robot.id]
        self._last_heading[robot.id] = curr
        if prev is None:
            return
        turn_cell = self.grid.cell_of((poses[-2][0], poses[-2][1]))
        cand = angle_candidate(prev, curr, turn_cell,
                               math.radians(self.params.th_theta_deg))
        if cand is not None:
            self._process_candidate(cand)

    def _batch_candidates(self, robot: RobotState, target):
        for cell in (self._leg_start[robot.id],
                     self.grid.cell_of(target.position)):
            self._process_candidate(cell)
        self._last_heading[robot.id] = None

    def _process_candidate(self, cell):
        if self.reference.zeta[cell[0], cell[1]] < 0.0:
            return
        if self.r_rep.ratio < 1.0:
            if distance_channel(cell, self.store, self.params.th1):
                self.store.add(cell)
                self._features_dirty = True
        else:
            if optimize_feature(cell, self.store, self.reference, self.params):
                self._features_dirty = True

    def _learn(self):
        if activity_channel(self.store, self.reference):
            self._features_dirty = True
        if not self._features_dirty:
            return
        secondary_fusion(self.store, self.reference, self.params.th2)
        update_feature_matrix(self.store, self.reference)
        if len(self.store):
            self.r_rep = representativeness(self.store, self.reference)
            self.r_rep_history.append(self.r_rep.ratio)
            if self.r_rep.ratio >= 1.0 and self.planning_ready_tick is None:
                self.planning_ready_tick = self.env.tick
        self._features_dirty = False

    # -- reporting ----------------------------------------------------------

    def report(self) -> RescueReport:
        return RescueReport(
            scenario=self.scenario.name,
            method=self.method,
            seed=self.seed,
            completed=not self.env.pending_targets(),
            ticks=self.env.tick,
            robots=[RobotSummary(
                id=r.id,
                path_length=r.path_length,
                steps=len(r.trajectory) - 1 - r.idle_steps,
                idle_steps=r.idle_steps,
                collisions=r.collisions) for r in self.env.robots],
            rescued=list(self.rescued_events),
            target_count=len(self.env.targets),
            field_neurons=self.grid.width * self.grid.height,
            feature_count=len(self.store),
            relax_iters_per_tick=list(self.relax_iters_per_tick),
            collision_events=sum(r.collisions for r in self.env.robots),
            r_rep=self.r_rep.ratio,
            planning_ready_tick=self.planning_ready_tick,
            plan_fallbacks=self.plan_fallbacks,
        )

    def _snapshot(self, outdir: str, fmt: str):
        fld = (self.nav_fields.get(0) or self.reference)
        tag = f"{self.scenario.name}_t{self.env.tick:05d}"
        if fmt == "pgm":
            nr_io.write_bytes(f"{outdir}/{tag}.pgm",
                              nr_io.field_to_pgm(fld, self.params), overwrite=True)
        else:
            nr_io.write_text(f"{outdir}/{tag}.csv",
                             nr_io.field_to_csv(fld), overwrite=True)


def run_rescue(scenario: Scenario, method: str = "binn", seed: int = 0,
               store: FeatureStore | None = None,
               ticks_max: int | None = None,
               snapshot_every: int = 0, outdir: str | None = None,
               fmt: str = "csv") -> tuple[RescueReport, RescueSimulation]:
    sim = RescueSimulation(scenario, method=method, seed=seed, store=store,
                           ticks_max=ticks_max)
    report = sim.run(snapshot_every=snapshot_every, outdir=outdir, fmt=fmt)
    return report, sim


# ---------------------------------------------------------------------------
# Benchmark harness
# ---------------------------------------------------------------------------

def settled(scenario: Scenario) -> Scenario:
    """The scenario after its dynamics played out: movers parked, suddens live."""
    obstacles = []
    for obs in scenario.env.obstacles:
        if obs.kind == "moving":
            obstacles.append(Obstacle(center=obs.stop_center, lam=obs.lam))
        elif obs.kind == "sudden":
            obstacles.append(replace(obs, trigger_tick=0))
        else:
            obstacles.append(obs)
    env = Environment(grid=scenario.grid, obstacles=obstacles)
    return replace(scenario, env=env)


def query_world(scenario: Scenario) -> Scenario:
    """Single robot at the query start, single target at the query target,
    placed in the settled world."""
    if scenario.query is None:
        raise RunError(f"scenario {scenario.name} defines no benchmark query")
    world = settled(scenario)
    start, goal = scenario.query
    world.env.robots.append(RobotState(id=0, pose=(start[0], start[1], 0.0),
                                       speed=scenario.params.v))
    world.env.targets.append(Target(id=0, position=goal))
    return world


def run_benchmark(scenario_names: list[str] | None = None,
                  methods: tuple[str, ...] = METHODS,
                  seed: int = 0) -> list[dict]:
    """Learning phase per scenario, then one comparable query run per method."""
    names = scenario_names or ["static", "moving", "sudden",
                               "house_open", "house_closed"]
    rows = []
    for name in names:
        scenario = builtin(name)
        learn_report = learn_sim = None
        if "flbbinn" in methods:
            learn_report, learn_sim = run_rescue(builtin(name), "flbbinn", seed)
        for method in methods:
            world = query_world(builtin(name))
            store = learn_sim.store if method == "flbbinn" else None
            report, _sim = run_rescue(world, method, seed, store=store)
            neurons = (len(store) if method == "flbbinn"
                       else scenario.grid.width * scenario.grid.height)
            rows.append({
                "scenario": name,
                "method": method,
                "neurons": neurons,
                "path_length_m": round(report.path_length, 6),
                "steps": report.steps,
                "idle_steps": report.idle_steps,
                "collisions": report.collision_events
                              + (learn_report.collision_events
                                 if method == "flbbinn" else 0),
                "completed": report.completed,
                "r_rep": round(learn_report.r_rep, 6) if method == "flbbinn" else "",
                "plan_fallbacks": report.plan_fallbacks if method == "flbbinn" else 0,
            })
    return rows


def benchmark_to_csv(rows: list[dict]) -> str:
    cols = ["scenario", "method", "neurons", "path_length_m", "steps",
            "idle_steps", "collisions", "completed", "r_rep", "plan_fallbacks"]
    lines = [",".join(cols)]
    for row in rows:
        lines.append(",".join(str(row[c]) for c in cols))
    return "\n".join(lines)


# ---------------------------------------------------------------------------
# Parameter sweeps
# ---------------------------------------------------------------------------

@dataclass
class SweepSpec:
    param: str                       # one of: a, mu, sigma
    values: list[float]
    base: str = "sweep_base"         # builtin scenario name


@dataclass
class SweepResult:
    param: str
    value: float
    flagged: bool
    reason: str = ""
    report: RescueReport | None = None
    saturation_fraction: float = 0.0
    saturated: bool = False
    far_to_near_ratio: float = 0.0
    mean_outside_disk: float = 0.0
    min_clearance: float = math.inf
    snapshot: NeuralField | None = None


def run_sweep(spec: SweepSpec, seed: int = 0) -> list[SweepResult]:
    if spec.param not in ("a", "mu", "sigma"):
        raise RunError(f"sweep parameter must be a, mu, or sigma, not {spec.param!r}")
    results = []
    for value in spec.values:
        scenario = (builtin(spec.base) if isinstance(spec.base, str)
                    else spec.base())
        params = replace(scenario.params, **{spec.param: value})
        try:
            params.validate()
        except Exception as exc:
            results.append(SweepResult(spec.param, value, flagged=True,
                                       reason=str(exc)))
            continue
        scenario = replace(scenario, params=params)
        report, sim = run_rescue(scenario, "binn", seed)
        fld = sim.nav_fields.get(0) or sim.reference
        # converge the snapshot beyond the per-tick budget
        fld, _ = relax(fld, replace(params, relax_iters=20_000))
        results.append(_measure(spec.param, value, scenario, report, sim, fld))
    return results


def _measure(param, value, scenario, report, sim, fld) -> SweepResult:
    params = scenario.params
    mask = sim.env.obstacle_mask()
    free = ~mask
    zeta = fld.zeta
    sat_frac = float(np.count_nonzero(zeta[free] >= SATURATION_LEVEL * params.b)
                     / max(np.count_nonzero(free), 1))
    target = scenario.env.targets[0]
    tc = scenario.grid.cell_of(target.position)
    xs, ys = scenario.grid.cell_centers()
    dist = np.hypot(xs - target.position[0], ys - target.position[1])
    near = (dist <= math.sqrt(2.0) + 1e-9) & (dist > 1e-9)
    near_max = float(zeta[near].max()) if near.any() else 0.0
    far_half = xs > scenario.grid.width * scenario.grid.cell_length / 2.0
    far_max = float(zeta[far_half & free].max()) if (far_half & free).any() else 0.0
    outside = (dist > 5.0) & free
    mean_out = float(zeta[outside].mean()) if outside.any() else 0.0
    clearance = min((path_min_clearance(r.trajectory, sim.env)
                     for r in sim.env.robots), default=math.inf)
    return SweepResult(
        param=param, value=value, flagged=False, report=report,
        saturation_fraction=sat_frac, saturated=sat_frac > 0.5,
        far_to_near_ratio=(far_max / near_max) if near_max > 0 else 0.0,
        mean_outside_disk=mean_out, min_clearance=clearance,
        snapshot=fld.copy())


def path_min_clearance(trajectory, env: Environment,
                       sample_step: float = 0.05) -> float:
    """Minimum distance from the swept trajectory to any blocked cell center."""
    mask = env.obstacle_mask()
    blocked = np.argwhere(mask)
    if len(blocked) == 0:
        return math.inf
    ln = env.grid.cell_length
    centers = (blocked + 0.5) * ln
    samples = []
    for (x0, y0, _), (x1, y1, _) in zip(trajectory, trajectory[1:]):
        seg = math.hypot(x1 - x0, y1 - y0)
        n = max(int(seg / sample_step), 1)
        for i in range(n + 1):
            t = i / n
            samples.append((x0 + t * (x1 - x0), y0 + t * (y1 - y0)))
    if not samples:
        samples = [(trajectory[0][0], trajectory[0][1])]
    pts = np.array(samples)
    dists = np.hypot(pts[:, None, 0] - centers[None, :, 0],
                     pts[:, None, 1] - centers[None, :, 1])
    return float(dists.min())


# ---------------------------------------------------------------------------
# Trap/retreat trajectory analysis (used by the scenario behavior checks)
# ---------------------------------------------------------------------------

def region_crossings(trajectory, region) -> list[tuple[int, str]]:
    """(tick, 'enter'|'exit') events for an axis-aligned region x0,x1,y0,y1."""
    x0, x1, y0, y1 = region
    events = []
    inside = None
    for tick, (x, y, _) in enumerate(trajectory):
        now = x0 <= x <= x1 and y0 <= y <= y1
        if inside is None:
            inside = now
            continue
        if now and not inside:
            events.append((tick, "enter"))
        elif inside and not now:
            events.append((tick, "exit"))
        inside = now
    return events


def first_retreat_tick(trajectory, target) -> int | None:
    """First tick whose move strictly increases the distance to the target."""
    for tick in range(1, len(trajectory)):
        x0, y0, _ = trajectory[tick - 1]
        x1, y1, _ = trajectory[tick]
        d0 = math.hypot(target[0] - x0, target[1] - y0)
        d1 = math.hypot(target[0] - x1, target[1] - y1)
        if d1 > d0 + 1e-9:
            return tick
    return None
