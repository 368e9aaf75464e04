"""Shunting neural-field dynamics on the grid.

Each grid cell holds one neuron with activity zeta kept inside [-D, B] by
the shunting equation

    dz/dt = -A*z + (B - z) * Se - (D + z) * Si

where the excitation Se collects the positive external input plus weighted
positive neighbor activity, and the inhibition Si collects the negative
external input plus weighted sub-threshold neighbor activity (threshold
sigma < 0, weights scaled by beta). Targets inject +E, obstacles -E.

Integration is explicit Euler with a synchronous (double-buffered) update,
so one step is a pure function of the previous activity array. The core
step broadcasts over leading batch axes, which the randomized boundedness
suite relies on.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace

import numpy as np

from .environment import Cell, Environment, GridSpec, RobotState, ScenarioError


class FieldError(Exception):
    """Raised for ill-formed field inputs or diverging integration."""


@dataclass(frozen=True)
class ShuntingParams:
    """Constant set for the shunting dynamics and the simulation loop."""

    a: float = 5.0        # passive decay rate
    b: float = 1.0        # upper activity bound
    d: float = 1.0        # lower activity bound magnitude
    mu: float = 1.0       # lateral connection weight scale
    e: float = 70.0       # external input magnitude
    sigma: float = -0.5   # threshold for inhibitory lateral propagation
    beta: float = 1.0     # inhibitory weight fraction of the excitatory weight
    r0: float = math.sqrt(2.0)  # receptive-field radius in cell units
    dt_neural: float = 0.005    # Euler step of the neural integration
    relax_iters: int = 10       # integration steps per simulation tick
    tol: float = 1e-6           # steady-state tolerance for early exit
    th_theta_deg: float = 30.0  # turning-angle threshold (feature extraction)
    th1: float = 3.0            # feature spacing threshold
    th2: float = 5.0            # secondary fusion distance threshold
    v: float = 1.0              # robot speed, meters per tick
    dt_sim: float = 1.0         # simulation tick length

    def validate(self):
        checks = [
            (self.a > 0, "A must be positive"),
            (self.b > 0, "B must be positive"),
            (self.d > 0, "D must be positive"),
            (self.mu > 0, "mu must be positive"),
            (self.e > 0, "E must be positive"),
            (self.sigma < 0, "sigma must be negative"),
            (0.0 <= self.beta <= 1.0, "beta must lie in [0, 1]"),
            (self.r0 >= 1.0, "r0 must be at least 1"),
            (self.relax_iters >= 1, "relax_iters must be at least 1"),
            (self.v > 0, "v must be positive"),
        ]
        for ok, msg in checks:
            if not ok:
                raise ScenarioError(msg)
        bound = self.dt_neural * (self.a + self.e
                                  + 8.0 * self.mu * max(self.b, self.d))
        if not bound < 1.0:
            raise ScenarioError(
                f"unstable integration: dt*(A+E+8*mu*max(B,D)) = {bound:.3f} >= 1")

    @classmethod
    def from_document(cls, kwargs: dict) -> "ShuntingParams":
        params = cls(**{k: (int(v) if k == "relax_iters" else float(v))
                        for k, v in kwargs.items()})
        params.validate()
        return params

    def to_document(self) -> dict:
        return {
            "a": self.a, "b": self.b, "d": self.d, "mu": self.mu, "e": self.e,
            "sigma": self.sigma, "beta": self.beta, "r0": self.r0,
            "dt_neural": self.dt_neural, "relax_iters": self.relax_iters,
            "th_theta_deg": self.th_theta_deg, "th1": self.th1, "th2": self.th2,
            "v": self.v, "dt_sim": self.dt_sim,
        }


# Neighbor offsets: 4 axial at distance 1, 4 diagonal at distance sqrt(2).
_AXIAL = ((1, 0), (-1, 0), (0, 1), (0, -1))
_DIAGONAL = ((1, 1), (1, -1), (-1, 1), (-1, -1))
NEIGHBOR_OFFSETS = _AXIAL + _DIAGONAL


def connection_weight(k: Cell, l: Cell, params: ShuntingParams) -> float:
    """Lateral weight between two cells: mu/|kl| within radius r0, else 0."""
    if k == l:
        raise FieldError("self-connection is undefined")
    dist = math.hypot(k[0] - l[0], k[1] - l[1])
    if dist <= params.r0:
        return params.mu / dist
    return 0.0


def _shifted(arr: np.ndarray, dx: int, dy: int) -> np.ndarray:
    """arr sampled at (x-dx, y-dy) with zeros outside; grid is the last two axes."""
    out = np.zeros_like(arr)
    src_x = slice(max(0, -dx), arr.shape[-2] - max(0, dx))
    src_y = slice(max(0, -dy), arr.shape[-1] - max(0, dy))
    dst_x = slice(max(0, dx), arr.shape[-2] - max(0, -dx))
    dst_y = slice(max(0, dy), arr.shape[-1] - max(0, -dy))
    out[..., dst_x, dst_y] = arr[..., src_x, src_y]
    return out


def _neighbor_sum(values: np.ndarray, mu, r0) -> np.ndarray:
    """Weighted sum of the 8-neighborhood with out-of-bounds contributing 0."""
    total = np.zeros_like(values)
    for dx, dy in _AXIAL:
        total += _shifted(values, dx, dy)
    if np.all(r0 >= math.sqrt(2.0)):
        diag = np.zeros_like(values)
        for dx, dy in _DIAGONAL:
            diag += _shifted(values, dx, dy)
        total += diag / math.sqrt(2.0)
    elif np.any(r0 >= math.sqrt(2.0)):
        raise FieldError("mixed r0 regimes are not supported in one batch")
    return mu * total


def shunting_step(zeta: np.ndarray, external: np.ndarray, params: ShuntingParams,
                  *, a=None, b=None, d=None, mu=None, sigma=None, beta=None,
                  dt=None) -> np.ndarray:
    """One synchronous Euler step; broadcasts over leading batch axes.

    Per-case parameter arrays (shape broadcastable to zeta) may override the
    scalars in `params`. The result is clamped to [-D, B].
    """
    a = params.a if a is None else a
    b = params.b if b is None else b
    d = params.d if d is None else d
    mu = params.mu if mu is None else mu
    sigma = params.sigma if sigma is None else sigma
    beta = params.beta if beta is None else beta
    dt = params.dt_neural if dt is None else dt

    exc = np.maximum(external, 0.0) + _neighbor_sum(np.maximum(zeta, 0.0), mu, params.r0)
    inh = np.maximum(-external, 0.0) + beta * _neighbor_sum(
        np.maximum(sigma - zeta, 0.0), mu, params.r0)
    dz = -a * zeta + (b - zeta) * exc - (d + zeta) * inh
    return np.clip(zeta + dt * dz, -d, b)


@dataclass
class NeuralField:
    """Activity and external input arrays for one propagation network."""

    grid: GridSpec
    zeta: np.ndarray
    external: np.ndarray

    @classmethod
    def zeros(cls, grid: GridSpec) -> "NeuralField":
        return cls(grid=grid,
                   zeta=np.zeros(grid.shape),
                   external=np.zeros(grid.shape))

    def copy(self) -> "NeuralField":
        return NeuralField(self.grid, self.zeta.copy(), self.external.copy())


def assemble_external_input(env: Environment, grid: GridSpec,
                            params: ShuntingParams,
                            target_ids: list[int] | None = None,
                            exclude_robot: RobotState | None = None,
                            inject_robots: bool = False,
                            tick: int | None = None,
                            mask: np.ndarray | None = None) -> np.ndarray:
    """Per-cell external input: +E at live designated targets, -E at blocked cells.

    `target_ids` selects which (unrescued) targets excite this field; None
    means all pending targets. With `inject_robots`, every robot except
    `exclude_robot` contributes -E at its occupied cell (a transient robot
    parked on a target cell does not silence the target). A precomputed
    obstacle `mask` avoids re-rasterizing per field.
    """
    if mask is None:
        mask = env.obstacle_mask(tick)
    inp = np.where(mask, -params.e, 0.0)
    if inject_robots:
        for robot in env.robots:
            if exclude_robot is not None and robot.id == exclude_robot.id:
                continue
            cx, cy = grid.cell_of(robot.position)
            inp[cx, cy] = -params.e
    for target in env.targets:
        if target.rescued:
            continue
        if target_ids is not None and target.id not in target_ids:
            continue
        cx, cy = grid.cell_of(target.position)
        if mask[cx, cy]:
            raise FieldError(
                f"cell ({cx}, {cy}) is both target and obstacle")
        inp[cx, cy] = params.e
    return inp


def step_field(fld: NeuralField, params: ShuntingParams) -> NeuralField:
    """Advance the field by one synchronous Euler step of the dynamics."""
    zeta = shunting_step(fld.zeta, fld.external, params)
    if not np.all(np.isfinite(zeta)):
        bad = np.argwhere(~np.isfinite(zeta))[0]
        raise FieldError(f"non-finite activity at cell ({bad[0]}, {bad[1]})")
    return NeuralField(fld.grid, zeta, fld.external)


def relax(fld: NeuralField, params: ShuntingParams) -> tuple[NeuralField, int]:
    """Iterate step_field up to relax_iters times; stop early at steady state.

    Early exit requires both max|dz| < tol and a stalled positive support:
    a freshly reached cell changes by much less than any practical tol, so
    the raw delta test alone would freeze an advancing activity front.
    """
    iters = 0
    support = int(np.count_nonzero(fld.zeta > 0.0))
    for _ in range(params.relax_iters):
        nxt = step_field(fld, params)
        iters += 1
        delta = float(np.max(np.abs(nxt.zeta - fld.zeta)))
        new_support = int(np.count_nonzero(nxt.zeta > 0.0))
        fld = nxt
        if delta < params.tol and new_support == support:
            break
        support = new_support
    return fld, iters


def isolated_equilibrium(excitation: float, inhibition: float,
                         params: ShuntingParams) -> float:
    """Closed-form steady state of one neuron with frozen total inputs."""
    se = max(excitation, 0.0)
    si = max(inhibition, 0.0)
    return (params.b * se - params.d * si) / (params.a + se + si)
