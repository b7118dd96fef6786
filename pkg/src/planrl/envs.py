"""Deterministic kinematic environments for the three tasks.

These are desk-scale stand-ins for physics simulation: a gripper moves by
scaled action deltas, grasping attaches an object rigidly, releasing lets it
settle, walls clamp motion.  State and goal vector layouts follow the task
conventions:

* block stacking: per block (position, rotation, velocity, rotational
  velocity), then gripper position and opening angle; |s| = 12 * n_o + 4.
  The goal is each block's target followed by the gripper's target,
  k = 3 * (n_o + 1).
* tool use: gripper (position, angle), rake tip and end positions, object
  position; the goal holds gripper, rake-tip and object targets (k = 9).
* four rooms: a point agent (position, velocity) in a 2x2 room grid with
  four door gaps; the goal is the agent's target position (k = 2).

Each environment also builds the grounding registry that ties its planning
predicates to state-vector slices.
"""
from __future__ import annotations

from collections import deque

import numpy as np

from .grounding import GroundingRegistry, PredicateBinding
from .pddl import ROOMS, lit


class EnvError(Exception):
    pass


class NoiseModel:
    """Perceptual noise scaled to the recent state range.

    The per-element scale is the interquartile range over a rolling history
    of recent clean states (quartiles rather than extremes, to shed
    outliers).  Observations return ``s + kappa * n`` with
    ``n ~ Normal(0, diag(range))``; noise is resampled on every call.  Until
    the history holds ``warmup`` entries the range falls back to zero, and
    ``kappa = 0`` short-circuits to the identity without consuming random
    numbers.
    """

    def __init__(self, kappa: float, seed: int | None = None,
                 history_size: int = 5000, warmup: int = 100,
                 range_override: np.ndarray | None = None):
        if kappa < 0:
            raise EnvError("kappa must be >= 0")
        self.kappa = float(kappa)
        self.history_size = history_size
        self.warmup = warmup
        self._rng = np.random.default_rng(seed)
        self._history: deque = deque(maxlen=history_size)
        self._override = (None if range_override is None
                          else np.asarray(range_override, dtype=float))

    def range_estimate(self, dim: int) -> np.ndarray:
        if self._override is not None:
            return self._override
        if len(self._history) < self.warmup:
            return np.zeros(dim)
        stacked = np.stack(self._history)
        q75, q25 = np.percentile(stacked, [75, 25], axis=0)
        return q75 - q25

    def observe(self, state: np.ndarray) -> np.ndarray:
        state = np.asarray(state, dtype=float)
        self._history.append(state.copy())
        if self.kappa == 0.0:
            return state.copy()
        scale = self.range_estimate(state.size)
        noise = self._rng.normal(0.0, 1.0, size=state.size) * scale
        return state + self.kappa * noise


class KinematicEnv:
    """Shared interface: reset/step plus grounding metadata."""

    state_dim: int
    action_dim: int
    goal_dim: int
    rollout_length: int
    goal_tolerance: float

    def reset(self, seed: int) -> np.ndarray:
        raise NotImplementedError

    def step(self, action: np.ndarray) -> np.ndarray:
        raise NotImplementedError

    @property
    def state(self) -> np.ndarray:
        raise NotImplementedError

    @property
    def goal(self) -> np.ndarray:
        raise NotImplementedError

    def registry(self) -> GroundingRegistry:
        raise NotImplementedError

    def goal_literals(self) -> frozenset:
        return self.registry().goal_literals(self.goal)

    def _check_action(self, action, dim) -> np.ndarray:
        u = np.asarray(action, dtype=float)
        if u.shape != (dim,):
            raise EnvError("action has shape %s, expected (%d,)"
                           % (u.shape, dim))
        return np.clip(u, -1.0, 1.0)


# ---------------------------------------------------------------------------
# block stacking


class BlockStackingEnv(KinematicEnv):
    """Stack ``n_blocks`` at a random spot, then park the gripper.

    A closed gripper (fourth action component negative) within the grasp
    radius of a block attaches it; the held block tracks the gripper
    exactly.  Releasing lets the block settle onto the table or onto a block
    directly underneath.
    """

    def __init__(self, n_blocks: int = 1, *, block_height: float = 0.05,
                 epsilon: float = 0.045, step_scale: float = 0.05,
                 grasp_radius: float = 0.05, rollout_length: int | None = None):
        if n_blocks not in (1, 2, 3):
            raise EnvError("n_blocks must be 1, 2 or 3")
        if epsilon >= block_height:
            # stacked geometry sits exactly at distance block_height from the
            # next layer's predicates; the threshold must stay inside that
            raise EnvError("epsilon must be smaller than block_height")
        self.n_blocks = n_blocks
        self.block_height = block_height
        self.epsilon = epsilon
        self.step_scale = step_scale
        self.grasp_radius = grasp_radius
        self.state_dim = 12 * n_blocks + 4
        self.action_dim = 4
        self.goal_dim = 3 * (n_blocks + 1)
        self.goal_tolerance = epsilon
        self.rollout_length = (rollout_length if rollout_length
                               else {1: 50, 2: 100, 3: 150}[n_blocks])
        self.workspace = np.array([[0.0, 1.0], [0.0, 1.0], [0.0, 0.5]])
        self._registry = _block_registry(self)
        self.reset(seed=0)

    # -- vector layout ---------------------------------------------------
    def block_slice(self, i: int) -> slice:
        return slice(12 * i, 12 * i + 3)

    @property
    def gripper_slice(self) -> slice:
        return slice(12 * self.n_blocks, 12 * self.n_blocks + 3)

    @property
    def goal_idx(self) -> tuple:
        idx = []
        for i in range(self.n_blocks):
            idx.extend(range(12 * i, 12 * i + 3))
        idx.extend(range(12 * self.n_blocks, 12 * self.n_blocks + 3))
        return tuple(idx)

    @property
    def state(self) -> np.ndarray:
        s = np.zeros(self.state_dim)
        for i in range(self.n_blocks):
            base = 12 * i
            s[base:base + 3] = self.block_pos[i]
            s[base + 6:base + 9] = self.block_vel[i]
        s[self.gripper_slice] = self.gripper_pos
        s[12 * self.n_blocks + 3] = self.gripper_angle
        return s

    @property
    def goal(self) -> np.ndarray:
        return self._goal.copy()

    def registry(self) -> GroundingRegistry:
        return self._registry

    # -- lifecycle ---------------------------------------------------------
    def reset(self, seed: int) -> np.ndarray:
        rng = np.random.default_rng(seed)
        half = self.block_height / 2.0
        positions = []
        while len(positions) < self.n_blocks:
            cand = rng.uniform(0.1, 0.9, size=2)
            if all(np.linalg.norm(cand - p[:2]) >= 0.15 for p in positions):
                positions.append(np.array([cand[0], cand[1], half]))
        self.block_pos = np.stack(positions)
        self.block_vel = np.zeros((self.n_blocks, 3))
        while True:
            base = rng.uniform(0.15, 0.85, size=2)
            if all(np.linalg.norm(base - p[:2]) >= 0.2 for p in positions):
                break
        self._stack_order = rng.permutation(self.n_blocks)
        targets = np.zeros((self.n_blocks, 3))
        for layer, i in enumerate(self._stack_order):
            targets[i] = [base[0], base[1], half + layer * self.block_height]
        while True:
            gxy = rng.uniform(0.1, 0.9, size=2)
            if (np.linalg.norm(gxy - base) >= 0.2
                    and all(np.linalg.norm(gxy - p[:2]) >= 0.15
                            for p in positions)):
                break
        self.gripper_pos = np.array([gxy[0], gxy[1], rng.uniform(0.1, 0.4)])
        self.gripper_angle = 0.08
        gripper_target = np.array([*rng.uniform(0.1, 0.9, size=2),
                                   rng.uniform(0.15, 0.35)])
        while np.linalg.norm(gripper_target[:2] - base) < 0.2:
            gripper_target[:2] = rng.uniform(0.1, 0.9, size=2)
        self.holding: int | None = None
        self._goal = np.concatenate([targets.ravel(), gripper_target])
        return self.state

    def step(self, action) -> np.ndarray:
        u = self._check_action(action, 4)
        prev_blocks = self.block_pos.copy()
        lo = self.workspace[:, 0].copy()
        if self.holding is not None:
            lo[2] = self.block_height / 2.0
        self.gripper_pos = np.clip(
            self.gripper_pos + self.step_scale * u[:3], lo,
            self.workspace[:, 1])
        closed = u[3] < 0.0
        if closed and self.holding is None:
            dists = np.linalg.norm(self.block_pos - self.gripper_pos, axis=1)
            nearest = int(np.argmin(dists))
            if dists[nearest] < self.grasp_radius:
                self.holding = nearest
                self.block_pos[nearest] = self.gripper_pos.copy()
        elif not closed and self.holding is not None:
            self.holding = None
        if self.holding is not None:
            self.block_pos[self.holding] = self.gripper_pos.copy()
        for i in np.argsort(self.block_pos[:, 2], kind="stable"):
            if i != self.holding:
                self._settle(int(i))
        self.gripper_angle = 0.04 * (1.0 + u[3])
        self.block_vel = self.block_pos - prev_blocks
        return self.state

    def _settle(self, i: int):
        """Drop block i onto the highest support below it, or the table."""
        half = self.block_height / 2.0
        z = half
        for j in range(self.n_blocks):
            if j == i or j == self.holding:
                continue
            if (np.linalg.norm(self.block_pos[j, :2]
                               - self.block_pos[i, :2]) < 0.03
                    and self.block_pos[j, 2] < self.block_pos[i, 2]):
                z = max(z, self.block_pos[j, 2] + self.block_height)
        self.block_pos[i, 2] = z


def _block_registry(env: BlockStackingEnv) -> GroundingRegistry:
    n = env.n_blocks
    h = env.block_height
    eps = env.epsilon
    bindings = []

    def block_idx(i):
        return tuple(range(12 * i, 12 * i + 3))

    grip_idx = tuple(range(12 * n, 12 * n + 3))

    def at_target_fn(i):
        return lambda s, g: g[3 * i:3 * i + 3]

    def on_fn(j):
        return lambda s, g: s[12 * j:12 * j + 3] + np.array([0.0, 0.0, h])

    def gripper_at_fn(i):
        return lambda s, g: s[12 * i:12 * i + 3]

    for i in range(n):
        name = "o%d" % (i + 1)
        bindings.append(PredicateBinding(lit("at_target", name), block_idx(i),
                                         at_target_fn(i), eps))
        bindings.append(PredicateBinding(lit("gripper_at", name), grip_idx,
                                         gripper_at_fn(i), eps))
        for j in range(n):
            if j == i:
                # a block on itself is degenerate: its distance equals the
                # block height identically, which sits on the epsilon boundary
                continue
            other = "o%d" % (j + 1)
            bindings.append(PredicateBinding(lit("on", name, other),
                                             block_idx(i), on_fn(j), eps))
    bindings.append(PredicateBinding(
        lit("gripper_at_target"), grip_idx,
        lambda s, g: g[3 * n:3 * n + 3], eps))

    def goal_literals(goal: np.ndarray) -> frozenset:
        targets = goal[:3 * n].reshape(n, 3)
        order = np.argsort(targets[:, 2], kind="stable")
        names = ["o%d" % (i + 1) for i in order]
        literals = [lit("at_target", names[0])]
        for lower, upper in zip(names[:-1], names[1:]):
            literals.append(lit("on", upper, lower))
        literals.append(lit("gripper_at_target"))
        return frozenset(literals)

    return GroundingRegistry(bindings, env.goal_idx, env.state_dim,
                             goal_literals)


# ---------------------------------------------------------------------------
# tool use


class ToolUseEnv(KinematicEnv):
    """Drag an out-of-reach block to a target using a rigid rake.

    The gripper is confined to a cylinder around its anchor; the block
    starts outside it.  Grasping the rake's end moves the whole two-point
    segment, and a block within the contact radius of either rake point is
    dragged along the rake's displacement.
    """

    REACH_ANCHOR = np.array([0.3, 0.5])
    REACH_RADIUS = 0.35
    RAKE_LENGTH = 0.35
    CONTACT_RADIUS = 0.06

    def __init__(self, *, epsilon: float = 0.05, step_scale: float = 0.05,
                 grasp_radius: float = 0.05, rollout_length: int = 100):
        self.epsilon = epsilon
        self.step_scale = step_scale
        self.grasp_radius = grasp_radius
        self.state_dim = 13
        self.action_dim = 4
        self.goal_dim = 9
        self.goal_tolerance = epsilon
        self.rollout_length = rollout_length
        self.table_z = 0.025
        self._registry = _tool_registry(self)
        self.reset(seed=0)

    goal_idx = (0, 1, 2, 4, 5, 6, 10, 11, 12)

    @property
    def state(self) -> np.ndarray:
        s = np.zeros(13)
        s[0:3] = self.gripper_pos
        s[3] = self.gripper_angle
        s[4:7] = self.rake_tip
        s[7:10] = self.rake_end
        s[10:13] = self.obj_pos
        return s

    @property
    def goal(self) -> np.ndarray:
        return self._goal.copy()

    def registry(self) -> GroundingRegistry:
        return self._registry

    def reset(self, seed: int) -> np.ndarray:
        rng = np.random.default_rng(seed)
        z = self.table_z
        ang = rng.uniform(0.0, 2.0 * np.pi)
        rad = rng.uniform(0.05, self.REACH_RADIUS - 0.1)
        gxy = self.REACH_ANCHOR + rad * np.array([np.cos(ang), np.sin(ang)])
        self.gripper_pos = np.array([gxy[0], gxy[1], rng.uniform(0.05, 0.2)])
        self.gripper_angle = 0.08
        end_y = 0.5 + rng.uniform(-0.03, 0.03)
        self.rake_end = np.array([0.5, end_y, z])
        self.rake_vec = np.array([self.RAKE_LENGTH, 0.0, 0.0])
        self.rake_tip = self.rake_end + self.rake_vec
        obj_xy = np.array([rng.uniform(0.78, 0.92), rng.uniform(0.35, 0.65)])
        if np.linalg.norm(obj_xy - self.REACH_ANCHOR) <= self.REACH_RADIUS:
            raise EnvError("object sampled inside the reachable region")
        self.obj_pos = np.array([obj_xy[0], obj_xy[1], z])
        ang_t = rng.uniform(0.0, 2.0 * np.pi)
        rad_t = rng.uniform(0.05, self.REACH_RADIUS - 0.07)
        txy = self.REACH_ANCHOR + rad_t * np.array([np.cos(ang_t),
                                                    np.sin(ang_t)])
        obj_target = np.array([txy[0], txy[1], z])
        gripper_target = np.array([self.REACH_ANCHOR[0], self.REACH_ANCHOR[1],
                                   0.1])
        self.holding: str | None = None
        self._goal = np.concatenate([gripper_target, obj_target, obj_target])
        return self.state

    def _clamp_gripper(self, pos: np.ndarray) -> np.ndarray:
        xy = pos[:2] - self.REACH_ANCHOR
        dist = np.linalg.norm(xy)
        if dist > self.REACH_RADIUS:
            xy *= self.REACH_RADIUS / dist
        z = min(max(pos[2], 0.0), 0.4)
        return np.array([*(self.REACH_ANCHOR + xy), z])

    def step(self, action) -> np.ndarray:
        u = self._check_action(action, 4)
        self.gripper_pos = self._clamp_gripper(
            self.gripper_pos + self.step_scale * u[:3])
        closed = u[3] < 0.0
        if closed and self.holding is None:
            candidates = {"rake": self.rake_end, "obj": self.obj_pos}
            name, pos = min(candidates.items(),
                            key=lambda kv: np.linalg.norm(kv[1]
                                                          - self.gripper_pos))
            if np.linalg.norm(pos - self.gripper_pos) < self.grasp_radius:
                self.holding = name
                if name == "obj":
                    self.obj_pos = self.gripper_pos.copy()
        elif not closed and self.holding is not None:
            if self.holding == "obj":
                self.obj_pos[2] = self.table_z
            else:
                self.rake_end[2] = self.table_z
                self.rake_tip = self.rake_end + self.rake_vec
            self.holding = None
        if self.holding == "rake":
            old_end = self.rake_end.copy()
            old_tip = self.rake_tip.copy()
            self.rake_end = self.gripper_pos.copy()
            self.rake_tip = self.rake_end + self.rake_vec
            delta = self.rake_end - old_end
            if (np.linalg.norm(self.obj_pos - old_tip) < self.CONTACT_RADIUS
                    or np.linalg.norm(self.obj_pos - old_end)
                    < self.CONTACT_RADIUS):
                self.obj_pos[:2] += delta[:2]
        elif self.holding == "obj":
            self.obj_pos = self.gripper_pos.copy()
            self.obj_pos[2] = max(self.obj_pos[2], self.table_z)
        self.gripper_angle = 0.04 * (1.0 + u[3])
        return self.state


def _tool_registry(env: ToolUseEnv) -> GroundingRegistry:
    eps = env.epsilon
    grip = (0, 1, 2)
    tip = (4, 5, 6)
    end = (7, 8, 9)
    obj = (10, 11, 12)
    bindings = [
        PredicateBinding(lit("gripper_at", "obj"), grip,
                         lambda s, g: s[10:13], eps),
        PredicateBinding(lit("gripper_at", "rake"), grip,
                         lambda s, g: s[7:10], eps),
        PredicateBinding(lit("gripper_at_target"), grip,
                         lambda s, g: g[0:3], eps),
        PredicateBinding(lit("at_target", "obj"), obj,
                         lambda s, g: g[6:9], eps),
        PredicateBinding(lit("at_target", "rake"), tip,
                         lambda s, g: g[3:6], eps),
        PredicateBinding(lit("at", "rake", "obj"), tip,
                         lambda s, g: s[10:13], eps),
        PredicateBinding(lit("at", "obj", "rake"), obj,
                         lambda s, g: s[4:7], eps),
    ]

    def goal_literals(goal: np.ndarray) -> frozenset:
        return frozenset([lit("at_target", "obj")])

    return GroundingRegistry(bindings, env.goal_idx, env.state_dim,
                             goal_literals)


# ---------------------------------------------------------------------------
# four rooms


ROOM_RECTS = {
    "00": ((0.0, 1.0), (0.0, 1.0)),
    "01": ((0.0, 1.0), (1.0, 2.0)),
    "10": ((1.0, 2.0), (0.0, 1.0)),
    "11": ((1.0, 2.0), (1.0, 2.0)),
}

DOOR_CENTERS = {
    "0001": np.array([0.5, 1.0]),
    "0010": np.array([1.0, 0.5]),
    "0111": np.array([1.0, 1.5]),
    "1011": np.array([1.5, 1.0]),
}

DOOR_GAP = 0.15  # half-width of each wall opening


class FourRoomsEnv(KinematicEnv):
    """Point agent in a 2x2 room grid; walls are impassable except at the
    four door gaps."""

    def __init__(self, *, epsilon: float = 0.15, step_scale: float = 0.05,
                 rollout_length: int = 900):
        self.epsilon = epsilon
        self.step_scale = step_scale
        self.state_dim = 4
        self.action_dim = 2
        self.goal_dim = 2
        self.goal_tolerance = epsilon
        self.rollout_length = rollout_length
        self.margin = 0.2
        self._registry = _four_rooms_registry(self)
        self.reset(seed=0)

    goal_idx = (0, 1)

    @property
    def state(self) -> np.ndarray:
        return np.concatenate([self.pos, self.vel])

    @property
    def goal(self) -> np.ndarray:
        return self._goal.copy()

    def registry(self) -> GroundingRegistry:
        return self._registry

    def _sample_in_room(self, rng, room: str) -> np.ndarray:
        (x0, x1), (y0, y1) = ROOM_RECTS[room]
        return np.array([rng.uniform(x0 + self.margin, x1 - self.margin),
                         rng.uniform(y0 + self.margin, y1 - self.margin)])

    def reset(self, seed: int) -> np.ndarray:
        rng = np.random.default_rng(seed)
        start_room = ROOMS[rng.integers(0, 4)]
        target_room = ROOMS[rng.integers(0, 4)]
        self.pos = self._sample_in_room(rng, start_room)
        self.vel = np.zeros(2)
        self._goal = self._sample_in_room(rng, target_room)
        return self.state

    @staticmethod
    def _gap_ok(axis: int, other_coord: float) -> bool:
        """Whether a wall crossing is inside a door gap."""
        if axis == 0:  # crossing the x=1 wall (doors 0010 and 0111)
            doors = ("0010", "0111")
        else:  # crossing the y=1 wall (doors 0001 and 1011)
            doors = ("0001", "1011")
        for d in doors:
            center = DOOR_CENTERS[d][1 - axis]
            if abs(other_coord - center) <= DOOR_GAP:
                return True
        return False

    def _move_axis(self, axis: int, delta: float):
        old = self.pos[axis]
        new = min(max(old + delta, 1e-3), 2.0 - 1e-3)
        wall = 1.0
        standoff = 1e-3
        if new != old and (old - wall) * (new - wall) <= 0.0:
            if not self._gap_ok(axis, self.pos[1 - axis]):
                new = wall - standoff if old < wall else wall + standoff
            elif new == wall:
                # inside a doorway: keep off the exact wall coordinate so the
                # crossing test stays well defined on the next step
                new = wall + (1e-9 if delta > 0 else -1e-9)
        self.pos[axis] = new

    def step(self, action) -> np.ndarray:
        u = self._check_action(action, 2)
        before = self.pos.copy()
        self._move_axis(0, self.step_scale * u[0])
        self._move_axis(1, self.step_scale * u[1])
        self.vel = self.pos - before
        return self.state


def _clamp_to_rect(xy: np.ndarray, room: str) -> np.ndarray:
    (x0, x1), (y0, y1) = ROOM_RECTS[room]
    return np.array([min(max(xy[0], x0), x1), min(max(xy[1], y0), y1)])


def _four_rooms_registry(env: FourRoomsEnv) -> GroundingRegistry:
    eps = env.epsilon
    idx = (0, 1)
    bindings = []
    for door, center in DOOR_CENTERS.items():
        bindings.append(PredicateBinding(
            lit("at_door_%s" % door), idx,
            (lambda c: lambda s, g: c.copy())(center), eps))
    for room, ((x0, x1), (y0, y1)) in ROOM_RECTS.items():
        center = np.array([(x0 + x1) / 2.0, (y0 + y1) / 2.0])
        bindings.append(PredicateBinding(
            lit("at_room_center_%s" % room), idx,
            (lambda c: lambda s, g: c.copy())(center), eps))
        bindings.append(PredicateBinding(
            lit("in_room_%s" % room), idx,
            (lambda r: lambda s, g: _clamp_to_rect(s[0:2], r))(room), eps))
        bindings.append(PredicateBinding(
            lit("target_in_room_%s" % room), idx,
            (lambda r: lambda s, g: s[0:2] + (g - _clamp_to_rect(g, r)))(room),
            eps))
    bindings.append(PredicateBinding(lit("at_target"), idx,
                                     lambda s, g: g.copy(), eps))

    def goal_literals(goal: np.ndarray) -> frozenset:
        return frozenset([lit("at_target")])

    return GroundingRegistry(bindings, env.goal_idx, env.state_dim,
                             goal_literals)


# ---------------------------------------------------------------------------


def make_env(task: str, n_objects: int = 1, **overrides) -> KinematicEnv:
    """Factory used by the harness; task is 'blocks', 'tool' or 'fourroom'."""
    if task == "blocks":
        return BlockStackingEnv(n_blocks=n_objects, **overrides)
    if task == "tool":
        return ToolUseEnv(**overrides)
    if task == "fourroom":
        return FourRoomsEnv(**overrides)
    raise EnvError("unknown task '%s'" % task)
