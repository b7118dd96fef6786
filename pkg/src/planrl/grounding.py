"""Bidirectional bridge between symbolic states and continuous vectors.

Each ground predicate is bound to a slice of the low-level state vector and
to a subgoal function that produces the target values for that slice.  From
these bindings three things follow without further domain knowledge:

* truth of a predicate: the bound slice lies within ``epsilon`` (Euclidean)
  of the subgoal function's output;
* abstraction of a state: the set of all predicates that test true;
* grounding of a symbolic subgoal: starting from the current state, sweep
  the subgoal functions of the goal's positive literals onto their slices
  until a fixpoint is reached, which resolves dependencies between
  predicates (a stacked block's target depends on where its base ends up).

Within one sweep the literals are applied in the caller-supplied order, so
when two literals legitimately write the same slice (mutually exclusive
position predicates that co-occur transiently) the later one wins and the
sweep still stabilizes.  A genuine cyclic dependency cannot stabilize; the
sweep guard converts it into an error after ``len(literals) + 1`` sweeps.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Iterable

import numpy as np

from .pddl import Literal


class GroundingError(Exception):
    pass


class MissingBindingError(GroundingError):
    pass


class FixpointDivergenceError(GroundingError):
    """The sweep failed to stabilize; the registry has a cyclic dependency."""


SubgoalFn = Callable[[np.ndarray, np.ndarray], np.ndarray]


@dataclass(frozen=True, eq=False)
class PredicateBinding:
    """One ground predicate tied to state indices and a subgoal function."""

    literal: Literal
    idx: tuple[int, ...]
    subgoal_fn: SubgoalFn
    epsilon: float

    def __repr__(self) -> str:
        return "PredicateBinding(%s, idx=%s, eps=%g)" % (
            self.literal, self.idx, self.epsilon)


class GroundingRegistry:
    """Immutable collection of predicate bindings plus the goal slice."""

    def __init__(self, bindings: Iterable[PredicateBinding],
                 goal_idx: Iterable[int], state_dim: int,
                 goal_literals_fn: Callable[[np.ndarray], frozenset] | None = None):
        self._bindings: dict = {}
        for b in bindings:
            if b.literal in self._bindings:
                raise GroundingError("duplicate binding for %s" % b.literal)
            if any(i < 0 or i >= state_dim for i in b.idx):
                raise GroundingError("binding %s indexes outside the state "
                                     "vector" % b.literal)
            self._bindings[b.literal] = b
        self.goal_idx = np.asarray(tuple(goal_idx), dtype=int)
        if self.goal_idx.size and (self.goal_idx.min() < 0
                                   or self.goal_idx.max() >= state_dim):
            raise GroundingError("goal indices outside the state vector")
        self.state_dim = state_dim
        self.goal_dim = int(self.goal_idx.size)
        self._goal_literals_fn = goal_literals_fn

    def binding(self, literal: Literal) -> PredicateBinding:
        try:
            return self._bindings[literal]
        except KeyError:
            raise MissingBindingError("no binding for %s" % literal) from None

    def bindings(self) -> list:
        return sorted(self._bindings.values(), key=lambda b: b.literal)

    def __len__(self) -> int:
        return len(self._bindings)

    def achieved_goal(self, state: np.ndarray) -> np.ndarray:
        return np.asarray(state, dtype=float)[self.goal_idx]

    def goal_literals(self, goal: np.ndarray) -> frozenset:
        if self._goal_literals_fn is None:
            raise GroundingError("registry has no goal literal mapping")
        return self._goal_literals_fn(np.asarray(goal, dtype=float))


def _check_dims(registry: GroundingRegistry, state: np.ndarray,
                goal: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    state = np.asarray(state, dtype=float)
    goal = np.asarray(goal, dtype=float)
    if state.shape != (registry.state_dim,):
        raise GroundingError("state has shape %s, expected (%d,)"
                             % (state.shape, registry.state_dim))
    if goal.shape != (registry.goal_dim,):
        raise GroundingError("goal has shape %s, expected (%d,)"
                             % (goal.shape, registry.goal_dim))
    return state, goal


def eval_subgoal_fn(binding: PredicateBinding, state: np.ndarray,
                    goal: np.ndarray) -> np.ndarray:
    """Evaluate one binding's target substate.  Pure."""
    out = np.asarray(binding.subgoal_fn(np.asarray(state, dtype=float),
                                        np.asarray(goal, dtype=float)),
                     dtype=float)
    if out.shape != (len(binding.idx),):
        raise GroundingError(
            "subgoal function for %s returned shape %s, expected (%d,)"
            % (binding.literal, out.shape, len(binding.idx)))
    return out


def predicate_truth(binding: PredicateBinding, state: np.ndarray,
                    goal: np.ndarray) -> bool:
    """True iff the bound slice is strictly within epsilon of its target."""
    state = np.asarray(state, dtype=float)
    target = eval_subgoal_fn(binding, state, goal)
    dist = float(np.linalg.norm(state[list(binding.idx)] - target))
    return dist < binding.epsilon


def _positive_order(literals) -> list:
    """Positive literals in a deterministic order, preserving any given one."""
    if isinstance(literals, (set, frozenset)):
        ordered = sorted(literals)
    else:
        seen = set()
        ordered = []
        for l in literals:
            if l not in seen:
                seen.add(l)
                ordered.append(l)
    return [l for l in ordered if l.positive]


def fixpoint_subgoal(registry: GroundingRegistry, subgoal_literals,
                     state: np.ndarray, goal: np.ndarray
                     ) -> tuple[np.ndarray, int]:
    """Run the subgoal-grounding sweep; returns (grounded state, sweeps).

    Starting from a copy of ``state``, each sweep writes every literal's
    subgoal function output onto its indices, re-reading the partially
    updated vector so dependency chains resolve.  Negative literals are
    ignored.  Raises :class:`FixpointDivergenceError` when the vector is
    still changing after ``len(literals) + 1`` sweeps.
    """
    state, goal = _check_dims(registry, state, goal)
    ordered = _positive_order(subgoal_literals)
    bindings = [registry.binding(l) for l in ordered]
    grounded = state.copy()
    if not bindings:
        return grounded, 0
    max_sweeps = len(bindings) + 1
    for sweep in range(1, max_sweeps + 1):
        before = grounded.copy()
        for b in bindings:
            grounded[list(b.idx)] = eval_subgoal_fn(b, grounded, goal)
        if np.array_equal(before, grounded):
            return grounded, sweep
    raise FixpointDivergenceError(
        "subgoal grounding did not stabilize within %d sweeps; the involved "
        "bindings have a cyclic index dependency" % max_sweeps)


def ground_subgoal(registry: GroundingRegistry, subgoal_literals,
                   state: np.ndarray, goal: np.ndarray) -> np.ndarray:
    """Map a symbolic subgoal to a full continuous target state."""
    grounded, _ = fixpoint_subgoal(registry, subgoal_literals, state, goal)
    return grounded


def abstract_state(registry: GroundingRegistry, state: np.ndarray,
                   goal: np.ndarray) -> frozenset:
    """The set of all registered predicates that currently test true."""
    state, goal = _check_dims(registry, state, goal)
    return frozenset(b.literal for b in registry.bindings()
                     if predicate_truth(b, state, goal))


def abstract_goal(registry: GroundingRegistry, goal: np.ndarray) -> frozenset:
    """The task's goal conjunction, as declared by the environment."""
    return registry.goal_literals(goal)
