"""Forward state-space planner with plan caching.

A* over ground states with the goal-count heuristic (number of unsatisfied
goal literals).  Unit action costs.  Ties are broken by expansion order,
with successors generated in (name, args) order, so planning is fully
deterministic for a fixed domain, state and goal.
"""
from __future__ import annotations

import heapq
from dataclasses import dataclass, field
from typing import Iterable

from .model import (Domain, GroundOperator, Literal, PddlError, SymbolicState,
                    apply, ground_operators, satisfies)


class PlanningError(PddlError):
    pass


@dataclass(frozen=True)
class Plan:
    """A validated operator sequence with per-step predicted successors."""

    steps: tuple[GroundOperator, ...]
    states: tuple[SymbolicState, ...]  # states[i] holds after steps[i]

    def __len__(self) -> int:
        return len(self.steps)

    def __bool__(self) -> bool:
        return bool(self.steps)

    def validate(self, start: SymbolicState, goal: Iterable[Literal]) -> bool:
        state = start
        for op, predicted in zip(self.steps, self.states):
            if not op.applicable(state):
                return False
            state = apply(state, op)
            if state != predicted:
                return False
        return satisfies(state, goal)

    def action_names(self) -> list:
        return [str(op) for op in self.steps]


def _goal_key(goal: Iterable[Literal]) -> frozenset:
    return frozenset(goal)


class PlanCache:
    """Worker-local map from (state, goal) to a previously computed plan.

    Hits are revalidated against the domain (precondition chain and goal
    satisfaction) before reuse, so a stale entry can never leak an invalid
    plan.
    """

    def __init__(self):
        self._plans: dict = {}
        self.hits = 0
        self.misses = 0

    def get(self, state: SymbolicState, goal: frozenset) -> Plan | None:
        plan = self._plans.get((state, goal))
        if plan is None:
            self.misses += 1
            return None
        if not plan.validate(state, goal):
            del self._plans[(state, goal)]
            self.misses += 1
            return None
        self.hits += 1
        return plan

    def put(self, state: SymbolicState, goal: frozenset, plan: Plan):
        self._plans[(state, goal)] = plan

    def __len__(self) -> int:
        return len(self._plans)


@dataclass
class Planner:
    """A* planner bound to one domain and object set."""

    domain: Domain
    objects: tuple[str, ...] | None = None
    node_budget: int = 100_000
    cache: PlanCache = field(default_factory=PlanCache)

    def __post_init__(self):
        objs = self.objects if self.objects is not None else self.domain.objects
        self.objects = tuple(objs)
        self._ground = ground_operators(self.domain, self.objects)
        self._validate_predicates_known = set(self.domain.predicates)

    def _check_goal(self, goal: frozenset):
        for g in goal:
            if g.pred not in self._validate_predicates_known:
                raise PlanningError("goal literal %s over undeclared predicate"
                                    % g)

    def plan(self, state: SymbolicState, goal: Iterable[Literal]) -> Plan | None:
        """Search for a shortest plan; None when the budget is exhausted.

        Satisfied goals yield the empty plan.  Results are cached per
        (state, goal) pair.
        """
        goal_key = _goal_key(goal)
        self._check_goal(goal_key)
        cached = self.cache.get(state, goal_key)
        if cached is not None:
            return cached
        plan = self._astar(state, goal_key)
        if plan is not None:
            if not plan.validate(state, goal_key):
                raise PlanningError("planner produced an invalid plan")
            self.cache.put(state, goal_key, plan)
        return plan

    def _heuristic(self, state: SymbolicState, goal: frozenset) -> int:
        h = 0
        for g in goal:
            if g.positive:
                h += g not in state
            else:
                h += g.atom() in state
        return h

    def _astar(self, start: SymbolicState, goal: frozenset) -> Plan | None:
        if satisfies(start, goal):
            return Plan((), ())
        counter = 0
        h0 = self._heuristic(start, goal)
        frontier = [(h0, counter, start)]
        best_g = {start: 0}
        parent = {start: None}
        expanded = 0
        while frontier:
            f, _, state = heapq.heappop(frontier)
            g_cost = best_g[state]
            if f > g_cost + self._heuristic(state, goal):
                continue  # stale entry
            expanded += 1
            if expanded > self.node_budget:
                return None
            for op in self._ground:
                if not op.applicable(state):
                    continue
                succ = frozenset((state - op.dels) | op.adds)
                new_g = g_cost + 1
                if succ in best_g and best_g[succ] <= new_g:
                    continue
                best_g[succ] = new_g
                parent[succ] = (state, op)
                if satisfies(succ, goal):
                    return self._extract(succ, parent)
                counter += 1
                heapq.heappush(frontier,
                               (new_g + self._heuristic(succ, goal),
                                counter, succ))
        return None

    def _extract(self, end: SymbolicState, parent: dict) -> Plan:
        steps = []
        states = []
        node = end
        while parent[node] is not None:
            prev, op = parent[node]
            steps.append(op)
            states.append(node)
            node = prev
        steps.reverse()
        states.reverse()
        return Plan(tuple(steps), tuple(states))
