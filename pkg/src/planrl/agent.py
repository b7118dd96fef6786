"""Integration loop: abstract, plan, ground the next subgoal, act, repeat.

Per control step the agent abstracts its (possibly noisy) observation to a
symbolic state, fetches a plan for the task's goal conjunction (the plan
cache absorbs recomputation), takes the predicted successor of the first
plan action as the symbolic subgoal, grounds it to a full-state target and
hands the goal-space slice of that target to the policy.  A plan step
counts as achieved when every literal it newly added tests true; the agent
then replans from the new abstract state.  Replanning also fires whenever
the abstract state drifts unexpectedly (a dropped block, say), so the plan
index never regresses silently.

When the plan is empty (the symbolic goal already holds), the final
low-level goal is passed through unchanged so the policy can finish the
metric part of the task.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .envs import KinematicEnv, NoiseModel
from .grounding import GroundingRegistry, abstract_state, fixpoint_subgoal
from .pddl import Plan, Planner, apply
from .rl import DdpgLearner, Transition, exploration_policy, sparse_reward


class PlanningFailed(Exception):
    pass


@dataclass
class EpisodeResult:
    segments: list  # list of per-subgoal lists of Transitions
    success: bool
    subgoals_achieved: int
    steps: int
    trace: list = field(default_factory=list)

    @property
    def transitions(self) -> list:
        return [t for seg in self.segments for t in seg]


@dataclass
class _LoopState:
    plan: Plan | None = None
    basis: frozenset | None = None  # abstract state the plan was computed for
    delta: frozenset = frozenset()  # literals the current step newly adds
    g_sub: np.ndarray | None = None
    segment_key: object = None
    subgoals_achieved: int = 0
    steps: int = 0


class SubgoalAgent:
    """Couples one environment with a planner and a goal-conditioned policy.

    With ``use_planner=False`` the agent degenerates to a flat learner that
    always pursues the final low-level goal (the ablation baseline).
    """

    def __init__(self, env: KinematicEnv, planner: Planner,
                 learner: DdpgLearner, noise: NoiseModel | None = None, *,
                 use_planner: bool = True, p_random: float = 0.2,
                 action_noise: float = 0.1):
        self.env = env
        self.registry: GroundingRegistry = env.registry()
        self.planner = planner
        self.learner = learner
        self.noise = noise if noise is not None else NoiseModel(0.0)
        self.use_planner = use_planner
        self.p_random = p_random
        self.action_noise = action_noise

    # ------------------------------------------------------------------

    def _grounding_order(self, successor: frozenset, adds: frozenset) -> list:
        """Carried-over literals first, newly added ones last, so the fresh
        subgoal wins any slice shared with a stale position literal."""
        carried = sorted(successor - adds)
        return carried + sorted(a for a in adds if a in successor)

    def next_subgoal(self, loop: _LoopState, symbolic: frozenset,
                     s: np.ndarray, g: np.ndarray):
        """Update the loop's plan and grounded subgoal for observation s."""
        goal_literals = self.registry.goal_literals(g)
        if loop.plan is None or symbolic != loop.basis:
            plan = self.planner.plan(symbolic, goal_literals)
            if plan is None:
                raise PlanningFailed("no plan from %d-literal state"
                                     % len(symbolic))
            loop.plan = plan
            loop.basis = symbolic
            if plan:
                step = plan.steps[0]
                successor = apply(symbolic, step)
                loop.delta = frozenset(successor - symbolic)
                order = self._grounding_order(successor, step.adds)
                grounded, _ = fixpoint_subgoal(self.registry, order, s, g)
                loop.g_sub = grounded[self.registry.goal_idx]
                loop.segment_key = (symbolic, step.key)
            else:
                loop.delta = frozenset()
                loop.g_sub = g.copy()
                loop.segment_key = "final"
        elif loop.plan:
            # same symbolic state: keep the plan step but refresh the
            # grounded target against the current continuous state
            step = loop.plan.steps[0]
            successor = apply(symbolic, step)
            order = self._grounding_order(successor, step.adds)
            grounded, _ = fixpoint_subgoal(self.registry, order, s, g)
            loop.g_sub = grounded[self.registry.goal_idx]
        return loop.g_sub

    # ------------------------------------------------------------------

    def run_episode(self, rng: np.random.Generator, *, mode: str = "train",
                    reset_seed: int | None = None,
                    collect_trace: bool = False) -> EpisodeResult:
        """One rollout of the environment's full step budget.

        Train mode acts through the exploration policy; eval mode uses the
        deterministic actor.  Perceptual noise applies in both.  Success is
        the task's goal conjunction holding in the final clean state.
        """
        if mode not in ("train", "eval"):
            raise ValueError("mode must be 'train' or 'eval'")
        env = self.env
        seed = int(rng.integers(0, 2 ** 31 - 1)) if reset_seed is None \
            else reset_seed
        env.reset(seed)
        g = env.goal
        tolerance = env.goal_tolerance
        loop = _LoopState()
        segments: list = []
        current_segment: list = []
        current_key = None
        trace: list = []
        failed_plan = False

        obs = self.noise.observe(env.state)
        symbolic = (abstract_state(self.registry, obs, g)
                    if self.use_planner else frozenset())
        for _ in range(env.rollout_length):
            if self.use_planner:
                try:
                    g_sub = self.next_subgoal(loop, symbolic, obs, g)
                except PlanningFailed:
                    failed_plan = True
                    break
            else:
                g_sub = g.copy()
                loop.segment_key = "flat"
            if loop.segment_key != current_key:
                if current_segment:
                    segments.append(current_segment)
                current_segment = []
                current_key = loop.segment_key

            if mode == "train":
                u = exploration_policy(self.learner, obs, g_sub, rng,
                                       self.p_random, self.action_noise)
            else:
                u = self.learner.actor_forward(obs, g_sub)
            clean_next = env.step(u)
            obs_next = self.noise.observe(clean_next)
            r = sparse_reward(self.registry.achieved_goal(obs_next), g_sub,
                              tolerance)
            current_segment.append(Transition(obs, u, r, obs_next,
                                              g_sub.copy()))
            if collect_trace:
                trace.append((loop.steps, clean_next.copy(), obs_next.copy(),
                              u.copy(), r))
            loop.steps += 1

            if self.use_planner:
                symbolic = abstract_state(self.registry, obs_next, g)
                if loop.delta and loop.delta <= symbolic:
                    loop.subgoals_achieved += 1
            obs = obs_next

        if current_segment:
            segments.append(current_segment)
        final_abstract = abstract_state(self.registry, env.state, g)
        success = (not failed_plan
                   and self.registry.goal_literals(g) <= final_abstract)
        return EpisodeResult(segments=segments, success=success,
                             subgoals_achieved=loop.subgoals_achieved,
                             steps=loop.steps, trace=trace)


def subgoal_progress(results) -> float:
    """Mean number of achieved subgoals over a batch of episode results."""
    results = list(results)
    if not results:
        raise ValueError("no episodes")
    return float(np.mean([r.subgoals_achieved for r in results]))
