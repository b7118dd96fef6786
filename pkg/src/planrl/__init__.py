"""Planner-guided goal-conditioned reinforcement learning.

Symbolic plans over STRIPS domains supply subgoals; per-predicate grounding
functions turn those subgoals into continuous targets; a sparse-reward
actor-critic learner with hindsight relabeling learns to reach them.
"""

__version__ = "0.1.0"

from . import agent, envs, grounding, harness, nets, pddl, rl

__all__ = ["agent", "envs", "grounding", "harness", "nets", "pddl", "rl",
           "__version__"]
