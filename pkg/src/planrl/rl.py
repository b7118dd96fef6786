"""Goal-conditioned actor-critic learner with hindsight relabeling.

The actor maps (state, goal) to a bounded action; the critic scores
(state, action, goal).  Training follows the deterministic policy gradient:
the critic regresses onto clipped one-step Bellman targets computed with
target networks, the actor ascends the critic's value.  Episodes that fail
their goal still provide signal through hindsight relabeling against goals
achieved later in the episode.

Rewards are sparse: 0 when the achieved goal lies strictly within a
tolerance of the commanded goal, -1 otherwise.  With discount
``gamma = 1 - 1/T`` the discounted return is bounded in [-1/(1-gamma), 0],
and Bellman targets are clipped to that interval.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Iterable, NamedTuple

import numpy as np

from .nets import Adam, Mlp


class Transition(NamedTuple):
    s: np.ndarray
    u: np.ndarray
    r: float
    s_next: np.ndarray
    g: np.ndarray


def sparse_reward(achieved: np.ndarray, goal: np.ndarray,
                  tolerance: float) -> float:
    """0 when strictly inside the tolerance ball, else -1."""
    achieved = np.asarray(achieved, dtype=float)
    goal = np.asarray(goal, dtype=float)
    if achieved.shape != goal.shape:
        raise ValueError("achieved goal shape %s != goal shape %s"
                         % (achieved.shape, goal.shape))
    dist = float(np.linalg.norm(achieved - goal))
    return 0.0 if dist < tolerance else -1.0


def her_relabel(episode: list, k_her: int,
                achieved_goal_fn: Callable[[np.ndarray], np.ndarray],
                rng: np.random.Generator, tolerance: float) -> list:
    """Hindsight copies of an episode's transitions.

    For each transition at index t, ``k_her`` future indices t' > t are
    sampled uniformly (with replacement) among the later transitions; the
    copy's goal becomes the goal actually achieved at the start of step t'
    and its reward is recomputed under the sparse rule.  The last transition
    has no future index and yields no copies.
    """
    if k_her < 0:
        raise ValueError("k_her must be >= 0")
    out = []
    if k_her == 0:
        return out
    n = len(episode)
    for t, tr in enumerate(episode):
        if t + 1 >= n:
            break
        future = rng.integers(t + 1, n, size=k_her)
        for t_prime in future:
            g_new = achieved_goal_fn(episode[int(t_prime)].s).copy()
            r_new = sparse_reward(achieved_goal_fn(tr.s_next), g_new, tolerance)
            out.append(Transition(tr.s, tr.u, r_new, tr.s_next, g_new))
    return out


class ReplayBuffer:
    """Ring buffer of episodes; uniform sampling over stored transitions.

    Hindsight copies are stored alongside the originals of their episode and
    evicted together with it.
    """

    def __init__(self, capacity_episodes: int = 10_000):
        if capacity_episodes < 1:
            raise ValueError("capacity must be positive")
        self.capacity = capacity_episodes
        self._episodes: list = []
        self._start = 0  # ring index of the oldest episode
        self._counts: list = []
        self._total = 0

    def __len__(self) -> int:
        return len(self._episodes)

    @property
    def n_transitions(self) -> int:
        return self._total

    def push(self, transitions: Iterable[Transition],
             relabeled: Iterable[Transition] = ()):
        entry = list(transitions) + list(relabeled)
        if not entry:
            return
        if len(self._episodes) < self.capacity:
            self._episodes.append(entry)
            self._counts.append(len(entry))
        else:
            self._total -= self._counts[self._start]
            self._episodes[self._start] = entry
            self._counts[self._start] = len(entry)
            self._start = (self._start + 1) % self.capacity
        self._total += len(entry)

    def sample(self, batch_size: int, rng: np.random.Generator):
        """Stacked arrays (S, U, R, S2, G) drawn uniformly with replacement."""
        if self._total == 0:
            raise ValueError("cannot sample from an empty buffer")
        bounds = np.cumsum(self._counts)
        flat = rng.integers(0, self._total, size=batch_size)
        picks = []
        for f in flat:
            ep = int(np.searchsorted(bounds, f, side="right"))
            offset = int(f - (bounds[ep - 1] if ep else 0))
            picks.append(self._episodes[ep][offset])
        s = np.stack([p.s for p in picks])
        u = np.stack([p.u for p in picks])
        r = np.asarray([p.r for p in picks], dtype=float)
        s2 = np.stack([p.s_next for p in picks])
        g = np.stack([p.g for p in picks])
        return s, u, r, s2, g


@dataclass
class LearnerConfig:
    state_dim: int
    goal_dim: int
    action_dim: int
    units_per_obs: int = 12
    hidden_layers: int = 3
    hidden_widths: tuple | None = None  # overrides units_per_obs when set
    learning_rate: float = 0.01
    gamma: float = 0.98
    polyak: float = 0.95
    adam_beta1: float = 0.9
    adam_beta2: float = 0.999

    def widths(self) -> tuple:
        if self.hidden_widths is not None:
            return tuple(self.hidden_widths)
        return (self.units_per_obs * self.state_dim,) * self.hidden_layers


class DdpgLearner:
    """Actor, critic, their target copies, and the update rules.

    The actor input is the concatenation (state, goal); the critic input is
    (state, action, goal).  The concatenation order is part of the contract.
    """

    def __init__(self, config: LearnerConfig, seed: int = 0):
        self.config = config
        rng = np.random.default_rng(seed)
        m, k, n = config.state_dim, config.goal_dim, config.action_dim
        widths = config.widths()
        self.actor = Mlp((m + k, *widths, n), out_act="tanh", rng=rng)
        self.critic = Mlp((m + n + k, *widths, 1), out_act="linear", rng=rng)
        self.target_actor = Mlp((m + k, *widths, n), out_act="tanh", rng=rng)
        self.target_critic = Mlp((m + n + k, *widths, 1), out_act="linear",
                                 rng=rng)
        self.target_actor.set_from(self.actor.params())
        self.target_critic.set_from(self.critic.params())
        self.opt_actor = Adam(self.actor.params(), config.adam_beta1,
                              config.adam_beta2)
        self.opt_critic = Adam(self.critic.params(), config.adam_beta1,
                               config.adam_beta2)

    # ------------------------------------------------------------------
    # forward passes

    @staticmethod
    def _join(*parts):
        parts = [np.atleast_2d(np.asarray(p, dtype=float)) for p in parts]
        return np.concatenate(parts, axis=1)

    def actor_forward(self, s, g) -> np.ndarray:
        single = np.asarray(s).ndim == 1
        out = self.actor.forward(self._join(s, g))
        return out[0] if single else out

    def critic_forward(self, s, u, g) -> np.ndarray:
        single = np.asarray(s).ndim == 1
        out = self.critic.forward(self._join(s, u, g))
        return float(out[0, 0]) if single else out[:, 0]

    def target_return_bounds(self) -> tuple[float, float]:
        return (-1.0 / (1.0 - self.config.gamma), 0.0)

    def bellman_targets(self, r: np.ndarray, s_next: np.ndarray,
                        g: np.ndarray) -> np.ndarray:
        """Clipped one-step targets computed with the target networks."""
        r = np.atleast_1d(np.asarray(r, dtype=float))
        s_next = np.atleast_2d(np.asarray(s_next, dtype=float))
        g = np.atleast_2d(np.asarray(g, dtype=float))
        u_next = self.target_actor.forward(self._join(s_next, g))
        q_next = self.target_critic.forward(self._join(s_next, u_next, g))[:, 0]
        y = r + self.config.gamma * q_next
        lo, hi = self.target_return_bounds()
        return np.clip(y, lo, hi)

    def bellman_target(self, transition: Transition) -> float:
        return float(self.bellman_targets(
            np.asarray([transition.r]), transition.s_next[None, :],
            transition.g[None, :])[0])

    # ------------------------------------------------------------------
    # updates

    def critic_loss_and_grads(self, s, u, g, y):
        x = self._join(s, u, g)
        q, cache = self.critic.forward_cached(x)
        q = q[:, 0]
        diff = q - y
        loss = float(np.mean(diff ** 2))
        dq = (2.0 * diff / len(diff))[:, None]
        grads, _ = self.critic.backward(cache, dq)
        return loss, grads

    def actor_objective_and_grads(self, s, g):
        """Loss -mean(Q(s, pi(s, g), g)) and its actor gradients."""
        m, n = self.config.state_dim, self.config.action_dim
        xa = self._join(s, g)
        u, actor_cache = self.actor.forward_cached(xa)
        xc = self._join(s, u, g)
        q, critic_cache = self.critic.forward_cached(xc)
        loss = float(-np.mean(q[:, 0]))
        dq = np.full((len(q), 1), -1.0 / len(q))
        _, dxc = self.critic.backward(critic_cache, dq)
        du = dxc[:, m:m + n]
        grads, _ = self.actor.backward(actor_cache, du)
        return loss, grads

    def train_batch(self, buffer: ReplayBuffer, batch_size: int,
                    rng: np.random.Generator) -> dict:
        """One critic step, one actor step, one Polyak target update."""
        s, u, r, s2, g = buffer.sample(batch_size, rng)
        y = self.bellman_targets(r, s2, g)
        critic_loss, cgrads = self.critic_loss_and_grads(s, u, g, y)
        self.opt_critic.step(self.critic.params(), cgrads,
                             self.config.learning_rate)
        actor_loss, agrads = self.actor_objective_and_grads(s, g)
        self.opt_actor.step(self.actor.params(), agrads,
                            self.config.learning_rate)
        self._polyak_update()
        return {"critic_loss": critic_loss, "actor_loss": actor_loss}

    def _polyak_update(self):
        tau = self.config.polyak
        for tgt, main in ((self.target_actor, self.actor),
                          (self.target_critic, self.critic)):
            for tp, mp in zip(tgt.params(), main.params()):
                tp *= tau
                tp += (1.0 - tau) * mp

    # ------------------------------------------------------------------
    # parameter bundles

    _NETS = ("actor", "critic", "target_actor", "target_critic")

    def get_params(self) -> dict:
        out = {}
        for name in self._NETS:
            for i, p in enumerate(getattr(self, name).params()):
                out["%s.%d" % (name, i)] = p.copy()
        for name, opt in (("opt_actor", self.opt_actor),
                          ("opt_critic", self.opt_critic)):
            for i, (m, v) in enumerate(zip(opt.m, opt.v)):
                out["%s.m.%d" % (name, i)] = m.copy()
                out["%s.v.%d" % (name, i)] = v.copy()
            out["%s.t" % name] = np.asarray(opt.t)
        return out

    def set_params(self, params: dict):
        for name in self._NETS:
            net = getattr(self, name)
            net.set_from([params["%s.%d" % (name, i)]
                          for i in range(len(net.params()))])
        for name, opt in (("opt_actor", self.opt_actor),
                          ("opt_critic", self.opt_critic)):
            for i in range(len(opt.m)):
                opt.m[i][...] = params["%s.m.%d" % (name, i)]
                opt.v[i][...] = params["%s.v.%d" % (name, i)]
            opt.t = float(params["%s.t" % name])


def exploration_policy(learner: DdpgLearner, s, g, rng: np.random.Generator,
                       p_random: float = 0.2,
                       noise_scale: float = 0.1) -> np.ndarray:
    """Behavioral policy: uniform with probability ``p_random``, otherwise
    the actor's output plus Gaussian noise, clipped to [-1, 1]."""
    n = learner.config.action_dim
    if p_random > 0.0 and rng.random() < p_random:
        return rng.uniform(-1.0, 1.0, size=n)
    u = learner.actor_forward(s, g)
    if noise_scale > 0.0:
        u = u + rng.normal(0.0, noise_scale, size=n)
    return np.clip(u, -1.0, 1.0)


def average_params(bundles: list) -> dict:
    """Elementwise arithmetic mean of parameter bundles (optimizer state
    included, so the merged optimizer stays consistent)."""
    if not bundles:
        raise ValueError("no parameter bundles to average")
    keys = set(bundles[0])
    for b in bundles[1:]:
        if set(b) != keys:
            raise ValueError("parameter bundles disagree on keys")
    out = {}
    for key in bundles[0]:
        first = bundles[0][key]
        for b in bundles[1:]:
            if b[key].shape != first.shape:
                raise ValueError("shape mismatch for %s" % key)
        out[key] = np.mean([b[key] for b in bundles], axis=0)
    return out


CHECKPOINT_VERSION = 1


def save_checkpoint(params: dict, path):
    arrays = {k.replace(".", "__"): v for k, v in params.items()}
    arrays["checkpoint_version"] = np.asarray(CHECKPOINT_VERSION)
    np.savez(path, **arrays)


def load_checkpoint(path) -> dict:
    with np.load(path) as data:
        version = int(data["checkpoint_version"])
        if version != CHECKPOINT_VERSION:
            raise ValueError("unsupported checkpoint version %d" % version)
        return {k.replace("__", "."): data[k] for k in data.files
                if k != "checkpoint_version"}
