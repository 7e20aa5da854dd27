"""Learned QAOA optimisers with an SGD hand-off.

* PPO actor-critic: the state is a window of the last ``L`` cost differences
  and parameter differences, the action a bounded parameter update, and the
  reward the change of the cut expectation between consecutive iterations.
* LSTM meta-optimiser: ``(s_{t+1}, theta_{t+1}) = RNN(s_t, theta_t, C_t)``,
  trained by unrolling through the exact circuit expectation.

Both optimisers stop at a plateau (no improvement above ``tol`` for
``plateau`` steps). Their result is the incumbent, the best parameters
visited, and SGD continues from exactly those parameters.
"""

from __future__ import annotations

import math
import time
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np

from . import grad as ag
from .errors import ConfigError, NumericalError
from .graphs import Graph
from .initialisation import xavier_init
from .optim import OptState, QaoaProblem, TraceRow, gradient_descent_step
from .qsim import QaoaCircuit, QaoaParams

__all__ = [
    "RlState",
    "PolicyNets",
    "MetaOptimiser",
    "NeuralTrace",
    "RlResult",
    "MetaResult",
    "QaoaEnv",
    "rl_train",
    "rl_optimise",
    "meta_train",
    "meta_optimise",
    "save_policy",
    "load_policy",
    "save_meta",
    "load_meta",
    "HANDOFF_LR",
]

HISTORY_L = 4
HIDDEN = 64
MAX_STEP = 0.1
PLATEAU_STEPS = 10
PLATEAU_TOL = 1e-4
# SGD rate after the neural phase; the neural proposals end near a basin floor
HANDOFF_LR = 0.02
LOG_2PI = math.log(2 * math.pi)


# -- environment ---------------------------------------------------------------


@dataclass
class RlState:
    """Sliding window of ``(dC, dtheta)`` pairs, newest first, zero padded."""

    p: int
    L: int = HISTORY_L
    window: np.ndarray = field(init=False)

    def __post_init__(self):
        if self.L < 1:
            raise ConfigError(f"history window L must be >= 1, got {self.L}")
        self.window = np.zeros((self.L, 2 * self.p + 1))

    @property
    def dim(self) -> int:
        return self.L * (2 * self.p + 1)

    def push(self, d_cost: float, d_theta: np.ndarray) -> None:
        self.window = np.roll(self.window, 1, axis=0)
        self.window[0, 0] = d_cost
        self.window[0, 1:] = d_theta

    def vector(self) -> np.ndarray:
        return self.window.reshape(-1).copy()


class QaoaEnv:
    """Episodic QAOA environment over a corpus of graphs.

    ``cost`` here is the cut expectation (to be increased); the reward of a
    step is its change. Observations are the history window rescaled so both
    parts are of order one: ``dC / (max_step * W)`` and ``dtheta / max_step``.
    """

    def __init__(self, graphs: Sequence[Graph], p: int, L: int = HISTORY_L, max_step: float = MAX_STEP, init=None):
        if not graphs:
            raise ValueError("environment needs at least one graph")
        self.graphs = list(graphs)
        self.p = p
        self.L = L
        self.max_step = max_step
        self.circuits = [QaoaCircuit(g, init) for g in self.graphs]
        self.circuit = self.circuits[0]
        self.weights = [max(abs(g.total_weight), 1e-12) for g in self.graphs]
        self.weight = self.weights[0]
        self.state = RlState(p, L)
        self.theta = np.zeros(2 * p)
        self.cost = 0.0

    @property
    def obs_dim(self) -> int:
        return self.L * (2 * self.p + 1)

    def reset(self, rng: np.random.Generator, theta0=None, graph_index: int | None = None) -> np.ndarray:
        k = int(rng.integers(len(self.graphs))) if graph_index is None else graph_index
        self.circuit = self.circuits[k]
        self.weight = self.weights[k]
        if theta0 is None:
            theta0 = xavier_init(self.p, int(rng.integers(2**31))).to_vector()
        self.theta = np.asarray(theta0, dtype=float).copy()
        self.cost = self.circuit.expectation(self.theta)
        self.state = RlState(self.p, self.L)
        return self.observe()

    def observe(self) -> np.ndarray:
        w = self.state.window.copy()
        w[:, 0] /= self.max_step * self.weight
        w[:, 1:] /= self.max_step
        return w.reshape(-1)

    def squash(self, u: np.ndarray) -> np.ndarray:
        return self.max_step * np.tanh(u)

    def step(self, u: np.ndarray) -> tuple[np.ndarray, float]:
        d_theta = self.squash(np.asarray(u, dtype=float))
        self.theta = self.theta + d_theta
        new = self.circuit.expectation(self.theta)
        reward = new - self.cost
        self.cost = new
        self.state.push(reward, d_theta)
        return self.observe(), reward


# -- networks --------------------------------------------------------------------


def _dense(rng, fan_in, fan_out, gain=1.0):
    bound = gain * math.sqrt(6.0 / (fan_in + fan_out))
    return rng.uniform(-bound, bound, size=(fan_in, fan_out))


def _mlp(x, params, prefix):
    h = ag.tanh(x @ params[f"{prefix}_w0"] + params[f"{prefix}_b0"])
    h = ag.tanh(h @ params[f"{prefix}_w1"] + params[f"{prefix}_b1"])
    return h @ params[f"{prefix}_w2"] + params[f"{prefix}_b2"]


@dataclass
class PolicyNets:
    """Actor and critic MLPs (two tanh hidden layers) plus a learned log-std."""

    p: int
    L: int = HISTORY_L
    hidden: int = HIDDEN
    max_step: float = MAX_STEP
    params: dict[str, ag.Tensor] = field(default_factory=dict)

    @property
    def obs_dim(self) -> int:
        return self.L * (2 * self.p + 1)

    @property
    def act_dim(self) -> int:
        return 2 * self.p

    def shapes(self) -> dict[str, tuple[int, ...]]:
        h, o, a = self.hidden, self.obs_dim, self.act_dim
        out = {}
        for net, width in (("actor", a), ("critic", 1)):
            out.update({
                f"{net}_w0": (o, h), f"{net}_b0": (h,),
                f"{net}_w1": (h, h), f"{net}_b1": (h,),
                f"{net}_w2": (h, width), f"{net}_b2": (width,),
            })
        out["log_std"] = (a,)
        return out

    @classmethod
    def create(cls, p: int, L: int = HISTORY_L, hidden: int = HIDDEN, seed: int = 0,
               max_step: float = MAX_STEP, log_std: float = -0.5) -> "PolicyNets":
        nets = cls(p=p, L=L, hidden=hidden, max_step=max_step)
        rng = np.random.default_rng(seed)
        for name, shape in nets.shapes().items():
            if name == "log_std":
                data = np.full(shape, log_std)
            elif name.endswith(("_b0", "_b1", "_b2")):
                data = np.zeros(shape)
            else:
                # small output layers keep the initial policy near zero
                gain = 0.01 if name == "actor_w2" else 1.0
                data = _dense(rng, *shape, gain=gain)
            nets.params[name] = ag.parameter(data, name=name)
        return nets

    def parameters(self) -> list[ag.Tensor]:
        return [self.params[k] for k in self.shapes()]

    def mean(self, obs) -> ag.Tensor:
        return _mlp(ag.Tensor(np.atleast_2d(obs)), self.params, "actor")

    def value(self, obs) -> ag.Tensor:
        return _mlp(ag.Tensor(np.atleast_2d(obs)), self.params, "critic")[:, 0]

    def log_prob(self, obs, u) -> ag.Tensor:
        mu = self.mean(obs)
        ls = self.params["log_std"]
        z = (ag.Tensor(np.atleast_2d(u)) - mu) * ag.exp(ag.neg(ls))
        per = ag.scale(ag.square(z), -0.5) - ls - 0.5 * LOG_2PI
        return ag.sum_(per, axis=1)

    def act(self, obs, rng: np.random.Generator | None = None) -> np.ndarray:
        """Pre-squash action; the mean when ``rng`` is ``None`` (greedy)."""
        with ag.no_grad():
            mu = self.mean(obs).data[0]
        if rng is None:
            return mu
        std = np.exp(self.params["log_std"].data)
        return mu + std * rng.standard_normal(mu.shape)

    def metadata(self) -> dict:
        return {"kind": "ppo", "p": self.p, "L": self.L, "hidden": self.hidden, "max_step": self.max_step}


@dataclass
class MetaOptimiser:
    """LSTM cell over ``[theta_t, C_t]`` with a ``pi * tanh`` parameter head."""

    p: int
    hidden: int = HIDDEN
    params: dict[str, ag.Tensor] = field(default_factory=dict)

    @property
    def in_dim(self) -> int:
        return 2 * self.p + 1

    def shapes(self) -> dict[str, tuple[int, ...]]:
        h = self.hidden
        return {"w_x": (self.in_dim, 4 * h), "w_h": (h, 4 * h), "b": (4 * h,),
                "w_out": (h, 2 * self.p), "b_out": (2 * self.p,)}

    @classmethod
    def create(cls, p: int, hidden: int = HIDDEN, seed: int = 0) -> "MetaOptimiser":
        meta = cls(p=p, hidden=hidden)
        rng = np.random.default_rng(seed)
        for name, shape in meta.shapes().items():
            if name == "b":
                data = np.zeros(shape)
                data[hidden : 2 * hidden] = 1.0  # forget-gate bias
            elif name == "b_out":
                data = np.zeros(shape)
            else:
                data = _dense(rng, *shape)
            meta.params[name] = ag.parameter(data, name=name)
        return meta

    def parameters(self) -> list[ag.Tensor]:
        return [self.params[k] for k in self.shapes()]

    def initial_state(self) -> tuple[ag.Tensor, ag.Tensor]:
        z = np.zeros((1, self.hidden))
        return ag.Tensor(z), ag.Tensor(z.copy())

    def cell(self, theta: ag.Tensor, cost: ag.Tensor, state):
        """One step: returns ``(theta_next, (h, c))``."""
        h, c = state
        x = ag.concat([ag.reshape(theta, (1, -1)), ag.reshape(cost, (1, 1))], axis=1)
        z = x @ self.params["w_x"] + h @ self.params["w_h"] + self.params["b"]
        H = self.hidden
        i = ag.sigmoid(z[:, 0:H])
        f = ag.sigmoid(z[:, H : 2 * H])
        o = ag.sigmoid(z[:, 2 * H : 3 * H])
        gg = ag.tanh(z[:, 3 * H : 4 * H])
        c = f * c + i * gg
        h = o * ag.tanh(c)
        out = ag.scale(ag.tanh(h @ self.params["w_out"] + self.params["b_out"]), math.pi)
        return ag.reshape(out, (-1,)), (h, c)

    def metadata(self) -> dict:
        return {"kind": "meta", "p": self.p, "hidden": self.hidden}


def _expectation_op(circuit: QaoaCircuit, scale: float, theta: ag.Tensor) -> ag.Tensor:
    """``scale * <cut>`` as a differentiable node (adjoint gradient)."""
    val = scale * circuit.expectation(theta.data)

    def vjp(g):
        return [g * scale * circuit.gradient(theta.data)]

    return ag.custom([theta], np.array(val), vjp, op="qaoa_expectation")


# -- traces and hand-off ----------------------------------------------------------------


@dataclass
class NeuralTrace:
    """Combined trace: row 0 initial, then neural steps, then SGD epochs."""

    rows: list[TraceRow]
    handoff_epoch: int
    neural_params: np.ndarray
    params: QaoaParams
    rewards: list[float] = field(default_factory=list)
    proposals: list[np.ndarray] = field(default_factory=list)

    @property
    def final_ratio(self) -> float:
        return self.rows[-1].ratio

    def epochs_to(self, target: float) -> int | None:
        for r in self.rows:
            if r.ratio >= target:
                return r.epoch
        return None


class _Plateau:
    """Tracks the incumbent and reports a plateau."""

    def __init__(self, steps: int, tol: float, start: float, theta: np.ndarray):
        self.steps, self.tol = steps, tol
        self.best = start
        self.best_theta = np.array(theta, dtype=float)
        self.mark = start
        self.since = 0

    def update(self, value: float, theta: np.ndarray) -> bool:
        if value > self.best:
            self.best = value
            self.best_theta = np.array(theta, dtype=float)
        if value > self.mark + self.tol:
            self.mark = value
            self.since = 0
        else:
            self.since += 1
        return self.since >= self.steps


def _handoff(problem: QaoaProblem, rows: list[TraceRow], theta, sgd_epochs: int, lr, t0: float):
    state = OptState.start(problem, theta)
    state.t0 = t0
    start = len(rows) - 1
    for _ in range(sgd_epochs):
        gradient_descent_step(state, "sgd", HANDOFF_LR if lr is None else lr)
        r = state.trace[-1]
        rows.append(TraceRow(start + r.epoch, r.cut_expectation, r.ratio, r.wall_ms))
    return state.params


def _row(problem: QaoaProblem, epoch: int, e: float, t0: float) -> TraceRow:
    if not np.isfinite(e):
        raise NumericalError(f"cut expectation became {e} at step {epoch}")
    return TraceRow(epoch, e, problem.ratio(e), (time.perf_counter() - t0) * 1e3)


# -- PPO ----------------------------------------------------------------------------------


@dataclass
class RlResult:
    policy: PolicyNets
    reward_trace: list[float]
    seconds: float


def _gae(rewards, values, last_value, gamma, lam):
    adv = np.zeros(len(rewards))
    nxt, run = last_value, 0.0
    for t in range(len(rewards) - 1, -1, -1):
        delta = rewards[t] + gamma * nxt - values[t]
        run = delta + gamma * lam * run
        adv[t] = run
        nxt = values[t]
    return adv, adv + np.asarray(values)


def ppo_loss(policy: PolicyNets, obs, acts, old_logp, adv, returns, clip: float = 0.2,
             value_coef: float = 0.5, entropy_coef: float = 0.0):
    """Clipped surrogate + value loss; returns ``(loss, surrogate, unclipped)``."""
    logp = policy.log_prob(obs, acts)
    ratio = ag.exp(logp - ag.Tensor(old_logp))
    a = ag.Tensor(adv)
    unclipped = ratio * a
    clipped = ag.clip(ratio, 1.0 - clip, 1.0 + clip) * a
    surrogate = ag.minimum(unclipped, clipped)
    v = policy.value(obs)
    v_loss = ag.mean(ag.square(v - ag.Tensor(returns)))
    entropy = ag.sum_(policy.params["log_std"])
    loss = ag.neg(ag.mean(surrogate)) + ag.scale(v_loss, value_coef) - ag.scale(entropy, entropy_coef)
    return loss, surrogate.data, unclipped.data


def rl_train(
    graphs: Sequence[Graph],
    p: int,
    episodes: int = 3000,
    horizon: int = 32,
    seed: int = 0,
    init=None,
    L: int = HISTORY_L,
    hidden: int = HIDDEN,
    lr: float = 1e-3,
    batch_episodes: int = 16,
    update_epochs: int = 4,
    minibatch: int = 64,
    clip: float = 0.2,
    gamma: float = 0.99,
    lam: float = 0.95,
    max_step: float = MAX_STEP,
    policy: PolicyNets | None = None,
) -> RlResult:
    """Train a PPO policy on episodes drawn from ``graphs``.

    Every batch of ``batch_episodes`` rollouts is followed by
    ``update_epochs`` passes of clipped-surrogate updates over shuffled
    minibatches of ``minibatch`` transitions. The reward trace
    holds the mean undiscounted episode return of each batch.
    """
    if horizon < 1 or episodes < 1:
        raise ValueError("episodes and horizon must be >= 1")
    rng = np.random.default_rng(seed)
    policy = policy or PolicyNets.create(p, L, hidden, seed=seed, max_step=max_step)
    env = QaoaEnv(graphs, p, L, max_step, init)
    opt = ag.Adam(policy.parameters(), lr=lr)
    trace: list[float] = []
    t0 = time.perf_counter()
    done = 0
    while done < episodes:
        obs_b, act_b, logp_b, adv_b, ret_b, totals = [], [], [], [], [], []
        for _ in range(min(batch_episodes, episodes - done)):
            obs = env.reset(rng)
            ep_obs, ep_act, ep_rew = [], [], []
            for _ in range(horizon):
                u = policy.act(obs, rng)
                ep_obs.append(obs)
                ep_act.append(u)
                obs, r = env.step(u)
                ep_rew.append(r)
            # learn from per-edge rewards so value targets stay O(1) across graph sizes
            scaled = [r / env.weight for r in ep_rew]
            with ag.no_grad():
                vals = policy.value(np.array(ep_obs)).data
                last = policy.value(obs).data[0]
                logp = policy.log_prob(np.array(ep_obs), np.array(ep_act)).data
            adv, ret = _gae(scaled, vals, last, gamma, lam)
            obs_b += ep_obs
            act_b += ep_act
            logp_b.append(logp)
            adv_b.append(adv)
            ret_b.append(ret)
            totals.append(float(np.sum(ep_rew)))
            done += 1
        obs_a, act_a = np.array(obs_b), np.array(act_b)
        logp_a, ret_a = np.concatenate(logp_b), np.concatenate(ret_b)
        adv_a = np.concatenate(adv_b)
        adv_a = (adv_a - adv_a.mean()) / (adv_a.std() + 1e-8)
        for _ in range(update_epochs):
            order = rng.permutation(len(obs_a))
            for start in range(0, len(order), minibatch):
                mb = order[start : start + minibatch]
                opt.zero_grad()
                loss, _, _ = ppo_loss(policy, obs_a[mb], act_a[mb], logp_a[mb], adv_a[mb], ret_a[mb], clip)
                if not np.isfinite(loss.item()):
                    raise NumericalError(
                        f"PPO loss became {loss.item()} after {done} episodes "
                        f"(mean return {np.mean(totals):.4g}, log_std {policy.params['log_std'].data})"
                    )
                ag.backward(loss)
                ag.clip_grad_norm(policy.parameters(), 1.0)
                opt.step()
        trace.append(float(np.mean(totals)))
    return RlResult(policy, trace, time.perf_counter() - t0)


def rl_optimise(
    policy: PolicyNets,
    g: Graph,
    init=None,
    params=None,
    max_steps: int = 50,
    sgd_epochs: int = 100,
    lr: float | None = None,
    seed: int = 0,
    plateau: int = PLATEAU_STEPS,
    tol: float = PLATEAU_TOL,
    max_cut: float | None = None,
) -> NeuralTrace:
    """Greedy (mean-action) rollout until a plateau, then SGD from the incumbent.

    ``params`` defaults to ``xavier_init(p, seed)``. The rollout is
    deterministic; ``seed`` only picks the initial angles. The SGD stage
    uses ``lr`` or, if unset, ``HANDOFF_LR``.
    """
    p = policy.p
    theta = (xavier_init(p, seed) if params is None else QaoaParams.from_vector(
        params.to_vector() if isinstance(params, QaoaParams) else params)).to_vector()
    problem = QaoaProblem(g, init, max_cut)
    env = QaoaEnv([g], p, policy.L, policy.max_step, init)
    env.circuits[0] = problem.circuit
    t0 = time.perf_counter()
    obs = env.reset(np.random.default_rng(seed), theta0=theta, graph_index=0)
    rows = [_row(problem, 0, env.cost, t0)]
    watch = _Plateau(plateau, tol, env.cost, theta)
    rewards = []
    for k in range(max_steps):
        obs, r = env.step(policy.act(obs))
        rewards.append(r)
        rows.append(_row(problem, k + 1, env.cost, t0))
        if watch.update(env.cost, env.theta):
            break
    handoff = len(rows) - 1
    neural = watch.best_theta.copy()
    final = _handoff(problem, rows, neural, sgd_epochs, lr, t0)
    return NeuralTrace(rows, handoff, neural, final, rewards)


# -- meta-learning ------------------------------------------------------------------------------


@dataclass
class MetaResult:
    meta: MetaOptimiser
    loss_trace: list[float]
    clipped_steps: int
    seconds: float


def meta_loss(costs: Sequence[ag.Tensor], thetas: Sequence[ag.Tensor], explore: float = 0.05) -> ag.Tensor:
    """Observed-improvement loss over an unrolled trajectory of costs to minimise.

    ``sum_t min(C_t - min_{j<t} C_j, 0)`` rewards every step that beats the
    best cost seen so far; ``explore`` weights a bonus on the mean step
    length of the proposals. The running best is a constant baseline, so
    each improving step gets its own gradient instead of the sum collapsing
    to the final best.
    """
    best = costs[0].data.item()
    terms = []
    for c in costs[1:]:
        terms.append(ag.minimum(c - best, 0.0))
        best = min(best, c.data.item())
    loss = ag.sum_(ag.stack(terms))
    if explore and len(thetas) > 1:
        steps = [ag.sum_(ag.square(b - a)) for a, b in zip(thetas[:-1], thetas[1:])]
        loss = loss - ag.scale(ag.mean(ag.stack(steps)), explore)
    return loss


def meta_rollout(meta: MetaOptimiser, circuit: QaoaCircuit, theta0, steps: int, scale: float):
    """Unroll ``steps`` proposals. Returns ``(costs, thetas)`` as tensors; index 0 is the start."""
    theta = ag.Tensor(np.asarray(theta0, dtype=float))
    state = meta.initial_state()
    cost = _expectation_op(circuit, -scale, theta)
    costs, thetas = [cost], [theta]
    for _ in range(steps):
        theta, state = meta.cell(theta, cost, state)
        cost = _expectation_op(circuit, -scale, theta)
        costs.append(cost)
        thetas.append(theta)
    return costs, thetas


def meta_train(
    graphs: Sequence[Graph],
    p: int,
    unroll_T: int = 10,
    meta_epochs: int = 200,
    seed: int = 0,
    init=None,
    hidden: int = HIDDEN,
    lr: float = 3e-3,
    explore: float = 0.05,
    max_norm: float = 1.0,
    meta: MetaOptimiser | None = None,
) -> MetaResult:
    """Train the LSTM by backpropagating through ``unroll_T`` proposals.

    Costs fed to the network are per-edge (``-<cut> / W``) so one network
    sees comparable inputs across graph sizes. Meta-gradients above
    ``max_norm`` are rescaled and counted.
    """
    if unroll_T < 2:
        raise ValueError(f"unroll_T must be >= 2, got {unroll_T}")
    rng = np.random.default_rng(seed)
    meta = meta or MetaOptimiser.create(p, hidden, seed)
    circuits = [QaoaCircuit(g, init) for g in graphs]
    scales = [1.0 / max(g.total_weight, 1e-12) for g in graphs]
    opt = ag.Adam(meta.parameters(), lr=lr)
    trace: list[float] = []
    clipped = 0
    t0 = time.perf_counter()
    for _ in range(meta_epochs):
        k = int(rng.integers(len(circuits)))
        theta0 = xavier_init(p, int(rng.integers(2**31))).to_vector()
        opt.zero_grad()
        costs, thetas = meta_rollout(meta, circuits[k], theta0, unroll_T, scales[k])
        loss = meta_loss(costs, thetas, explore)
        if not np.isfinite(loss.item()):
            raise NumericalError(f"meta-loss became {loss.item()}")
        ag.backward(loss)
        _, was_clipped = ag.clip_grad_norm(meta.parameters(), max_norm)
        clipped += int(was_clipped)
        opt.step()
        trace.append(loss.item())
    return MetaResult(meta, trace, clipped, time.perf_counter() - t0)


def meta_optimise(
    meta: MetaOptimiser,
    g: Graph,
    init=None,
    steps: int = 10,
    sgd_epochs: int = 100,
    params=None,
    lr: float | None = None,
    seed: int = 0,
    plateau: int = PLATEAU_STEPS,
    tol: float = PLATEAU_TOL,
    max_cut: float | None = None,
) -> NeuralTrace:
    """Roll out the meta-optimiser for up to ``steps`` proposals, then SGD.

    The rollout stops early at a plateau. The proposal sequence depends only
    on ``meta``, ``g`` and the initial angles (``xavier_init(p, seed)`` by default).
    SGD uses ``lr``, defaulting to ``HANDOFF_LR``.
    """
    p = meta.p
    theta0 = (xavier_init(p, seed) if params is None else QaoaParams.from_vector(
        params.to_vector() if isinstance(params, QaoaParams) else params)).to_vector()
    problem = QaoaProblem(g, init, max_cut)
    circ = problem.circuit
    scale = 1.0 / max(g.total_weight, 1e-12)
    t0 = time.perf_counter()
    rows = [_row(problem, 0, circ.expectation(theta0), t0)]
    watch = _Plateau(plateau, tol, rows[0].cut_expectation, theta0)
    proposals = []
    with ag.no_grad():
        th = ag.Tensor(theta0)
        state = meta.initial_state()
        cost = ag.Tensor(np.array(-scale * rows[0].cut_expectation))
        for k in range(steps):
            th, state = meta.cell(th, cost, state)
            theta = th.data.copy()
            e = circ.expectation(theta)
            cost = ag.Tensor(np.array(-scale * e))
            proposals.append(theta)
            rows.append(_row(problem, k + 1, e, t0))
            if watch.update(e, theta):
                break
    handoff = len(rows) - 1
    neural = watch.best_theta.copy()
    final = _handoff(problem, rows, neural, sgd_epochs, lr, t0)
    return NeuralTrace(rows, handoff, neural, final, proposals=proposals)


# -- checkpoints ------------------------------------------------------------------------------


def save_policy(policy: PolicyNets, path: str | Path) -> None:
    ag.save_tensors(path, policy.params, meta=policy.metadata())


def load_policy(path: str | Path) -> PolicyNets:
    arrays, meta = ag.load_tensors(path)
    if meta.get("kind") != "ppo":
        raise ConfigError(f"{path}: not a PPO checkpoint")
    nets = PolicyNets(p=meta["p"], L=meta["L"], hidden=meta["hidden"], max_step=meta["max_step"])
    _fill(nets, arrays, path)
    return nets


def save_meta(meta: MetaOptimiser, path: str | Path) -> None:
    ag.save_tensors(path, meta.params, meta=meta.metadata())


def load_meta(path: str | Path) -> MetaOptimiser:
    arrays, meta = ag.load_tensors(path)
    if meta.get("kind") != "meta":
        raise ConfigError(f"{path}: not a meta-optimiser checkpoint")
    m = MetaOptimiser(p=meta["p"], hidden=meta["hidden"])
    _fill(m, arrays, path)
    return m


def _fill(obj, arrays, path):
    shapes = obj.shapes()
    if set(arrays) != set(shapes):
        raise ConfigError(f"{path}: parameter names do not match architecture")
    for k, shape in shapes.items():
        if tuple(arrays[k].shape) != shape:
            raise ConfigError(f"{path}: {k} has shape {arrays[k].shape}, expected {shape}")
        obj.params[k] = ag.parameter(arrays[k], name=k)
