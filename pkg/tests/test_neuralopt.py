import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

import gnnqaoa.grad as ag
from gnnqaoa.errors import ConfigError
from gnnqaoa.graphs import Graph, random_regular
from gnnqaoa.neuralopt import (
    HANDOFF_LR,
    MetaOptimiser,
    PolicyNets,
    QaoaEnv,
    RlState,
    _expectation_op,
    _gae,
    load_meta,
    load_policy,
    meta_loss,
    meta_optimise,
    meta_rollout,
    meta_train,
    ppo_loss,
    rl_optimise,
    rl_train,
    save_meta,
    save_policy,
)
from gnnqaoa.optim import run_optimisation
from gnnqaoa.qsim import QaoaCircuit, QaoaParams

EDGE = Graph(2, ((0, 1),))


@pytest.fixture(scope="module")
def edge_policy():
    return rl_train([EDGE], 1, seed=0)


@pytest.fixture(scope="module")
def edge_meta():
    return meta_train([EDGE], 1, seed=0)


def zero_policy(p):
    nets = PolicyNets.create(p)
    for name in ("actor_w2", "actor_b2"):
        nets.params[name].data[:] = 0.0
    return nets


class TestRlState:
    def test_window_slides_and_pads(self):
        s = RlState(p=1, L=3)
        assert s.dim == 9 and not s.vector().any()
        s.push(0.5, np.array([0.1, 0.2]))
        assert np.array_equal(s.vector(), [0.5, 0.1, 0.2, 0, 0, 0, 0, 0, 0])
        s.push(-0.1, np.array([0.3, 0.0]))
        assert np.array_equal(s.window[0], [-0.1, 0.3, 0.0])
        assert np.array_equal(s.window[1], [0.5, 0.1, 0.2])

    def test_rejects(self):
        with pytest.raises(ConfigError):
            RlState(1, 0)


class TestEnv:
    @given(st.integers(0, 1000))
    def test_reward_telescopes(self, seed):
        g = random_regular(8, 3, seed=seed)
        env = QaoaEnv([g], 2)
        rng = np.random.default_rng(seed)
        env.reset(rng)
        c0 = env.cost
        rewards = [env.step(rng.normal(size=4))[1] for _ in range(20)]
        assert math.fsum(rewards) == pytest.approx(env.cost - c0, abs=1e-12)

    def test_actions_bounded(self):
        env = QaoaEnv([EDGE], 1)
        env.reset(np.random.default_rng(0), theta0=np.zeros(2))
        env.step(np.array([100.0, -100.0]))
        assert np.allclose(np.abs(env.theta), 0.1)

    def test_observation_scaling(self):
        env = QaoaEnv([EDGE], 1, L=2)
        env.reset(np.random.default_rng(0), theta0=np.zeros(2))
        obs, r = env.step(np.array([0.3, 0.4]))
        assert obs[0] == pytest.approx(r / (0.1 * 1.0))
        assert np.allclose(obs[1:3], np.tanh([0.3, 0.4]))

    def test_untrained_policy_returns_near_zero(self):
        # symmetric start: the landscape is even in theta around zero
        pol = PolicyNets.create(1, seed=0)
        env = QaoaEnv([EDGE], 1)
        rng = np.random.default_rng(0)
        totals = []
        for _ in range(100):
            obs = env.reset(rng, theta0=np.zeros(2))
            totals.append(sum(env.step(pol.act(obs, rng))[1] for _ in range(32)))
        assert abs(np.mean(totals)) < 0.05


class TestPpo:
    def test_shapes(self):
        nets = PolicyNets.create(3)
        assert nets.shapes()["actor_w0"] == (4 * 7, 64)
        assert nets.shapes()["actor_w2"] == (64, 6)
        assert nets.shapes()["critic_w2"] == (64, 1)

    @given(st.integers(0, 1000))
    def test_clipped_never_exceeds_unclipped(self, seed):
        rng = np.random.default_rng(seed)
        nets = PolicyNets.create(2, hidden=8, seed=seed)
        obs = rng.normal(size=(12, nets.obs_dim))
        acts = rng.normal(size=(12, 4))
        old = nets.log_prob(obs, acts).data + rng.normal(scale=0.5, size=12)
        _, surrogate, unclipped = ppo_loss(nets, obs, acts, old, rng.normal(size=12), rng.normal(size=12))
        assert np.all(surrogate <= unclipped + 1e-15)

    def test_log_prob_matches_gaussian(self):
        nets = PolicyNets.create(1, hidden=8, seed=1)
        obs = np.zeros((1, nets.obs_dim))
        u = np.array([[0.3, -0.2]])
        mu = nets.mean(obs).data[0]
        std = np.exp(nets.params["log_std"].data)
        expect = np.sum(-0.5 * ((u[0] - mu) / std) ** 2 - np.log(std) - 0.5 * np.log(2 * np.pi))
        assert nets.log_prob(obs, u).data[0] == pytest.approx(expect)

    def test_gae_matches_discounted_return_when_lambda_one(self):
        r = [1.0, 0.5, -0.2]
        adv, ret = _gae(r, [0.0, 0.0, 0.0], 0.0, 0.9, 1.0)
        assert np.allclose(ret, [1.0 + 0.9 * 0.5 + 0.81 * -0.2, 0.5 + 0.9 * -0.2, -0.2])

    def test_reward_trend(self, edge_policy):
        tr = np.array(edge_policy.reward_trace)
        blocks = [b.mean() for b in np.array_split(tr, 4)]
        assert np.all(np.diff(blocks) > 0)

    def test_greedy_rollout_single_edge(self, edge_policy):
        best = []
        for s in range(20):
            tr = rl_optimise(edge_policy.policy, EDGE, seed=100 + s, max_steps=32, sgd_epochs=0, plateau=1000)
            best.append(max(r.ratio for r in tr.rows))
        assert np.mean(np.array(best) >= 0.95) >= 0.75

    def test_greedy_rollout_deterministic(self, edge_policy):
        a = rl_optimise(edge_policy.policy, EDGE, seed=3, sgd_epochs=5)
        b = rl_optimise(edge_policy.policy, EDGE, seed=3, sgd_epochs=5)
        assert [r.cut_expectation for r in a.rows] == [r.cut_expectation for r in b.rows]

    def test_zero_policy_is_sgd(self):
        g = random_regular(6, 3, seed=0)
        start = QaoaParams([0.1, 0.2], [0.3, 0.1])
        tr = rl_optimise(zero_policy(2), g, params=start, sgd_epochs=20)
        assert tr.handoff_epoch == 10
        assert np.array_equal(tr.neural_params, start.to_vector())
        sgd = run_optimisation(g, "cold", "sgd", epochs=20, params=start, lr=HANDOFF_LR)
        neural = [r.cut_expectation for r in tr.rows[tr.handoff_epoch :]]
        assert neural == [r.cut_expectation for r in sgd.rows]

    def test_handoff_continuity(self, edge_policy):
        tr = rl_optimise(edge_policy.policy, EDGE, seed=1, sgd_epochs=3)
        after = run_optimisation(EDGE, "cold", "sgd", epochs=1, params=tr.neural_params, lr=HANDOFF_LR)
        assert tr.rows[tr.handoff_epoch + 1].cut_expectation == after.rows[1].cut_expectation
        assert [r.epoch for r in tr.rows] == list(range(len(tr.rows)))

    def test_checkpoint(self, tmp_path, edge_policy):
        save_policy(edge_policy.policy, tmp_path / "pol.npz")
        back = load_policy(tmp_path / "pol.npz")
        obs = np.random.default_rng(0).normal(size=back.obs_dim)
        assert np.array_equal(back.act(obs), edge_policy.policy.act(obs))
        with pytest.raises(ConfigError):
            load_meta(tmp_path / "pol.npz")


class TestMeta:
    def test_output_bounded(self):
        meta = MetaOptimiser.create(3, seed=0)
        for scale in (1.0, 1e3):
            for name in meta.params:
                meta.params[name].data = meta.params[name].data * scale
            costs, thetas = meta_rollout(meta, QaoaCircuit(random_regular(6, 3, seed=0)), np.ones(6), 5, 1 / 9)
            for t in thetas[1:]:
                assert np.all(np.abs(t.data) <= np.pi)

    def test_forget_bias(self):
        meta = MetaOptimiser.create(2, hidden=8)
        assert np.all(meta.params["b"].data[8:16] == 1) and not meta.params["b"].data[:8].any()

    def test_expectation_op_gradient(self):
        g = random_regular(6, 3, seed=1)
        circ = QaoaCircuit(g)
        theta = ag.parameter(np.array([0.3, 0.1, 0.2, 0.5]))
        ag.backward(_expectation_op(circ, -0.5, theta))
        assert np.allclose(theta.grad, -0.5 * circ.gradient(theta.data))

    def test_meta_loss_values(self):
        c = [ag.tensor(np.array(v)) for v in (0.0, -1.0, -0.5, -2.0)]
        t = [ag.tensor(np.zeros(2))] * 4
        # improvements over the running best: -1, 0, -1
        assert meta_loss(c, t, explore=0.0).item() == pytest.approx(-2.0)

    def test_meta_gradients_match_fd(self):
        circ = QaoaCircuit(EDGE)
        meta = MetaOptimiser.create(1, hidden=4, seed=2)
        theta0 = np.array([0.2, 0.3])
        costs, thetas = meta_rollout(meta, circ, theta0, 3, 1.0)
        baseline = np.minimum.accumulate([c.item() for c in costs])[:-1]

        def loss_value():
            # same loss with the running best frozen at the unperturbed values
            with ag.no_grad():
                cs, ts = meta_rollout(meta, circ, theta0, 3, 1.0)
            gains = sum(min(c.item() - b, 0.0) for c, b in zip(cs[1:], baseline))
            steps = [np.sum((b.data - a.data) ** 2) for a, b in zip(ts[:-1], ts[1:])]
            return gains - 0.05 * np.mean(steps)

        ag.backward(meta_loss(costs, thetas))
        for name in ("w_out", "w_x", "b"):
            w = meta.params[name]
            fd = np.zeros_like(w.data)
            base = w.data.copy()
            for idx in np.ndindex(base.shape):
                vals = []
                for h in (1e-6, -1e-6):
                    w.data = base.copy()
                    w.data[idx] += h
                    vals.append(loss_value())
                fd[idx] = (vals[0] - vals[1]) / 2e-6
            w.data = base
            assert np.allclose(w.grad, fd, atol=1e-6), name

    def test_rejects_short_unroll(self):
        with pytest.raises(ValueError):
            meta_train([EDGE], 1, unroll_T=1)

    def test_trained_single_edge(self, edge_meta):
        hits = 0
        for s in range(10):
            tr = meta_optimise(edge_meta.meta, EDGE, seed=s, steps=10, sgd_epochs=0, plateau=1000)
            hits += max(r.ratio for r in tr.rows[1:]) >= 0.9
        assert hits >= 9

    def test_meta_loss_trend(self, edge_meta):
        blocks = [b.mean() for b in np.array_split(np.array(edge_meta.loss_trace), 4)]
        assert blocks[-1] < blocks[0]

    def test_clip_counter(self):
        res = meta_train([EDGE], 1, unroll_T=3, meta_epochs=5, max_norm=1e-9, hidden=4)
        assert res.clipped_steps == 5

    def test_zero_steps_is_sgd(self, edge_meta):
        start = QaoaParams([0.1], [0.2])
        tr = meta_optimise(edge_meta.meta, EDGE, steps=0, params=start, sgd_epochs=10)
        sgd = run_optimisation(EDGE, "cold", "sgd", epochs=10, params=start, lr=HANDOFF_LR)
        assert tr.handoff_epoch == 0
        assert [r.cut_expectation for r in tr.rows] == [r.cut_expectation for r in sgd.rows]

    def test_proposals_deterministic_and_handoff(self, edge_meta):
        a = meta_optimise(edge_meta.meta, EDGE, seed=4, sgd_epochs=2)
        b = meta_optimise(edge_meta.meta, EDGE, seed=4, sgd_epochs=2)
        assert all(np.array_equal(x, y) for x, y in zip(a.proposals, b.proposals))
        after = run_optimisation(EDGE, "cold", "sgd", epochs=1, params=a.neural_params, lr=HANDOFF_LR)
        assert a.rows[a.handoff_epoch + 1].cut_expectation == after.rows[1].cut_expectation

    def test_checkpoint(self, tmp_path, edge_meta):
        save_meta(edge_meta.meta, tmp_path / "m.npz")
        back = load_meta(tmp_path / "m.npz")
        a = meta_optimise(back, EDGE, seed=2, sgd_epochs=0)
        b = meta_optimise(edge_meta.meta, EDGE, seed=2, sgd_epochs=0)
        assert [r.cut_expectation for r in a.rows] == [r.cut_expectation for r in b.rows]
        with pytest.raises(ConfigError):
            load_policy(tmp_path / "m.npz")
