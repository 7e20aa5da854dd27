"""Acceptance suite: one test per criterion, each printing a PASS/FAIL line.

Run with ``pytest tests/test_acceptance.py -v`` (add ``-s`` to see progress).
Graph corpora use seed ranges disjoint from every range used to pick defaults.
"""

import math
import time

import numpy as np
import pytest

from conftest import dense_qaoa_state
from gnnqaoa import cli
from gnnqaoa.gnn import GnnModel, predict, round_probabilities, train, warmstart_from_gnn
from gnnqaoa.graphs import Graph, max_cut_oracle, random_regular
from gnnqaoa.initialisation import gw_relaxation, regularise, tqa_init
from gnnqaoa.neuralopt import HANDOFF_LR, meta_optimise, meta_train, rl_optimise, rl_train
from gnnqaoa.optim import epochs_to_ratio, qfi_matrix, run_optimisation
from gnnqaoa.qsim import (
    QaoaCircuit,
    WarmStartMixer,
    apply_single_qubit,
    fidelity,
    prepare_warmstart_state,
    qaoa_expectation,
)
from test_grad import OPS, numeric_check


def report(capsys, k, ok, detail):
    with capsys.disabled():
        print(f"\nCRITERION {k:>2} {'PASS' if ok else 'FAIL'}  {detail}")
    assert ok, detail


def random_graph(rng, n):
    edges = [(i, j, float(rng.uniform(0.5, 2.0))) for i in range(n) for j in range(i + 1, n) if rng.random() < 0.6]
    return Graph(n, tuple(edges) or ((0, 1, 1.0),))


def mean_rounded_ratio(model, graphs, opts):
    return float(np.mean([round_probabilities(predict(model, g), g)[1] / o for g, o in zip(graphs, opts)]))


def trained_n12(noise):
    graphs = [random_regular(12, 3, 1000 + s) for s in range(300)]
    model = GnnModel.create(seed=0, noise=noise)
    res = train(model, graphs, epochs=20, lr=1e-3, seed=0)
    return model, res.seconds


@pytest.fixture(scope="module")
def model_n12():
    return trained_n12(0)


@pytest.fixture(scope="module")
def warm_model_n12():
    # one noise column splits nodes of symmetric graphs; picked on the 6000+ tuning graphs
    return trained_n12(1)


def test_c01_oracle_equivalence(capsys):
    rng = np.random.default_rng(1)
    t0 = time.perf_counter()
    worst = 0.0
    for case in range(50):
        n = int(rng.integers(2, 7))
        g = random_graph(rng, n)
        p = int(rng.integers(1, 4))
        betas, gammas = rng.uniform(-np.pi, np.pi, p), rng.uniform(-np.pi, np.pi, p)
        x = rng.uniform(0.05, 0.95, n) if case % 2 else None
        psi = dense_qaoa_state(g, betas, gammas, x)
        from conftest import dense_cut_hamiltonian

        dense = float(np.real(np.vdot(psi, dense_cut_hamiltonian(g) @ psi)))
        fast = qaoa_expectation(g, np.concatenate([betas, gammas]), x)
        worst = max(worst, abs(dense - fast))
    secs = time.perf_counter() - t0
    report(capsys, 1, worst < 1e-9 and secs < 10, f"max |diff| {worst:.2e} (tol 1e-9), {secs:.1f} s (limit 10 s)")


def test_c02_gradient_suite(capsys):
    rng = np.random.default_rng(2)
    t0 = time.perf_counter()
    worst = 0.0
    for case in range(50):
        g = random_graph(rng, int(rng.integers(2, 8)))
        p = int(rng.integers(1, 5))
        theta = rng.uniform(-np.pi, np.pi, 2 * p)
        init = rng.uniform(0.05, 0.95, g.n) if case % 2 else None
        circ = QaoaCircuit(g, init)
        analytic = circ.gradient(theta)
        fd = np.zeros_like(theta)
        for k in range(theta.size):
            e = np.zeros_like(theta)
            e[k] = 1e-5
            fd[k] = (circ.expectation(theta + e) - circ.expectation(theta - e)) / 2e-5
        worst = max(worst, np.linalg.norm(analytic - fd) / max(np.linalg.norm(fd), 1e-8))
    op_worst = max(numeric_check(name, seed) for name in OPS for seed in range(10))
    secs = time.perf_counter() - t0
    ok = worst < 1e-6 and op_worst < 1e-5 and secs < 60
    report(capsys, 2, ok, f"circuit rel err {worst:.2e} (tol 1e-6), op FD worst {op_worst:.2e} (tol 1e-5), {secs:.1f} s")


def test_c03_qfi(capsys):
    rng = np.random.default_rng(3)
    h = 1e-4
    worst = 0.0
    for case in range(20):
        g = random_graph(rng, int(rng.integers(2, 9)))
        p = int(rng.integers(1, 4))
        theta = rng.uniform(-np.pi, np.pi, 2 * p)
        init = rng.uniform(0.1, 0.9, g.n) if case % 2 else None
        d = theta.size
        f = lambda a: fidelity(theta, theta + a, g, init)
        hess = np.zeros((d, d))
        for i in range(d):
            for j in range(d):
                ei, ej = np.eye(d)[i] * h, np.eye(d)[j] * h
                hess[i, j] = (f(ei + ej) - f(ei - ej) - f(-ei + ej) + f(-ei - ej)) / (4 * h * h)
        worst = max(worst, np.max(np.abs(qfi_matrix(g, theta, init) + 0.5 * hess)))
    report(capsys, 3, worst < 1e-4, f"max |QFI + 1/2 FD Hessian| {worst:.2e} (tol 1e-4)")


def test_c04_warm_eigenstate(capsys):
    rng = np.random.default_rng(4)
    worst = 0.0
    for _ in range(100):
        n = int(rng.integers(1, 13))
        ws = regularise(rng.random(n), float(rng.uniform(0, 0.5)))
        psi = prepare_warmstart_state(ws)
        mixer = WarmStartMixer.from_x(ws.x_tilde)
        h_psi = sum(apply_single_qubit(psi, q, mixer.matrices[q]) for q in range(n))
        worst = max(worst, abs(np.vdot(psi, h_psi).real + n))
    report(capsys, 4, worst < 1e-10, f"max |<H> + n| {worst:.2e} (tol 1e-10)")


def test_c05_gw_floor(capsys):
    t0 = time.perf_counter()
    ratios = []
    for s in range(50):
        g = random_regular(12, 3, 2000 + s)
        ratios.append(gw_relaxation(g, rounds=50, seed=s).best_cut / max_cut_oracle(g).cut_value)
    secs = time.perf_counter() - t0
    mean = float(np.mean(ratios))
    report(capsys, 5, mean >= 0.878 and secs < 120, f"mean best-of-50 ratio {mean:.4f} (floor 0.878), {secs:.1f} s")


def test_c06_gnn_quality(capsys, model_n12):
    t0 = time.perf_counter()
    model, train_secs = model_n12
    test = [random_regular(12, 3, 5000 + s) for s in range(30)]
    mean = mean_rounded_ratio(model, test, [max_cut_oracle(g).cut_value for g in test])
    secs = train_secs + time.perf_counter() - t0
    report(capsys, 6, mean >= 0.80 and secs < 900, f"mean rounded ratio {mean:.4f} (floor 0.80), {secs:.1f} s")


def test_c07_warm_advantage(capsys, warm_model_n12):
    model, _ = warm_model_n12
    cold, warm = [], []
    for s in range(20):
        g = random_regular(12, 3, 5100 + s)
        opt = max_cut_oracle(g).cut_value
        ws = warmstart_from_gnn(model, g)
        for seed in range(3):
            cold.append(run_optimisation(g, "cold", "adam", epochs=100, seed=seed, p=1, max_cut=opt).final_ratio)
            warm.append(
                run_optimisation(g, "gnn", "adam", epochs=100, seed=seed, p=1, warmstart=ws, max_cut=opt).final_ratio
            )
    gap = float(np.mean(warm) - np.mean(cold))
    report(capsys, 7, gap >= 0.10, f"warm {np.mean(warm):.4f} vs cold {np.mean(cold):.4f}, gap {gap:.4f} (need 0.10)")


def test_c08_tqa_exact(capsys):
    worst = 0.0
    for dt in (0.1, 0.75, 1.0):
        for p in range(1, 65):
            params = tqa_init(p, dt)
            for k in range(1, p + 1):
                worst = max(worst, abs(params.gammas[k - 1] - k / p * dt), abs(params.betas[k - 1] - (1 - k / p) * dt))
    report(capsys, 8, worst <= 1e-15, f"max deviation {worst:.1e} (tol 1e-15)")


def test_c09_optimiser_ordering(capsys):
    graphs = [random_regular(10, 3, 9000 + i) for i in range(10)]
    opts = [max_cut_oracle(g).cut_value for g in graphs]
    stats = {}
    for name in ("sgd", "qng", "1-spsa", "qn-spsa"):
        reach, final = [], []
        for g, opt in zip(graphs, opts):
            for seed in range(10):
                tr = run_optimisation(g, "cold", name, epochs=200, seed=seed, p=5, max_cut=opt)
                e = epochs_to_ratio(tr.rows, 0.85)
                reach.append(math.inf if e is None else e)
                final.append(tr.final_ratio)
        stats[name] = (float(np.median(reach)), float(np.mean(final)))
    a = stats["qng"][0] < stats["sgd"][0]
    b = stats["qn-spsa"][1] >= stats["1-spsa"][1] - 0.02
    detail = (
        f"(a) median epochs to 0.85: QNG {stats['qng'][0]} vs SGD {stats['sgd'][0]} [{'ok' if a else 'no'}]; "
        f"(b) final ratio QN-SPSA {stats['qn-spsa'][1]:.4f} vs 1-SPSA {stats['1-spsa'][1]:.4f} [{'ok' if b else 'no'}]"
    )
    report(capsys, 9, a and b, detail)


def test_c10_generalisation(capsys):
    t0 = time.perf_counter()
    test = [random_regular(10, 3, 7000 + s) for s in range(30)]
    opts = [max_cut_oracle(g).cut_value for g in test]
    means = {}
    for n_train in (6, 10):
        graphs = [random_regular(n_train, 3, 100 * n_train + s) for s in range(300)]
        model = GnnModel.create(seed=1)
        train(model, graphs, epochs=20, lr=1e-3, seed=0)
        means[n_train] = mean_rounded_ratio(model, test, opts)
    secs = time.perf_counter() - t0
    diff = abs(means[6] - means[10])
    report(capsys, 10, diff <= 0.07 and secs < 1200,
           f"train 6 -> {means[6]:.4f}, train 10 -> {means[10]:.4f}, |diff| {diff:.4f} (tol 0.07), {secs:.1f} s")


def test_c11_neural_optimisers(capsys):
    edge = Graph(2, ((0, 1),))
    corpora = {
        "edge": ([edge], [edge] * 10, 1),
        "n8": ([random_regular(8, 3, 12000 + i) for i in range(8)], [random_regular(8, 3, 11000 + s) for s in range(10)], 4),
    }
    counts, invariants = {}, True
    for name, (train_graphs, evals, p) in corpora.items():
        policy = rl_train(train_graphs, p, seed=0).policy
        meta = meta_train(train_graphs, p, seed=0).meta
        for kind in ("rl", "meta"):
            hits = 0
            for seed, g in enumerate(evals):
                if kind == "rl":
                    tr = rl_optimise(policy, g, seed=seed, sgd_epochs=150)
                    neural_gain = tr.rows[len(tr.rewards)].cut_expectation - tr.rows[0].cut_expectation
                    invariants &= abs(math.fsum(tr.rewards) - neural_gain) <= 1e-12
                else:
                    tr = meta_optimise(meta, g, seed=seed, sgd_epochs=150)
                hits += any(r.ratio >= 0.9 for r in tr.rows[:151])
                after = run_optimisation(g, "cold", "sgd", epochs=1, params=tr.neural_params, lr=HANDOFF_LR)
                invariants &= tr.rows[tr.handoff_epoch + 1].cut_expectation == after.rows[1].cut_expectation
            counts[f"{kind}+sgd/{name}"] = hits
    ok = invariants and all(v >= 7 for v in counts.values())
    detail = ", ".join(f"{k} {v}/10" for k, v in counts.items()) + f" (need 7); invariants {'hold' if invariants else 'BROKEN'}"
    report(capsys, 11, ok, detail)


def test_c12_determinism(capsys, tmp_path):
    tiny = ["corpus.count=2", "gnn.train_count=10", "gnn.epochs=1", "optimiser.epochs=5",
            "neural.episodes=16", "neural.meta_epochs=3", "neural.sgd_epochs=5"]
    differing = []
    for preset in cli.PRESETS:
        bodies = []
        for run in range(2):
            cfg = cli.load_config(overrides=tiny, preset=preset, seed=3)
            cli.run_preset(cfg, tmp_path / f"{run}")
            bodies.append((tmp_path / f"{run}" / f"{preset.replace('/', '-')}.csv").read_bytes())
        if bodies[0] != bodies[1]:
            differing.append(preset)
    report(capsys, 12, not differing, f"{len(cli.PRESETS)} presets rerun; differing: {differing or 'none'}")
