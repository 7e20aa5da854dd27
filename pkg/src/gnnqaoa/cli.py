"""Experiment harness: corpora, GNN training, warm starts, QAOA runs and benchmark presets.

Configuration is an INI file (``configparser``) with the sections and keys
listed in ``SCHEMA``. Values are resolved in this order, later winning:
built-in defaults, preset defaults, the ``--config`` file, ``--override
section.key=value`` flags, then ``--seed``. Unknown sections or keys are
rejected.

Each ``benchmark`` run writes three files into ``--out``::

    <preset>.csv          graph_id,n,p,init,optimiser,seed,epoch,cut_expectation,ratio
    <preset>.timing.csv   the same keys plus wall_ms (monotonic clock)
    <preset>.meta.json    resolved config, its sha256 and the desk-scale notes

The main CSV carries no timings so that reruns with the same seed are
byte-identical.
"""

from __future__ import annotations

import argparse
import configparser
import csv
import hashlib
import io
import json
import re
import sys
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass
from pathlib import Path
from typing import Any, Callable, Sequence

import numpy as np

from .errors import ConfigError, GnnQaoaError, NumericalError, ResourceCapError
from .graphs import Graph, max_cut_oracle, random_regular, read_edgelist, write_edgelist
from .initialisation import (
    DEFAULT_EPSILON,
    DEFAULT_GNN_EPSILON,
    DEFAULT_TQA_DT,
    gw_relaxation,
    read_warmstart,
    tqa_init,
    write_warmstart,
)
from .optim import OPTIMISERS, run_optimisation

__all__ = [
    "SCHEMA",
    "PRESETS",
    "ExperimentConfig",
    "ResultRow",
    "load_config",
    "depth_for",
    "run_preset",
    "main",
]

EXIT_OK, EXIT_CONFIG, EXIT_CAP, EXIT_NUMERICAL = 0, 2, 3, 4

CSV_COLUMNS = ("graph_id", "n", "p", "init", "optimiser", "seed", "epoch", "cut_expectation", "ratio")
TIMING_COLUMNS = ("graph_id", "n", "p", "init", "optimiser", "seed", "epoch", "wall_ms")

# section -> key -> (type, default). Lists are comma separated.
SCHEMA: dict[str, dict[str, tuple[str, Any]]] = {
    "corpus": {
        "n": ("int", 8),
        "k": ("int", 3),
        "count": ("int", 5),
        "seed": ("int", 0),
    },
    "qaoa": {
        "p": ("str", "1"),
        "init": ("str", "cold"),
        "angle_init": ("str", ""),
        "epsilon": ("float?", None),
        "dt": ("float", 0.75),
        "checkpoint": ("str", ""),
        "warmstart": ("str", ""),
    },
    "optimiser": {
        "name": ("str", "adam"),
        "lr": ("float?", None),
        "epochs": ("int", 100),
        "repetitions": ("int", 1),
        "scale": ("str", "hamiltonian"),
    },
    "gnn": {
        "arch": ("str", "lgnn"),
        "d": ("int", 16),
        "J": ("int", 3),
        "layers": ("int", 8),
        "norm": ("str", "standardise"),
        "noise": ("int", 0),
        "epochs": ("int", 20),
        "lr": ("float", 1e-3),
        "train_count": ("int", 300),
        "train_seed": ("int", 1000),
    },
    "neural": {
        "episodes": ("int", 3000),
        "horizon": ("int", 32),
        "meta_epochs": ("int", 200),
        "unroll": ("int", 10),
        "rl_steps": ("int", 50),
        "meta_steps": ("int", 10),
        "sgd_epochs": ("int", 100),
    },
    "benchmark": {
        "sizes": ("ints", [6, 8, 10]),
        "depths": ("ints", [1, 2, 3]),
        "depth_n": ("int", 8),
        "inits": ("strs", ["cold"]),
        "optimisers": ("strs", ["adam"]),
        "train_sizes": ("ints", [6, 8]),
        "test_sizes": ("ints", [8, 10]),
    },
}

# Desk-scale presets. Each maps onto SCHEMA keys; the notes are stamped into metadata.
PRESETS: dict[str, dict[str, Any]] = {
    "fig3": {
        "values": {
            "corpus.count": "3",
            "qaoa.p": "3n/4",
            "benchmark.sizes": "6,8,10",
            "benchmark.depths": "1,2,3,4",
            "benchmark.depth_n": "10",
            "benchmark.inits": "cold,lgnn,gcn",
            "optimiser.name": "adam",
            "gnn.train_count": "50",
            "gnn.epochs": "5",
            "gnn.noise": "1",
        },
        "notes": "ratio vs n (p from qaoa.p) and vs p at n = depth_n; GNNs trained per size on a reduced corpus"
        " with one noise feature",
    },
    "fig5a": {
        "values": {"corpus.count": "10", "benchmark.sizes": "8,10,12", "gnn.train_count": "100", "gnn.epochs": "10"},
        "notes": "rounded LGNN cut vs best-of-50 GW cut; r_GNN/r_GW is the ratio of the two ratio columns",
    },
    "fig5b": {
        "values": {"corpus.count": "3", "benchmark.sizes": "8,12,16,20", "gnn.train_count": "20", "gnn.epochs": "2"},
        "notes": "warm-start inference timing; compare wall_ms trends only, absolute values are hardware bound",
    },
    "fig6": {
        "values": {
            "corpus.count": "3",
            "qaoa.p": "4",
            "benchmark.optimisers": "sgd,adam,rmsprop,nelder-mead",
            "optimiser.epochs": "100",
        },
        "notes": "gradient-based vs gradient-free; Nelder-Mead stands in for COBYLA",
    },
    "fig7": {
        "values": {"corpus.count": "3", "qaoa.p": "4", "benchmark.optimisers": "sgd,qng,mgd", "optimiser.epochs": "100"},
        "notes": "quantum natural gradient and model gradient descent vs SGD",
    },
    "fig8": {
        "values": {
            "corpus.count": "3",
            "corpus.n": "10",
            "qaoa.p": "5",
            "benchmark.optimisers": "sgd,1-spsa,2-spsa,qn-spsa",
            "optimiser.epochs": "200",
        },
        "notes": "SPSA family vs SGD",
    },
    "fig9": {
        "values": {
            "corpus.count": "3",
            "qaoa.p": "4",
            "neural.episodes": "200",
            "neural.meta_epochs": "100",
            "neural.sgd_epochs": "100",
        },
        "notes": "RL and meta-learning proposals with SGD hand-off, vs SGD; reduced training budgets",
    },
    "table1": {
        "values": {"corpus.count": "10", "benchmark.train_sizes": "6,8", "benchmark.test_sizes": "8,10", "gnn.epochs": "10"},
        "notes": "rounded LGNN ratio, rows = test graphs, init = lgnn-train<size>; 300-graph corpora",
    },
}
PRESETS["fig6/7"] = {
    "values": {**PRESETS["fig6"]["values"], "benchmark.optimisers": "sgd,adam,rmsprop,nelder-mead,qng,mgd"},
    "notes": "union of fig6 and fig7",
}


# -- configuration ---------------------------------------------------------------------------


def _parse(section: str, key: str, kind: str, raw: str):
    raw = raw.strip()
    try:
        if kind == "int":
            return int(raw)
        if kind == "float":
            return float(raw)
        if kind == "float?":
            return None if raw in ("", "none", "default") else float(raw)
        if kind == "ints":
            return [int(x) for x in raw.split(",") if x.strip()]
        if kind == "strs":
            return [x.strip() for x in raw.split(",") if x.strip()]
    except ValueError as exc:
        raise ConfigError(f"[{section}] {key}: cannot parse {raw!r} as {kind}") from exc
    return raw


@dataclass
class ExperimentConfig:
    """Fully resolved configuration; ``values[section][key]`` is typed."""

    values: dict[str, dict[str, Any]]
    preset: str = ""

    def __getitem__(self, dotted: str):
        section, key = dotted.split(".", 1)
        return self.values[section][key]

    def to_dict(self) -> dict:
        return {"preset": self.preset, "values": self.values}

    @property
    def config_hash(self) -> str:
        blob = json.dumps(self.to_dict(), sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(blob.encode()).hexdigest()


def _apply(raw: dict[str, dict[str, str]], section: str, key: str, value: str, origin: str) -> None:
    if section not in SCHEMA:
        raise ConfigError(f"{origin}: unknown section [{section}]")
    if key not in SCHEMA[section]:
        raise ConfigError(f"{origin}: unknown key {key!r} in [{section}]")
    raw[section][key] = value


def load_config(
    path: str | Path | None = None,
    overrides: Sequence[str] = (),
    preset: str = "",
    seed: int | None = None,
) -> ExperimentConfig:
    """Resolve defaults, preset values, the INI file and ``section.key=value`` overrides."""
    raw: dict[str, dict[str, str]] = {s: {} for s in SCHEMA}
    if preset:
        if preset not in PRESETS:
            raise ConfigError(f"unknown preset {preset!r}; choose from {', '.join(PRESETS)}")
        for dotted, value in PRESETS[preset]["values"].items():
            s, k = dotted.split(".", 1)
            _apply(raw, s, k, value, f"preset {preset}")
    if path is not None:
        path = Path(path)
        if not path.exists():
            raise ConfigError(f"config file {path} does not exist")
        parser = configparser.ConfigParser(interpolation=None, inline_comment_prefixes=(";", "#"))
        parser.optionxform = str
        try:
            parser.read(path, encoding="utf-8")
        except configparser.Error as exc:
            raise ConfigError(f"{path}: {exc}") from exc
        for section in parser.sections():
            for key, value in parser.items(section):
                _apply(raw, section, key, value, str(path))
    for item in overrides:
        m = re.fullmatch(r"\s*(\w+)\.(\w+)\s*=(.*)", item)
        if not m:
            raise ConfigError(f"override must look like section.key=value, got {item!r}")
        _apply(raw, m.group(1), m.group(2), m.group(3), "--override")
    values: dict[str, dict[str, Any]] = {}
    for section, keys in SCHEMA.items():
        values[section] = {}
        for key, (kind, default) in keys.items():
            values[section][key] = _parse(section, key, kind, raw[section][key]) if key in raw[section] else default
    if seed is not None:
        values["corpus"]["seed"] = int(seed)
    cfg = ExperimentConfig(values, preset)
    _validate(cfg)
    return cfg


def _validate(cfg: ExperimentConfig) -> None:
    depth_for(cfg["qaoa.p"], 4)
    names = [cfg["optimiser.name"], *cfg["benchmark.optimisers"]]
    for name in names:
        if name not in OPTIMISERS:
            raise ConfigError(f"unknown optimiser {name!r}; choose from {', '.join(OPTIMISERS)}")
    for key in ("corpus.count", "optimiser.repetitions"):
        if cfg[key] < 1:
            raise ConfigError(f"{key} must be >= 1, got {cfg[key]}")
    if cfg["optimiser.epochs"] < 0:
        raise ConfigError("optimiser.epochs must be >= 0")
    if cfg["gnn.arch"] not in ("lgnn", "gcn"):
        raise ConfigError(f"gnn.arch must be lgnn or gcn, got {cfg['gnn.arch']!r}")


def depth_for(rule: str, n: int) -> int:
    """Depth from an integer or a rule like ``3n/4`` or ``n/2`` (floored, at least 1)."""
    rule = str(rule).replace(" ", "")
    if rule.isdigit():
        if int(rule) < 1:
            raise ConfigError(f"depth must be >= 1, got {rule}")
        return int(rule)
    m = re.fullmatch(r"(\d*)n(?:/(\d+))?", rule)
    if not m:
        raise ConfigError(f"depth rule must be an integer or like '3n/4', got {rule!r}")
    num = int(m.group(1) or 1)
    den = int(m.group(2) or 1)
    return max(1, n * num // den)


# -- results ----------------------------------------------------------------------------------


@dataclass(frozen=True)
class ResultRow:
    graph_id: int
    n: int
    p: int
    init: str
    optimiser: str
    seed: int
    epoch: int
    cut_expectation: float
    ratio: float
    wall_ms: float

    def __post_init__(self):
        if not (0.0 <= self.ratio <= 1.0 + 1e-9):
            raise NumericalError(f"ratio {self.ratio} outside [0, 1] for graph {self.graph_id}")


def _fmt(v) -> str:
    return repr(float(v)) if isinstance(v, (float, np.floating)) else str(v)


def rows_to_csv(rows: Sequence[ResultRow], columns: Sequence[str] = CSV_COLUMNS) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(columns)
    for r in rows:
        d = asdict(r)
        w.writerow([_fmt(d[c]) for c in columns])
    return buf.getvalue()


def _check_order(rows: Sequence[ResultRow]) -> None:
    # within a block of one (init, optimiser, n, p), keys increase strictly
    last: dict[tuple, tuple] = {}
    for r in rows:
        block = (r.init, r.optimiser, r.n, r.p)
        key = (r.graph_id, r.seed, r.epoch)
        if block in last and key <= last[block]:
            raise RuntimeError(f"rows out of order in block {block}: {key} after {last[block]}")
        last[block] = key


# -- corpus and models ------------------------------------------------------------------------


def corpus(n: int, k: int, count: int, seed: int) -> list[Graph]:
    """``count`` random regular graphs with seeds ``seed, seed + 1, ...``."""
    return [random_regular(n, k, seed + i) for i in range(count)]


def _train_gnn(cfg: ExperimentConfig, n: int, arch: str | None = None, seed_offset: int = 0):
    from .gnn import GnnModel, train

    graphs = corpus(n, cfg["corpus.k"], cfg["gnn.train_count"], cfg["gnn.train_seed"] + 100 * n + seed_offset)
    model = GnnModel.create(
        arch=arch or cfg["gnn.arch"], d=cfg["gnn.d"], J=cfg["gnn.J"], T_layers=cfg["gnn.layers"],
        seed=cfg["corpus.seed"], norm=cfg["gnn.norm"], noise=cfg["gnn.noise"],
    )
    res = train(model, graphs, epochs=cfg["gnn.epochs"], lr=cfg["gnn.lr"], seed=cfg["corpus.seed"])
    return model, res


def _load_checkpoint(path: str):
    from .gnn import load_model

    if not path:
        raise ConfigError("a GNN checkpoint is required (qaoa.checkpoint)")
    if not Path(path).exists():
        raise ConfigError(f"checkpoint {path} does not exist")
    return load_model(path)


# -- cell workers (module level so they pickle) -----------------------------------------------


def _qaoa_cell(task: dict) -> list[ResultRow]:
    g: Graph = task["graph"]
    label = task["init"]
    method = {"lgnn": "gnn", "gcn": "gnn"}.get(label, label)
    angle_init = task.get("angle_init") or ("tqa" if method == "tqa" else "xavier")
    params = tqa_init(task["p"], task.get("dt", DEFAULT_TQA_DT)) if angle_init == "tqa" else None
    tr = run_optimisation(
        g, method, task["optimiser"], epochs=task["epochs"], seed=task["seed"], p=task["p"],
        angle_init=angle_init, params=params, warmstart=task.get("warmstart"), model=task.get("model"),
        epsilon=task["epsilon"], lr=task["lr"], max_cut=task["max_cut"], scale=task["scale"],
    )
    return _rows(task, tr.rows)


def _neural_cell(task: dict) -> list[ResultRow]:
    from .neuralopt import meta_optimise, rl_optimise
    from .initialisation import xavier_init

    g = task["graph"]
    params = xavier_init(task["p"], task["seed"])
    if task["optimiser"] == "rl+sgd":
        tr = rl_optimise(task["policy"], g, params=params, max_steps=task["rl_steps"],
                         sgd_epochs=task["sgd_epochs"], seed=task["seed"], max_cut=task["max_cut"])
    else:
        tr = meta_optimise(task["meta"], g, params=params, steps=task["meta_steps"],
                           sgd_epochs=task["sgd_epochs"], seed=task["seed"], max_cut=task["max_cut"])
    return _rows(task, tr.rows)


def _round_cell(task: dict) -> list[ResultRow]:
    from .gnn import predict, round_probabilities

    g, opt = task["graph"], task["max_cut"]
    t0 = time.perf_counter()
    if task["kind"] == "gw":
        cut = gw_relaxation(g, seed=task["seed"]).best_cut
    else:
        cut = round_probabilities(predict(task["model"], g), g)[1]
    ms = 1e3 * (time.perf_counter() - t0)
    return [ResultRow(task["graph_id"], g.n, 0, task["init"], "none", task["seed"], 0, float(cut),
                      float(cut) / opt if opt > 0 else 1.0, ms)]


def _rows(task: dict, trace) -> list[ResultRow]:
    g = task["graph"]
    return [
        ResultRow(task["graph_id"], g.n, task["p"], task["init"], task["optimiser"], task["seed"],
                  r.epoch, r.cut_expectation, r.ratio, r.wall_ms)
        for r in trace
    ]


WORKERS: dict[str, Callable[[dict], list[ResultRow]]] = {
    "qaoa": _qaoa_cell,
    "neural": _neural_cell,
    "round": _round_cell,
}


def _run_task(task: dict) -> list[ResultRow]:
    return WORKERS[task["worker"]](task)


def run_cells(tasks: Sequence[dict], jobs: int = 1) -> list[ResultRow]:
    """Run tasks on a process pool; output order follows ``tasks`` regardless of completion."""
    if jobs <= 1 or len(tasks) <= 1:
        chunks = [_run_task(t) for t in tasks]
    else:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            chunks = list(pool.map(_run_task, tasks))
    rows = [r for chunk in chunks for r in chunk]
    _check_order(rows)
    return rows


# -- presets ----------------------------------------------------------------------------------


def _graphs_with_opt(cfg: ExperimentConfig, n: int) -> list[tuple[int, Graph, float]]:
    gs = corpus(n, cfg["corpus.k"], cfg["corpus.count"], cfg["corpus.seed"] + 1000 * n)
    return [(i, g, max_cut_oracle(g).cut_value) for i, g in enumerate(gs)]


def _qaoa_tasks(cfg, graphs, p, init, optimiser, model=None) -> list[dict]:
    tasks = []
    for gid, g, opt in graphs:
        for rep in range(cfg["optimiser.repetitions"]):
            tasks.append({
                "worker": "qaoa", "graph": g, "graph_id": gid, "max_cut": opt, "p": p, "init": init,
                "optimiser": optimiser, "seed": cfg["corpus.seed"] + rep, "epochs": cfg["optimiser.epochs"],
                "lr": cfg["optimiser.lr"], "epsilon": cfg["qaoa.epsilon"], "scale": cfg["optimiser.scale"],
                "angle_init": cfg["qaoa.angle_init"], "dt": cfg["qaoa.dt"], "model": model,
            })
    return tasks


def _round_tasks(cfg, graphs, init, kind, model=None) -> list[dict]:
    return [
        {"worker": "round", "graph": g, "graph_id": gid, "max_cut": opt, "init": init, "kind": kind,
         "seed": cfg["corpus.seed"], "model": model}
        for gid, g, opt in graphs
    ]


def _preset_fig3(cfg):
    tasks = []
    sizes = sorted(set(cfg["benchmark.sizes"]) | {cfg["benchmark.depth_n"]})
    models = {(n, a): _train_gnn(cfg, n, a)[0] for n in sizes for a in ("lgnn", "gcn") if a in cfg["benchmark.inits"]}
    settings = [(n, depth_for(cfg["qaoa.p"], n)) for n in cfg["benchmark.sizes"]]
    settings += [(cfg["benchmark.depth_n"], p) for p in cfg["benchmark.depths"]]
    for n, p in dict.fromkeys(settings):
        graphs = _graphs_with_opt(cfg, n)
        for init in cfg["benchmark.inits"]:
            tasks += _qaoa_tasks(cfg, graphs, p, init, cfg["optimiser.name"], models.get((n, init)))
    for n in sizes:
        if (n, "lgnn") in models:
            tasks += _round_tasks(cfg, _graphs_with_opt(cfg, n), "lgnn-rounded", "gnn", models[(n, "lgnn")])
    return tasks


def _preset_fig5a(cfg):
    tasks = []
    for n in cfg["benchmark.sizes"]:
        model, _ = _train_gnn(cfg, n, "lgnn")
        graphs = _graphs_with_opt(cfg, n)
        tasks += _round_tasks(cfg, graphs, "gnn", "gnn", model)
        tasks += _round_tasks(cfg, graphs, "gw", "gw")
    return tasks


def _preset_fig5b(cfg):
    sizes = cfg["benchmark.sizes"]
    model, _ = _train_gnn(cfg, min(sizes), "lgnn")
    tasks = []
    for n in sizes:
        graphs = _graphs_with_opt(cfg, n)
        tasks += _round_tasks(cfg, graphs, "gnn", "gnn", model)
        tasks += _round_tasks(cfg, graphs, "gw", "gw")
    return tasks


def _preset_optimisers(cfg):
    n = cfg["corpus.n"]
    graphs = _graphs_with_opt(cfg, n)
    p = depth_for(cfg["qaoa.p"], n)
    tasks = []
    for name in cfg["benchmark.optimisers"]:
        tasks += _qaoa_tasks(cfg, graphs, p, cfg["qaoa.init"], name)
    return tasks


def _preset_fig9(cfg):
    from .neuralopt import meta_train, rl_train

    n = cfg["corpus.n"]
    p = depth_for(cfg["qaoa.p"], n)
    graphs = _graphs_with_opt(cfg, n)
    train_graphs = corpus(n, cfg["corpus.k"], 4, cfg["gnn.train_seed"] + 100 * n)
    seed = cfg["corpus.seed"]
    policy = rl_train(train_graphs, p, episodes=cfg["neural.episodes"], horizon=cfg["neural.horizon"], seed=seed).policy
    meta = meta_train(train_graphs, p, unroll_T=cfg["neural.unroll"], meta_epochs=cfg["neural.meta_epochs"], seed=seed).meta
    tasks = _qaoa_tasks(cfg, graphs, p, "cold", "sgd")
    for label in ("rl+sgd", "meta+sgd"):
        for gid, g, opt in graphs:
            for rep in range(cfg["optimiser.repetitions"]):
                tasks.append({
                    "worker": "neural", "graph": g, "graph_id": gid, "max_cut": opt, "p": p, "init": "cold",
                    "optimiser": label, "seed": seed + rep, "policy": policy, "meta": meta,
                    "rl_steps": cfg["neural.rl_steps"], "meta_steps": cfg["neural.meta_steps"],
                    "sgd_epochs": cfg["neural.sgd_epochs"],
                })
    return tasks


def _preset_table1(cfg):
    tasks = []
    models = {m: _train_gnn(cfg, m, "lgnn")[0] for m in cfg["benchmark.train_sizes"]}
    for m, model in models.items():
        for n in cfg["benchmark.test_sizes"]:
            tasks += _round_tasks(cfg, _graphs_with_opt(cfg, n), f"lgnn-train{m}", "gnn", model)
    return tasks


PRESET_BUILDERS = {
    "fig3": _preset_fig3,
    "fig5a": _preset_fig5a,
    "fig5b": _preset_fig5b,
    "fig6": _preset_optimisers,
    "fig7": _preset_optimisers,
    "fig6/7": _preset_optimisers,
    "fig8": _preset_optimisers,
    "fig9": _preset_fig9,
    "table1": _preset_table1,
}


def summarise(preset: str, rows: Sequence[ResultRow]) -> list[str]:
    """Mean final ratio per (init, optimiser, n, p) block, plus a grid for table1."""
    finals: dict[tuple, dict[tuple, float]] = {}
    for r in rows:
        finals.setdefault((r.init, r.optimiser, r.n, r.p), {})[(r.graph_id, r.seed)] = r.ratio
    lines = []
    if preset == "table1":
        trains = sorted({int(k[0].removeprefix("lgnn-train")) for k in finals})
        tests = sorted({k[2] for k in finals})
        lines.append("train\\test " + " ".join(f"{t:>7d}" for t in tests))
        for m in trains:
            cells = [np.mean(list(finals[(f"lgnn-train{m}", "none", t, 0)].values())) for t in tests]
            lines.append(f"{m:>10d} " + " ".join(f"{c:7.4f}" for c in cells))
        return lines
    for (init, opt, n, p), vals in finals.items():
        lines.append(f"{init:>14s} {opt:>12s} n={n:<3d} p={p:<3d} mean final ratio {np.mean(list(vals.values())):.4f}")
    return lines


def run_preset(cfg: ExperimentConfig, out: str | Path, jobs: int = 1) -> tuple[list[ResultRow], dict]:
    """Build the preset's cells, run them, and write the CSV, timing sidecar and metadata."""
    name = cfg.preset
    if name not in PRESET_BUILDERS:
        raise ConfigError(f"unknown preset {name!r}; choose from {', '.join(PRESET_BUILDERS)}")
    t0 = time.perf_counter()
    rows = run_cells(PRESET_BUILDERS[name](cfg), jobs)
    out = Path(out)
    out.mkdir(parents=True, exist_ok=True)
    stem = name.replace("/", "-")
    (out / f"{stem}.csv").write_text(rows_to_csv(rows), encoding="utf-8")
    (out / f"{stem}.timing.csv").write_text(rows_to_csv(rows, TIMING_COLUMNS), encoding="utf-8")
    meta = {
        "preset": name,
        "config": cfg.to_dict(),
        "config_hash": cfg.config_hash,
        "desk_scale": PRESETS[name]["notes"],
        "columns": list(CSV_COLUMNS),
        "rows": len(rows),
    }
    (out / f"{stem}.meta.json").write_text(json.dumps(meta, indent=2, sort_keys=True) + "\n", encoding="utf-8")
    meta["seconds"] = time.perf_counter() - t0
    return rows, meta


# -- commands ---------------------------------------------------------------------------------


def _out_dir(args) -> Path:
    out = Path(args.out or ".")
    out.mkdir(parents=True, exist_ok=True)
    return out


def _input_graphs(args, cfg) -> list[tuple[int, Graph]]:
    if args.graph:
        return [(0, read_edgelist(args.graph))]
    return list(enumerate(corpus(cfg["corpus.n"], cfg["corpus.k"], cfg["corpus.count"], cfg["corpus.seed"])))


def cmd_generate_graphs(args, cfg) -> int:
    out = _out_dir(args)
    n, k, seed = cfg["corpus.n"], cfg["corpus.k"], cfg["corpus.seed"]
    for i, g in enumerate(corpus(n, k, cfg["corpus.count"], seed)):
        write_edgelist(g, out / f"rrg_n{n}_k{k}_s{seed + i}.edgelist")
    print(f"wrote {cfg['corpus.count']} graphs to {out}")
    return EXIT_OK


def cmd_train_gnn(args, cfg) -> int:
    from .gnn import save_model

    out = _out_dir(args)
    model, res = _train_gnn(cfg, cfg["corpus.n"])
    path = out / "gnn.npz"
    save_model(model, path)
    (out / "gnn.loss.csv").write_text(
        "epoch,loss\n" + "".join(f"{i + 1},{v!r}\n" for i, v in enumerate(res.loss_trace)), encoding="utf-8"
    )
    print(f"final loss {res.loss_trace[-1]:.6f}; checkpoint {path}")
    return EXIT_OK


def cmd_warmstart(args, cfg) -> int:
    from .gnn import warmstart_from_gnn

    out = _out_dir(args)
    method = cfg["qaoa.init"]
    model = _load_checkpoint(cfg["qaoa.checkpoint"]) if method == "gnn" else None
    for gid, g in _input_graphs(args, cfg):
        if method == "gw":
            eps = cfg["qaoa.epsilon"]
            ws = gw_relaxation(g, seed=cfg["corpus.seed"]).warmstart(DEFAULT_EPSILON if eps is None else eps)
        elif method == "gnn":
            eps = cfg["qaoa.epsilon"]
            ws = warmstart_from_gnn(model, g, DEFAULT_GNN_EPSILON if eps is None else eps)
        else:
            raise ConfigError(f"warmstart needs qaoa.init = gw or gnn, got {method!r}")
        path = out / f"warmstart_{gid}.txt"
        write_warmstart(ws, path)
        print(f"{path} " + " ".join(f"{x:.4f}" for x in ws.x_star))
    return EXIT_OK


def cmd_run_qaoa(args, cfg) -> int:
    init = cfg["qaoa.init"]
    model = _load_checkpoint(cfg["qaoa.checkpoint"]) if init == "gnn" and not cfg["qaoa.warmstart"] else None
    ws = None
    if cfg["qaoa.warmstart"]:
        if not Path(cfg["qaoa.warmstart"]).exists():
            raise ConfigError(f"warm-start file {cfg['qaoa.warmstart']} does not exist")
        ws = read_warmstart(cfg["qaoa.warmstart"])
    graphs = [(gid, g, max_cut_oracle(g).cut_value) for gid, g in _input_graphs(args, cfg)]
    tasks = []
    for gid, g, opt in graphs:
        p = depth_for(cfg["qaoa.p"], g.n)
        for t in _qaoa_tasks(cfg, [(gid, g, opt)], p, init, cfg["optimiser.name"], model):
            t["warmstart"] = ws
            tasks.append(t)
    rows = run_cells(tasks, args.jobs)
    for r in rows:
        if r.epoch == cfg["optimiser.epochs"]:
            print(repr(r.ratio))
    if args.out:
        out = _out_dir(args)
        (out / "run-qaoa.csv").write_text(rows_to_csv(rows), encoding="utf-8")
        (out / "run-qaoa.timing.csv").write_text(rows_to_csv(rows, TIMING_COLUMNS), encoding="utf-8")
    return EXIT_OK


def cmd_benchmark(args, cfg) -> int:
    rows, meta = run_preset(cfg, args.out or f"results/{cfg.preset.replace('/', '-')}", args.jobs)
    for line in summarise(cfg.preset, rows):
        print(line)
    print(f"{meta['rows']} rows, config {meta['config_hash'][:12]}, {meta['seconds']:.1f} s")
    return EXIT_OK


def cmd_oracle(args, cfg) -> int:
    if not args.graph:
        raise ConfigError("oracle needs a graph file")
    res = max_cut_oracle(read_edgelist(args.graph))
    v = res.cut_value
    print(int(v) if float(v).is_integer() else v)
    return EXIT_OK


COMMANDS = {
    "generate-graphs": cmd_generate_graphs,
    "train-gnn": cmd_train_gnn,
    "warmstart": cmd_warmstart,
    "run-qaoa": cmd_run_qaoa,
    "benchmark": cmd_benchmark,
    "oracle": cmd_oracle,
}


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="gnnqaoa", description=__doc__.splitlines()[0])
    ap.add_argument("command", choices=sorted(COMMANDS))
    ap.add_argument("preset_arg", nargs="?", metavar="PRESET", help="benchmark preset (same as --preset)")
    ap.add_argument("--graph", help="edge-list file for oracle, warmstart and run-qaoa")
    ap.add_argument("--config", help="INI config file")
    ap.add_argument("--seed", type=int, help="base seed (overrides corpus.seed)")
    ap.add_argument("--out", help="output directory")
    ap.add_argument("--preset", help=f"benchmark preset: {', '.join(PRESETS)}")
    ap.add_argument("--jobs", type=int, default=1, help="worker processes")
    ap.add_argument("--override", action="append", default=[], metavar="SECTION.KEY=VALUE")
    return ap


def main(argv: Sequence[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        preset = args.preset or ""
        if args.preset_arg:
            if args.command == "benchmark" and not preset:
                preset = args.preset_arg
            elif args.command in ("oracle", "warmstart", "run-qaoa") and not args.graph:
                args.graph = args.preset_arg
            else:
                raise ConfigError(f"unexpected argument {args.preset_arg!r}")
        if args.command == "benchmark" and not preset:
            raise ConfigError("benchmark needs a preset")
        if args.jobs < 1:
            raise ConfigError("--jobs must be >= 1")
        if args.graph and not Path(args.graph).exists():
            raise ConfigError(f"graph file {args.graph} does not exist")
        cfg = load_config(args.config, args.override, preset, args.seed)
        return COMMANDS[args.command](args, cfg)
    except ResourceCapError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CAP
    except (NumericalError, ArithmeticError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL
    except (ConfigError, GnnQaoaError, ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
