"""Parameter and state initialisation for QAOA.

* ``tqa_init`` -- linear annealing-inspired angle schedule.
* ``xavier_init`` -- uniform random angles.
* ``gw_relaxation`` -- Max-Cut SDP by low-rank (Burer-Monteiro) ascent plus
  random-hyperplane rounding.
* ``regularise`` -- clamp a relaxed solution into ``[eps, 1 - eps]`` and
  derive the warm-start rotation angles.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np

from .graphs import Graph, cut_value
from .qsim import QaoaParams

__all__ = [
    "WarmStart",
    "TqaSchedule",
    "GwResult",
    "DEFAULT_TQA_DT",
    "DEFAULT_EPSILON",
    "DEFAULT_GNN_EPSILON",
    "DEFAULT_GW_ROUNDS",
    "tqa_init",
    "xavier_bound",
    "xavier_init",
    "gw_relaxation",
    "regularise",
    "write_warmstart",
    "read_warmstart",
]

DEFAULT_TQA_DT = 0.75
DEFAULT_EPSILON = 0.25
# soft GNN probabilities already sit inside (0, 1); a light clamp keeps more of their signal
DEFAULT_GNN_EPSILON = 0.02
DEFAULT_GW_ROUNDS = 50


@dataclass(frozen=True, eq=False)
class WarmStart:
    """Relaxed solution ``x_star`` plus the clamp ``epsilon``.

    ``x_tilde`` is the clamped vector actually loaded into the circuit and
    ``thetas`` the matching ``R_y`` angles.
    """

    x_star: np.ndarray
    epsilon: float = 0.0
    source: str = "manual"
    x_tilde: np.ndarray = field(init=False, repr=False)
    thetas: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        x = np.array(self.x_star, dtype=float).reshape(-1)
        eps = float(self.epsilon)
        if not 0.0 <= eps <= 0.5:
            raise ValueError(f"epsilon must lie in [0, 0.5], got {eps}")
        if np.any(~np.isfinite(x)) or np.any((x < 0) | (x > 1)):
            raise ValueError("x_star entries must lie in [0, 1]")
        xt = np.clip(x, eps, 1.0 - eps)
        th = 2.0 * np.arcsin(np.sqrt(xt))
        for arr in (x, xt, th):
            arr.setflags(write=False)
        object.__setattr__(self, "x_star", x)
        object.__setattr__(self, "epsilon", eps)
        object.__setattr__(self, "x_tilde", xt)
        object.__setattr__(self, "thetas", th)

    def __eq__(self, other):
        if not isinstance(other, WarmStart):
            return NotImplemented
        return (
            np.array_equal(self.x_star, other.x_star)
            and self.epsilon == other.epsilon
            and self.source == other.source
        )

    __hash__ = None

    @property
    def n(self) -> int:
        return self.x_star.size


def regularise(x_star: Sequence[float], epsilon: float, source: str = "manual") -> WarmStart:
    return WarmStart(np.asarray(x_star, dtype=float), epsilon, source)


@dataclass(frozen=True)
class TqaSchedule:
    p: int
    dt: float = DEFAULT_TQA_DT

    def __post_init__(self):
        if self.p < 1:
            raise ValueError(f"p must be >= 1, got {self.p}")
        if not self.dt > 0:
            raise ValueError(f"dt must be positive, got {self.dt}")

    def params(self) -> QaoaParams:
        k = np.arange(1, self.p + 1)
        frac = k / self.p
        return QaoaParams(betas=(1.0 - frac) * self.dt, gammas=frac * self.dt)


def tqa_init(p: int, dt: float = DEFAULT_TQA_DT) -> QaoaParams:
    """``gamma_k = (k/p) dt``, ``beta_k = (1 - k/p) dt`` for ``k = 1..p``."""
    return TqaSchedule(p, dt).params()


def xavier_bound(p: int) -> float:
    # fan_in = fan_out = p + 1
    return math.sqrt(6.0 / (2 * p + 2))


def xavier_init(p: int, seed: int = 0) -> QaoaParams:
    if p < 1:
        raise ValueError(f"p must be >= 1, got {p}")
    b = xavier_bound(p)
    rng = np.random.default_rng(seed)
    return QaoaParams.from_vector(rng.uniform(-b, b, size=2 * p))


@dataclass(frozen=True)
class GwResult:
    """Output of :func:`gw_relaxation`."""

    x_star: np.ndarray  # best rounded assignment as bits
    best_cut: float
    soft: np.ndarray  # (1 + V[:, 0]) / 2
    sdp_value: float
    vectors: np.ndarray
    iterations: int
    converged: bool
    objective_trace: tuple[float, ...] = ()

    def warmstart(self, epsilon: float = DEFAULT_EPSILON, soft: bool = False) -> WarmStart:
        return regularise(self.soft if soft else self.x_star, epsilon, source="gw")


def _sdp_objective(lap: np.ndarray, v: np.ndarray) -> float:
    return 0.25 * float(np.sum(v * (lap @ v)))


def _normalise_rows(v: np.ndarray) -> np.ndarray:
    norms = np.linalg.norm(v, axis=1, keepdims=True)
    norms[norms == 0] = 1.0
    return v / norms


def gw_relaxation(
    g: Graph,
    rank: int | None = None,
    rounds: int = DEFAULT_GW_ROUNDS,
    seed: int = 0,
    max_iter: int = 2000,
    tol: float = 1e-9,
    step: float = 1.0,
) -> GwResult:
    """Goemans-Williamson with a Burer-Monteiro SDP solve.

    Maximises ``1/4 <L, V V^T>`` over ``V`` with unit rows by projected
    gradient ascent with backtracking (the objective never decreases on an
    accepted step), then draws ``rounds`` random hyperplanes and keeps the
    best cut.
    """
    n = g.n
    if rank is None:
        rank = max(2, math.ceil(math.sqrt(2 * n)))
    if rank < 2:
        raise ValueError(f"rank must be >= 2, got {rank}")
    if rounds < 1:
        raise ValueError(f"rounds must be >= 1, got {rounds}")
    rng = np.random.default_rng(seed)
    lap = g.laplacian
    v = _normalise_rows(rng.standard_normal((n, rank)))
    obj = _sdp_objective(lap, v)
    trace = [obj]
    lr = step
    converged = g.m == 0
    it = 0
    while not converged and it < max_iter:
        it += 1
        grad = 0.5 * lap @ v
        while True:
            cand = _normalise_rows(v + lr * grad)
            cand_obj = _sdp_objective(lap, cand)
            if cand_obj >= obj or lr < 1e-12:
                break
            lr *= 0.5
        if cand_obj < obj:
            converged = True
            break
        gain = cand_obj - obj
        v, obj = cand, cand_obj
        trace.append(obj)
        lr = min(lr * 2.0, 1e3)
        if gain <= tol * max(1.0, abs(obj)):
            converged = True
    if not converged:
        warnings.warn(
            f"GW ascent hit the iteration cap ({max_iter}); returning best iterate",
            RuntimeWarning,
            stacklevel=2,
        )
    best_bits, best_cut = None, -np.inf
    for _ in range(rounds):
        r = rng.standard_normal(rank)
        z = np.where(v @ r >= 0, 1, -1)
        c = cut_value(g, z)
        if c > best_cut:
            best_cut, best_bits = c, (z + 1) // 2
    soft = np.clip((1.0 + v[:, 0]) / 2.0, 0.0, 1.0)
    return GwResult(
        x_star=best_bits.astype(float),
        best_cut=float(best_cut),
        soft=soft,
        sdp_value=obj,
        vectors=v,
        iterations=it,
        converged=converged,
        objective_trace=tuple(trace),
    )


def write_warmstart(ws: WarmStart, path: str | Path) -> None:
    lines = [f"# epsilon {ws.epsilon!r}", f"# source {ws.source}", f"# n {ws.n}"]
    for i, (x, th) in enumerate(zip(ws.x_star, ws.thetas)):
        lines.append(f"{i} {float(x)!r} {float(th)!r}")
    Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")


def read_warmstart(path: str | Path) -> WarmStart:
    meta: dict[str, str] = {}
    xs: list[float] = []
    for ln in Path(path).read_text(encoding="utf-8").splitlines():
        if not ln.strip():
            continue
        if ln.startswith("#"):
            key, _, val = ln[1:].strip().partition(" ")
            meta[key] = val.strip()
            continue
        i, x, _ = ln.split()
        if int(i) != len(xs):
            raise ValueError(f"{path}: node lines must be consecutive from 0")
        xs.append(float(x))
    if "epsilon" not in meta:
        raise ValueError(f"{path}: missing epsilon header")
    return WarmStart(np.array(xs), float(meta["epsilon"]), meta.get("source", "manual"))
