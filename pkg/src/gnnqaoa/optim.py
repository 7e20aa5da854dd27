"""Optimisers over QAOA angles.

All optimisers minimise ``C(theta) = -s <cut>`` on the flat parameter vector
``[betas..., gammas...]``. The default ``s = 2`` makes ``C`` the negated
expectation of the cost Hamiltonian ``H_C = sum w (1 - Z Z)``; ``"cut"``
(``s = 1``) and ``"edges"`` (``s = 1/W``, per-edge) are available. Each ``*_step`` function takes an :class:`OptState`,
performs one epoch (one optimiser iteration) and appends one trace row.
"""

from __future__ import annotations

import math
import time
import warnings
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np
from scipy import linalg as sla

from .errors import ConfigError, NumericalError
from .graphs import Graph, max_cut_oracle
from .initialisation import DEFAULT_EPSILON, DEFAULT_GNN_EPSILON, WarmStart, gw_relaxation, tqa_init, xavier_init
from .qsim import QaoaCircuit, QaoaParams, apply_single_qubit

__all__ = [
    "QaoaProblem",
    "TraceRow",
    "OptState",
    "NelderMeadResult",
    "OPTIMISERS",
    "DEFAULT_LR",
    "parameter_shift_gradient",
    "shift_rule_gradient",
    "gradient_descent_step",
    "nelder_mead_minimize",
    "nelder_mead_step",
    "qfi_matrix",
    "qng_step",
    "mgd_step",
    "spsa_step",
    "regularise_preconditioner",
    "cost_scale",
    "COST_SCALES",
    "run_optimisation",
    "tqa_dt_scan",
    "epochs_to_ratio",
]

DEFAULT_LR = {
    "sgd": 0.01,
    "adam": 0.01,
    "rmsprop": 0.01,
    "qng": 0.1,
    "mgd": 0.01,
    "1-spsa": 0.01,
    "2-spsa": 0.01,
    "qn-spsa": 0.01,
}
OPTIMISERS = ("sgd", "adam", "rmsprop", "nelder-mead", "qng", "mgd", "1-spsa", "2-spsa", "qn-spsa")
SPSA_VARIANTS = {"one": "1-spsa", "two": "2-spsa", "qn": "qn-spsa"}

QNG_LAMBDA = 1.0
QNG_MAX_COND = 1e12
SPSA_EPS = 0.01
SPSA_SMOOTHING = 0.9
SPSA_FLOOR = 1e-3
MGD_RADIUS = 0.1
COST_SCALES = ("hamiltonian", "cut", "edges")


class QaoaProblem:
    """A circuit together with the exact optimum used for ratios.

    ``scale`` (a number or one of :data:`COST_SCALES`) multiplies the negated
    cut expectation to give the cost.
    """

    def __init__(self, g: Graph, init=None, max_cut: float | None = None, scale="hamiltonian"):
        self.graph = g
        self.init = init
        self.circuit = QaoaCircuit(g, init)
        if max_cut is None:
            max_cut = max_cut_oracle(g).cut_value
        self.max_cut = float(max_cut)
        self.scale = cost_scale(g, scale)

    def expectation(self, theta) -> float:
        return self.circuit.expectation(theta)

    def cost(self, theta) -> float:
        return -self.scale * self.circuit.expectation(theta)

    def gradient(self, theta) -> np.ndarray:
        """Gradient of the cost (not of the cut)."""
        return -self.scale * self.circuit.gradient(theta)

    def fidelity(self, a, b) -> float:
        return self.circuit.fidelity(a, b)

    def ratio(self, expectation: float) -> float:
        return expectation / self.max_cut if self.max_cut > 0 else 1.0


def cost_scale(g: Graph, scale) -> float:
    if scale == "hamiltonian":
        return 2.0
    if scale == "cut":
        return 1.0
    if scale == "edges":
        w = abs(g.total_weight)
        return 1.0 / w if w > 0 else 1.0
    if isinstance(scale, str):
        raise ConfigError(f"unknown cost scale {scale!r}; choose from {', '.join(COST_SCALES)}")
    if not float(scale) > 0:
        raise ConfigError(f"cost scale must be positive, got {scale}")
    return float(scale)


@dataclass(frozen=True)
class TraceRow:
    epoch: int
    cut_expectation: float
    ratio: float
    wall_ms: float


@dataclass
class OptState:
    """Mutable optimiser state for one run.

    ``trace`` holds one row per completed epoch, so ``len(trace) == epoch``.
    ``moments`` carries per-optimiser accumulators keyed by name.
    """

    problem: QaoaProblem
    params: QaoaParams
    epoch: int = 0
    moments: dict = field(default_factory=dict)
    rng: np.random.Generator = field(default_factory=lambda: np.random.default_rng(0))
    trace: list[TraceRow] = field(default_factory=list)
    flags: list[str] = field(default_factory=list)
    t0: float = field(default_factory=time.perf_counter)

    @classmethod
    def start(cls, problem: QaoaProblem, params, seed: int = 0) -> "OptState":
        prm = params if isinstance(params, QaoaParams) else QaoaParams.from_vector(params)
        return cls(problem=problem, params=prm, rng=np.random.default_rng(seed))

    @property
    def theta(self) -> np.ndarray:
        return self.params.to_vector()

    @property
    def dim(self) -> int:
        return 2 * self.params.p

    def evaluate(self, epoch: int | None = None) -> TraceRow:
        e = self.problem.expectation(self.theta)
        if not np.isfinite(e):
            raise NumericalError(f"cost became {e} at epoch {self.epoch}")
        wall = (time.perf_counter() - self.t0) * 1e3
        return TraceRow(self.epoch if epoch is None else epoch, e, self.problem.ratio(e), wall)

    def commit(self, theta: np.ndarray) -> "OptState":
        theta = np.asarray(theta, dtype=float)
        if not np.all(np.isfinite(theta)):
            raise NumericalError(f"non-finite parameters at epoch {self.epoch + 1}")
        self.params = QaoaParams.from_vector(theta)
        self.epoch += 1
        self.trace.append(self.evaluate())
        return self


def _lr(rule: str, lr: float | None) -> float:
    lr = DEFAULT_LR[rule] if lr is None else float(lr)
    if not lr > 0:
        raise ConfigError(f"learning rate must be positive, got {lr}")
    return lr


# -- gradients ----------------------------------------------------------------


def parameter_shift_gradient(g: Graph, params, init=None) -> np.ndarray:
    """Exact gradient of ``<cut>`` built from the statevector Jacobian.

    ``d<C>/d theta_k = 2 Re <d_k psi| C |psi>``. See :func:`shift_rule_gradient`
    for the gate-level two-point shift route.
    """
    circ = QaoaCircuit(g, init)
    psi, dpsi = circ.jacobian(params)
    return 2.0 * np.real(dpsi.conj() @ (circ.diag * psi))


def _edge_parities(g: Graph) -> np.ndarray:
    idx = np.arange(1 << g.n)
    out = np.empty((g.m, idx.size))
    for e, (i, j, _) in enumerate(g.edges):
        out[e] = ((idx >> i) ^ (idx >> j)) & 1
    return out


def shift_rule_gradient(g: Graph, params, init=None) -> np.ndarray:
    """Gradient of ``<cut>`` by the two-point shift rule, gate by gate.

    Every layer is split into commuting gates ``exp(-i t G)`` with ``G^2 = w^2 I``:
    one ``Z_i Z_j`` term per edge and one mixer term per qubit. For such a gate
    ``df/dt = w (f(t + pi/(4w)) - f(t - pi/(4w)))``; the layer derivative is the
    sum over its gates.
    """
    circ = QaoaCircuit(g, init)
    prm = circ._params(params)
    p = prm.p
    par = _edge_parities(g)
    w = g.weights
    terms = circ._mixer_terms

    def run(shift):
        # shift = (layer, "cost"|"mix", gate index, delta) or None
        psi = circ.initial_state
        for k in range(p):
            gam = prm.gammas[k]
            # cost gate per edge: exp(-i gamma w (1 - Z Z)) = exp(-2i gamma w parity)
            phase = np.zeros(psi.size)
            for e in range(g.m):
                t = gam
                if shift is not None and shift[0] == k and shift[1] == "cost" and shift[2] == e:
                    t = gam + shift[3]
                phase += 2.0 * t * w[e] * par[e]
            psi = psi * np.exp(-1j * phase)
            for q in range(g.n):
                t = prm.betas[k]
                if shift is not None and shift[0] == k and shift[1] == "mix" and shift[2] == q:
                    t = t + shift[3]
                gate = math.cos(t) * np.eye(2) - 1j * math.sin(t) * terms[q]
                psi = apply_single_qubit(psi, q, gate)
        return float(np.real(np.vdot(psi, circ.diag * psi)))

    gb = np.zeros(p)
    gg = np.zeros(p)
    for k in range(p):
        for q in range(g.n):
            s = math.pi / 4
            gb[k] += run((k, "mix", q, s)) - run((k, "mix", q, -s))
        for e in range(g.m):
            # edge generator is -w Z Z up to a global phase, eigenvalues +-w
            s = math.pi / (4 * abs(w[e])) if w[e] != 0 else 0.0
            if s:
                gg[k] += abs(w[e]) * (run((k, "cost", e, s)) - run((k, "cost", e, -s)))
    return np.concatenate([gb, gg])


# -- first-order rules ----------------------------------------------------------


def gradient_descent_step(
    state: OptState,
    rule: str = "sgd",
    lr: float | None = None,
    beta1: float = 0.9,
    beta2: float = 0.999,
    rho: float = 0.9,
    eps: float = 1e-8,
) -> OptState:
    """One SGD, Adam or RMSProp update using the exact circuit gradient."""
    if rule not in ("sgd", "adam", "rmsprop"):
        raise ConfigError(f"unknown gradient rule {rule!r}")
    lr = _lr(rule, lr)
    theta = state.theta
    grad = state.problem.gradient(theta)
    if not np.all(np.isfinite(grad)):
        raise NumericalError(f"non-finite gradient at epoch {state.epoch}")
    if rule == "sgd":
        return state.commit(theta - lr * grad)
    if rule == "rmsprop":
        v = state.moments.get("v", np.zeros_like(theta))
        v = rho * v + (1 - rho) * grad**2
        state.moments["v"] = v
        return state.commit(theta - lr * grad / (np.sqrt(v) + eps))
    m = state.moments.get("m", np.zeros_like(theta))
    v = state.moments.get("v", np.zeros_like(theta))
    t = state.moments.get("t", 0) + 1
    m = beta1 * m + (1 - beta1) * grad
    v = beta2 * v + (1 - beta2) * grad**2
    state.moments.update(m=m, v=v, t=t)
    mhat = m / (1 - beta1**t)
    vhat = v / (1 - beta2**t)
    return state.commit(theta - lr * mhat / (np.sqrt(vhat) + eps))


# -- Nelder-Mead ------------------------------------------------------------------


@dataclass
class NelderMeadResult:
    x: np.ndarray
    fun: float
    evals: int
    iterations: int
    budget_exhausted: bool
    converged: bool


class _Simplex:
    """Nelder-Mead state: reflect (1), expand (2), contract (1/2), shrink (1/2)."""

    def __init__(self, fn: Callable[[np.ndarray], float], x0, step: float = 0.1):
        x0 = np.asarray(x0, dtype=float)
        if not np.all(np.isfinite(x0)):
            raise ValueError("initial point must be finite")
        self.fn = fn
        self.evals = 0
        d = x0.size
        pts = [x0] + [x0 + step * np.eye(d)[i] for i in range(d)]
        self.pts = np.array(pts)
        self.vals = np.array([self._f(x) for x in self.pts])
        self._order()

    def _f(self, x) -> float:
        self.evals += 1
        v = float(self.fn(x))
        if not np.isfinite(v):
            raise NumericalError("Nelder-Mead objective returned a non-finite value")
        return v

    def _order(self):
        # stable sort keeps older vertices first on ties
        idx = np.argsort(self.vals, kind="stable")
        self.pts, self.vals = self.pts[idx], self.vals[idx]

    @property
    def best(self) -> tuple[np.ndarray, float]:
        return self.pts[0].copy(), float(self.vals[0])

    def spread(self) -> float:
        return float(self.vals[-1] - self.vals[0])

    def iterate(self) -> None:
        centroid = self.pts[:-1].mean(axis=0)
        worst, fw = self.pts[-1], self.vals[-1]
        xr = centroid + (centroid - worst)
        fr = self._f(xr)
        if fr < self.vals[0]:
            xe = centroid + 2.0 * (centroid - worst)
            fe = self._f(xe)
            self.pts[-1], self.vals[-1] = (xe, fe) if fe < fr else (xr, fr)
        elif fr < self.vals[-2]:
            self.pts[-1], self.vals[-1] = xr, fr
        else:
            if fr < fw:
                xc = centroid + 0.5 * (xr - centroid)
            else:
                xc = centroid + 0.5 * (worst - centroid)
            fc = self._f(xc)
            if fc < min(fr, fw):
                self.pts[-1], self.vals[-1] = xc, fc
            else:
                for i in range(1, len(self.pts)):
                    self.pts[i] = self.pts[0] + 0.5 * (self.pts[i] - self.pts[0])
                    self.vals[i] = self._f(self.pts[i])
        self._order()


def nelder_mead_minimize(
    cost_fn: Callable[[np.ndarray], float],
    x0: Sequence[float],
    budget: int = 200,
    step: float = 0.1,
    ftol: float = 1e-12,
    xtol: float = 1e-10,
) -> NelderMeadResult:
    """Minimise ``cost_fn`` with at most ``budget`` evaluations.

    Deterministic: no randomness, ties resolved by vertex age. When the
    budget runs out the best vertex so far is returned with
    ``budget_exhausted=True``.
    """
    x0 = np.asarray(x0, dtype=float)
    if budget < x0.size + 1:
        raise ValueError(f"budget {budget} cannot build the initial simplex of {x0.size + 1} points")
    sx = _Simplex(cost_fn, x0, step)
    it = 0
    converged = False
    # worst case per iteration is a shrink: dim + 2 evaluations
    while sx.evals + x0.size + 2 <= budget:
        size = float(np.max(np.abs(sx.pts[1:] - sx.pts[0])))
        if sx.spread() <= ftol and size <= xtol:
            converged = True
            break
        sx.iterate()
        it += 1
    x, f = sx.best
    return NelderMeadResult(x, f, sx.evals, it, budget_exhausted=not converged, converged=converged)


def nelder_mead_step(state: OptState, step: float = 0.1) -> OptState:
    """One simplex iteration; the trace follows the best vertex."""
    sx = state.moments.get("simplex")
    if sx is None:
        sx = _Simplex(state.problem.cost, state.theta, step)
        state.moments["simplex"] = sx
    sx.iterate()
    state.moments["evals"] = sx.evals
    return state.commit(sx.best[0])


# -- quantum natural gradient -------------------------------------------------------


def qfi_matrix(g: Graph, params, init=None) -> np.ndarray:
    """Fubini-Study metric ``Re{<d_i psi|d_j psi> - <d_i psi|psi><psi|d_j psi>}``."""
    return _metric(*QaoaCircuit(g, init).jacobian(params))


def _metric(psi: np.ndarray, dpsi: np.ndarray) -> np.ndarray:
    gram = dpsi.conj() @ dpsi.T
    b = dpsi.conj() @ psi
    m = np.real(gram - np.outer(b, b.conj()))
    return 0.5 * (m + m.T)


def _spd_solve(mat: np.ndarray, rhs: np.ndarray, lam: float, label: str, state: OptState | None):
    d = mat.shape[0]
    for _ in range(12):
        reg = mat + lam * np.eye(d)
        try:
            if np.linalg.cond(reg) > QNG_MAX_COND:
                raise np.linalg.LinAlgError("ill-conditioned")
            return sla.cho_solve(sla.cho_factor(reg), rhs), lam
        except (np.linalg.LinAlgError, sla.LinAlgError):
            # a zero ridge cannot grow by scaling, so seed it
            lam = 10.0 * lam if lam > 0 else 1e-8
            warnings.warn(f"{label}: ill-conditioned solve, raising regulariser to {lam:g}", RuntimeWarning, stacklevel=3)
            if state is not None:
                state.flags.append(f"epoch {state.epoch + 1}: {label} regulariser raised to {lam:g}")
    raise NumericalError(f"{label}: solve failed after raising the regulariser to {lam:g}")


def qng_step(state: OptState, lr: float | None = None, lambda_reg: float = QNG_LAMBDA) -> OptState:
    """``theta <- theta - lr (g + lambda I)^{-1} grad C`` with a Cholesky solve."""
    lr = _lr("qng", lr)
    theta = state.theta
    psi, dpsi = state.problem.circuit.jacobian(theta)
    metric = _metric(psi, dpsi)
    grad = -2.0 * state.problem.scale * np.real(dpsi.conj() @ (state.problem.circuit.diag * psi))
    step, _ = _spd_solve(metric, grad, lambda_reg, "qng", state)
    return state.commit(theta - lr * step)


# -- model gradient descent -----------------------------------------------------------


def _quad_features(dx: np.ndarray) -> np.ndarray:
    n, d = dx.shape
    iu = np.triu_indices(d)
    quad = (dx[:, :, None] * dx[:, None, :])[:, iu[0], iu[1]]
    return np.hstack([np.ones((n, 1)), dx, quad])


def _fit_gradient(dx: np.ndarray, y: np.ndarray) -> tuple[np.ndarray, str]:
    d = dx.shape[1]
    feats = _quad_features(dx)
    if dx.shape[0] >= feats.shape[1]:
        coef, _, rank, _ = np.linalg.lstsq(feats, y, rcond=None)
        if rank == feats.shape[1]:
            return coef[1 : d + 1], "quadratic"
    lin = np.hstack([np.ones((dx.shape[0], 1)), dx])
    coef, *_ = np.linalg.lstsq(lin, y, rcond=None)
    return coef[1 : d + 1], "linear"


def _ball_samples(rng: np.random.Generator, count: int, d: int, radius: float) -> np.ndarray:
    u = rng.standard_normal((count, d))
    u /= np.linalg.norm(u, axis=1, keepdims=True)
    r = radius * rng.random(count) ** (1.0 / d)
    return u * r[:, None]


def mgd_step(
    state: OptState,
    radius: float = MGD_RADIUS,
    sample_count: int | None = None,
    lr: float | None = None,
    history: int | None = None,
) -> OptState:
    """Model gradient descent: fit a quadratic surrogate around ``theta``.

    Fresh points are drawn uniformly from the L2 ball of ``radius``; earlier
    evaluations that still lie in the ball are reused. When the design
    matrix is rank deficient the fit falls back to a linear model.
    """
    if not radius > 0:
        raise ValueError(f"radius must be positive, got {radius}")
    d = state.dim
    count = 3 * d if sample_count is None else int(sample_count)
    if count < d + 2:
        raise ValueError(f"sample_count must be >= dim + 2 = {d + 2}, got {count}")
    lr = _lr("mgd", lr)
    theta = state.theta
    pts = theta + _ball_samples(state.rng, count, d, radius)
    vals = np.array([state.problem.cost(x) for x in pts])
    old_x, old_y = state.moments.get("samples", (np.zeros((0, d)), np.zeros(0)))
    keep = np.linalg.norm(old_x - theta, axis=1) <= radius
    xs = np.vstack([old_x[keep], pts])
    ys = np.concatenate([old_y[keep], vals])
    cap = history if history is not None else 4 * (1 + d + d * (d + 1) // 2)
    xs, ys = xs[-cap:], ys[-cap:]
    state.moments["samples"] = (xs, ys)
    grad, kind = _fit_gradient(xs - theta, ys)
    state.moments["fit"] = kind
    return state.commit(theta - lr * grad)


# -- SPSA family ----------------------------------------------------------------------


def regularise_preconditioner(mat: np.ndarray, floor: float = SPSA_FLOOR) -> np.ndarray | None:
    """Symmetrise, take the matrix absolute value, floor eigenvalues.

    Returns ``None`` if the result is not usable (non-finite input).
    """
    if not np.all(np.isfinite(mat)):
        return None
    sym = 0.5 * (mat + mat.T)
    vals, vecs = np.linalg.eigh(sym)
    vals = np.maximum(np.abs(vals), floor)
    out = (vecs * vals) @ vecs.T
    if not np.all(np.isfinite(out)) or np.min(np.linalg.eigvalsh(out)) <= 0:
        return None
    return out


def _signs(rng: np.random.Generator, d: int) -> np.ndarray:
    return rng.choice(np.array([-1.0, 1.0]), size=d)


def spsa_gradient(cost: Callable, theta: np.ndarray, delta: np.ndarray, eps: float) -> np.ndarray:
    return (cost(theta + eps * delta) - cost(theta - eps * delta)) / (2 * eps) * delta


def spsa_curvature(f: Callable, theta, d1, d2, eps: float, prefactor: float = -0.5) -> np.ndarray:
    """Four-point stencil estimate ``prefactor * dF/(2 eps^2) * (d1 d2^T + d2 d1^T)/2``."""
    df = f(theta + eps * d1 + eps * d2) - f(theta + eps * d1) - f(theta - eps * d1 + eps * d2) + f(theta - eps * d1)
    outer = 0.5 * (np.outer(d1, d2) + np.outer(d2, d1))
    return prefactor * df / (2 * eps**2) * outer


def spsa_step(
    state: OptState,
    variant: str = "one",
    eps: float = SPSA_EPS,
    lr: float | None = None,
    smoothing: float = SPSA_SMOOTHING,
    floor: float = SPSA_FLOOR,
    hessian_prefactor: bool = True,
) -> OptState:
    """One 1-SPSA, 2-SPSA or QN-SPSA update.

    The second-order variants average their curvature estimate exponentially
    (``smoothing``), starting from the identity, and regularise it with
    :func:`regularise_preconditioner`. ``hessian_prefactor=False`` drops the
    ``-1/2`` factor from the 2-SPSA Hessian estimate.
    """
    variant = SPSA_VARIANTS.get(variant, variant)
    if variant not in ("1-spsa", "2-spsa", "qn-spsa"):
        raise ConfigError(f"unknown SPSA variant {variant!r}")
    if not eps > 0:
        raise ValueError(f"eps must be positive, got {eps}")
    lr = _lr(variant, lr)
    d = state.dim
    theta = state.theta
    cost = state.problem.cost
    d1 = _signs(state.rng, d)
    grad = spsa_gradient(cost, theta, d1, eps)
    if variant == "1-spsa":
        return state.commit(theta - lr * grad)
    d2 = _signs(state.rng, d)
    if variant == "2-spsa":
        est = spsa_curvature(cost, theta, d1, d2, eps, -0.5 if hessian_prefactor else 1.0)
    else:
        est = spsa_curvature(lambda x: state.problem.fidelity(theta, x), theta, d1, d2, eps, -0.5)
    avg = state.moments.get("precond", np.eye(d))
    k = state.moments.get("precond_count", 0)
    if smoothing == "running":
        # cumulative mean over all steps so far, identity counted as the first sample
        avg = (k + 1) / (k + 2) * avg + est / (k + 2)
    else:
        avg = smoothing * avg + (1 - smoothing) * est
    state.moments["precond_count"] = k + 1
    state.moments["precond"] = avg
    pre = regularise_preconditioner(avg, floor)
    if pre is None:
        state.flags.append(f"epoch {state.epoch + 1}: {variant} preconditioner unusable, identity used")
        step = grad
    else:
        step = np.linalg.solve(pre, grad)
    return state.commit(theta - lr * step)


# -- driver ---------------------------------------------------------------------------------


def _initial_params(angle_init: str, p: int, seed: int) -> QaoaParams:
    if angle_init == "xavier":
        return xavier_init(p, seed)
    if angle_init == "tqa":
        return tqa_init(p)
    if angle_init == "zeros":
        return QaoaParams.zeros(p)
    raise ConfigError(f"unknown angle initialisation {angle_init!r}")


def _resolve_init(g: Graph, init_method: str, warmstart, seed: int, epsilon: float | None, model):
    if init_method in ("cold", "tqa"):
        return None
    if init_method == "warm":
        if warmstart is None:
            raise ConfigError("init 'warm' needs an explicit warm start")
        return warmstart
    if init_method == "gw":
        eps = DEFAULT_EPSILON if epsilon is None else epsilon
        return warmstart or gw_relaxation(g, seed=seed).warmstart(eps)
    if init_method == "gnn":
        if warmstart is not None:
            return warmstart
        if model is None:
            raise ConfigError("init 'gnn' needs a trained model or a warm start")
        from .gnn import warmstart_from_gnn

        return warmstart_from_gnn(model, g, DEFAULT_GNN_EPSILON if epsilon is None else epsilon)
    raise ConfigError(f"unknown init method {init_method!r}")


@dataclass
class OptimisationTrace:
    rows: list[TraceRow]
    params: QaoaParams
    flags: list[str]
    init: WarmStart | None = None

    @property
    def final_ratio(self) -> float:
        return self.rows[-1].ratio


def run_optimisation(
    g: Graph,
    init_method: str = "cold",
    optimiser: str = "sgd",
    epochs: int = 100,
    seed: int = 0,
    p: int = 1,
    angle_init: str | None = None,
    params=None,
    warmstart: WarmStart | None = None,
    model=None,
    epsilon: float | None = None,
    lr: float | None = None,
    max_cut: float | None = None,
    scale="hamiltonian",
    options: dict | None = None,
) -> OptimisationTrace:
    """Optimise a QAOA instance and return the per-epoch trace.

    Row 0 is the evaluation of the initial parameters. ``angle_init``
    defaults to ``"tqa"`` for the ``tqa`` method and ``"xavier"`` otherwise;
    explicit ``params`` override it. ``epsilon`` defaults to 0.25 for GW
    and 0.02 for GNN warm starts. ``options`` are passed to the step
    function (e.g. ``radius`` for MGD, ``hessian_prefactor`` for 2-SPSA).
    """
    if optimiser not in OPTIMISERS:
        raise ConfigError(f"unknown optimiser {optimiser!r}; choose from {', '.join(OPTIMISERS)}")
    if epochs < 0:
        raise ValueError(f"epochs must be >= 0, got {epochs}")
    init = _resolve_init(g, init_method, warmstart, seed, epsilon, model)
    if params is None:
        params = _initial_params(angle_init or ("tqa" if init_method == "tqa" else "xavier"), p, seed)
    problem = QaoaProblem(g, init, max_cut, scale)
    state = OptState.start(problem, params, seed)
    first = state.evaluate(0)
    opts = dict(options or {})
    for _ in range(epochs):
        if optimiser in ("sgd", "adam", "rmsprop"):
            gradient_descent_step(state, optimiser, lr, **opts)
        elif optimiser == "nelder-mead":
            nelder_mead_step(state, **opts)
        elif optimiser == "qng":
            qng_step(state, lr, **opts)
        elif optimiser == "mgd":
            mgd_step(state, lr=lr, **opts)
        else:
            spsa_step(state, optimiser, lr=lr, **opts)
    return OptimisationTrace([first, *state.trace], state.params, state.flags, init)


def epochs_to_ratio(rows: Sequence[TraceRow], target: float) -> int | None:
    """First epoch whose ratio reaches ``target`` (``None`` if never)."""
    for r in rows:
        if r.ratio >= target:
            return r.epoch
    return None


def tqa_dt_scan(
    g: Graph, p: int, dts: Sequence[float] | None = None, init=None
) -> tuple[float, np.ndarray, np.ndarray]:
    """Evaluate the TQA schedule over a grid of ``dt`` values.

    Returns ``(best_dt, dts, expectations)``.
    """
    dts = np.linspace(0.1, 1.5, 15) if dts is None else np.asarray(dts, dtype=float)
    circ = QaoaCircuit(g, init)
    vals = np.array([circ.expectation(tqa_init(p, float(dt))) for dt in dts])
    return float(dts[int(np.argmax(vals))]), dts, vals
