"""Dense statevector simulation of vanilla and warm-started QAOA.

Qubit ``q`` is bit ``q`` (least significant first) of the basis index.
States are plain ``complex128`` arrays of length ``2**n``.

The cost unitary is ``exp(-i gamma H_C)`` with ``H_C = sum w_ij (1 - Z_i Z_j)``,
i.e. twice the cut operator; expectations reported by this module are of
the cut operator itself, ``1/2 sum w_ij (1 - Z_i Z_j)``.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass
from functools import cached_property
from typing import Sequence

import numpy as np

from .errors import ResourceCapError
from .graphs import Graph

MAX_QUBITS = 20

__all__ = [
    "MAX_QUBITS",
    "QaoaParams",
    "WarmStartMixer",
    "WarmStartWarning",
    "QaoaCircuit",
    "prepare_plus_state",
    "prepare_warmstart_state",
    "apply_cost_layer",
    "apply_mixer_layer",
    "apply_single_qubit",
    "cut_diagonal",
    "expectation_diag",
    "qaoa_state",
    "qaoa_expectation",
    "fidelity",
    "statevector_jacobian",
]

_X = np.array([[0.0, 1.0], [1.0, 0.0]], dtype=complex)
_I2 = np.eye(2, dtype=complex)


class WarmStartWarning(UserWarning):
    """Warm-start value exactly 0 or 1: that qubit is frozen under ``H_C``."""


@dataclass(frozen=True, eq=False)
class QaoaParams:
    """The ``2p`` QAOA angles. Flat vector order is ``[betas..., gammas...]``."""

    betas: np.ndarray
    gammas: np.ndarray

    def __post_init__(self):
        b = np.array(self.betas, dtype=float).reshape(-1)
        g = np.array(self.gammas, dtype=float).reshape(-1)
        if b.shape != g.shape:
            raise ValueError(f"betas {b.shape} and gammas {g.shape} must have equal length")
        if b.size == 0:
            raise ValueError("QAOA depth p must be >= 1")
        if not (np.all(np.isfinite(b)) and np.all(np.isfinite(g))):
            raise ValueError("QAOA angles must be finite")
        b.setflags(write=False)
        g.setflags(write=False)
        object.__setattr__(self, "betas", b)
        object.__setattr__(self, "gammas", g)

    def __eq__(self, other):
        if not isinstance(other, QaoaParams):
            return NotImplemented
        return np.array_equal(self.betas, other.betas) and np.array_equal(self.gammas, other.gammas)

    __hash__ = None

    @property
    def p(self) -> int:
        return self.betas.size

    def to_vector(self) -> np.ndarray:
        return np.concatenate([self.betas, self.gammas])

    @classmethod
    def from_vector(cls, theta: Sequence[float]) -> "QaoaParams":
        theta = np.asarray(theta, dtype=float).reshape(-1)
        if theta.size % 2:
            raise ValueError(f"flat parameter vector must have even length, got {theta.size}")
        p = theta.size // 2
        return cls(theta[:p], theta[p:])

    @classmethod
    def zeros(cls, p: int) -> "QaoaParams":
        return cls(np.zeros(p), np.zeros(p))


@dataclass(frozen=True)
class WarmStartMixer:
    """Per-qubit warm-start mixer terms, shape ``(n, 2, 2)``."""

    matrices: np.ndarray

    @classmethod
    def from_x(cls, x: Sequence[float]) -> "WarmStartMixer":
        x = np.asarray(x, dtype=float)
        off = -2.0 * np.sqrt(x * (1.0 - x))
        m = np.empty((x.size, 2, 2))
        m[:, 0, 0] = 2.0 * x - 1.0
        m[:, 1, 1] = 1.0 - 2.0 * x
        m[:, 0, 1] = off
        m[:, 1, 0] = off
        return cls(m)

    @property
    def n(self) -> int:
        return self.matrices.shape[0]


def _check_n(n: int) -> None:
    if not 1 <= n <= MAX_QUBITS:
        raise ResourceCapError(f"statevector limited to 1 <= n <= {MAX_QUBITS}, got n={n}")


def _n_of(psi: np.ndarray) -> int:
    n = int(psi.size).bit_length() - 1
    if psi.ndim != 1 or (1 << n) != psi.size:
        raise ValueError(f"statevector length {psi.size} is not a power of two")
    return n


def _warm_x(init) -> np.ndarray | None:
    if init is None or (isinstance(init, str) and init == "cold"):
        return None
    x = getattr(init, "x_tilde", init)
    return np.asarray(x, dtype=float)


def prepare_plus_state(n: int) -> np.ndarray:
    _check_n(n)
    return np.full(1 << n, 2.0 ** (-n / 2), dtype=complex)


def prepare_warmstart_state(ws) -> np.ndarray:
    """Product state ``prod_i R_y(theta_i)|0>`` with ``theta_i = 2 asin(sqrt(x_i))``.

    ``ws`` is a :class:`~gnnqaoa.initialisation.WarmStart` (its clamped
    ``x_tilde`` is used) or a raw array of values in ``[0, 1]``.
    """
    x = _warm_x(ws)
    if x is None:
        raise ValueError("warm-start state needs x* values")
    _check_n(x.size)
    if np.any((x < 0) | (x > 1)):
        raise ValueError("warm-start values must lie in [0, 1]")
    if np.any((x == 0) | (x == 1)):
        warnings.warn(
            "unregularised warm-start value 0 or 1: affected qubits start in a basis state",
            WarmStartWarning,
            stacklevel=2,
        )
    psi = np.ones(1, dtype=complex)
    for xi in x:
        # qubit q ends up as bit q: prepend higher qubits on the left
        psi = np.kron(np.array([np.sqrt(1.0 - xi), np.sqrt(xi)], dtype=complex), psi)
    return psi


def apply_single_qubit(psi: np.ndarray, q: int, mat: np.ndarray) -> np.ndarray:
    n = _n_of(psi)
    view = psi.reshape(1 << (n - q - 1), 2, 1 << q)
    return np.einsum("ab,ibj->iaj", mat, view).reshape(-1)


def cut_diagonal(g: Graph) -> np.ndarray:
    """Cut value of every computational basis state (real, length ``2**n``)."""
    _check_n(g.n)
    idx = np.arange(1 << g.n, dtype=np.int64)
    diag = np.zeros(idx.size)
    for (i, j), w in zip(g.edge_index, g.weights):
        diag += w * (((idx >> i) ^ (idx >> j)) & 1)
    return diag


def expectation_diag(psi: np.ndarray, diag: np.ndarray) -> float:
    return float(np.dot(diag, (psi.conj() * psi).real))


def apply_cost_layer(psi: np.ndarray, g: Graph, gamma: float, diag: np.ndarray | None = None) -> np.ndarray:
    """``exp(-i gamma sum w (1 - Z_i Z_j))`` -- a diagonal phase per basis state."""
    if g.n != _n_of(psi):
        raise ValueError(f"graph has {g.n} nodes but state has {_n_of(psi)} qubits")
    if diag is None:
        diag = cut_diagonal(g)
    return psi * np.exp(-2j * gamma * diag)


def _mixer_gate(beta: float, term: np.ndarray) -> np.ndarray:
    # term**2 == I, so exp(-i beta term) = cos(beta) I - i sin(beta) term
    return np.cos(beta) * _I2 - 1j * np.sin(beta) * term


def apply_mixer_layer(psi: np.ndarray, beta: float, mixer: WarmStartMixer | str | None = None) -> np.ndarray:
    n = _n_of(psi)
    if mixer is None or (isinstance(mixer, str) and mixer == "standard"):
        gate = _mixer_gate(beta, _X)
        for q in range(n):
            psi = apply_single_qubit(psi, q, gate)
        return psi
    if mixer.n != n:
        raise ValueError(f"mixer acts on {mixer.n} qubits but state has {n}")
    for q in range(n):
        psi = apply_single_qubit(psi, q, _mixer_gate(beta, mixer.matrices[q]))
    return psi


class QaoaCircuit:
    """A QAOA ansatz bound to one graph and one initialisation.

    ``init`` is ``None``/``"cold"`` for ``|+>^n`` with the ``sum X`` mixer,
    or a warm start (anything exposing ``x_tilde``, or a raw array) for the
    product initial state and its matching mixer.
    """

    def __init__(self, g: Graph, init=None):
        _check_n(g.n)
        self.graph = g
        self.n = g.n
        x = _warm_x(init)
        if x is not None and x.size != g.n:
            raise ValueError(f"warm start has {x.size} values for a {g.n}-node graph")
        self.warm_x = x
        self.mixer = None if x is None else WarmStartMixer.from_x(x)

    @cached_property
    def diag(self) -> np.ndarray:
        return cut_diagonal(self.graph)

    @cached_property
    def initial_state(self) -> np.ndarray:
        if self.warm_x is None:
            return prepare_plus_state(self.n)
        with warnings.catch_warnings():
            warnings.simplefilter("ignore", WarmStartWarning)
            return prepare_warmstart_state(self.warm_x)

    @cached_property
    def _mixer_terms(self) -> np.ndarray:
        if self.mixer is None:
            return np.broadcast_to(_X, (self.n, 2, 2))
        return self.mixer.matrices.astype(complex)

    @property
    def max_cut_upper(self) -> float:
        return float(self.diag.max())

    # -- gate primitives -------------------------------------------------
    def _cost(self, psi, gamma):
        return psi * np.exp(-2j * gamma * self.diag)

    def _cost_gen(self, psi):
        # H_C = 2 * cut operator
        return 2.0 * self.diag * psi

    def _mix(self, psi, beta):
        for q in range(self.n):
            psi = apply_single_qubit(psi, q, _mixer_gate(beta, self._mixer_terms[q]))
        return psi

    def _mix_gen(self, psi):
        out = np.zeros_like(psi)
        for q in range(self.n):
            out += apply_single_qubit(psi, q, self._mixer_terms[q])
        return out

    @staticmethod
    def _params(params) -> QaoaParams:
        if isinstance(params, QaoaParams):
            return params
        return QaoaParams.from_vector(params)

    # -- public ------------------------------------------------------------
    def state(self, params) -> np.ndarray:
        prm = self._params(params)
        psi = self.initial_state
        for b, g in zip(prm.betas, prm.gammas):
            psi = self._mix(self._cost(psi, g), b)
        return psi

    def expectation(self, params) -> float:
        return expectation_diag(self.state(params), self.diag)

    def cost(self, params) -> float:
        """Quantity optimisers minimise: the negated cut expectation."""
        return -self.expectation(params)

    def gradient(self, params) -> np.ndarray:
        """Exact gradient of the cut expectation (adjoint sweep), flat order."""
        prm = self._params(params)
        p = prm.p
        psi = self.state(prm)
        lam = self.diag * psi
        gb = np.zeros(p)
        gg = np.zeros(p)
        phi = psi
        for k in range(p - 1, -1, -1):
            gb[k] = 2.0 * np.imag(np.vdot(lam, self._mix_gen(phi)))
            phi = self._mix(phi, -prm.betas[k])
            lam = self._mix(lam, -prm.betas[k])
            gg[k] = 2.0 * np.imag(np.vdot(lam, self._cost_gen(phi)))
            phi = self._cost(phi, -prm.gammas[k])
            lam = self._cost(lam, -prm.gammas[k])
        return np.concatenate([gb, gg])

    def jacobian(self, params) -> tuple[np.ndarray, np.ndarray]:
        """``(psi, dpsi)`` with ``dpsi[k] = d|psi>/d theta_k`` in flat order."""
        prm = self._params(params)
        p = prm.p
        # states[2k] before cost layer k, states[2k+1] before mixer layer k
        states = []
        psi = self.initial_state
        for b, g in zip(prm.betas, prm.gammas):
            states.append(psi)
            psi = self._cost(psi, g)
            states.append(psi)
            psi = self._mix(psi, b)
        dpsi = np.empty((2 * p, psi.size), dtype=complex)
        for k in range(p):
            for slot, gen in ((2 * k, "cost"), (2 * k + 1, "mix")):
                if gen == "cost":
                    phi = -1j * self._cost_gen(self._cost(states[slot], prm.gammas[k]))
                    phi = self._mix(phi, prm.betas[k])
                    dst = p + k
                else:
                    phi = -1j * self._mix_gen(self._mix(states[slot], prm.betas[k]))
                    dst = k
                for j in range(k + 1, p):
                    phi = self._mix(self._cost(phi, prm.gammas[j]), prm.betas[j])
                dpsi[dst] = phi
        return psi, dpsi

    def fidelity(self, a, b) -> float:
        return float(abs(np.vdot(self.state(a), self.state(b))) ** 2)


def qaoa_state(g: Graph, params, init=None) -> np.ndarray:
    return QaoaCircuit(g, init).state(params)


def qaoa_expectation(g: Graph, params, init=None) -> float:
    """Exact cut expectation ``<psi| 1/2 sum w (1 - Z Z) |psi>``."""
    return QaoaCircuit(g, init).expectation(params)


def fidelity(a, b, g: Graph, init=None) -> float:
    """``|<psi_a|psi_b>|^2`` for two parameter sets of the same circuit shape."""
    pa, pb = QaoaCircuit._params(a), QaoaCircuit._params(b)
    if pa.p != pb.p:
        raise ValueError(f"circuit depths differ: {pa.p} vs {pb.p}")
    return QaoaCircuit(g, init).fidelity(pa, pb)


def statevector_jacobian(g: Graph, params, init=None) -> np.ndarray:
    """Analytic ``d|psi>/d theta_k`` for all ``2p`` angles, shape ``(2p, 2**n)``."""
    return QaoaCircuit(g, init).jacobian(params)[1]
