import numpy as np
import pytest
from hypothesis import settings

from gnnqaoa.graphs import Graph

settings.register_profile("default", deadline=None, max_examples=40)
settings.load_profile("default")

I2 = np.eye(2)
X = np.array([[0.0, 1.0], [1.0, 0.0]])
Z = np.diag([1.0, -1.0])


def kron_op(n, ops):
    """Dense 2^n operator with ``ops[q]`` on qubit q (qubit 0 least significant)."""
    out = np.array([[1.0]])
    for q in reversed(range(n)):
        out = np.kron(out, ops.get(q, I2))
    return out


def dense_cut_hamiltonian(g: Graph) -> np.ndarray:
    dim = 1 << g.n
    h = np.zeros((dim, dim))
    for i, j, w in g.edges:
        h += 0.5 * w * (np.eye(dim) - kron_op(g.n, {i: Z, j: Z}))
    return h


def dense_qaoa_state(g: Graph, betas, gammas, x=None) -> np.ndarray:
    """Independent dense-matrix route: full 2^n exponentials via eigh."""
    from scipy.linalg import expm

    n = g.n
    hc = dense_cut_hamiltonian(g)
    if x is None:
        psi = np.full(1 << n, 2 ** (-n / 2), dtype=complex)
        hm = sum(kron_op(n, {q: X}) for q in range(n))
    else:
        psi = np.array([1.0 + 0j])
        for q in reversed(range(n)):
            psi = np.kron(psi, [np.sqrt(1 - x[q]), np.sqrt(x[q])])
        hm = 0
        for q in range(n):
            a = 2 * x[q] - 1
            b = -2 * np.sqrt(x[q] * (1 - x[q]))
            hm = hm + kron_op(n, {q: np.array([[a, b], [b, -a]])})
    for b, c in zip(betas, gammas):
        psi = expm(-1j * c * 2 * hc) @ psi
        psi = expm(-1j * b * hm) @ psi
    return psi


@pytest.fixture
def single_edge():
    return Graph(2, ((0, 1),))


@pytest.fixture
def k4():
    return Graph(4, tuple((i, j) for i in range(4) for j in range(i + 1, 4)))


@pytest.fixture
def path3():
    return Graph(3, ((0, 1), (1, 2)))
