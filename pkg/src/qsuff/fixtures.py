"""Explicit generator sets with known closure dimensions."""

from __future__ import annotations

from functools import reduce

import numpy as np

from .linalg import I2, X, Y, Z


def unit(d: int, i: int, j: int) -> np.ndarray:
    e = np.zeros((d, d), dtype=complex)
    e[i, j] = 1.0
    return e


def sym_unit(d: int, i: int, j: int, q: complex = 1.0) -> np.ndarray:
    """``q e_ij + conj(q) e_ji``."""
    return q * unit(d, i, j) + np.conj(q) * unit(d, j, i)


def symmetric_generators(d: int) -> tuple[np.ndarray, np.ndarray]:
    """Two real symmetric matrices generating all real symmetric d x d matrices.

    ``a`` is diagonal with distinct entries and ``b`` couples nearest
    neighbours.
    """
    a = np.diag(np.arange(d, dtype=float)).astype(complex)
    b = sum((sym_unit(d, i, i + 1) for i in range(d - 1)), np.zeros((d, d), dtype=complex))
    return a, b


def majorana(m: int) -> list[np.ndarray]:
    """``m`` pairwise anticommuting Hermitian unitaries on ``ceil(m/2)`` qubits.

    Jordan-Wigner strings ``Y...Y X 1...1`` and ``Y...Y Z 1...1``.
    """
    n = max(1, (m + 1) // 2)
    ops = []
    for k in range(n):
        for p in (X, Z):
            ops.append(reduce(np.kron, [Y] * k + [p] + [I2] * (n - k - 1)))
    return ops[:m]


def quaternion_matrix(a: float, b: float, c: float, d: float) -> np.ndarray:
    """Complex 2 x 2 image of the quaternion ``a + b i + c j + d k``."""
    return np.array([[a + 1j * b, c + 1j * d], [-c + 1j * d, a - 1j * b]], dtype=complex)


QI = quaternion_matrix(0, 1, 0, 0)
QJ = quaternion_matrix(0, 0, 1, 0)
QK = quaternion_matrix(0, 0, 0, 1)


def quaternionic_embed(blocks: np.ndarray) -> np.ndarray:
    """Embed a d x d array of 2 x 2 quaternion images as a 2d x 2d matrix."""
    d = blocks.shape[0]
    return blocks.transpose(0, 2, 1, 3).reshape(2 * d, 2 * d)


def quaternionic_generators(d: int = 4) -> tuple[np.ndarray, np.ndarray]:
    """Two quaternionic self-adjoint d x d matrices, embedded in ``M_{2d}``.

    ``a`` is diagonal with distinct real entries; ``b`` couples nearest
    neighbours and adds ``i`` on (0, 2) and ``j`` on (1, 3).  Their
    J*-closure is the whole quaternionic self-adjoint algebra, of complex
    dimension ``d (2d - 1)``.
    """
    one = quaternion_matrix(1, 0, 0, 0)
    zero = np.zeros((2, 2), dtype=complex)
    a = np.empty((d, d, 2, 2), dtype=complex)
    b = np.empty((d, d, 2, 2), dtype=complex)
    for i in range(d):
        for j in range(d):
            a[i, j] = one * i if i == j else zero
            b[i, j] = zero
    for i in range(d - 1):
        b[i, i + 1] = one
        b[i + 1, i] = one
    extra = [(0, 2, QI), (1, 3, QJ)]
    for i, j, q in extra:
        if j < d:
            b[i, j] = b[i, j] + q
            b[j, i] = b[j, i] + q.conj().T
    return quaternionic_embed(a), quaternionic_embed(b)


def symplectic_form(n: int) -> np.ndarray:
    """Antiunitary structure ``J`` with ``J conj(J) = -1`` on ``C^n (x) C^2``."""
    return np.kron(np.eye(n), 1j * Y)


def pauli_example() -> tuple[np.ndarray, np.ndarray]:
    """The qubit pair ``(1 + X)/2`` and ``(1 + Z)/2``."""
    return 0.5 * (I2 + X), 0.5 * (I2 + Z)
