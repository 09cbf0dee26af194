"""Dense complex-matrix helpers: unitarity, Haar sampling, two-mode
embedding and the intensity fidelity metric.

Matrices are plain ``numpy.ndarray`` objects (complex128 for amplitudes,
float64 for intensities).
"""

from __future__ import annotations

import numpy as np

from .errors import DegenerateMeasurementError, DimensionError, ModeIndexError

UNITARY_ATOL = 1e-10


def unitarity_error(m: np.ndarray) -> float:
    """Max-norm of ``M^dagger M - I``."""
    m = np.asarray(m)
    if m.ndim != 2 or m.shape[0] != m.shape[1]:
        raise DimensionError(f"expected a square matrix, got shape {m.shape}")
    return float(np.max(np.abs(m.conj().T @ m - np.eye(m.shape[0]))))


def is_unitary(m: np.ndarray, atol: float = UNITARY_ATOL) -> bool:
    return unitarity_error(m) < atol


def haar_random_unitary(n: int, seed=None) -> np.ndarray:
    """Sample an ``n x n`` unitary from the Haar measure.

    A complex Ginibre matrix is QR-factorised and the columns of Q are
    rephased by ``diag(R)/|diag(R)|`` so the result is Haar distributed
    rather than biased by the QR sign convention.

    ``seed`` is anything ``numpy.random.default_rng`` accepts (int,
    ``SeedSequence`` or an existing ``Generator``).
    """
    if n < 1:
        raise DimensionError(f"mode count must be >= 1, got {n}")
    rng = np.random.default_rng(seed)
    z = (rng.standard_normal((n, n)) + 1j * rng.standard_normal((n, n))) / np.sqrt(2.0)
    q, r = np.linalg.qr(z)
    d = np.diag(r)
    return q * (d / np.abs(d))


def embed_two_mode(n: int, m: int, t: np.ndarray) -> np.ndarray:
    """Return the ``n x n`` identity with ``t`` placed on modes ``(m, m+1)``."""
    t = np.asarray(t, dtype=complex)
    if t.shape != (2, 2):
        raise DimensionError(f"two-mode block must be 2x2, got {t.shape}")
    if not 0 <= m <= n - 2:
        raise ModeIndexError(f"mode {m} out of range for a two-mode block in {n} modes")
    out = np.eye(n, dtype=complex)
    out[m:m + 2, m:m + 2] = t
    return out


def dft_matrix(n: int) -> np.ndarray:
    k = np.arange(n)
    return np.exp(2j * np.pi * np.outer(k, k) / n) / np.sqrt(n)


def intensities(m: np.ndarray) -> np.ndarray:
    return np.abs(np.asarray(m)) ** 2


def column_normalize(p: np.ndarray) -> np.ndarray:
    """Scale each column of a nonnegative matrix to unit sum."""
    p = np.asarray(p, dtype=float)
    if p.ndim != 2:
        raise DimensionError(f"expected a 2-D intensity matrix, got shape {p.shape}")
    if np.any(p < 0):
        raise DegenerateMeasurementError("intensity matrix has negative entries")
    sums = p.sum(axis=0)
    if np.any(sums <= 0):
        bad = int(np.flatnonzero(sums <= 0)[0])
        raise DegenerateMeasurementError(f"column {bad} has zero total intensity")
    return p / sums


def amplitude_fidelity(measured: np.ndarray, target: np.ndarray) -> float:
    """Classical fidelity between a measured intensity matrix and a target.

    Both sides are column-normalised (``P`` from ``measured``, ``Q`` from
    ``|target|**2``) and ``F = (1/N) sum_ij sqrt(P_ij Q_ij)`` with ``N``
    the number of columns (inputs). ``F == 1`` exactly when ``P == Q``.
    """
    measured = np.asarray(measured, dtype=float)
    target = np.asarray(target)
    if measured.shape != target.shape:
        raise DimensionError(f"shape mismatch: measured {measured.shape} vs target {target.shape}")
    p = column_normalize(measured)
    q = column_normalize(intensities(target))
    f = float(np.sum(np.sqrt(p * q)) / p.shape[1])
    return min(f, 1.0)


def spawn_seeds(seed, n: int) -> list:
    """Independent child streams of ``seed``.

    ``SeedSequence(seed).spawn(n)`` for ints and ``None``; existing
    ``SeedSequence`` or ``Generator`` objects spawn their own children.
    """
    if isinstance(seed, (np.random.SeedSequence, np.random.Generator)):
        return list(seed.spawn(n))
    return list(np.random.SeedSequence(seed).spawn(n))
