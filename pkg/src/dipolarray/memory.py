"""Retrieval efficiency of stored spin waves into a detection mode.

The emitted-field overlap, integrated over the full decay, defines a
Hermitian matrix K on the spin-wave space. Its Rayleigh quotient is the
retrieval efficiency of a given initial spin wave regardless of the
temporal profile, and its top eigenpair gives the best achievable
efficiency together with the spin wave that reaches it. Storage is not
simulated; by time reversal the storage efficiency equals retrieval.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import NumericalError
from .greenfn import CollectiveModes
from .modes import ModeVector

PREFACTOR = 3.0 / (8.0 * np.pi)

COMPLETENESS_TOL = 1e-6


@dataclass
class KMatrix:
    """Retrieval kernel for one (geometry, mode) pair.

    ``max_term`` records the largest magnitude in the eigenbasis ratio
    table, a cancellation diagnostic for nearly dark denominators.
    """

    matrix: np.ndarray
    mode_hash: str
    max_term: float

    @property
    def dim(self) -> int:
        return self.matrix.shape[0]


@dataclass
class RetrievalResult:
    """Best retrieval efficiency and the spin wave achieving it."""

    eta_max: float
    spinwave: np.ndarray
    params: dict = field(default_factory=dict)

    @property
    def eps(self) -> float:
        return 1.0 - self.eta_max


def k_matrix(modes: CollectiveModes, mode_vector: ModeVector) -> KMatrix:
    """Assemble the retrieval kernel from the collective modes.

    Built in the eigenbasis as an outer-product ratio table and rotated
    back, two dense products in total. Denominators pair decay rates of
    mode pairs and stay finite because every collective mode decays;
    genuinely dark modes enter with vanishing numerators instead.

    Raises
    ------
    NumericalError
        If some mode does not decay, or the eigenvector set fails the
        completeness probe.
    """
    lam = modes.eigenvalues
    vec = modes.vectors
    if np.any(lam.imag <= 0):
        raise NumericalError("non-decaying collective mode; kernel undefined")
    _completeness_probe(vec)
    beta = mode_vector.values @ vec
    denom = lam[:, None] - np.conj(lam)[None, :]
    table = 1j * np.outer(beta, np.conj(beta)) / denom
    kernel = vec @ table @ vec.conj().T
    return KMatrix(
        matrix=kernel,
        mode_hash=modes.geometry_hash + ":" + repr(mode_vector.mode),
        max_term=float(np.abs(table).max()),
    )


def _completeness_probe(vec: np.ndarray) -> None:
    n = vec.shape[0]
    if n == 0:
        raise NumericalError("empty mode set")
    rng = np.random.default_rng(1234)
    probe = rng.standard_normal(n) + 1j * rng.standard_normal(n)
    probe /= np.linalg.norm(probe)
    err = np.linalg.norm(vec @ (vec.T @ probe) - probe)
    if err > COMPLETENESS_TOL:
        raise NumericalError(f"mode set fails completeness probe: {err:.2e}")


def max_retrieval(kernel: KMatrix, params: dict | None = None) -> RetrievalResult:
    """Top retrieval efficiency and optimal initial spin wave.

    The efficiency is the scaled top eigenvalue of the kernel. The
    optimal spin wave is the conjugate of the top eigenvector, which
    maximizes the quadratic form s.K.s*; its global phase is fixed by
    making the largest-magnitude entry real positive.
    """
    evals, evecs = np.linalg.eigh(kernel.matrix)
    top = evecs[:, -1]
    s = np.conj(top)
    i = int(np.argmax(np.abs(s)))
    phase = s[i] / abs(s[i])
    s = s * np.conj(phase)
    return RetrievalResult(
        eta_max=float(PREFACTOR * evals[-1]),
        spinwave=s,
        params=dict(params or {}),
    )


def retrieval_for_spinwave(kernel: KMatrix, s) -> float:
    """Retrieval efficiency of a given unit spin wave.

    Rejects unnormalized input instead of silently rescaling.
    """
    s = np.asarray(s, dtype=complex)
    norm = np.linalg.norm(s)
    if abs(norm - 1.0) > 1e-8:
        raise ValueError(f"spin wave must be unit norm, got {norm:.6g}")
    value = PREFACTOR * np.real(s @ kernel.matrix @ np.conj(s))
    return float(value)
