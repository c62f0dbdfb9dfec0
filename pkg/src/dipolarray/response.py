"""Weak-drive linear response and reflectance extraction.

Two independent routes compute the same reflection coefficient: a dense
linear solve per detuning, and a closed form over the collective modes
(one eigendecomposition per geometry, then O(n) per detuning). The
direct route backs spectra; the spectral route backs resonance searches
and is cross-checked against the direct one in the test suite.
"""

from __future__ import annotations

import warnings
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import minimize_scalar

from .errors import NumericalError
from .greenfn import CollectiveModes, InteractionMatrix, build_interaction_matrix, collective_modes
from .lattice import ArrayGeometry
from .modes import ModeField, ModeVector, sample_mode

PREFACTOR = 3.0 / (8.0 * np.pi)

DEFAULT_SCAN = {"lo": -10.0, "hi": 10.0, "points": 401, "xtol": 1e-8}


@dataclass
class Spectrum:
    """Reflection sampled on a detuning grid (Gamma0 units)."""

    delta: np.ndarray
    r: np.ndarray

    @property
    def reflectance(self) -> np.ndarray:
        return np.abs(self.r) ** 2


@dataclass
class ReflectanceResult:
    """Resonant reflectance maximum and where it sits."""

    r_max: float
    delta_star: float
    params: dict = field(default_factory=dict)

    @property
    def eps(self) -> float:
        return 1.0 - self.r_max


def steady_state(interaction: InteractionMatrix, mode_vector: ModeVector, delta: float) -> np.ndarray:
    """Steady-state amplitudes under weak drive at detuning ``delta``.

    Solves (delta * I + G) x = E by dense factorization and verifies the
    residual; the system is regular whenever the coupling matrix keeps
    its dissipative diagonal.
    """
    g = interaction.matrix
    n = g.shape[0]
    if n == 0:
        return np.zeros(0, dtype=complex)
    b = mode_vector.values
    a = g + delta * np.eye(n)
    x = np.linalg.solve(a, b)
    b_norm = np.linalg.norm(b)
    if b_norm > 0:
        res = np.linalg.norm(a @ x - b) / b_norm
        if res > 1e-10:
            raise NumericalError(f"steady-state solve residual {res:.2e}")
    return x


def reflection_coefficient(mode_vector: ModeVector, excitation: np.ndarray) -> complex:
    """Reflection into the detection mode from the atomic amplitudes.

    Unconjugated contraction; both factors carry the sampled mode.
    """
    if len(excitation) != len(mode_vector.values):
        raise ValueError("excitation length does not match mode vector")
    return complex(-1j * PREFACTOR * np.dot(mode_vector.values, excitation))


def reflection_from_modes(modes: CollectiveModes, mode_vector: ModeVector, deltas) -> np.ndarray:
    """Closed-form reflection over a detuning grid via collective modes."""
    deltas = np.atleast_1d(np.asarray(deltas, dtype=float))
    if modes.dim == 0:
        return np.zeros(len(deltas), dtype=complex)
    overlaps = mode_vector.values @ modes.vectors
    c2 = overlaps * overlaps
    denom = deltas[:, None] + modes.eigenvalues[None, :]
    return -1j * PREFACTOR * (c2[None, :] / denom).sum(axis=1)


def reflectance_spectrum(
    geometry: ArrayGeometry, mode: ModeField, deltas, workers: int | None = None
) -> Spectrum:
    """Reflection spectrum by direct solves, one per grid point."""
    deltas = np.asarray(deltas, dtype=float)
    if deltas.size == 0:
        raise ValueError("empty detuning grid")
    interaction = build_interaction_matrix(geometry)
    vec = sample_mode(mode, geometry)

    def one(delta):
        x = steady_state(interaction, vec, float(delta))
        return reflection_coefficient(vec, x)

    if workers and workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            r = np.array(list(pool.map(one, deltas)), dtype=complex)
    else:
        r = np.array([one(d) for d in deltas], dtype=complex)
    return Spectrum(delta=deltas, r=r)


def max_reflectance(geometry: ArrayGeometry, mode: ModeField, scan: dict | None = None) -> ReflectanceResult:
    """Resonant reflectance maximum over a detuning window.

    Coarse grid first, then golden-section refinement of the bracketed
    peak. Warns when the maximum sits on the window edge, where the true
    resonance may lie outside.
    """
    opts = dict(DEFAULT_SCAN)
    if scan:
        opts.update(scan)
    interaction = build_interaction_matrix(geometry)
    vec = sample_mode(mode, geometry)
    modes = collective_modes(interaction)
    grid = np.linspace(opts["lo"], opts["hi"], int(opts["points"]))
    refl = np.abs(reflection_from_modes(modes, vec, grid)) ** 2
    i = int(np.argmax(refl))
    params = _echo_params(geometry, mode)
    if modes.dim == 0 or refl[i] == 0.0:
        return ReflectanceResult(r_max=0.0, delta_star=float(grid[i]), params=params)
    if i == 0 or i == len(grid) - 1:
        warnings.warn(
            "reflectance maximum at scan-window edge; widen the window",
            stacklevel=2,
        )
        return ReflectanceResult(r_max=float(refl[i]), delta_star=float(grid[i]), params=params)

    def negative_r(delta):
        return -float(np.abs(reflection_from_modes(modes, vec, [delta])[0]) ** 2)

    try:
        res = minimize_scalar(
            negative_r,
            bracket=(grid[i - 1], grid[i], grid[i + 1]),
            method="golden",
            options={"xtol": opts["xtol"]},
        )
        r_max, d_star = -float(res.fun), float(res.x)
    except ValueError:
        r_max, d_star = float(refl[i]), float(grid[i])
    if r_max < refl[i]:
        r_max, d_star = float(refl[i]), float(grid[i])
    return ReflectanceResult(r_max=r_max, delta_star=d_star, params=params)


def _echo_params(geometry: ArrayGeometry, mode: ModeField) -> dict:
    params = {
        "n": geometry.atoms_per_layer,
        "m": geometry.layer_count,
        "w": mode.waist,
    }
    if geometry.lattice is not None:
        params["a"] = geometry.lattice.a
    if geometry.layer_count > 1:
        zs = sorted(s[2] for s in geometry.layer_shifts)
        params["d"] = zs[1] - zs[0]
    if mode.kind == "two_way_gaussian":
        params["phi"] = mode.phi
    return params
