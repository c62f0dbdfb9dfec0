"""Detection and input optical modes sampled at atom positions.

The normalization convention ties the overlap formalism to the
flat-array channel rates: a normalized mode carries a transverse power
integral of lambda0^2 through every plane. For a paraxial Gaussian that
fixes the on-axis focal intensity to 2*lambda0^2/(pi w^2).

A two-way mode is the equal superposition of two counter-propagating
Gaussians sharing a focus, each normalized as above, combined with a
relative phase; it is normalized per channel, so its focal intensity
doubles at phi = 0 while the two running components each carry unit
power.
"""

from __future__ import annotations

import math
import threading
from dataclasses import dataclass

import numpy as np
from scipy import integrate

from .errors import ModeError
from .lattice import K0, ArrayGeometry, stack_center

PARAXIAL_FLOOR = 0.5

_SAMPLE_CACHE: dict = {}
_CACHE_LOCK = threading.Lock()


@dataclass(frozen=True)
class ModeField:
    """An optical mode with its normalization metadata.

    ``amplitude`` is the focal normalization constant; ``direction`` is
    +1 or -1 along z; ``phi`` is the relative phase between the two
    branches of a two-way mode and is ignored otherwise.
    """

    kind: str
    waist: float | None
    focus: tuple
    direction: int
    phi: float
    amplitude: float


def gaussian_mode(waist: float, focus=(0.0, 0.0, 0.0), direction: int = 1) -> ModeField:
    """Fundamental paraxial Gaussian with unit transverse power.

    Parameters
    ----------
    waist : float
        Beam waist in lambda0 units, at least 0.5 (paraxial floor).
    focus : tuple
        Focal point (x, y, z).
    direction : int
        Propagation sense along z, +1 or -1.
    """
    _check_waist(waist)
    if direction not in (1, -1):
        raise ModeError("direction must be +1 or -1")
    return ModeField(
        kind="gaussian",
        waist=float(waist),
        focus=tuple(float(c) for c in focus),
        direction=direction,
        phi=0.0,
        amplitude=math.sqrt(2.0 / math.pi) / waist,
    )


def plane_wave_mode(direction: int = 1, focus=(0.0, 0.0, 0.0)) -> ModeField:
    """Unit-amplitude plane wave along z.

    Not square integrable over a plane, so the lambda0^2 power
    convention does not apply; used for infinite-array limits.
    """
    if direction not in (1, -1):
        raise ModeError("direction must be +1 or -1")
    return ModeField(
        kind="plane_wave",
        waist=None,
        focus=tuple(float(c) for c in focus),
        direction=direction,
        phi=0.0,
        amplitude=1.0,
    )


def two_way_mode(waist: float, focus=(0.0, 0.0, 0.0), phi: float = 0.0) -> ModeField:
    """Counter-propagating Gaussian pair with relative phase ``phi``."""
    _check_waist(waist)
    return ModeField(
        kind="two_way_gaussian",
        waist=float(waist),
        focus=tuple(float(c) for c in focus),
        direction=1,
        phi=float(phi),
        amplitude=math.sqrt(2.0 / math.pi) / waist,
    )


def _check_waist(waist: float):
    if waist is None or waist < PARAXIAL_FLOOR:
        raise ModeError(
            f"waist {waist} below paraxial floor {PARAXIAL_FLOOR} lambda0"
        )


@dataclass
class ModeVector:
    """Mode amplitudes at atom positions.

    Holds the conjugated mode function at each atom, the pairing used by
    the overlap formulas downstream.
    """

    values: np.ndarray
    geometry_hash: str
    mode: ModeField

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=complex)
        if not np.all(np.isfinite(self.values)):
            raise ModeError("non-finite mode amplitudes")
        self.values.setflags(write=False)


def _gaussian_field(waist, focus, direction, positions):
    pos = np.asarray(positions, dtype=float).reshape(-1, 3)
    zeta = direction * (pos[:, 2] - focus[2])
    rho2 = (pos[:, 0] - focus[0]) ** 2 + (pos[:, 1] - focus[1]) ** 2
    z_r = math.pi * waist * waist
    u = zeta / z_r
    w_z = waist * np.sqrt(1.0 + u * u)
    gouy = np.arctan(u)
    inv_r = u / (z_r * (1.0 + u * u))
    amp = math.sqrt(2.0 / math.pi) / waist
    return (
        amp
        * (waist / w_z)
        * np.exp(-rho2 / (w_z * w_z))
        * np.exp(1j * (K0 * zeta + 0.5 * K0 * rho2 * inv_r - gouy))
    )


def evaluate_field(mode: ModeField, positions) -> np.ndarray:
    """Mode function at the given points, one complex value per row."""
    pos = np.asarray(positions, dtype=float).reshape(-1, 3)
    if mode.kind == "gaussian":
        return _gaussian_field(mode.waist, mode.focus, mode.direction, pos)
    if mode.kind == "two_way_gaussian":
        fwd = _gaussian_field(mode.waist, mode.focus, 1, pos)
        bwd = _gaussian_field(mode.waist, mode.focus, -1, pos)
        return (fwd + np.exp(1j * mode.phi) * bwd) / math.sqrt(2.0)
    if mode.kind == "plane_wave":
        return np.exp(1j * mode.direction * K0 * (pos[:, 2] - mode.focus[2]))
    raise ModeError(f"unknown mode kind {mode.kind!r}")


def sample_mode(mode: ModeField, geometry: ArrayGeometry) -> ModeVector:
    """Conjugated mode amplitudes at the geometry's atoms, cached.

    The cache key is (mode, geometry hash); reads are lock free on the
    dict snapshot, inserts serialize through a single lock.
    """
    key = (mode, geometry.content_hash())
    hit = _SAMPLE_CACHE.get(key)
    if hit is not None:
        return hit
    values = np.conj(evaluate_field(mode, geometry.positions))
    vec = ModeVector(values=values, geometry_hash=key[1], mode=mode)
    with _CACHE_LOCK:
        _SAMPLE_CACHE.setdefault(key, vec)
    return _SAMPLE_CACHE[key]


def transverse_power(mode: ModeField, z: float) -> float:
    """Numerical transverse power integral of the mode at plane z.

    The integrand is axially symmetric about the focus axis for every
    supported localized kind, so a single radial quadrature suffices.
    """
    if mode.kind == "plane_wave":
        raise ModeError("plane waves carry no finite transverse power")
    fx, fy, fz = mode.focus

    def integrand(rho):
        pts = np.array([[fx + rho, fy, z]])
        return 2.0 * math.pi * rho * float(np.abs(evaluate_field(mode, pts)[0]) ** 2)

    # support scales with the local beam radius, not the waist; far from
    # focus the cross term oscillates radially, hence the generous limit
    w0 = mode.waist
    u = (z - fz) / (math.pi * w0 * w0)
    upper = 8.0 * w0 * math.sqrt(1.0 + u * u)
    val, _ = integrate.quad(integrand, 0.0, upper, limit=800, epsabs=1e-10, epsrel=1e-10)
    return val


def validate_plane_wave_limit(
    lattice, layers: int = 1, spacing: float | None = None, rings: int = 12
) -> float:
    """Normalization self-test against the flat-array limit.

    Builds a large patch, drives it with a wide Gaussian following the
    w = sqrt(N) a / 3 convention, and compares the resonant reflectance
    with the branching-ratio prediction of the open channels. Returns
    |R_max - R_ideal|. Wider beams clip on the patch boundary and the
    clipping loss does not shrink with N, so the coefficient matters.
    """
    from .idealized import channel_rates, classify_eigenstructure, interlayer_matrix
    from .lattice import generate_patch, stack_layers
    from .response import max_reflectance

    patch = generate_patch(lattice, rings)
    n = len(patch)
    geom = stack_layers(patch, layers, spacing or 0.0, lattice=lattice)
    w = math.sqrt(n) * lattice.a / 3.0
    mode = gaussian_mode(w, focus=(0.0, 0.0, stack_center(geom)))
    result = max_reflectance(geom, mode)

    rates = channel_rates(lattice)
    if layers == 1:
        branching = rates.gamma_det / (rates.gamma_det + rates.gamma_diff)
        r_ideal = branching * branching
    else:
        report = classify_eigenstructure(
            interlayer_matrix(lattice, layers, spacing)
        )
        if report.rank >= 2:
            r_ideal = 1.0
        else:
            bright = max(report.states, key=lambda s: s.total)
            branching = bright.gamma_det / bright.total
            r_ideal = branching * branching
    return abs(result.r_max - r_ideal)
