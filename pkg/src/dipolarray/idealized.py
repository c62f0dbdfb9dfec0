"""Infinite-array analytics for layered lattices.

In the idealized limit a uniform spin wave couples only to the discrete
diffraction channels of the lattice. This module carries the per-channel
emission rates, the layer-space coupling matrix, the condition making
inter-layer coupling purely dissipative, and the resulting bright/dark
eigenstructure that selects what a stack radiates into.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import GeometryError, GrazingOrderError, NumericalError
from .lattice import (
    K0,
    VALIDITY_WINDOW,
    DiffractionOrder,
    LatticeSpec,
    enumerate_orders,
)

GRAZING_TOL = 1e-6
CRITICAL_RE_TOL = 1e-7
RANK_TOL = 1e-6


@dataclass(frozen=True)
class ChannelRates:
    """Emission rates of a uniform spin wave, one per open channel.

    All rates are in units of Gamma0. ``gamma00`` is the specular rate
    3*pi/(k0^2 * cell_area); evanescent orders carry zero.
    """

    gamma00: float
    orders: tuple
    rates: tuple
    gamma_det: float
    gamma_diff: float

    def rate_of(self, m: int, n: int) -> float:
        for o, r in zip(self.orders, self.rates):
            if (o.m, o.n) == (m, n):
                return r
        raise KeyError(f"order ({m},{n}) not enumerated")


@dataclass
class IdealizedLayerMatrix:
    """Layer-space coupling matrix of an M-layer stack, in gamma00 units.

    Only propagating channels contribute; evanescent orders are dropped
    by construction, which is the model's documented limitation.
    """

    matrix: np.ndarray
    spacing: float
    shifts: list
    ell: int | None
    lattice: LatticeSpec
    rates: ChannelRates

    @property
    def layer_count(self) -> int:
        return self.matrix.shape[0]


@dataclass(frozen=True)
class MirrorDesign:
    """A lattice constant where inter-layer coupling is purely dissipative."""

    a_star: float
    q: int
    parity: str
    ell: int


@dataclass(frozen=True)
class LayerState:
    """One layer-space eigenstate with its channel-resolved rates.

    Rates are in gamma00 units; ``total`` equals gamma_det + gamma_diff.
    """

    vector: tuple
    gamma_det: float
    gamma_diff: float
    total: float
    is_dark: bool


@dataclass(frozen=True)
class EigenstructureReport:
    rank: int
    states: tuple


def channel_rates(lattice: LatticeSpec, shell_cutoff: int = 5) -> ChannelRates:
    """Per-channel emission rates of the uniform spin wave.

    Raises
    ------
    GrazingOrderError
        If any order lies within 1e-6 of |g| = k0, where the rate
        diverges.
    """
    orders = enumerate_orders(lattice, shell_cutoff)
    gamma00 = 3.0 * math.pi / (K0 * K0 * lattice.cell_area)
    rates = []
    for o in orders:
        if abs(o.g_norm / K0 - 1.0) < GRAZING_TOL:
            raise GrazingOrderError(o.m, o.n, o.g_norm)
        if not o.propagating:
            rates.append(0.0)
            continue
        kz = o.k_z.real
        rates.append(gamma00 * (K0 * K0 + kz * kz) / (2.0 * K0 * kz))
    gamma_diff = sum(
        r for o, r in zip(orders, rates) if o.propagating and (o.m, o.n) != (0, 0)
    )
    return ChannelRates(
        gamma00=gamma00,
        orders=tuple(orders),
        rates=tuple(rates),
        gamma_det=gamma00,
        gamma_diff=float(gamma_diff),
    )


def _propagating(rates: ChannelRates) -> list[tuple[DiffractionOrder, float]]:
    return [
        (o, r) for o, r in zip(rates.orders, rates.rates) if o.propagating
    ]


def interlayer_matrix(
    lattice: LatticeSpec,
    layers: int,
    spacing: float,
    shifts: list | None = None,
    shell_cutoff: int = 5,
) -> IdealizedLayerMatrix:
    """Layer-space coupling of an M-layer stack in the idealized limit.

    Entry (alpha, beta) sums the open channels with phases set by the
    layer offsets; the diagonal is (i/2)(1 + gamma_diff/gamma00).
    """
    if layers < 1:
        raise GeometryError("need at least one layer")
    if layers > 1 and spacing <= 0:
        raise GeometryError("layer spacing must be positive")
    if shifts is None:
        shifts = [(0.0, 0.0)] * layers
    rates = channel_rates(lattice, shell_cutoff)
    zs = np.arange(layers) * spacing
    rho = np.asarray(shifts, dtype=float).reshape(layers, 2)
    g = np.zeros((layers, layers), dtype=complex)
    for o, r in _propagating(rates):
        kz = o.k_z.real
        dz = np.abs(zs[:, None] - zs[None, :])
        dphase = (rho[:, None, :] - rho[None, :, :]) @ np.asarray(o.g)
        g += (r / rates.gamma00) * np.exp(1j * (kz * dz + dphase))
    g *= 0.5j
    two_d = 2.0 * spacing
    ell = int(round(two_d)) if abs(two_d - round(two_d)) < 1e-12 else None
    return IdealizedLayerMatrix(
        matrix=g, spacing=float(spacing), shifts=[tuple(s) for s in shifts],
        ell=ell, lattice=lattice, rates=rates,
    )


def critical_lattice_constants(
    lattice_kind: str, ell: int, a_range: tuple | None = None
) -> list[MirrorDesign]:
    """Lattice constants making an ell*lambda0/2 spaced stack critical.

    For spacing d = ell/2 the round-trip phase of the specular and
    first-shell channels is an integer multiple of pi exactly when
    Q = ell * (1 + sqrt(1 - |g10|^2/k0^2)) is an integer, with
    Q in (ell, 2*ell). Even Q collapses the layer coupling to rank one;
    odd Q splits specular from diffractive emission.

    ``a_range`` must lie inside the single-shell validity window,
    (1, sqrt(2)) for square and (2/sqrt(3), 2) for triangular lattices.
    """
    if lattice_kind not in VALIDITY_WINDOW:
        raise GeometryError(f"unknown lattice kind {lattice_kind!r}")
    if ell < 1:
        raise GeometryError("ell must be a positive integer")
    lo_w, hi_w = VALIDITY_WINDOW[lattice_kind]
    if a_range is None:
        a_range = (lo_w, hi_w)
    lo, hi = a_range
    if lo < lo_w - 1e-12 or hi > hi_w + 1e-12:
        raise GeometryError(
            f"a_range {a_range} outside validity window ({lo_w:.6g}, {hi_w:.6g})"
        )
    designs = []
    for q in range(ell + 1, 2 * ell):
        nu = q / ell - 1.0
        x = math.sqrt(1.0 - nu * nu)
        if lattice_kind == "triangular":
            a_star = 2.0 / (math.sqrt(3.0) * x)
        else:
            a_star = 1.0 / x
        if not (lo < a_star < hi):
            continue
        # invariant check: Q reproduced from a_star to 1e-9
        g10 = 4.0 * math.pi / (math.sqrt(3.0) * a_star) if lattice_kind == "triangular" else 2.0 * math.pi / a_star
        q_back = ell * (1.0 + math.sqrt(1.0 - (g10 / K0) ** 2))
        if abs(q_back - q) > 1e-9:
            raise NumericalError(f"critical condition failed to invert at Q={q}")
        designs.append(
            MirrorDesign(a_star=a_star, q=q, parity="even" if q % 2 == 0 else "odd", ell=ell)
        )
    designs.sort(key=lambda d: d.a_star)
    return designs


def classify_eigenstructure(layer_matrix: IdealizedLayerMatrix) -> EigenstructureReport:
    """Rank and channel-resolved rates of a critical layer matrix.

    Requires a purely dissipative matrix (Re part below tolerance). Each
    eigenstate's emission is split into the specular channel and the sum
    of diffraction channels by projecting onto the two plane-wave
    directions of every open order; rates come out in gamma00 units.

    Raises
    ------
    NumericalError
        If the input is not critical.
    """
    g = layer_matrix.matrix
    m_layers = layer_matrix.layer_count
    scale = np.abs(g).max()
    if scale > 0 and np.abs(g.real).max() > CRITICAL_RE_TOL * max(1.0, scale):
        raise NumericalError(
            f"layer matrix is not critical: max|Re| = {np.abs(g.real).max():.2e}"
        )
    svals = np.linalg.svd(g, compute_uv=False)
    rank = int(np.sum(svals > RANK_TOL * svals[0])) if svals[0] > 0 else 0

    # at criticality the matrix is i times a real symmetric form
    mu, vecs = np.linalg.eigh(g.imag)
    order = np.argsort(-mu)
    mu = mu[order]
    vecs = vecs[:, order]

    zs = np.arange(m_layers) * layer_matrix.spacing
    rho = np.asarray(layer_matrix.shifts, dtype=float).reshape(m_layers, 2)
    gamma00 = layer_matrix.rates.gamma00
    states = []
    for i in range(m_layers):
        v = vecs[:, i]
        k = np.flatnonzero(np.abs(v) > 1e-12)
        if len(k) and v[k[0]] < 0:
            v = -v
        det = 0.0
        diff = 0.0
        for o, r in _propagating(layer_matrix.rates):
            kz = o.k_z.real
            phase = kz * zs + rho @ np.asarray(o.g)
            amp_up = np.sum(v * np.exp(1j * phase))
            amp_dn = np.sum(v * np.exp(-1j * phase))
            rate = (r / gamma00) * 0.5 * (abs(amp_up) ** 2 + abs(amp_dn) ** 2)
            if (o.m, o.n) == (0, 0):
                det += rate
            else:
                diff += rate
        total = det + diff
        is_dark = bool(mu[i] <= RANK_TOL * max(mu[0], 1e-300))
        states.append(
            LayerState(
                vector=tuple(float(x) for x in v),
                gamma_det=float(det),
                gamma_diff=float(diff),
                total=float(total),
                is_dark=is_dark,
            )
        )
    return EigenstructureReport(rank=rank, states=tuple(states))


def ideal_reflection(delta: float, gamma_det: float, gamma_diff: float, j_shift: float = 0.0) -> complex:
    """Single-resonance reflection coefficient of the idealized array.

    All rates and detunings in Gamma0 units. On resonance (delta equal
    to the collective shift) the reflectance is the squared branching
    ratio [gamma_det / (gamma_det + gamma_diff)]^2.
    """
    if gamma_det < 0 or gamma_diff < 0 or gamma_det + gamma_diff == 0:
        raise ValueError("rates must be non-negative and not both zero")
    return (0.5j * gamma_det) / (-delta + j_shift - 0.5j * (gamma_det + gamma_diff))


def uniform_state_rate(interaction_matrix: np.ndarray) -> float:
    """Decay rate of the uniform spin wave on a finite geometry.

    The quotient 2*Im(sum_ij G_ij)/n approaches gamma00 + gamma_diff as
    the patch grows; boundary oscillations average out over rows, unlike
    any single row sum.
    """
    g = np.asarray(interaction_matrix)
    n = g.shape[0]
    return float(2.0 * g.sum().imag / n)
