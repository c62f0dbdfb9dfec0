"""Bravais lattices, finite patches, and layered stacks.

All lengths are measured in units of the transition wavelength lambda0,
so k0 = 2*pi. Decay rates elsewhere are in units of the single-atom
linewidth Gamma0 and detunings in Gamma0 as well; this module is purely
geometric.
"""

from __future__ import annotations

import hashlib
import json
import math
from dataclasses import dataclass, field

import numpy as np
from scipy.spatial.distance import pdist

from .errors import GeometryError

K0 = 2.0 * math.pi

# Single-diffraction-shell windows for the flat-array analysis: below the
# lower edge the first order closes (sub-wavelength regime), above the
# upper edge the second shell opens.
VALIDITY_WINDOW = {
    "square": (1.0, math.sqrt(2.0)),
    "triangular": (2.0 / math.sqrt(3.0), 2.0),
}


@dataclass(frozen=True)
class LatticeSpec:
    """A 2D Bravais lattice.

    Attributes
    ----------
    kind : str
        Either ``"square"`` or ``"triangular"``.
    a : float
        Lattice constant in units of lambda0.
    basis : tuple
        Two direct basis vectors, rows of a 2x2 nested tuple.
    reciprocal : tuple
        Two reciprocal generators g1, g2 with b_i . g_j = 2*pi*delta_ij.
    cell_area : float
        Unit-cell area in lambda0^2.
    """

    kind: str
    a: float
    basis: tuple
    reciprocal: tuple
    cell_area: float

    def basis_array(self) -> np.ndarray:
        return np.asarray(self.basis, dtype=float)

    def reciprocal_array(self) -> np.ndarray:
        return np.asarray(self.reciprocal, dtype=float)


@dataclass(frozen=True)
class DiffractionOrder:
    """One reciprocal-lattice channel g_mn.

    ``k_z`` is the out-of-plane wavenumber sqrt(k0^2 - |g|^2): real and
    positive for propagating orders, positive imaginary for evanescent
    ones.
    """

    m: int
    n: int
    g: tuple
    g_norm: float
    k_z: complex
    propagating: bool


def make_lattice(kind: str, a: float) -> LatticeSpec:
    """Build a square or triangular lattice with constant ``a``.

    Raises
    ------
    GeometryError
        If ``a`` is not positive or the kind is unknown.
    """
    if a <= 0:
        raise GeometryError(f"lattice constant must be positive, got {a}")
    if kind == "square":
        b1 = (a, 0.0)
        b2 = (0.0, a)
    elif kind == "triangular":
        b1 = (a, 0.0)
        b2 = (0.5 * a, 0.5 * math.sqrt(3.0) * a)
    else:
        raise GeometryError(f"unknown lattice kind {kind!r}")
    b = np.array([b1, b2])
    area = abs(b[0, 0] * b[1, 1] - b[0, 1] * b[1, 0])
    # rows of 2*pi*inv(B)^T generate the reciprocal lattice
    g = 2.0 * math.pi * np.linalg.inv(b).T
    return LatticeSpec(
        kind=kind,
        a=float(a),
        basis=(tuple(b[0]), tuple(b[1])),
        reciprocal=(tuple(g[0]), tuple(g[1])),
        cell_area=float(area),
    )


def enumerate_orders(spec: LatticeSpec, shell_cutoff: int = 5) -> list[DiffractionOrder]:
    """Enumerate diffraction orders with |m|, |n| <= shell_cutoff.

    The list is sorted by |g_mn| with (0, 0) first and ties broken on
    (m, n) so the output is deterministic. Five shells cover every
    propagating order for a <= 2.5 lambda0.
    """
    if shell_cutoff < 1:
        raise GeometryError("shell_cutoff must be at least 1")
    g1, g2 = spec.reciprocal_array()
    orders = []
    for m in range(-shell_cutoff, shell_cutoff + 1):
        for n in range(-shell_cutoff, shell_cutoff + 1):
            g = m * g1 + n * g2
            g_norm = float(np.hypot(g[0], g[1]))
            prop = g_norm < K0
            if prop:
                k_z = complex(math.sqrt(K0 * K0 - g_norm * g_norm), 0.0)
            else:
                k_z = complex(0.0, math.sqrt(g_norm * g_norm - K0 * K0))
            orders.append(
                DiffractionOrder(
                    m=m, n=n, g=(float(g[0]), float(g[1])),
                    g_norm=g_norm, k_z=k_z, propagating=prop,
                )
            )
    orders.sort(key=lambda o: (o.g_norm, o.m, o.n))
    return orders


def generate_patch(spec: LatticeSpec, size: int) -> np.ndarray:
    """Generate a finite in-plane patch centered on the origin.

    For triangular lattices ``size`` is the ring count k of a centered
    hexagon, N = 1 + 3k(k+1). For square lattices ``size`` is the grid
    side n, N = n^2.

    Returns an (N, 2) float array.
    """
    if size < 0:
        raise GeometryError("patch size must be non-negative")
    b1, b2 = spec.basis_array()
    pts = []
    if spec.kind == "triangular":
        k = size
        for m in range(-k, k + 1):
            for n in range(-k, k + 1):
                if abs(m + n) <= k:
                    pts.append(m * b1 + n * b2)
    else:
        n_side = size
        # center an n x n grid on the origin (half-integer offsets when even)
        off = 0.5 * (n_side - 1)
        for i in range(n_side):
            for j in range(n_side):
                pts.append((i - off) * b1 + (j - off) * b2)
    if not pts:
        return np.zeros((0, 2))
    return np.array(pts, dtype=float)


def hex_atom_count(rings: int) -> int:
    """Atom count of a centered hexagonal patch with ``rings`` rings."""
    return 1 + 3 * rings * (rings + 1)


def rings_for_count(n: int) -> int:
    """Invert ``hex_atom_count``; raises for non-hexagonal counts."""
    k = int(round((-3 + math.sqrt(9 + 12 * (n - 1))) / 6))
    if hex_atom_count(k) != n:
        raise GeometryError(f"{n} is not a centered hexagonal number")
    return k


@dataclass
class ArrayGeometry:
    """A finite stack of identical in-plane patches.

    Attributes
    ----------
    positions : ndarray, shape (N*M, 3)
        Atom coordinates in lambda0 units.
    layer_of : ndarray, shape (N*M,)
        Layer index of each atom.
    layer_count : int
    layer_shifts : list of (rho_x, rho_y, z) per layer
    lattice : LatticeSpec or None
        The generating lattice, kept for provenance when known.
    """

    positions: np.ndarray
    layer_of: np.ndarray
    layer_count: int
    layer_shifts: list
    lattice: LatticeSpec | None = None
    _hash: str = field(default="", repr=False)

    def __post_init__(self):
        self.positions = np.asarray(self.positions, dtype=float).reshape(-1, 3)
        self.layer_of = np.asarray(self.layer_of, dtype=int)
        if len(self.layer_of) != len(self.positions):
            raise GeometryError("layer_of length does not match positions")
        if len(self.positions) > 1:
            # distinct-atom invariant; pdist is fine up to a few thousand atoms
            if pdist(self.positions).min() <= 1e-9:
                raise GeometryError("coincident atom positions")
        self._check_layers()
        self.positions.setflags(write=False)
        self.layer_of.setflags(write=False)

    def _check_layers(self):
        if self.layer_count < 1:
            raise GeometryError("layer_count must be at least 1")
        if len(self.layer_shifts) != self.layer_count:
            raise GeometryError("one shift per layer required")
        base = None
        for alpha in range(self.layer_count):
            rho_x, rho_y, z = self.layer_shifts[alpha]
            sel = self.positions[self.layer_of == alpha]
            if sel.size == 0:
                continue
            if np.abs(sel[:, 2] - z).max() > 1e-9:
                raise GeometryError(f"layer {alpha} is not planar at z = {z}")
            pattern = np.sort(
                np.round(sel[:, :2] - (rho_x, rho_y), 9).view("f8,f8"),
                order=("f0", "f1"), axis=0,
            )
            if base is None:
                base = pattern
            elif pattern.shape != base.shape or not np.array_equal(pattern, base):
                raise GeometryError(f"layer {alpha} pattern differs from layer 0")

    @property
    def n_atoms(self) -> int:
        return len(self.positions)

    @property
    def atoms_per_layer(self) -> int:
        return len(self.positions) // self.layer_count

    def content_hash(self) -> str:
        """Stable identifier of the atom arrangement, used by caches."""
        if not self._hash:
            h = hashlib.sha256()
            h.update(np.round(self.positions, 12).tobytes())
            h.update(self.layer_of.tobytes())
            object.__setattr__(self, "_hash", h.hexdigest())
        return self._hash

    def to_json(self) -> str:
        doc = {
            "positions": np.round(self.positions, 12).tolist(),
            "layer_of": self.layer_of.tolist(),
            "layer_shifts": [list(map(float, s)) for s in self.layer_shifts],
        }
        if self.lattice is not None:
            doc["lattice"] = {"kind": self.lattice.kind, "a": self.lattice.a}
        return json.dumps(doc, sort_keys=True)

    @staticmethod
    def from_json(text: str) -> "ArrayGeometry":
        doc = json.loads(text)
        lattice = None
        if "lattice" in doc:
            lattice = make_lattice(doc["lattice"]["kind"], doc["lattice"]["a"])
        return ArrayGeometry(
            positions=np.array(doc["positions"], dtype=float),
            layer_of=np.array(doc["layer_of"], dtype=int),
            layer_count=len(doc["layer_shifts"]),
            layer_shifts=[tuple(s) for s in doc["layer_shifts"]],
            lattice=lattice,
        )


def stack_layers(
    patch: np.ndarray,
    layers: int,
    spacing: float = 0.0,
    shifts: list | None = None,
    lattice: LatticeSpec | None = None,
) -> ArrayGeometry:
    """Stack ``layers`` copies of an in-plane patch along z.

    Layer alpha sits at z = alpha * spacing, optionally shifted in plane
    by ``shifts[alpha]`` (pairs). A monolayer ignores ``spacing``.

    Raises
    ------
    GeometryError
        If two layers coincide (same z and same in-plane shift).
    """
    patch = np.asarray(patch, dtype=float).reshape(-1, 2)
    if layers < 1:
        raise GeometryError("need at least one layer")
    if layers > 1 and spacing <= 0:
        raise GeometryError("layer spacing must be positive for stacks")
    if shifts is None:
        shifts = [(0.0, 0.0)] * layers
    if len(shifts) != layers:
        raise GeometryError("one in-plane shift per layer required")

    layer_shifts = []
    blocks = []
    tags = []
    for alpha in range(layers):
        rho = np.asarray(shifts[alpha], dtype=float)
        z = alpha * spacing
        layer_shifts.append((float(rho[0]), float(rho[1]), float(z)))
        pts = np.column_stack(
            [patch[:, 0] + rho[0], patch[:, 1] + rho[1], np.full(len(patch), z)]
        )
        blocks.append(pts)
        tags.append(np.full(len(patch), alpha, dtype=int))
    seen = set()
    for s in layer_shifts:
        key = (round(s[0], 9), round(s[1], 9), round(s[2], 9))
        if key in seen:
            raise GeometryError("two layers coincide")
        seen.add(key)
    return ArrayGeometry(
        positions=np.vstack(blocks),
        layer_of=np.concatenate(tags),
        layer_count=layers,
        layer_shifts=layer_shifts,
        lattice=lattice,
    )


def stack_center(geometry: ArrayGeometry) -> float:
    """z coordinate of the middle of the stack."""
    zs = [s[2] for s in geometry.layer_shifts]
    return 0.5 * (min(zs) + max(zs))
