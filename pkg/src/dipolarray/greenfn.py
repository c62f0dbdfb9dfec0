"""Free-space dipole-dipole coupling and collective eigenmodes.

The pair coupling is the dimensionless transverse Green tensor of a
point dipole, projected onto the transition polarization. Assembled over
a finite geometry it yields a complex symmetric matrix whose imaginary
part is positive semidefinite; its eigenpairs are the collective modes,
with decay rates 2*Im(lambda) in units of Gamma0.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import DegenerateModeError, GeometryError, DipolarrayError
from .lattice import K0, ArrayGeometry

# minimum pair separation for the point-dipole model; the 1/r^3 near
# field makes closer geometries physically meaningless here
NEAR_FIELD_FLOOR = 1e-3

CLUSTER_TOL = 1e-8
SELF_PRODUCT_FLOOR = 1e-6


@dataclass(frozen=True)
class Polarization:
    """Unit complex polarization vector of the dipole transition."""

    vector: tuple

    def __post_init__(self):
        v = np.asarray(self.vector, dtype=complex)
        if v.shape != (3,):
            raise ValueError("polarization must be a 3-vector")
        if abs(np.vdot(v, v) - 1.0) > 1e-12:
            raise ValueError("polarization must be unit normalized")

    def array(self) -> np.ndarray:
        return np.asarray(self.vector, dtype=complex)


# circular polarization in the lattice plane, the default throughout
CIRCULAR = Polarization(vector=(1 / np.sqrt(2), 1j / np.sqrt(2), 0.0))


@dataclass
class InteractionMatrix:
    """Collective coupling matrix of a finite geometry.

    Complex symmetric with diagonal i/2; indices follow the geometry's
    atom order.
    """

    matrix: np.ndarray
    geometry_hash: str

    @property
    def dim(self) -> int:
        return self.matrix.shape[0]


@dataclass
class CollectiveModes:
    """Eigendecomposition of an interaction matrix.

    Eigenvectors are columns of ``vectors`` and satisfy the unconjugated
    orthonormality v.v = 1, v_i.v_j = 0, which is the natural pairing
    for complex symmetric matrices. Sorted by decreasing Im(lambda),
    then increasing Re(lambda).
    """

    eigenvalues: np.ndarray
    vectors: np.ndarray
    geometry_hash: str

    @property
    def dim(self) -> int:
        return len(self.eigenvalues)


def dyadic_green(r) -> np.ndarray:
    """Transverse Green tensor at displacement ``r`` (lambda0 units).

    Returns the dimensionless 3x3 tensor; symmetric and even in r.

    Raises
    ------
    GeometryError
        At zero displacement, where the self-interaction rule applies
        instead.
    """
    r = np.asarray(r, dtype=float)
    dist = float(np.linalg.norm(r))
    if dist == 0.0:
        raise GeometryError("dyadic Green tensor undefined at zero displacement")
    kr = K0 * dist
    rhat = r / dist
    outer = np.outer(rhat, rhat)
    pref = 3.0 * np.exp(1j * kr) / (4.0 * kr**3)
    t_iso = kr * kr + 1j * kr - 1.0
    t_dir = kr * kr + 3j * kr - 3.0
    return pref * (t_iso * np.eye(3) - t_dir * outer)


def projected_green(displacements: np.ndarray, polarization: Polarization = CIRCULAR) -> np.ndarray:
    """Polarization-projected pair coupling, vectorized over rows.

    Computes conj(e) . G(r) . e for each displacement row. For the
    in-plane circular default the directional weight |rhat.e|^2 reduces
    to (rx^2 + ry^2) / (2 r^2).
    """
    d = np.asarray(displacements, dtype=float)
    squeeze = d.ndim == 1
    d = d.reshape(-1, 3)
    dist = np.linalg.norm(d, axis=1)
    if np.any(dist == 0.0):
        raise GeometryError("zero displacement in projected Green evaluation")
    kr = K0 * dist
    rhat = d / dist[:, None]
    e = polarization.array()
    weight = np.abs(rhat @ e) ** 2
    pref = 3.0 * np.exp(1j * kr) / (4.0 * kr**3)
    t_iso = kr * kr + 1j * kr - 1.0
    t_dir = kr * kr + 3j * kr - 3.0
    out = pref * (t_iso - t_dir * weight)
    return out[0] if squeeze else out


def build_interaction_matrix(
    geometry: ArrayGeometry, polarization: Polarization = CIRCULAR
) -> InteractionMatrix:
    """Assemble the collective coupling matrix of a geometry.

    Off-diagonal entries are projected Green values, the diagonal is
    i/2 (the coherent self-energy is absorbed into the transition
    frequency). Complex symmetric by reciprocity.

    Raises
    ------
    GeometryError
        If any pair is closer than the near-field floor.
    """
    pos = geometry.positions
    n = len(pos)
    g = np.zeros((n, n), dtype=complex)
    if n == 0:
        return InteractionMatrix(matrix=g, geometry_hash=geometry.content_hash())
    iu = np.triu_indices(n, 1)
    if len(iu[0]):
        disp = pos[iu[0]] - pos[iu[1]]
        dist = np.linalg.norm(disp, axis=1)
        if dist.min() < NEAR_FIELD_FLOOR:
            raise GeometryError(
                f"pair separation {dist.min():.2e} below near-field floor "
                f"{NEAR_FIELD_FLOOR}"
            )
        g[iu] = projected_green(disp, polarization)
        g = g + g.T
    np.fill_diagonal(g, 0.5j)
    return InteractionMatrix(matrix=g, geometry_hash=geometry.content_hash())


# === eigenmodes ===


def collective_modes(interaction: InteractionMatrix, cluster_tol: float = CLUSTER_TOL) -> CollectiveModes:
    """Eigendecompose an interaction matrix with unconjugated normalization.

    Dense solvers return unnormalized and, within numerically degenerate
    clusters, non-orthogonal vectors; eigenvalues closer than
    ``cluster_tol`` are grouped and re-orthogonalized with the
    unconjugated Gram-Schmidt before normalizing v.v = 1.

    Raises
    ------
    DegenerateModeError
        If a vector's self-product magnitude falls below 1e-6 after
        clustering, signaling an ill-conditioned pair.
    """
    lam, vec = np.linalg.eig(interaction.matrix)

    order = np.lexsort((lam.imag, lam.real))
    lam = lam[order]
    vec = vec[:, order]

    n = len(lam)
    start = 0
    while start < n:
        stop = start + 1
        while stop < n and abs(lam[stop] - lam[stop - 1]) < cluster_tol:
            stop += 1
        for i in range(start, stop):
            v = vec[:, i]
            for j in range(start, i):
                v = v - (vec[:, j] @ v) * vec[:, j]
            sq = v @ v
            if abs(sq) < SELF_PRODUCT_FLOOR:
                raise DegenerateModeError(
                    f"self-product |v.v| = {abs(sq):.2e} in cluster at "
                    f"lambda = {lam[i]:.6g}"
                )
            vec[:, i] = v / np.sqrt(sq)
        start = stop

    final = np.lexsort((lam.real, -lam.imag))
    return CollectiveModes(
        eigenvalues=lam[final],
        vectors=vec[:, final],
        geometry_hash=interaction.geometry_hash,
    )


# === matrix persistence ===


def save_matrix(interaction: InteractionMatrix, path) -> None:
    """Dump a matrix as re/im pairs with its geometry hash."""
    pairs = np.stack([interaction.matrix.real, interaction.matrix.imag], axis=-1)
    np.savez_compressed(path, pairs=pairs, geometry_hash=interaction.geometry_hash)


def load_matrix(path, geometry: ArrayGeometry | None = None) -> InteractionMatrix:
    """Load a dumped matrix, validating the geometry hash when given."""
    with np.load(path) as data:
        pairs = data["pairs"]
        stored = str(data["geometry_hash"])
    if geometry is not None and geometry.content_hash() != stored:
        raise DipolarrayError("matrix dump does not match geometry (hash mismatch)")
    return InteractionMatrix(
        matrix=pairs[..., 0] + 1j * pairs[..., 1], geometry_hash=stored
    )
