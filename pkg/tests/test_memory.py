"""Retrieval kernel, optimal spin waves, time-domain oracle."""

import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from scipy.integrate import quad_vec
from scipy.linalg import expm

import dipolarray as da
from dipolarray import NumericalError
from dipolarray.greenfn import CollectiveModes
from dipolarray.memory import PREFACTOR, KMatrix

from conftest import cloud_geometry, random_cloud


def kernel_for(geometry, mode):
    modes = da.collective_modes(da.build_interaction_matrix(geometry))
    vec = da.sample_mode(mode, geometry)
    return da.k_matrix(modes, vec)


def time_domain_kernel(geometry, mode, t_max=400.0):
    """Direct integration of the emitted-overlap kernel.

    K = int_0^inf exp(iGt) (E E^dag) exp(-i conj(G) t) dt, evaluated by
    adaptive quadrature with explicit matrix exponentials. Slow and
    simple; the closed form must agree.
    """
    g = da.build_interaction_matrix(geometry).matrix
    e = da.sample_mode(mode, geometry).values
    outer = np.outer(e, np.conj(e))

    def integrand(t):
        left = expm(1j * g * t)
        return left @ outer @ left.conj().T

    val, _ = quad_vec(integrand, 0.0, t_max, epsabs=1e-12, epsrel=1e-12)
    return val


class TestKMatrix:
    def test_single_atom_kernel(self):
        geom = cloud_geometry([[0.0, 0.0, 0.0]])
        for w in (1.0, 2.0):
            k = kernel_for(geom, da.gaussian_mode(w))
            assert k.dim == 1
            assert k.matrix[0, 0] == pytest.approx(2.0 / (math.pi * w * w), rel=1e-12)

    def test_single_atom_two_way(self):
        # focal amplitude doubles at phi=0, quadrupling the intensity of
        # one branch; eta lands at 3/(2 pi^2)
        geom = cloud_geometry([[0.0, 0.0, 0.0]])
        k = kernel_for(geom, da.two_way_mode(1.0, phi=0.0))
        result = da.max_retrieval(k)
        assert result.eta_max == pytest.approx(3.0 / (2.0 * math.pi**2), abs=1e-9)
        assert result.eps == pytest.approx(1.0 - 3.0 / (2.0 * math.pi**2), abs=1e-9)

    @given(st.integers(2, 8), st.integers(0, 10_000))
    def test_hermitian(self, n, seed):
        rng = np.random.default_rng(seed)
        geom = cloud_geometry(random_cloud(rng, n))
        k = kernel_for(geom, da.gaussian_mode(1.5)).matrix
        assert np.linalg.norm(k - k.conj().T) < 1e-9 * np.linalg.norm(k)

    @given(st.integers(2, 8), st.integers(0, 10_000))
    def test_eigenvalues_are_probabilities(self, n, seed):
        rng = np.random.default_rng(seed)
        geom = cloud_geometry(random_cloud(rng, n))
        k = kernel_for(geom, da.gaussian_mode(1.5)).matrix
        evals = PREFACTOR * np.linalg.eigvalsh(k)
        assert evals.min() >= -1e-9
        assert evals.max() <= 1.0 + 1e-6

    def test_max_term_diagnostic(self, hex_monolayer):
        k = kernel_for(hex_monolayer, da.gaussian_mode(2.0))
        assert k.max_term > 0.0

    def test_non_decaying_mode_rejected(self):
        fake = CollectiveModes(
            eigenvalues=np.array([0.5j, 0.0 + 0.0j]),
            vectors=np.eye(2, dtype=complex),
            geometry_hash="synthetic",
        )
        vec = da.sample_mode(
            da.gaussian_mode(1.0), cloud_geometry([[0, 0, 0], [1.2, 0, 0]])
        )
        with pytest.raises(NumericalError, match="non-decaying"):
            da.k_matrix(fake, vec)

    def test_incomplete_mode_set_rejected(self):
        # zeroing one eigenvector column breaks the resolution of
        # identity the rotation back to site space relies on
        geom = cloud_geometry([[0, 0, 0], [1.2, 0, 0], [0, 1.2, 0]])
        modes = da.collective_modes(da.build_interaction_matrix(geom))
        crippled = CollectiveModes(
            eigenvalues=modes.eigenvalues,
            vectors=modes.vectors * np.array([1.0, 1.0, 0.0]),
            geometry_hash=modes.geometry_hash,
        )
        vec = da.sample_mode(da.gaussian_mode(1.0), geom)
        with pytest.raises(NumericalError, match="completeness"):
            da.k_matrix(crippled, vec)


class TestMaxRetrieval:
    def test_consistency_with_spinwave_evaluation(self, hex_monolayer):
        k = kernel_for(hex_monolayer, da.two_way_mode(2.0))
        result = da.max_retrieval(k)
        assert da.retrieval_for_spinwave(k, result.spinwave) == pytest.approx(
            result.eta_max, abs=1e-12
        )
        assert np.linalg.norm(result.spinwave) == pytest.approx(1.0, abs=1e-12)

    def test_phase_convention(self, hex_monolayer):
        k = kernel_for(hex_monolayer, da.two_way_mode(2.0))
        s = da.max_retrieval(k).spinwave
        i = int(np.argmax(np.abs(s)))
        assert s[i].imag == pytest.approx(0.0, abs=1e-12)
        assert s[i].real > 0

    def test_positive_scaling_invariance(self, hex_monolayer):
        k = kernel_for(hex_monolayer, da.two_way_mode(2.0))
        scaled = KMatrix(matrix=2.5 * k.matrix, mode_hash=k.mode_hash, max_term=k.max_term)
        base = da.max_retrieval(k)
        up = da.max_retrieval(scaled)
        assert up.eta_max == pytest.approx(2.5 * base.eta_max, rel=1e-12)
        assert np.allclose(up.spinwave, base.spinwave, atol=1e-9)

    def test_params_echo(self, hex_monolayer):
        k = kernel_for(hex_monolayer, da.two_way_mode(2.0))
        result = da.max_retrieval(k, params={"a": 0.8, "layers": 1})
        assert result.params == {"a": 0.8, "layers": 1}


class TestRetrievalForSpinwave:
    def test_rayleigh_maximality(self, hex_monolayer, rng):
        k = kernel_for(hex_monolayer, da.two_way_mode(2.0))
        eta_max = da.max_retrieval(k).eta_max
        n = k.dim
        for _ in range(1000):
            s = rng.standard_normal(n) + 1j * rng.standard_normal(n)
            s /= np.linalg.norm(s)
            assert da.retrieval_for_spinwave(k, s) <= eta_max + 1e-9

    def test_orthogonal_spinwave_bounded_by_second_eigenvalue(self, hex_monolayer):
        k = kernel_for(hex_monolayer, da.two_way_mode(2.0))
        evals, evecs = np.linalg.eigh(k.matrix)
        top = np.conj(evecs[:, -1])
        runner_up = np.conj(evecs[:, -2])
        # Hermitian-orthogonal to the optimum
        assert abs(np.vdot(top, runner_up)) < 1e-10
        eta = da.retrieval_for_spinwave(k, runner_up)
        assert eta <= PREFACTOR * evals[-2] + 1e-9

    def test_unnormalized_rejected(self, hex_monolayer):
        k = kernel_for(hex_monolayer, da.two_way_mode(2.0))
        with pytest.raises(ValueError):
            da.retrieval_for_spinwave(k, np.ones(k.dim))

    def test_dark_subspace_retrieves_nothing(self):
        # sub-wavelength bilayer: most collective modes barely overlap
        # the detection mode; spin waves built from those retrieve ~0
        lat = da.make_lattice("square", 0.7)
        geom = da.stack_layers(da.generate_patch(lat, 3), 2, spacing=0.6, lattice=lat)
        modes = da.collective_modes(da.build_interaction_matrix(geom))
        mode = da.two_way_mode(1.5, focus=(0.0, 0.0, 0.3))
        vec = da.sample_mode(mode, geom)
        k = da.k_matrix(modes, vec)
        overlaps = np.abs(vec.values @ modes.vectors)
        dark = np.argsort(overlaps)[:3]
        for idx in dark:
            s = np.conj(modes.vectors[:, idx])
            s = s / np.linalg.norm(s)
            assert da.retrieval_for_spinwave(k, s) < 1e-3


class TestPhaseSymmetry:
    def eta_of_phi(self, geom, phi):
        k = kernel_for(geom, da.two_way_mode(1.8, phi=phi))
        return da.max_retrieval(k).eta_max

    def test_periodic_and_even(self, hex_monolayer):
        # monolayer at z=0 with centered focus: forward and backward
        # branches are mirror images, so eta is even in phi
        for phi in (0.3, 1.1, 2.0):
            eta = self.eta_of_phi(hex_monolayer, phi)
            assert self.eta_of_phi(hex_monolayer, phi + 2 * math.pi) == pytest.approx(
                eta, abs=1e-12
            )
            assert self.eta_of_phi(hex_monolayer, -phi) == pytest.approx(eta, abs=1e-9)


class TestTimeDomainOracle:
    def test_monolayer_patch(self):
        lat = da.make_lattice("triangular", 1.5)
        geom = da.stack_layers(da.generate_patch(lat, 1), 1, lattice=lat)
        mode = da.two_way_mode(1.5)
        k = kernel_for(geom, mode)
        k_time = time_domain_kernel(geom, mode)
        rel = np.linalg.norm(k.matrix - k_time) / np.linalg.norm(k_time)
        assert rel < 1e-6

    def test_small_bilayer(self):
        lat = da.make_lattice("square", 1.2)
        geom = da.stack_layers(da.generate_patch(lat, 2), 2, spacing=1.5, lattice=lat)
        mode = da.gaussian_mode(1.4, focus=(0.0, 0.0, 0.75))
        k = kernel_for(geom, mode)
        k_time = time_domain_kernel(geom, mode)
        rel = np.linalg.norm(k.matrix - k_time) / np.linalg.norm(k_time)
        assert rel < 1e-6
