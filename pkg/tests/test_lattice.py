"""Lattice construction, diffraction orders, patches, stacking."""

import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

import dipolarray as da
from dipolarray import GeometryError

K0 = 2 * math.pi


class TestMakeLattice:
    def test_square_unit_cell(self):
        lat = da.make_lattice("square", 1.0)
        assert lat.cell_area == pytest.approx(1.0, abs=1e-15)
        g1, g2 = lat.reciprocal_array()
        assert np.hypot(*g1) == pytest.approx(2 * math.pi, rel=1e-15)
        assert np.hypot(*g2) == pytest.approx(2 * math.pi, rel=1e-15)

    def test_triangular_unit_cell(self):
        lat = da.make_lattice("triangular", 1.0)
        assert lat.cell_area == pytest.approx(math.sqrt(3) / 2, rel=1e-15)
        g1, _ = lat.reciprocal_array()
        assert np.hypot(*g1) == pytest.approx(4 * math.pi / math.sqrt(3), rel=1e-14)

    def test_triangular_operating_point(self):
        # the first diffraction shell of the a = 1.549 triangular lattice
        # sits at |g|/k0 ~ 0.745, inside the light cone
        lat = da.make_lattice("triangular", 1.549)
        g1, _ = lat.reciprocal_array()
        assert np.hypot(*g1) / K0 == pytest.approx(0.745, abs=5e-4)

    @given(
        kind=st.sampled_from(["square", "triangular"]),
        a=st.floats(0.3, 2.5),
    )
    def test_reciprocal_duality(self, kind, a):
        lat = da.make_lattice(kind, a)
        b = lat.basis_array()
        g = lat.reciprocal_array()
        assert np.allclose(b @ g.T, 2 * math.pi * np.eye(2), atol=1e-12)

    @pytest.mark.parametrize("a", [0.0, -1.0])
    def test_nonpositive_constant_rejected(self, a):
        with pytest.raises(GeometryError):
            da.make_lattice("square", a)

    def test_unknown_kind_rejected(self):
        with pytest.raises(GeometryError):
            da.make_lattice("hexagonal", 1.0)


class TestEnumerateOrders:
    def test_subwavelength_square_only_specular(self):
        orders = da.enumerate_orders(da.make_lattice("square", 0.8))
        prop = [o for o in orders if o.propagating]
        assert len(prop) == 1
        assert (prop[0].m, prop[0].n) == (0, 0)

    def test_triangular_first_shell(self):
        orders = da.enumerate_orders(da.make_lattice("triangular", 1.549))
        prop = [o for o in orders if o.propagating and (o.m, o.n) != (0, 0)]
        assert len(prop) == 6
        for o in prop:
            assert o.g_norm / K0 == pytest.approx(0.745, abs=5e-4)

    def test_square_super_wavelength_four_orders(self):
        orders = da.enumerate_orders(da.make_lattice("square", 1.2))
        prop = {(o.m, o.n) for o in orders if o.propagating and (o.m, o.n) != (0, 0)}
        assert prop == {(1, 0), (-1, 0), (0, 1), (0, -1)}

    def test_sorted_specular_first(self):
        orders = da.enumerate_orders(da.make_lattice("triangular", 1.7))
        assert (orders[0].m, orders[0].n) == (0, 0)
        norms = [o.g_norm for o in orders]
        assert norms == sorted(norms)

    def test_kz_branches(self):
        for o in da.enumerate_orders(da.make_lattice("square", 1.3)):
            if o.propagating:
                assert o.k_z.imag == 0 and o.k_z.real > 0
                assert o.k_z.real == pytest.approx(
                    math.sqrt(K0**2 - o.g_norm**2), rel=1e-12
                )
            else:
                assert o.k_z.real == 0 and o.k_z.imag > 0

    @given(
        kind=st.sampled_from(["square", "triangular"]),
        a=st.floats(0.5, 2.5),
    )
    def test_completeness_against_brute_force(self, kind, a):
        # no propagating order outside the default shell cutoff
        lat = da.make_lattice(kind, a)
        found = {(o.m, o.n) for o in da.enumerate_orders(lat) if o.propagating}
        g1, g2 = lat.reciprocal_array()
        brute = set()
        for m in range(-10, 11):
            for n in range(-10, 11):
                if np.hypot(*(m * g1 + n * g2)) < K0:
                    brute.add((m, n))
        assert found == brute


class TestPatches:
    def test_hex_patch_sizes(self):
        lat = da.make_lattice("triangular", 1.0)
        assert len(da.generate_patch(lat, 6)) == 127
        assert len(da.generate_patch(lat, 0)) == 1
        assert np.allclose(da.generate_patch(lat, 0)[0], 0.0)

    def test_square_patch_centered(self):
        patch = da.generate_patch(da.make_lattice("square", 1.0), 4)
        assert len(patch) == 16
        assert np.allclose(patch.mean(axis=0), 0.0, atol=1e-12)

    def test_hex_patch_sixfold_symmetry(self):
        patch = da.generate_patch(da.make_lattice("triangular", 1.3), 3)
        c, s = math.cos(math.pi / 3), math.sin(math.pi / 3)
        rotated = patch @ np.array([[c, s], [-s, c]])
        orig = {tuple(np.round(p, 9)) for p in patch}
        rot = {tuple(np.round(p, 9)) for p in rotated}
        assert orig == rot

    @pytest.mark.parametrize("k", range(11))
    def test_centered_hexagonal_count(self, k):
        lat = da.make_lattice("triangular", 1.0)
        assert len(da.generate_patch(lat, k)) == 1 + 3 * k * (k + 1)
        assert da.hex_atom_count(k) == 1 + 3 * k * (k + 1)

    def test_rings_for_count_roundtrip(self):
        for k in range(10):
            assert da.rings_for_count(da.hex_atom_count(k)) == k

    def test_rings_for_count_rejects_non_hexagonal(self):
        with pytest.raises(GeometryError):
            da.rings_for_count(100)


class TestStacking:
    def test_trilayer_planes(self):
        lat = da.make_lattice("triangular", 1.6)
        geom = da.stack_layers(da.generate_patch(lat, 6), 3, spacing=1.5)
        assert geom.n_atoms == 381
        assert geom.layer_count == 3
        zs = sorted({round(z, 12) for z in geom.positions[:, 2]})
        assert zs == [0.0, 1.5, 3.0]
        assert da.stack_center(geom) == pytest.approx(1.5)

    def test_monolayer(self):
        patch = da.generate_patch(da.make_lattice("square", 1.0), 3)
        geom = da.stack_layers(patch, 1)
        assert geom.n_atoms == 9
        assert np.all(geom.positions[:, 2] == 0.0)
        assert da.stack_center(geom) == 0.0

    def test_lateral_shifts(self):
        a = 1.0
        patch = da.generate_patch(da.make_lattice("square", a), 2)
        geom = da.stack_layers(
            patch, 2, spacing=0.7, shifts=[(0.0, 0.0), (a / 2, a / 2)]
        )
        top = geom.positions[geom.layer_of == 1]
        bottom = geom.positions[geom.layer_of == 0]
        assert np.allclose(
            np.sort(top[:, 0]) - np.sort(bottom[:, 0]), a / 2, atol=1e-12
        )

    def test_overlapping_layers_rejected(self):
        patch = da.generate_patch(da.make_lattice("square", 1.0), 2)
        with pytest.raises(GeometryError):
            da.stack_layers(patch, 2)  # zero spacing duplicates the plane

    def test_empty_patch_allowed(self):
        geom = da.stack_layers(np.zeros((0, 2)), 1)
        assert geom.n_atoms == 0


class TestArrayGeometry:
    def test_nonplanar_layer_rejected(self):
        with pytest.raises(GeometryError):
            da.ArrayGeometry(
                positions=[[0, 0, 0], [1, 0, 0.3]],
                layer_of=[0, 0],
                layer_count=1,
                layer_shifts=[(0.0, 0.0, 0.0)],
            )

    def test_pattern_mismatch_rejected(self):
        with pytest.raises(GeometryError):
            da.ArrayGeometry(
                positions=[[0, 0, 0], [1, 0, 0], [0, 0, 1], [2, 0, 1]],
                layer_of=[0, 0, 1, 1],
                layer_count=2,
                layer_shifts=[(0.0, 0.0, 0.0), (0.0, 0.0, 1.0)],
            )

    def test_coincident_atoms_rejected(self):
        with pytest.raises(GeometryError):
            da.ArrayGeometry(
                positions=[[0, 0, 0], [0, 0, 0]],
                layer_of=[0, 0],
                layer_count=1,
                layer_shifts=[(0.0, 0.0, 0.0)],
            )

    def test_json_roundtrip(self):
        lat = da.make_lattice("triangular", 1.5)
        geom = da.stack_layers(da.generate_patch(lat, 2), 2, spacing=1.2, lattice=lat)
        back = da.ArrayGeometry.from_json(geom.to_json())
        assert np.allclose(back.positions, geom.positions, atol=1e-12)
        assert back.layer_count == geom.layer_count
        assert back.content_hash() == geom.content_hash()
        assert back.lattice.kind == "triangular"

    def test_content_hash_sensitivity(self):
        patch = da.generate_patch(da.make_lattice("square", 1.0), 2)
        g1 = da.stack_layers(patch, 1)
        g2 = da.stack_layers(patch + 1e-6, 1)
        assert g1.content_hash() != g2.content_hash()
