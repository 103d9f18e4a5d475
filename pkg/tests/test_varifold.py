import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from varimin import (
    ball_mass,
    connected_components,
    hausdorff_distance,
    projector_defects,
    projector_from_basis,
    shapes,
    support_diameter,
    validate_projectors,
    varifold_from_mesh,
)

# Frozen oracle values.
#
# CAP_MASS: the extrinsic ball of radius rho about a point of the unit
# sphere cuts a spherical cap whose area is exactly pi*rho^2 (cap height
# h = rho^2/2, area 2*pi*h).  At rho = 1 that is pi.
CAP_MASS_RHO1 = math.pi
SPHERE_AREA = 4.0 * math.pi


def random_rotation(rng, s):
    q, r = np.linalg.qr(rng.normal(size=(s, s)))
    q *= np.sign(np.diag(r))
    if np.linalg.det(q) < 0:
        q[:, 0] = -q[:, 0]
    return q


class TestProjectors:
    def test_projector_from_basis_plane(self):
        e = np.array([[1.0, 0.0, 0.0], [1.0, 1.0, 0.0]]).T  # spans xy-plane
        p = projector_from_basis(e[None])
        expected = np.diag([1.0, 1.0, 0.0])
        assert np.allclose(p[0], expected, atol=1e-14)

    def test_defects_on_exact_projector(self):
        p = np.diag([1.0, 0.0, 1.0])[None]
        sym, idem, tr = projector_defects(p)
        assert sym[0] == 0.0 and idem[0] == 0.0
        assert tr[0] == 2.0

    def test_validate_rejects_non_projector(self):
        bad = np.full((1, 3, 3), 0.3)
        with pytest.raises(ValueError):
            validate_projectors(bad, m=2)

    @settings(max_examples=30, deadline=None)
    @given(st.integers(2, 5), st.integers(1, 3), st.integers(0, 10_000))
    def test_projector_invariants_random_basis(self, s, m, seed):
        if m >= s:
            m = s - 1
        rng = np.random.default_rng(seed)
        basis = rng.normal(size=(4, s, m))
        p = projector_from_basis(basis)
        sym, idem, tr = projector_defects(p)
        assert sym.max() < 1e-12
        assert idem.max() < 1e-10
        assert np.abs(tr - m).max() < 1e-10


class TestMeshVarifold:
    def test_icosphere_counts(self, ico4):
        # subdivision combinatorics: 10*4^k + 2 vertices, 20*4^k faces
        assert len(ico4.vertices) == 2562
        assert len(ico4.simplices) == 5120

    def test_icosphere_vertices_on_sphere(self, ico4):
        r = np.linalg.norm(ico4.vertices, axis=1)
        assert np.abs(r - 1.0).max() < 1e-12

    def test_atoms_one_per_simplex(self, ico4, sphere_v4):
        assert sphere_v4.x.shape == (len(ico4.simplices), 3)
        assert np.all(sphere_v4.w > 0)

    def test_mass_equals_total_area(self, ico4, sphere_v4):
        assert sphere_v4.mass() == pytest.approx(ico4.total_measure(), rel=1e-14)
        # inscribed polyhedron: slightly below the smooth area, within 1%
        assert sphere_v4.mass() < SPHERE_AREA
        assert sphere_v4.mass() > 0.99 * SPHERE_AREA

    def test_multiplicity_scales_mass(self, ico3):
        v1 = varifold_from_mesh(ico3)
        v3 = varifold_from_mesh(ico3, multiplicity=3)
        assert v3.mass() == pytest.approx(3.0 * v1.mass(), rel=1e-14)

    def test_unit_square_patch_measure(self):
        patch = shapes.flat_patch(nx=12, ny=12, size=1.0)
        v = varifold_from_mesh(patch)
        assert v.mass() == pytest.approx(1.0, abs=1e-12)

    def test_projector_invariants_on_mesh_atoms(self, sphere_v4):
        sym, idem, tr = projector_defects(sphere_v4.P)
        assert sym.max() < 1e-12
        assert idem.max() < 1e-10
        assert np.abs(tr - 2.0).max() < 1e-10

    def test_atom_planes_match_facets(self, ico4, sphere_v4):
        tri = ico4.vertices[ico4.simplices]
        e1 = tri[:, 1] - tri[:, 0]
        n = np.cross(e1, tri[:, 2] - tri[:, 0])
        n /= np.linalg.norm(n, axis=1, keepdims=True)
        assert np.abs(np.einsum("nij,nj->ni", sphere_v4.P, e1) - e1).max() < 1e-10
        assert np.abs(np.einsum("nij,nj->ni", sphere_v4.P, n)).max() < 1e-10

    def test_polyline_varifold(self):
        n = 512
        circ = shapes.circle_polyline(n=n, radius=1.0)
        v = varifold_from_mesh(circ)
        # regular inscribed n-gon perimeter
        assert v.mass() == pytest.approx(2 * n * math.sin(math.pi / n), rel=1e-12)
        sym, idem, tr = projector_defects(v.P)
        assert np.abs(tr - 1.0).max() < 1e-10

    @settings(max_examples=20, deadline=None)
    @given(st.integers(0, 10_000))
    def test_isometry_equivariance(self, seed):
        rng = np.random.default_rng(seed)
        mesh = shapes.icosphere(refinements=1)
        v = varifold_from_mesh(mesh)
        rot = random_rotation(rng, 3)
        t = rng.normal(size=3)
        moved = varifold_from_mesh(mesh.with_vertices(mesh.vertices @ rot.T + t))
        assert np.allclose(moved.x, v.x @ rot.T + t, atol=1e-12)
        assert np.allclose(moved.P, np.einsum("ab,nbc,dc->nad", rot, v.P, rot), atol=1e-12)
        assert np.allclose(moved.w, v.w, atol=1e-14)


class TestMeasureOps:
    def test_ball_mass_cap_oracle(self, sphere_v4):
        north = np.array([0.0, 0.0, 1.0])
        got = ball_mass(sphere_v4, north, 1.0)
        assert got == pytest.approx(CAP_MASS_RHO1, rel=0.02)

    def test_ball_mass_whole_support(self, sphere_v4):
        assert ball_mass(sphere_v4, np.zeros(3), 2.5) == pytest.approx(
            sphere_v4.mass(), rel=1e-14
        )

    def test_ball_mass_empty(self, sphere_v4):
        assert ball_mass(sphere_v4, np.array([5.0, 0, 0]), 0.5) == 0.0

    def test_ball_mass_monotone_in_radius(self, sphere_v4, rng):
        center = np.array([0.3, -0.2, 0.9])
        radii = np.linspace(0.1, 2.5, 17)
        masses = [ball_mass(sphere_v4, center, r) for r in radii]
        assert np.all(np.diff(masses) >= 0)

    def test_support_diameter_sphere(self, sphere_v4):
        d = support_diameter(sphere_v4)
        # centroid atoms sit just inside the unit sphere
        assert d <= 2.0 + 1e-12
        assert d == pytest.approx(2.0, abs=0.01)

    def test_support_diameter_matches_bruteforce(self, rng):
        x = rng.normal(size=(200, 3))
        from varimin.varifold import DiscreteVarifold

        v = DiscreteVarifold(
            x=x, P=np.tile(np.eye(3)[None], (200, 1, 1)), w=np.ones(200)
        )
        d = support_diameter(v)
        brute = max(
            np.linalg.norm(a - b) for a in x for b in x
        )
        assert d == pytest.approx(brute, rel=1e-12)

    def test_connected_components_two_spheres(self, ico3):
        far = ico3.with_vertices(ico3.vertices + np.array([5.0, 0.0, 0.0]))
        both = ico3.concatenate(far)
        v = varifold_from_mesh(both)
        n, labels = connected_components(v, link_radius=0.2)
        assert n == 2
        n1, _ = connected_components(v, link_radius=10.0)
        assert n1 == 1

    def test_hausdorff_distance_translation(self, rng):
        x = rng.normal(size=(64, 3))
        shift = np.array([0.25, 0.0, 0.0])
        assert hausdorff_distance(x, x + shift) == pytest.approx(0.25, rel=1e-12)
        assert hausdorff_distance(x, x) == 0.0
