import math

import numpy as np
import pytest

from varimin import (
    BumpDictionary,
    Euclidean,
    Sphere,
    admissible_random_second_fundamental,
    curvature_correction,
    full_from_second_fundamental,
    mean_curvature_mesh,
    recover_curvature_tensor,
    second_fundamental_from_full,
    shapes,
    trace_mean_curvature,
    varifold_from_mesh,
    weak_identity_residual,
)
from varimin.varifold import SimplicialMesh


def lattice_patch_varifold(n=48, size=2.0):
    mesh = shapes.flat_patch(nx=n, ny=n, size=size)
    return mesh, varifold_from_mesh(mesh)


def interior_vertex_centers(mesh, margin):
    verts = mesh.vertices
    lo = verts[:, :2].min(axis=0) + margin
    hi = verts[:, :2].max(axis=0) - margin
    keep = ((verts[:, :2] > lo) & (verts[:, :2] < hi)).all(axis=1)
    return verts[keep]


class TestDictionary:
    def test_counts(self):
        # 1 constant, S^2 entries, S^2(S^2+1)/2 quadratic products
        assert BumpDictionary(dim=3, eps=0.2).size == 1 + 9 + 45
        assert BumpDictionary(dim=2, eps=0.2).size == 1 + 4 + 10

    def test_dimension_guard(self):
        with pytest.raises(ValueError):
            BumpDictionary(dim=7, eps=0.2)

    def test_support_exact(self):
        d = BumpDictionary(dim=3, eps=0.3)
        y = np.array([[0.3, 0.0, 0.0], [0.31, 0.0, 0.0], [5.0, 0.0, 0.0]])
        assert np.all(d.eta(y) == 0.0)
        assert np.all(d.eta_grad(y) == 0.0)

    def test_eta_gradient_vs_fd(self, rng):
        d = BumpDictionary(dim=3, eps=0.4)
        y = rng.uniform(-0.25, 0.25, size=(40, 3))
        step = 1e-6
        grad = d.eta_grad(y)
        for k in range(3):
            h = np.zeros(3)
            h[k] = step
            fd = (d.eta(y + h) - d.eta(y - h)) / (2 * step)
            assert np.abs(grad[:, k] - fd).max() < 1e-7

    def test_q_gradients_vs_fd(self, rng):
        d = BumpDictionary(dim=3, eps=0.4)
        basis = rng.normal(size=(5, 3, 2))
        from varimin import projector_from_basis

        P = projector_from_basis(basis)
        grads = d.q_grads(P)
        step = 1e-6
        for j in range(3):
            for k in range(3):
                dp = np.zeros((3, 3))
                # symmetric perturbation: P entries (j,k) and (k,j) move together
                dp[j, k] += step
                dp[k, j] += step
                fd = (d.q_values(P + dp) - d.q_values(P - dp)) / (2 * step)
                sym = grads[:, :, j, k] + grads[:, :, k, j]
                assert np.abs(sym - fd).max() < 1e-6


class TestConversions:
    def test_sphere_second_fundamental_from_analytic_tensor(self, sphere_v3):
        # exactness oracle for the conversion formula, so the projectors
        # must be the same tangent planes the analytic fields are built on
        from varimin.varifold import DiscreteVarifold

        amb = Euclidean(3)
        u = sphere_v3.x / np.linalg.norm(sphere_v3.x, axis=1, keepdims=True)
        exact_p = np.eye(3)[None] - np.einsum("ni,nj->nij", u, u)
        v = DiscreteVarifold(x=sphere_v3.x, P=exact_p, w=sphere_v3.w)
        b = shapes.sphere_curvature_tensor(v.x, radius=1.0)
        a = second_fundamental_from_full(b, v, amb)
        expected = shapes.sphere_second_fundamental(v.x, radius=1.0)
        assert np.abs(a - expected).max() < 1e-10
        norm2 = np.einsum("nijk,nijk->n", a, a)
        assert np.abs(norm2 - 2.0).max() < 1e-8

    def test_sphere_tensor_from_second_fundamental(self, sphere_v3):
        amb = Euclidean(3)
        a = shapes.sphere_second_fundamental(sphere_v3.x, radius=1.0)
        b = full_from_second_fundamental(a, sphere_v3, amb)
        expected = shapes.sphere_curvature_tensor(sphere_v3.x, radius=1.0)
        assert np.abs(b - expected).max() < 1e-10

    def test_trace_recovers_mean_curvature(self, sphere_v3):
        b = shapes.sphere_curvature_tensor(sphere_v3.x, radius=1.0)
        h = trace_mean_curvature(b)
        expected = shapes.round_sphere_mean_curvature(sphere_v3.x, radius=1.0)
        assert np.abs(h - expected).max() < 1e-10

    def test_roundtrip_euclidean(self, sphere_v3, rng):
        amb = Euclidean(3)
        a = admissible_random_second_fundamental(rng, sphere_v3)
        b = full_from_second_fundamental(a, sphere_v3, amb)
        back = second_fundamental_from_full(b, sphere_v3, amb)
        assert np.abs(back - a).max() < 1e-10

    def test_roundtrip_sphere_ambient(self, rng):
        amb = Sphere(2, radius=1.0)
        v = varifold_from_mesh(shapes.latitude_circle(n=256, latitude=0.3))
        a = admissible_random_second_fundamental(rng, v)
        b = full_from_second_fundamental(a, v, amb)
        back = second_fundamental_from_full(b, v, amb)
        assert np.abs(back - a).max() < 1e-10

    def test_tensor_symmetric_in_last_two_slots(self, sphere_v3, rng):
        amb = Euclidean(3)
        a = admissible_random_second_fundamental(rng, sphere_v3)
        b = full_from_second_fundamental(a, sphere_v3, amb)
        assert np.abs(b - b.transpose(0, 1, 3, 2)).max() < 1e-12

    def test_geodesic_circle_trace_matches_correction(self):
        # zero second fundamental form inside the sphere ambient: the whole
        # tensor is ambient bending and its trace is the correction vector
        amb = Sphere(2, radius=1.0)
        v = varifold_from_mesh(shapes.latitude_circle(n=512, latitude=0.0))
        a = np.zeros((len(v), 3, 3, 3))
        b = full_from_second_fundamental(a, v, amb)
        h = trace_mean_curvature(b)
        c = curvature_correction(amb, v.x, v.P)
        assert np.abs(h - c).max() < 1e-8
        assert np.abs(h + v.x / np.linalg.norm(v.x, axis=1, keepdims=True) ** 2).max() < 1e-8


class TestRecovery:
    def test_flat_patch_vertex_centers(self):
        mesh, v = lattice_patch_varifold(n=48, size=2.0)
        centers = interior_vertex_centers(mesh, margin=0.5)
        assert len(centers) > 50
        field = recover_curvature_tensor(v, eps=0.35, centers=centers)
        assert field.ok.all()
        assert np.abs(field.B).max() < 1e-6

    def test_flat_patch_atom_centers_stay_small(self):
        mesh, v = lattice_patch_varifold(n=48, size=2.0)
        inner = np.linalg.norm(v.x[:, :2] - 1.0, axis=1) < 0.5
        field = recover_curvature_tensor(v, eps=0.35)
        frob = np.sqrt(np.einsum("nijk,nijk->n", field.B, field.B))
        assert np.median(frob[inner & field.ok]) < 0.05

    def test_unit_sphere_trace(self, sphere_v4):
        field = recover_curvature_tensor(sphere_v4, eps=0.2)
        assert field.ok.all()
        h = trace_mean_curvature(field.B)
        exact = shapes.round_sphere_mean_curvature(sphere_v4.x, radius=1.0)
        rel = np.linalg.norm(h - exact, axis=1) / 2.0
        assert np.median(rel) < 0.05

    def test_unit_sphere_trace_vs_estimator_atomwise(self, sphere_v4):
        field = recover_curvature_tensor(sphere_v4, eps=0.2)
        est = mean_curvature_mesh(sphere_v4)
        h = trace_mean_curvature(field.B)
        gap = np.linalg.norm(h - est.values, axis=1)
        scale = np.linalg.norm(est.values, axis=1)
        assert (gap[field.ok] <= 0.10 * scale[field.ok]).all()

    def test_unit_sphere_tensor_error(self, sphere_v4):
        field = recover_curvature_tensor(sphere_v4, eps=0.2)
        exact = shapes.sphere_curvature_tensor(sphere_v4.x, radius=1.0)
        err = np.sqrt(np.einsum("nijk,nijk->n", field.B - exact, field.B - exact))
        scale = math.sqrt(8.0)  # Frobenius size of the analytic tensor
        assert np.median(err / scale) < 0.20

    def test_unit_circle_in_plane(self):
        mesh3 = shapes.circle_polyline(n=1024, radius=1.0)
        mesh = SimplicialMesh(mesh3.vertices[:, :2].copy(), mesh3.simplices)
        v = varifold_from_mesh(mesh)
        field = recover_curvature_tensor(v, eps=0.15)
        h = trace_mean_curvature(field.B)
        exact = -v.x / np.linalg.norm(v.x, axis=1, keepdims=True) ** 2
        rel = np.linalg.norm(h - exact, axis=1) / 1.0
        assert np.median(rel) < 0.05

    def test_sparse_neighborhood_flagged(self, sphere_v4):
        field = recover_curvature_tensor(
            sphere_v4, eps=0.2, centers=np.array([[3.0, 0.0, 0.0]])
        )
        assert not field.ok[0]

    def test_residuals_and_condition_reported(self, sphere_v3):
        field = recover_curvature_tensor(sphere_v3, eps=0.25)
        assert field.residual.shape == (len(sphere_v3),)
        assert (field.residual >= 0.0).all()
        assert np.isfinite(field.condition[field.ok]).all()

    def test_recovered_second_fundamental_symmetry(self, sphere_v4):
        amb = Euclidean(3)
        field = recover_curvature_tensor(sphere_v4, eps=0.2)
        a = second_fundamental_from_full(field.B, sphere_v4, amb)
        asym = np.sqrt(
            np.einsum(
                "nijk,nijk->n",
                a - a.transpose(0, 2, 1, 3),
                a - a.transpose(0, 2, 1, 3),
            )
        )
        scale = np.sqrt(np.einsum("nijk,nijk->n", a, a))
        assert np.median(asym / scale) < 0.10


class TestWeakIdentityResidual:
    def test_flat_plane_zero_tensor(self):
        mesh, v = lattice_patch_varifold(n=48, size=2.0)
        centers = interior_vertex_centers(mesh, margin=0.5)
        b = np.zeros((len(centers), 3, 3, 3))
        res = weak_identity_residual(v, b, eps=0.35, centers=centers)
        assert res < 1e-8

    def test_sphere_analytic_tensor_beats_zero_control(self, sphere_v3):
        b = shapes.sphere_curvature_tensor(sphere_v3.x, radius=1.0)
        good = weak_identity_residual(sphere_v3, b, eps=0.3)
        control = weak_identity_residual(
            sphere_v3, np.zeros_like(b), eps=0.3
        )
        assert control >= 10.0 * good

    def test_residual_decreases_under_refinement(self, sphere_v3, sphere_v4):
        values = []
        for v in (sphere_v3, sphere_v4):
            b = shapes.sphere_curvature_tensor(v.x, radius=1.0)
            values.append(weak_identity_residual(v, b, eps=0.25))
        order = math.log2(values[0] / values[1])
        assert order >= 0.9


class TestGeodesicDetection:
    def test_great_circle_second_fundamental_small(self):
        amb = Sphere(2, radius=1.0)
        v = varifold_from_mesh(shapes.latitude_circle(n=1024, latitude=0.0))
        field = recover_curvature_tensor(v, eps=0.15)
        a = second_fundamental_from_full(field.B, v, amb)
        norms = np.sqrt(np.einsum("nijk,nijk->n", a, a))
        # correction scale m/r = 1
        assert norms[field.ok].max() < 0.10

    def test_great_circle_full_tensor_not_small(self):
        # distinguishes "no bending inside the ambient" from "no tensor"
        amb = Sphere(2, radius=1.0)
        v = varifold_from_mesh(shapes.latitude_circle(n=1024, latitude=0.0))
        field = recover_curvature_tensor(v, eps=0.15)
        frob = np.sqrt(np.einsum("nijk,nijk->n", field.B, field.B))
        assert np.median(frob[field.ok]) > 0.5
