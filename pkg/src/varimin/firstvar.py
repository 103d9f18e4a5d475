"""First variation of a discrete varifold and mean curvature estimators.

The first variation pairs a varifold with a compactly supported vector
field X through the tangential divergence, summed atom by atom.  When the
atoms carry a consistent notion of curvature the same pairing is minus the
weighted sum of H . X, which is what the estimators in this module try to
reproduce: a combinatorial one for simplicial sources (cotangent weights
on triangulations, turning angles on polylines) and a smoothing-kernel one
that needs nothing but the atoms themselves.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.spatial import cKDTree

from .ambient import curvature_correction
from .varifold import DiscreteVarifold, SimplicialMesh


class AffineField:
    """X(x) = A x + b with constant Jacobian A."""

    def __init__(self, matrix, offset):
        self.matrix = np.asarray(matrix, dtype=float)
        self.offset = np.asarray(offset, dtype=float)

    def value(self, x):
        return x @ self.matrix.T + self.offset

    def jacobian(self, x):
        n = x.shape[0]
        return np.broadcast_to(self.matrix, (n,) + self.matrix.shape).copy()


class RadialBumpField:
    """X(x) = (x - c) * psi(|x - c|) with a C^1 cutoff psi.

    psi is identically 1 for |x - c| <= inner, identically 0 for
    |x - c| >= outer, and a cubic smoothstep in |x - c|^2 in between, so
    the field is differentiable everywhere including the sphere seams.
    """

    def __init__(self, center, inner, outer):
        if not 0.0 < inner < outer:
            raise ValueError("need 0 < inner < outer")
        self.center = np.asarray(center, dtype=float)
        self.inner = float(inner)
        self.outer = float(outer)

    def _psi(self, r2):
        span = self.outer**2 - self.inner**2
        s = np.clip((r2 - self.inner**2) / span, 0.0, 1.0)
        psi = 1.0 - s * s * (3.0 - 2.0 * s)
        dpsi_dr2 = np.where((s > 0.0) & (s < 1.0), -6.0 * s * (1.0 - s) / span, 0.0)
        return psi, dpsi_dr2

    def value(self, x):
        y = x - self.center
        r2 = np.einsum("ni,ni->n", y, y)
        psi, _ = self._psi(r2)
        return y * psi[:, None]

    def jacobian(self, x):
        y = x - self.center
        r2 = np.einsum("ni,ni->n", y, y)
        psi, dpsi_dr2 = self._psi(r2)
        s = x.shape[1]
        jac = psi[:, None, None] * np.eye(s)
        jac += 2.0 * dpsi_dr2[:, None, None] * np.einsum("ni,nj->nij", y, y)
        return jac


class PolynomialField:
    """Componentwise polynomial field, total degree at most 3.

    terms is a list of (coefficients, exponents) pairs where coefficients
    has shape (dim,) and exponents is an integer multi-index of the same
    shape; the term contributes coefficients * prod_d x_d**exponents_d.
    """

    def __init__(self, terms):
        self.terms = [
            (np.asarray(c, dtype=float), np.asarray(e, dtype=int)) for c, e in terms
        ]
        for _, e in self.terms:
            if e.sum() > 3 or (e < 0).any():
                raise ValueError("exponents must be nonnegative with total degree <= 3")

    @classmethod
    def random(cls, rng, dim, degree=3, n_terms=4, scale=1.0):
        terms = []
        for _ in range(n_terms):
            expo = np.zeros(dim, dtype=int)
            for _ in range(rng.integers(0, degree + 1)):
                expo[rng.integers(dim)] += 1
            terms.append((scale * rng.normal(size=dim), expo))
        return cls(terms)

    def value(self, x):
        out = np.zeros_like(x, dtype=float)
        for coef, expo in self.terms:
            mono = np.prod(x ** expo[None, :], axis=1)
            out += mono[:, None] * coef
        return out

    def jacobian(self, x):
        n, s = x.shape
        jac = np.zeros((n, s, s))
        for coef, expo in self.terms:
            powers = x ** expo[None, :]
            for j in range(s):
                if expo[j] == 0:
                    continue
                others = np.prod(np.delete(powers, j, axis=1), axis=1)
                dmono = expo[j] * x[:, j] ** (expo[j] - 1) * others
                jac[:, :, j] += dmono[:, None] * coef
        return jac


def first_variation(v: DiscreteVarifold, vector_field) -> float:
    """Weighted sum of the tangential divergence of the field over the atoms."""
    jac = vector_field.jacobian(v.x)
    return float(np.einsum("n,nij,nij->", v.w, v.P, jac))


@dataclass
class CurvatureField:
    """Per-atom curvature vectors plus bookkeeping from the estimator.

    values holds the estimated mean curvature vector for every atom; the
    interior mask marks the atoms whose stencil was complete (estimates on
    the rest are kept but should not be trusted).  The relative variants
    fill in correction, relative and tangency_defect; the last one is the
    size of the component sticking out of the ambient tangent plane and is
    reported purely as a diagnostic.
    """

    values: np.ndarray
    interior: np.ndarray
    estimator: str
    eps: float | None = None
    neighbor_counts: np.ndarray | None = None
    correction: np.ndarray | None = None
    relative: np.ndarray | None = None
    tangency_defect: np.ndarray | None = None
    metadata: dict = field(default_factory=dict)


def _mesh_source(v: DiscreteVarifold) -> SimplicialMesh:
    if v.source is None:
        raise ValueError("varifold has no mesh source; use mean_curvature_kernel")
    return v.source


def _triangle_corner_cotangents(verts, faces):
    """Cotangent of the interior angle at every corner of every triangle."""
    cots = np.empty(faces.shape, dtype=float)
    for corner in range(3):
        p = verts[faces[:, corner]]
        q = verts[faces[:, (corner + 1) % 3]]
        r = verts[faces[:, (corner + 2) % 3]]
        u = q - p
        w = r - p
        dot = np.einsum("ni,ni->n", u, w)
        uu = np.einsum("ni,ni->n", u, u)
        ww = np.einsum("ni,ni->n", w, w)
        sin_area = np.sqrt(np.maximum(uu * ww - dot * dot, 1e-300))
        cots[:, corner] = dot / sin_area
    return cots


def _vertex_mixed_areas(verts, faces, cots, face_areas):
    """Per-vertex areas: Voronoi inside non-obtuse triangles, clipped otherwise."""
    nv = len(verts)
    areas = np.zeros(nv)
    edge2 = np.empty(faces.shape, dtype=float)
    for corner in range(3):
        q = verts[faces[:, (corner + 1) % 3]]
        r = verts[faces[:, (corner + 2) % 3]]
        edge2[:, corner] = np.einsum("ni,ni->n", q - r, q - r)

    obtuse_corner = np.argmin(cots, axis=1)
    is_obtuse = np.take_along_axis(cots, obtuse_corner[:, None], axis=1)[:, 0] < 0.0

    for corner in range(3):
        jc = (corner + 1) % 3
        kc = (corner + 2) % 3
        voronoi = (edge2[:, kc] * cots[:, kc] + edge2[:, jc] * cots[:, jc]) / 8.0
        clipped = np.where(obtuse_corner == corner, 0.5, 0.25) * face_areas
        np.add.at(areas, faces[:, corner], np.where(is_obtuse, clipped, voronoi))
    return areas


def _vertex_mean_curvature_triangles(mesh: SimplicialMesh):
    verts, faces = mesh.vertices, mesh.simplices
    cots = _triangle_corner_cotangents(verts, faces)
    face_areas = mesh.simplex_measures()
    areas = _vertex_mixed_areas(verts, faces, cots, face_areas)

    grad = np.zeros_like(verts)
    for corner in range(3):
        jc = (corner + 1) % 3
        kc = (corner + 2) % 3
        p = verts[faces[:, corner]]
        contrib = (
            cots[:, jc, None] * (p - verts[faces[:, kc]])
            + cots[:, kc, None] * (p - verts[faces[:, jc]])
        ) / 2.0
        np.add.at(grad, faces[:, corner], contrib)

    ok = ~mesh.boundary_vertex_mask() & (areas > 0.0)
    h = np.zeros_like(verts)
    h[ok] = -grad[ok] / areas[ok, None]
    return h, ok


def _vertex_mean_curvature_polyline(mesh: SimplicialMesh):
    verts, segs = mesh.vertices, mesh.simplices
    nv = len(verts)
    grad = np.zeros_like(verts)
    length = np.zeros(nv)
    valence = np.zeros(nv, dtype=int)

    edge = verts[segs[:, 1]] - verts[segs[:, 0]]
    norms = np.linalg.norm(edge, axis=1)
    unit = edge / norms[:, None]
    np.add.at(grad, segs[:, 0], -unit)
    np.add.at(grad, segs[:, 1], unit)
    np.add.at(length, segs[:, 0], 0.5 * norms)
    np.add.at(length, segs[:, 1], 0.5 * norms)
    np.add.at(valence, segs.reshape(-1), 1)

    ok = valence == 2
    h = np.zeros_like(verts)
    h[ok] = -grad[ok] / length[ok, None]
    return h, ok


def mean_curvature_mesh(v: DiscreteVarifold) -> CurvatureField:
    """Mean curvature from the simplicial source, sampled at the atoms.

    Vertex values come from the gradient of total measure divided by the
    vertex's share of it (cotangent weights with mixed Voronoi areas for
    triangulations, turning of unit edge vectors over half the incident
    length for polylines); atoms average the values at their corners.
    Atoms whose simplex touches the mesh boundary are flagged.
    """
    mesh = _mesh_source(v)
    if mesh.m == 2:
        h_vertex, vertex_ok = _vertex_mean_curvature_triangles(mesh)
    else:
        h_vertex, vertex_ok = _vertex_mean_curvature_polyline(mesh)

    values = h_vertex[mesh.simplices].mean(axis=1)
    interior = vertex_ok[mesh.simplices].all(axis=1) & v.interior
    return CurvatureField(values=values, interior=interior, estimator="mesh")


def mean_curvature_kernel(
    v: DiscreteVarifold,
    eps: float,
    centers: np.ndarray | None = None,
    min_neighbors: int = 4,
) -> CurvatureField:
    """Mean curvature from the atoms alone, by pairing with a bump test field.

    Around each center the atoms are paired against x -> rho_eps(x - x0),
    rho_eps(y) = (1 - |y|^2/eps^2)^2 on |y| <= eps, and the tangentially
    projected gradient sum is divided by the local mass.  Centers whose
    neighborhood is empty or too thin are flagged and get a zero vector.
    """
    if eps <= 0.0:
        raise ValueError("eps must be positive")
    at_atoms = centers is None
    if centers is None:
        centers = v.x
    centers = np.asarray(centers, dtype=float)

    tree = cKDTree(v.x)
    neighbor_lists = tree.query_ball_point(centers, eps)
    counts = np.array([len(nb) for nb in neighbor_lists], dtype=int)
    flat = np.concatenate([np.asarray(nb, dtype=int) for nb in neighbor_lists]) if counts.sum() else np.empty(0, dtype=int)
    owner = np.repeat(np.arange(len(centers)), counts)

    values = np.zeros_like(centers)
    den = np.zeros(len(centers))
    if len(flat):
        y = v.x[flat] - centers[owner]
        t = 1.0 - np.einsum("ni,ni->n", y, y) / eps**2
        t = np.maximum(t, 0.0)
        rho = t * t
        tangential = np.einsum("nij,nj->ni", v.P[flat], y)
        num_pairs = v.w[flat, None] * (4.0 / eps**2) * t[:, None] * tangential
        np.add.at(values, owner, num_pairs)
        np.add.at(den, owner, v.w[flat] * rho)

    good = (den > 0.0) & (counts >= min_neighbors)
    values[good] /= den[good, None]
    values[~good] = 0.0
    if at_atoms:
        # the curvature vector of an integral varifold is perpendicular to
        # its plane, so the in-plane part of the raw estimate is sampling
        # noise; drop it when each center carries a projector of its own
        values -= np.einsum("nij,nj->ni", v.P, values)
    return CurvatureField(
        values=values,
        interior=good,
        estimator="kernel",
        eps=eps,
        neighbor_counts=counts,
    )


def relative_mean_curvature(
    v: DiscreteVarifold, ambient, base: CurvatureField
) -> CurvatureField:
    """Subtract the ambient curvature term from an estimated mean curvature.

    Returns a new field whose relative attribute holds base minus the
    ambient correction, atom by atom.  tangency_defect records how far the
    relative vector sticks out of the ambient tangent plane; it is a
    diagnostic only and nothing in the package asserts on it.
    """
    correction = curvature_correction(ambient, v.x, v.P)
    relative = base.values - correction
    q = ambient.tangent_projector(v.x)
    normal_part = relative - np.einsum("nij,nj->ni", q, relative)
    return CurvatureField(
        values=base.values,
        interior=base.interior.copy(),
        estimator=base.estimator + "+relative",
        eps=base.eps,
        neighbor_counts=base.neighbor_counts,
        correction=correction,
        relative=relative,
        tangency_defect=np.linalg.norm(normal_part, axis=1),
    )


def _pointwise_magnitude(values: np.ndarray) -> np.ndarray:
    values = np.asarray(values, dtype=float)
    if values.ndim == 1:
        return np.abs(values)
    return np.linalg.norm(values, axis=1)


def energy_integral(v: DiscreteVarifold, values: np.ndarray, p: float) -> float:
    """Integral of |values|^p against the weight measure."""
    return float((v.w * _pointwise_magnitude(values) ** p).sum())


def lp_norm(v: DiscreteVarifold, values: np.ndarray, p: float) -> float:
    return energy_integral(v, values, p) ** (1.0 / p)
