"""Core discrete varifold types and measure-level operations.

Atoms live on the Grassmann bundle: positions x in R^S, orthogonal
projectors P onto m-planes, weights w > 0.  Integrals against the
varifold are plain weighted sums over atoms, so mass, ball masses and
diameters are exact operations on the atom set.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace

import numpy as np
from scipy import sparse
from scipy.sparse.csgraph import connected_components as _cc
from scipy.spatial import ConvexHull, QhullError, cKDTree

SYM_TOL = 1e-12
IDEM_TOL = 1e-10
TRACE_TOL = 1e-10


def projector_from_basis(basis):
    """Orthogonal projector onto the span of the given basis vectors.

    basis: (..., S, m) with linearly independent columns.  Uses a thin QR
    factorization; raises if any simplex basis is numerically rank
    deficient.
    """
    basis = np.asarray(basis, dtype=float)
    q, r = np.linalg.qr(basis)
    diag = np.abs(np.diagonal(r, axis1=-2, axis2=-1))
    scale = np.linalg.norm(basis, axis=-2).max(axis=-1)
    if np.any(diag < 1e-12 * np.maximum(scale, 1e-300)[..., None]):
        raise ValueError("degenerate simplex: basis is rank deficient")
    return np.einsum("...ik,...jk->...ij", q, q)


def projector_defects(P):
    """Max-abs symmetry defect, idempotency defect, and traces per atom."""
    P = np.asarray(P, dtype=float)
    sym = np.abs(P - np.swapaxes(P, -1, -2)).reshape(P.shape[0], -1).max(axis=1)
    idem = np.abs(np.einsum("nij,njk->nik", P, P) - P)
    idem = idem.reshape(P.shape[0], -1).max(axis=1)
    tr = np.trace(P, axis1=-2, axis2=-1)
    return sym, idem, tr


def validate_projectors(P, m):
    """Raise ValueError unless every P is a symmetric idempotent of rank m."""
    sym, idem, tr = projector_defects(P)
    if sym.max(initial=0.0) > SYM_TOL:
        raise ValueError(f"projector symmetry defect {sym.max():.3e} > {SYM_TOL}")
    if idem.max(initial=0.0) > IDEM_TOL:
        raise ValueError(f"projector idempotency defect {idem.max():.3e} > {IDEM_TOL}")
    terr = np.abs(tr - m).max(initial=0.0)
    if terr > TRACE_TOL:
        raise ValueError(f"projector trace defect {terr:.3e} > {TRACE_TOL} (m={m})")


@dataclass
class SimplicialMesh:
    """Simplicial complex with vertices in R^S; segments (m=1) or triangles (m=2)."""

    vertices: np.ndarray
    simplices: np.ndarray

    def __post_init__(self):
        self.vertices = np.asarray(self.vertices, dtype=float)
        self.simplices = np.asarray(self.simplices, dtype=np.int64)
        if self.vertices.ndim != 2 or self.simplices.ndim != 2:
            raise ValueError("vertices must be (nv, S), simplices (nf, m+1)")
        if self.simplices.shape[1] not in (2, 3):
            raise ValueError("only segment and triangle meshes are supported")
        if self.simplices.size and self.simplices.max() >= len(self.vertices):
            raise ValueError("simplex index exceeds vertex count")

    @property
    def m(self):
        return self.simplices.shape[1] - 1

    @property
    def dim(self):
        return self.vertices.shape[1]

    def with_vertices(self, vertices):
        return SimplicialMesh(np.asarray(vertices, dtype=float), self.simplices.copy())

    def concatenate(self, other):
        if other.dim != self.dim or other.m != self.m:
            raise ValueError("meshes must share ambient dimension and element type")
        shifted = other.simplices + len(self.vertices)
        return SimplicialMesh(
            np.vstack([self.vertices, other.vertices]),
            np.vstack([self.simplices, shifted]),
        )

    def tangent_bases(self):
        """Edge-vector bases (nf, S, m) spanning each simplex plane."""
        pts = self.vertices[self.simplices]
        return np.stack(
            [pts[:, k] - pts[:, 0] for k in range(1, self.simplices.shape[1])], axis=-1
        )

    def centroids(self):
        return self.vertices[self.simplices].mean(axis=1)

    def simplex_measures(self):
        """Lengths (m=1) or areas (m=2) via the Gram determinant."""
        e = self.tangent_bases()
        gram = np.einsum("nsk,nsl->nkl", e, e)
        det = np.linalg.det(gram) if self.m > 1 else gram[:, 0, 0]
        vol = np.sqrt(np.maximum(det, 0.0))
        return vol / (1.0 if self.m == 1 else 2.0)

    def total_measure(self):
        return float(self.simplex_measures().sum())

    def edges(self):
        if self.m == 1:
            e = self.simplices
        else:
            f = self.simplices
            e = np.vstack([f[:, [0, 1]], f[:, [1, 2]], f[:, [2, 0]]])
        return np.sort(e, axis=1)

    def mean_edge_length(self):
        e = np.unique(self.edges(), axis=0)
        d = self.vertices[e[:, 1]] - self.vertices[e[:, 0]]
        return float(np.linalg.norm(d, axis=1).mean())

    def boundary_vertex_mask(self):
        """Vertices on edges with only one incident simplex (endpoints for m=1)."""
        mask = np.zeros(len(self.vertices), dtype=bool)
        if self.m == 1:
            counts = np.bincount(self.simplices.ravel(), minlength=len(self.vertices))
            mask[counts == 1] = True
            return mask
        e = self.edges()
        uniq, counts = np.unique(e, axis=0, return_counts=True)
        rim = uniq[counts == 1]
        mask[np.unique(rim)] = True
        return mask

    def boundary_simplex_mask(self):
        bv = self.boundary_vertex_mask()
        return bv[self.simplices].any(axis=1)

    def oriented_volume(self):
        """Signed enclosed volume of a closed, consistently oriented triangle mesh."""
        if self.m != 2 or self.dim != 3:
            raise ValueError("oriented volume needs a triangle mesh in R^3")
        pts = self.vertices[self.simplices]
        return float(np.einsum("ni,ni->n", pts[:, 0], np.cross(pts[:, 1], pts[:, 2])).sum() / 6.0)


@dataclass
class DiscreteVarifold:
    """Finite atom measure on the Grassmann bundle of m-planes in R^S."""

    x: np.ndarray
    P: np.ndarray
    w: np.ndarray
    interior: np.ndarray = None
    source: SimplicialMesh = None
    simplex_index: np.ndarray = None
    multiplicity: int = 1

    def __post_init__(self):
        self.x = np.asarray(self.x, dtype=float)
        self.P = np.asarray(self.P, dtype=float)
        self.w = np.asarray(self.w, dtype=float)
        if self.interior is None:
            self.interior = np.ones(len(self.x), dtype=bool)
        if np.any(self.w <= 0):
            raise ValueError("atom weights must be positive")

    def __len__(self):
        return len(self.x)

    @property
    def m(self):
        return int(round(np.trace(self.P[0])))

    @property
    def dim(self):
        return self.x.shape[1]

    def mass(self):
        return float(self.w.sum())

    def subset(self, mask):
        mask = np.asarray(mask)
        return DiscreteVarifold(
            x=self.x[mask],
            P=self.P[mask],
            w=self.w[mask],
            interior=self.interior[mask],
            source=self.source,
            simplex_index=None if self.simplex_index is None else self.simplex_index[mask],
            multiplicity=self.multiplicity,
        )

    def transformed(self, rotation=None, translation=None):
        x, P = self.x, self.P
        if rotation is not None:
            rotation = np.asarray(rotation, dtype=float)
            x = x @ rotation.T
            P = np.einsum("ab,nbc,dc->nad", rotation, P, rotation)
        if translation is not None:
            x = x + np.asarray(translation, dtype=float)
        return replace(self, x=x, P=P, source=None, simplex_index=None)


def varifold_from_mesh(mesh, multiplicity=1, validate=True):
    """Atomize a mesh: one atom per simplex at the centroid.

    Weight = multiplicity * simplex measure, so the weights attached to a
    simplex sum to multiplicity times its volume.  The plane is the
    simplex's own affine plane.  Atoms of simplices touching the mesh
    boundary are flagged non-interior so curvature assertions can skip
    them.
    """
    if multiplicity < 1 or int(multiplicity) != multiplicity:
        raise ValueError("multiplicity must be a positive integer")
    P = projector_from_basis(mesh.tangent_bases())
    w = multiplicity * mesh.simplex_measures()
    if np.any(w <= 0):
        raise ValueError("mesh contains degenerate simplices")
    v = DiscreteVarifold(
        x=mesh.centroids(),
        P=P,
        w=w,
        interior=~mesh.boundary_simplex_mask(),
        source=mesh,
        simplex_index=np.arange(len(mesh.simplices)),
        multiplicity=int(multiplicity),
    )
    if validate:
        validate_projectors(v.P, mesh.m)
    return v


def ball_mass(v, center, radius):
    """Varifold mass of the closed extrinsic ball B(center, radius)."""
    d = np.linalg.norm(v.x - np.asarray(center, dtype=float), axis=1)
    return float(v.w[d <= radius].sum())


def _max_pairwise(x, metric):
    best = 0.0
    step = max(1, 2_000_000 // max(len(x), 1))
    for i in range(0, len(x), step):
        d = metric(x[i : i + step, None, :], x[None, :, :])
        best = max(best, float(d.max()))
    return best


def support_diameter(v, ambient=None):
    """Diameter of the atom support, extrinsic or ambient-geodesic.

    With no ambient (or a euclidean one) this is the exact euclidean
    diameter, computed on the convex hull when the cloud is large.  For a
    sphere ambient the geodesic distance is monotone in the chord, so the
    extrinsic diameter pair realizes the geodesic diameter too.  Product
    ambients fall back to a chunked exact pairwise search.
    """
    x = v.x
    if len(x) == 0:
        return 0.0
    if len(x) == 1:
        return 0.0

    kind = "euclidean"
    if ambient is not None:
        kind = getattr(ambient, "kind", "euclidean")

    if kind == "product":
        return _max_pairwise(x, lambda a, b: ambient.geodesic_distance(a, b))

    chord = _euclidean_diameter(x)
    if kind == "euclidean":
        return chord
    if kind == "sphere":
        return ambient.geodesic_from_chord(chord)
    raise ValueError(f"unsupported ambient kind {kind!r}")


def _euclidean_diameter(x):
    pts = x
    if len(x) > 300 and x.shape[1] in (2, 3):
        try:
            hull = ConvexHull(x)
            pts = x[hull.vertices]
        except QhullError:
            pass  # degenerate cloud (e.g. coplanar); brute force below
    return _max_pairwise(pts, lambda a, b: np.linalg.norm(a - b, axis=-1))


def connected_components(v, link_radius):
    """Number of components of the atom graph linking atoms within link_radius."""
    tree = cKDTree(v.x)
    pairs = tree.query_pairs(link_radius, output_type="ndarray")
    n = len(v.x)
    if len(pairs) == 0:
        return n, np.arange(n)
    g = sparse.coo_matrix(
        (np.ones(len(pairs)), (pairs[:, 0], pairs[:, 1])), shape=(n, n)
    )
    count, labels = _cc(g, directed=False)
    return int(count), labels


def hausdorff_distance(x, y):
    """Symmetric Hausdorff distance between two point clouds (exact)."""
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    tx = cKDTree(x)
    ty = cKDTree(y)
    d_xy = ty.query(x)[0].max() if len(x) else 0.0
    d_yx = tx.query(y)[0].max() if len(y) else 0.0
    return float(max(d_xy, d_yx))
