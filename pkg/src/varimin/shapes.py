"""Reference meshes and the exact curvature fields of the classic shapes.

The generators produce deterministic meshes (fixed vertex order) so runs
are reproducible.  The analytic fields evaluate the smooth-surface
curvature quantities at arbitrary nearby points by first snapping to the
exact shape; they serve as oracles for the estimators.
"""

from __future__ import annotations

import numpy as np

from .varifold import SimplicialMesh

GOLDEN = (1.0 + np.sqrt(5.0)) / 2.0


def icosphere(refinements=3, radius=1.0, center=(0.0, 0.0, 0.0)):
    """Subdivided icosahedron with vertices on the sphere.

    Refinement k has 10*4^k + 2 vertices and 20*4^k faces, all close to
    equilateral.  Faces are oriented outward.
    """
    t = GOLDEN
    verts = np.array(
        [
            [-1, t, 0], [1, t, 0], [-1, -t, 0], [1, -t, 0],
            [0, -1, t], [0, 1, t], [0, -1, -t], [0, 1, -t],
            [t, 0, -1], [t, 0, 1], [-t, 0, -1], [-t, 0, 1],
        ],
        dtype=float,
    )
    verts /= np.linalg.norm(verts[0])
    faces = np.array(
        [
            [0, 11, 5], [0, 5, 1], [0, 1, 7], [0, 7, 10], [0, 10, 11],
            [1, 5, 9], [5, 11, 4], [11, 10, 2], [10, 7, 6], [7, 1, 8],
            [3, 9, 4], [3, 4, 2], [3, 2, 6], [3, 6, 8], [3, 8, 9],
            [4, 9, 5], [2, 4, 11], [6, 2, 10], [8, 6, 7], [9, 8, 1],
        ],
        dtype=np.int64,
    )
    for _ in range(refinements):
        verts, faces = _subdivide_on_sphere(verts, faces)
    out = verts * radius + np.asarray(center, dtype=float)
    return SimplicialMesh(out, faces)


def _subdivide_on_sphere(verts, faces):
    cache = {}
    verts = list(map(np.asarray, verts))

    def midpoint(a, b):
        key = (a, b) if a < b else (b, a)
        if key not in cache:
            p = verts[a] + verts[b]
            verts.append(p / np.linalg.norm(p))
            cache[key] = len(verts) - 1
        return cache[key]

    new_faces = []
    for a, b, c in faces:
        ab, bc, ca = midpoint(a, b), midpoint(b, c), midpoint(c, a)
        new_faces += [[a, ab, ca], [b, bc, ab], [c, ca, bc], [ab, bc, ca]]
    return np.array(verts), np.array(new_faces, dtype=np.int64)


def ellipsoid(semiaxes, refinements=3):
    """Icosphere stretched to the given semiaxes (a, b, c)."""
    base = icosphere(refinements=refinements)
    return base.with_vertices(base.vertices * np.asarray(semiaxes, dtype=float))


def flat_patch(nx=10, ny=10, size=1.0):
    """Triangulated square [0, size]^2 in the z = 0 plane of R^3."""
    xs = np.linspace(0.0, size, nx + 1)
    ys = np.linspace(0.0, size, ny + 1)
    gx, gy = np.meshgrid(xs, ys, indexing="ij")
    verts = np.column_stack([gx.ravel(), gy.ravel(), np.zeros(gx.size)])
    faces = []
    for i in range(nx):
        for j in range(ny):
            a = i * (ny + 1) + j
            b = (i + 1) * (ny + 1) + j
            faces.append([a, b, a + 1])
            faces.append([b, b + 1, a + 1])
    return SimplicialMesh(verts, np.array(faces, dtype=np.int64))


def open_cylinder(radius=0.5, height=2.0, n_around=64, n_along=24):
    """Open tube around the z-axis (no caps); boundary rims stay flagged."""
    thetas = np.linspace(0.0, 2 * np.pi, n_around, endpoint=False)
    zs = np.linspace(-height / 2.0, height / 2.0, n_along + 1)
    ring = np.column_stack([radius * np.cos(thetas), radius * np.sin(thetas)])
    verts = np.vstack([
        np.column_stack([ring, np.full(n_around, z)]) for z in zs
    ])
    faces = []
    for k in range(n_along):
        base = k * n_around
        nxt = (k + 1) * n_around
        for i in range(n_around):
            j = (i + 1) % n_around
            faces.append([base + i, base + j, nxt + i])
            faces.append([base + j, nxt + j, nxt + i])
    return SimplicialMesh(verts, np.array(faces, dtype=np.int64))


def torus(major=1.0, minor=0.4, n_major=64, n_minor=32):
    """Ring torus around the z-axis, both directions closed."""
    us = np.linspace(0.0, 2 * np.pi, n_major, endpoint=False)
    vs = np.linspace(0.0, 2 * np.pi, n_minor, endpoint=False)
    uu, vv = np.meshgrid(us, vs, indexing="ij")
    rad = major + minor * np.cos(vv)
    verts = np.column_stack(
        [
            (rad * np.cos(uu)).ravel(),
            (rad * np.sin(uu)).ravel(),
            (minor * np.sin(vv)).ravel(),
        ]
    )
    faces = []
    for i in range(n_major):
        for j in range(n_minor):
            a = i * n_minor + j
            b = ((i + 1) % n_major) * n_minor + j
            a2 = i * n_minor + (j + 1) % n_minor
            b2 = ((i + 1) % n_major) * n_minor + (j + 1) % n_minor
            faces.append([a, b, a2])
            faces.append([b, b2, a2])
    return SimplicialMesh(verts, np.array(faces, dtype=np.int64))


def circle_polyline(n=256, radius=1.0, center=None, embed_dim=3):
    """Regular closed n-gon in the xy-plane of R^embed_dim."""
    thetas = np.linspace(0.0, 2 * np.pi, n, endpoint=False)
    verts = np.zeros((n, embed_dim))
    verts[:, 0] = radius * np.cos(thetas)
    verts[:, 1] = radius * np.sin(thetas)
    if center is not None:
        verts += np.asarray(center, dtype=float)
    seg = np.column_stack([np.arange(n), (np.arange(n) + 1) % n])
    return SimplicialMesh(verts, seg.astype(np.int64))


def latitude_circle(n=256, latitude=0.0):
    """Closed polyline on the unit 2-sphere at the given latitude.

    latitude is the angle from the equator; latitude = 0 is a great
    circle.  As a curve inside the sphere it has relative curvature of
    magnitude tan(latitude), while its curvature in R^3 has magnitude
    1/cos(latitude).
    """
    mesh = circle_polyline(n=n, radius=np.cos(latitude), embed_dim=3)
    verts = mesh.vertices.copy()
    verts[:, 2] = np.sin(latitude)
    return mesh.with_vertices(verts)


# ---------------------------------------------------------------------------
# analytic curvature fields


def _unit(v):
    return v / np.linalg.norm(v, axis=-1, keepdims=True)


def round_sphere_mean_curvature(x, m=2, radius=1.0, center=(0.0, 0.0, 0.0)):
    """Mean curvature vector -m*u/r of a round m-sphere, at snapped points."""
    u = _unit(np.asarray(x, dtype=float) - np.asarray(center, dtype=float))
    return -(m / radius) * u


def sphere_curvature_tensor(x, radius=1.0, center=(0.0, 0.0, 0.0)):
    """Full curvature tensor B of the codimension-one round sphere.

    B_ijk = -(P_ij n_k + P_ik n_j)/r with n the outward unit normal and
    P = I - n n^T.  Its trace over (j, i, j) is the mean curvature
    -m n / r.
    """
    x = np.atleast_2d(np.asarray(x, dtype=float))
    n = _unit(x - np.asarray(center, dtype=float))
    s = x.shape[1]
    P = np.eye(s)[None] - np.einsum("ni,nj->nij", n, n)
    B = -(np.einsum("nij,nk->nijk", P, n) + np.einsum("nik,nj->nijk", P, n)) / radius
    return B


def sphere_second_fundamental(x, radius=1.0, center=(0.0, 0.0, 0.0)):
    """A^k_ij = -P_ij n_k / r for the round codimension-one sphere.

    Stored as A[n, i, j, k] with the normal-valued slot last, so
    |A|^2 = m / r^2.
    """
    x = np.atleast_2d(np.asarray(x, dtype=float))
    n = _unit(x - np.asarray(center, dtype=float))
    s = x.shape[1]
    P = np.eye(s)[None] - np.einsum("ni,nj->nij", n, n)
    return -np.einsum("nij,nk->nijk", P, n) / radius


def circle_curvature_tensor(x, radius=1.0, center=None, embed_dim=3):
    """Full curvature tensor of a circle in the xy-plane.

    B = -(t (x) u (x) t + t (x) t (x) u)/r with t the unit tangent and u
    the in-plane radial unit vector; the trace recovers H = -u/r.
    """
    x = np.atleast_2d(np.asarray(x, dtype=float))
    if center is not None:
        x = x - np.asarray(center, dtype=float)
    u = np.zeros_like(x)
    plane = _unit(x[:, :2])
    u[:, :2] = plane
    t = np.zeros_like(x)
    t[:, 0] = -plane[:, 1]
    t[:, 1] = plane[:, 0]
    B = -(
        np.einsum("ni,nj,nk->nijk", t, u, t) + np.einsum("ni,nj,nk->nijk", t, t, u)
    ) / radius
    return B


def torus_angles(x, major=1.0, minor=0.4):
    x = np.atleast_2d(np.asarray(x, dtype=float))
    u = np.arctan2(x[:, 1], x[:, 0])
    rho = np.hypot(x[:, 0], x[:, 1])
    v = np.arctan2(x[:, 2], rho - major)
    return u, v


def torus_mean_curvature(x, major=1.0, minor=0.4):
    """Mean curvature vector of the ring torus at snapped points.

    Principal curvatures w.r.t. the outward normal are cos v/(R + a cos v)
    and 1/a; the vector is -(sum) * n.
    """
    u, v = torus_angles(x, major, minor)
    n = np.column_stack([np.cos(v) * np.cos(u), np.cos(v) * np.sin(u), np.sin(v)])
    k1 = np.cos(v) / (major + minor * np.cos(v))
    k2 = 1.0 / minor
    return -(k1 + k2)[:, None] * n


def torus_curvature_tensor(x, major=1.0, minor=0.4):
    """Full curvature tensor B of the ring torus via its shape operator."""
    u, v = torus_angles(x, major, minor)
    n = np.column_stack([np.cos(v) * np.cos(u), np.cos(v) * np.sin(u), np.sin(v)])
    e_u = np.column_stack([-np.sin(u), np.cos(u), np.zeros_like(u)])
    e_v = np.column_stack([-np.sin(v) * np.cos(u), -np.sin(v) * np.sin(u), np.cos(v)])
    k1 = np.cos(v) / (major + minor * np.cos(v))
    k2 = np.full_like(k1, 1.0 / minor)
    W = k1[:, None, None] * np.einsum("ni,nj->nij", e_u, e_u)
    W += k2[:, None, None] * np.einsum("ni,nj->nij", e_v, e_v)
    return -(np.einsum("nij,nk->nijk", W, n) + np.einsum("nik,nj->nijk", W, n))


def cylinder_mean_curvature(x, radius=0.5):
    """Mean curvature vector -u/r of the z-axis cylinder (inward)."""
    x = np.atleast_2d(np.asarray(x, dtype=float))
    u = np.zeros_like(x)
    u[:, :2] = _unit(x[:, :2])
    return -u / radius
