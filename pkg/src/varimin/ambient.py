"""Ambient manifold catalog and compact constraint regions.

Each ambient exposes the tangent-projector field Q(x), its spatial
derivative dQ_ij/dx_k, geodesic distances, and the curvature-correction
contraction c_i(x, P) = P_jk dQ_ij/dx_k that converts extrinsic mean
curvature into the curvature relative to the manifold.  All formulas are
closed-form; a finite-difference checker is provided for the derivative
fields.
"""

from __future__ import annotations

import numpy as np


class Euclidean:
    kind = "euclidean"

    def __init__(self, dim):
        self.dim = int(dim)

    def tangent_projector(self, x):
        x = np.atleast_2d(x)
        return np.broadcast_to(np.eye(self.dim), (len(x), self.dim, self.dim)).copy()

    def projector_derivative(self, x):
        x = np.atleast_2d(x)
        return np.zeros((len(x), self.dim, self.dim, self.dim))

    def project_to_manifold(self, x):
        return np.array(x, dtype=float)

    def geodesic_distance(self, a, b):
        a = np.asarray(a, dtype=float)
        b = np.asarray(b, dtype=float)
        return np.linalg.norm(a - b, axis=-1)

    def correction_bound(self, m):
        return 0.0

    def config(self):
        return {"kind": "euclidean", "dim": self.dim}


class Sphere:
    """Round n-sphere of the given radius embedded in R^{n+1}.

    The projector field Q(x) = I - u u^T (u the unit radial direction) is
    extended off the sphere radially, which is what the derivative
    formula differentiates.
    """

    kind = "sphere"

    def __init__(self, surface_dim, radius=1.0, center=None):
        self.surface_dim = int(surface_dim)
        self.radius = float(radius)
        self.dim = self.surface_dim + 1
        if center is None:
            center = np.zeros(self.dim)
        self.center = np.asarray(center, dtype=float)
        if self.center.shape != (self.dim,):
            raise ValueError("center must have length surface_dim + 1")
        if self.radius <= 0:
            raise ValueError("radius must be positive")

    def _radial(self, x):
        y = np.atleast_2d(x) - self.center
        rho = np.linalg.norm(y, axis=1, keepdims=True)
        if np.any(rho == 0):
            raise ValueError("tangent projector undefined at the sphere center")
        return y / rho, rho[:, 0]

    def tangent_projector(self, x):
        u, _ = self._radial(x)
        return np.eye(self.dim)[None] - np.einsum("ni,nj->nij", u, u)

    def projector_derivative(self, x):
        u, rho = self._radial(x)
        eye = np.eye(self.dim)
        d = -np.einsum("ik,nj->nijk", eye, u) - np.einsum("jk,ni->nijk", eye, u)
        d += 2.0 * np.einsum("ni,nj,nk->nijk", u, u, u)
        return d / rho[:, None, None, None]

    def project_to_manifold(self, x):
        u, _ = self._radial(x)
        return self.center + self.radius * u

    def geodesic_distance(self, a, b):
        ua, _ = self._radial(a)
        ub, _ = self._radial(b)
        cos = np.clip(np.einsum("...i,...i->...", ua, ub), -1.0, 1.0)
        return self.radius * np.arccos(cos)

    def geodesic_from_chord(self, chord):
        s = np.clip(np.asarray(chord, dtype=float) / (2.0 * self.radius), -1.0, 1.0)
        return float(2.0 * self.radius * np.arcsin(s))

    def correction_bound(self, m):
        return m / self.radius

    def config(self):
        return {
            "kind": "sphere",
            "n": self.surface_dim,
            "r": self.radius,
            "center": self.center.tolist(),
        }


class Product:
    """Product of a catalog core manifold with a flat R^s factor."""

    kind = "product"

    def __init__(self, core, extra_dim):
        self.core = core
        self.extra_dim = int(extra_dim)
        self.dim = core.dim + self.extra_dim

    def _split(self, x):
        x = np.atleast_2d(x)
        return x[:, : self.core.dim], x[:, self.core.dim :]

    def tangent_projector(self, x):
        xc, _ = self._split(x)
        q = np.zeros((len(xc), self.dim, self.dim))
        q[:, : self.core.dim, : self.core.dim] = self.core.tangent_projector(xc)
        q[:, self.core.dim :, self.core.dim :] = np.eye(self.extra_dim)
        return q

    def projector_derivative(self, x):
        xc, _ = self._split(x)
        d = np.zeros((len(xc), self.dim, self.dim, self.dim))
        dc = self.core.projector_derivative(xc)
        k = self.core.dim
        d[:, :k, :k, :k] = dc
        return d

    def project_to_manifold(self, x):
        xc, xe = self._split(x)
        return np.hstack([self.core.project_to_manifold(xc), xe])

    def geodesic_distance(self, a, b):
        ac, ae = self._split(a)
        bc, be = self._split(b)
        # broadcasting-friendly: fall back to direct evaluation shapes
        dc = self.core.geodesic_distance(ac, bc)
        de = np.linalg.norm(ae - be, axis=-1)
        return np.hypot(dc, de)

    def correction_bound(self, m):
        return self.core.correction_bound(m)

    def config(self):
        return {
            "kind": "product",
            "core": self.core.config(),
            "extra_dim": self.extra_dim,
        }


def curvature_correction(ambient, x, P):
    """Bending of the ambient manifold traced over each atom's plane.

    c_k = sum_{q,l} P_ql dQ_lk/dx_q: the second fundamental form of the
    ambient manifold applied to an orthonormal basis of the plane and
    summed.  On a round sphere it is -m u / r, so |c| = m/r and Q c = 0;
    it is what separates full-space mean curvature from the relative one.
    """
    dq = ambient.projector_derivative(x)
    return np.einsum("nql,nlkq->nk", np.atleast_3d(P), dq)


def projector_derivative_fd_error(ambient, xs, step=1e-5):
    """Max abs deviation between analytic dQ and central finite differences."""
    xs = np.atleast_2d(xs)
    analytic = ambient.projector_derivative(xs)
    worst = 0.0
    for k in range(ambient.dim):
        h = np.zeros(ambient.dim)
        h[k] = step
        qp = ambient.tangent_projector(xs + h)
        qm = ambient.tangent_projector(xs - h)
        fd = (qp - qm) / (2.0 * step)
        worst = max(worst, float(np.abs(analytic[..., k] - fd).max()))
    return worst


class BallSubset:
    """Closed ball constraint region; projection is the radial clamp."""

    kind = "ball"

    def __init__(self, radius, center=(0.0, 0.0, 0.0)):
        self.radius = float(radius)
        self.center = np.asarray(center, dtype=float)

    def contains(self, x, tol=1e-12):
        d = np.linalg.norm(np.atleast_2d(x) - self.center, axis=1)
        return d <= self.radius + tol

    def project(self, x):
        x = np.atleast_2d(np.asarray(x, dtype=float))
        y = x - self.center
        d = np.linalg.norm(y, axis=1, keepdims=True)
        scale = np.minimum(1.0, self.radius / np.maximum(d, 1e-300))
        return self.center + y * scale

    def config(self):
        return {"kind": "ball", "R": self.radius, "center": self.center.tolist()}


class ShellSubset:
    """Closed spherical shell; the center point projects to +e1 * inner."""

    kind = "shell"

    def __init__(self, inner, outer, center=(0.0, 0.0, 0.0)):
        if not 0.0 < inner < outer:
            raise ValueError("need 0 < inner < outer")
        self.inner = float(inner)
        self.outer = float(outer)
        self.center = np.asarray(center, dtype=float)

    def contains(self, x, tol=1e-12):
        d = np.linalg.norm(np.atleast_2d(x) - self.center, axis=1)
        return (d >= self.inner - tol) & (d <= self.outer + tol)

    def project(self, x):
        x = np.atleast_2d(np.asarray(x, dtype=float))
        y = x - self.center
        d = np.linalg.norm(y, axis=1)
        out = x.copy()
        at_center = d == 0.0
        if np.any(at_center):
            tie = np.zeros(x.shape[1])
            tie[0] = self.inner
            out[at_center] = self.center + tie
        safe = ~at_center
        clamped = np.clip(d[safe], self.inner, self.outer)
        out[safe] = self.center + y[safe] * (clamped / d[safe])[:, None]
        return out

    def config(self):
        return {
            "kind": "shell",
            "R_in": self.inner,
            "R_out": self.outer,
            "center": self.center.tolist(),
        }


class TubeSubset:
    """Tube {(x, y): x on the core manifold, |y| <= radius} in a product ambient."""

    kind = "tube"

    def __init__(self, product_ambient, radius):
        if getattr(product_ambient, "kind", None) != "product":
            raise ValueError("tube subsets live in product ambients")
        self.ambient = product_ambient
        self.radius = float(radius)

    def contains(self, x, tol=1e-10):
        xc, xe = self.ambient._split(x)
        on_core = (
            np.linalg.norm(self.ambient.core.project_to_manifold(xc) - xc, axis=1) <= tol
        )
        return on_core & (np.linalg.norm(xe, axis=1) <= self.radius + tol)

    def project(self, x):
        xc, xe = self.ambient._split(x)
        d = np.linalg.norm(xe, axis=1, keepdims=True)
        scale = np.minimum(1.0, self.radius / np.maximum(d, 1e-300))
        return np.hstack([self.ambient.core.project_to_manifold(xc), xe * scale])

    def config(self):
        return {"kind": "tube", "radius": self.radius}


class ManifoldSubset:
    """The whole (compact) ambient manifold as the constraint region."""

    kind = "manifold"

    def __init__(self, ambient):
        self.ambient = ambient

    def contains(self, x, tol=1e-10):
        proj = self.ambient.project_to_manifold(np.atleast_2d(x))
        return np.linalg.norm(proj - np.atleast_2d(x), axis=1) <= tol

    def project(self, x):
        return self.ambient.project_to_manifold(x)

    def config(self):
        return {"kind": "manifold"}


def ambient_from_config(cfg):
    kind = cfg.get("kind")
    if kind == "euclidean":
        return Euclidean(cfg.get("dim", 3))
    if kind == "sphere":
        return Sphere(cfg.get("n", 2), cfg.get("r", 1.0), cfg.get("center"))
    if kind == "product":
        core = ambient_from_config(cfg["core"])
        return Product(core, cfg.get("extra_dim", 1))
    raise ValueError(f"unknown ambient kind {kind!r}")


def subset_from_config(cfg, ambient):
    kind = cfg.get("kind")
    if kind == "ball":
        center = cfg.get("center")
        if center is None:
            center = np.zeros(ambient.dim)
        return BallSubset(cfg["R"], center)
    if kind == "shell":
        center = cfg.get("center")
        if center is None:
            center = np.zeros(ambient.dim)
        return ShellSubset(cfg["R_in"], cfg["R_out"], center)
    if kind == "tube":
        return TubeSubset(ambient, cfg["radius"])
    if kind == "manifold":
        return ManifoldSubset(ambient)
    raise ValueError(f"unknown subset kind {kind!r}")
