"""Curvature energies of meshes and varifolds, and constrained descent.

Two differentiable mesh energies are provided: an H-form built on the
cotangent mean-curvature field and an A-form built on local quadric
fits of the second fundamental form.  Both are written in torch so the
shape gradient is the exact derivative of the evaluated formula, which
is what the finite-difference check certifies.  The descent loop does
projected backtracking line search inside a compact constraint subset
and logs the theorem lower bounds on mass and diameter at every
accepted step.
"""

from __future__ import annotations

import math
import os
from dataclasses import dataclass, field

import numpy as np
import torch

from .bounds import c_diameter_lower, c_mass_lower
from .varifold import (
    SimplicialMesh,
    _euclidean_diameter,
    hausdorff_distance,
    support_diameter,
)


class GradientCheckError(ValueError):
    """Autograd and finite differences disagree beyond the hard tolerance."""


_PROBE_POINTS = np.array([0.0, 1e-4, 0.03, 0.4, 1.0, 2.5, 10.0, 100.0])


@dataclass
class EnergySpec:
    """Integrand F(q) = C|q|^p (or its smoothed variant) over a field q.

    form selects which field the energy consumes: "H" for mean
    curvature vectors, "A" for full second-fundamental-form tensors.
    The exponent must exceed the plane dimension m; that is what makes
    the energy scale down under inflation and the constraint subset
    active.
    """

    form: str = "H"
    p: float = 3.0
    C: float = 1.0
    integrand: str = "power"
    delta: float = 0.0
    m: int = 2

    def __post_init__(self):
        if self.form not in ("H", "A"):
            raise ValueError(f"form must be 'H' or 'A', got {self.form!r}")
        if self.integrand not in ("power", "huber"):
            raise ValueError(f"integrand must be 'power' or 'huber', got {self.integrand!r}")
        if not self.p > self.m:
            raise ValueError(f"need exponent p > m, got p={self.p} with m={self.m}")
        if not self.C > 0:
            raise ValueError("need prefactor C > 0")
        if self.integrand == "huber" and not self.delta > 0:
            raise ValueError("huber integrand needs delta > 0")
        self._probe_admissibility()

    def density(self, q):
        q = np.asarray(q, dtype=float)
        if self.integrand == "power":
            return self.C * q**self.p
        # offset as (delta^2)^{p/2}, the same expression the first term
        # reduces to at q = 0, so the density vanishes there exactly
        dsq = self.delta * self.delta
        return self.C * ((dsq + q * q) ** (self.p / 2.0) - dsq ** (self.p / 2.0))

    def _probe_admissibility(self):
        q = _PROBE_POINTS
        f = self.density(q)
        if f[0] != 0.0 or np.any(f[1:] <= 0.0):
            raise ValueError("integrand must vanish exactly at 0 and be positive elsewhere")
        mid = self.density((q[:-2] + q[2:]) / 2.0)
        if np.any(mid > (f[:-2] + f[2:]) / 2.0 + 1e-9 * np.abs(f[2:])):
            raise ValueError("integrand failed the convexity probe")
        slopes = f[-3:] / q[-3:]
        if not (slopes[1] > slopes[0] * (1 + 1e-9) and slopes[2] > slopes[1] * (1 + 1e-9)):
            raise ValueError("integrand failed the superlinear growth probe")


def varifold_energy(v, field_values, spec):
    """Atom-sum energy sum_n w_n F(|q_n|) for a matching field."""
    q = _field_magnitude(v, field_values, spec)
    return float((v.w * spec.density(q)).sum())


def _field_magnitude(v, field_values, spec):
    n, s = len(v), v.dim
    values = field_values
    if hasattr(values, "B"):
        if spec.form != "A":
            raise ValueError(
                "H-form energy expects a mean curvature vector field; "
                "take the trace of the tensor first"
            )
        values = values.A
        if values is None:
            raise ValueError("tensor field carries no second fundamental form")
    elif hasattr(values, "values"):
        values = values.values
    values = np.asarray(values, dtype=float)
    if spec.form == "H":
        if values.shape != (n, s):
            raise ValueError(f"H-form energy needs a field of shape {(n, s)}, got {values.shape}")
        return np.linalg.norm(values, axis=1)
    if values.shape != (n, s, s, s):
        raise ValueError(f"A-form energy needs a field of shape {(n, s, s, s)}, got {values.shape}")
    return np.sqrt(np.einsum("nijk,nijk->n", values, values))


# ---------------------------------------------------------------------------
# differentiable mesh energies


def _as_tensor(a):
    return torch.as_tensor(np.asarray(a, dtype=float), dtype=torch.float64)


def _two_ring(mesh):
    nv = len(mesh.vertices)
    one = [set() for _ in range(nv)]
    for a, b, c in mesh.simplices:
        one[a].update((b, c))
        one[b].update((a, c))
        one[c].update((a, b))
    rings = []
    for vtx in range(nv):
        ring = set(one[vtx])
        for u in one[vtx]:
            ring.update(one[u])
        ring.discard(vtx)
        rings.append(sorted(ring))
    kmax = max(len(r) for r in rings)
    idx = np.zeros((nv, kmax), dtype=np.int64)
    mask = np.zeros((nv, kmax), dtype=bool)
    for vtx, ring in enumerate(rings):
        idx[vtx, : len(ring)] = ring
        mask[vtx, : len(ring)] = True
    return idx, mask


class _MeshStatic:
    """Connectivity and masks that stay fixed while vertices move."""

    def __init__(self, mesh, spec):
        self.faces = torch.as_tensor(np.asarray(mesh.simplices), dtype=torch.long)
        self.n_vertices = len(mesh.vertices)
        self.interior = torch.as_tensor(~mesh.boundary_vertex_mask())
        self.rings = None
        self.ring_mask = None
        if spec.form == "A":
            if mesh.dim != 3:
                raise ValueError("A-form mesh energy is implemented for surfaces in R^3")
            idx, mask = _two_ring(mesh)
            self.rings = torch.as_tensor(idx, dtype=torch.long)
            self.ring_mask = torch.as_tensor(mask)


def _cotan_field(x, faces, nv):
    """Cotangent vertex gradient and barycentric vertex areas."""
    cots = []
    double_area = None
    for corner in range(3):
        p = x[faces[:, corner]]
        q = x[faces[:, (corner + 1) % 3]]
        r = x[faces[:, (corner + 2) % 3]]
        u = q - p
        w = r - p
        dot = (u * w).sum(-1)
        gram = (u * u).sum(-1) * (w * w).sum(-1) - dot * dot
        sin_area = torch.sqrt(torch.clamp(gram, min=1e-300))
        cots.append(dot / sin_area)
        if corner == 0:
            double_area = sin_area
    grad = x.new_zeros(nv, x.shape[1])
    area = x.new_zeros(nv)
    third = double_area / 6.0
    for corner in range(3):
        jc = (corner + 1) % 3
        kc = (corner + 2) % 3
        p = x[faces[:, corner]]
        contrib = (
            cots[jc][:, None] * (p - x[faces[:, kc]])
            + cots[kc][:, None] * (p - x[faces[:, jc]])
        ) / 2.0
        grad = grad.index_add(0, faces[:, corner], contrib)
        area = area.index_add(0, faces[:, corner], third)
    return grad, area


def _quadric_sqnorm(x, static):
    """Squared Frobenius norm of the fitted second fundamental form."""
    faces = static.faces
    fn = torch.linalg.cross(
        x[faces[:, 1]] - x[faces[:, 0]], x[faces[:, 2]] - x[faces[:, 0]], dim=1
    )
    nv = x.shape[0]
    vn = x.new_zeros(nv, 3)
    area = x.new_zeros(nv)
    third = torch.linalg.norm(fn, dim=1) / 6.0
    for corner in range(3):
        vn = vn.index_add(0, faces[:, corner], fn)
        area = area.index_add(0, faces[:, corner], third)
    normal = vn / torch.linalg.norm(vn, dim=1, keepdim=True).clamp_min(1e-300)

    helper_idx = torch.argmin(normal.detach().abs(), dim=1)
    helper = torch.nn.functional.one_hot(helper_idx, 3).to(x.dtype)
    t1 = helper - (helper * normal).sum(-1, keepdim=True) * normal
    t1 = t1 / torch.linalg.norm(t1, dim=1, keepdim=True).clamp_min(1e-300)
    t2 = torch.linalg.cross(normal, t1, dim=1)

    offsets = x[static.rings] - x[:, None, :]
    mask = static.ring_mask
    u = (offsets * t1[:, None, :]).sum(-1)
    w = (offsets * t2[:, None, :]).sum(-1)
    z = (offsets * normal[:, None, :]).sum(-1) * mask
    cols = torch.stack(
        [torch.ones_like(u), u, w, 0.5 * u * u, u * w, 0.5 * w * w], dim=-1
    )
    cols = cols * mask[..., None]
    mtm = cols.transpose(1, 2) @ cols
    rhs = (cols.transpose(1, 2) @ z[..., None])[..., 0]
    reg = mtm.diagonal(dim1=1, dim2=2).sum(-1) / 6.0 + 1e-30
    eye = torch.eye(6, dtype=x.dtype)
    sol = torch.linalg.solve(mtm + 1e-12 * reg[:, None, None] * eye, rhs[..., None])[..., 0]
    sqnorm = sol[:, 3] ** 2 + 2.0 * sol[:, 4] ** 2 + sol[:, 5] ** 2
    return sqnorm, area


def _masked_energy(qsq, area, spec):
    if spec.integrand == "power":
        mask = qsq.detach() > 0
        return spec.C * (area[mask] * qsq[mask] ** (spec.p / 2.0)).sum()
    term = (spec.delta**2 + qsq) ** (spec.p / 2.0) - spec.delta**spec.p
    return spec.C * (area * term).sum()


def _energy_terms(x, static, spec):
    """Energy tensor, full vertex-area tensor, and raw sum w |q|^p."""
    if spec.form == "H":
        grad, area = _cotan_field(x, static.faces, static.n_vertices)
        ok = static.interior & (area.detach() > 0)
        a = area[ok]
        qsq = (grad[ok] * grad[ok]).sum(-1) / a**2
    else:
        sqnorm, area = _quadric_sqnorm(x, static)
        ok = static.interior & (area.detach() > 0)
        a = area[ok]
        qsq = sqnorm[ok]
    energy = _masked_energy(qsq, a, spec)
    with torch.no_grad():
        mask = qsq.detach() > 0
        raw = float((a.detach()[mask] * qsq.detach()[mask] ** (spec.p / 2.0)).sum())
    return energy, area, raw


def mesh_energy(mesh, spec):
    """Discrete energy of a triangle mesh under the given spec."""
    static = _MeshStatic(mesh, spec)
    with torch.no_grad():
        energy, _, _ = _energy_terms(_as_tensor(mesh.vertices), static, spec)
    return float(energy)


def shape_gradient(mesh, spec, subset=None):
    """Derivative of the mesh energy in the vertex positions.

    The constraint subset does not enter the differential; it is
    enforced by projection inside the descent loop, so the argument is
    accepted only for interface symmetry.
    """
    del subset
    static = _MeshStatic(mesh, spec)
    x = _as_tensor(mesh.vertices).requires_grad_(True)
    energy, _, _ = _energy_terms(x, static, spec)
    (grad,) = torch.autograd.grad(energy, x)
    return grad.numpy()


def gradient_fd_check(mesh, spec, n_checks=3, step=None, rng=None, hard_tol=1e-3):
    """Worst relative gap between autograd and central differences.

    Probes random vertex coordinates with step 1e-6 x bounding-box
    scale.  A gap beyond hard_tol is a gradient bug and raises.
    """
    rng = np.random.default_rng(0) if rng is None else rng
    verts = np.asarray(mesh.vertices, dtype=float)
    static = _MeshStatic(mesh, spec)
    scale = float(np.linalg.norm(verts.max(axis=0) - verts.min(axis=0)))
    h = 1e-6 * scale if step is None else step

    x = _as_tensor(verts).requires_grad_(True)
    energy, _, _ = _energy_terms(x, static, spec)
    (grad_t,) = torch.autograd.grad(energy, x)
    grad = grad_t.numpy()
    gsup = float(np.abs(grad).max())

    worst = 0.0
    for _ in range(n_checks):
        vtx = int(rng.integers(len(verts)))
        coord = int(rng.integers(verts.shape[1]))
        probe = verts.copy()
        with torch.no_grad():
            probe[vtx, coord] += h
            e_plus = float(_energy_terms(_as_tensor(probe), static, spec)[0])
            probe[vtx, coord] -= 2 * h
            e_minus = float(_energy_terms(_as_tensor(probe), static, spec)[0])
        fd = (e_plus - e_minus) / (2 * h)
        ad = float(grad[vtx, coord])
        denom = max(abs(ad), abs(fd), 1e-9 * max(gsup, 1e-30))
        worst = max(worst, abs(ad - fd) / denom)
    if worst > hard_tol:
        raise GradientCheckError(
            f"gradient check failed: relative error {worst:.3e} exceeds {hard_tol:g}"
        )
    return worst


# ---------------------------------------------------------------------------
# monitors


@dataclass
class NondegeneracyRecord:
    mass: float
    diameter: float
    raw_energy: float
    mass_lower: float
    diameter_lower: float
    ambient_factor: float
    passed: bool


def _ambient_factor(spec, ambient):
    bound = 0.0 if ambient is None else ambient.correction_bound(spec.m)
    if spec.form == "H":
        if bound == 0.0:
            return 1.0
        return 2.0 ** (spec.p - 1.0) * max(1.0, bound**spec.p)
    base = float(spec.m) ** (spec.p / 2.0)
    if bound == 0.0:
        return base
    return 2.0 ** (spec.p - 1.0) * max(base, bound**spec.p)


def _nondegeneracy_numbers(mass, diameter, raw_energy, spec, ambient=None):
    p, m = spec.p, spec.m
    factor = _ambient_factor(spec, ambient)
    budget = factor * (mass + raw_energy)
    diameter_lower = (1.0 / (c_diameter_lower(p, m) * budget)) ** (1.0 / (p - m))
    mass_lower = 1.0 / (c_mass_lower(p, m) * budget ** (m / (p - m)))
    passed = bool(
        diameter >= diameter_lower * (1.0 - 1e-9)
        and mass >= mass_lower * (1.0 - 1e-9)
    )
    return NondegeneracyRecord(
        mass=mass,
        diameter=diameter,
        raw_energy=raw_energy,
        mass_lower=mass_lower,
        diameter_lower=diameter_lower,
        ambient_factor=factor,
        passed=passed,
    )


def nondegeneracy_monitor(v, raw_energy, spec, ambient=None):
    """Check the theorem lower bounds on mass and diameter.

    raw_energy is the plain integral sum w |q|^p of the run's field.
    The bounds chain through the global curvature inequalities, with an
    ambient factor converting the relative field's energy into a bound
    on the extrinsic one; a violation means the discrete data broke a
    theorem, i.e. an estimator or bookkeeping fault.
    """
    return _nondegeneracy_numbers(
        v.mass(), support_diameter(v), raw_energy, spec, ambient
    )


@dataclass
class ConvergenceRecord:
    hausdorff: float
    weak_gap: float
    pair_gap: float = None


def _measure_moments(x, P, w):
    n, s = x.shape
    cols = [np.ones(n)]
    for i in range(s):
        cols.append(x[:, i])
    for i in range(s):
        for j in range(i, s):
            cols.append(x[:, i] * x[:, j])
    for a in range(s):
        for b in range(a, s):
            cols.append(P[:, a, b])
    return w @ np.stack(cols, axis=1)


def convergence_monitor(v_a, v_b, field_a=None, field_b=None, dictionary=None):
    """Hausdorff distance and weak-convergence surrogates between iterates.

    The weak gap is the largest difference of integrals of the shipped
    test functions (low-order monomials in position and projector
    entries); the pair gap is the analogue with the fields weighted in,
    reported only when both fields are given.
    """
    if v_a.dim != v_b.dim or v_a.m != v_b.m:
        raise ValueError("varifolds must share ambient dimension and plane dimension")
    haus = hausdorff_distance(v_a.x, v_b.x)
    if dictionary is None:
        moments_a = _measure_moments(v_a.x, v_a.P, v_a.w)
        moments_b = _measure_moments(v_b.x, v_b.P, v_b.w)
    else:
        moments_a = np.array([float(v_a.w @ phi(v_a.x, v_a.P)) for phi in dictionary])
        moments_b = np.array([float(v_b.w @ phi(v_b.x, v_b.P)) for phi in dictionary])
    weak = float(np.abs(moments_a - moments_b).max())
    pair = None
    if field_a is not None and field_b is not None:
        fa = np.asarray(getattr(field_a, "values", field_a), dtype=float)
        fb = np.asarray(getattr(field_b, "values", field_b), dtype=float)
        gaps = []
        for i in range(v_a.dim):
            if dictionary is None:
                pa = _measure_moments(v_a.x, v_a.P, v_a.w * fa[:, i])
                pb = _measure_moments(v_b.x, v_b.P, v_b.w * fb[:, i])
            else:
                pa = np.array([float((v_a.w * fa[:, i]) @ phi(v_a.x, v_a.P)) for phi in dictionary])
                pb = np.array([float((v_b.w * fb[:, i]) @ phi(v_b.x, v_b.P)) for phi in dictionary])
            gaps.append(np.abs(pa - pb).max())
        pair = float(max(gaps))
    return ConvergenceRecord(hausdorff=haus, weak_gap=weak, pair_gap=pair)


def sphericity(mesh):
    """6 sqrt(pi) Vol / Area^(3/2); equals 1 exactly for a round sphere."""
    volume = abs(mesh.oriented_volume())
    area = mesh.total_measure()
    return 6.0 * math.sqrt(math.pi) * volume / area**1.5


# ---------------------------------------------------------------------------
# remeshing and quality


def mesh_aspect_ratio(mesh):
    """Max over faces of (longest edge)^2 / (2 area); ~1.15 when equilateral."""
    verts = mesh.vertices
    faces = mesh.simplices
    edges = np.stack(
        [
            verts[faces[:, 1]] - verts[faces[:, 0]],
            verts[faces[:, 2]] - verts[faces[:, 1]],
            verts[faces[:, 0]] - verts[faces[:, 2]],
        ],
        axis=1,
    )
    longest = (edges**2).sum(-1).max(axis=1)
    areas = mesh.simplex_measures()
    return float((longest / np.maximum(2.0 * areas, 1e-300)).max())


def _corner_cot(verts, tri, corner):
    p = verts[tri[corner]]
    u = verts[tri[(corner + 1) % 3]] - p
    w = verts[tri[(corner + 2) % 3]] - p
    dot = float(u @ w)
    gram = float((u @ u) * (w @ w) - dot * dot)
    return dot / math.sqrt(max(gram, 1e-300))


def _tri_area(verts, tri):
    u = verts[tri[1]] - verts[tri[0]]
    w = verts[tri[2]] - verts[tri[0]]
    gram = float((u @ u) * (w @ w) - float(u @ w) ** 2)
    return 0.5 * math.sqrt(max(gram, 0.0))


def remesh_flips(mesh, max_mass_change=1e-3):
    """One pass of quality edge flips with a per-event mass-change gate.

    An interior edge is flipped when the cotangents at the two opposite
    corners sum negative (the two opposite angles exceed pi) and the
    flip moves the local area by at most max_mass_change of the total.
    Returns the new mesh and the number of flips applied.
    """
    verts = np.asarray(mesh.vertices, dtype=float)
    faces = np.array(mesh.simplices, dtype=np.int64, copy=True)
    total = mesh.total_measure()

    directed = {}
    for f, tri in enumerate(faces):
        for corner in range(3):
            a = int(tri[(corner + 1) % 3])
            b = int(tri[(corner + 2) % 3])
            directed[(a, b)] = (f, corner)
    existing = set(directed)

    used = np.zeros(len(faces), dtype=bool)
    flips = 0
    for (a, b), (f1, c1) in list(directed.items()):
        if a > b or (b, a) not in directed:
            continue
        f2, c2 = directed[(b, a)]
        if used[f1] or used[f2]:
            continue
        o1 = int(faces[f1][c1])
        o2 = int(faces[f2][c2])
        if (o1, o2) in existing or (o2, o1) in existing:
            continue
        if _corner_cot(verts, faces[f1], c1) + _corner_cot(verts, faces[f2], c2) >= -1e-12:
            continue
        old = _tri_area(verts, faces[f1]) + _tri_area(verts, faces[f2])
        new1 = np.array([a, o2, o1])
        new2 = np.array([b, o1, o2])
        area1 = _tri_area(verts, new1)
        area2 = _tri_area(verts, new2)
        if min(area1, area2) < 1e-14 * total:
            continue
        if abs(area1 + area2 - old) > max_mass_change * total:
            continue
        faces[f1] = new1
        faces[f2] = new2
        used[f1] = used[f2] = True
        existing.add((o1, o2))
        flips += 1
    return SimplicialMesh(verts.copy(), faces), flips


# ---------------------------------------------------------------------------
# projected descent


@dataclass
class MinimizeOptions:
    max_iter: int = 5000
    tol: float = 1e-6
    step0: float = None
    grow: float = 1.3
    shrink: float = 0.5
    max_backtracks: int = 30
    precondition: str = "area"
    remesh: bool = False
    remesh_interval: int = 25
    max_aspect: float = 100.0


@dataclass
class DescentTrace:
    energy: list = field(default_factory=list)
    mass: list = field(default_factory=list)
    diameter: list = field(default_factory=list)
    diameter_lower: list = field(default_factory=list)
    mass_lower: list = field(default_factory=list)
    hausdorff: list = field(default_factory=list)
    weak_gap: list = field(default_factory=list)
    step: list = field(default_factory=list)
    projections: list = field(default_factory=list)
    flips: list = field(default_factory=list)

    def append(self, **kw):
        for key, value in kw.items():
            getattr(self, key).append(value)

    def to_csv(self, path=None):
        columns = [
            "iteration", "energy", "mass", "diameter", "diameter_lower",
            "mass_lower", "hausdorff", "weak_gap", "step", "projections", "flips",
        ]
        lines = [",".join(columns)]
        for k in range(len(self.energy)):
            row = [str(k)] + [
                f"{getattr(self, name)[k]:.17g}" for name in columns[1:-2]
            ] + [str(self.projections[k]), str(self.flips[k])]
            lines.append(",".join(row))
        text = "\n".join(lines) + "\n"
        if path is not None:
            with open(path, "w") as handle:
                handle.write(text)
        return text


@dataclass
class MinimizeResult:
    mesh: SimplicialMesh
    trace: DescentTrace
    stop_reason: str
    iterations: int
    final_energy: float
    monitors_ok: bool


def _face_projectors(verts, faces):
    e1 = verts[faces[:, 1]] - verts[faces[:, 0]]
    e2 = verts[faces[:, 2]] - verts[faces[:, 0]]
    u1 = e1 / np.linalg.norm(e1, axis=1, keepdims=True)
    u2 = e2 - np.einsum("ni,ni->n", e2, u1)[:, None] * u1
    u2 = u2 / np.linalg.norm(u2, axis=1, keepdims=True)
    return np.einsum("ni,nj->nij", u1, u1) + np.einsum("ni,nj->nij", u2, u2)


def _iterate_moments(verts, faces):
    centroids = verts[faces].mean(axis=1)
    u = verts[faces[:, 1]] - verts[faces[:, 0]]
    w = verts[faces[:, 2]] - verts[faces[:, 0]]
    gram = np.einsum("ni,ni->n", u, u) * np.einsum("ni,ni->n", w, w)
    gram = gram - np.einsum("ni,ni->n", u, w) ** 2
    areas = 0.5 * np.sqrt(np.maximum(gram, 0.0))
    P = _face_projectors(verts, faces)
    return centroids, _measure_moments(centroids, P, areas)


def _subset_normals(subset, verts):
    kind = getattr(subset, "kind", None)
    if kind == "ball":
        y = verts - subset.center
        r = np.linalg.norm(y, axis=1)
        active = r >= subset.radius * (1.0 - 1e-9)
        normals = y / np.maximum(r, 1e-300)[:, None]
        return normals, active
    if kind == "shell":
        y = verts - subset.center
        r = np.linalg.norm(y, axis=1)
        unit = y / np.maximum(r, 1e-300)[:, None]
        outer = r >= subset.outer * (1.0 - 1e-9)
        inner = r <= subset.inner * (1.0 + 1e-9)
        normals = np.where(inner[:, None], -unit, unit)
        return normals, outer | inner
    return None, None


def _projected_gradient(grad, verts, subset):
    normals, active = _subset_normals(subset, verts)
    if normals is None:
        return grad
    out = grad.copy()
    blocked = active & (np.einsum("ni,ni->n", -grad, normals) > 0)
    if blocked.any():
        comp = np.einsum("ni,ni->n", out[blocked], normals[blocked])
        out[blocked] -= comp[:, None] * normals[blocked]
    return out


def minimize_energy(mesh, spec, subset, options=None):
    """Projected backtracking descent of the mesh energy inside a subset.

    Accepted steps strictly decrease the energy; every accepted iterate
    is projected into the subset, and the trace logs energy, mass,
    diameter, the theorem lower bounds, the Hausdorff step length, and
    the weak-convergence surrogate per iteration.
    """
    options = options or MinimizeOptions()
    torch.set_num_threads(max(1, int(os.environ.get("VARIMIN_THREADS", "1"))))
    verts = np.asarray(mesh.vertices, dtype=float).copy()
    faces = np.array(mesh.simplices, dtype=np.int64, copy=True)
    if not bool(np.all(subset.contains(verts))):
        raise ValueError("initial mesh must be contained in the constraint subset")

    static = _MeshStatic(SimplicialMesh(verts, faces), spec)

    def evaluate(points, need_grad):
        x = _as_tensor(points)
        if need_grad:
            x = x.requires_grad_(True)
            energy, area, raw = _energy_terms(x, static, spec)
            (grad,) = torch.autograd.grad(energy, x)
            return float(energy.detach()), grad.numpy(), area.detach().numpy(), raw
        with torch.no_grad():
            energy, area, raw = _energy_terms(x, static, spec)
        return float(energy), None, area.detach().numpy(), raw

    energy, grad, area, raw = evaluate(verts, True)
    mass = float(area.sum())
    diam = _euclidean_diameter(verts)
    record = _nondegeneracy_numbers(mass, diam, raw, spec)
    monitors_ok = record.passed
    prev_centroids, prev_moments = _iterate_moments(verts, faces)

    trace = DescentTrace()
    trace.append(
        energy=energy, mass=mass, diameter=diam,
        diameter_lower=record.diameter_lower, mass_lower=record.mass_lower,
        hausdorff=0.0, weak_gap=0.0, step=0.0, projections=0, flips=0,
    )

    alpha = options.step0
    stop_reason = "max_iterations"
    for it in range(options.max_iter):
        if mesh_aspect_ratio(SimplicialMesh(verts, faces)) > options.max_aspect:
            stop_reason = "degenerate_mesh"
            break

        if options.precondition == "area":
            direction = -grad / np.maximum(area, 1e-300)[:, None]
        else:
            direction = -grad
        dir_sup = float(np.linalg.norm(direction, axis=1).max())

        projected = _projected_gradient(grad, verts, subset)
        gsup = float(np.linalg.norm(projected, axis=1).max())
        if gsup < options.tol * energy / max(diam, 1e-300):
            stop_reason = "gradient_tolerance"
            break
        if dir_sup == 0.0:
            stop_reason = "gradient_tolerance"
            break

        if alpha is None:
            alpha = 0.05 * diam / dir_sup
        accepted = False
        a = alpha
        for _ in range(options.max_backtracks):
            trial = subset.project(verts + a * direction)
            moved = np.linalg.norm(trial - (verts + a * direction), axis=1)
            n_projected = int((moved > 1e-14 * max(diam, 1.0)).sum())
            e_new, _, _, _ = evaluate(trial, False)
            if e_new < energy:
                accepted = True
                break
            a *= options.shrink
        if not accepted:
            stop_reason = "step_collapse"
            break

        verts = trial
        energy, grad, area, raw = evaluate(verts, True)
        mass = float(area.sum())
        diam = _euclidean_diameter(verts)
        record = _nondegeneracy_numbers(mass, diam, raw, spec)
        monitors_ok = monitors_ok and record.passed
        centroids, moments = _iterate_moments(verts, faces)
        haus = hausdorff_distance(centroids, prev_centroids)
        weak = float(np.abs(moments - prev_moments).max())
        prev_centroids, prev_moments = centroids, moments
        alpha = a * options.grow

        flips = 0
        if options.remesh and (it + 1) % options.remesh_interval == 0:
            candidate, flips = remesh_flips(SimplicialMesh(verts, faces), 1e-3)
            if flips:
                new_static = _MeshStatic(candidate, spec)
                with torch.no_grad():
                    e_r, _, _ = _energy_terms(_as_tensor(verts), new_static, spec)
                if float(e_r) <= energy * (1.0 + 1e-12):
                    faces = np.asarray(candidate.simplices)
                    static = new_static
                    energy, grad, area, raw = evaluate(verts, True)
                    mass = float(area.sum())
                    record = _nondegeneracy_numbers(mass, diam, raw, spec)
                    monitors_ok = monitors_ok and record.passed
                    prev_centroids, prev_moments = _iterate_moments(verts, faces)
                else:
                    flips = 0

        trace.append(
            energy=energy, mass=mass, diameter=diam,
            diameter_lower=record.diameter_lower, mass_lower=record.mass_lower,
            hausdorff=haus, weak_gap=weak, step=a, projections=n_projected,
            flips=flips,
        )

    final = SimplicialMesh(verts.copy(), faces.copy())
    return MinimizeResult(
        mesh=final,
        trace=trace,
        stop_reason=stop_reason,
        iterations=len(trace.energy) - 1,
        final_energy=energy,
        monitors_ok=monitors_ok,
    )
