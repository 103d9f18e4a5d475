"""Generalized curvature tensor recovery and second fundamental form algebra.

A discrete varifold satisfies, for every compactly supported test function
of position and plane, an integration-by-parts identity pairing the
tangential gradient against a rank-3 tensor field B and its trace.  This
module recovers B from the atoms by treating it as locally constant on a
small neighborhood and least-squares fitting the identity over a finite
dictionary of test functions, evaluates the identity residual for an
externally supplied tensor, and converts between B and the second
fundamental form A relative to an ambient manifold.

Conventions: B is stored as B[n, i, j, k] and is symmetric under j <-> k;
the trace sum_j B[j, i, j] is the mean curvature vector.  A is stored as
A[n, i, j, k] where k is the slot orthogonal to the atom plane, so that a
round sphere of radius r in euclidean ambient has A[i, j, k] =
-P_ij n_k / r.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.spatial import cKDTree

from .varifold import DiscreteVarifold

MAX_DIM = 6
CONDITION_LIMIT = 1e10


class BumpDictionary:
    """Test functions eta_eps(x - x0) q(P) with polynomial plane factors.

    The plane factors are 1, every entry P_ab, and every product of two
    entries (unordered, with repetition): 1 + S^2 + S^2(S^2+1)/2 functions,
    enough to overdetermine the locally-constant tensor fit for S <= 6.
    """

    def __init__(self, dim: int, eps: float):
        if dim > MAX_DIM:
            raise ValueError(
                f"dictionary supports dim <= {MAX_DIM}, got {dim}; the "
                "locally-constant fit has dim^3 unknowns per neighborhood"
            )
        if eps <= 0.0:
            raise ValueError("eps must be positive")
        self.dim = int(dim)
        self.eps = float(eps)
        pairs = [(a, b) for a in range(dim) for b in range(dim)]
        self.linear_pairs = pairs
        self.quadratic_pairs = [
            (pairs[i], pairs[j]) for i in range(len(pairs)) for j in range(i, len(pairs))
        ]
        self.size = 1 + len(self.linear_pairs) + len(self.quadratic_pairs)

    def eta(self, y: np.ndarray) -> np.ndarray:
        t = 1.0 - np.einsum("ni,ni->n", y, y) / self.eps**2
        t = np.maximum(t, 0.0)
        return t * t

    def eta_grad(self, y: np.ndarray) -> np.ndarray:
        t = 1.0 - np.einsum("ni,ni->n", y, y) / self.eps**2
        t = np.maximum(t, 0.0)
        return (-4.0 / self.eps**2) * t[:, None] * y

    def q_values(self, P: np.ndarray) -> np.ndarray:
        n = P.shape[0]
        out = np.empty((n, self.size))
        out[:, 0] = 1.0
        col = 1
        for a, b in self.linear_pairs:
            out[:, col] = P[:, a, b]
            col += 1
        for (a, b), (c, d) in self.quadratic_pairs:
            out[:, col] = P[:, a, b] * P[:, c, d]
            col += 1
        return out

    def q_grads(self, P: np.ndarray) -> np.ndarray:
        """dq/dP_jk with the S^2 entries treated as free coordinates."""
        n, s = P.shape[0], self.dim
        out = np.zeros((n, self.size, s, s))
        col = 1
        for a, b in self.linear_pairs:
            out[:, col, a, b] = 1.0
            col += 1
        for (a, b), (c, d) in self.quadratic_pairs:
            out[:, col, a, b] += P[:, c, d]
            out[:, col, c, d] += P[:, a, b]
            col += 1
        return out


@dataclass
class CurvatureTensorField:
    """Recovered tensors plus fit diagnostics, one entry per center."""

    B: np.ndarray
    residual: np.ndarray
    condition: np.ndarray
    rank: np.ndarray
    ok: np.ndarray
    eps: float
    A: np.ndarray | None = None
    neighbor_counts: np.ndarray | None = None


def _sym_pairs(s: int) -> list[tuple[int, int]]:
    return [(j, k) for j in range(s) for k in range(j, s)]


def _neighborhood_moments(v: DiscreteVarifold, centers: np.ndarray, eps: float):
    """Weighted bump moments of the atoms around each center.

    Returns per-center neighbor counts and the moment arrays
    s_eta = sum w eta, S1[a,b] = sum w eta P_ab,
    S2[a,b,c,d] = sum w eta P_ab P_cd, R0 = sum w (P grad eta),
    R1[a,b,:] = sum w P_ab (P grad eta), R2[a,b,c,d,:] likewise.
    """
    s = v.dim
    nc = len(centers)
    tree = cKDTree(v.x)
    lists = tree.query_ball_point(centers, eps)
    counts = np.array([len(nb) for nb in lists], dtype=int)

    s_eta = np.zeros(nc)
    s1 = np.zeros((nc, s, s))
    s2 = np.zeros((nc, s, s, s, s))
    r0 = np.zeros((nc, s))
    r1 = np.zeros((nc, s, s, s))
    r2 = np.zeros((nc, s, s, s, s, s))

    if counts.sum() == 0:
        return counts, s_eta, s1, s2, r0, r1, r2

    flat = np.concatenate([np.asarray(nb, dtype=int) for nb in lists])
    starts = np.concatenate([[0], np.cumsum(counts)])

    # neighbor lists come back grouped by center, so segment sums suffice;
    # chunk on center boundaries to cap the pairwise intermediates
    pair_budget = 20_000_000 // max(s**5, 1)
    chunk_edges = [0]
    while chunk_edges[-1] < nc:
        lo = chunk_edges[-1]
        hi = int(np.searchsorted(starts, starts[lo] + pair_budget, side="right")) - 1
        chunk_edges.append(min(max(hi, lo + 1), nc))

    def segment_sum(vals, seg_starts):
        flat_vals = vals.reshape(len(vals), -1)
        return np.add.reduceat(flat_vals, seg_starts, axis=0)

    for lo, hi in zip(chunk_edges[:-1], chunk_edges[1:]):
        local_counts = counts[lo:hi]
        keep = local_counts > 0
        if not keep.any():
            continue
        nb = flat[starts[lo] : starts[hi]]
        own = np.repeat(np.arange(lo, hi), local_counts)
        y = v.x[nb] - centers[own]
        t = np.maximum(1.0 - np.einsum("ni,ni->n", y, y) / eps**2, 0.0)
        eta = t * t
        grad_eta = (-4.0 / eps**2) * t[:, None] * y
        p = v.P[nb]
        w_eta = v.w[nb] * eta
        pg = np.einsum("nij,nj->ni", p, grad_eta) * v.w[nb][:, None]
        pp = np.einsum("nab,ncd->nabcd", p, p)

        seg_starts = (starts[lo:hi] - starts[lo])[keep]
        rows = np.arange(lo, hi)[keep]
        s_eta[rows] = segment_sum(w_eta[:, None], seg_starts)[:, 0]
        s1[rows] = segment_sum(w_eta[:, None, None] * p, seg_starts).reshape(-1, s, s)
        s2[rows] = segment_sum(
            w_eta[:, None, None, None, None] * pp, seg_starts
        ).reshape(-1, s, s, s, s)
        r0[rows] = segment_sum(pg, seg_starts)
        r1[rows] = segment_sum(
            np.einsum("nab,ni->nabi", p, pg), seg_starts
        ).reshape(-1, s, s, s)
        r2[rows] = segment_sum(
            np.einsum("nabcd,ni->nabcdi", pp, pg), seg_starts
        ).reshape(-1, s, s, s, s, s)
        del pp
    return counts, s_eta, s1, s2, r0, r1, r2


def _design_blocks(dictionary: BumpDictionary, moments):
    """Per-center design tensor, scale column vector and right-hand side.

    The unknowns are the entries B[i, (j,k)] over symmetric index pairs;
    the rows are one equation per coordinate per dictionary function.
    """
    counts, s_eta, s1, s2, r0, r1, r2 = moments
    s = dictionary.dim
    k_dict = dictionary.size
    nc = len(s_eta)
    pairs = _sym_pairs(s)
    npairs = len(pairs)
    pair_index = {pq: idx for idx, pq in enumerate(pairs)}

    # moment of dq/dP per dictionary function, folded onto symmetric pairs
    m1 = np.zeros((nc, k_dict, s, s))
    scal = np.empty((nc, k_dict))
    rhs = np.empty((nc, k_dict, s))

    scal[:, 0] = s_eta
    rhs[:, 0, :] = r0
    col = 1
    for a, b in dictionary.linear_pairs:
        m1[:, col, a, b] = s_eta
        scal[:, col] = s1[:, a, b]
        rhs[:, col, :] = r1[:, a, b, :]
        col += 1
    for (a, b), (c, d) in dictionary.quadratic_pairs:
        m1[:, col, a, b] += s1[:, c, d]
        m1[:, col, c, d] += s1[:, a, b]
        scal[:, col] = s2[:, a, b, c, d]
        rhs[:, col, :] = r2[:, a, b, c, d, :]
        col += 1

    m1_sym = np.empty((nc, k_dict, npairs))
    for idx, (j, k) in enumerate(pairs):
        if j == k:
            m1_sym[:, :, idx] = m1[:, :, j, j]
        else:
            m1_sym[:, :, idx] = m1[:, :, j, k] + m1[:, :, k, j]

    design = np.zeros((nc, k_dict, s, s, npairs))
    for i in range(s):
        design[:, :, i, i, :] = m1_sym
    # trace coupling: the equation row for coordinate i also sees B[j,(i,j)]
    for i in range(s):
        for j in range(s):
            design[:, :, i, j, pair_index[(min(i, j), max(i, j))]] += scal
    design = design.reshape(nc, k_dict * s, s * npairs)
    rhs = rhs.reshape(nc, k_dict * s)
    return design, rhs, pairs


def _unfold_symmetric(u: np.ndarray, s: int, pairs) -> np.ndarray:
    b = np.zeros((u.shape[0], s, s, s))
    u = u.reshape(u.shape[0], s, len(pairs))
    for idx, (j, k) in enumerate(pairs):
        b[:, :, j, k] = u[:, :, idx]
        b[:, :, k, j] = u[:, :, idx]
    return b


def _fold_symmetric(b: np.ndarray, s: int, pairs) -> np.ndarray:
    u = np.empty((b.shape[0], s, len(pairs)))
    for idx, (j, k) in enumerate(pairs):
        u[:, :, idx] = 0.5 * (b[:, :, j, k] + b[:, :, k, j])
    return u.reshape(b.shape[0], -1)


def recover_curvature_tensor(
    v: DiscreteVarifold,
    eps: float,
    centers: np.ndarray | None = None,
    dictionary: BumpDictionary | None = None,
) -> CurvatureTensorField:
    """Fit a locally constant curvature tensor around each center.

    For every center the weak identity is written once per coordinate per
    dictionary function, giving an overdetermined linear system in the
    entries of B (reduced to the symmetric j <-> k subspace the identity
    can see).  Minimal-norm least squares solves it; centers with too few
    neighbors, a rank-deficient system or an extreme condition number are
    flagged rather than silently filled.
    """
    if centers is None:
        centers = v.x
    centers = np.atleast_2d(np.asarray(centers, dtype=float))
    s = v.dim
    if dictionary is None:
        dictionary = BumpDictionary(s, eps)
    eps = dictionary.eps

    moments = _neighborhood_moments(v, centers, eps)
    counts = moments[0]
    design, rhs, pairs = _design_blocks(dictionary, moments)

    nc = len(centers)
    n_unknown = s * len(pairs)
    solution = np.zeros((nc, n_unknown))
    residual = np.zeros(nc)
    condition = np.full(nc, np.inf)
    rank = np.zeros(nc, dtype=int)
    ok = counts >= n_unknown

    for c in range(nc):
        if not ok[c]:
            continue
        m = design[c]
        u, _, rk, sv = np.linalg.lstsq(m, -rhs[c], rcond=None)
        solution[c] = u
        rank[c] = rk
        condition[c] = sv[0] / sv[-1] if sv[-1] > 0 else np.inf
        scale = np.linalg.norm(m) / eps
        residual[c] = np.linalg.norm(m @ u + rhs[c]) / scale if scale > 0 else np.inf
        if rk < n_unknown or condition[c] > CONDITION_LIMIT:
            ok[c] = False

    b = _unfold_symmetric(solution, s, pairs)
    return CurvatureTensorField(
        B=b,
        residual=residual,
        condition=condition,
        rank=rank,
        ok=ok,
        eps=eps,
        neighbor_counts=counts,
    )


def weak_identity_residual(
    v: DiscreteVarifold,
    B: np.ndarray,
    eps: float,
    centers: np.ndarray | None = None,
    dictionary: BumpDictionary | None = None,
) -> float:
    """Normalized residual of the weak identity for a supplied tensor.

    B holds one tensor per center (per atom when centers is omitted).
    Each center's equation system is evaluated at that tensor and the
    residual norm is divided by the design scale ||M||_F / eps, making the
    result dimensionless and comparable across resolutions; the root mean
    square over centers is returned.
    """
    if centers is None:
        centers = v.x
    centers = np.atleast_2d(np.asarray(centers, dtype=float))
    s = v.dim
    if dictionary is None:
        dictionary = BumpDictionary(s, eps)
    eps = dictionary.eps
    B = np.asarray(B, dtype=float)
    if B.shape != (len(centers), s, s, s):
        raise ValueError("need one tensor per center")

    moments = _neighborhood_moments(v, centers, eps)
    design, rhs, pairs = _design_blocks(dictionary, moments)
    u = _fold_symmetric(B, s, pairs)

    ratios = []
    for c in range(len(centers)):
        scale = np.linalg.norm(design[c]) / eps
        if scale == 0.0:
            continue
        ratios.append(np.linalg.norm(design[c] @ u[c] + rhs[c]) / scale)
    if not ratios:
        return 0.0
    return float(np.sqrt(np.mean(np.square(ratios))))


def trace_mean_curvature(B: np.ndarray) -> np.ndarray:
    """Mean curvature vector H_i = sum_j B[j, i, j]."""
    return np.einsum("njij->ni", B)


def second_fundamental_from_full(B: np.ndarray, v: DiscreteVarifold, ambient) -> np.ndarray:
    """A[n,i,j,k] = sum_l B[n,i,k,l] P_lj - sum_{l,q} P_lj P_iq dQ_kl/dx_q."""
    dq = ambient.projector_derivative(v.x)
    a = np.einsum("nikl,nlj->nijk", B, v.P)
    a -= np.einsum("nlj,niq,nklq->nijk", v.P, v.P, dq)
    return a


def full_from_second_fundamental(A: np.ndarray, v: DiscreteVarifold, ambient) -> np.ndarray:
    """Rebuild the full tensor from A and the ambient bending terms."""
    dq = ambient.projector_derivative(v.x)
    b = A + A.transpose(0, 1, 3, 2)
    b += np.einsum("njl,niq,nlkq->nijk", v.P, v.P, dq)
    b += np.einsum("nkl,niq,nljq->nijk", v.P, v.P, dq)
    return b


def admissible_random_second_fundamental(rng, v: DiscreteVarifold) -> np.ndarray:
    """Random tensor with the slot structure of a second fundamental form.

    Tangential in the first two slots, symmetric between them, orthogonal
    to the atom plane in the last slot; exactly the class on which the two
    conversions invert each other.
    """
    s = v.dim
    g = rng.normal(size=(len(v), s, s, s))
    eye = np.eye(s)
    normal = eye[None] - v.P
    a = np.einsum("nia,njb,nkc,nabc->nijk", v.P, v.P, normal, g)
    return 0.5 * (a + a.transpose(0, 2, 1, 3))
