"""Radial mass profiles, curvature-energy inequalities, and tracked constants.

The checks in this module compare both sides of scale-invariant
inequalities between the mass, the diameter, and the curvature energy
of a discrete varifold.  Every check returns a BoundRow carrying the
two sides, the tracked constant, and the margin, oriented so that
margin >= 1 means the inequality holds.  Nothing here ever clips or
repairs a failing row; the caller sees the numbers as computed.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.spatial import cKDTree

from .varifold import ball_mass, connected_components, support_diameter


# ---------------------------------------------------------------------------
# radial cutoffs


class RadialCutoff:
    """C^1 cutoff profile in the scaled radius t = r / rho.

    value(t) is 1 for t <= 1/2, 0 for t >= 1, and nonincreasing in
    between; deriv is its derivative in t.
    """

    def __init__(self, name, value, deriv):
        self.name = name
        self._value = value
        self._deriv = deriv

    def value(self, t):
        t = np.asarray(t, dtype=float)
        s = np.clip(2.0 * t - 1.0, 0.0, 1.0)
        return self._value(s)

    def deriv(self, t):
        t = np.asarray(t, dtype=float)
        inside = (t > 0.5) & (t < 1.0)
        s = np.clip(2.0 * t - 1.0, 0.0, 1.0)
        return np.where(inside, 2.0 * self._deriv(s), 0.0)


quartic_cutoff = RadialCutoff(
    "quartic",
    value=lambda s: (1.0 - s**2) ** 2,
    deriv=lambda s: -4.0 * s * (1.0 - s**2),
)

cubic_cutoff = RadialCutoff(
    "cubic",
    value=lambda s: 1.0 - s * s * (3.0 - 2.0 * s),
    deriv=lambda s: -6.0 * s * (1.0 - s),
)

CUTOFFS = {"quartic": quartic_cutoff, "cubic": cubic_cutoff}


def _resolve_cutoff(cutoff):
    if isinstance(cutoff, RadialCutoff):
        return cutoff
    try:
        return CUTOFFS[cutoff]
    except KeyError:
        raise ValueError(f"unknown cutoff {cutoff!r}; have {sorted(CUTOFFS)}")


def _field_values(h_values, n, dim):
    if h_values is None:
        return np.zeros((n, dim))
    values = getattr(h_values, "values", h_values)
    values = np.asarray(values, dtype=float)
    if values.shape != (n, dim):
        raise ValueError(f"curvature field must have shape {(n, dim)}")
    return values


def _median_spacing(v):
    tree = cKDTree(v.x)
    nn = tree.query(v.x, k=2)[0][:, 1]
    return float(np.median(nn)), tree


def _require_near_support(v, center, factor=2.0):
    spacing, tree = _median_spacing(v)
    dist = float(tree.query(np.asarray(center, dtype=float))[0])
    if dist > factor * spacing:
        raise ValueError(
            f"center is {dist:.3g} away from the support; "
            f"allowed at most {factor:g} x median atom spacing = {factor * spacing:.3g}"
        )
    return spacing


# ---------------------------------------------------------------------------
# radial profiles and the differential identity


@dataclass
class RadialProfile:
    """Cutoff-smoothed mass, curvature pairing, and tilt profiles.

    At each sample radius rho:
      I = sum w phi(r/rho)                       (smoothed ball mass)
      L = sum w phi(r/rho) (x - center) . H      (curvature pairing)
      J = sum w phi(r/rho) |(Id - P)(x - center)|^2 / r^2
    together with the analytic rho-derivatives of I and J.  The three
    satisfy d/drho [rho^-m I] = rho^-m J' + rho^-m-1 L up to the
    curvature-estimator error; radial_profile_defect measures the gap.
    """

    center: np.ndarray
    radii: np.ndarray
    I: np.ndarray
    L: np.ndarray
    J: np.ndarray
    I_deriv: np.ndarray
    J_deriv: np.ndarray
    m: int
    cutoff: str


def radial_profile(v, h_values, center, radii, cutoff="quartic"):
    center = np.asarray(center, dtype=float)
    radii = np.asarray(radii, dtype=float)
    if radii.ndim != 1 or len(radii) == 0:
        raise ValueError("radii must be a nonempty 1d array")
    if np.any(radii <= 0) or np.any(np.diff(radii) <= 0):
        raise ValueError("radii must be positive and strictly increasing")
    _require_near_support(v, center)
    phi = _resolve_cutoff(cutoff)
    h = _field_values(h_values, len(v), v.dim)

    y = v.x - center
    r = np.linalg.norm(y, axis=1)
    normal = y - np.einsum("nij,nj->ni", v.P, y)
    perp2 = np.zeros(len(v))
    np.divide(
        np.einsum("ni,ni->n", normal, normal), r**2, out=perp2, where=r > 0
    )
    pairing = np.einsum("ni,ni->n", y, h)

    t = r[None, :] / radii[:, None]
    vals = phi.value(t)
    slopes = phi.deriv(t)
    w = v.w
    I = vals @ w
    L = vals @ (w * pairing)
    J = vals @ (w * perp2)
    I_deriv = -(slopes @ (w * r)) / radii**2
    J_deriv = -(slopes @ (w * r * perp2)) / radii**2
    return RadialProfile(
        center=center,
        radii=radii,
        I=I,
        L=L,
        J=J,
        I_deriv=I_deriv,
        J_deriv=J_deriv,
        m=v.m,
        cutoff=phi.name,
    )


def radial_profile_defect(profile, derivative="forward"):
    """Residual of the radial differential identity along the profile.

    With derivative="forward" the rho-derivatives are one-sided
    difference quotients on the sample grid and the result has one
    entry per grid interval; the residual then carries an O(delta rho)
    truncation term on curved supports, so tying the grid step to the
    mesh edge length makes it shrink linearly under refinement.  With
    derivative="analytic" the exact derivative of the cutoff sums is
    used instead and only the curvature-estimator error remains.
    """
    rho = profile.radii
    m = profile.m
    scaled = rho ** (-m) * profile.I
    if derivative == "forward":
        if len(rho) < 2:
            raise ValueError("need at least two radii for forward differences")
        steps = np.diff(rho)
        left = rho[:-1]
        d_scaled = np.diff(scaled) / steps
        d_j = np.diff(profile.J) / steps
        return d_scaled - left ** (-m) * d_j - left ** (-m - 1) * profile.L[:-1]
    if derivative == "analytic":
        d_scaled = rho ** (-m) * profile.I_deriv - m * rho ** (-m - 1) * profile.I
        return d_scaled - rho ** (-m) * profile.J_deriv - rho ** (-m - 1) * profile.L
    raise ValueError("derivative must be 'forward' or 'analytic'")


# ---------------------------------------------------------------------------
# density


@dataclass
class DensityEstimate:
    value: float
    radii: np.ndarray
    ratios: np.ndarray
    slope: float


def density_estimate(v, center, radii):
    """Density at a point from mass ratios, extrapolated linearly to 0.

    radii must hold at least three radii, all above the resolution
    floor of 3 x the median atom spacing; below that floor the ball
    mass counts individual atoms and the ratio is meaningless.
    """
    center = np.asarray(center, dtype=float)
    radii = np.sort(np.asarray(radii, dtype=float))[::-1]
    if len(radii) < 3:
        raise ValueError("need at least three radii to extrapolate")
    spacing, _ = _median_spacing(v)
    floor = 3.0 * spacing
    if np.any(radii < floor):
        raise ValueError(
            f"radius below the resolution floor {floor:.3g} "
            "(3 x median atom spacing)"
        )
    m = v.m
    ratios = np.array(
        [ball_mass(v, center, rho) / (omega_ball(m) * rho**m) for rho in radii]
    )
    slope, value = np.polyfit(radii, ratios, 1)
    return DensityEstimate(
        value=float(value), radii=radii, ratios=ratios, slope=float(slope)
    )


# ---------------------------------------------------------------------------
# tracked constants


def omega_ball(m):
    """Volume of the unit ball in R^m."""
    return math.pi ** (m / 2.0) / math.gamma(m / 2.0 + 1.0)


def _require_supercritical(p, m):
    if not p > m:
        raise ValueError(f"exponent p = {p} must exceed the plane dimension m = {m}")


def c_fundamental(p, m):
    """Constant in the unit lower bound on density plus scaled energy.

    Grows like (p^2/(p-m))^p as p decreases to m, which is the
    bottleneck of every constant chained from it.
    """
    _require_supercritical(p, m)
    return 2.0 ** (p - 1.0) / omega_ball(m) * max(1.0, (p * p / (p - m)) ** p)


def c_diameter_upper(p, m):
    """Constant bounding the diameter by energy and mass (connected support)."""
    _require_supercritical(p, m)
    ratio = (2.0 / m) ** (m - 1.0) + (m / 2.0) ** (p - m + 1.0)
    return 2.0 ** (m + 1.0) * c_fundamental(p, m) * ratio


def c_diameter_lower(p, m):
    """Constant in the lower diameter bound d^(p-m) >= 1/(C * energy)."""
    _require_supercritical(p, m)
    return c_fundamental(p, m) * (1.0 + float(m) ** (-p))


def c_mass_lower(p, m):
    """Constant in the lower mass bound, chained from the two diameter bounds."""
    _require_supercritical(p, m)
    e1 = p / (p - m + 1.0)
    e2 = p / ((p - m) * (p - m + 1.0))
    return c_diameter_upper(p, m) ** e1 * c_diameter_lower(p, m) ** e2


# ---------------------------------------------------------------------------
# inequality rows


@dataclass
class BoundRow:
    name: str
    lhs: float
    rhs: float
    constant: float
    margin: float
    passed: bool
    note: str = ""


@dataclass
class BoundReport:
    rows: list = field(default_factory=list)

    def __iter__(self):
        return iter(self.rows)

    def __len__(self):
        return len(self.rows)

    def row(self, name):
        for row in self.rows:
            if row.name == name:
                return row
        raise KeyError(name)

    @property
    def all_passed(self):
        return all(row.passed for row in self.rows)

    def to_csv(self, path=None):
        lines = ["lemma,lhs,rhs,constant,margin,pass"]
        for row in self.rows:
            lines.append(
                f"{row.name},{row.lhs:.17g},{row.rhs:.17g},"
                f"{row.constant:.17g},{row.margin:.17g},{str(row.passed).lower()}"
            )
        text = "\n".join(lines) + "\n"
        if path is not None:
            with open(path, "w") as handle:
                handle.write(text)
        return text


def _ball_energy(v, h, center, radius, p):
    d = np.linalg.norm(v.x - center, axis=1)
    inside = d <= radius
    q = np.linalg.norm(h[inside], axis=1)
    return float((v.w[inside] * q**p).sum())


def check_local_monotonicity(v, h_values, center, sigma, rho, p):
    """Compare scaled ball masses at two radii against the energy payment.

    The scaled mass at the small radius, to the power 1/p, must not
    exceed the one at the large radius plus the weighted difference of
    localized energies.  Requires p > m and 0 < sigma < rho.
    """
    m = v.m
    _require_supercritical(p, m)
    if not 0.0 < sigma < rho:
        raise ValueError("need 0 < sigma < rho")
    center = np.asarray(center, dtype=float)
    h = _field_values(h_values, len(v), v.dim)
    weight = p * p / (p - m)

    lhs = (ball_mass(v, center, sigma) / sigma**m) ** (1.0 / p)
    outer = (ball_mass(v, center, rho) / rho**m) ** (1.0 / p)
    e_rho = _ball_energy(v, h, center, rho, p)
    e_sigma = _ball_energy(v, h, center, sigma, p)
    rhs = outer + weight * (
        rho ** (1.0 - m / p) * e_rho ** (1.0 / p)
        - sigma ** (1.0 - m / p) * e_sigma ** (1.0 / p)
    )
    margin = rhs / lhs if lhs > 0 else math.inf
    return BoundRow(
        name="local_monotonicity",
        lhs=lhs,
        rhs=rhs,
        constant=weight,
        margin=margin,
        passed=bool(rhs >= lhs * (1.0 - 1e-12)),
        note=f"sigma={sigma:g} rho={rho:g} p={p:g}",
    )


def check_lower_density(v, h_values, center, rho, p):
    """Unit lower bound on scaled ball mass plus scaled localized energy.

    Valid at centers on the support; an off-support center is rejected
    rather than silently reported as a failure.
    """
    m = v.m
    _require_supercritical(p, m)
    if rho <= 0:
        raise ValueError("need rho > 0")
    center = np.asarray(center, dtype=float)
    _require_near_support(v, center)
    h = _field_values(h_values, len(v), v.dim)
    constant = c_fundamental(p, m)
    rhs = constant * (
        ball_mass(v, center, rho) / rho**m
        + rho ** (p - m) * _ball_energy(v, h, center, rho, p)
    )
    return BoundRow(
        name="lower_density",
        lhs=1.0,
        rhs=rhs,
        constant=constant,
        margin=rhs,
        passed=bool(rhs >= 1.0 - 1e-12),
        note=f"rho={rho:g} p={p:g}",
    )


def check_bounds(v, h_values, p, link_radius=None):
    """Evaluate the four global mass/diameter/energy inequalities.

    Returns a BoundReport with rows mass_from_diameter,
    diameter_from_mass_energy, diameter_lower, and mass_lower.  The
    second row needs a connected support and is marked inapplicable
    (with the reason in its note) on disconnected input; the two lower
    bounds are marked inapplicable when the curvature energy vanishes,
    as on flat patches with boundary.
    """
    m = v.m
    _require_supercritical(p, m)
    h = _field_values(h_values, len(v), v.dim)
    q = np.linalg.norm(h, axis=1)
    energy = float((v.w * q**p).sum())
    mass = v.mass()
    diam = support_diameter(v)
    if link_radius is None:
        spacing, _ = _median_spacing(v)
        link_radius = 2.5 * spacing
    n_components, _ = connected_components(v, link_radius)

    rows = []
    rhs = (diam / m) ** p * energy
    rows.append(
        BoundRow(
            name="mass_from_diameter",
            lhs=mass,
            rhs=rhs,
            constant=1.0,
            margin=rhs / mass,
            passed=bool(rhs >= mass * (1.0 - 1e-12)),
            note="constant-free",
        )
    )

    constant = c_diameter_upper(p, m)
    if n_components > 1:
        rows.append(
            BoundRow(
                name="diameter_from_mass_energy",
                lhs=diam,
                rhs=math.nan,
                constant=constant,
                margin=math.nan,
                passed=False,
                note=f"inapplicable: support has {n_components} components "
                "but the bound requires connected support",
            )
        )
    else:
        rhs = constant * energy ** ((m - 1.0) / p) * mass ** ((p - m + 1.0) / p)
        rows.append(
            BoundRow(
                name="diameter_from_mass_energy",
                lhs=diam,
                rhs=rhs,
                constant=constant,
                margin=rhs / diam,
                passed=bool(rhs >= diam * (1.0 - 1e-12)),
            )
        )

    constant = c_diameter_lower(p, m)
    if energy == 0.0:
        rows.append(
            BoundRow(
                name="diameter_lower",
                lhs=diam,
                rhs=math.nan,
                constant=constant,
                margin=math.nan,
                passed=False,
                note="inapplicable: curvature energy is zero",
            )
        )
    else:
        rhs = (1.0 / (constant * energy)) ** (1.0 / (p - m))
        rows.append(
            BoundRow(
                name="diameter_lower",
                lhs=diam,
                rhs=rhs,
                constant=constant,
                margin=diam / rhs,
                passed=bool(diam >= rhs * (1.0 - 1e-12)),
            )
        )

    constant = c_mass_lower(p, m)
    if energy == 0.0:
        rows.append(
            BoundRow(
                name="mass_lower",
                lhs=mass,
                rhs=math.nan,
                constant=constant,
                margin=math.nan,
                passed=False,
                note="inapplicable: curvature energy is zero",
            )
        )
    else:
        rhs = 1.0 / (constant * energy ** (m / (p - m)))
        rows.append(
            BoundRow(
                name="mass_lower",
                lhs=mass,
                rhs=rhs,
                constant=constant,
                margin=mass / rhs,
                passed=bool(mass >= rhs * (1.0 - 1e-12)),
            )
        )
    return BoundReport(rows=rows)


def isoperimetric_ratio(v, field_values, spec):
    """Mass divided by the energy of the field for the supplied EnergySpec.

    Returns math.inf when the energy is exactly zero on a positive-mass
    varifold, the stationarity witness for geodesics and minimal
    supports.
    """
    h = _field_values(field_values, len(v), v.dim)
    q = np.linalg.norm(h, axis=1)
    energy = float((v.w * spec.density(q)).sum())
    if energy == 0.0:
        return math.inf
    return v.mass() / energy


# Shipped (sigma, rho, p) sweep for the local monotonicity check; all
# pairs satisfy 0 < sigma < rho and every exponent exceeds m = 2.
LOCAL_MONOTONICITY_SWEEP = tuple(
    (sigma, rho, (2.5, 3.0, 4.0)[k % 3])
    for k, (sigma, rho) in enumerate(
        (s, r) for s in (0.2, 0.3, 0.4, 0.5) for r in (0.7, 0.9, 1.1, 1.3, 1.5)
    )
)
