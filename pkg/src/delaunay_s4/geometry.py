"""Profile-curve geometry and the piecewise construction in S^4.

Covers periodic extension of half-period solutions, embeddedness through
polyline self-intersection, the mean curvatures of umbilical spheres and
Clifford hypersurfaces, sampling of the rotational immersion and a
point-to-segment Hausdorff distance.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from numba import njit
from scipy.optimize import brentq

from .errors import DomainError, NotClosable
from .ode import Trajectory

SAMPLES_PER_HALF = 2000


@dataclass(frozen=True, eq=False)
class ClosedProfile:
    """One full period of a profile curve sampled as a polyline.

    ``points`` has shape (N, 2); ``t`` and ``theta`` are aligned with it.
    """

    points: np.ndarray
    period: float
    source: object = None
    t: np.ndarray | None = field(default=None, repr=False)
    theta: np.ndarray | None = field(default=None, repr=False)

    @property
    def closure_error(self) -> float:
        return float(np.linalg.norm(self.points[0] - self.points[-1]))

    def table(self) -> np.ndarray:
        """Columns ``(t, f1, f2, theta, f3)``."""
        f1, f2 = self.points[:, 0], self.points[:, 1]
        f3 = np.sqrt(np.clip(1.0 - f1 ** 2 - f2 ** 2, 0.0, None))
        t = self.t if self.t is not None else np.full(len(f1), np.nan)
        th = self.theta if self.theta is not None else np.full(len(f1), np.nan)
        return np.column_stack([t, f1, f2, th, f3])


def extend_periodic(traj: Trajectory, samples: int = SAMPLES_PER_HALF, source=None,
                    tol: float = 1e-6) -> ClosedProfile:
    """Close a half-period solution by reflecting it across the f2 axis.

    The second half is ``(f1, f2, theta)(T + s) = (-f1, f2, 2*pi - theta)(T - s)``;
    no re-integration takes place.
    """
    end = traj.final
    if abs(end.f1) > tol or abs(end.theta - math.pi) > tol:
        raise NotClosable(f"f1(T)={end.f1:.3e}, theta(T)-pi={end.theta - math.pi:.3e}")
    T = traj.t_end
    t0 = traj.t_start
    ts = np.linspace(t0, T, samples + 1)
    y = traj(ts)
    back = y[-2::-1]
    t_full = np.concatenate([ts, 2 * T - ts[-2::-1]])
    f1 = np.concatenate([y[:, 0], -back[:, 0]])
    f2 = np.concatenate([y[:, 1], back[:, 1]])
    th = np.concatenate([y[:, 2], 2 * math.pi - back[:, 2]])
    return ClosedProfile(np.column_stack([f1, f2]), 2 * (T - t0), source, t_full, th)


@dataclass(frozen=True)
class EmbeddednessReport:
    embedded: bool
    crossings: list
    min_self_distance: float


@njit(cache=True)
def _orient(ax, ay, bx, by, cx, cy):
    return (bx - ax) * (cy - ay) - (by - ay) * (cx - ax)


@njit(cache=True)
def _segments_cross(p, q, r, s, tol):
    """True if segment pq meets rs (touching within ``tol`` counts)."""
    d1 = _orient(r[0], r[1], s[0], s[1], p[0], p[1])
    d2 = _orient(r[0], r[1], s[0], s[1], q[0], q[1])
    d3 = _orient(p[0], p[1], q[0], q[1], r[0], r[1])
    d4 = _orient(p[0], p[1], q[0], q[1], s[0], s[1])
    lrs = math.hypot(s[0] - r[0], s[1] - r[1])
    lpq = math.hypot(q[0] - p[0], q[1] - p[1])
    e1 = tol * lrs
    e2 = tol * lpq
    if ((d1 > e1 and d2 < -e1) or (d1 < -e1 and d2 > e1)) and \
            ((d3 > e2 and d4 < -e2) or (d3 < -e2 and d4 > e2)):
        return True
    # near-touching configurations
    if _point_seg_dist(p[0], p[1], r, s) <= tol or _point_seg_dist(q[0], q[1], r, s) <= tol:
        return True
    if _point_seg_dist(r[0], r[1], p, q) <= tol or _point_seg_dist(s[0], s[1], p, q) <= tol:
        return True
    return False


@njit(cache=True)
def _point_seg_dist(px, py, a, b):
    dx = b[0] - a[0]
    dy = b[1] - a[1]
    L2 = dx * dx + dy * dy
    if L2 == 0.0:
        return math.hypot(px - a[0], py - a[1])
    u = ((px - a[0]) * dx + (py - a[1]) * dy) / L2
    if u < 0.0:
        u = 0.0
    elif u > 1.0:
        u = 1.0
    return math.hypot(px - a[0] - u * dx, py - a[1] - u * dy)


@njit(cache=True)
def _find_crossings(pts, tol, closed, max_hits):
    nseg = len(pts) - 1
    xmin = np.empty(nseg)
    xmax = np.empty(nseg)
    ymin = np.empty(nseg)
    ymax = np.empty(nseg)
    for i in range(nseg):
        xmin[i] = min(pts[i, 0], pts[i + 1, 0]) - tol
        xmax[i] = max(pts[i, 0], pts[i + 1, 0]) + tol
        ymin[i] = min(pts[i, 1], pts[i + 1, 1]) - tol
        ymax[i] = max(pts[i, 1], pts[i + 1, 1]) + tol
    order = np.argsort(xmin)
    hits = np.empty((max_hits, 2), dtype=np.int64)
    nh = 0
    for ii in range(nseg):
        i = order[ii]
        for jj in range(ii + 1, nseg):
            j = order[jj]
            if xmin[j] > xmax[i]:
                break
            if ymin[j] > ymax[i] or ymin[i] > ymax[j]:
                continue
            lo = min(i, j)
            hi = max(i, j)
            if hi - lo <= 1:
                continue
            if closed and lo == 0 and hi == nseg - 1:
                continue
            if _segments_cross(pts[lo], pts[lo + 1], pts[hi], pts[hi + 1], tol):
                hits[nh, 0] = lo
                hits[nh, 1] = hi
                nh += 1
                if nh >= max_hits:
                    return hits[:nh]
    return hits[:nh]


def _intersection_point(p, q, r, s):
    d = (q - p)
    e = (s - r)
    den = d[0] * e[1] - d[1] * e[0]
    if den == 0.0:
        return tuple((p + q) / 2)
    u = ((r[0] - p[0]) * e[1] - (r[1] - p[1]) * e[0]) / den
    return tuple(p + u * d)


@njit(cache=True)
def _min_nonlocal_distance(pts, window):
    """Smallest vertex-to-segment distance between parts of the curve more
    than ``window`` segments apart (cyclically)."""
    n = len(pts) - 1
    best = np.inf
    for i in range(n):
        for j in range(n):
            gap = abs(i - j)
            gap = min(gap, n - gap)
            if gap <= window:
                continue
            d = _point_seg_dist(pts[i, 0], pts[i, 1], pts[j], pts[j + 1])
            if d < best:
                best = d
    return best


def is_embedded(profile, tol: float = 1e-9, with_distance: bool = False,
                max_crossings: int = 1000) -> EmbeddednessReport:
    """Decide whether a closed profile polyline is simple.

    Only non-adjacent segment pairs are tested; the first and last segments of
    a closed curve count as adjacent.  ``min_self_distance`` is computed only
    on request (quadratic cost) and skips pairs within 1% of the curve of each
    other; otherwise it is NaN.
    """
    pts = np.ascontiguousarray(profile.points if isinstance(profile, ClosedProfile) else profile,
                               dtype=float)
    closed = bool(np.linalg.norm(pts[0] - pts[-1]) <= max(tol, 1e-8))
    hits = _find_crossings(pts, tol, closed, max_crossings)
    crossings = [((int(i), int(j)), _intersection_point(pts[i], pts[i + 1], pts[j], pts[j + 1]))
                 for i, j in hits]
    dist = float("nan")
    if with_distance:
        dist = float(_min_nonlocal_distance(pts, max(1, (len(pts) - 1) // 100)))
    return EmbeddednessReport(not crossings, crossings, dist)


def umbilical_H(r: float) -> float:
    """Mean curvature of the totally umbilical 3-sphere of radius r in S^4."""
    if not 0.0 < r < 1.0:
        raise DomainError(f"radius {r!r} outside (0, 1)")
    return math.sqrt(1.0 - r * r) / r


def clifford_H(r: float) -> float:
    """Mean curvature of S^2(sqrt(1-r^2)) x S^1(r) in S^4."""
    if not 0.0 < r < 1.0:
        raise DomainError(f"radius {r!r} outside (0, 1)")
    c = math.sqrt(1.0 - r * r)
    return (2.0 * r / c - c / r) / 3.0


def equal_H_radius() -> float:
    """Radius at which the umbilical and Clifford pieces share mean curvature."""
    return brentq(lambda r: umbilical_H(r) - clifford_H(r), 0.05, 0.95, xtol=1e-16, rtol=1e-15)


@dataclass(frozen=True)
class IntersectionResult:
    case: str  # "Empty", "Circle" or "Torus"
    radii: tuple = ()


def sphere_cylinder_intersection(r1: float, r2: float, tol: float = 1e-12) -> IntersectionResult:
    """Intersection of the umbilical sphere {x5 = sqrt(1-r1^2)} with the
    Clifford piece {x1^2 + x2^2 = r2^2}."""
    for r in (r1, r2):
        if not 0.0 < r < 1.0:
            raise DomainError(f"radius {r!r} outside (0, 1)")
    if abs(r1 - r2) <= tol:
        return IntersectionResult("Circle", (r2,))
    if r2 > r1:
        return IntersectionResult("Empty")
    r12 = math.sqrt(r1 * r1 - r2 * r2) / math.sqrt(1.0 - r2 * r2)
    return IntersectionResult("Torus", (r2, r12))


@dataclass(frozen=True)
class ComponentSpec:
    kind: str
    constants: dict
    H: float

    def contains(self, x, tol: float = 1e-12) -> bool:
        """Membership of a point of S^4 in this component."""
        x = np.asarray(x, dtype=float)
        c = self.constants
        if abs(x @ x - 1.0) > tol:
            return False
        if self.kind in ("UmbilicalPlus", "UmbilicalMinus"):
            return abs(x[4] - c["level"]) <= tol
        if self.kind == "CliffordM2":
            return abs(x[0] ** 2 + x[1] ** 2 - c["r"] ** 2) <= tol
        if self.kind == "CliffordM3":
            return abs(x[2] ** 2 + x[3] ** 2 - c["r"] ** 2) <= tol
        # gamma circles
        pair = c["plane"]
        other = [i for i in range(4) if i not in pair]
        return (abs(x[pair[0]] ** 2 + x[pair[1]] ** 2 - c["r"] ** 2) <= tol
                and all(abs(x[i]) <= tol for i in other) and abs(x[4] - c["level"]) <= tol)

    def sample(self, num: int = 64) -> np.ndarray:
        """Points on a gamma circle (only defined for GammaCircle kinds)."""
        if not self.kind.startswith("GammaCircle"):
            raise ValueError("sampling is only provided for the gamma circles")
        c = self.constants
        ang = np.linspace(0.0, 2 * math.pi, num, endpoint=False)
        x = np.zeros((num, 5))
        x[:, c["plane"][0]] = c["r"] * np.cos(ang)
        x[:, c["plane"][1]] = c["r"] * np.sin(ang)
        x[:, 4] = c["level"]
        return x


def assemble_M_components() -> dict:
    """Pieces of the piecewise-CMC hypersurface M and the circles where they meet.

    Returns a dict with ``components`` (four hypersurface pieces),
    ``circles`` (gamma_1..gamma_4) and ``checks`` (the incidence facts,
    each recomputed rather than assumed).
    """
    r = equal_H_radius()
    z = math.sqrt(1.0 - r * r)
    H = umbilical_H(r)
    comps = [
        ComponentSpec("UmbilicalPlus", {"level": z, "r": r}, umbilical_H(r)),
        ComponentSpec("UmbilicalMinus", {"level": -z, "r": r}, umbilical_H(r)),
        ComponentSpec("CliffordM2", {"r": r}, clifford_H(r)),
        ComponentSpec("CliffordM3", {"r": r}, clifford_H(r)),
    ]
    circles = [
        ComponentSpec("GammaCircle1", {"plane": (0, 1), "level": z, "r": r}, H),
        ComponentSpec("GammaCircle2", {"plane": (2, 3), "level": z, "r": r}, H),
        ComponentSpec("GammaCircle3", {"plane": (0, 1), "level": -z, "r": r}, H),
        ComponentSpec("GammaCircle4", {"plane": (2, 3), "level": -z, "r": r}, H),
    ]
    up, um, m2, m3 = comps
    # M2 n M1+: on M2, x1^2+x2^2 = r^2 and x5 = z force x3 = x4 = 0
    inc = {
        "M2_M1plus": (m2, up, circles[0]),
        "M3_M1plus": (m3, up, circles[1]),
        "M2_M1minus": (m2, um, circles[2]),
        "M3_M1minus": (m3, um, circles[3]),
    }
    checks = {
        "common_H": all(abs(c.H - H) < 1e-12 for c in comps),
        "M2_M3_empty": 2 * r * r > 1.0,
    }
    for name, (a, b, circ) in inc.items():
        pts = circ.sample()
        on_both = all(a.contains(p) and b.contains(p) for p in pts)
        # the circle exhausts the intersection: x1^2+x2^2 = r^2, x5^2 = 1 - r^2 leave nothing
        # for (x3, x4), and symmetrically for M3
        checks[name] = on_both and abs(r * r + z * z - 1.0) < 1e-12
    return {"radius": r, "H": H, "components": comps, "circles": circles, "checks": checks}


def sample_immersion(points, n_theta1: int = 16, n_theta2: int = 16) -> np.ndarray:
    """Points ``(f2 cos t1, f2 sin t1, f3 cos t2, f3 sin t2, f1)`` on S^4.

    Output has shape ``(len(points) * n_theta1 * n_theta2, 5)``.
    """
    pts = np.asarray(points, dtype=float).reshape(-1, 2)
    r2 = (pts ** 2).sum(axis=1)
    if np.any(r2 > 1.0 + 1e-9) or np.any(pts[:, 1] < -1e-12):
        raise DomainError("profile points must lie in the closed upper half disk")
    f1, f2 = pts[:, 0], pts[:, 1]
    f3 = np.sqrt(np.clip(1.0 - r2, 0.0, None))
    t1 = np.linspace(0.0, 2 * math.pi, n_theta1, endpoint=False)
    t2 = np.linspace(0.0, 2 * math.pi, n_theta2, endpoint=False)
    P, A, B = np.meshgrid(np.arange(len(pts)), t1, t2, indexing="ij")
    P, A, B = P.ravel(), A.ravel(), B.ravel()
    return np.column_stack([
        f2[P] * np.cos(A), f2[P] * np.sin(A), f3[P] * np.cos(B), f3[P] * np.sin(B), f1[P],
    ])


@njit(cache=True)
def _directed_hausdorff(A, B):
    worst = 0.0
    for i in range(len(A)):
        best = np.inf
        if len(B) == 1:
            best = math.hypot(A[i, 0] - B[0, 0], A[i, 1] - B[0, 1])
        for j in range(len(B) - 1):
            d = _point_seg_dist(A[i, 0], A[i, 1], B[j], B[j + 1])
            if d < best:
                best = d
        if best > worst:
            worst = best
    return worst


def hausdorff(A, B) -> float:
    """Symmetric Hausdorff distance between two polylines (vertex to segment)."""
    A = np.ascontiguousarray(getattr(A, "points", A), dtype=float)
    B = np.ascontiguousarray(getattr(B, "points", B), dtype=float)
    if len(A) == 0 or len(B) == 0:
        raise ValueError("polylines must be nonempty")
    return max(_directed_hausdorff(A, B), _directed_hausdorff(B, A))
