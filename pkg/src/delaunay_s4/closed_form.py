"""Closed-form solutions of the profile ODE and the two singular generators.

Includes the explicit line/circle solutions and their mean curvatures, the
constants of the piecewise-CMC generator M, the piecewise profile curves of
M and of the singular minimal hypersurface M_f, and the complete elliptic
integral of the second kind.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.integrate import quad
from scipy.optimize import brentq

from .errors import DomainError
from .ode import ModelParams, rhs_array

# ---------------------------------------------------------------- elliptic E


def elliptic_E(m: float) -> float:
    """Complete elliptic integral of the second kind, parameter convention:
    ``E(m) = int_0^{pi/2} sqrt(1 - m sin^2 t) dt`` for ``m <= 1``."""
    if m > 1.0:
        raise DomainError(f"parameter {m!r} > 1")
    if m == 1.0:
        return 1.0
    val, _ = quad(lambda t: math.sqrt(1.0 - m * math.sin(t) ** 2), 0.0, math.pi / 2,
                  epsabs=1e-13, epsrel=1e-13, limit=200)
    return val


def elliptic_E_agm(m: float) -> float:
    """Same integral by the arithmetic-geometric mean; used as an oracle."""
    if m > 1.0:
        raise DomainError(f"parameter {m!r} > 1")
    if m == 1.0:
        return 1.0
    a, b = 1.0, math.sqrt(1.0 - m)
    c2 = m  # c_0^2
    total = 0.5 * c2
    power = 0.5
    for _ in range(64):
        c = 0.5 * (a - b)
        a, b = 0.5 * (a + b), math.sqrt(a * b)
        power *= 2.0
        total += power * c * c
        if abs(c) <= 4.0 * np.finfo(float).eps * a:
            break
    return math.pi / (2.0 * a) * (1.0 - total)


# ------------------------------------------------------- explicit solutions

KINDS = ("HorizontalF2", "VerticalF1Plus", "VerticalF1Minus", "CircleF3")


@dataclass(frozen=True)
class ExplicitSolutionKind:
    tag: str
    radius: float

    def __post_init__(self):
        if self.tag not in KINDS:
            raise ValueError(f"unknown explicit solution {self.tag!r}")
        if not 0.0 < self.radius < 1.0:
            raise DomainError(f"radius {self.radius!r} outside (0, 1)")


def lemma_H(kind: ExplicitSolutionKind, ell: int, m: int) -> float:
    """|H| for which the explicit solution ``kind`` solves the profile ODE.

    ``kind.radius`` is the level of f2 (HorizontalF2), |f1| (VerticalF1*) or
    f3 (CircleF3); the complementary radius is ``sqrt(1 - radius^2)``.
    """
    if ell < 1 or m < 1:
        raise DomainError("ell and m must be >= 1")
    n = ell + m + 1
    r = kind.radius
    rc = math.sqrt(1.0 - r * r)
    if kind.tag == "HorizontalF2":
        r2, r1 = r, rc
        return abs(n * r2 ** 2 - ell) / (n * r1 * r2)
    if kind.tag in ("VerticalF1Plus", "VerticalF1Minus"):
        r1, r2 = r, rc
        return r1 / r2
    r2, r1 = r, rc
    return abs(ell + 1 - n * r1 ** 2) / (n * r1 * r2)


@dataclass(frozen=True)
class PwcmcValues:
    H: float
    r1: float
    r2: float
    n: int


def pwcmc_values(ell: int) -> PwcmcValues:
    """Mean curvature and radii shared by the four explicit pieces (m = ell)."""
    if ell < 1:
        raise DomainError("ell must be >= 1")
    n = 2 * ell + 1
    return PwcmcValues(
        H=-math.sqrt((n + 1) / (3 * n - 1)),
        r1=math.sqrt((n + 1) / (4 * n)),
        r2=math.sqrt((3 * n - 1) / (4 * n)),
        n=n,
    )


def pwcmc_consistency(ell: int, m: int) -> dict:
    """Check whether one H and radii r1, r2 = sqrt(1 - r1^2) make all four
    explicit solutions solve the ODE for dimensions (ell, m).

    Matching the circle and vertical-line magnitudes forces
    ``1 + ell = 2 n r1^2``; matching the horizontal line then forces
    ``n r2^2 = ell + n r1^2``.  Together these require ``n = 2 ell + 1``.
    """
    if ell < 1 or m < 1:
        raise DomainError("ell and m must be >= 1")
    n = ell + m + 1
    r1sq = (1 + ell) / (2 * n)
    r2sq = 1.0 - r1sq
    contradiction = n * r2sq - (ell + n * r1sq)  # = n - 2 ell - 1
    feasible = abs(contradiction) < 1e-12 and 0 < r1sq < 1
    out = {"ell": ell, "m": m, "n": n, "feasible": bool(feasible), "residual": contradiction}
    if feasible:
        out["witness"] = pwcmc_values(ell)
        r1, r2 = math.sqrt(r1sq), math.sqrt(r2sq)
        out["lemma_H"] = {
            "HorizontalF2": lemma_H(ExplicitSolutionKind("HorizontalF2", r2), ell, m),
            "VerticalF1Plus": lemma_H(ExplicitSolutionKind("VerticalF1Plus", r1), ell, m),
            "CircleF3": lemma_H(ExplicitSolutionKind("CircleF3", r2), ell, m),
        }
    return out


def explicit_solution(kind: ExplicitSolutionKind, t: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """States ``(f1, f2, theta)`` and exact ``theta'`` along the explicit solution.

    Orientation follows the generator M: the horizontal line is run leftward,
    the vertical lines upward at f1 = r1 and downward at f1 = -r1, and the
    circle clockwise from its top.
    """
    t = np.asarray(t, dtype=float)
    r = kind.radius
    rc = math.sqrt(1.0 - r * r)
    one = np.ones_like(t)
    if kind.tag == "HorizontalF2":
        y = np.column_stack([-t, r * one, math.pi * one])
        return y, 0.0 * t
    if kind.tag == "VerticalF1Plus":
        y = np.column_stack([r * one, 0.5 + t, 0.5 * math.pi * one])
        return y, 0.0 * t
    if kind.tag == "VerticalF1Minus":
        y = np.column_stack([-r * one, 0.9 * rc - t, -0.5 * math.pi * one])
        return y, 0.0 * t
    r1 = rc  # radius of the profile circle when f3 = r
    y = np.column_stack([r1 * np.sin(t / r1), r1 * np.cos(t / r1), -t / r1])
    return y, -one / r1


def residual_on_explicit(params: ModelParams, kind: ExplicitSolutionKind, samples: int = 200) -> float:
    """Max |theta'_ODE - theta'_explicit| along the explicit solution."""
    r = kind.radius
    rc = math.sqrt(1.0 - r * r)
    if kind.tag == "HorizontalF2":
        span = (0.0, 0.9 * rc)  # keep f3 > 0
        t = np.linspace(-span[1], span[1], samples)
    elif kind.tag in ("VerticalF1Plus", "VerticalF1Minus"):
        # f2 runs over (0, r2) strictly inside the disk
        t = np.linspace(0.05 * rc, 0.85 * rc, samples)
        if kind.tag == "VerticalF1Plus":
            t = t - 0.5
    else:
        r1 = rc
        # stay in f2 > 0: |t / r1| < pi / 2
        t = np.linspace(-0.45 * math.pi * r1, 0.45 * math.pi * r1, samples)
    y, dth = explicit_solution(kind, t)
    if np.any(y[:, 1] <= 0) or np.any((y[:, :2] ** 2).sum(axis=1) >= 1.0):
        raise DomainError("explicit solution left the open half disk")
    return float(np.max(np.abs(rhs_array(params, y)[:, 2] - dth)))


# ---------------------------------------------------------- piecewise curves


@dataclass(frozen=True)
class Segment:
    """One arc-length parametrized piece on ``[t0, t1]``.

    ``shape`` is ``"circle"``, ``"line"`` or ``"ellipse"``; ``data`` carries
    the geometric constants of the piece.
    """

    shape: str
    t0: float
    t1: float
    data: dict = field(default_factory=dict)

    @property
    def length(self) -> float:
        return self.t1 - self.t0

    def evaluate(self, t) -> np.ndarray:
        """Rows ``(f1, f2, theta)``."""
        s = np.asarray(t, dtype=float) - self.t0
        d = self.data
        if self.shape == "line":
            p = np.asarray(d["start"])
            q = np.asarray(d["end"])
            u = (q - p) / np.linalg.norm(q - p)
            xy = p[None, :] + s[:, None] * u[None, :]
            th = np.full(len(s), d["theta"])
            return np.column_stack([xy, th])
        if self.shape == "circle":
            # clockwise around the origin starting at polar angle phi0
            R, phi0 = d["radius"], d["phi0"]
            phi = phi0 - s / R
            th = d["theta0"] - s / R
            return np.column_stack([R * np.cos(phi), R * np.sin(phi), th])
        if self.shape == "ellipse":
            xy = np.array([ellipse_point_at_arclength(si, d["start"], d["orientation"]) for si in s])
            u = np.array([_ellipse_param(*p) for p in xy])
            th = _ellipse_theta(u, d["orientation"], d["theta_ref"])
            return np.column_stack([xy, th])
        raise ValueError(self.shape)


@dataclass(frozen=True)
class PiecewiseCurve:
    segments: tuple
    breakpoints: tuple
    period: float
    theta_jumps: tuple

    def evaluate(self, t) -> np.ndarray:
        """Rows ``(f1, f2, theta)`` at times in ``[0, period]``; at a breakpoint
        the right-hand piece is used."""
        t = np.atleast_1d(np.asarray(t, dtype=float))
        out = np.empty((len(t), 3))
        starts = np.array([seg.t0 for seg in self.segments])
        idx = np.clip(np.searchsorted(starts, t, side="right") - 1, 0, len(self.segments) - 1)
        for k, seg in enumerate(self.segments):
            sel = idx == k
            if np.any(sel):
                out[sel] = seg.evaluate(t[sel])
        return out

    def sample(self, per_segment: int = 400) -> np.ndarray:
        """Polyline of ``(f1, f2)`` covering the whole period, corners included."""
        pts = [self.segments[0].evaluate(np.array([self.segments[0].t0]))[:, :2]]
        for seg in self.segments:
            ts = np.linspace(seg.t0, seg.t1, per_segment + 1)[1:]
            pts.append(seg.evaluate(ts)[:, :2])
        return np.vstack(pts)

    def table(self, per_segment: int = 400) -> np.ndarray:
        """Columns ``(t, f1, f2, theta, f3)``, both one-sided values kept at corners."""
        rows = []
        for seg in self.segments:
            ts = np.linspace(seg.t0, seg.t1, per_segment + 1)
            y = seg.evaluate(ts)
            f3 = np.sqrt(np.clip(1.0 - y[:, 0] ** 2 - y[:, 1] ** 2, 0.0, None))
            rows.append(np.column_stack([ts, y, f3]))
        return np.vstack(rows)


def generator_M_breakpoints(n: int) -> tuple:
    """Breakpoints T1..T4 and the period 2T of the piecewise-CMC profile."""
    a = math.sqrt(1.0 / n + 1.0)
    b = math.sqrt(3.0 - 1.0 / n)
    T1 = 0.25 * math.pi * a
    T2 = T1 + 0.5 * b
    T3 = T1 + a + 0.5 * b
    T4 = T1 + a + b
    period = 0.5 * math.pi * a + a + b
    return T1, T2, T3, T4, period


def singular_generator_M(ell: int = 1) -> PiecewiseCurve:
    """Closed profile of the piecewise-CMC hypersurface (m = ell, n = 2 ell + 1).

    Quarter circle (0, r1) -> (r1, 0), up the line f1 = r1 to (r1, r2), left
    along f2 = r2 to (-r1, r2), down to (-r1, 0), and a quarter circle back to
    (0, r1).  Theta is unwrapped and jumps at each corner.
    """
    v = pwcmc_values(ell)
    r1, r2 = v.r1, v.r2
    T1, T2, T3, T4, period = generator_M_breakpoints(v.n)
    pi = math.pi
    segs = (
        Segment("circle", 0.0, T1, {"radius": r1, "phi0": pi / 2, "theta0": 0.0}),
        Segment("line", T1, T2, {"start": (r1, 0.0), "end": (r1, r2), "theta": pi / 2}),
        Segment("line", T2, T3, {"start": (r1, r2), "end": (-r1, r2), "theta": pi}),
        Segment("line", T3, T4, {"start": (-r1, r2), "end": (-r1, 0.0), "theta": 1.5 * pi}),
        Segment("circle", T4, period, {"radius": r1, "phi0": pi, "theta0": 2.5 * pi}),
    )
    jumps = (pi, pi / 2, pi / 2, pi)
    return PiecewiseCurve(segs, (T1, T2, T3, T4), period, jumps)


# ellipse f1^2 + 2 f2^2 = 1, parametrized as (sin u, cos u / sqrt 2); u grows clockwise

def _ellipse_speed(u):
    return math.sqrt(1.0 - 0.5 * math.sin(u) ** 2)


def _ellipse_param(f1, f2) -> float:
    return math.atan2(f1, math.sqrt(2.0) * f2)


def _ellipse_arclength(u: float) -> float:
    """Arc length from u = 0 to u (any real u), by quadrature of the speed."""
    quarter = 0.5 * ELLIPSE_LENGTH / 2.0
    k = math.floor(u / (math.pi / 2))
    rem = u - k * math.pi / 2
    val, _ = quad(_ellipse_speed, k * math.pi / 2, k * math.pi / 2 + rem, epsabs=1e-13, epsrel=1e-13)
    return k * quarter + val


def _ellipse_theta(u, orientation, theta_ref):
    """Unwrapped tangent angle for parameter values u.

    Clockwise travel has velocity proportional to (cos u, -sin u / sqrt 2).
    """
    u = np.asarray(u, dtype=float)
    if orientation > 0:
        th = np.arctan2(-np.sin(u) / math.sqrt(2.0), np.cos(u))
    else:
        th = np.arctan2(np.sin(u) / math.sqrt(2.0), -np.cos(u))
    # shift each value by a multiple of 2 pi to sit nearest the reference
    return th + 2 * math.pi * np.round((theta_ref - th) / (2 * math.pi))


ELLIPSE_LENGTH = 2.0 * math.sqrt(2.0) * elliptic_E(-1.0)


def ellipse_point_at_arclength(s: float, start=(0.0, 1.0 / math.sqrt(2.0)), orientation: int = 1):
    """Point of the ellipse f1^2 + 2 f2^2 = 1 reached after arc length ``s``
    from ``start``; ``orientation`` +1 is clockwise in the (f1, f2) plane."""
    f1, f2 = start
    if abs(f1 * f1 + 2 * f2 * f2 - 1.0) > 1e-9:
        raise DomainError("start point is not on the ellipse")
    u0 = _ellipse_param(f1, f2)
    target = _ellipse_arclength(u0) + (1 if orientation > 0 else -1) * s
    # speed lies in [1/sqrt 2, 1], so the parameter increment is bracketed
    lo_u, hi_u = sorted((u0 + (target - _ellipse_arclength(u0)),
                         u0 + math.sqrt(2.0) * (target - _ellipse_arclength(u0))))
    lo_u -= 1e-12
    hi_u += 1e-12
    if hi_u - lo_u < 1e-15:
        u = u0
    else:
        u = brentq(lambda v: _ellipse_arclength(v) - target, lo_u, hi_u, xtol=1e-15, rtol=1e-15)
    return (math.sin(u), math.cos(u) / math.sqrt(2.0))


def singular_generator_Mf() -> PiecewiseCurve:
    """Closed profile of the singular minimal hypersurface (ell = m = 1).

    Clockwise quarter ellipse from (0, 1/sqrt 2) to (1, 0), counterclockwise
    half back over the top to (-1, 0), clockwise quarter to the start.
    """
    L = ELLIPSE_LENGTH
    T1, T2, T3, T4 = L / 4, L / 2, 3 * L / 4, L
    pi = math.pi
    top = (0.0, 1.0 / math.sqrt(2.0))
    segs = (
        Segment("ellipse", 0.0, T1, {"start": top, "orientation": 1, "theta_ref": -pi / 4}),
        Segment("ellipse", T1, T3, {"start": (1.0, 0.0), "orientation": -1, "theta_ref": pi}),
        Segment("ellipse", T3, T4, {"start": (-1.0, 0.0), "orientation": 1,
                                    "theta_ref": 2 * pi + pi / 4}),
    )
    return PiecewiseCurve(segs, (T1, T2, T3, T4), L, (pi, 0.0, pi, 0.0))
