"""Periodic-closure shooting problem.

A point ``Z = (a, H, T)`` closes the profile when the solution started at
``(f1, f2, theta) = (0, a, 0)`` satisfies ``f1(T) = 0`` and ``theta(T) = pi``.
The profile then extends by reflection to a ``2T``-periodic curve.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass

import numpy as np
from scipy.optimize import brentq

from .errors import (
    DomainError, IllConditioned, LeftDomain, MaxStepsExceeded, NoConvergence,
    SingularEncounter, StepUnderflow,
)
from .ode import IntegratorConfig, ModelParams, ProfileState, Trajectory, integrate

log = logging.getLogger(__name__)

_INTEGRATION_ERRORS = (SingularEncounter, StepUnderflow, MaxStepsExceeded)


@dataclass(frozen=True)
class ShootingPoint:
    a: float
    H: float
    T: float

    def __post_init__(self):
        if not (0.0 < self.a < 1.0):
            raise DomainError(f"a={self.a!r} outside (0, 1)")
        if not self.T > 0.0:
            raise DomainError(f"T={self.T!r} must be positive")

    def as_array(self) -> np.ndarray:
        return np.array([self.a, self.H, self.T])

    @classmethod
    def from_array(cls, z) -> "ShootingPoint":
        return cls(float(z[0]), float(z[1]), float(z[2]))

    def distance(self, other: "ShootingPoint") -> float:
        return float(np.linalg.norm(self.as_array() - other.as_array()))


@dataclass(frozen=True, eq=False)
class ResidualReport:
    r_f1: float
    r_theta: float
    min_f2: float
    min_f3: float
    trajectory: Trajectory

    @property
    def residual(self) -> np.ndarray:
        return np.array([self.r_f1, self.r_theta])

    @property
    def norm(self) -> float:
        return max(abs(self.r_f1), abs(self.r_theta))


@dataclass(frozen=True)
class NewtonConfig:
    res_tol: float = 1e-10
    max_iter: int = 20
    fd_step: float = 1e-7
    damping: float = 1.0

    def __post_init__(self):
        if not self.res_tol > 0:
            raise ValueError("res_tol must be positive")
        if self.max_iter < 1:
            raise ValueError("max_iter must be >= 1")
        if not self.fd_step > 0:
            raise ValueError("fd_step must be positive")
        if not 0 < self.damping <= 1:
            raise ValueError("damping must lie in (0, 1]")


def profile_minima(traj: Trajectory) -> tuple[float, float]:
    """Minimum of f2 and of f3 over nodes and step midpoints."""
    y = traj.y
    if len(traj.t) > 1:
        mid = traj(0.5 * (traj.t[:-1] + traj.t[1:]))
        y = np.vstack([y, mid])
    f3sq = np.clip(1.0 - y[:, 0] ** 2 - y[:, 1] ** 2, 0.0, None)
    return float(y[:, 1].min()), float(np.sqrt(f3sq.min()))


def shoot(params: ModelParams, Z: ShootingPoint, config: IntegratorConfig | None = None) -> ResidualReport:
    """Integrate from ``(0, a, 0)`` to ``t = T`` with ``H = Z.H``.

    ``params.H`` is ignored.  SingularEncounter propagates with the partial
    trajectory attached.
    """
    p = params.with_H(Z.H)
    traj = integrate(p, ProfileState(0.0, 0.0, Z.a, 0.0), Z.T, config)
    end = traj.final
    min_f2, min_f3 = profile_minima(traj)
    return ResidualReport(end.f1, end.theta - math.pi, min_f2, min_f3, traj)


def jacobian(params: ModelParams, Z: ShootingPoint, config: NewtonConfig | None = None,
             integrator: IntegratorConfig | None = None, report: ResidualReport | None = None,
             columns=(0, 1, 2)) -> np.ndarray:
    """2x3 Jacobian of ``(F1, Theta)`` with respect to ``(a, H, T)``.

    The a and H columns use central differences; the T column is the vector
    field at the endpoint.  Columns not listed in ``columns`` are left as NaN.
    """
    ncfg = config or NewtonConfig()
    if report is None:
        report = shoot(params, Z, integrator)
    J = np.full((2, 3), np.nan)
    z = Z.as_array()
    h = ncfg.fd_step
    for j in columns:
        if j == 2:
            dy = report.trajectory.dy[-1]
            J[0, 2] = dy[0]
            J[1, 2] = dy[2]
            continue
        zp, zm = z.copy(), z.copy()
        zp[j] += h
        zm[j] -= h
        rp = shoot(params, ShootingPoint.from_array(zp), integrator).residual
        rm = shoot(params, ShootingPoint.from_array(zm), integrator).residual
        J[:, j] = (rp - rm) / (2 * h)
    if len(columns) == 3:
        sv = np.linalg.svd(J, compute_uv=False)
        if sv[-1] < 1e-8 * sv[0]:
            raise IllConditioned(f"Jacobian rank < 2 at {Z} (singular values {sv})")
    return J


@dataclass(frozen=True, eq=False)
class NewtonInfo:
    iterations: int
    report: ResidualReport
    jacobian: np.ndarray


def _newton(params, guess, normal, point, ncfg, icfg, columns):
    """Newton on [F1; Theta - pi; normal . (Z - point)] with residual-halving damping."""
    normal = np.asarray(normal, dtype=float)
    point = np.asarray(point, dtype=float)
    z = guess.as_array()
    report = shoot(params, guess, icfg)

    def merit(rep, zz):
        return max(abs(rep.r_f1), abs(rep.r_theta), abs(normal @ (zz - point)))

    current = merit(report, z)
    J = None
    for it in range(ncfg.max_iter + 1):
        plane_res = normal @ (z - point)
        if max(report.norm, abs(plane_res)) < ncfg.res_tol:
            if J is None:
                J = jacobian(params, ShootingPoint.from_array(z), ncfg, icfg, report, columns)
            return ShootingPoint.from_array(z), NewtonInfo(it, report, J)
        if it == ncfg.max_iter:
            break
        J = jacobian(params, ShootingPoint.from_array(z), ncfg, icfg, report, columns)
        A = np.vstack([np.nan_to_num(J), normal])
        b = -np.array([report.r_f1, report.r_theta, plane_res])
        try:
            step = np.linalg.solve(A, b)
        except np.linalg.LinAlgError as exc:
            raise NoConvergence(f"singular Newton matrix at {z}") from exc
        lam = ncfg.damping
        accepted = False
        for _ in range(6):
            trial = z + lam * step
            if not (0.0 < trial[0] < 1.0) or trial[2] <= 0.0:
                lam *= 0.5
                continue
            try:
                rep = shoot(params, ShootingPoint.from_array(trial), icfg)
            except _INTEGRATION_ERRORS:
                lam *= 0.5
                continue
            m = merit(rep, trial)
            if m < current or m < ncfg.res_tol:
                z, report, current = trial, rep, m
                accepted = True
                break
            lam *= 0.5
        if not accepted:
            if not (0.0 < (z + step)[0] < 1.0) or (z + step)[2] <= 0.0:
                raise LeftDomain(f"Newton iterate left the domain from {z}")
            raise NoConvergence(f"no decrease along the Newton direction at {z} "
                                f"(residual {current:.3e})", ShootingPoint.from_array(z))
    raise NoConvergence(f"Newton did not converge in {ncfg.max_iter} iterations "
                        f"(residual {current:.3e})", ShootingPoint.from_array(z))


def newton_correct(params: ModelParams, guess: ShootingPoint, plane_normal, plane_point: ShootingPoint,
                   config: NewtonConfig | None = None, integrator: IntegratorConfig | None = None,
                   full_output: bool = False):
    """Solve the closure system restricted to the plane through ``plane_point``
    with normal ``plane_normal``."""
    ncfg = config or NewtonConfig()
    nrm = np.asarray(plane_normal, dtype=float)
    if nrm.shape != (3,) or not np.linalg.norm(nrm) > 0:
        raise ValueError("plane_normal must be a nonzero 3-vector")
    nrm = nrm / np.linalg.norm(nrm)
    Z, info = _newton(params, guess, nrm, plane_point.as_array(), ncfg, integrator, (0, 1, 2))
    return (Z, info) if full_output else Z


def _closure_defect(params, a, T0, span, icfg):
    """``(theta(t*) - pi, t*)`` where t* is the downward zero of f1 closest to
    ``T0`` within ``T0 +- span``; NaNs when there is none."""
    try:
        traj = integrate(params, ProfileState(0.0, 0.0, a, 0.0), T0 + span, icfg)
    except _INTEGRATION_ERRORS as exc:
        traj = exc.trajectory
    if traj is None or traj.t_end < T0 - span:
        return math.nan, math.nan
    f1 = traj.y[:, 0]
    idx = np.nonzero((f1[:-1] > 0) & (f1[1:] <= 0))[0]
    idx = idx[traj.t[idx + 1] >= T0 - span]
    if len(idx) == 0:
        return math.nan, math.nan
    k = idx[np.argmin(np.abs(traj.t[idx] - T0))]
    tc = brentq(lambda t: float(traj(t)[0, 0]), traj.t[k], traj.t[k + 1], xtol=1e-14)
    return float(traj(tc)[0, 2]) - math.pi, tc


def _scan_fixed_H(params, a0, T0, icfg, width=0.03, samples=61, span=0.15):
    """Bracket a closing profile in ``a`` near ``a0`` by sampling the closure
    defect, then solve the nearest bracket with Brent's method."""
    p = params
    lo, hi = max(1e-3, a0 - width), min(1 - 1e-3, a0 + width)
    grid = np.linspace(lo, hi, samples)
    vals = [_closure_defect(p, a, T0, span, icfg) for a in grid]
    best = None
    for k in range(samples - 1):
        (g0, t0), (g1, t1) = vals[k], vals[k + 1]
        if not (np.isfinite(g0) and np.isfinite(g1)) or g0 * g1 > 0:
            continue
        # a jump of the crossing time or of the winding is not a root
        if abs(t1 - t0) > 0.1 * span or abs(g1 - g0) > 1.0:
            continue
        dist = math.hypot(0.5 * (grid[k] + grid[k + 1]) - a0, 0.5 * (t0 + t1) - T0)
        if best is None or dist < best[0]:
            best = (dist, k)
    if best is None:
        raise NoConvergence(f"no closing profile bracketed for a in [{lo:.4f}, {hi:.4f}]")
    k = best[1]
    a_star = brentq(lambda a: _closure_defect(p, a, T0, span, icfg)[0], grid[k], grid[k + 1],
                    xtol=1e-13)
    return a_star, _closure_defect(p, a_star, T0, span, icfg)[1]


def refine_fixed_H(params: ModelParams, H_fixed: float, a0: float, T0: float,
                   config: NewtonConfig | None = None, integrator: IntegratorConfig | None = None,
                   full_output: bool = False, max_move: float = 0.05):
    """Solve for ``(a, T)`` with the mean curvature frozen at ``H_fixed``.

    Newton runs first from ``(a0, T0)``.  When it fails, or lands more than
    ``max_move`` away in ``(a, T)``, the closure defect is scanned over ``a``
    around ``a0`` and the nearest sign change is bracketed and polished by
    Newton.
    """
    ncfg = config or NewtonConfig()
    normal = np.array([0.0, 1.0, 0.0])
    guess = ShootingPoint(a0, H_fixed, T0)
    try:
        Z, info = _newton(params, guess, normal, guess.as_array(), ncfg, integrator, (0, 2))
        if math.hypot(Z.a - a0, Z.T - T0) > max_move:
            raise NoConvergence(f"Newton wandered to {Z}", Z)
    except (NoConvergence, LeftDomain) as exc:
        log.debug("fixed-H Newton failed from %s (%s); scanning", guess, exc)
        a1, T1 = _scan_fixed_H(params.with_H(H_fixed), a0, T0, integrator)
        guess = ShootingPoint(a1, H_fixed, T1)
        Z, info = _newton(params, guess, normal, guess.as_array(), ncfg, integrator, (0, 2))
    return (Z, info) if full_output else Z
