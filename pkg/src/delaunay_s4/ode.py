"""Profile ODE for generalized rotational CMC hypersurfaces and its integrator.

The unknowns are the arc-length parametrized profile ``(f1, f2)`` in the upper
half disk together with its (unwrapped) tangent angle ``theta``::

    f1'    = cos(theta)
    f2'    = sin(theta)
    theta' = h^2 / (f3^2 f2) * (ell cos(theta) - n f2 g + n H f2 h)

with ``g = f2 cos(theta) - f1 sin(theta)``, ``h = sqrt(1 - g^2)``,
``f3 = sqrt(1 - f1^2 - f2^2)`` and ``n = ell + m + 1``.

Integration uses a Dormand-Prince 5(4) pair with its 4th order continuous
extension, compiled with numba.  A classical fixed-step RK4 integrator is kept
as an independent oracle.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from numba import njit

from .errors import DomainError, MaxStepsExceeded, OutOfRange, SingularEncounter, StepUnderflow

DISK_TOL = 1e-9

# kernel status codes
_OK = 0
_SING_F2 = 1
_SING_F3 = 2
_UNDERFLOW = 3
_MAXSTEPS = 4


@dataclass(frozen=True)
class ModelParams:
    ell: int = 1
    m: int = 1
    H: float = 0.0

    def __post_init__(self):
        if int(self.ell) != self.ell or int(self.m) != self.m or self.ell < 1 or self.m < 1:
            raise DomainError(f"ell and m must be positive integers, got ell={self.ell}, m={self.m}")

    @property
    def n(self) -> int:
        return self.ell + self.m + 1

    def with_H(self, H: float) -> "ModelParams":
        return ModelParams(self.ell, self.m, float(H))


@dataclass(frozen=True)
class ProfileState:
    t: float
    f1: float
    f2: float
    theta: float

    def as_array(self) -> np.ndarray:
        return np.array([self.f1, self.f2, self.theta])


@dataclass(frozen=True)
class DerivedQuantities:
    g: float
    h: float
    f3: float


@dataclass(frozen=True)
class IntegratorConfig:
    abs_tol: float = 1e-10
    rel_tol: float = 1e-10
    max_step: float = 0.05
    f2_floor: float = 1e-6
    f3sq_floor: float = 1e-12
    max_steps: int = 1_000_000
    fixed_step: bool = False  # take steps of exactly max_step, no error control

    def __post_init__(self):
        for name in ("abs_tol", "rel_tol", "max_step", "f2_floor", "f3sq_floor"):
            if not getattr(self, name) > 0:
                raise ValueError(f"{name} must be positive")
        if self.max_steps < 1:
            raise ValueError("max_steps must be >= 1")

    def tightened(self, factor: float) -> "IntegratorConfig":
        return IntegratorConfig(
            self.abs_tol / factor, self.rel_tol / factor, self.max_step,
            self.f2_floor, self.f3sq_floor, self.max_steps, self.fixed_step,
        )


def derived(state: ProfileState) -> DerivedQuantities:
    r2 = state.f1 * state.f1 + state.f2 * state.f2
    if r2 > 1.0 + DISK_TOL:
        raise DomainError(f"state outside the unit disk: f1^2+f2^2={r2!r}")
    g = state.f2 * math.cos(state.theta) - state.f1 * math.sin(state.theta)
    return DerivedQuantities(g=g, h=math.sqrt(max(0.0, 1.0 - g * g)), f3=math.sqrt(max(0.0, 1.0 - r2)))


@njit(cache=True)
def _rhs(ell, n, H, f1, f2, th, f2_floor, f3sq_floor, out):
    """Fill ``out`` with the vector field; return a status code for the guards."""
    c = math.cos(th)
    s = math.sin(th)
    out[0] = c
    out[1] = s
    f3sq = 1.0 - f1 * f1 - f2 * f2
    if f3sq < 0.0 and f3sq > -DISK_TOL:
        f3sq = 0.0
    if f2 < f2_floor:
        out[2] = 0.0
        return _SING_F2
    if f3sq < f3sq_floor:
        out[2] = 0.0
        return _SING_F3
    g = f2 * c - f1 * s
    h2 = 1.0 - g * g
    if h2 < 0.0:
        h2 = 0.0
    h = math.sqrt(h2)
    out[2] = h2 / (f3sq * f2) * (ell * c - n * f2 * g + n * H * f2 * h)
    return _OK


def rhs(params: ModelParams, state: ProfileState, config: IntegratorConfig | None = None):
    """Return ``(df1, df2, dtheta)`` at ``state``.

    Raises SingularEncounter when f2 or f3^2 is below the configured floor.
    """
    cfg = config or IntegratorConfig()
    out = np.empty(3)
    code = _rhs(params.ell, params.n, params.H, state.f1, state.f2, state.theta,
                cfg.f2_floor, cfg.f3sq_floor, out)
    if code == _SING_F2:
        raise SingularEncounter("f2", state.t)
    if code == _SING_F3:
        raise SingularEncounter("f3", state.t)
    return float(out[0]), float(out[1]), float(out[2])


# Dormand-Prince 5(4) tableau
_C2, _C3, _C4, _C5 = 1 / 5, 3 / 10, 4 / 5, 8 / 9
_A21 = 1 / 5
_A31, _A32 = 3 / 40, 9 / 40
_A41, _A42, _A43 = 44 / 45, -56 / 15, 32 / 9
_A51, _A52, _A53, _A54 = 19372 / 6561, -25360 / 2187, 64448 / 6561, -212 / 729
_A61, _A62, _A63, _A64, _A65 = 9017 / 3168, -355 / 33, 46732 / 5247, 49 / 176, -5103 / 18656
_A71, _A73, _A74, _A75, _A76 = 35 / 384, 500 / 1113, 125 / 192, -2187 / 6784, 11 / 84
_E1, _E3, _E4, _E5, _E6, _E7 = 71 / 57600, -71 / 16695, 71 / 1920, -17253 / 339200, 22 / 525, -1 / 40
_D1 = -12715105075 / 11282082432
_D3 = 87487479700 / 32700410799
_D4 = -10690763975 / 1880347072
_D5 = 701980252875 / 199316789632
_D6 = -1453857185 / 822651844
_D7 = 69997945 / 29380423


@njit(cache=True)
def _dopri_kernel(ell, n, H, y0, t0, t_end, atol, rtol, max_step, f2_floor, f3sq_floor,
                  max_steps, fixed):
    cap = 256
    ts = np.empty(cap)
    ys = np.empty((cap, 3))
    dys = np.empty((cap, 3))
    rc = np.empty((cap, 5, 3))

    y = y0.copy()
    k1 = np.empty(3)
    k2 = np.empty(3)
    k3 = np.empty(3)
    k4 = np.empty(3)
    k5 = np.empty(3)
    k6 = np.empty(3)
    k7 = np.empty(3)
    yt = np.empty(3)
    y1 = np.empty(3)
    t = t0
    ts[0] = t
    ys[0] = y
    status = _rhs(ell, n, H, y[0], y[1], y[2], f2_floor, f3sq_floor, k1)
    dys[0] = k1
    count = 1
    if status != _OK:
        return status, t, ts[:count], ys[:count], dys[:count], rc[:0]

    span = t_end - t0
    if fixed:
        h = max_step
    else:
        # cheap starting step; the controller adapts within a few steps
        h = min(max_step, 0.01 * span, 1e-2)
    hmin_abs = 1e-14
    nsteps = 0
    err = 0.0
    while t < t_end:
        if nsteps >= max_steps:
            return _MAXSTEPS, t, ts[:count], ys[:count], dys[:count], rc[:count - 1]
        last = False
        if t + h >= t_end - 1e-14 * max(1.0, abs(t_end)):
            h = t_end - t
            last = True
        nsteps += 1
        bad = 0
        for i in range(3):
            yt[i] = y[i] + h * _A21 * k1[i]
        bad |= _rhs(ell, n, H, yt[0], yt[1], yt[2], f2_floor, f3sq_floor, k2)
        for i in range(3):
            yt[i] = y[i] + h * (_A31 * k1[i] + _A32 * k2[i])
        bad |= _rhs(ell, n, H, yt[0], yt[1], yt[2], f2_floor, f3sq_floor, k3)
        for i in range(3):
            yt[i] = y[i] + h * (_A41 * k1[i] + _A42 * k2[i] + _A43 * k3[i])
        bad |= _rhs(ell, n, H, yt[0], yt[1], yt[2], f2_floor, f3sq_floor, k4)
        for i in range(3):
            yt[i] = y[i] + h * (_A51 * k1[i] + _A52 * k2[i] + _A53 * k3[i] + _A54 * k4[i])
        bad |= _rhs(ell, n, H, yt[0], yt[1], yt[2], f2_floor, f3sq_floor, k5)
        for i in range(3):
            yt[i] = y[i] + h * (_A61 * k1[i] + _A62 * k2[i] + _A63 * k3[i] + _A64 * k4[i]
                                + _A65 * k5[i])
        bad |= _rhs(ell, n, H, yt[0], yt[1], yt[2], f2_floor, f3sq_floor, k6)
        for i in range(3):
            y1[i] = y[i] + h * (_A71 * k1[i] + _A73 * k3[i] + _A74 * k4[i] + _A75 * k5[i]
                                + _A76 * k6[i])
        bad |= _rhs(ell, n, H, y1[0], y1[1], y1[2], f2_floor, f3sq_floor, k7)

        if bad != 0:
            # a stage poked through a floor: shrink and retry
            if fixed or h < max(hmin_abs, 1e-15 * abs(t)) * 4:
                code = _SING_F2 if (bad & _SING_F2) else _SING_F3
                return code, t, ts[:count], ys[:count], dys[:count], rc[:count - 1]
            h *= 0.25
            continue

        if not fixed:
            err = 0.0
            for i in range(3):
                sc = atol + rtol * max(abs(y[i]), abs(y1[i]))
                e = h * (_E1 * k1[i] + _E3 * k3[i] + _E4 * k4[i] + _E5 * k5[i] + _E6 * k6[i]
                         + _E7 * k7[i]) / sc
                err += e * e
            err = math.sqrt(err / 3.0)
            if err > 1.0:
                fac = max(0.2, 0.9 * err ** -0.2)
                h *= fac
                if h < max(hmin_abs, 1e-15 * abs(t)):
                    return _UNDERFLOW, t, ts[:count], ys[:count], dys[:count], rc[:count - 1]
                continue

        # accept
        if count >= cap:
            cap *= 2
            ts2 = np.empty(cap)
            ys2 = np.empty((cap, 3))
            dys2 = np.empty((cap, 3))
            rc2 = np.empty((cap, 5, 3))
            ts2[:count] = ts[:count]
            ys2[:count] = ys[:count]
            dys2[:count] = dys[:count]
            rc2[:count - 1] = rc[:count - 1]
            ts, ys, dys, rc = ts2, ys2, dys2, rc2
        j = count - 1
        for i in range(3):
            ydiff = y1[i] - y[i]
            bspl = h * k1[i] - ydiff
            rc[j, 0, i] = y[i]
            rc[j, 1, i] = ydiff
            rc[j, 2, i] = bspl
            rc[j, 3, i] = ydiff - h * k7[i] - bspl
            rc[j, 4, i] = h * (_D1 * k1[i] + _D3 * k3[i] + _D4 * k4[i] + _D5 * k5[i]
                               + _D6 * k6[i] + _D7 * k7[i])
        t = t_end if last else t + h
        for i in range(3):
            y[i] = y1[i]
            k1[i] = k7[i]
        ts[count] = t
        ys[count] = y
        dys[count] = k1
        count += 1

        if not fixed:
            fac = 0.9 * err ** -0.2 if err > 1e-10 else 5.0
            h = min(max_step, h * min(5.0, max(0.2, fac)))
    return _OK, t, ts[:count], ys[:count], dys[:count], rc[:count - 1]


@njit(cache=True)
def _rk4_kernel(ell, n, H, y0, t0, t_end, h, f2_floor, f3sq_floor):
    nsteps = int(math.ceil((t_end - t0) / h - 1e-9))
    ts = np.empty(nsteps + 1)
    ys = np.empty((nsteps + 1, 3))
    y = y0.copy()
    k1 = np.empty(3)
    k2 = np.empty(3)
    k3 = np.empty(3)
    k4 = np.empty(3)
    yt = np.empty(3)
    ts[0] = t0
    ys[0] = y
    t = t0
    for s in range(nsteps):
        hh = min(h, t_end - t)
        if s == nsteps - 1:
            hh = t_end - t
        bad = _rhs(ell, n, H, y[0], y[1], y[2], f2_floor, f3sq_floor, k1)
        for i in range(3):
            yt[i] = y[i] + 0.5 * hh * k1[i]
        bad |= _rhs(ell, n, H, yt[0], yt[1], yt[2], f2_floor, f3sq_floor, k2)
        for i in range(3):
            yt[i] = y[i] + 0.5 * hh * k2[i]
        bad |= _rhs(ell, n, H, yt[0], yt[1], yt[2], f2_floor, f3sq_floor, k3)
        for i in range(3):
            yt[i] = y[i] + hh * k3[i]
        bad |= _rhs(ell, n, H, yt[0], yt[1], yt[2], f2_floor, f3sq_floor, k4)
        if bad != 0:
            return bad, ts[:s + 1], ys[:s + 1]
        for i in range(3):
            y[i] += hh / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i])
        t = t_end if s == nsteps - 1 else t0 + (s + 1) * h
        ts[s + 1] = t
        ys[s + 1] = y
    return _OK, ts, ys


@dataclass(frozen=True, eq=False)
class Trajectory:
    """Accepted integration nodes plus per-step dense-output coefficients."""

    params: ModelParams
    t: np.ndarray
    y: np.ndarray          # (N, 3) rows of (f1, f2, theta)
    dy: np.ndarray         # (N, 3) vector field at each node
    dense: np.ndarray = field(repr=False)  # (N-1, 5, 3)

    def __post_init__(self):
        for arr in (self.t, self.y, self.dy, self.dense):
            arr.setflags(write=False)

    @property
    def t_start(self) -> float:
        return float(self.t[0])

    @property
    def t_end(self) -> float:
        return float(self.t[-1])

    def __len__(self):
        return len(self.t)

    def node(self, i: int):
        """Return ``(ProfileState, derivative)`` for node ``i``."""
        f1, f2, th = self.y[i]
        return ProfileState(float(self.t[i]), float(f1), float(f2), float(th)), tuple(self.dy[i])

    @property
    def final(self) -> ProfileState:
        return self.node(len(self.t) - 1)[0]

    def __call__(self, t):
        """Vectorized dense evaluation; returns an array of shape (len(t), 3)."""
        t = np.atleast_1d(np.asarray(t, dtype=float))
        lo, hi = self.t[0], self.t[-1]
        span_tol = 1e-12 * max(1.0, abs(hi))
        if np.any(t < lo - span_tol) or np.any(t > hi + span_tol):
            raise OutOfRange(f"t outside [{lo}, {hi}]")
        if len(self.t) == 1:
            return np.repeat(self.y[:1], len(t), axis=0)
        j = np.clip(np.searchsorted(self.t, t, side="right") - 1, 0, len(self.t) - 2)
        h = self.t[j + 1] - self.t[j]
        s = ((t - self.t[j]) / h)[:, None]
        s1 = 1.0 - s
        rc = self.dense[j]
        out = rc[:, 0] + s * (rc[:, 1] + s1 * (rc[:, 2] + s * (rc[:, 3] + s1 * rc[:, 4])))
        exact = t == self.t[j]
        out[exact] = self.y[j[exact]]
        at_end = t == self.t[j + 1]
        out[at_end] = self.y[j[at_end] + 1]
        return out

    def sample(self, num: int) -> tuple[np.ndarray, np.ndarray]:
        """Uniform samples in t: returns ``(t, states)``."""
        ts = np.linspace(self.t_start, self.t_end, num)
        return ts, self(ts)


def evaluate(traj: Trajectory, t: float) -> ProfileState:
    f1, f2, th = traj(t)[0]
    return ProfileState(float(t), float(f1), float(f2), float(th))


def _check_init(init: ProfileState):
    if init.f1 ** 2 + init.f2 ** 2 > 1.0 + DISK_TOL:
        raise DomainError("initial state outside the unit disk")


def integrate(params: ModelParams, init: ProfileState, t_end: float,
              config: IntegratorConfig | None = None) -> Trajectory:
    """Integrate from ``init`` up to exactly ``t_end``.

    On a guard hit, step underflow or step budget exhaustion the raised error
    carries the partial trajectory.
    """
    cfg = config or IntegratorConfig()
    _check_init(init)
    if not t_end > init.t:
        raise ValueError("t_end must exceed the initial time")
    status, t_last, ts, ys, dys, rc = _dopri_kernel(
        params.ell, params.n, float(params.H), init.as_array(), float(init.t), float(t_end),
        cfg.abs_tol, cfg.rel_tol, cfg.max_step, cfg.f2_floor, cfg.f3sq_floor,
        cfg.max_steps, cfg.fixed_step,
    )
    traj = Trajectory(params, ts.copy(), ys.copy(), dys.copy(), rc.copy())
    if status == _OK:
        return traj
    if status == _SING_F2:
        raise SingularEncounter("f2", t_last, traj)
    if status == _SING_F3:
        raise SingularEncounter("f3", t_last, traj)
    if status == _UNDERFLOW:
        raise StepUnderflow(t_last, traj)
    raise MaxStepsExceeded(t_last, traj)


def integrate_rk4(params: ModelParams, init: ProfileState, t_end: float, h: float,
                  config: IntegratorConfig | None = None) -> tuple[np.ndarray, np.ndarray]:
    """Classical fixed-step RK4; the independent oracle for :func:`integrate`.

    Returns ``(t, y)`` at the grid points.
    """
    cfg = config or IntegratorConfig()
    _check_init(init)
    status, ts, ys = _rk4_kernel(params.ell, params.n, float(params.H), init.as_array(),
                                 float(init.t), float(t_end), float(h),
                                 cfg.f2_floor, cfg.f3sq_floor)
    if status != _OK:
        raise SingularEncounter("f2" if status & _SING_F2 else "f3", float(ts[-1]))
    return ts.copy(), ys.copy()


def rhs_array(params: ModelParams, y: np.ndarray) -> np.ndarray:
    """Vector field on an (N, 3) array of states, without floor guards."""
    f1, f2, th = y[:, 0], y[:, 1], y[:, 2]
    c, s = np.cos(th), np.sin(th)
    g = f2 * c - f1 * s
    h2 = np.clip(1.0 - g * g, 0.0, None)
    f3sq = 1.0 - f1 * f1 - f2 * f2
    n = params.n
    dth = h2 / (f3sq * f2) * (params.ell * c - n * f2 * g + n * params.H * f2 * np.sqrt(h2))
    return np.column_stack([c, s, dth])
