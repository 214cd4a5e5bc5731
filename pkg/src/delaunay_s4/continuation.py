"""Predictor-corrector continuation of the closure curve in (a, H, T) space.

Each step moves along the unit tangent ``grad F1 x grad Theta`` and corrects
back onto the curve inside the plane orthogonal to that tangent.  Tracing
stops when the profile comes within ``endpoint_f_floor`` of the boundary of
the half disk, i.e. when it approaches one of the singular generators.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field

import numpy as np

from .closed_form import singular_generator_M, singular_generator_Mf
from .errors import (
    IllConditioned, LeftDomain, MaxStepsExceeded, NoConvergence, NotBracketed,
    SeedInvalid, SingularEncounter, StallAtDsMin, StepUnderflow, DomainError,
)
from .geometry import extend_periodic, hausdorff, is_embedded
from .ode import IntegratorConfig, ModelParams
from .shooting import (
    NewtonConfig, ShootingPoint, jacobian, newton_correct, refine_fixed_H, shoot,
)

log = logging.getLogger(__name__)

_STEP_FAILURES = (NoConvergence, LeftDomain, SingularEncounter, StepUnderflow,
                  MaxStepsExceeded, IllConditioned, DomainError)

EVENT_KINDS = ("HZero", "HMin", "HMax", "EmbeddedToNonembedded", "SingularLimitM", "SingularLimitMf")


@dataclass(frozen=True)
class ContinuationConfig:
    ds_init: float = 1e-3
    ds_min: float = 1e-6
    ds_max: float = 5e-2
    grow: float = 1.3
    max_points: int = 20000
    endpoint_f_floor: float = 2e-5
    max_turn: float = 0.2  # radians between consecutive tangents

    def __post_init__(self):
        if not 0 < self.ds_min <= self.ds_init <= self.ds_max:
            raise ValueError("need 0 < ds_min <= ds_init <= ds_max")
        if self.grow < 1:
            raise ValueError("grow must be >= 1")


@dataclass(frozen=True)
class BranchPoint:
    Z: ShootingPoint
    s: float
    tangent: tuple
    residual: tuple
    min_f2: float
    min_f3: float
    embedded: bool
    profile_ref: int

    @property
    def min_f(self) -> float:
        return min(self.min_f2, self.min_f3)


@dataclass(frozen=True)
class BranchEvent:
    kind: str
    Z_at: ShootingPoint
    s_at: float
    info: dict = field(default_factory=dict)


@dataclass
class Branch:
    """Ordered branch points; ``s`` runs from the first point."""

    params: ModelParams
    points: list
    termination: dict = field(default_factory=dict)
    integrator: IntegratorConfig | None = None
    newton: NewtonConfig | None = None

    def __len__(self):
        return len(self.points)

    def __getitem__(self, i):
        return self.points[i]

    def array(self) -> np.ndarray:
        """Columns ``(s, a, H, T)``."""
        return np.array([[p.s, p.Z.a, p.Z.H, p.Z.T] for p in self.points])

    def profile(self, i: int):
        """Closed profile of point ``i``, recomputed by a deterministic re-shoot."""
        p = self.points[i]
        rep = shoot(self.params, p.Z, self.integrator)
        return extend_periodic(rep.trajectory, source=p.Z)


def _unit(v):
    v = np.asarray(v, dtype=float)
    return v / np.linalg.norm(v)


def tangent_from_jacobian(J, previous=None) -> np.ndarray:
    t = np.cross(J[0], J[1])
    nrm = np.linalg.norm(t)
    if not nrm > 0:
        raise IllConditioned("gradients are parallel")
    t = t / nrm
    if previous is not None and np.dot(t, previous) < 0:
        t = -t
    return t


def tangent_at(params: ModelParams, Z: ShootingPoint, previous=None,
               config: NewtonConfig | None = None, integrator: IntegratorConfig | None = None) -> np.ndarray:
    """Unit vector orthogonal to both gradients, aligned with ``previous``."""
    J = jacobian(params, Z, config, integrator)
    return tangent_from_jacobian(J, previous)


def _embedded_flag(report, Z) -> bool:
    prof = extend_periodic(report.trajectory, source=Z, tol=1e-6)
    return is_embedded(prof).embedded


def _make_point(Z, info, s, tangent, index):
    rep = info.report
    return BranchPoint(Z, s, tuple(float(x) for x in tangent), (rep.r_f1, rep.r_theta),
                       rep.min_f2, rep.min_f3, _embedded_flag(rep, Z), index)


def correct_seed(params, seed, ncfg=None, icfg=None):
    try:
        return refine_fixed_H(params, seed.H, seed.a, seed.T, ncfg, icfg, full_output=True)
    except _STEP_FAILURES as exc:
        raise SeedInvalid(f"seed {seed} does not correct onto the curve: {exc}") from exc


def trace(params: ModelParams, seed: ShootingPoint, initial_direction: int = -1,
          config: ContinuationConfig | None = None, newton: NewtonConfig | None = None,
          integrator: IntegratorConfig | None = None) -> Branch:
    """Follow the curve from ``seed`` until a singular endpoint is reached.

    ``initial_direction`` is the sign of the H component of the first tangent.
    """
    cfg = config or ContinuationConfig()
    ncfg = newton or NewtonConfig()
    Z, info = correct_seed(params, seed, ncfg, icfg=integrator)
    J = jacobian(params, Z, ncfg, integrator, info.report)
    tan = tangent_from_jacobian(J)
    if np.sign(tan[1]) != np.sign(initial_direction):
        tan = -tan
    points = [_make_point(Z, info, 0.0, tan, 0)]
    termination = {"reason": "max_points"}
    if points[0].min_f < cfg.endpoint_f_floor:
        return Branch(params, points, {"reason": "endpoint", "at_seed": True}, integrator, ncfg)
    ds = cfg.ds_init
    s = 0.0
    while len(points) < cfg.max_points:
        z0 = Z.as_array()
        pred = z0 + ds * tan
        try:
            guess = ShootingPoint.from_array(pred)
            Zn, infon = newton_correct(params, guess, tan, guess, ncfg, integrator, full_output=True)
            tn = tangent_from_jacobian(infon.jacobian, tan)
            turn = math.acos(min(1.0, max(-1.0, float(np.dot(tn, tan)))))
            if turn > cfg.max_turn:
                raise NoConvergence(f"tangent turned by {turn:.3f} rad")
        except _STEP_FAILURES as exc:
            ds *= 0.5
            if ds < cfg.ds_min:
                last = points[-1]
                if last.min_f < 100 * cfg.endpoint_f_floor:
                    termination = {"reason": "endpoint_stall", "detail": str(exc)}
                    break
                raise StallAtDsMin(f"step below ds_min at {Z}: {exc}") from exc
            continue
        s += float(np.linalg.norm(Zn.as_array() - z0))
        Z, tan = Zn, tn
        pt = _make_point(Z, infon, s, tan, len(points))
        points.append(pt)
        log.debug("s=%.5f Z=%s ds=%.2e it=%d min_f=%.2e", s, Z, ds, infon.iterations, pt.min_f)
        if pt.min_f < cfg.endpoint_f_floor:
            termination = {"reason": "endpoint"}
            break
        if infon.iterations <= 3:
            ds = min(cfg.ds_max, ds * cfg.grow)
    return Branch(params, points, termination, integrator, ncfg)


def _classify_end(params, point, integrator) -> str:
    """Which singular generator the profile of ``point`` is closer to."""
    try:
        rep = shoot(params, point.Z, integrator)
        prof = extend_periodic(rep.trajectory, tol=1e-6)
    except Exception:  # endpoint profiles only feed a nearest-generator vote
        return "SingularLimitM" if point.Z.H < -0.35 else "SingularLimitMf"
    dM = hausdorff(prof.points[::4], _generator_polyline("M"))
    dMf = hausdorff(prof.points[::4], _generator_polyline("Mf"))
    return "SingularLimitM" if dM < dMf else "SingularLimitMf"


_GEN_CACHE: dict = {}


def _generator_polyline(which):
    if which not in _GEN_CACHE:
        gen = singular_generator_M(1) if which == "M" else singular_generator_Mf()
        _GEN_CACHE[which] = gen.sample(200 if which == "Mf" else 400)
    return _GEN_CACHE[which]


def trace_branch(params: ModelParams, seed: ShootingPoint, config: ContinuationConfig | None = None,
                 newton: NewtonConfig | None = None, integrator: IntegratorConfig | None = None) -> Branch:
    """Trace both ways from ``seed`` and join into one branch.

    The result is ordered from the end nearer the generator M, and ``s`` is
    the arc length measured from that end.
    """
    up = trace(params, seed, +1, config, newton, integrator)
    down = trace(params, seed, -1, config, newton, integrator)
    first = list(reversed(down.points[1:]))
    pts = first + up.points
    ends = (_classify_end(params, pts[0], integrator), _classify_end(params, pts[-1], integrator))
    term = {"start": down.termination, "end": up.termination}
    if ends[0] == "SingularLimitMf" and ends[1] != "SingularLimitMf":
        pts = pts[::-1]
        ends = ends[::-1]
        term = {"start": up.termination, "end": down.termination}
    term["start_kind"], term["end_kind"] = ends
    return Branch(params, _reindex(pts), term, integrator, newton or NewtonConfig())


def _reindex(pts):
    out = []
    s = 0.0
    prev_t = None
    for i, p in enumerate(pts):
        if i > 0:
            s += p.Z.distance(pts[i - 1].Z)
        t = np.array(p.tangent)
        if prev_t is not None and np.dot(t, prev_t) < 0:
            t = -t
        elif prev_t is None and i + 1 < len(pts):
            chord = pts[i + 1].Z.as_array() - p.Z.as_array()
            if np.dot(t, chord) < 0:
                t = -t
        prev_t = t
        out.append(BranchPoint(p.Z, s, tuple(t), p.residual, p.min_f2, p.min_f3, p.embedded, i))
    return out


# ----------------------------------------------------------------- events


def _solve_on_chord(branch, i, lam):
    """Curve point between points i and i+1, corrected in the plane through the
    interpolated point orthogonal to the chord."""
    p, q = branch[i], branch[i + 1]
    za, zb = p.Z.as_array(), q.Z.as_array()
    guess = ShootingPoint.from_array(za + lam * (zb - za))
    Z, info = newton_correct(branch.params, guess, zb - za, guess, branch.newton, branch.integrator,
                             full_output=True)
    return Z, info


def _refine_embedding_flip(branch, i, tol_s=1e-7):
    lo, hi = 0.0, 1.0
    flag_lo = branch[i].embedded
    chord = branch[i].Z.distance(branch[i + 1].Z)
    Z_mid = branch[i].Z
    while (hi - lo) * chord > tol_s:
        mid = 0.5 * (lo + hi)
        Z_mid, info = _solve_on_chord(branch, i, mid)
        flag = _embedded_flag(info.report, Z_mid)
        if flag == flag_lo:
            lo = mid
        else:
            hi = mid
    Z_hi, _ = _solve_on_chord(branch, i, hi)
    return Z_hi, branch[i].s + hi * chord


def _refine_extremum(branch, i, rounds=3):
    """Quadratic fit of the branch over points i-1, i, i+1, corrected at the
    vertex of H(s); the stencil is rebuilt around the new point each round."""
    s = np.array([branch[k].s for k in (i - 1, i, i + 1)])
    Zs = np.array([branch[k].Z.as_array() for k in (i - 1, i, i + 1)])
    for _ in range(rounds):
        fits = [np.polyfit(s - s[1], Zs[:, k], 2) for k in range(3)]
        c = fits[1]
        s_star = s[1] - c[1] / (2 * c[0]) if c[0] != 0 else s[1]
        s_star = float(np.clip(s_star, s[0], s[2]))
        guess = np.array([np.polyval(f, s_star - s[1]) for f in fits])
        dZ = _unit(np.array([np.polyval(np.polyder(f), s_star - s[1]) for f in fits]))
        g = ShootingPoint.from_array(guess)
        Z = newton_correct(branch.params, g, dZ, g, branch.newton, branch.integrator)
        h = max(1e-4, 0.125 * (s[2] - s[0]))
        new = [Z.as_array()]
        for off in (-h, h):
            gp = ShootingPoint.from_array(Z.as_array() + off * dZ)
            new.append(newton_correct(branch.params, gp, dZ, gp, branch.newton,
                                      branch.integrator).as_array())
        s = np.array([s_star - h, s_star, s_star + h])
        Zs = np.array([new[1], new[0], new[2]])
    return Z, s_star


def detect_events(params: ModelParams, branch: Branch) -> list:
    """Locate H = 0 crossings, H extrema, embeddedness changes and the two
    singular endpoints along ``branch``."""
    events = []
    if len(branch) < 3:
        return events
    arr = branch.array()
    H = arr[:, 2]
    for i in range(len(branch) - 1):
        if H[i] == 0.0 or H[i] * H[i + 1] < 0:
            lam = H[i] / (H[i] - H[i + 1]) if H[i] != H[i + 1] else 0.0
            z = (1 - lam) * arr[i, 1:] + lam * arr[i + 1, 1:]
            try:
                Z, info = refine_fixed_H(params, 0.0, z[0], z[2], branch.newton, branch.integrator,
                                         full_output=True)
            except _STEP_FAILURES:
                Z, info = _solve_on_chord(branch, i, lam)
            events.append(BranchEvent("HZero", Z, float(branch[i].s + lam * (branch[i + 1].s - branch[i].s)),
                                      {"embedded": _embedded_flag(info.report, Z)}))
    dH = np.diff(H)
    for i in range(1, len(branch) - 1):
        if dH[i - 1] < 0 and dH[i] >= 0:
            kind = "HMin"
        elif dH[i - 1] > 0 and dH[i] <= 0:
            kind = "HMax"
        else:
            continue
        try:
            Z, s_star = _refine_extremum(branch, i)
        except _STEP_FAILURES:
            Z, s_star = branch[i].Z, branch[i].s
        events.append(BranchEvent(kind, Z, float(s_star)))
    for i in range(len(branch) - 1):
        if branch[i].embedded != branch[i + 1].embedded:
            Z, s_at = _refine_embedding_flip(branch, i)
            kind = "EmbeddedToNonembedded" if branch[i].embedded else "NonembeddedToEmbedded"
            events.append(BranchEvent(kind, Z, float(s_at)))
    term = branch.termination
    if "start_kind" in term:
        events.append(BranchEvent(term["start_kind"], branch[0].Z, branch[0].s,
                                  {"min_f2": branch[0].min_f2, "min_f3": branch[0].min_f3}))
        events.append(BranchEvent(term["end_kind"], branch[-1].Z, branch[-1].s,
                                  {"min_f2": branch[-1].min_f2, "min_f3": branch[-1].min_f3}))
    events.sort(key=lambda e: e.s_at)
    return events


def locate_by_H(branch: Branch, H_target: float, occurrence: int = 1,
                snap_tol: float = 1e-4) -> ShootingPoint:
    """Curve point with ``H = H_target`` on the ``occurrence``-th match,
    counted from the start of the branch.

    A match is a segment whose end values bracket ``H_target``, or an interior
    H extremum lying within ``snap_tol`` of it that no adjacent segment
    brackets; for the latter the refined extremum is returned.
    """
    H = branch.array()[:, 2]
    hits = []
    for i in range(len(H) - 1):
        if (H[i] - H_target) * (H[i + 1] - H_target) <= 0 and H[i] != H[i + 1]:
            hits.append(("cross", i))
        elif 0 < i and (H[i] - H[i - 1]) * (H[i + 1] - H[i]) < 0 \
                and (H[i - 1] - H_target) * (H[i] - H_target) > 0 \
                and abs(H[i] - H_target) < snap_tol:
            hits.append(("extremum", i))
    if occurrence < 1 or occurrence > len(hits):
        raise NotBracketed(f"H={H_target} has {len(hits)} match(es) on the branch")
    kind, i = hits[occurrence - 1]
    if kind == "extremum":
        try:
            return _refine_extremum(branch, i)[0]
        except _STEP_FAILURES:
            return branch[i].Z
    lam = (H_target - H[i]) / (H[i + 1] - H[i])
    za, zb = branch[i].Z.as_array(), branch[i + 1].Z.as_array()
    z = za + lam * (zb - za)
    try:
        return refine_fixed_H(branch.params, H_target, z[0], z[2], branch.newton, branch.integrator)
    except _STEP_FAILURES:
        # next to an H extremum the fixed-H system is nearly singular; solve on the chord
        guess = ShootingPoint.from_array(z)
        nrm = np.array([0.0, 1.0, 0.0])
        return newton_correct(branch.params, guess, nrm, guess, branch.newton, branch.integrator)
