"""Acceptance suite: one test per numbered criterion, each printing a PASS/FAIL line.

Run with ``pytest tests/test_acceptance.py``; the lines are repeated in the
terminal summary under "acceptance criteria".
"""

import math
import time

import numpy as np
import pytest

from conftest import ACCEPTANCE_LINES
from delaunay_s4 import cli
from delaunay_s4.cli import PRESETS, OCCURRENCE, Z0, ZF
from delaunay_s4.closed_form import (
    ELLIPSE_LENGTH, KINDS, ExplicitSolutionKind, elliptic_E, elliptic_E_agm, generator_M_breakpoints,
    pwcmc_consistency, pwcmc_values, residual_on_explicit, singular_generator_M, singular_generator_Mf,
)
from delaunay_s4.errors import CMCError
from delaunay_s4.geometry import equal_H_radius, extend_periodic, hausdorff, is_embedded, sample_immersion
from delaunay_s4.ode import IntegratorConfig, ModelParams, ProfileState, integrate, rhs_array
from delaunay_s4.continuation import locate_by_H
from delaunay_s4.shooting import ShootingPoint, refine_fixed_H, shoot

NAMES = list(PRESETS)
# Hausdorff distance of the Z10 profile to the M_f generator, recorded from this implementation
Z10_MF_HAUSDORFF = 3.894e-3


def record(number, title, checks):
    """``checks`` is a list of ``(ok, detail)``; prints and stores one line."""
    ok = all(c[0] for c in checks)
    failed = [d for good, d in checks if not good]
    detail = "; ".join(failed) if failed else "; ".join(d for _, d in checks[:3])
    line = f"criterion {number:>2} [{'PASS' if ok else 'FAIL'}] {title}: {detail}"
    print(line)
    ACCEPTANCE_LINES.append(line)
    return ok


def preset_solution(params, name):
    """Fixed-H refinement of a preset, or the preset itself when that fails."""
    a, H, T = PRESETS[name]
    try:
        return refine_fixed_H(params, H, a, T)
    except CMCError:
        return ShootingPoint(a, H, T)


def test_criterion_01_closed_form_constants():
    v = pwcmc_values(1)
    want = (-0.70710678, 0.57735027, 0.81649658)
    exact = (-math.sqrt(4 / 8), math.sqrt(4 / 12), math.sqrt(8 / 12))
    r2 = equal_H_radius() ** 2
    checks = [
        (all(abs(g - e) < 1e-12 for g, e in zip((v.H, v.r1, v.r2), exact)),
         f"pwcmc(1) = ({v.H:.8f}, {v.r1:.8f}, {v.r2:.8f})"),
        (all(abs(g - w) < 5e-9 for g, w in zip((v.H, v.r1, v.r2), want)), "printed digits match"),
        (abs(r2 - 2 / 3) < 1e-12, f"r^2 = {r2:.15f}"),
    ]
    assert record(1, "closed-form constants", checks)


def test_criterion_02_elliptic_length():
    L = 2 * math.sqrt(2) * elliptic_E(-1.0)
    diffs = [abs(elliptic_E(m) - elliptic_E_agm(m)) for m in np.linspace(-10, 0.99, 41)]
    checks = [
        (abs(L - 5.402575524) < 1e-8, f"2 sqrt2 E(-1) = {L:.10f}"),
        (abs(ELLIPSE_LENGTH - L) < 1e-15, "generator period uses it"),
        (max(diffs) < 1e-12, f"max |quad - AGM| = {max(diffs):.1e}"),
    ]
    assert record(2, "elliptic length", checks)


def test_criterion_03_preset_solutions(params):
    checks = []
    worst = []
    shoot(params, ShootingPoint(*PRESETS["Z6"]))  # compile outside the timed loop
    t0 = time.perf_counter()
    for name in NAMES:
        rep = shoot(params, ShootingPoint(*PRESETS[name]))
        res = max(abs(rep.r_f1), abs(rep.r_theta))
        worst.append(res)
        checks.append((res < 1e-5, f"{name} re-shoot residual {res:.1e}"))
    per_shoot = (time.perf_counter() - t0) / len(NAMES)
    checks.append((per_shoot < 0.1, f"{per_shoot * 1e3:.2f} ms per shoot"))
    for name in NAMES:
        a, H, T = PRESETS[name]
        for da, dT in ((1, 1), (1, -1), (-1, 1), (-1, -1)):
            try:
                Z = refine_fixed_H(params, H, a + 1e-2 * da, T + 1e-2 * dT)
                err = max(abs(Z.a - a), abs(Z.T - T))
                checks.append((err < 5e-4, f"{name} refine from ({da:+d},{dT:+d}) off by {err:.1e}"))
            except CMCError as exc:
                checks.append((False, f"{name} refine from ({da:+d},{dT:+d}) failed: "
                                      f"{type(exc).__name__}"))
    checks.insert(0, (True, f"max re-shoot residual {max(worst):.1e}"))
    assert record(3, "preset solutions", checks)


def test_criterion_04_branch_reproduction(branch, events):
    checks = []
    for name in NAMES:
        a, H, T = PRESETS[name]
        try:
            Z = locate_by_H(branch, H, OCCURRENCE.get(name, 1))
            da, dT = abs(Z.a - a), abs(Z.T - T)
            checks.append((da < 2e-3 and dT < 2e-3, f"{name} |da|={da:.1e} |dT|={dT:.1e}"))
        except CMCError as exc:
            checks.append((False, f"{name} not located: {exc}"))
    Hs = branch.array()[:, 2]
    hmin = min([e.Z_at.H for e in events if e.kind == "HMin"] + [Hs.min()])
    hmax = max([e.Z_at.H for e in events if e.kind == "HMax"] + [Hs.max()])
    checks.append((abs(hmin + 0.947962) < 2e-3, f"min H {hmin:.6f}"))
    checks.append((abs(hmax - 0.0565645) < 2e-3, f"max H {hmax:.6f}"))
    d0 = float(np.linalg.norm(branch[0].Z.as_array() - np.array(Z0)))
    df = float(np.linalg.norm(branch[-1].Z.as_array() - np.array(ZF)))
    checks.append((d0 < 5e-3, f"start {d0:.1e} from Z0"))
    checks.append((df < 5e-3, f"end {df:.1e} from Zf"))
    assert record(4, "branch reproduction", checks)


def test_criterion_05_minimal_member(branch, events):
    zeros = [e for e in events if e.kind == "HZero"]
    checks = [(len(zeros) == 1, f"{len(zeros)} HZero event(s) at s = "
                                + ", ".join(f"{e.s_at:.4f}" for e in zeros))]
    if zeros:
        Z = zeros[0].Z_at
        err = max(abs(Z.a - 0.73801), abs(Z.T - 2.51519))
        checks.append((err < 5e-4, f"first HZero at (a, T) = ({Z.a:.6f}, {Z.T:.6f})"))
        emb = zeros[0].info.get("embedded")
        checks.append((emb is False, f"embedded={emb}"))
    assert record(5, "minimal member", checks)


def test_criterion_06_embeddedness_split(params, branch, events):
    checks = []
    for k, name in enumerate(NAMES):
        Z = preset_solution(params, name)
        prof = extend_periodic(shoot(params, Z).trajectory, tol=1e-4)
        rep = is_embedded(prof, with_distance=(name == "Z5"))
        expect = k < 4
        extra = f" (min self distance {rep.min_self_distance:.1e})" if name == "Z5" else ""
        checks.append((rep.embedded == expect, f"{name} embedded={rep.embedded}{extra}"))
    flips = [e for e in events if e.kind in ("EmbeddedToNonembedded", "NonembeddedToEmbedded")]
    checks.append((len(flips) == 1, f"{len(flips)} transition event(s)"))
    for e in flips:
        checks.append((-0.258674 < e.Z_at.H < -0.0899734, f"transition at H = {e.Z_at.H:.7f}"))
    assert record(6, "embeddedness split", checks)


def test_criterion_07_obstruction():
    checks = []
    for ell in range(1, 5):
        for m in range(1, 5):
            feas = pwcmc_consistency(ell, m)["feasible"]
            checks.append((feas == (ell == m), f"({ell},{m}) feasible={feas}"))
    assert record(7, "ell != m obstruction", checks)


def test_criterion_08_property_suites(params):
    checks = []
    z = refine_fixed_H(params, 0.0, 0.73801, 2.51519)
    p = params.with_H(z.H)
    init = ProfileState(0.0, 0.0, z.a, 0.0)
    ref = integrate(p, init, z.T, IntegratorConfig(abs_tol=1e-14, rel_tol=1e-14)).final.as_array()
    errs = [np.abs(integrate(p, init, z.T, IntegratorConfig(max_step=z.T / N, fixed_step=True))
                   .final.as_array() - ref).max() for N in (1000, 2000, 4000)]
    order = min(math.log2(errs[k] / errs[k + 1]) for k in range(2))
    checks.append((order >= 4, f"observed order {order:.2f}"))

    traj = integrate(p, init, z.T)
    s = np.linspace(0.05, z.T - 0.05, 400)
    y = traj(z.T - s)
    dy = rhs_array(p, y)
    refl = np.column_stack([-y[:, 0], y[:, 1], 2 * math.pi - y[:, 2]])
    res = np.abs(rhs_array(p, refl) - np.column_stack([dy[:, 0], -dy[:, 1], dy[:, 2]])).max()
    checks.append((res < 1e-8, f"reflection residual {res:.1e}"))

    gap = 0.0
    for name in ("Z1", "Z4", "Z6", "Z9"):
        Zn = preset_solution(params, name)
        traj = shoot(params, Zn).trajectory
        prof = extend_periodic(traj)
        # jump of the reflected continuation at t = T
        gap = max(gap, 2 * abs(traj.final.f1), 2 * abs(traj.final.theta - math.pi), prof.closure_error)
    checks.append((gap < 1e-8, f"closure gap {gap:.1e}"))

    rng = np.random.default_rng(1)
    r = np.sqrt(rng.uniform(0, 1, 100_000))
    phi, th = rng.uniform(0, math.pi, 100_000), rng.uniform(-10, 10, 100_000)
    f1, f2 = r * np.cos(phi), r * np.sin(phi)
    g = f2 * np.cos(th) - f1 * np.sin(th)
    checks.append((bool(np.all(np.abs(g) <= np.hypot(f1, f2) + 1e-15)), "|g| <= |(f1, f2)| on 1e5 states"))

    worst = 0.0
    for ell in range(1, 5):
        v = pwcmc_values(ell)
        radii = {"HorizontalF2": v.r2, "VerticalF1Plus": v.r1, "VerticalF1Minus": v.r1,
                 "CircleF3": v.r2}
        for tag in KINDS:
            worst = max(worst, residual_on_explicit(ModelParams(ell, ell, v.H),
                                                    ExplicitSolutionKind(tag, radii[tag])))
    checks.append((worst < 1e-12, f"explicit residual {worst:.1e}"))

    X = sample_immersion(prof.points[::20], 16, 16)
    unit = np.abs(np.linalg.norm(X, axis=1) - 1).max()
    checks.append((unit < 1e-10, f"immersion |x| - 1 = {unit:.1e}"))

    v = pwcmc_values(1)
    gen = singular_generator_M(1)
    lengths = [math.pi * v.r1 / 2, v.r2, 2 * v.r1, v.r2, math.pi * v.r1 / 2]
    bp = np.cumsum(lengths)
    expect = generator_M_breakpoints(v.n)
    dev = max(np.abs(bp - np.array(expect)).max(), np.abs(bp[:4] - np.array(gen.breakpoints)).max(),
              np.abs(np.diff((0.0,) + singular_generator_Mf().breakpoints) - ELLIPSE_LENGTH / 4).max())
    checks.append((dev < 1e-12, f"generator breakpoints off by {dev:.1e}"))
    assert record(8, "property suites", checks)


def test_criterion_09_convergence_to_generators(params):
    GM = singular_generator_M(1).sample(400)
    GF = singular_generator_Mf().sample(200)

    def profile(name):
        return extend_periodic(shoot(params, preset_solution(params, name)).trajectory, tol=1e-4)

    d1, d2 = hausdorff(profile("Z1"), GM), hausdorff(profile("Z2"), GM)
    d10 = hausdorff(profile("Z10"), GF)
    checks = [
        (d1 < d2, f"Z1 to M {d1:.2e} < Z2 to M {d2:.2e}"),
        (d10 < 0.01, f"Z10 to Mf {d10:.2e}"),
        (abs(d10 - Z10_MF_HAUSDORFF) < 0.1 * Z10_MF_HAUSDORFF, "matches recorded value"),
    ]
    assert record(9, "convergence to generators", checks)


def test_criterion_10_determinism(tmp_path):
    outs = []
    t0 = time.perf_counter()
    for k in range(2):
        d = tmp_path / f"run{k}"
        code = cli.main(["trace", "--preset", "Z1", "--out", str(d), "--format", "json"])
        assert code == 0
        outs.append(((d / "branch.jsonl").read_bytes(), (d / "events.json").read_bytes()))
    per_trace = (time.perf_counter() - t0) / 2
    checks = [
        (outs[0][0] == outs[1][0], f"branch.jsonl identical ({len(outs[0][0])} bytes)"),
        (outs[0][1] == outs[1][1], "events.json identical"),
        (per_trace < 60, f"{per_trace:.1f} s per trace"),
    ]
    assert record(10, "determinism", checks)


if __name__ == "__main__":
    raise SystemExit(pytest.main([__file__, "-q"]))
