import math

import numpy as np
import pytest

from delaunay_s4.cli import PRESETS
from delaunay_s4.errors import DomainError, NoConvergence
from delaunay_s4.ode import ModelParams
from delaunay_s4.shooting import (
    NewtonConfig, ShootingPoint, jacobian, newton_correct, profile_minima, refine_fixed_H, shoot,
)


def test_shooting_point_validation_and_roundtrip():
    z = ShootingPoint(0.5, -0.3, 2.0)
    assert ShootingPoint.from_array(z.as_array()) == z
    assert z.distance(ShootingPoint(0.5, -0.3, 2.5)) == pytest.approx(0.5)
    for bad in ((0.0, 0.0, 1.0), (1.0, 0.0, 1.0), (2.0, 0.0, 1.0), (0.5, 0.0, 0.0)):
        with pytest.raises(DomainError):
            ShootingPoint(*bad)


def test_newton_config_validation():
    with pytest.raises(ValueError):
        NewtonConfig(res_tol=0.0)
    with pytest.raises(ValueError):
        NewtonConfig(max_iter=0)
    with pytest.raises(ValueError):
        NewtonConfig(damping=1.5)


def test_shoot_uses_the_point_H(params):
    z = ShootingPoint(*PRESETS["Z6"])
    r0 = shoot(params.with_H(0.9), z)
    r1 = shoot(params, z)
    assert r0.r_f1 == r1.r_f1 and r0.r_theta == r1.r_theta
    assert r1.norm < 1e-5
    assert r1.trajectory.t_end == z.T
    assert r1.residual.shape == (2,)


def test_profile_minima_on_smooth_member(params):
    rep = shoot(params, ShootingPoint(*PRESETS["Z6"]))
    t = np.linspace(0, rep.trajectory.t_end, 20001)
    y = rep.trajectory(t)
    m2, m3 = profile_minima(rep.trajectory)
    assert m2 == pytest.approx(y[:, 1].min(), rel=1e-3)
    assert m3 == pytest.approx(np.sqrt(1 - (y[:, 0] ** 2 + y[:, 1] ** 2)).min(), rel=1e-3)


def test_jacobian_against_independent_differences(params):
    z = refine_fixed_H(params, 0.0, 0.73801, 2.51519)
    J = jacobian(params, z)
    h = 1e-5
    for j in range(3):
        e = np.zeros(3)
        e[j] = h
        rp = shoot(params, ShootingPoint.from_array(z.as_array() + e)).residual
        rm = shoot(params, ShootingPoint.from_array(z.as_array() - e)).residual
        col = (rp - rm) / (2 * h)
        assert np.allclose(J[:, j], col, rtol=1e-4, atol=1e-5)


def test_jacobian_partial_columns(params):
    J = jacobian(params, ShootingPoint(*PRESETS["Z6"]), columns=(0, 2))
    assert np.all(np.isnan(J[:, 1])) and np.all(np.isfinite(J[:, [0, 2]]))


def test_newton_correct_lands_on_curve_and_plane(params):
    guess = ShootingPoint(0.74, 0.01, 2.52)
    normal = np.array([0.3, 1.0, -0.2])
    Z, info = newton_correct(params, guess, normal, guess, full_output=True)
    assert info.report.norm < 1e-10
    assert abs(normal @ (Z.as_array() - guess.as_array())) / np.linalg.norm(normal) < 1e-10
    with pytest.raises(ValueError):
        newton_correct(params, guess, [0.0, 0.0, 0.0], guess)


@pytest.mark.parametrize("name", ["Z1", "Z4", "Z6", "Z7"])
def test_refine_fixed_H_keeps_H(params, name):
    a, H, T = PRESETS[name]
    Z, info = refine_fixed_H(params, H, a, T, full_output=True)
    assert Z.H == H
    assert info.report.norm < 1e-10
    assert abs(Z.a - a) < 1e-4 and abs(Z.T - T) < 1e-4


def test_refine_falls_back_to_bracketing(params):
    # from this seed the Newton step leaves the domain; the scan still finds Z1
    a, H, T = PRESETS["Z1"]
    Z = refine_fixed_H(params, H, a + 0.01, T + 0.01)
    assert abs(Z.a - a) < 1e-5 and abs(Z.T - T) < 1e-4
    assert shoot(params, Z).norm < 1e-10


def test_refine_reports_missing_solution(params):
    # above the largest mean curvature on the family there is nothing to find
    with pytest.raises(NoConvergence):
        refine_fixed_H(params, 0.07, 0.7439, 2.5915)


def test_different_dimensions_shoot(params):
    rep = shoot(ModelParams(2, 3), ShootingPoint(0.6, -0.5, 2.0))
    assert math.isfinite(rep.r_f1) and math.isfinite(rep.r_theta)
