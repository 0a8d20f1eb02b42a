import math

import numpy as np
import pytest

from netsteer import diffcore as dc
from netsteer.diffcore import (
    ContractViolation,
    DivergenceError,
    OdeSolverConfig,
    Tensor,
    check_gradient,
    integrate_ode,
)

ROTATION = np.array([[0.0, 1.0], [-1.0, 0.0]])


def test_exponential_decay_closed_form():
    cfg = OdeSolverConfig(method="dopri5", rel_tol=1e-6, abs_tol=1e-6)
    out = integrate_ode(lambda t, h: -h, np.array([1.0]), 0.0, 1.0, cfg)
    assert out[0] == pytest.approx(math.exp(-1.0), abs=1e-6)


def test_rotation_closed_form():
    cfg = OdeSolverConfig(method="dopri5", rel_tol=1e-6, abs_tol=1e-6)
    out = integrate_ode(lambda t, h: h @ ROTATION.T, np.array([1.0, 0.0]),
                        0.0, math.pi / 2, cfg)
    assert np.allclose(out, [0.0, -1.0], atol=1e-6)


def test_rotation_norm_preserved_per_revolution():
    cfg = OdeSolverConfig(method="dopri5", rel_tol=1e-6, abs_tol=1e-6)
    out = integrate_ode(lambda t, h: h @ ROTATION.T, np.array([1.0, 0.0]),
                        0.0, 2 * math.pi, cfg)
    assert abs(np.linalg.norm(out) - 1.0) <= 1e-6


def test_adaptive_agrees_with_fixed_step():
    rng = np.random.default_rng(5)
    A = -np.eye(3) * rng.uniform(0.3, 1.0, size=3) + 0.2 * rng.normal(size=(3, 3))
    # keep it stable
    A = A - np.eye(3) * max(0.0, np.max(np.real(np.linalg.eigvals(A))) + 0.2)
    h0 = rng.normal(size=3)
    drift = lambda t, h: h @ A.T
    ada = integrate_ode(drift, h0, 0.0, 2.0,
                        OdeSolverConfig(method="dopri5", rel_tol=1e-6, abs_tol=1e-8))
    fix = integrate_ode(drift, h0, 0.0, 2.0,
                        OdeSolverConfig(method="rk4", fixed_dt=1e-3))
    assert np.max(np.abs(ada - fix)) <= 1e-4


def test_zero_span_returns_initial_state():
    h0 = np.array([1.0, 2.0])
    out = integrate_ode(lambda t, h: h, h0, 1.0, 1.0)
    assert out is h0


def test_reversed_interval_rejected():
    with pytest.raises(ContractViolation):
        integrate_ode(lambda t, h: h, np.ones(1), 1.0, 0.0)


def test_max_steps_divergence():
    cfg = OdeSolverConfig(method="dopri5", rel_tol=1e-10, abs_tol=1e-12,
                          max_steps=3)
    with pytest.raises(DivergenceError):
        integrate_ode(lambda t, h: 50.0 * h, np.ones(2), 0.0, 5.0, cfg)


def test_integration_deterministic():
    cfg = OdeSolverConfig(method="dopri5", rel_tol=1e-5, abs_tol=1e-7)
    drift = lambda t, h: np.sin(h) - 0.1 * h
    a = integrate_ode(drift, np.array([0.3, 1.2]), 0.0, 3.0, cfg)
    b = integrate_ode(drift, np.array([0.3, 1.2]), 0.0, 3.0, cfg)
    assert np.array_equal(a, b)


def test_gradient_flows_through_solver():
    # d/da of h(t1) for dh/dt = a*h is t1 * e^{a t1} * h0
    a = Tensor(0.7)
    cfg = OdeSolverConfig(method="rk4", fixed_dt=0.01)

    def obj(a):
        out = integrate_ode(lambda t, h: a * h, Tensor(np.array([1.0])),
                            0.0, 1.0, cfg)
        return dc.reduce_sum(out)

    g, = dc.grad(obj(a), [a])
    assert g.value == pytest.approx(math.exp(0.7), rel=1e-6)
    assert check_gradient(obj, [a], fd_step=1e-6) <= 1e-6


def test_gradient_through_adaptive_solver():
    a = Tensor(-0.4)
    cfg = OdeSolverConfig(method="dopri5", rel_tol=1e-8, abs_tol=1e-10)

    def obj(a):
        out = integrate_ode(lambda t, h: a * h, Tensor(np.array([2.0])),
                            0.0, 1.0, cfg)
        return dc.reduce_sum(out * out)

    # analytic: d/da (2 e^a)^2 = 8 e^{2a}
    g, = dc.grad(obj(a), [a])
    assert g.value == pytest.approx(8.0 * math.exp(-0.8), rel=1e-6)


def test_rk4_requires_fixed_dt():
    with pytest.raises(ContractViolation):
        OdeSolverConfig(method="rk4")
