import math

import numpy as np
import pytest
from scipy.linalg import expm

from netsteer import diffcore as dc
from netsteer.diffcore import OdeSolverConfig, Tensor, check_gradient
from netsteer.njode import (
    LatentState,
    emission_loglik,
    flow,
    init_model,
    intensity,
    jump_update,
    load_checkpoint,
    mean_field_rollout,
    sample_rollout,
    save_checkpoint,
    sequence_loglik,
    state_from_history,
    validate_checkpoint,
)
from netsteer.njode.fit import fit_mle, homogeneous_poisson_nll
from netsteer.pointproc import SpikeCountMatrix

from conftest import RK4, randomize, small_model, zero_intensity_head


def test_fresh_model_flow_is_identity():
    model = small_model(seed=3)
    h = np.random.default_rng(0).normal(size=(3, 3))
    out = flow(model, LatentState(h=h, tau=0.0), 2.0)
    assert np.allclose(out.h, h, atol=1e-12)
    assert out.tau == 2.0


def test_same_seed_same_parameters():
    a = small_model(seed=11)
    b = small_model(seed=11)
    for name in a.params:
        assert np.array_equal(a.params[name].value, b.params[name].value)


def test_default_latent_dim_is_eight():
    model = init_model(2, seed=0)
    assert model.latent_dim == 8


def test_flow_matches_linear_closed_form():
    model = small_model(solver=OdeSolverConfig(method="dopri5",
                                               rel_tol=1e-8, abs_tol=1e-10))
    A = np.array([[-0.3, 0.2, 0.0], [0.0, -0.5, 0.1], [0.0, 0.0, -0.2]])
    h0 = np.random.default_rng(1).normal(size=(3, 3))
    out = flow(model, LatentState(h=h0, tau=0.0), 1.5,
               drift_fn=lambda t, h: h @ A.T)
    expected = h0 @ expm(1.5 * A).T
    assert np.max(np.abs(out.h - expected)) <= 1e-6


def test_flow_gradient_matches_finite_differences():
    model = small_model(seed=5)
    h0 = np.random.default_rng(2).normal(size=(3, 3))
    names = ["f_w0", "f_b0", "f_nb0", "f_w_out"]

    def obj(*tensors):
        params = dict(model.params)
        params.update(dict(zip(names, tensors)))
        out = flow(model, LatentState(h=Tensor(h0), tau=0.0), 1.0, params=params)
        return dc.reduce_sum(dc.mul(out.h, out.h))

    err = check_gradient(obj, [model.params[n] for n in names], fd_step=1e-5)
    assert err <= 1e-4


def test_jump_zero_influence_gives_zero_state():
    model = small_model()
    h = np.ones((3, 3))
    out = jump_update(model, LatentState(h=h, tau=1.0), np.ones(3),
                      W_eff=np.zeros((3, 3)))
    assert np.array_equal(out.h, np.zeros((3, 3)))


def test_jump_identity_with_passthrough_hook():
    model = small_model()
    h = np.random.default_rng(3).normal(size=(3, 3))
    out = jump_update(model, LatentState(h=h, tau=1.0), np.zeros(3),
                      W_eff=np.eye(3), phi_fn=lambda h, x: h)
    assert np.array_equal(out.h, h)


def test_jump_single_edge_sensitivity():
    model = small_model(seed=7)
    rng = np.random.default_rng(4)
    h = rng.normal(size=(3, 3))
    x = rng.uniform(1.0, 3.0, size=3)
    W = np.zeros((3, 3))
    W[1, 2] = 0.8  # only edge 1 -> 2
    base = jump_update(model, LatentState(h=h, tau=0.0), x, W_eff=W).h
    # perturbing any node but 1 leaves h_2 untouched
    for j in (0, 2):
        h2 = h.copy()
        h2[j] += 0.37
        x2 = x.copy()
        x2[j] += 1.0
        out = jump_update(model, LatentState(h=h2, tau=0.0), x2, W_eff=W).h
        assert np.array_equal(out[2], base[2])
    # perturbing node 1 moves h_2
    h3 = h.copy()
    h3[1] += 0.37
    out = jump_update(model, LatentState(h=h3, tau=0.0), x, W_eff=W).h
    assert not np.array_equal(out[2], base[2])


def test_cutting_all_foreign_in_edges_blocks_sensitivity():
    model = small_model(seed=9)
    rng = np.random.default_rng(5)
    h = rng.normal(size=(3, 3))
    x = rng.uniform(0.0, 2.0, size=3)
    W = rng.uniform(0.1, 0.4, size=(3, 3))
    a = np.zeros((3, 3))
    a[:, 1] = 1.0  # cut every in-edge of node 1 ...
    a[1, 1] = 0.0  # ... except the self loop (no self-intervention)
    W_eff = W * (1.0 - a)
    base = jump_update(model, LatentState(h=h, tau=0.0), x, W_eff=W_eff).h
    for j in (0, 2):
        x2 = x.copy()
        x2[j] += 5.0
        h2 = h.copy()
        h2[j] -= 0.9
        out = jump_update(model, LatentState(h=h2, tau=0.0), x2, W_eff=W_eff).h
        assert np.array_equal(out[1], base[1])


def test_intensity_trivial_cases():
    model = zero_intensity_head(small_model())
    lam = intensity(model, LatentState(h=np.zeros((3, 3)), tau=0.0))
    assert np.allclose(lam, 1.0)
    model2 = zero_intensity_head(small_model(), baseline=math.log(2.0))
    lam2 = intensity(model2, LatentState(h=np.ones((3, 3)), tau=0.0))
    assert np.allclose(lam2, 2.0)


def test_intensity_gradient_wrt_baseline_equals_intensity():
    model = small_model(seed=13)
    h = np.random.default_rng(6).normal(size=(3, 3))

    def obj(b):
        params = dict(model.params)
        params["i_b"] = b
        lam = intensity(model, LatentState(h=Tensor(h), tau=0.0), params=params)
        return dc.reduce_sum(lam)

    lam_val = dc.val(intensity(model, LatentState(h=h, tau=0.0)))
    g, = dc.grad(obj(model.params["i_b"]), [model.params["i_b"]])
    assert np.allclose(g.value, lam_val, rtol=1e-12)


def test_emission_loglik_values():
    assert float(dc.val(emission_loglik(np.array([[1.0]]), np.array([[0.0]])))) \
        == pytest.approx(-1.0)
    expected = -2.0 + 3.0 * math.log(2.0) - math.log(6.0)
    got = float(dc.val(emission_loglik(np.array([[2.0]]), np.array([[3.0]]))))
    assert got == pytest.approx(expected, abs=1e-12)


def test_sequence_loglik_decomposes_into_per_bin_terms():
    model = small_model(seed=21)
    rng = np.random.default_rng(7)
    X = SpikeCountMatrix(counts=rng.poisson(1.5, size=(3, 6)), bin_width=1.0)
    total = float(sequence_loglik(model, X).value)
    # manual roll
    state = LatentState(h=np.zeros((3, 3)), tau=0.0)
    acc = 0.0
    params = {k: v.value for k, v in model.params.items()}
    for i in range(6):
        state = flow(model, state, (i + 1) * 1.0, params=params)
        lam = intensity(model, state, params=params)
        x = X.counts[:, i].astype(float)[:, None]
        acc += float(dc.val(emission_loglik(lam, x)))
        state = jump_update(model, state, x, params=params)
    assert total == pytest.approx(acc, rel=1e-10)


def test_sequence_loglik_deterministic():
    model = small_model(seed=2)
    X = SpikeCountMatrix(counts=np.random.default_rng(8).poisson(1.0, (3, 5)),
                         bin_width=1.0)
    a = float(sequence_loglik(model, X).value)
    b = float(sequence_loglik(model, X).value)
    assert a == b


def test_sequence_loglik_gradient_matches_fd():
    model = randomize(small_model(seed=17, n=2, d=2, hidden=(3,), g_hidden=2), 170)
    X = SpikeCountMatrix(counts=np.random.default_rng(9).poisson(1.0, (2, 4)),
                         bin_width=1.0)
    names = ["W", "i_b", "j_uz", "f_w_out"]

    def obj(*tensors):
        params = dict(model.params)
        params.update(dict(zip(names, tensors)))
        return sequence_loglik(model, X, params=params)

    err = check_gradient(obj, [model.params[n] for n in names], fd_step=1e-5)
    assert err <= 1e-4


def test_rollout_zero_steps():
    model = small_model()
    state = LatentState(h=np.zeros((3, 3)), tau=0.0)
    trace = sample_rollout(model, state, 0, seed=0)
    assert trace.n_steps == 0
    assert len(trace.latents) == 1
    mf = mean_field_rollout(model, state, 0)
    assert mf.n_steps == 0


def test_decoupled_homogeneous_rollout_both_modes():
    mu = 1.7
    model = zero_intensity_head(small_model(), baseline=math.log(mu))
    state = LatentState(h=np.zeros((3, 3)), tau=0.0)
    W0 = np.zeros((3, 3))
    st = sample_rollout(model, state, 5, W_eff=W0, seed=4)
    mf = mean_field_rollout(model, state, 5, W_eff=W0)
    assert np.allclose(st.intensity_matrix(), mu)
    assert np.allclose(mf.intensity_matrix(), mu)
    assert st.counts.shape == (5, 3)
    assert mf.counts is None


def test_mean_field_rollout_seed_free_and_deterministic():
    model = small_model(seed=23)
    state = LatentState(h=np.random.default_rng(10).normal(size=(3, 3)), tau=0.0)
    a = mean_field_rollout(model, state, 4).intensity_matrix()
    b = mean_field_rollout(model, state, 4).intensity_matrix()
    assert np.array_equal(a, b)


def test_mean_field_cost_gradient_matches_fd():
    model = small_model(seed=29, n=2, d=2, hidden=(3,), g_hidden=2)
    state = LatentState(h=np.zeros((2, 2)), tau=0.0)
    W_eff = Tensor(np.full((2, 2), 0.2))

    def obj(w):
        trace = mean_field_rollout(model, state, 3, W_eff=w)
        total = trace.intensities[0]
        for lam in trace.intensities[1:]:
            total = dc.add(total, lam)
        return dc.reduce_sum(total)

    assert check_gradient(obj, [W_eff], fd_step=1e-5) <= 1e-4


def test_sample_rollout_deterministic_given_seed():
    model = small_model(seed=31)
    state = LatentState(h=np.zeros((3, 3)), tau=0.0)
    a = sample_rollout(model, state, 6, seed=12)
    b = sample_rollout(model, state, 6, seed=12)
    assert np.array_equal(a.counts, b.counts)
    c = sample_rollout(model, state, 6, seed=13)
    assert not np.array_equal(a.counts, c.counts)


def test_checkpoint_round_trip_bit_exact(tmp_path):
    model = small_model(seed=37)
    path = tmp_path / "model.json"
    save_checkpoint(model, path)
    clone = load_checkpoint(path)
    for name in model.params:
        assert np.array_equal(clone.params[name].value, model.params[name].value)
    assert clone.solver == model.solver
    assert validate_checkpoint(model)


def test_fit_constant_rate_poisson():
    rng = np.random.default_rng(42)
    rate = 3.0
    X = SpikeCountMatrix(counts=rng.poisson(rate, size=(2, 80)), bin_width=1.0)
    model = small_model(seed=1, n=2, d=2, hidden=(3,), g_hidden=2,
                        solver=OdeSolverConfig(method="rk4", fixed_dt=0.5))
    result = fit_mle(model, X, epochs=120, lr=5e-2, seed=0)
    assert not result.diverged
    assert result.nll_curve[-1] <= result.nll_curve[0]
    # fitted mean intensity within 5% of the empirical mean
    state = LatentState(h=np.zeros((2, 2)), tau=0.0)
    lam = mean_field_rollout(result.model, state, 40).intensity_matrix()
    emp = X.counts.mean()
    assert abs(lam.mean() - emp) / emp <= 0.05


def test_homogeneous_poisson_baseline_nll():
    rng = np.random.default_rng(0)
    X = SpikeCountMatrix(counts=rng.poisson(2.0, size=(3, 50)), bin_width=1.0)
    nll = homogeneous_poisson_nll(X)
    lam = X.counts.mean(axis=1)
    manual = 0.0
    for n in range(3):
        for x in X.counts[n]:
            manual -= -lam[n] + x * math.log(lam[n]) - math.lgamma(x + 1)
    assert nll == pytest.approx(manual, rel=1e-12)


def test_state_from_history_deterministic():
    model = small_model(seed=41)
    X = SpikeCountMatrix(counts=np.random.default_rng(11).poisson(1.0, (3, 8)),
                         bin_width=1.0)
    a = state_from_history(model, X)
    b = state_from_history(model, X)
    assert np.array_equal(a.h, b.h)
    assert a.tau == 8.0
