import numpy as np

from netsteer.diffcore import OdeSolverConfig, Tensor
from netsteer.njode import init_model

RK4 = OdeSolverConfig(method="rk4", fixed_dt=0.25)


def small_model(seed=0, n=3, d=3, **kw):
    kw.setdefault("hidden", (4,))
    kw.setdefault("g_hidden", 3)
    kw.setdefault("solver", RK4)
    return init_model(n, latent_dim=d, seed=seed, **kw)


def zero_intensity_head(model, baseline=0.0):
    """Force g == 0 and b_n == baseline so lambda == exp(baseline)."""
    p = dict(model.params)
    p["i_w_out"] = Tensor(np.zeros_like(p["i_w_out"].value))
    p["i_b_out"] = Tensor(np.zeros(1))
    p["i_b"] = Tensor(np.full((model.n_nodes, 1), baseline))
    return model.with_params(p)


def randomize(model, seed, scale=0.3):
    """Random parameter point; fresh zero-init leaves gradients too tiny for FD."""
    rng = np.random.default_rng(seed)
    p = {k: Tensor(v.value + rng.normal(scale=scale, size=v.value.shape))
         for k, v in model.params.items()}
    return model.with_params(p)
