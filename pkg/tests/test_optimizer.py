from __future__ import annotations

import numpy as np
import pytest

from qmera import mera, optimizer, oracle


def _fd_gradient(net, h=1e-6):
    x = net.params.copy()
    g = np.zeros_like(x)
    for i in range(x.size):
        xp, xm = x.copy(), x.copy()
        xp[i] += h
        xm[i] -= h
        g[i] = (mera.energy(net.with_params(xp)) - mera.energy(net.with_params(xm))) / (2 * h)
    return g


def test_adjoint_shift_and_finite_difference_agree(net8):
    adj = optimizer.gradient(net8, method="adjoint")
    shift = optimizer.gradient(net8, method="shift")
    assert np.max(np.abs(adj - shift)) < 1e-10
    assert np.max(np.abs(shift - _fd_gradient(net8))) < 1e-5


def test_energy_and_gradient_consistent(net8):
    e, g = mera.energy_and_gradient(net8)
    assert e == pytest.approx(mera.energy(net8), abs=1e-12)
    assert g.shape == net8.params.shape


def test_strong_wolfe_on_quadratic():
    phi = lambda a: ((a - 2.0) ** 2, 2 * (a - 2.0), None)
    step, f, _, _ = optimizer.strong_wolfe(phi, 4.0, -4.0)
    assert f <= 4.0 + 1e-4 * step * -4.0
    assert abs(phi(step)[1]) <= 0.9 * 4.0


def test_lbfgs_rosenbrock():
    def fun(x):
        a, b = x
        f = (1 - a) ** 2 + 100 * (b - a * a) ** 2
        g = np.array([-2 * (1 - a) - 400 * a * (b - a * a), 200 * (b - a * a)])
        return f, g

    res = optimizer.lbfgs(fun, np.array([-1.2, 1.0]), max_iters=500, halt_rel=1e-14)
    assert np.allclose(res.params, [1, 1], atol=1e-4)


def test_small_optimization_beats_random_and_is_reproducible(tmp_path):
    cfg = mera.MeraConfig(L=8, chi=2)
    opt = optimizer.OptConfig(max_iters=60, restarts=1, seed=3)
    a = optimizer.optimize(cfg, opt, checkpoint_dir=tmp_path, checkpoint_every=20)
    b = optimizer.optimize(cfg, opt)
    assert a.energy == b.energy
    assert np.array_equal(a.params, b.params)
    exact = oracle.ff_energy(8)
    assert a.energy >= exact - 1e-12
    assert abs(a.energy - exact) / abs(exact) < 0.02
    trace = [e for _, e in a.energy_trace]
    assert all(y <= x + 1e-12 for x, y in zip(trace, trace[1:]))
    assert list(tmp_path.glob("network*.json")) and list(tmp_path.glob("trace*.csv"))


def test_opt_config_validation():
    with pytest.raises(ValueError):
        optimizer.OptConfig(gradient="numeric")
    with pytest.raises(ValueError):
        optimizer.OptConfig(halt_rel_energy=0)
