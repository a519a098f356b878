"""Energy minimization of the qMERA angles.

Gradients come from gate environments (reverse-mode through the cone
contractions) or from the two-point shift rule, which is exact here because
every angle enters as exp(-i angle/2 P) with P^2 = 1. The minimizer is a
limited-memory BFGS with a strong-Wolfe line search; it stops once the
relative energy change between accepted iterates falls below a threshold.
"""

from __future__ import annotations

import csv
import logging
import math
import time
from collections.abc import Callable
from dataclasses import dataclass, field
from functools import lru_cache
from pathlib import Path

import numpy as np

from qmera import mera
from qmera.mera import MeraConfig, MeraNetwork, build_mera

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class OptConfig:
    max_iters: int = 5000
    halt_rel_energy: float = 1e-8
    seed: int = 0
    init: tuple[float, float] = (-0.1, 0.1)
    restarts: int = 3
    memory: int = 10
    gradient: str = "adjoint"  # or "shift"

    def __post_init__(self) -> None:
        if not self.halt_rel_energy > 0:
            raise ValueError("halt_rel_energy must be positive")
        if self.gradient not in ("adjoint", "shift"):
            raise ValueError(f"unknown gradient backend {self.gradient!r}")


@dataclass
class OptResult:
    params: np.ndarray
    energy: float
    energy_trace: list[tuple[int, float]] = field(default_factory=list)
    grad_norm_trace: list[float] = field(default_factory=list)
    wall_time: float = 0.0
    converged: bool = False
    message: str = ""
    n_evals: int = 0
    restart: int = 0


# ------------------------------------------------------------------ gradients


@lru_cache(maxsize=16)
def _windows_of_gate(layout: mera.MeraLayout) -> tuple[tuple[int, ...], ...]:
    hits: list[list[int]] = [[] for _ in layout.gates]
    for w, (j, k) in enumerate(mera.energy_windows(layout.config)):
        for gi in mera.causal_cone(layout, (j, k)).gates:
            hits[gi].append(w)
    return tuple(tuple(h) for h in hits)


def _window_energies(net: MeraNetwork, windows) -> np.ndarray:
    term = mera.bond_term(net.config)
    pairs = mera.energy_windows(net.config)
    return np.array([mera.operator_value(net, pairs[w], term).real for w in windows])


def shift_rule_gradient(net: MeraNetwork) -> np.ndarray:
    """dE/dtheta_i = [E(theta_i + pi/2) - E(theta_i - pi/2)] / 2, over the affected terms only."""
    layout = net.layout
    owners = _windows_of_gate(layout)
    grad = np.zeros(layout.n_params)
    for g in layout.gates:
        windows = owners[g.index]
        for p in range(mera.PARAMS_PER_GATE):
            i = g.offset + p
            plus = net.params.copy()
            plus[i] += math.pi / 2
            minus = net.params.copy()
            minus[i] -= math.pi / 2
            ep = _window_energies(net.with_params(plus), windows).sum()
            em = _window_energies(net.with_params(minus), windows).sum()
            grad[i] = 0.5 * (ep - em)
    return grad


def gradient(net: MeraNetwork, params=None, method: str = "adjoint") -> np.ndarray:
    """Energy gradient with respect to every angle."""
    if params is not None:
        net = net.with_params(params)
    if method == "shift":
        return shift_rule_gradient(net)
    if method == "adjoint":
        return mera.energy_and_gradient(net)[1]
    raise ValueError(f"unknown gradient method {method!r}")


def energy_objective(config: MeraConfig, method: str = "adjoint") -> Callable[[np.ndarray], tuple[float, np.ndarray]]:
    template = build_mera(config)

    def fun(x: np.ndarray) -> tuple[float, np.ndarray]:
        net = template.with_params(x)
        if method == "adjoint":
            return mera.energy_and_gradient(net)
        return mera.energy(net), shift_rule_gradient(net)

    return fun


# --------------------------------------------------------------- line search


class LineSearchError(RuntimeError):
    pass


def _cubic_min(a, fa, da, b, fb, db):
    d1 = da + db - 3 * (fa - fb) / (a - b)
    disc = d1 * d1 - da * db
    if disc < 0:
        return None
    d2 = math.copysign(math.sqrt(disc), b - a)
    x = b - (b - a) * (db + d2 - d1) / (db - da + 2 * d2)
    if not math.isfinite(x):
        return None
    return x


def strong_wolfe(phi, f0, d0, step=1.0, c1=1e-4, c2=0.9, max_evals=30):
    """Step length satisfying the strong Wolfe conditions.

    ``phi(a)`` returns ``(f, directional derivative, payload)``. Returns
    ``(a, f, payload, n_evals)``.
    """
    if d0 >= 0:
        raise LineSearchError("not a descent direction")
    a_prev, f_prev, d_prev = 0.0, f0, d0
    a = step
    evals = 0
    lo = hi = None
    while evals < max_evals:
        fa, da, pay = phi(a)
        evals += 1
        if fa > f0 + c1 * a * d0 or (evals > 1 and fa >= f_prev):
            lo, hi = (a_prev, f_prev, d_prev), (a, fa, da)
            break
        if abs(da) <= -c2 * d0:
            return a, fa, pay, evals
        if da >= 0:
            lo, hi = (a, fa, da), (a_prev, f_prev, d_prev)
            break
        a_prev, f_prev, d_prev = a, fa, da
        a = min(2.5 * a, 1e3)
    else:
        raise LineSearchError("bracketing failed")
    # zoom
    while evals < max_evals:
        (al, fl, dl), (ah, fh, dh) = lo, hi
        x = _cubic_min(al, fl, dl, ah, fh, dh)
        left, right = min(al, ah), max(al, ah)
        width = right - left
        if x is None or not (left + 0.1 * width <= x <= right - 0.1 * width):
            x = 0.5 * (al + ah)
        fx, dx, pay = phi(x)
        evals += 1
        if fx > f0 + c1 * x * d0 or fx >= fl:
            hi = (x, fx, dx)
        else:
            if abs(dx) <= -c2 * d0:
                return x, fx, pay, evals
            if dx * (ah - al) >= 0:
                hi = lo
            lo = (x, fx, dx)
        if abs(hi[0] - lo[0]) < 1e-14:
            break
    raise LineSearchError("zoom failed to satisfy the Wolfe conditions")


# --------------------------------------------------------------------- L-BFGS


def lbfgs(
    fun: Callable[[np.ndarray], tuple[float, np.ndarray]],
    x0: np.ndarray,
    max_iters: int = 1000,
    halt_rel: float = 1e-8,
    memory: int = 10,
    callback: Callable[[int, np.ndarray, float, float], None] | None = None,
) -> OptResult:
    """Minimize ``fun`` (value, gradient) from ``x0``.

    Converged when |f_k - f_{k-1}| < halt_rel * |f_k| for accepted iterates.
    A failed line search ends the run with ``converged=False``.
    """
    t0 = time.perf_counter()
    x = np.array(x0, dtype=float)
    f, g = fun(x)
    n_evals = 1
    trace = [(0, float(f))]
    gnorms = [float(np.linalg.norm(g))]
    S: list[np.ndarray] = []
    Y: list[np.ndarray] = []
    converged, message = False, "max_iters reached"
    for it in range(1, max_iters + 1):
        # two-loop recursion
        q = g.copy()
        alphas = []
        for s, y in zip(reversed(S), reversed(Y)):
            a = (s @ q) / (y @ s)
            alphas.append(a)
            q -= a * y
        if S:
            q *= (S[-1] @ Y[-1]) / (Y[-1] @ Y[-1])
        else:
            q *= 1.0 / max(np.linalg.norm(g), 1e-12)
        for (s, y), a in zip(zip(S, Y), reversed(alphas)):
            b = (y @ q) / (y @ s)
            q += (a - b) * s
        d = -q
        d0 = float(g @ d)
        if d0 >= 0:
            S.clear()
            Y.clear()
            d = -g / max(np.linalg.norm(g), 1e-12)
            d0 = float(g @ d)

        def phi(a, x=x, d=d):
            fx, gx = fun(x + a * d)
            return fx, float(gx @ d), gx

        try:
            step, f_new, g_new, ne = strong_wolfe(phi, f, d0)
        except LineSearchError as exc:
            n_evals += 30
            converged, message = False, f"line search failed: {exc}"
            break
        n_evals += ne
        x_new = x + step * d
        s, y = x_new - x, g_new - g
        if y @ s > 1e-12 * np.linalg.norm(s) * np.linalg.norm(y):
            S.append(s)
            Y.append(y)
            if len(S) > memory:
                S.pop(0)
                Y.pop(0)
        rel = abs(f_new - f) / max(abs(f_new), 1e-300)
        x, f, g = x_new, float(f_new), g_new
        trace.append((it, f))
        gnorms.append(float(np.linalg.norm(g)))
        if callback is not None:
            callback(it, x, f, gnorms[-1])
        if rel < halt_rel:
            converged, message = True, "relative energy change below threshold"
            break
        if gnorms[-1] == 0.0:
            converged, message = True, "zero gradient"
            break
    return OptResult(
        params=x,
        energy=float(f),
        energy_trace=trace,
        grad_norm_trace=gnorms,
        wall_time=time.perf_counter() - t0,
        converged=converged,
        message=message,
        n_evals=n_evals,
    )


def write_checkpoint(directory: Path, config: MeraConfig, x: np.ndarray, trace, gnorms, tag: str = "") -> None:
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    net = build_mera(config, x)
    (directory / f"network{tag}.json").write_text(mera.network_to_json(net))
    with open(directory / f"trace{tag}.csv", "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["iter", "energy", "grad_norm"])
        for (it, e), gn in zip(trace, gnorms):
            w.writerow([it, repr(e), repr(gn)])


def optimize(
    config: MeraConfig,
    opt: OptConfig = OptConfig(),
    x0: np.ndarray | None = None,
    checkpoint_dir: Path | None = None,
    checkpoint_every: int = 50,
) -> OptResult:
    """Best-of-restarts L-BFGS minimization of <H>.

    Restart ``r`` draws its start uniformly from ``opt.init`` with the stream
    ``(seed, r)``; an explicit ``x0`` replaces the first start.
    """
    fun = energy_objective(config, opt.gradient)
    n = mera.n_params(config)
    best: OptResult | None = None
    for r in range(max(1, opt.restarts)):
        if r == 0 and x0 is not None:
            start = np.array(x0, dtype=float)
        else:
            rng = np.random.default_rng([opt.seed, r])
            start = rng.uniform(opt.init[0], opt.init[1], n)
        tag = f"_r{r}"
        trace: list[tuple[int, float]] = []
        gnorms: list[float] = []

        def cb(it, x, f, gn, tag=tag, trace=trace, gnorms=gnorms):
            trace.append((it, f))
            gnorms.append(gn)
            if it % 100 == 0:
                log.info("restart %d iter %d energy %.12f |g| %.3e", r, it, f, gn)
            if checkpoint_dir is not None and it % checkpoint_every == 0:
                write_checkpoint(checkpoint_dir, config, x, trace, gnorms, tag)

        res = lbfgs(fun, start, opt.max_iters, opt.halt_rel_energy, opt.memory, cb)
        res.restart = r
        if checkpoint_dir is not None:
            write_checkpoint(checkpoint_dir, config, res.params, res.energy_trace, res.grad_norm_trace, tag)
        log.info("restart %d finished: energy %.12f converged=%s (%s)", r, res.energy, res.converged, res.message)
        if best is None or res.energy < best.energy:
            best = res
    return best
