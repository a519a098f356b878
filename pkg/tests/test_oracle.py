from __future__ import annotations

import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from qmera import oracle


def _dense_tfim(L, J=1.0, h=1.0):
    X = np.array([[0, 1], [1, 0]])
    Z = np.diag([1, -1])

    def op(site_ops):
        out = np.array([[1.0]])
        for s in range(L):
            out = np.kron(out, site_ops.get(s, np.eye(2)))
        return out

    H = np.zeros((2**L, 2**L))
    for j in range(L):
        H -= J * op({j: X, (j + 1) % L: X})
        H -= h * op({j: Z})
    return H


@pytest.mark.parametrize("L", [4, 6])
def test_ed_matches_dense_diagonalization(L):
    ref = np.linalg.eigvalsh(_dense_tfim(L, 1.0, 0.7))[0]
    assert oracle.ed_solve(L, 1.0, 0.7, correlations=False).energy == pytest.approx(ref, abs=1e-10)


@pytest.mark.parametrize("L", [4, 6, 8, 10, 12])
@pytest.mark.parametrize("g", [0.5, 1.0, 1.7])
def test_free_fermions_match_ed(L, g):
    ed = oracle.ed_solve(L, 1.0, g, correlations=False).energy
    assert oracle.ff_energy(L, g) == pytest.approx(ed, abs=1e-10)


def test_thermodynamic_limit():
    assert oracle.ff_per_site(4096) == pytest.approx(-4 / math.pi, abs=1e-4)


def test_per_site_energy_approaches_limit_monotonically():
    # periodic ring, even sector: finite chains sit below the bulk value
    vals = [oracle.ff_per_site(2**k) for k in range(3, 13)]
    assert all(b > a for a, b in zip(vals, vals[1:]))
    assert all(v < -4 / math.pi for v in vals)


def test_ed_limits():
    with pytest.raises(ValueError):
        oracle.ed_solve(18)
    with pytest.raises(ValueError):
        oracle.ed_correlation(18, 0, 1)


@given(st.integers(0, 9), st.integers(0, 9))
def test_ed_correlation_depends_on_ring_distance(j, k):
    if j == k:
        return
    L = 10
    d = min(abs(j - k), L - abs(j - k))
    assert oracle.ed_correlation(L, j, k) == pytest.approx(oracle.ed_correlation(L, 0, d), abs=1e-10)


def test_lanczos_on_known_spectrum():
    diag = np.linspace(-3, 5, 200)
    e, v = oracle.lanczos_ground(lambda x: diag * x, 200)
    assert e == pytest.approx(-3, abs=1e-10)
    assert abs(abs(v[0]) - 1) < 1e-6


@pytest.mark.parametrize("L,n", [(8, 4), (8, 3), (10, 5), (12, 6)])
def test_free_fermion_entropy_matches_ed(L, n):
    H = _dense_tfim(L)
    psi = np.linalg.eigh(H)[1][:, 0].reshape(2**n, -1)
    p = np.linalg.svd(psi, compute_uv=False) ** 2
    p = p[p > 1e-15]
    assert oracle.ff_entropy(L, n) == pytest.approx(-np.sum(p * np.log(p)), abs=1e-9)
    assert oracle.ff_entropy(L, n, base=2) == pytest.approx(-np.sum(p * np.log2(p)), abs=1e-9)


def test_free_fermion_entropy_grows_logarithmically():
    s = [oracle.ff_entropy(L) for L in (32, 64, 128)]
    # critical Ising: S(2L) - S(L) = (c/3) ln 2 with c = 1/2
    assert s[2] - s[1] == pytest.approx(math.log(2) / 6, abs=2e-3)
