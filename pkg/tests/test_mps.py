from __future__ import annotations

import math

import numpy as np
import pytest

from qmera import circuits, mera, mps, oracle
from qmera.circuits import Circuit, ClassicalBit, Op


def test_zero_circuit_is_product_state():
    net = mera.build_mera(mera.MeraConfig(L=8, chi=2))
    m = mps.apply_circuit(circuits.lower_network(net), 4)
    assert m.bond_dims == [1] * 7
    assert mps.entropy_half(m) == pytest.approx(0.0, abs=1e-12)


def test_bell_pair_entropy():
    c = Circuit(2, (Op("H", (0,)), Op("CX", (0, 1))))
    assert mps.entropy_half(mps.apply_circuit(c, 2)) == pytest.approx(math.log(2), abs=1e-12)


@pytest.mark.parametrize("L,chi", [(8, 2), (16, 2)])
def test_untruncated_mps_matches_dense(L, chi):
    cfg = mera.MeraConfig(L=L, chi=chi)
    net = mera.build_mera(cfg, mera.random_params(cfg, 5))
    m = mps.apply_circuit(circuits.lower_network(net), 2 ** (L // 2))
    fid = abs(np.vdot(mera.statevector(net), m.to_statevector())) ** 2
    assert fid >= 1 - 1e-9
    assert m.truncation_error < 1e-20
    assert mps.tfim_energy(m) == pytest.approx(mera.energy(net), abs=1e-9)


def test_truncation_and_entropy_bounds(net16):
    c = circuits.lower_network(net16)
    errs = []
    for chi in (2, 4, 8, 16):
        m = mps.apply_circuit(c, chi)
        assert max(m.bond_dims) <= chi
        assert m.norm() == pytest.approx(1.0, abs=1e-12)
        s = mps.entropy_half(m)
        assert 0 <= s <= math.log(chi) + 1e-12
        errs.append(m.truncation_error)
    assert all(b <= a + 1e-15 for a, b in zip(errs, errs[1:]))


def test_local_expectations_match_cone_contraction(net16):
    m = mps.apply_circuit(circuits.lower_network(net16), 256)
    val = m.expect_local({2: mera.X, 9: mera.X}).real
    assert val == pytest.approx(mera.expect_local(net16, "X2 X9"), abs=1e-10)


def test_rejects_measurements():
    c = Circuit(1, (Op("MEASZ", (0,), cbit=0),), (ClassicalBit("cone_exit", "a"),))
    with pytest.raises(ValueError):
        mps.apply_circuit(c, 4)
    with pytest.raises(ValueError):
        mps.apply_circuit(Circuit(2, ()), 0)


def test_ground_energy_bound(net8):
    m = mps.apply_circuit(circuits.lower_network(net8), 16)
    assert mps.tfim_energy(m) >= oracle.ff_energy(8) - 1e-10


def test_entropy_base():
    c = Circuit(2, (Op("H", (0,)), Op("CX", (0, 1))))
    assert mps.entropy_half(mps.apply_circuit(c, 2), base=2) == pytest.approx(1.0, abs=1e-12)
