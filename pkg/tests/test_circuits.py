from __future__ import annotations

import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from qmera import circuits, mera
from qmera.circuits import Circuit, ClassicalBit, Op
from qmera.simulator import run_noiseless

angles = st.floats(min_value=-2 * math.pi, max_value=2 * math.pi, allow_nan=False)


def _cone_circuit(net, j, k):
    return circuits.attach_gadget(circuits.lower(net, mera.causal_cone(net, (j, k))), j, k)


def test_op_validation():
    with pytest.raises(ValueError):
        Op("RX", (0,), (1.0,))
    with pytest.raises(ValueError):
        Op("UXX", (0, 0), (1.0,))
    with pytest.raises(ValueError):
        Op("RZ", (0,))
    with pytest.raises(ValueError):
        Op("MEASZ", (0,))


def test_circuit_rejects_reuse_without_reset():
    bits = (ClassicalBit("cone_exit", "a"),)
    ops = [Op("MEASZ", (0,), cbit=0), Op("H", (0,))]
    with pytest.raises(ValueError, match="without a RESET"):
        Circuit(1, ops, bits)
    Circuit(1, ops, bits, strict=False)
    Circuit(1, [ops[0], Op("RESET", (0,)), Op("H", (0,))], bits)


def test_lowering_full_network_reproduces_statevector(net8):
    c = circuits.lower_network(net8)
    psi = c.unitary()[:, 0]
    assert abs(np.vdot(mera.statevector(net8), psi)) == pytest.approx(1.0, abs=1e-12)


def test_cone_lowering_and_gadget_reproduce_correlator(net8):
    j, k = 1, 6
    res = run_noiseless(_cone_circuit(net8, j, k))
    roles = [b.role for b in res.cbits]
    anc = roles.index("xx_ancilla")
    herald = [i for i, r in enumerate(roles) if r in ("cone_exit", "site_z")]
    xx = 0.0
    for bits, p in res.distribution().items():
        xx += p * (1 - 2 * bits[anc])
        assert sum(bits[i] for i in herald) % 2 == 0
    assert xx == pytest.approx(mera.expect_local(net8, {j: "X", k: "X"}), abs=1e-12)


def test_gadget_rejects_measured_sites(net8):
    c = circuits.lower(net8, mera.causal_cone(net8, (2, 3)))
    exited = next(iter(mera.causal_cone(net8, (2, 3)).exits))
    with pytest.raises(ValueError):
        circuits.attach_gadget(c, 2, exited)


def test_jsonl_round_trip_is_bit_exact(net8):
    c = _cone_circuit(net8, 0, 5)
    text = c.to_jsonl({"config_hash": "h"})
    back = Circuit.from_jsonl(text)
    assert back == c
    assert back.to_jsonl({"config_hash": "h"}) == text


@given(st.sampled_from(["UXX", "UYY", "UZZ"]), angles, st.sampled_from([1, 3, 5]))
def test_fold_is_unitary_identity(name, theta, m):
    c = Circuit(2, (Op(name, (0, 1), (theta,)),))
    f = circuits.fold_zne(c, m)
    assert f.two_qubit_count == m
    assert np.allclose(f.unitary(), c.unitary(), atol=1e-12, rtol=0)


def test_fold_preserves_outcome_distribution(net8):
    c = _cone_circuit(net8, 2, 5)
    f = circuits.fold_zne(c, 3)
    assert f.two_qubit_count == 3 * c.two_qubit_count
    p, q = run_noiseless(c).distribution(), run_noiseless(f).distribution()
    assert 0.5 * sum(abs(p.get(k, 0) - q.get(k, 0)) for k in set(p) | set(q)) < 1e-12


@pytest.mark.parametrize("m", [0, 2, -1, 2.5, True])
def test_fold_rejects_bad_factor(m):
    with pytest.raises(ValueError):
        circuits.fold_zne(Circuit(2, (Op("CX", (0, 1)),)), m)
