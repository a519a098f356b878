from __future__ import annotations

import pytest

from qmera import circuits, compiler, mera
from qmera.circuits import Circuit


def _cone_circuit(net, j, k):
    return circuits.attach_gadget(circuits.lower(net, mera.causal_cone(net, (j, k))), j, k)


@pytest.fixture(scope="module")
def base(net16):
    return _cone_circuit(net16, 2, 7)


def test_parse_mode():
    assert compiler.parse_mode("none") == ("none", None)
    assert compiler.parse_mode("cap(20)") == ("cap", 20)
    assert compiler.parse_mode("cap9") == ("cap", 9)
    with pytest.raises(ValueError):
        compiler.parse_mode("fast")


def test_none_is_identity(base):
    out = compiler.reuse_compile(base, "none")
    assert out.circuit == base and out.width == base.num_qubits


@pytest.mark.parametrize("mode", ["greedy", "cap(8)", "cap(12)"])
def test_reuse_preserves_outcome_distribution(base, mode):
    out = compiler.reuse_compile(base, mode)
    assert out.width <= base.num_qubits
    check = compiler.simulate_equivalence_check(base, out)
    assert check, check


def test_widths_and_depths_ordered(base):
    greedy = compiler.reuse_compile(base, "greedy")
    cap = compiler.reuse_compile(base, "cap(10)")
    assert greedy.width <= cap.width <= 10
    assert greedy.n_resets > 0
    assert compiler.depth2q(base) <= compiler.depth2q(cap.circuit) <= compiler.depth2q(greedy.circuit)
    assert max(compiler.active_profile(greedy.circuit)) <= greedy.width


def test_cap_below_minimum_is_rejected(base):
    w = compiler.reuse_compile(base, "greedy").width
    with pytest.raises(ValueError, match=str(w)):
        compiler.reuse_compile(base, f"cap({w - 1})")


def test_equivalence_check_catches_missing_reset(base):
    comp = compiler.reuse_compile(base, "greedy").circuit
    k = next(i for i, op in enumerate(comp.ops) if op.name == "RESET")
    broken = Circuit(comp.num_qubits, comp.ops[:k] + comp.ops[k + 1 :], comp.cbits, comp.wire_labels, strict=False)
    assert not compiler.simulate_equivalence_check(base, broken)


def test_equivalence_check_skips_wide_circuits(base):
    assert compiler.simulate_equivalence_check(base, base, max_qubits=4).status == "skipped"


def test_resource_stats_and_csv(base):
    s = compiler.resource_stats(base, 5, cap=12)
    assert s.width_no_reuse == base.num_qubits
    assert s.width_greedy <= s.width_cap <= 12
    text = compiler.resource_csv([s])
    assert text.splitlines()[0].startswith("distance,width_no_reuse,width_greedy,width_cap12")
