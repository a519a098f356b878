from __future__ import annotations

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from qmera.tensors import Tensor, contract, contract_pair, contract_with_environments, plan_greedy


def _rand(rng, shape):
    return rng.standard_normal(shape) + 1j * rng.standard_normal(shape)


def test_contract_pair_matches_einsum(rng):
    a = Tensor(_rand(rng, (2, 3, 4)), ("i", "j", "k"))
    b = Tensor(_rand(rng, (4, 3, 5)), ("k", "j", "m"))
    c = contract_pair(a, b)
    ref = np.einsum("ijk,kjm->im", a.data, b.data)
    assert np.allclose(c.transpose_to(("i", "m")).data, ref)


def test_tensor_rejects_bad_labels():
    with pytest.raises(ValueError):
        Tensor(np.zeros((2, 2)), ("a",))
    with pytest.raises(ValueError):
        Tensor(np.zeros((2, 2)), ("a", "a"))


def test_tensor_is_immutable(rng):
    t = Tensor(_rand(rng, (2, 2)), ("a", "b"))
    with pytest.raises(ValueError):
        t.data[0, 0] = 1.0


def test_unitary_check():
    h = np.array([[1, 1], [1, -1]]) / np.sqrt(2)
    assert Tensor(h, ("o", "i")).is_unitary(["i"], ["o"])
    assert not Tensor(2 * h, ("o", "i")).is_unitary(["i"], ["o"])


def test_chain_contraction_and_output_order(rng):
    mats = [Tensor(_rand(rng, (3, 3)), (f"x{i}", f"x{i + 1}")) for i in range(5)]
    out = contract(mats, output=("x5", "x0"))
    ref = np.linalg.multi_dot([m.data for m in mats])
    assert np.allclose(out.data, ref.T)


@given(st.integers(min_value=0, max_value=10_000))
def test_plan_order_does_not_change_value(seed):
    rng = np.random.default_rng(seed)
    ts = [
        Tensor(_rand(rng, (2, 3)), ("a", "b")),
        Tensor(_rand(rng, (3, 2, 2)), ("b", "c", "d")),
        Tensor(_rand(rng, (2, 2)), ("c", "a")),
        Tensor(_rand(rng, (2,)), ("d",)),
    ]
    greedy = contract(ts, plan_greedy(ts)).data
    ref = np.einsum("ab,bcd,ca,d->", *[t.data for t in ts])
    assert np.allclose(greedy, ref)


@given(st.integers(min_value=0, max_value=10_000))
def test_environments_are_derivatives(seed):
    rng = np.random.default_rng(seed)
    ts = [
        Tensor(_rand(rng, (2, 3)), ("a", "b")),
        Tensor(_rand(rng, (3, 2)), ("b", "c")),
        Tensor(_rand(rng, (2, 2)), ("c", "a")),
    ]
    value, envs = contract_with_environments(ts)
    for t, e in zip(ts, envs):
        assert np.isclose(np.sum(e * t.data), value)
    # linearity in one tensor: finite difference along a random direction is exact
    d = _rand(rng, ts[1].shape)
    bumped = [ts[0], Tensor(ts[1].data + d, ts[1].labels), ts[2]]
    v2, _ = contract_with_environments(bumped)
    assert np.isclose(v2 - value, np.sum(envs[1] * d))


def test_environments_reject_open_network(rng):
    with pytest.raises(ValueError):
        contract_with_environments([Tensor(_rand(rng, (2, 2)), ("a", "b")), Tensor(_rand(rng, (2,)), ("a",))])
