"""Dense labeled tensors and pairwise contraction.

Every tensor carries one hashable label per leg. Two legs with the same label
on different tensors are contracted; a label that appears once is an open leg.
Contraction orders are found by a greedy size-minimizing search and replayed
through :func:`contract`, which can also return the environment of every input
tensor (the derivative of a scalar network with respect to that tensor).
"""

from __future__ import annotations

from collections.abc import Hashable, Iterable, Sequence
from dataclasses import dataclass, field

import numpy as np

Label = Hashable


@dataclass(frozen=True)
class Tensor:
    """Immutable complex tensor with one label per leg."""

    data: np.ndarray
    labels: tuple[Label, ...]

    def __post_init__(self) -> None:
        data = np.asarray(self.data, dtype=np.complex128)
        if data.ndim != len(self.labels):
            raise ValueError(f"{data.ndim} legs but {len(self.labels)} labels")
        if len(set(self.labels)) != len(self.labels):
            raise ValueError(f"repeated label in {self.labels}")
        data = data.copy() if data.flags.writeable else data
        data.flags.writeable = False
        object.__setattr__(self, "data", data)
        object.__setattr__(self, "labels", tuple(self.labels))

    @property
    def shape(self) -> tuple[int, ...]:
        return self.data.shape

    @property
    def size(self) -> int:
        return int(self.data.size)

    def dim(self, label: Label) -> int:
        return self.data.shape[self.labels.index(label)]

    def conj(self) -> Tensor:
        return Tensor(self.data.conj(), self.labels)

    def relabel(self, mapping: dict) -> Tensor:
        return Tensor(self.data, tuple(mapping.get(lb, lb) for lb in self.labels))

    def transpose_to(self, labels: Sequence[Label]) -> Tensor:
        perm = [self.labels.index(lb) for lb in labels]
        return Tensor(self.data.transpose(perm), tuple(labels))

    def is_unitary(self, in_labels: Sequence[Label], out_labels: Sequence[Label], atol: float = 1e-12) -> bool:
        """Check U^dagger U = 1 for the map from ``in_labels`` to ``out_labels``."""
        t = self.transpose_to(list(out_labels) + list(in_labels))
        n_out = int(np.prod([self.dim(lb) for lb in out_labels]))
        n_in = int(np.prod([self.dim(lb) for lb in in_labels]))
        m = t.data.reshape(n_out, n_in)
        return bool(np.allclose(m.conj().T @ m, np.eye(n_in), atol=atol, rtol=0))


def contract_pair(a: Tensor, b: Tensor, shared: Iterable[tuple[Label, Label]] | None = None) -> Tensor:
    """Sum over the shared legs of ``a`` and ``b``.

    ``shared`` lists ``(label_in_a, label_in_b)`` pairs; by default every label
    common to both tensors is contracted. The result keeps the free legs of
    ``a`` followed by the free legs of ``b``, each in their original order.
    """
    if shared is None:
        common = [lb for lb in a.labels if lb in set(b.labels)]
        pairs = [(lb, lb) for lb in common]
    else:
        pairs = list(shared)
    ax_a = [a.labels.index(la) for la, _ in pairs]
    ax_b = [b.labels.index(lb) for _, lb in pairs]
    for i, j, (la, lb) in zip(ax_a, ax_b, pairs):
        if a.shape[i] != b.shape[j]:
            raise ValueError(f"dimension mismatch on ({la!r}, {lb!r}): {a.shape[i]} vs {b.shape[j]}")
    free_a = [lb for k, lb in enumerate(a.labels) if k not in ax_a]
    free_b = [lb for k, lb in enumerate(b.labels) if k not in ax_b]
    overlap = set(free_a) & set(free_b)
    if overlap:
        raise ValueError(f"free labels {overlap} would collide in the result")
    data = np.tensordot(a.data, b.data, axes=(ax_a, ax_b))
    return Tensor(data, tuple(free_a) + tuple(free_b))


@dataclass(frozen=True)
class ContractionPlan:
    """Ordered pairwise contractions over tensor ids.

    Inputs are ids ``0..n_inputs-1``; step ``s`` consumes two live ids and
    produces id ``n_inputs + s``.
    """

    n_inputs: int
    steps: tuple[tuple[int, int], ...]
    peak_size: int
    flops: float = field(default=0.0, compare=False)


def _size(dims: dict, labels: Iterable[Label]) -> int:
    out = 1
    for lb in labels:
        out *= dims[lb]
    return out


def plan_greedy(network: Sequence[Tensor] | Sequence[tuple[tuple[Label, ...], tuple[int, ...]]]) -> ContractionPlan:
    """Greedy contraction order: always contract the pair with the smallest result.

    ``network`` holds tensors, or ``(labels, shape)`` pairs when only the
    structure is known. Pairs sharing a label are preferred; disconnected
    components are finished separately and joined by outer products, smallest
    first. Ties go to the smaller intermediate cost, then the lower ids.
    """
    legs: list[tuple[Label, ...]] = []
    dims: dict = {}
    for item in network:
        labels, shape = (item.labels, item.shape) if isinstance(item, Tensor) else item
        legs.append(tuple(labels))
        for lb, d in zip(labels, shape):
            if dims.setdefault(lb, d) != d:
                raise ValueError(f"label {lb!r} has inconsistent dimensions")
    n = len(legs)
    live: dict[int, frozenset] = {i: frozenset(lg) for i, lg in enumerate(legs)}
    counts: dict = {}
    for lg in legs:
        for lb in lg:
            counts[lb] = counts.get(lb, 0) + 1
    if any(c > 2 for c in counts.values()):
        raise ValueError("a label may appear on at most two tensors")

    def result_labels(i: int, j: int) -> frozenset:
        return live[i] ^ live[j]

    owners: dict = {}
    for i, lg in live.items():
        for lb in lg:
            owners.setdefault(lb, set()).add(i)
    steps: list[tuple[int, int]] = []
    peak = max((_size(dims, lg) for lg in live.values()), default=1)
    flops = 0.0
    next_id = n
    while len(live) > 1:
        best = None
        pairs = {tuple(sorted(o)) for o in owners.values() if len(o) == 2}
        for i, j in pairs:
            out = _size(dims, result_labels(i, j))
            key = (out, out - _size(dims, live[i]) - _size(dims, live[j]), i, j)
            if best is None or key < best:
                best = key
        if best is None:
            # disconnected: outer product of the two smallest pieces
            i, j = sorted(live, key=lambda t: (_size(dims, live[t]), t))[:2]
            i, j = min(i, j), max(i, j)
        else:
            i, j = best[2], best[3]
        new = result_labels(i, j)
        flops += _size(dims, live[i] | live[j])
        for lb in live[i] | live[j]:
            if lb in new:
                owners[lb].discard(i)
                owners[lb].discard(j)
                owners[lb].add(next_id)
            else:
                del owners[lb]
        del live[i], live[j]
        live[next_id] = new
        peak = max(peak, _size(dims, new))
        steps.append((i, j))
        next_id += 1
    return ContractionPlan(n_inputs=n, steps=tuple(steps), peak_size=peak, flops=flops)


def _pair_axes(a_labels: tuple, b_labels: tuple) -> tuple[list[int], list[int], tuple]:
    sb = set(b_labels)
    ax_a = [k for k, lb in enumerate(a_labels) if lb in sb]
    ax_b = [b_labels.index(a_labels[k]) for k in ax_a]
    out = tuple(lb for k, lb in enumerate(a_labels) if k not in ax_a) + tuple(
        lb for k, lb in enumerate(b_labels) if k not in ax_b
    )
    return ax_a, ax_b, out


def contract(
    tensors: Sequence[Tensor], plan: ContractionPlan | None = None, output: Sequence[Label] | None = None
) -> Tensor:
    """Contract a whole network following ``plan`` (greedy if omitted).

    Labels that appear on exactly two tensors are summed. ``output`` fixes the
    leg order of the result.
    """
    result, _ = _run(tensors, plan, output, keep=False)
    return result


def contract_with_environments(
    tensors: Sequence[Tensor], plan: ContractionPlan | None = None
) -> tuple[complex, list[np.ndarray]]:
    """Value of a closed network and the environment of each input tensor.

    The environment ``E_i`` satisfies ``value = sum(E_i * T_i)`` for every i,
    so it is the (holomorphic) derivative of the value with respect to ``T_i``.
    """
    result, saved = _run(tensors, plan, None, keep=True)
    if result.labels:
        raise ValueError(f"network is not closed, open legs {result.labels}")
    envs: dict[int, np.ndarray] = {}
    n = len(tensors)
    grad: dict[int, np.ndarray] = {n + len(saved) - 1: np.ones((), dtype=np.complex128)}
    for s in range(len(saved) - 1, -1, -1):
        i, j, a_lab, b_lab, out_lab, a_dat, b_dat = saved[s]
        g = grad.pop(n + s)
        # value = sum_out g[out] C[out] with C = sum_shared A B
        ea = _env(g, out_lab, b_dat, b_lab, a_lab)
        eb = _env(g, out_lab, a_dat, a_lab, b_lab)
        for idx, e in ((i, ea), (j, eb)):
            if idx < n:
                envs[idx] = e
            else:
                grad[idx] = e
    if n == 1:
        envs[0] = np.ones(tensors[0].shape, dtype=np.complex128)
    return complex(result.data), [envs[k] for k in range(n)]


def _env(g, g_lab, other, o_lab, target_lab):
    so = set(o_lab)
    ax_g = [k for k, lb in enumerate(g_lab) if lb in so]
    ax_o = [o_lab.index(g_lab[k]) for k in ax_g]
    data = np.tensordot(g, other, axes=(ax_g, ax_o))
    labels = [lb for k, lb in enumerate(g_lab) if k not in ax_g] + [
        lb for k, lb in enumerate(o_lab) if k not in ax_o
    ]
    return data.transpose([labels.index(lb) for lb in target_lab])


def _run(tensors, plan, output, keep):
    tensors = list(tensors)
    if plan is None:
        plan = plan_greedy(tensors)
    if plan.n_inputs != len(tensors):
        raise ValueError("plan does not match the number of tensors")
    pool: dict[int, tuple[np.ndarray, tuple]] = {i: (t.data, t.labels) for i, t in enumerate(tensors)}
    saved = []
    nid = len(tensors)
    for i, j in plan.steps:
        a, al = pool.pop(i)
        b, bl = pool.pop(j)
        ax_a, ax_b, out = _pair_axes(al, bl)
        pool[nid] = (np.tensordot(a, b, axes=(ax_a, ax_b)), out)
        if keep:
            saved.append((i, j, al, bl, out, a, b))
        nid += 1
    (data, labels), = pool.values()
    result = Tensor(data, labels)
    if output is not None:
        result = result.transpose_to(output)
    return result, saved
