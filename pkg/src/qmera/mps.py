"""Matrix-product-state approximation of a whole qMERA circuit.

Gates are applied in circuit order on a mixed-canonical MPS. Distant gates are
brought next to each other by a chain of SWAPs, applied, and swapped back.
Every two-site update is an SVD truncated to ``chi_mps`` singular values; the
sum of discarded squared singular values is accumulated as the truncation
error.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from qmera.circuits import Circuit

SWAP = np.array([[1, 0, 0, 0], [0, 0, 1, 0], [0, 1, 0, 0], [0, 0, 0, 1]], dtype=np.complex128)


@dataclass
class Mps:
    """Site tensors of shape (left bond, 2, right bond); ``center`` holds the norm."""

    tensors: list[np.ndarray]
    center: int = 0
    chi_max: int | None = None
    truncation_error: float = 0.0
    max_discarded: float = 0.0
    n_updates: int = field(default=0)

    @classmethod
    def product_zero(cls, L: int, chi_max: int | None = None) -> Mps:
        t = np.zeros((1, 2, 1), dtype=np.complex128)
        t[0, 0, 0] = 1.0
        return cls([t.copy() for _ in range(L)], 0, chi_max)

    @property
    def L(self) -> int:
        return len(self.tensors)

    @property
    def bond_dims(self) -> list[int]:
        return [t.shape[2] for t in self.tensors[:-1]]

    def norm(self) -> float:
        return float(np.linalg.norm(self.tensors[self.center]))

    # ----------------------------------------------------------- canonical form

    def move_center(self, k: int) -> None:
        while self.center < k:
            i = self.center
            a = self.tensors[i]
            dl, d, dr = a.shape
            q, r = np.linalg.qr(a.reshape(dl * d, dr))
            self.tensors[i] = q.reshape(dl, d, -1)
            self.tensors[i + 1] = np.tensordot(r, self.tensors[i + 1], axes=(1, 0))
            self.center += 1
        while self.center > k:
            i = self.center
            a = self.tensors[i]
            dl, d, dr = a.shape
            q, r = np.linalg.qr(a.reshape(dl, d * dr).T)
            self.tensors[i] = q.T.reshape(-1, d, dr)
            self.tensors[i - 1] = np.tensordot(self.tensors[i - 1], r.T, axes=(2, 0))
            self.center -= 1

    # ------------------------------------------------------------------- gates

    def apply_one(self, q: int, u: np.ndarray) -> None:
        self.tensors[q] = np.einsum("ab,lbr->lar", u, self.tensors[q])

    def _apply_adjacent(self, i: int, u: np.ndarray) -> None:
        """``u`` acts on sites (i, i+1), first factor on site i."""
        self.move_center(i)
        a, b = self.tensors[i], self.tensors[i + 1]
        dl, dr = a.shape[0], b.shape[2]
        theta = np.tensordot(a, b, axes=(2, 0))  # (dl, 2, 2, dr)
        theta = np.einsum("abcd,lcdr->labr", u.reshape(2, 2, 2, 2), theta)
        m = theta.reshape(dl * 2, 2 * dr)
        uu, s, vh = np.linalg.svd(m, full_matrices=False)
        norm2 = float(np.sum(s**2))
        keep = int(np.sum(s > 1e-14 * s[0])) if s.size and s[0] > 0 else 1
        keep = max(1, keep)
        if self.chi_max is not None:
            keep = min(keep, self.chi_max)
        disc = float(np.sum(s[keep:] ** 2)) / norm2 if norm2 > 0 else 0.0
        self.truncation_error += disc
        self.max_discarded = max(self.max_discarded, disc)
        s = s[:keep] / math.sqrt(float(np.sum(s[:keep] ** 2)))
        self.tensors[i] = uu[:, :keep].reshape(dl, 2, keep)
        self.tensors[i + 1] = (s[:, None] * vh[:keep]).reshape(keep, 2, dr)
        self.center = i + 1
        self.n_updates += 1

    def apply_two(self, a: int, b: int, u: np.ndarray) -> None:
        """Two-qubit gate on sites (a, b) in that matrix order, any distance."""
        if a == b:
            raise ValueError("two-qubit gate on a single site")
        if a > b:
            u = SWAP @ u @ SWAP
            a, b = b, a
        path = list(range(b - 1, a, -1))
        for p in path:
            self._apply_adjacent(p, SWAP)
        self._apply_adjacent(a, u)
        for p in reversed(path):
            self._apply_adjacent(p, SWAP)

    # -------------------------------------------------------------- observables

    def schmidt_values(self, cut: int) -> np.ndarray:
        """Singular values across the bond between sites cut-1 and cut."""
        self.move_center(cut - 1)
        a = self.tensors[cut - 1]
        s = np.linalg.svd(a.reshape(-1, a.shape[2]), compute_uv=False)
        return s / np.linalg.norm(s)

    def expect_local(self, ops: dict[int, np.ndarray]) -> complex:
        """<psi| prod_i O_i |psi> for single-site operators on any sites."""
        lo, hi = min(ops), max(ops)
        self.move_center(lo)
        env = np.eye(self.tensors[lo].shape[0], dtype=np.complex128)
        for i in range(lo, hi + 1):
            t = self.tensors[i]
            ot = np.einsum("ab,lbr->lar", ops[i], t) if i in ops else t
            env = np.einsum("xy,xsr,ysq->rq", env, t.conj(), ot)
        return complex(np.trace(env))

    def to_statevector(self) -> np.ndarray:
        if self.L > 20:
            raise ValueError("dense conversion limited to 20 sites")
        psi = self.tensors[0]
        for t in self.tensors[1:]:
            psi = np.tensordot(psi, t, axes=(psi.ndim - 1, 0))
        return psi.reshape(-1)


def _fused_ops(c: Circuit):
    """Merge runs of ops acting within one qubit pair into single 4x4 gates."""
    pending = None  # (a, b, matrix)
    for op in c.ops:
        if op.name in ("MEASZ", "RESET"):
            raise ValueError("MPS evolution needs a measurement-free circuit")
        m = op.matrix()
        if op.is_two_qubit:
            a, b = op.qubits
            if pending and {a, b} == {pending[0], pending[1]}:
                if (a, b) != (pending[0], pending[1]):
                    m = SWAP @ m @ SWAP
                pending = (pending[0], pending[1], m @ pending[2])
                continue
            if pending:
                yield ("two", pending)
            pending = (a, b, m)
        else:
            q = op.qubits[0]
            if pending and q in pending[:2]:
                full = np.kron(m, np.eye(2)) if q == pending[0] else np.kron(np.eye(2), m)
                pending = (pending[0], pending[1], full @ pending[2])
            else:
                yield ("one", (q, m))
    if pending:
        yield ("two", pending)


def apply_circuit(c: Circuit, chi_mps: int | None) -> Mps:
    """Evolve |0...0> through ``c`` with bond dimension at most ``chi_mps``.

    Circuit wires are MPS sites in index order.
    """
    if chi_mps is not None and chi_mps < 1:
        raise ValueError("chi_mps must be positive")
    mps = Mps.product_zero(c.num_qubits, chi_mps)
    for kind, payload in _fused_ops(c):
        if kind == "one":
            mps.apply_one(*payload)
        else:
            a, b, u = payload
            mps.apply_two(a, b, u)
    return mps


def entropy_half(m: Mps, cut: int | None = None, base: float = math.e) -> float:
    """Von Neumann entropy across the middle bond, natural log unless ``base`` is given."""
    cut = m.L // 2 if cut is None else cut
    s = m.schmidt_values(cut)
    p = s**2
    p = p[p > 1e-300]
    return float(-np.sum(p * np.log(p)) / math.log(base))


def tfim_energy(m: Mps, J: float = 1.0, h: float = 1.0) -> float:
    """<H> for the periodic transverse-field Ising chain on the MPS."""
    X = np.array([[0, 1], [1, 0]], dtype=np.complex128)
    Z = np.diag([1.0, -1.0]).astype(np.complex128)
    L = m.L
    e = 0.0
    for j in range(L):
        e -= J * m.expect_local({j: X, (j + 1) % L: X}).real
        e -= h * m.expect_local({j: Z}).real
    return e
