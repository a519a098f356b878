"""Exact ground-state references for the periodic transverse-field Ising chain.

H = -J sum_j X_j X_{j+1} - h sum_j Z_j, indices mod L.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

ED_MAX_SITES = 16


@dataclass(frozen=True)
class ExactSolution:
    L: int
    g: float
    energy: float
    per_site: float
    correlations: dict[tuple[int, int], float] = field(default_factory=dict)


def _z_signs(L: int) -> np.ndarray:
    # (-1)^{bit_j} for every basis state; site 0 is the most significant bit
    idx = np.arange(2**L)
    return np.stack([1 - 2 * ((idx >> (L - 1 - j)) & 1) for j in range(L)])


def tfim_matvec(L: int, J: float, h: float):
    """Return v -> H v without building H."""
    signs = _z_signs(L)
    diag = -h * signs.sum(axis=0).astype(float)
    idx = np.arange(2**L)
    flips = [idx ^ ((1 << (L - 1 - j)) | (1 << (L - 1 - (j + 1) % L))) for j in range(L)]
    if L == 2:
        # both bonds (0,1) and (1,0) flip the same pair
        flips = [flips[0], flips[0]]

    def mv(v: np.ndarray) -> np.ndarray:
        out = diag * v
        for f in flips:
            out -= J * v[f]
        return out

    return mv


def lanczos_ground(matvec, dim: int, tol: float = 1e-13, max_iter: int = 400, seed: int = 7) -> tuple[float, np.ndarray]:
    """Lowest eigenpair of a real symmetric operator by Lanczos with full reorthogonalization."""
    rng = np.random.default_rng(seed)
    v = rng.standard_normal(dim)
    v /= np.linalg.norm(v)
    basis = [v]
    alphas: list[float] = []
    betas: list[float] = []
    prev = None
    for k in range(min(max_iter, dim)):
        w = matvec(basis[-1])
        a = float(basis[-1] @ w)
        alphas.append(a)
        w = w - a * basis[-1] - (betas[-1] * basis[-2] if betas else 0.0)
        B = np.array(basis)
        w -= B.T @ (B @ w)
        w -= B.T @ (B @ w)
        b = float(np.linalg.norm(w))
        T = np.diag(alphas) + np.diag(betas, 1) + np.diag(betas, -1)
        evals, evecs = np.linalg.eigh(T)
        if prev is not None and abs(evals[0] - prev) < tol * max(1.0, abs(evals[0])) and abs(b * evecs[-1, 0]) < 1e-10:
            break
        prev = evals[0]
        if b < 1e-12:
            break
        betas.append(b)
        basis.append(w / b)
    T = np.diag(alphas) + np.diag(betas[: len(alphas) - 1], 1) + np.diag(betas[: len(alphas) - 1], -1)
    evals, evecs = np.linalg.eigh(T)
    B = np.array(basis[: len(alphas)])
    vec = B.T @ evecs[:, 0]
    return float(evals[0]), vec / np.linalg.norm(vec)


def ed_solve(L: int, J: float = 1.0, h: float = 1.0, correlations: bool = True) -> ExactSolution:
    """Exact diagonalization of the periodic chain, L <= 16."""
    if L > ED_MAX_SITES:
        raise ValueError(f"ED limited to L <= {ED_MAX_SITES}, got {L}")
    if L < 2:
        raise ValueError("need at least two sites")
    e0, psi = _ground_state(L, J, h)
    corr: dict[tuple[int, int], float] = {}
    if correlations:
        idx = np.arange(2**L)
        for k in range(1, L):
            f = idx ^ ((1 << (L - 1)) | (1 << (L - 1 - k)))
            corr[(0, k)] = float(psi @ psi[f])
    g = h / J if J else math.inf
    return ExactSolution(L, g, e0, e0 / L, corr)


def _ground_state(L: int, J: float, h: float) -> tuple[float, np.ndarray]:
    mv = tfim_matvec(L, J, h)
    if 2**L <= 64:
        H = np.column_stack([mv(e) for e in np.eye(2**L)])
        w, V = np.linalg.eigh(H)
        return float(w[0]), V[:, 0]
    return lanczos_ground(mv, 2**L)


def ed_correlation(L: int, j: int, k: int, J: float = 1.0, h: float = 1.0) -> float:
    """<X_j X_k> in the exact ground state."""
    if L > ED_MAX_SITES:
        raise ValueError(f"ED limited to L <= {ED_MAX_SITES}, got {L}")
    _, psi = _ground_state(L, J, h)
    idx = np.arange(2**L)
    f = idx ^ ((1 << (L - 1 - j)) | (1 << (L - 1 - k)))
    return float(psi @ psi[f])


def ff_energy(L: int, g: float = 1.0, J: float = 1.0) -> float:
    """Ground energy from the Jordan-Wigner solution in the even-parity sector.

    Momenta k = +-(2n-1) pi / L (antiperiodic fermions); single-particle
    energies eps(k) = 2J sqrt(1 + g^2 - 2 g cos k); E = -(1/2) sum_k eps(k).
    """
    if L % 2:
        raise ValueError(f"free-fermion energy needs even L, got {L}")
    n = np.arange(1, L // 2 + 1)
    k = (2 * n - 1) * math.pi / L
    eps = 2 * J * np.sqrt(1 + g * g - 2 * g * np.cos(k))
    # the +k and -k halves are equal
    return float(-eps.sum())


def ff_per_site(L: int, g: float = 1.0, J: float = 1.0) -> float:
    return ff_energy(L, g, J) / L


def _majorana_hamiltonian(L: int, g: float, J: float) -> np.ndarray:
    """Real antisymmetric A with H = (i/4) sum_ab A_ab m_a m_b, even-parity sector.

    Majoranas m_{2j} = (prod_{i<j} Z_i) X_j and m_{2j+1} = (prod_{i<j} Z_i) Y_j,
    so Z_j = -i m_{2j} m_{2j+1} and X_j X_{j+1} = -i m_{2j+1} m_{2j+2}. In the
    even sector the wrap-around bond picks up a minus sign.
    """
    A = np.zeros((2 * L, 2 * L))

    def bond(a, b, w):
        A[a, b] += w
        A[b, a] -= w

    for j in range(L):
        bond(2 * j, 2 * j + 1, 2 * g * J)
    for j in range(L - 1):
        bond(2 * j + 1, 2 * j + 2, 2 * J)
    bond(2 * L - 1, 0, -2 * J)
    return A


def ff_entropy(L: int, n: int | None = None, g: float = 1.0, J: float = 1.0, base: float = math.e) -> float:
    """Exact entanglement entropy of sites 0..n-1 (default n = L/2) in the ground state.

    The restricted Majorana covariance of a Gaussian state has eigenvalues +-nu;
    each pair contributes the binary entropy of (1 + nu) / 2.
    """
    if L % 2:
        raise ValueError(f"free-fermion entropy needs even L, got {L}")
    n = L // 2 if n is None else n
    if not 0 < n < L:
        raise ValueError(f"subsystem size must lie in (0, {L}), got {n}")
    w, v = np.linalg.eigh(1j * _majorana_hamiltonian(L, g, J))
    cov = (v * -np.sign(w)) @ v.conj().T
    nu = np.clip(np.abs(np.linalg.eigvalsh(cov[: 2 * n, : 2 * n])), 0.0, 1.0)
    p = (1 + nu) / 2
    p = p[(p > 1e-15) & (p < 1 - 1e-15)]
    s = -np.sum(p * np.log(p) + (1 - p) * np.log(1 - p)) / 2
    return float(s / math.log(base))
