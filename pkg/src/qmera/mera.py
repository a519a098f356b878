"""Binary qMERA built from Z2-symmetric two-qubit gates.

Circuit picture, top to bottom in circuit time: a top tensor on the two
coarsest bonds, then for every finer level a row of isometries (one bond in,
two bonds out, fresh |0> qubits on the outer block positions) followed by a row
of disentanglers on bond pairs (2i+1, 2i+2) with periodic wrap. With
``drop_top_disentanglers`` the disentangler row right under the top tensor is
omitted. A bond carries log2(chi) qubits; for chi=4 each block is the depth-2
brick wall (0,1),(2,3) then (1,2); for chi=2 each block is one gate.

Wires are numbered by the output site they end on, so wire ``w`` is site ``w``.
Each gate carries six angles, in order: two R_Z before, theta of U_XX, alpha
of U_YY, two R_Z after.
"""

from __future__ import annotations

import json
import math
from collections.abc import Mapping
from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np

from qmera.tensors import ContractionPlan, Tensor, contract, contract_with_environments, plan_greedy

LAYOUT_VERSION = "qmera-binary-bw2/1"
PARAMS_PER_GATE = 6
GATE_FIELDS = ("pre_z0", "pre_z1", "theta_xx", "alpha_yy", "post_z0", "post_z1")

I2 = np.eye(2, dtype=np.complex128)
X = np.array([[0, 1], [1, 0]], dtype=np.complex128)
Y = np.array([[0, -1j], [1j, 0]], dtype=np.complex128)
Z = np.array([[1, 0], [0, -1]], dtype=np.complex128)
PAULI = {"I": I2, "X": X, "Y": Y, "Z": Z}
XX = np.kron(X, X)
YY = np.kron(Y, Y)
ZZ = np.kron(Z, Z)
ZI = np.kron(Z, I2)
IZ = np.kron(I2, Z)


@dataclass(frozen=True)
class MeraConfig:
    """Size and couplings of a qMERA for the transverse-field Ising chain."""

    L: int
    chi: int = 4
    J: float = 1.0
    h: float = 1.0
    drop_top_disentanglers: bool = False

    def __post_init__(self) -> None:
        if self.L < 8 or self.L & (self.L - 1):
            raise ValueError(f"L must be a power of two >= 8, got {self.L}")
        if self.chi not in (2, 4):
            raise ValueError(f"chi must be 2 or 4, got {self.chi}")

    @property
    def qubits_per_bond(self) -> int:
        return int(math.log2(self.chi))

    @property
    def n_bonds(self) -> int:
        return self.L // self.qubits_per_bond

    def to_dict(self) -> dict:
        return {
            "L": self.L,
            "chi": self.chi,
            "J": self.J,
            "h": self.h,
            "drop_top_disentanglers": self.drop_top_disentanglers,
        }


@dataclass(frozen=True)
class TwoQubitGateParams:
    pre_z: tuple[float, float] = (0.0, 0.0)
    theta_xx: float = 0.0
    alpha_yy: float = 0.0
    post_z: tuple[float, float] = (0.0, 0.0)

    @classmethod
    def from_vector(cls, v) -> TwoQubitGateParams:
        v = [float(x) for x in v]
        return cls((v[0], v[1]), v[2], v[3], (v[4], v[5]))

    def to_vector(self) -> np.ndarray:
        return np.array([*self.pre_z, self.theta_xx, self.alpha_yy, *self.post_z])


def rz(phi: float) -> np.ndarray:
    return np.diag([np.exp(-0.5j * phi), np.exp(0.5j * phi)])


def pauli_rotation(generator: np.ndarray, angle: float) -> np.ndarray:
    """exp(-i angle/2 P) for an involutory generator P."""
    return math.cos(angle / 2) * np.eye(generator.shape[0]) - 1j * math.sin(angle / 2) * generator


def _factors(v) -> list[np.ndarray]:
    # circuit order: pre R_Z pair, U_XX, U_YY, post R_Z pair
    return [
        np.kron(rz(v[0]), rz(v[1])),
        pauli_rotation(XX, v[2]),
        pauli_rotation(YY, v[3]),
        np.kron(rz(v[4]), rz(v[5])),
    ]


def gate_unitary(g: TwoQubitGateParams | np.ndarray) -> np.ndarray:
    """4x4 unitary (R_Z x R_Z)(post) U_YY(alpha) U_XX(theta) (R_Z x R_Z)(pre).

    Basis order is |q0 q1> with q0 the most significant bit.
    """
    v = g.to_vector() if isinstance(g, TwoQubitGateParams) else np.asarray(g, dtype=float)
    f = _factors(v)
    return f[3] @ f[2] @ f[1] @ f[0]


_GENERATORS = (ZI, IZ, XX, YY, ZI, IZ)
_FACTOR_OF = (0, 0, 1, 2, 3, 3)


def gate_derivatives(v) -> np.ndarray:
    """d U / d v_p for the six angles, shape (6, 4, 4)."""
    f = _factors(v)
    out = np.empty((PARAMS_PER_GATE, 4, 4), dtype=np.complex128)
    for p in range(PARAMS_PER_GATE):
        k = _FACTOR_OF[p]
        df = -0.5j * _GENERATORS[p] @ f[k]
        mats = list(f)
        mats[k] = df
        out[p] = mats[3] @ mats[2] @ mats[1] @ mats[0]
    return out


@dataclass(frozen=True)
class GateSlot:
    """One two-qubit gate of the network, in global circuit-time order."""

    index: int
    wires: tuple[int, int]
    offset: int
    block: int


@dataclass(frozen=True)
class Block:
    kind: str  # "top" | "isometry" | "disentangler"
    layer: int
    level: int  # number of bonds at the level this block writes to
    bonds: tuple[int, ...]
    wires: tuple[int, ...]
    fresh: tuple[int, ...]
    gates: tuple[int, ...]


@dataclass(frozen=True)
class MeraLayout:
    config: MeraConfig
    blocks: tuple[Block, ...]
    gates: tuple[GateSlot, ...]
    n_params: int
    first_gate: tuple[int, ...]  # per wire, index of the gate that first touches it

    @property
    def n_layers(self) -> int:
        return max(b.layer for b in self.blocks) + 1

    def param_index(self) -> list[tuple[int, str]]:
        """Flat parameter position -> (gate index, field name)."""
        return [(g.index, GATE_FIELDS[p]) for g in self.gates for p in range(PARAMS_PER_GATE)]


def _brick_wall(pos: list[int]) -> list[tuple[int, int]]:
    if len(pos) == 2:
        return [(pos[0], pos[1])]
    return [(pos[0], pos[1]), (pos[2], pos[3]), (pos[1], pos[2])]


@lru_cache(maxsize=32)
def mera_layout(config: MeraConfig) -> MeraLayout:
    q = config.qubits_per_bond
    raw_blocks: list[tuple[str, int, int, tuple, list[int], list[int]]] = []
    slots = list(range(2 * q))
    n_wires = 2 * q
    raw_blocks.append(("top", 0, 2, (0, 1), list(slots), list(slots)))
    n, layer = 2, 0
    while n < config.n_bonds:
        layer += 1
        new: list[int] = []
        for i in range(n):
            inp = slots[i * q : (i + 1) * q]
            fresh = list(range(n_wires, n_wires + q))
            n_wires += q
            pos = [fresh[0], inp[0], inp[1], fresh[1]] if q == 2 else [inp[0], fresh[0]]
            raw_blocks.append(("isometry", layer, 2 * n, (2 * i, 2 * i + 1), pos, fresh))
            new += pos
        slots = new
        n *= 2
        if config.drop_top_disentanglers and n == 4:
            continue
        for i in range(n // 2):
            a, b = 2 * i + 1, (2 * i + 2) % n
            pos = slots[a * q : (a + 1) * q] + slots[b * q : (b + 1) * q]
            raw_blocks.append(("disentangler", layer, n, (a, b), pos, []))
    assert n_wires == config.L and len(slots) == config.L
    # rename wires after the output site they end on
    site_of = {w: s for s, w in enumerate(slots)}
    blocks, gates = [], []
    for kind, lay, level, bonds, pos, fresh in raw_blocks:
        pos = [site_of[w] for w in pos]
        idx = []
        for a, b in _brick_wall(pos):
            gates.append(GateSlot(len(gates), (a, b), PARAMS_PER_GATE * len(gates), len(blocks)))
            idx.append(len(gates) - 1)
        blocks.append(Block(kind, lay, level, bonds, tuple(pos), tuple(site_of[w] for w in fresh), tuple(idx)))
    first = [-1] * config.L
    for g in gates:
        for w in g.wires:
            if first[w] < 0:
                first[w] = g.index
    return MeraLayout(config, tuple(blocks), tuple(gates), PARAMS_PER_GATE * len(gates), tuple(first))


def n_params(config: MeraConfig) -> int:
    return mera_layout(config).n_params


@dataclass(frozen=True, eq=False)
class MeraNetwork:
    layout: MeraLayout
    params: np.ndarray
    _unitaries: list = field(default=None, repr=False, compare=False)

    def __post_init__(self) -> None:
        p = np.array(self.params, dtype=float)
        if p.shape != (self.layout.n_params,):
            raise ValueError(f"expected {self.layout.n_params} parameters, got {p.shape}")
        p.flags.writeable = False
        object.__setattr__(self, "params", p)
        object.__setattr__(self, "_unitaries", [None] * len(self.layout.gates))

    @property
    def config(self) -> MeraConfig:
        return self.layout.config

    @property
    def blocks(self) -> tuple[Block, ...]:
        return self.layout.blocks

    @property
    def gates(self) -> tuple[GateSlot, ...]:
        return self.layout.gates

    def gate_params(self, gate: int) -> TwoQubitGateParams:
        o = self.layout.gates[gate].offset
        return TwoQubitGateParams.from_vector(self.params[o : o + PARAMS_PER_GATE])

    def unitary(self, gate: int) -> np.ndarray:
        u = self._unitaries[gate]
        if u is None:
            o = self.layout.gates[gate].offset
            u = gate_unitary(self.params[o : o + PARAMS_PER_GATE])
            self._unitaries[gate] = u
        return u

    def with_params(self, params) -> MeraNetwork:
        return MeraNetwork(self.layout, params)


def build_mera(config: MeraConfig, params=None) -> MeraNetwork:
    """Assemble the network; ``params`` defaults to all zeros."""
    layout = mera_layout(config)
    if params is None:
        params = np.zeros(layout.n_params)
    return MeraNetwork(layout, params)


def random_params(config: MeraConfig, rng: np.random.Generator | int | None = None, scale: float = math.pi) -> np.ndarray:
    rng = np.random.default_rng(rng)
    return rng.uniform(-scale, scale, n_params(config))


# ---------------------------------------------------------------- causal cones


@dataclass(frozen=True)
class CausalCone:
    """Gates that can influence a set of output sites, with wire timing.

    ``injections[w]`` is the first cone gate on wire ``w`` (where it enters in
    |0>); ``exits[w]`` is the last cone gate on a non-target wire, after which
    the wire leaves the cone.
    """

    sites: tuple[int, ...]
    gates: tuple[int, ...]
    wires: tuple[int, ...]
    injections: Mapping[int, int]
    exits: Mapping[int, int]

    @property
    def width(self) -> int:
        return len(self.wires)


@lru_cache(maxsize=4096)
def _cone(layout: MeraLayout, sites: tuple[int, ...]) -> CausalCone:
    live = set(sites)
    picked = []
    for g in reversed(layout.gates):
        a, b = g.wires
        if a in live or b in live:
            live.update(g.wires)
            picked.append(g.index)
    picked.reverse()
    inj: dict[int, int] = {}
    last: dict[int, int] = {}
    for gi in picked:
        for w in layout.gates[gi].wires:
            inj.setdefault(w, gi)
            last[w] = gi
    target = set(sites)
    exits = {w: t for w, t in sorted(last.items()) if w not in target}
    return CausalCone(tuple(sites), tuple(picked), tuple(sorted(live)), dict(sorted(inj.items())), exits)


def causal_cone(net: MeraNetwork | MeraLayout, sites) -> CausalCone:
    layout = net.layout if isinstance(net, MeraNetwork) else net
    sites = tuple(sorted({int(s) for s in sites}))
    if not sites:
        raise ValueError("causal cone of an empty site set")
    if sites[0] < 0 or sites[-1] >= layout.config.L:
        raise ValueError(f"sites out of range [0, {layout.config.L})")
    return _cone(layout, sites)


def pair_for_distance(net: MeraNetwork | MeraLayout, r: int) -> tuple[int, int]:
    """Sites (j, j + r mod L) whose joint causal cone is narrowest.

    A finite MERA is not translation invariant, so the placement matters;
    ties go to the smallest j.
    """
    layout = net.layout if isinstance(net, MeraNetwork) else net
    L = layout.config.L
    if not 0 < r < L:
        raise ValueError(f"distance must lie in (0, {L}), got {r}")
    best = min(range(L), key=lambda j: (_cone(layout, tuple(sorted((j, (j + r) % L)))).width, j))
    return best, (best + r) % L


# ------------------------------------------------------- cone tensor networks


@dataclass(frozen=True)
class _ConeNetwork:
    """Label structure of <psi| O |psi> restricted to a cone."""

    cone: CausalCone
    sites: tuple[int, ...]  # operator legs, in operator order
    zero_labels: tuple  # one |0> vector per cone wire, ket then bra
    ket_gates: tuple  # (gate index, labels)
    bra_gates: tuple
    op_labels: tuple
    plan: ContractionPlan


@lru_cache(maxsize=4096)
def _cone_network(layout: MeraLayout, sites: tuple[int, ...]) -> _ConeNetwork:
    cone = causal_cone(layout, sites)
    seg = {w: 0 for w in cone.wires}
    zero_labels, ket, bra = [], [], []
    for w in cone.wires:
        zero_labels.append((("k", w, 0),))
    for gi in cone.gates:
        a, b = layout.gates[gi].wires
        ins = (("k", a, seg[a]), ("k", b, seg[b]))
        seg[a] += 1
        seg[b] += 1
        outs = (("k", a, seg[a]), ("k", b, seg[b]))
        ket.append((gi, outs + ins))
    target = set(sites)

    def bra_label(lab):
        _, w, s = lab
        # traced wires end on the same label in ket and bra
        if s == seg[w] and w not in target:
            return lab
        return ("b", w, s)

    for w in cone.wires:
        zero_labels.append((bra_label(("k", w, 0)),))
    for gi, labs in ket:
        bra.append((gi, tuple(bra_label(lb) for lb in labs)))
    op_labels = tuple(("b", w, seg[w]) for w in sites) + tuple(("k", w, seg[w]) for w in sites)
    structure = [(lb, (2,)) for lb in zero_labels]
    structure += [(lb, (2, 2, 2, 2)) for _, lb in ket]
    structure += [(lb, (2, 2, 2, 2)) for _, lb in bra]
    structure.append((op_labels, (2,) * len(op_labels)))
    plan = plan_greedy(structure)
    return _ConeNetwork(cone, tuple(sites), tuple(zero_labels), tuple(ket), tuple(bra), op_labels, plan)


_ZERO = np.array([1.0, 0.0], dtype=np.complex128)


def _network_tensors(net: MeraNetwork, cn: _ConeNetwork, op: np.ndarray) -> list[Tensor]:
    ts = [Tensor(_ZERO, lb) for lb in cn.zero_labels]
    ts += [Tensor(net.unitary(gi).reshape(2, 2, 2, 2), lb) for gi, lb in cn.ket_gates]
    ts += [Tensor(net.unitary(gi).conj().reshape(2, 2, 2, 2), lb) for gi, lb in cn.bra_gates]
    n = len(cn.sites)
    ts.append(Tensor(np.asarray(op, dtype=np.complex128).reshape((2,) * (2 * n)), cn.op_labels))
    return ts


def operator_value(net: MeraNetwork, sites, op: np.ndarray) -> complex:
    """<psi| op |psi> for a dense operator on ``sites`` (kron order as given)."""
    sites = tuple(int(s) for s in sites)
    order = tuple(sorted(sites))
    if order != sites:
        op = _permute_operator(op, sites, order)
    cn = _cone_network(net.layout, order)
    value, _ = _contract_value(net, cn, op, need_env=False)
    return value


def _permute_operator(op: np.ndarray, sites: tuple, order: tuple) -> np.ndarray:
    n = len(sites)
    t = np.asarray(op).reshape((2,) * (2 * n))
    perm = [sites.index(s) for s in order]
    return t.transpose(perm + [n + p for p in perm]).reshape(2**n, 2**n)


def _contract_value(net, cn, op, need_env):

    ts = _network_tensors(net, cn, op)
    if not need_env:
        return complex(contract(ts, cn.plan).data), None
    return contract_with_environments(ts, cn.plan)


def parse_pauli(obs) -> dict[int, str]:
    """Accept ``{site: "X"}`` or a string such as ``"X3 X7"``."""
    if isinstance(obs, str):
        out = {}
        for tok in obs.split():
            p, s = tok[0].upper(), int(tok[1:])
            if s in out:
                raise ValueError(f"site {s} repeated in {obs!r}")
            out[s] = p
        obs = out
    obs = {int(s): str(p).upper() for s, p in dict(obs).items()}
    if any(p not in PAULI for p in obs.values()):
        raise ValueError(f"not a Pauli string: {obs}")
    return {s: p for s, p in obs.items() if p != "I"}


def expect_local(net: MeraNetwork, obs) -> float:
    """Expectation of a Pauli string on at most four sites, via its causal cone."""
    terms = parse_pauli(obs)
    if len(terms) > 4:
        raise ValueError(f"observable acts on {len(terms)} sites, at most 4 are supported")
    if not terms:
        return 1.0
    sites = tuple(sorted(terms))
    op = np.array([[1.0]], dtype=np.complex128)
    for s in sites:
        op = np.kron(op, PAULI[terms[s]])
    value = operator_value(net, sites, op)
    if abs(value.imag) > 1e-8:
        raise ArithmeticError(f"non-real expectation value {value}")
    return float(value.real)


def reduced_density_matrix(net: MeraNetwork, sites) -> np.ndarray:
    """Reduced state on ``sites`` (sorted), assembled from Pauli expectations."""
    sites = tuple(sorted(int(s) for s in sites))
    n = len(sites)
    rho = np.zeros((2**n, 2**n), dtype=np.complex128)
    for labels in np.ndindex(*(4,) * n):
        op = np.array([[1.0]], dtype=np.complex128)
        for k in labels:
            op = np.kron(op, PAULI["IXYZ"[k]])
        rho += operator_value(net, sites, op) * op
    return rho / 2**n


def bond_term(config: MeraConfig) -> np.ndarray:
    """Local energy term on sites (j, j+1): -J X X - h Z_j."""
    return -config.J * XX - config.h * ZI


def energy_windows(config: MeraConfig) -> list[tuple[int, int]]:
    """Site pairs (j, j+1 mod L) for which one local term is evaluated."""
    return [(j, (j + 1) % config.L) for j in range(config.L)]


def energy(net: MeraNetwork) -> float:
    """<H> with periodic wrap, one causal-cone contraction per local term."""
    term = bond_term(net.config)
    total = 0.0
    for j, k in energy_windows(net.config):
        total += operator_value(net, (j, k), term).real
    return float(total)


def energy_and_gradient(net: MeraNetwork) -> tuple[float, np.ndarray]:
    """Energy and its exact gradient from the environments of every gate."""
    term = bond_term(net.config)
    layout = net.layout
    envs = np.zeros((len(layout.gates), 4, 4), dtype=np.complex128)
    total = 0.0
    for j, k in energy_windows(net.config):
        sites = (j, k)
        op = term
        order = tuple(sorted(sites))
        if order != sites:
            op = _permute_operator(op, sites, order)
        cn = _cone_network(layout, order)
        value, env = _contract_value(net, cn, op, need_env=True)
        total += value.real
        nz = len(cn.zero_labels)
        nk = len(cn.ket_gates)
        for t, (gi, _) in enumerate(cn.ket_gates):
            envs[gi] += env[nz + t].reshape(4, 4)
        for t, (gi, _) in enumerate(cn.bra_gates):
            envs[gi] += env[nz + nk + t].reshape(4, 4).conj()
    grad = np.zeros(layout.n_params)
    for g in layout.gates:
        o = g.offset
        d = gate_derivatives(net.params[o : o + PARAMS_PER_GATE])
        # bra copies contribute the complex conjugate of the ket copies
        grad[o : o + PARAMS_PER_GATE] = np.einsum("ij,pij->p", envs[g.index], d).real
    return float(total), grad


# ---------------------------------------------------------- dense reference


def statevector(net: MeraNetwork) -> np.ndarray:
    """Full output state (site 0 most significant); only for small L."""
    L = net.config.L
    if L > 20:
        raise ValueError("dense statevector limited to L <= 20")
    psi = np.zeros((2,) * L, dtype=np.complex128)
    psi[(0,) * L] = 1.0
    for g in net.gates:
        a, b = g.wires
        u = net.unitary(g.index).reshape(2, 2, 2, 2)
        psi = np.tensordot(u, psi, axes=([2, 3], [a, b]))
        psi = np.moveaxis(psi, [0, 1], [a, b])
    return psi.reshape(-1)


# ------------------------------------------------------------ serialization


def network_to_json(net: MeraNetwork, extra: dict | None = None) -> str:
    layout = net.layout
    doc = dict(extra or {})
    doc |= {
        "layout_version": LAYOUT_VERSION,
        "config": net.config.to_dict(),
        "param_index": [
            {"gate": g.index, "block": g.block, "kind": layout.blocks[g.block].kind, "wires": list(g.wires), "offset": g.offset}
            for g in layout.gates
        ],
        "fields": list(GATE_FIELDS),
        "params": [float(x).hex() for x in net.params],
    }
    return json.dumps(doc, indent=1)


def network_from_json(text: str) -> MeraNetwork:
    doc = json.loads(text)
    if doc.get("layout_version") != LAYOUT_VERSION:
        raise ValueError(f"unsupported layout version {doc.get('layout_version')!r}")
    config = MeraConfig(**doc["config"])
    net = build_mera(config, [float.fromhex(x) for x in doc["params"]])
    for rec, g in zip(doc["param_index"], net.gates):
        if tuple(rec["wires"]) != g.wires or rec["offset"] != g.offset:
            raise ValueError(f"gate {g.index} wiring does not match layout {LAYOUT_VERSION}")
    return net
