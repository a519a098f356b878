"""Gate-level circuit IR, cone lowering, the XX measurement gadget and ZNE folding.

Native gates: RZ(phi) = exp(-i phi/2 Z), U_XX(theta) = exp(-i theta/2 XX),
U_YY and U_ZZ likewise, plus H and CX for the ancilla gadget. Two-qubit
matrices use the ordering |q0 q1> with the first listed qubit most significant.
"""

from __future__ import annotations

import json
import math
from dataclasses import InitVar, dataclass, field, replace

import numpy as np

from qmera import mera
from qmera.mera import CausalCone, MeraNetwork

ONE_QUBIT = ("RZ", "H", "RESET", "MEASZ")
TWO_QUBIT = ("UXX", "UYY", "UZZ", "CX")
ENTANGLERS = ("UXX", "UYY", "UZZ")
ROLES = ("cone_exit", "site_z", "xx_ancilla")
FORMAT = "qmera-circuit/1"

_H = np.array([[1, 1], [1, -1]], dtype=np.complex128) / math.sqrt(2)
_CX = np.array([[1, 0, 0, 0], [0, 1, 0, 0], [0, 0, 0, 1], [0, 0, 1, 0]], dtype=np.complex128)
_GEN = {"UXX": mera.XX, "UYY": mera.YY, "UZZ": mera.ZZ}


@dataclass(frozen=True)
class Op:
    name: str
    qubits: tuple[int, ...]
    params: tuple[float, ...] = ()
    cbit: int | None = None

    def __post_init__(self) -> None:
        object.__setattr__(self, "qubits", tuple(int(q) for q in self.qubits))
        object.__setattr__(self, "params", tuple(float(p) for p in self.params))
        arity = 1 if self.name in ONE_QUBIT else 2 if self.name in TWO_QUBIT else None
        if arity is None:
            raise ValueError(f"unknown op {self.name!r}")
        if len(self.qubits) != arity or len(set(self.qubits)) != arity:
            raise ValueError(f"{self.name} needs {arity} distinct qubits, got {self.qubits}")
        n_par = 1 if self.name in ("RZ",) + ENTANGLERS else 0
        if len(self.params) != n_par:
            raise ValueError(f"{self.name} takes {n_par} parameter(s)")
        if (self.cbit is None) != (self.name != "MEASZ"):
            raise ValueError("exactly the MEASZ ops carry a classical bit")

    @property
    def is_two_qubit(self) -> bool:
        return self.name in TWO_QUBIT

    def matrix(self) -> np.ndarray:
        if self.name == "RZ":
            return mera.rz(self.params[0])
        if self.name == "H":
            return _H
        if self.name == "CX":
            return _CX
        if self.name in _GEN:
            return mera.pauli_rotation(_GEN[self.name], self.params[0])
        raise ValueError(f"{self.name} is not unitary")


@dataclass(frozen=True)
class ClassicalBit:
    role: str
    label: str

    def __post_init__(self) -> None:
        if self.role not in ROLES:
            raise ValueError(f"unknown role {self.role!r}")


@dataclass(frozen=True)
class Circuit:
    """Immutable op list over ``num_qubits`` wires.

    ``wire_labels[q]`` names what wire ``q`` carries (a MERA site, or
    ``"anc"``). A measured wire may only be touched again after a RESET;
    ``strict=False`` skips that check (for mutation tests of the tooling).
    """

    num_qubits: int
    ops: tuple[Op, ...]
    cbits: tuple[ClassicalBit, ...] = ()
    wire_labels: tuple = field(default=())
    strict: InitVar[bool] = True

    def __post_init__(self, strict: bool = True) -> None:
        object.__setattr__(self, "ops", tuple(self.ops))
        object.__setattr__(self, "cbits", tuple(self.cbits))
        labels = tuple(self.wire_labels) or tuple(range(self.num_qubits))
        if len(labels) != self.num_qubits:
            raise ValueError("one wire label per qubit")
        object.__setattr__(self, "wire_labels", labels)
        measured: set[int] = set()
        written: set[int] = set()
        for k, op in enumerate(self.ops):
            if any(not 0 <= q < self.num_qubits for q in op.qubits):
                raise ValueError(f"op {k} ({op.name}) references a qubit outside [0, {self.num_qubits})")
            if op.name == "RESET":
                measured.discard(op.qubits[0])
                continue
            hit = measured.intersection(op.qubits)
            if hit and strict:
                raise ValueError(f"op {k} ({op.name}) touches measured qubit {sorted(hit)} without a RESET")
            if op.name == "MEASZ":
                if not 0 <= op.cbit < len(self.cbits):
                    raise ValueError(f"op {k} writes undeclared classical bit {op.cbit}")
                if op.cbit in written:
                    raise ValueError(f"classical bit {op.cbit} written twice")
                written.add(op.cbit)
                measured.add(op.qubits[0])
        if len(written) != len(self.cbits):
            raise ValueError("declared classical bits that are never written")

    # ---------------------------------------------------------------- queries

    @property
    def two_qubit_count(self) -> int:
        return sum(op.is_two_qubit for op in self.ops)

    def cbits_with_role(self, role: str) -> list[int]:
        return [i for i, b in enumerate(self.cbits) if b.role == role]

    def qubit_of(self, label) -> int:
        return self.wire_labels.index(label)

    def measured_qubits(self) -> set[int]:
        """Wires whose last non-RESET action is a measurement."""
        state: dict[int, bool] = {}
        for op in self.ops:
            if op.name == "RESET":
                state[op.qubits[0]] = False
            else:
                for q in op.qubits:
                    state[q] = op.name == "MEASZ"
        return {q for q, m in state.items() if m}

    def has_measurements(self) -> bool:
        return any(op.name in ("MEASZ", "RESET") for op in self.ops)

    def unitary(self) -> np.ndarray:
        """Dense unitary of a measurement-free circuit (small widths only)."""
        if self.has_measurements():
            raise ValueError("circuit contains non-unitary ops")
        if self.num_qubits > 12:
            raise ValueError("dense unitary limited to 12 qubits")
        n = self.num_qubits
        u = np.eye(2**n, dtype=np.complex128).reshape((2,) * n + (2**n,))
        for op in self.ops:
            u = _apply(u, op.matrix(), op.qubits)
        return u.reshape(2**n, 2**n)

    # ---------------------------------------------------------- serialization

    def to_jsonl(self, extra: dict | None = None) -> str:
        head = dict(extra or {})
        head |= {
            "format": FORMAT,
            "num_qubits": self.num_qubits,
            "cbits": [{"role": b.role, "label": b.label} for b in self.cbits],
            "wire_labels": list(self.wire_labels),
        }
        lines = [json.dumps(head, sort_keys=True)]
        for op in self.ops:
            rec = {
                "op": op.name,
                "qubits": list(op.qubits),
                "params": [float(p).hex() for p in op.params],
                "cbit": op.cbit,
                "role": self.cbits[op.cbit].role if op.cbit is not None else None,
            }
            lines.append(json.dumps(rec, sort_keys=True))
        return "\n".join(lines) + "\n"

    @classmethod
    def from_jsonl(cls, text: str) -> Circuit:
        lines = [ln for ln in text.splitlines() if ln.strip()]
        if not lines:
            raise ValueError("empty circuit file")
        head = json.loads(lines[0])
        if "num_qubits" not in head or head.get("format") != FORMAT:
            raise ValueError(f"unsupported circuit format {head.get('format')!r}")
        cbits = tuple(ClassicalBit(b["role"], b["label"]) for b in head["cbits"])
        ops = []
        for ln in lines[1:]:
            rec = json.loads(ln)
            op = Op(rec["op"], tuple(rec["qubits"]), tuple(float.fromhex(p) for p in rec["params"]), rec["cbit"])
            if op.cbit is not None and rec.get("role") != cbits[op.cbit].role:
                raise ValueError(f"role mismatch on classical bit {op.cbit}")
            ops.append(op)
        labels = tuple(tuple(x) if isinstance(x, list) else x for x in head["wire_labels"])
        return cls(head["num_qubits"], tuple(ops), cbits, labels)


def _apply(state: np.ndarray, mat: np.ndarray, qubits: tuple[int, ...]) -> np.ndarray:
    k = len(qubits)
    t = mat.reshape((2,) * (2 * k))
    out = np.tensordot(t, state, axes=(list(range(k, 2 * k)), list(qubits)))
    return np.moveaxis(out, list(range(k)), list(qubits))


# ------------------------------------------------------------------- lowering


def _gate_ops(net: MeraNetwork, gate: int, qa: int, qb: int) -> list[Op]:
    v = net.gate_params(gate).to_vector()
    return [
        Op("RZ", (qa,), (v[0],)),
        Op("RZ", (qb,), (v[1],)),
        Op("UXX", (qa, qb), (v[2],)),
        Op("UYY", (qa, qb), (v[3],)),
        Op("RZ", (qa,), (v[4],)),
        Op("RZ", (qb,), (v[5],)),
    ]


def lower(net: MeraNetwork, cone: CausalCone | tuple[int, ...]) -> Circuit:
    """Cone of ``net`` as a circuit with one wire per cone qubit.

    Wires start in |0>; each wire leaving the cone is measured (role
    ``cone_exit``) right after its last gate. The target sites stay open.
    """
    if not isinstance(cone, CausalCone):
        cone = mera.causal_cone(net, cone)
    qubit = {w: i for i, w in enumerate(cone.wires)}
    last_gate: dict[int, list[int]] = {}
    for w, gi in cone.exits.items():
        last_gate.setdefault(gi, []).append(w)
    ops: list[Op] = []
    cbits: list[ClassicalBit] = []
    for gi in cone.gates:
        a, b = net.gates[gi].wires
        ops += _gate_ops(net, gi, qubit[a], qubit[b])
        for w in last_gate.get(gi, []):
            ops.append(Op("MEASZ", (qubit[w],), cbit=len(cbits)))
            cbits.append(ClassicalBit("cone_exit", f"exit:{w}"))
    return Circuit(len(cone.wires), tuple(ops), tuple(cbits), tuple(cone.wires))


def lower_network(net: MeraNetwork) -> Circuit:
    """Whole network as a measurement-free circuit; wire ``i`` is site ``i``."""
    ops: list[Op] = []
    for g in net.gates:
        ops += _gate_ops(net, g.index, *g.wires)
    return Circuit(net.config.L, tuple(ops), (), tuple(range(net.config.L)))


def attach_gadget(c: Circuit, j, k) -> Circuit:
    """Append the ancilla-assisted X_j X_k measurement and Z readout of j, k.

    ``j`` and ``k`` are wire labels (MERA sites). The ancilla bit b gives the
    X_j X_k eigenvalue (-1)^b; the two ``site_z`` bits join the parity herald.
    """
    qj, qk = c.qubit_of(j), c.qubit_of(k)
    if qj == qk:
        raise ValueError("gadget needs two distinct sites")
    done = c.measured_qubits()
    if qj in done or qk in done:
        raise ValueError(f"site {j if qj in done else k} is already measured")
    anc = c.num_qubits
    nb = len(c.cbits)
    ops = list(c.ops) + [
        Op("H", (anc,)),
        Op("CX", (anc, qj)),
        Op("CX", (anc, qk)),
        Op("H", (anc,)),
        Op("MEASZ", (anc,), cbit=nb),
        Op("MEASZ", (qj,), cbit=nb + 1),
        Op("MEASZ", (qk,), cbit=nb + 2),
    ]
    cbits = list(c.cbits) + [
        ClassicalBit("xx_ancilla", "anc"),
        ClassicalBit("site_z", f"z:{j}"),
        ClassicalBit("site_z", f"z:{k}"),
    ]
    return Circuit(anc + 1, tuple(ops), tuple(cbits), tuple(c.wire_labels) + ("anc",))


# -------------------------------------------------------------------- folding


def _fold_entangler(op: Op, m: int) -> list[Op]:
    a = op.qubits[0]
    if op.name == "UZZ":
        # X_a U_ZZ(t) X_a = U_ZZ(-t); H RZ(-pi) H = iX and H RZ(pi) H = -iX
        pre = [Op("H", (a,)), Op("RZ", (a,), (-math.pi,)), Op("H", (a,))]
        post = [Op("H", (a,)), Op("RZ", (a,), (math.pi,)), Op("H", (a,))]
    else:
        # Z_a anticommutes with XX and YY; RZ(-pi) = iZ, RZ(pi) = -iZ
        pre = [Op("RZ", (a,), (-math.pi,))]
        post = [Op("RZ", (a,), (math.pi,))]
    out = [op]
    for _ in range((m - 1) // 2):
        out += pre + [op] + post + [op]
    return out


def fold_zne(c: Circuit, m: int) -> Circuit:
    """Scale two-qubit noise by ``m`` while keeping the logical circuit.

    Each entangler U(t) becomes U(t) [Z_1 U(t) Z_1 U(t)]^((m-1)/2), which is
    U(t) (U(-t) U(t))^((m-1)/2) = U(t). Gadget CX gates become CX^m.
    """
    if isinstance(m, bool) or int(m) != m or m < 1 or m % 2 == 0:
        raise ValueError(f"fold factor must be an odd positive integer, got {m}")
    m = int(m)
    ops: list[Op] = []
    for op in c.ops:
        if op.name in ENTANGLERS:
            ops += _fold_entangler(op, m)
        elif op.name == "CX":
            ops += [op] * m
        else:
            ops.append(op)
    return replace(c, ops=tuple(ops))
