"""Qubit-reuse compilation: measure early, reset, and hand the qubit to a later wire.

Logical wires are the qubits of the input circuit. A wire becomes active at
its first op and is released by its final MEASZ. Reuse modes:

* ``none``: the circuit is returned untouched.
* ``greedy``: repeatedly pick the pending measurement whose unexecuted past
  needs the fewest wires that are not active yet (ties: earliest measurement,
  then lowest wire), run that past in program order, and recycle released
  qubits. The resulting width is the peak number of active wires.
* ``cap(W)``: run in program order and only fall back to a greedy step when
  an activation would make greedy completion exceed W active wires. New
  physical qubits are used while capacity remains; otherwise the qubit freed
  earliest is recycled, which keeps the circuit shallow.
"""

from __future__ import annotations

import csv
import io
import re
from dataclasses import dataclass

from qmera.circuits import Circuit, Op
from qmera.simulator import run_noiseless


@dataclass(frozen=True)
class Tenancy:
    physical: int
    start: int  # index in the compiled op list of the wire's first op
    stop: int  # index of its last op


@dataclass(frozen=True)
class CompiledCircuit:
    circuit: Circuit
    mode: str
    width: int
    mapping: dict[int, tuple[Tenancy, ...]]
    peak_active: int

    @property
    def n_resets(self) -> int:
        return sum(op.name == "RESET" for op in self.circuit.ops)


def parse_mode(mode: str) -> tuple[str, int | None]:
    if mode in ("none", "greedy"):
        return mode, None
    m = re.fullmatch(r"cap\((\d+)\)|cap(\d+)", mode)
    if m:
        return "cap", int(m.group(1) or m.group(2))
    raise ValueError(f"unknown reuse mode {mode!r}; expected none, greedy or cap(W)")


class _Dag:
    """Static structure: per-op wire sets and ancestor closures of measurements."""

    def __init__(self, c: Circuit) -> None:
        self.c = c
        ops = c.ops
        self.n = len(ops)
        last: dict[int, int] = {}
        self.prev: list[tuple[int, ...]] = []
        for k, op in enumerate(ops):
            self.prev.append(tuple(last[q] for q in op.qubits if q in last))
            for q in op.qubits:
                last[q] = k
        self.first_op = {}
        for k, op in enumerate(ops):
            for q in op.qubits:
                self.first_op.setdefault(q, k)
        self.final_meas = {}
        for k, op in enumerate(ops):
            if op.name == "MEASZ":
                self.final_meas[op.qubits[0]] = k
            elif op.name == "RESET":
                raise ValueError("input circuit already contains RESET ops")
        self.targets = sorted(self.final_meas.values())
        self.anc_ops: dict[int, list[int]] = {}
        self.anc_mask: dict[int, int] = {}
        for t in self.targets:
            seen = {t}
            stack = [t]
            while stack:
                for p in self.prev[stack.pop()]:
                    if p not in seen:
                        seen.add(p)
                        stack.append(p)
            order = sorted(seen)
            self.anc_ops[t] = order
            mask = 0
            for k in order:
                for q in ops[k].qubits:
                    mask |= 1 << q
            self.anc_mask[t] = mask


@dataclass
class _State:
    done: bytearray
    active: int  # bitmask of active wires
    started: int  # bitmask of wires that have been activated at some point
    n_active: int
    peak: int
    pending: list[int]  # unexecuted measurement targets

    def copy(self) -> _State:
        return _State(bytearray(self.done), self.active, self.started, self.n_active, self.peak, list(self.pending))


def _fresh(dag: _Dag, st: _State, t: int) -> int:
    return bin(dag.anc_mask[t] & ~st.started).count("1")


def _pick(dag: _Dag, st: _State) -> int:
    return min(st.pending, key=lambda t: (_fresh(dag, st, t), t, dag.c.ops[t].qubits[0]))


def _execute(dag: _Dag, st: _State, k: int, emit=None) -> None:
    op = dag.c.ops[k]
    for q in op.qubits:
        if not st.started >> q & 1:
            st.started |= 1 << q
            st.active |= 1 << q
            st.n_active += 1
            st.peak = max(st.peak, st.n_active)
            if emit:
                emit("inject", q)
    st.done[k] = 1
    if emit:
        emit("op", k)
    if op.name == "MEASZ" and dag.final_meas.get(op.qubits[0]) == k:
        st.active &= ~(1 << op.qubits[0])
        st.n_active -= 1
        st.pending.remove(k)
        if emit:
            emit("release", op.qubits[0])


def _greedy_step(dag: _Dag, st: _State, emit=None) -> None:
    t = _pick(dag, st)
    for k in dag.anc_ops[t]:
        if not st.done[k]:
            _execute(dag, st, k, emit)


def _finish_greedy(dag: _Dag, st: _State, emit=None) -> None:
    while st.pending:
        _greedy_step(dag, st, emit)
    for k in range(dag.n):
        if not st.done[k]:
            _execute(dag, st, k, emit)


def _greedy_peak(dag: _Dag, st: _State) -> int:
    sim = st.copy()
    sim.peak = sim.n_active
    _finish_greedy(dag, sim)
    return sim.peak


def _initial(dag: _Dag) -> _State:
    return _State(bytearray(dag.n), 0, 0, 0, 0, list(dag.targets))


class _Emitter:
    """Builds the physical circuit while the scheduler runs."""

    def __init__(self, c: Circuit, cap: int | None) -> None:
        self.c = c
        self.cap = cap
        self.ops: list[Op] = []
        self.phys: dict[int, int] = {}
        self.free: list[int] = []  # in order of release
        self.n_phys = 0
        self.used: set[int] = set()
        self.first: dict[int, int] = {}
        self.last: dict[int, int] = {}

    def __call__(self, kind: str, x: int) -> None:
        if kind == "inject":
            if self.cap is not None and self.n_phys < self.cap:
                p = self._new()
            elif self.free:
                p = self.free.pop(0)
            else:
                p = self._new()
            if p in self.used:
                self.ops.append(Op("RESET", (p,)))
            self.used.add(p)
            self.phys[x] = p
        elif kind == "op":
            op = self.c.ops[x]
            self.ops.append(Op(op.name, tuple(self.phys[q] for q in op.qubits), op.params, op.cbit))
            for q in op.qubits:
                self.first.setdefault(q, len(self.ops) - 1)
                self.last[q] = len(self.ops) - 1
        else:
            self.free.append(self.phys[x])

    def _new(self) -> int:
        self.n_phys += 1
        return self.n_phys - 1


def reuse_compile(c: Circuit, mode: str = "greedy") -> CompiledCircuit:
    kind, cap = parse_mode(mode)
    if kind == "none":
        mapping = {}
        for q in range(c.num_qubits):
            idx = [k for k, op in enumerate(c.ops) if q in op.qubits]
            if idx:
                mapping[q] = (Tenancy(q, idx[0], idx[-1]),)
        return CompiledCircuit(c, "none", c.num_qubits, mapping, c.num_qubits)
    dag = _Dag(c)
    st = _initial(dag)
    if kind == "greedy":
        em = _Emitter(c, None)
        _finish_greedy(dag, st, em)
    else:
        need = _greedy_peak(dag, st)
        if cap < need:
            raise ValueError(f"cap({cap}) is below the greedy minimum width of {need}")
        em = _Emitter(c, cap)
        k = 0
        while k < dag.n:
            if st.done[k]:
                k += 1
                continue
            op = c.ops[k]
            fresh = [q for q in op.qubits if not st.started >> q & 1]
            if fresh:
                trial = st.copy()
                _execute(dag, trial, k)
                if trial.n_active > cap or _greedy_peak(dag, trial) > cap:
                    _greedy_step(dag, st, em)
                    continue
            _execute(dag, st, k, em)
            k += 1
    labels = tuple(f"q{p}" for p in range(em.n_phys))
    out = Circuit(em.n_phys, tuple(em.ops), c.cbits, labels)
    mapping = {q: (Tenancy(em.phys[q], em.first[q], em.last[q]),) for q in sorted(em.phys)}
    return CompiledCircuit(out, mode, em.n_phys, mapping, st.peak)


def depth2q(c: Circuit) -> int:
    """Longest chain of two-qubit gates through the qubit-dependency DAG."""
    depth = [0] * c.num_qubits
    for op in c.ops:
        if op.is_two_qubit:
            d = max(depth[q] for q in op.qubits) + 1
            for q in op.qubits:
                depth[q] = d
    return max(depth, default=0)


def active_profile(c: Circuit) -> list[int]:
    """Number of occupied qubits after each op (a qubit is occupied from its
    first use until its final measurement or next RESET)."""
    occupied: set[int] = set()
    measured: set[int] = set()
    out = []
    for op in c.ops:
        if op.name == "RESET":
            measured.discard(op.qubits[0])
            occupied.discard(op.qubits[0])
        elif op.name == "MEASZ":
            measured.add(op.qubits[0])
        else:
            for q in op.qubits:
                occupied.add(q)
        out.append(len(occupied))
    return out


@dataclass(frozen=True)
class EquivalenceCheck:
    status: str  # equal | different | skipped
    tv_distance: float | None = None
    message: str = ""

    def __bool__(self) -> bool:
        return self.status == "equal"


def total_variation(p: dict, q: dict) -> float:
    keys = set(p) | set(q)
    return 0.5 * sum(abs(p.get(k, 0.0) - q.get(k, 0.0)) for k in keys)


def simulate_equivalence_check(
    original: Circuit, compiled: CompiledCircuit | Circuit, max_qubits: int = 14, tol: float = 1e-9
) -> EquivalenceCheck:
    """Compare exact classical-outcome distributions of two circuits."""
    other = compiled.circuit if isinstance(compiled, CompiledCircuit) else compiled
    if original.num_qubits > max_qubits or other.num_qubits > max_qubits:
        return EquivalenceCheck("skipped", None, f"dense check limited to {max_qubits} physical qubits")
    if [b.role for b in original.cbits] != [b.role for b in other.cbits]:
        return EquivalenceCheck("different", 1.0, "classical registers differ")
    tv = total_variation(run_noiseless(original).distribution(), run_noiseless(other).distribution())
    return EquivalenceCheck("equal" if tv < tol else "different", tv)


@dataclass(frozen=True)
class ResourceStats:
    distance: int
    width_no_reuse: int
    width_greedy: int
    width_cap: int | None
    depth_no_reuse: int
    depth_greedy: int
    depth_cap: int | None
    cap: int = 20
    two_qubit_gates: int = 0


def resource_stats(c: Circuit, distance: int, cap: int = 20) -> ResourceStats:
    greedy = reuse_compile(c, "greedy")
    try:
        capped = reuse_compile(c, f"cap({cap})")
    except ValueError:
        capped = None
    return ResourceStats(
        distance=distance,
        width_no_reuse=c.num_qubits,
        width_greedy=greedy.width,
        width_cap=capped.width if capped else None,
        depth_no_reuse=depth2q(c),
        depth_greedy=depth2q(greedy.circuit),
        depth_cap=depth2q(capped.circuit) if capped else None,
        cap=cap,
        two_qubit_gates=c.two_qubit_count,
    )


def resource_csv(rows: list[ResourceStats]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    cap = rows[0].cap if rows else 20
    w.writerow(
        ["distance", "width_no_reuse", "width_greedy", f"width_cap{cap}", "depth_no_reuse", "depth_greedy", f"depth_cap{cap}", "two_qubit_gates"]
    )
    for r in rows:
        w.writerow(
            [r.distance, r.width_no_reuse, r.width_greedy, "" if r.width_cap is None else r.width_cap,
             r.depth_no_reuse, r.depth_greedy, "" if r.depth_cap is None else r.depth_cap, r.two_qubit_gates]
        )
    return buf.getvalue()
