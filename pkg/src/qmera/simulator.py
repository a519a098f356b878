"""Dense statevector execution with mid-circuit measurement, reset and noise.

Two backends:

* :func:`run_noiseless` gives exact outcome distributions by deferring every
  measurement. Each RESET retires the current wire and starts a fresh one, so
  nothing is ever collapsed.
* :func:`run_shots` samples trajectories in batches. Noise is inserted as
  random Paulis and every shot draws from its own RNG stream keyed by
  ``(seed, shot index)``, so results do not depend on the batch size.

Noise model: after each two-qubit gate, a two-qubit depolarizing channel
picks one of the 15 non-identity Paulis uniformly with probability p. The
average infidelity r of the gate is p0 + slope * a / (pi/2), where a is the
rotation angle folded to [0, pi/2] (gadget CX gates count as pi/2). For d = 4
the depolarizing probability is p = r (d + 1) / d = 5 r / 4. Idle qubits
dephase at ``idle_dephase_rate`` per time unit, and each two-qubit layer
takes 2 units. All strengths are multiplied by ``scale``.
"""

from __future__ import annotations

import csv
import hashlib
import io
import json
import math
from dataclasses import dataclass, field

import numpy as np

from qmera.circuits import ClassicalBit, Circuit, Op

DENSE_LIMIT = 24
LAYER_TIME = 2.0
_BATCH_BYTES = 1 << 27


@dataclass(frozen=True)
class NoiseModel:
    p0: float = 1e-4
    slope: float = 1.9e-3
    idle_dephase_rate: float = 1e-4 / 20
    scale: float = 1.0

    def __post_init__(self) -> None:
        for name in ("p0", "slope", "idle_dephase_rate", "scale"):
            v = getattr(self, name)
            if not (math.isfinite(v) and v >= 0):
                raise ValueError(f"noise parameter {name} must be finite and non-negative, got {v}")
        if self.depolarizing(math.pi / 2) > 1:
            raise ValueError("scaled two-qubit error probability exceeds 1")
        if self.dephasing(LAYER_TIME) > 1:
            raise ValueError("scaled dephasing probability exceeds 1")

    def infidelity(self, angle: float) -> float:
        return self.p0 + self.slope * effective_angle(angle) / (math.pi / 2)

    def depolarizing(self, angle: float) -> float:
        return self.scale * 1.25 * self.infidelity(angle)

    def dephasing(self, time: float) -> float:
        return self.scale * self.idle_dephase_rate * time

    def with_scale(self, scale: float) -> NoiseModel:
        return NoiseModel(self.p0, self.slope, self.idle_dephase_rate, scale)

    def to_dict(self) -> dict:
        return {"p0": self.p0, "slope": self.slope, "idle_dephase_rate": self.idle_dephase_rate, "scale": self.scale}


def effective_angle(angle: float) -> float:
    """Distance of a rotation angle to the nearest multiple of pi."""
    t = abs(float(angle)) % math.pi
    return min(t, math.pi - t)


def op_angle(op: Op) -> float:
    return math.pi / 2 if op.name == "CX" else op.params[0]


def circuit_id(c: Circuit) -> str:
    return hashlib.sha256(c.to_jsonl().encode()).hexdigest()[:16]


# ----------------------------------------------------------------- noiseless


@dataclass
class NoiselessResult:
    """Final pure state over virtual wires (one per qubit tenancy or record)."""

    state: np.ndarray  # shape (2,) * n_virtual
    current: dict[int, int]  # physical qubit -> its live virtual wire
    cbit_wires: list[int]
    cbits: tuple[ClassicalBit, ...]

    @property
    def n_virtual(self) -> int:
        return self.state.ndim

    @property
    def statevector(self) -> np.ndarray:
        """Physical-order statevector; only when no wire was retired."""
        if self.n_virtual != len(self.current) or self.cbit_wires:
            raise ValueError("circuit measured or reset wires; use the distribution")
        order = [self.current[q] for q in sorted(self.current)]
        return self.state.transpose(order).reshape(-1)

    def distribution(self) -> dict[tuple[int, ...], float]:
        """Exact joint distribution of all classical bits."""
        wires = sorted(set(self.cbit_wires))
        probs = np.abs(self.state) ** 2
        others = tuple(w for w in range(self.n_virtual) if w not in wires)
        # remaining axes stay in ascending wire order
        marg = probs.sum(axis=others) if others else probs
        out: dict[tuple[int, ...], float] = {}
        pos = [wires.index(w) for w in self.cbit_wires]
        for idx in zip(*np.nonzero(marg > 1e-16)):
            bits = tuple(int(idx[p]) for p in pos)
            out[bits] = out.get(bits, 0.0) + float(marg[idx])
        return dict(sorted(out.items()))

    def reduced_density_matrix(self, qubits) -> np.ndarray:
        keep = [self.current[q] for q in qubits]
        rest = [w for w in range(self.n_virtual) if w not in keep]
        psi = self.state.transpose(keep + rest).reshape(2 ** len(keep), -1)
        return psi @ psi.conj().T


def _apply_virtual(state: np.ndarray, mat: np.ndarray, wires: list[int]) -> np.ndarray:
    k = len(wires)
    t = mat.reshape((2,) * (2 * k))
    out = np.tensordot(t, state, axes=(list(range(k, 2 * k)), wires))
    return np.moveaxis(out, list(range(k)), wires)


_CX_MAT = np.array([[1, 0, 0, 0], [0, 1, 0, 0], [0, 0, 0, 1], [0, 0, 1, 0]], dtype=np.complex128)


def run_noiseless(c: Circuit, limit: int = DENSE_LIMIT) -> NoiselessResult:
    """Exact evolution with deferred measurement.

    A measurement whose wire is touched again without a RESET is copied onto
    a fresh record wire first, which is exactly Z-basis decoherence.
    """
    # virtual wire count: initial qubits + one per RESET + one per copied measurement
    touched_after = _measurements_needing_copy(c)
    n_virtual = c.num_qubits + sum(op.name == "RESET" for op in c.ops) + len(touched_after)
    if n_virtual > limit:
        raise ValueError(f"dense simulation needs {n_virtual} wires, above the limit of {limit}")
    state = np.zeros((2,) * n_virtual, dtype=np.complex128)
    state[(0,) * n_virtual] = 1.0
    current = {q: q for q in range(c.num_qubits)}
    nxt = c.num_qubits
    cbit_wires = [-1] * len(c.cbits)
    for k, op in enumerate(c.ops):
        if op.name == "RESET":
            current[op.qubits[0]] = nxt
            nxt += 1
        elif op.name == "MEASZ":
            w = current[op.qubits[0]]
            if k in touched_after:
                state = _apply_virtual(state, _CX_MAT, [w, nxt])
                w = nxt
                nxt += 1
            cbit_wires[op.cbit] = w
        else:
            state = _apply_virtual(state, op.matrix(), [current[q] for q in op.qubits])
    return NoiselessResult(state, current, cbit_wires, c.cbits)


def _measurements_needing_copy(c: Circuit) -> set[int]:
    pending: dict[int, int] = {}
    out: set[int] = set()
    for k, op in enumerate(c.ops):
        if op.name == "RESET":
            pending.pop(op.qubits[0], None)
            continue
        for q in op.qubits:
            if q in pending:
                out.add(pending.pop(q))
        if op.name == "MEASZ":
            pending[op.qubits[0]] = k
    return out


# -------------------------------------------------------------------- shots


@dataclass
class ShotTable:
    bits: np.ndarray  # (n_shots, n_cbits) uint8
    cbits: tuple[ClassicalBit, ...]
    meta: dict = field(default_factory=dict)

    def __post_init__(self) -> None:
        self.bits = np.asarray(self.bits, dtype=np.uint8)
        if self.bits.ndim != 2 or self.bits.shape[1] != len(self.cbits):
            raise ValueError("bit table must have one column per classical bit")

    @property
    def n_shots(self) -> int:
        return self.bits.shape[0]

    def columns(self, role: str) -> np.ndarray:
        idx = [i for i, b in enumerate(self.cbits) if b.role == role]
        return self.bits[:, idx]

    def subset(self, mask_or_index) -> ShotTable:
        return ShotTable(self.bits[mask_or_index], self.cbits, dict(self.meta))

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow([f"{b.role}|{b.label}" for b in self.cbits])
        w.writerows(self.bits.tolist())
        return buf.getvalue()

    def sidecar(self) -> str:
        meta = dict(self.meta)
        meta["cbits"] = [{"role": b.role, "label": b.label} for b in self.cbits]
        meta["n_shots"] = self.n_shots
        return json.dumps(meta, indent=2, sort_keys=True) + "\n"

    def save(self, stem) -> None:
        from pathlib import Path

        stem = Path(stem)
        stem.parent.mkdir(parents=True, exist_ok=True)
        stem.with_suffix(".csv").write_text(self.to_csv())
        stem.with_suffix(".json").write_text(self.sidecar())

    @classmethod
    def load(cls, stem) -> ShotTable:
        from pathlib import Path

        stem = Path(stem)
        meta = json.loads(stem.with_suffix(".json").read_text())
        cbits = tuple(ClassicalBit(b["role"], b["label"]) for b in meta.pop("cbits"))
        rows = list(csv.reader(io.StringIO(stem.with_suffix(".csv").read_text())))
        header = rows[0]
        if header != [f"{b.role}|{b.label}" for b in cbits]:
            raise ValueError("shot table header does not match its sidecar")
        n = meta.pop("n_shots")
        bits = np.array(rows[1:], dtype=np.uint8).reshape(n, len(cbits))
        return cls(bits, cbits, meta)


@dataclass(frozen=True)
class _Event:
    kind: str  # gate | depol | dephase | meas | reset
    qubits: tuple[int, ...]
    mat: np.ndarray | None = None
    diag: np.ndarray | None = None
    prob: float = 0.0
    cbit: int | None = None
    draws: int = 0


def schedule_events(c: Circuit, noise: NoiseModel) -> list[_Event]:
    """Flatten a circuit into gates and random events in execution order.

    Two-qubit gates are placed ASAP in layers; a qubit that waited ``n``
    layers since it was last used (and is not fresh) dephases with the
    probability of ``2 n`` time units, just before its next two-qubit gate.
    """
    clock = [0] * c.num_qubits
    active = [False] * c.num_qubits
    events: list[_Event] = []
    for op in c.ops:
        if op.name == "RESET":
            active[op.qubits[0]] = False
            events.append(_Event("reset", op.qubits, draws=1))
            continue
        if op.name == "MEASZ":
            active[op.qubits[0]] = False
            events.append(_Event("meas", op.qubits, cbit=op.cbit, draws=1))
            continue
        if op.is_two_qubit:
            layer = max(clock[q] for q in op.qubits) + 1
            for q in op.qubits:
                wait = layer - 1 - clock[q]
                p = noise.dephasing(LAYER_TIME * wait) if active[q] and wait > 0 else 0.0
                if p > 0:
                    events.append(_Event("dephase", (q,), prob=min(p, 1.0), draws=1))
                clock[q] = layer
        if op.name == "RZ":
            phi = op.params[0]
            events.append(_Event("gate", op.qubits, diag=np.array([np.exp(-0.5j * phi), np.exp(0.5j * phi)])))
        else:
            events.append(_Event("gate", op.qubits, mat=op.matrix().reshape((2,) * (2 * len(op.qubits)))))
        for q in op.qubits:
            active[q] = True
        if op.is_two_qubit:
            p = noise.depolarizing(op_angle(op))
            if p > 0:
                events.append(_Event("depol", op.qubits, prob=p, draws=1))
    return events


# the 15 non-identity two-qubit Paulis as (first, second) with 0=I 1=X 2=Y 3=Z
_PAULI_PAIRS = [(a, b) for a in range(4) for b in range(4) if (a, b) != (0, 0)]


def seed_key(seed) -> list[int]:
    return [int(s) for s in seed] if isinstance(seed, (tuple, list)) else [int(seed)]


def _uniforms(seed, shots: range, n_draws: int) -> np.ndarray:
    key = seed_key(seed)
    out = np.empty((len(shots), n_draws))
    for i, s in enumerate(shots):
        out[i] = np.random.default_rng(key + [s]).random(n_draws)
    return out


def run_shots(c: Circuit, noise: NoiseModel, n: int, seed, batch: int | None = None) -> ShotTable:
    """Sample ``n`` shots of ``c`` under ``noise``.

    ``seed`` is an int or a tuple of ints; shot ``i`` uses the stream
    ``(*seed, i)``.
    """
    if not isinstance(noise, NoiseModel):
        raise TypeError("noise must be a NoiseModel")
    if n < 0:
        raise ValueError("shot count must be non-negative")
    if c.num_qubits > DENSE_LIMIT:
        raise ValueError(f"circuit has {c.num_qubits} qubits, above the dense limit of {DENSE_LIMIT}")
    events = schedule_events(c, noise)
    n_draws = sum(e.draws for e in events)
    if batch is None:
        batch = max(1, min(n, _BATCH_BYTES // (16 * 2**c.num_qubits)))
    bits = np.zeros((n, len(c.cbits)), dtype=np.uint8)
    for start in range(0, n, batch):
        shots = range(start, min(n, start + batch))
        u = _uniforms(seed, shots, n_draws)
        bits[start : shots.stop] = _run_batch(c.num_qubits, len(c.cbits), events, u)
    meta = {"circuit_id": circuit_id(c), "noise": noise.to_dict(), "noise_scale": noise.scale, "seed": seed_key(seed), "shots": n}
    return ShotTable(bits, c.cbits, meta)


def _pauli(state: np.ndarray, rows: np.ndarray, q: int, which: int) -> None:
    """Apply X (1), Y (2) or Z (3) on qubit q for the selected trajectories."""
    if which == 0 or rows.size == 0:
        return
    s = np.moveaxis(state, 1 + q, 1)
    sub = s[rows]
    if which in (1, 2):
        sub = sub[:, ::-1]
    if which == 2:
        # Y = i X Z: |0> -> i|1>, |1> -> -i|0>, applied after the swap above
        sub = sub * np.array([-1j, 1j]).reshape((1, 2) + (1,) * (sub.ndim - 2))
    elif which == 3:
        sub = sub * np.array([1, -1]).reshape((1, 2) + (1,) * (sub.ndim - 2))
    s[rows] = sub


def _run_batch(nq: int, n_cbits: int, events: list[_Event], u: np.ndarray) -> np.ndarray:
    B = u.shape[0]
    state = np.zeros((B,) + (2,) * nq, dtype=np.complex128)
    state[(slice(None),) + (0,) * nq] = 1.0
    bits = np.zeros((B, n_cbits), dtype=np.uint8)
    col = 0
    all_axes = tuple(range(1, nq + 1))
    for e in events:
        if e.kind == "gate":
            if e.diag is not None:
                s = np.moveaxis(state, 1 + e.qubits[0], 1)
                s[:, 0] *= e.diag[0]
                s[:, 1] *= e.diag[1]
            else:
                k = len(e.qubits)
                ax = [1 + q for q in e.qubits]
                out = np.tensordot(state, e.mat, axes=(ax, list(range(k, 2 * k))))
                state = np.moveaxis(out, list(range(nq + 1 - k, nq + 1)), ax)
            continue
        r = u[:, col]
        col += 1
        if e.kind == "depol":
            hit = r < e.prob
            if hit.any():
                which = np.minimum((r[hit] / e.prob * 15).astype(int), 14)
                rows = np.nonzero(hit)[0]
                for w in np.unique(which):
                    sel = rows[which == w]
                    a, b = _PAULI_PAIRS[w]
                    _pauli(state, sel, e.qubits[0], a)
                    _pauli(state, sel, e.qubits[1], b)
        elif e.kind == "dephase":
            _pauli(state, np.nonzero(r < e.prob)[0], e.qubits[0], 3)
        else:  # meas / reset
            q = e.qubits[0]
            s = np.moveaxis(state, 1 + q, 1)
            rest = tuple(range(2, nq + 1))
            p1 = (np.abs(s[:, 1]) ** 2).sum(axis=tuple(a - 1 for a in rest)) if nq > 1 else np.abs(s[:, 1]) ** 2
            norm = (np.abs(state) ** 2).sum(axis=all_axes)
            p1 = np.clip(p1 / norm, 0.0, 1.0)
            one = r < p1
            s[one, 0] = 0
            s[~one, 1] = 0
            keep = np.where(one, p1, 1 - p1)
            state /= np.sqrt(np.maximum(keep * norm, 1e-300)).reshape((B,) + (1,) * nq)
            if e.kind == "meas":
                bits[:, e.cbit] = one
            else:
                rows = np.nonzero(one)[0]
                _pauli(state, rows, q, 1)
    return bits
