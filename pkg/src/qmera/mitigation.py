"""Parity post-selection, X_j X_k estimation, zero-noise extrapolation and bootstrap."""

from __future__ import annotations

import math
from collections.abc import Callable, Sequence
from dataclasses import dataclass

import numpy as np

from qmera.simulator import ShotTable, seed_key


class EmptyEstimateError(ValueError):
    """No shots survived, so there is nothing to average."""


@dataclass(frozen=True)
class Estimate:
    value: float
    stderr: float
    n_total: int
    n_kept: int
    scale: float = 1.0

    def __post_init__(self) -> None:
        if self.stderr < 0:
            raise ValueError("stderr must be non-negative")
        if self.n_kept > self.n_total:
            raise ValueError("cannot keep more shots than were taken")


@dataclass(frozen=True)
class ZneResult:
    e0: float
    sigma0: float
    e1: Estimate
    em: Estimate
    m: float


def parity_bits(shots: ShotTable) -> np.ndarray:
    """XOR of all cone_exit and site_z bits per shot (0 = even parity)."""
    if not any(b.role == "site_z" for b in shots.cbits):
        raise ValueError("shot table has no site_z bits; cannot form the parity herald")
    cols = [i for i, b in enumerate(shots.cbits) if b.role in ("cone_exit", "site_z")]
    return np.bitwise_xor.reduce(shots.bits[:, cols], axis=1) if cols else np.zeros(shots.n_shots, np.uint8)


def postselect(shots: ShotTable) -> tuple[ShotTable, float]:
    """Keep shots whose Z parity over cone exits and target sites is even."""
    keep = parity_bits(shots) == 0
    kept = shots.subset(keep)
    kept.meta["n_total"] = shots.meta.get("n_total", shots.n_shots)
    rate = 1.0 - keep.sum() / shots.n_shots if shots.n_shots else 0.0
    return kept, float(rate)


def _xx_signs(shots: ShotTable) -> np.ndarray:
    col = [i for i, b in enumerate(shots.cbits) if b.role == "xx_ancilla"]
    if len(col) != 1:
        raise ValueError("shot table needs exactly one xx_ancilla bit")
    return 1.0 - 2.0 * shots.bits[:, col[0]]


def _mean_stderr(x: np.ndarray) -> tuple[float, float]:
    n = x.size
    if n == 0:
        raise EmptyEstimateError("no shots to estimate from")
    err = float(np.std(x, ddof=1) / math.sqrt(n)) if n > 1 else 0.0
    return float(np.mean(x)), err


def estimate_xx(shots: ShotTable, n_total: int | None = None, scale: float | None = None) -> Estimate:
    """Mean of (-1)^b over the ancilla bit, with the standard error of the mean."""
    value, err = _mean_stderr(_xx_signs(shots))
    total = n_total if n_total is not None else shots.meta.get("n_total", shots.n_shots)
    scale = scale if scale is not None else float(shots.meta.get("noise_scale", 1.0))
    return Estimate(value, err, int(total), shots.n_shots, scale)


def zne(e1: Estimate, em: Estimate, m: float) -> ZneResult:
    """Linear extrapolation from noise levels p and m p to zero."""
    if not m > 1:
        raise ValueError(f"noise amplification factor must exceed 1, got {m}")
    e0 = (m * e1.value - em.value) / (m - 1)
    sigma0 = math.sqrt(m * m * e1.stderr**2 + em.stderr**2) / (m - 1)
    return ZneResult(e0, sigma0, e1, em, m)


def allocate_shots(total: int, m: int) -> tuple[int, int]:
    """Split ``total`` so that N1 / Nm = m^2, which equalizes the two terms of sigma0."""
    if m <= 1:
        raise ValueError("m must exceed 1")
    if total < m * m + 1:
        raise ValueError(f"need at least {m * m + 1} shots for m={m}, got {total}")
    n1 = round(total * m * m / (m * m + 1))
    return n1, total - n1


def zne_variance(n1: int, nm: int, m: float, var1: float = 1.0, varm: float = 1.0) -> float:
    """Variance of the extrapolated value for per-shot variances var1, varm."""
    return (m * m * var1 / n1 + varm / nm) / (m - 1) ** 2


@dataclass(frozen=True)
class BootstrapResult:
    mean: float
    std: float
    ci: tuple[float, float]
    n_resamples: int
    n_failed: int = 0


def bootstrap(
    data: np.ndarray | ShotTable | Sequence[np.ndarray | ShotTable],
    statistic: Callable[..., float],
    n_resamples: int = 1500,
    seed=0,
) -> BootstrapResult:
    """Resample rows with replacement and recompute ``statistic``.

    ``data`` may be one dataset or a sequence of independent datasets (for
    example the shot tables at two noise levels), each resampled separately
    and passed positionally. Resample ``i`` draws from the stream
    ``(seed, i)``. The interval is the central 68.27% of the resampled values.
    Resamples where the statistic has no value (no shots kept) are skipped
    and counted.
    """
    single = isinstance(data, (np.ndarray, ShotTable))
    sets = [data] if single else list(data)
    if not sets or any(_nrows(d) == 0 for d in sets):
        raise ValueError("bootstrap needs non-empty data")
    vals = []
    failed = 0
    for i in range(n_resamples):
        rng = np.random.default_rng(seed_key(seed) + [i])
        picks = [_take(d, rng.integers(0, _nrows(d), _nrows(d))) for d in sets]
        try:
            vals.append(float(statistic(*picks)))
        except EmptyEstimateError:
            failed += 1
    if not vals:
        raise EmptyEstimateError("statistic undefined on every resample")
    v = np.array(vals)
    lo, hi = np.percentile(v, [15.865, 84.135])
    return BootstrapResult(float(v.mean()), float(v.std(ddof=1)) if v.size > 1 else 0.0, (float(lo), float(hi)), len(vals), failed)


def _nrows(d) -> int:
    return d.n_shots if isinstance(d, ShotTable) else len(d)


def _take(d, idx):
    return d.subset(idx) if isinstance(d, ShotTable) else np.asarray(d)[idx]


# ------------------------------------------------------------- full pipeline


@dataclass(frozen=True)
class DistanceRecord:
    distance: int
    raw: Estimate
    heralded: Estimate
    heralded_m: Estimate
    mitigated: ZneResult
    discard_rate: float
    discard_rate_m: float
    boot: BootstrapResult | None = None


def heralded_xx(shots: ShotTable) -> float:
    kept, _ = postselect(shots)
    return estimate_xx(kept).value


def mitigated_xx(shots1: ShotTable, shotsm: ShotTable, m: float) -> float:
    return zne(estimate_xx(postselect(shots1)[0]), estimate_xx(postselect(shotsm)[0]), m).e0


def analyze_distance(
    distance: int, shots1: ShotTable, shotsm: ShotTable, m: float, n_resamples: int = 1500, seed=0
) -> DistanceRecord:
    """Raw, heralded and extrapolated X_j X_k at one distance.

    The bootstrap resamples raw shots at both noise levels and reruns
    post-selection and extrapolation inside the loop.
    """
    raw = estimate_xx(shots1)
    kept1, rate1 = postselect(shots1)
    keptm, ratem = postselect(shotsm)
    h1 = estimate_xx(kept1, n_total=shots1.n_shots)
    hm = estimate_xx(keptm, n_total=shotsm.n_shots)
    res = zne(h1, hm, m)
    boot = None
    if n_resamples:
        boot = bootstrap([shots1, shotsm], lambda a, b: mitigated_xx(a, b, m), n_resamples, seed)
    return DistanceRecord(distance, raw, h1, hm, res, rate1, ratem, boot)


def records_csv(records: Sequence[DistanceRecord]) -> str:
    import csv
    import io

    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(
        ["distance", "raw", "raw_stderr", "heralded", "heralded_stderr", "heralded_m", "heralded_m_stderr",
         "zne", "zne_stderr", "boot_mean", "boot_std", "boot_lo", "boot_hi", "discard_rate", "discard_rate_m",
         "n_shots", "n_shots_m"]
    )
    for r in records:
        b = r.boot
        w.writerow(
            [r.distance, repr(r.raw.value), repr(r.raw.stderr), repr(r.heralded.value), repr(r.heralded.stderr),
             repr(r.heralded_m.value), repr(r.heralded_m.stderr), repr(r.mitigated.e0), repr(r.mitigated.sigma0),
             repr(b.mean) if b else "", repr(b.std) if b else "", repr(b.ci[0]) if b else "", repr(b.ci[1]) if b else "",
             repr(r.discard_rate), repr(r.discard_rate_m), r.raw.n_total, r.heralded_m.n_total]
        )
    return buf.getvalue()
