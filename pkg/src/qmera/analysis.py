"""Power-law fits of C_xx(r) and the final report bundle."""

from __future__ import annotations

import csv
import io
import json
import math
import warnings
from collections.abc import Sequence
from dataclasses import dataclass, field

import numpy as np

from qmera.mitigation import Estimate

REPORT_SCHEMA_VERSION = "qmera-report/1"

REPORT_SCHEMA = {
    "$schema": "https://json-schema.org/draft/2020-12/schema",
    "type": "object",
    "required": [
        "schema_version", "layout_version", "eta", "eta_err", "fits", "energy", "energy_err",
        "discard_rates", "resource_stats", "config_hash", "pairs", "points",
    ],
    "properties": {
        "schema_version": {"const": REPORT_SCHEMA_VERSION},
        "layout_version": {"type": "string"},
        "eta": {"type": "number"},
        "eta_err": {"type": "number", "minimum": 0},
        "fits": {
            "type": "object",
            "additionalProperties": {
                "type": "object",
                "required": ["eta", "eta_err", "amplitude", "method"],
                "properties": {
                    "eta": {"type": "number"},
                    "eta_err": {"type": "number", "minimum": 0},
                    "amplitude": {"type": "number"},
                    "method": {"enum": ["chisq", "bootstrap"]},
                },
            },
        },
        "energy": {"type": "number"},
        "energy_per_site": {"type": "number"},
        "energy_exact": {"type": "number"},
        "energy_err": {"type": "number", "minimum": 0},
        "discard_rates": {"type": "object", "additionalProperties": {"type": "number", "minimum": 0, "maximum": 1}},
        "resource_stats": {"type": "array", "items": {"type": "object"}},
        "config_hash": {"type": "string"},
        "pairs": {"type": "object", "additionalProperties": {"type": "array", "items": {"type": "integer"}}},
        "points": {"type": "array", "items": {"type": "object"}},
    },
}


@dataclass(frozen=True)
class FitResult:
    eta: float
    eta_err: float
    amplitude: float
    method: str
    distances: tuple[int, ...]
    residuals: dict[int, float] = field(default_factory=dict)
    excluded: tuple[int, ...] = ()


def _normalize(points) -> list[tuple[float, float, float]]:
    out = []
    for p in points:
        if len(p) == 2:
            r, est = p
            if isinstance(est, Estimate):
                out.append((float(r), est.value, est.stderr))
            else:
                out.append((float(r), float(est), 0.0))
        else:
            r, v, s = p
            out.append((float(r), float(v), float(s)))
    return out


def _usable(points):
    good, bad = [], []
    for r, v, s in points:
        (good if v > 0 and r > 0 else bad).append((r, v, s))
    if bad:
        warnings.warn(f"excluding non-positive correlation values at r={[int(b[0]) for b in bad]}", stacklevel=3)
    if len(good) < 3:
        raise ValueError(f"power-law fit needs at least 3 positive points, got {len(good)}")
    return good, tuple(int(b[0]) for b in bad)


def _wls(x, y, sig):
    """Straight line y = a + b x; returns a, b, cov."""
    if np.all(sig > 0):
        w = 1.0 / sig**2
    else:
        w = np.ones_like(x)
    A = np.stack([np.ones_like(x), x], axis=1)
    M = A.T @ (w[:, None] * A)
    coef = np.linalg.solve(M, A.T @ (w * y))
    cov = np.linalg.inv(M) if np.all(sig > 0) else None
    return coef[0], coef[1], cov


def fit_power_law(points, method: str = "chisq", n_resamples: int = 1500, seed: int = 0) -> FitResult:
    """Fit C(r) = A r^(-eta).

    ``chisq``: weighted least squares of log C against log r with log-space
    errors sigma/C. ``bootstrap``: refit on Gaussian resamples of every point
    (points that turn non-positive are dropped from that resample); eta_err is
    the resample spread. Points are ``(r, Estimate)``, ``(r, value)`` or
    ``(r, value, stderr)``.
    """
    pts, excluded = _usable(_normalize(points))
    r = np.array([p[0] for p in pts])
    v = np.array([p[1] for p in pts])
    s = np.array([p[2] for p in pts])
    x, y, sy = np.log(r), np.log(v), s / v
    a, b, cov = _wls(x, y, sy)
    resid = {int(ri): float(yi - (a + b * xi)) for ri, xi, yi in zip(r, x, y)}
    if method == "chisq":
        if cov is not None:
            err = math.sqrt(cov[1, 1])
        elif len(r) > 2:
            # unweighted: residual-based standard error of the slope
            dof = len(r) - 2
            s2 = sum(e * e for e in resid.values()) / dof
            err = math.sqrt(s2 / np.sum((x - x.mean()) ** 2))
        else:
            err = 0.0
        return FitResult(float(-b), float(err), float(math.exp(a)), "chisq", tuple(int(t) for t in r), resid, excluded)
    if method != "bootstrap":
        raise ValueError(f"unknown fit method {method!r}")
    etas = []
    for i in range(n_resamples):
        rng = np.random.default_rng([seed, i])
        vv = v + s * rng.standard_normal(v.size)
        ok = vv > 0
        if ok.sum() < 3:
            continue
        _, bb, _ = _wls(x[ok], np.log(vv[ok]), (s / vv)[ok] if np.all(s > 0) else np.zeros(ok.sum()))
        etas.append(-bb)
    etas = np.array(etas)
    eta = float(-b)
    err = float(etas.std(ddof=1)) if etas.size > 1 else 0.0
    return FitResult(eta, err, float(math.exp(a)), "bootstrap", tuple(int(t) for t in r), resid, excluded)


def fit_both(points, n_resamples: int = 1500, seed: int = 0) -> dict[str, FitResult]:
    return {
        "chisq": fit_power_law(points, "chisq"),
        "bootstrap": fit_power_law(points, "bootstrap", n_resamples, seed),
    }


# --------------------------------------------------------------------- report


def _csv(rows: Sequence[Sequence], header: Sequence[str]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for row in rows:
        w.writerow([repr(x) if isinstance(x, float) else x for x in row])
    return buf.getvalue()


def validate_report(report: dict) -> None:
    import jsonschema

    jsonschema.validate(report, REPORT_SCHEMA)


def build_report(
    *,
    layout_version: str,
    config_hash: str,
    fits: dict[str, FitResult],
    energy: float,
    energy_exact: float,
    L: int,
    discard_rates: dict[int, float],
    resource_rows: list[dict],
    pairs: dict[int, tuple[int, int]],
    points: list[dict],
    primary: str = "chisq",
) -> dict:
    """Assemble the report dictionary and check it against the schema."""
    main = fits[primary]
    report = {
        "schema_version": REPORT_SCHEMA_VERSION,
        "layout_version": layout_version,
        "config_hash": config_hash,
        "eta": main.eta,
        "eta_err": main.eta_err,
        "fits": {
            k: {"eta": f.eta, "eta_err": f.eta_err, "amplitude": f.amplitude, "method": f.method,
                "distances": list(f.distances), "excluded": list(f.excluded),
                "residuals": {str(r): e for r, e in sorted(f.residuals.items())}}
            for k, f in sorted(fits.items())
        },
        "energy": energy,
        "energy_per_site": energy / L,
        "energy_exact": energy_exact,
        "energy_err": abs(energy - energy_exact) / abs(energy_exact),
        "discard_rates": {str(r): float(v) for r, v in sorted(discard_rates.items())},
        "resource_stats": resource_rows,
        "pairs": {str(r): list(p) for r, p in sorted(pairs.items())},
        "points": points,
    }
    validate_report(report)
    return report


def dumps_report(report: dict) -> str:
    return json.dumps(report, indent=2, sort_keys=True) + "\n"


def fig3_csv(points: list[dict]) -> str:
    cols = ["distance", "noiseless", "raw", "raw_stderr", "heralded", "heralded_stderr", "zne", "zne_stderr"]
    return _csv([[p.get(c, "") for c in cols] for p in points], cols)


def parity_csv(discard: dict[int, tuple[float, float]]) -> str:
    rows = [[r, d1, 1 - d1, dm, 1 - dm] for r, (d1, dm) in sorted(discard.items())]
    return _csv(rows, ["distance", "discard_rate", "kept_fraction", "discard_rate_m", "kept_fraction_m"])


def angles_hist_csv(params: np.ndarray, bins: int = 24) -> str:
    """Histogram of the folded entangling angles (|angle| mod pi, in [0, pi/2])."""
    from qmera.simulator import effective_angle

    a = np.array([effective_angle(t) for t in params])
    counts, edges = np.histogram(a, bins=bins, range=(0.0, math.pi / 2))
    rows = [[float(lo), float(hi), int(c)] for lo, hi, c in zip(edges[:-1], edges[1:], counts)]
    return _csv(rows, ["lo", "hi", "count"])
