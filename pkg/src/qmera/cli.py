"""Command-line pipeline: optimize, cone, compile, simulate, mitigate, fit, report.

Every stage reads the previous stage's files from the output directory and
stamps what it writes with the hash of the run configuration.
Exit codes: 0 success, 2 config error, 3 missing artifact, 4 numerical failure.
"""

from __future__ import annotations

import csv
import hashlib
import io
import json
import logging
import math
import os
import sys
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from pathlib import Path

import click
import jsonschema
import numpy as np

from qmera import analysis, circuits, compiler, mera, mitigation, mps, optimizer, oracle, simulator

log = logging.getLogger("qmera")

CONFIG_VERSION = "qmera-config/1"

CONFIG_SCHEMA = {
    "$schema": "https://json-schema.org/draft/2020-12/schema",
    "type": "object",
    "additionalProperties": False,
    "properties": {
        "schema_version": {"const": CONFIG_VERSION},
        "mera": {
            "type": "object",
            "additionalProperties": False,
            "required": ["L"],
            "properties": {
                "L": {"type": "integer", "minimum": 8},
                "chi": {"enum": [2, 4]},
                "J": {"type": "number"},
                "h": {"type": "number"},
                "drop_top_disentanglers": {"type": "boolean"},
            },
        },
        "optimizer": {
            "type": "object",
            "additionalProperties": False,
            "properties": {
                "max_iters": {"type": "integer", "minimum": 0},
                "halt_rel_energy": {"type": "number", "exclusiveMinimum": 0},
                "seed": {"type": "integer", "minimum": 0},
                "init": {"type": "array", "items": {"type": "number"}, "minItems": 2, "maxItems": 2},
                "restarts": {"type": "integer", "minimum": 1},
                "gradient": {"enum": ["adjoint", "shift"]},
            },
        },
        "distances": {"type": "array", "items": {"type": "integer", "minimum": 1}, "minItems": 1},
        "shots": {"type": "integer", "minimum": 1},
        "shot_split": {"enum": ["m2", "equal"]},
        "zne_m": {"type": "integer", "minimum": 3},
        "noise": {
            "type": "object",
            "additionalProperties": False,
            "properties": {
                "p0": {"type": "number", "minimum": 0},
                "slope": {"type": "number", "minimum": 0},
                "idle_dephase_rate": {"type": "number", "minimum": 0},
                "scale": {"type": "number", "minimum": 0},
            },
        },
        "bootstrap_resamples": {"type": "integer", "minimum": 0},
        "compile_mode": {"type": "string", "pattern": r"^(none|greedy|cap\(\d+\))$"},
        "cap": {"type": "integer", "minimum": 1},
        "mps_chi": {"type": "array", "items": {"type": "integer", "minimum": 1}},
        "network": {"type": ["string", "null"]},
        "seed": {"type": "integer", "minimum": 0},
        "out": {"type": "string"},
    },
}

DEFAULTS = {
    "schema_version": CONFIG_VERSION,
    "mera": {"L": 128, "chi": 4, "J": 1.0, "h": 1.0, "drop_top_disentanglers": False},
    "optimizer": {"max_iters": 5000, "halt_rel_energy": 1e-8, "seed": 0, "init": [-0.1, 0.1], "restarts": 3, "gradient": "adjoint"},
    "distances": [2, 4, 8, 16, 32],
    "shots": 8000,
    "shot_split": "m2",
    "zne_m": 3,
    "noise": {"p0": 1e-4, "slope": 1.9e-3, "idle_dephase_rate": 1e-4 / 20, "scale": 1.0},
    "bootstrap_resamples": 1500,
    "compile_mode": "greedy",
    "cap": 20,
    "mps_chi": [16, 32, 64, 128],
    "network": None,
    "seed": 0,
    "out": "out",
}


class ConfigError(Exception):
    exit_code = 2


class MissingArtifact(Exception):
    exit_code = 3


class NumericalFailure(Exception):
    exit_code = 4


@dataclass(frozen=True)
class RunConfig:
    raw: dict
    hash: str
    out: Path
    threads: int = 1

    @property
    def mera(self) -> mera.MeraConfig:
        return mera.MeraConfig(**self.raw["mera"])

    @property
    def opt(self) -> optimizer.OptConfig:
        o = dict(self.raw["optimizer"])
        o["init"] = tuple(o["init"])
        return optimizer.OptConfig(**o)

    @property
    def noise(self) -> simulator.NoiseModel:
        return simulator.NoiseModel(**self.raw["noise"])

    @property
    def distances(self) -> list[int]:
        return list(self.raw["distances"])

    @property
    def m(self) -> int:
        return self.raw["zne_m"]

    @property
    def seed(self) -> int:
        return self.raw["seed"]

    def shot_counts(self) -> tuple[int, int]:
        if self.raw["shot_split"] == "equal":
            return self.raw["shots"], self.raw["shots"]
        return mitigation.allocate_shots(self.raw["shots"], self.m)


def _merge(base: dict, over: dict) -> dict:
    out = dict(base)
    for k, v in over.items():
        out[k] = _merge(base[k], v) if isinstance(v, dict) and isinstance(base.get(k), dict) else v
    return out


def config_hash(raw: dict) -> str:
    doc = {k: v for k, v in raw.items() if k != "out"}
    return hashlib.sha256(json.dumps(doc, sort_keys=True).encode()).hexdigest()[:16]


def load_config(path: str | None, overrides: dict | None = None, out: str | None = None, threads: int = 1) -> RunConfig:
    user: dict = {}
    if path:
        try:
            user = json.loads(Path(path).read_text())
        except FileNotFoundError as exc:
            raise ConfigError(f"config file not found: {path}") from exc
        except json.JSONDecodeError as exc:
            raise ConfigError(f"config file is not valid JSON: {exc}") from exc
    _validate(user)
    raw = _merge(DEFAULTS, user)
    raw = _merge(raw, overrides or {})
    _validate(raw)
    try:
        mera.MeraConfig(**raw["mera"])
        simulator.NoiseModel(**raw["noise"])
        o = dict(raw["optimizer"])
        o["init"] = tuple(o["init"])
        optimizer.OptConfig(**o)
    except (ValueError, TypeError) as exc:
        raise ConfigError(str(exc)) from exc
    L = raw["mera"]["L"]
    if "distances" not in user and "distances" not in (overrides or {}):
        # the default list targets the full-size chain; keep what fits
        raw["distances"] = [r for r in raw["distances"] if r <= L // 2]
    bad = [r for r in raw["distances"] if not 0 < r < L]
    if bad:
        raise ConfigError(f"distances {bad} are outside (0, {L})")
    out_dir = os.environ.get("MERA_OUT") or out or raw["out"]
    raw["out"] = str(out_dir)
    return RunConfig(raw, config_hash(raw), Path(out_dir), threads)


def _validate(doc: dict) -> None:
    errors = sorted(jsonschema.Draft202012Validator(CONFIG_SCHEMA).iter_errors(doc), key=lambda e: list(e.path))
    if errors:
        lines = []
        for e in errors:
            where = "/".join(str(p) for p in e.absolute_path) or "<root>"
            lines.append(f"{where}: {e.message}")
        raise ConfigError("invalid config:\n  " + "\n  ".join(lines))


# ------------------------------------------------------------------ artifacts


def _path(cfg: RunConfig, name: str) -> Path:
    return cfg.out / name


def _need(cfg: RunConfig, name: str) -> Path:
    p = _path(cfg, name)
    if not p.exists():
        raise MissingArtifact(f"missing artifact {p} (run the earlier stage first)")
    return p


def _write(cfg: RunConfig, name: str, text: str) -> Path:
    p = _path(cfg, name)
    p.parent.mkdir(parents=True, exist_ok=True)
    p.write_text(text)
    return p


def _write_csv(cfg: RunConfig, name: str, body: str) -> Path:
    return _write(cfg, name, f"# config_hash: {cfg.hash}\n" + body)


def _read_csv(path: Path) -> list[dict]:
    lines = [ln for ln in path.read_text().splitlines() if not ln.startswith("#")]
    return list(csv.DictReader(io.StringIO("\n".join(lines))))


def _write_json(cfg: RunConfig, name: str, doc: dict) -> Path:
    doc = dict(doc)
    doc["config_hash"] = cfg.hash
    return _write(cfg, name, json.dumps(doc, indent=2, sort_keys=True) + "\n")


def _load_network(cfg: RunConfig) -> mera.MeraNetwork:
    net = mera.network_from_json(_need(cfg, "network.json").read_text())
    if net.config != cfg.mera:
        raise ConfigError(f"network.json was built for {net.config}, config asks for {cfg.mera}")
    return net


def _map(cfg: RunConfig, fn, items):
    if cfg.threads > 1:
        with ThreadPoolExecutor(cfg.threads) as pool:
            return list(pool.map(fn, items))
    return [fn(x) for x in items]


# --------------------------------------------------------------------- stages


def stage_optimize(cfg: RunConfig, force: bool = False) -> mera.MeraNetwork:
    target = _path(cfg, "network.json")
    if target.exists() and not force:
        doc = json.loads(target.read_text())
        if doc.get("config_hash") == cfg.hash:
            log.info("network.json is current; skipping optimization")
            return _load_network(cfg)
    src = cfg.raw.get("network")
    if src:
        try:
            net = mera.network_from_json(Path(src).read_text())
        except FileNotFoundError as exc:
            raise MissingArtifact(f"missing artifact {src} (network named in the config)") from exc
        if net.config != cfg.mera:
            raise ConfigError(f"network {src} was built for {net.config}, config asks for {cfg.mera}")
        trace: list[tuple[int, float]] = [(0, mera.energy(net))]
        gnorms = [float("nan")]
        converged, message = True, f"loaded from {Path(src).name}"
    else:
        res = optimizer.optimize(cfg.mera, cfg.opt)
        if not np.all(np.isfinite(res.params)):
            raise NumericalFailure("optimization produced non-finite parameters")
        net = mera.build_mera(cfg.mera, res.params)
        trace, gnorms, converged, message = res.energy_trace, res.grad_norm_trace, res.converged, res.message
    energy = mera.energy(net)
    exact = oracle.ff_energy(cfg.mera.L, cfg.mera.h / cfg.mera.J, cfg.mera.J)
    rows = "".join(f"{it},{e!r},{g!r}\n" for (it, e), g in zip(trace, gnorms))
    _write_csv(cfg, "opt_trace.csv", "iter,energy,grad_norm\n" + rows)
    _write_json(
        cfg,
        "opt.json",
        {"energy": energy, "energy_exact": exact, "relative_error": abs(energy - exact) / abs(exact),
         "converged": converged, "message": message, "iterations": trace[-1][0]},
    )
    _write(cfg, "network.json", mera.network_to_json(net, {"config_hash": cfg.hash}))
    return net


def stage_cone(cfg: RunConfig, distances: list[int] | None = None) -> dict:
    net = _load_network(cfg)
    distances = distances or cfg.distances

    def one(r):
        j, k = mera.pair_for_distance(net, r)
        cone = mera.causal_cone(net, (j, k))
        base = circuits.attach_gadget(circuits.lower(net, cone), j, k)
        _write(cfg, f"circuits/r{r}_base.jsonl", base.to_jsonl({"config_hash": cfg.hash, "distance": r, "pair": [j, k]}))
        noiseless = mera.expect_local(net, {j: "X", k: "X"})
        return str(r), {"pair": [j, k], "cone_width": cone.width, "cone_gates": len(cone.gates),
                        "two_qubit_gates": base.two_qubit_count, "noiseless_xx": noiseless}

    cones = dict(_map(cfg, one, distances))
    path = _path(cfg, "cones.json")
    if path.exists():
        old = json.loads(path.read_text())
        if old.get("config_hash") == cfg.hash:
            cones = {**old["cones"], **cones}
    cones = dict(sorted(cones.items(), key=lambda kv: int(kv[0])))
    _write_json(cfg, "cones.json", {"cones": cones})
    return cones


def _base_circuit(cfg: RunConfig, r: int) -> circuits.Circuit:
    return circuits.Circuit.from_jsonl(_need(cfg, f"circuits/r{r}_base.jsonl").read_text())


def stage_compile(cfg: RunConfig, distances: list[int] | None = None) -> list[compiler.ResourceStats]:
    distances = distances or cfg.distances
    cap = cfg.raw["cap"]

    def one(r):
        base = _base_circuit(cfg, r)
        stats = compiler.resource_stats(base, r, cap)
        for f in (1, cfg.m):
            folded = circuits.fold_zne(base, f)
            comp = compiler.reuse_compile(folded, cfg.raw["compile_mode"])
            _write(cfg, f"circuits/r{r}_f{f}.jsonl", comp.circuit.to_jsonl({"config_hash": cfg.hash, "distance": r, "fold": f}))
        return stats

    rows = _map(cfg, one, distances)
    _write_csv(cfg, "fig1e.csv", compiler.resource_csv(rows))
    return rows


def stage_simulate(cfg: RunConfig, distances: list[int] | None = None) -> None:
    distances = distances or cfg.distances
    n1, nm = cfg.shot_counts()
    noise = cfg.noise
    jobs = [(r, f, n) for r in distances for f, n in ((1, n1), (cfg.m, nm))]

    def one(job):
        r, f, n = job
        c = circuits.Circuit.from_jsonl(_need(cfg, f"circuits/r{r}_f{f}.jsonl").read_text())
        table = simulator.run_shots(c, noise, n, (cfg.seed, r, f))
        table.meta.update({"config_hash": cfg.hash, "distance": r, "fold": f})
        table.save(_path(cfg, f"shots/r{r}_f{f}"))

    _map(cfg, one, jobs)


def stage_mitigate(cfg: RunConfig) -> list[mitigation.DistanceRecord]:
    def one(r):
        s1 = simulator.ShotTable.load(_need(cfg, f"shots/r{r}_f1.json").with_suffix(""))
        sm = simulator.ShotTable.load(_need(cfg, f"shots/r{r}_f{cfg.m}.json").with_suffix(""))
        try:
            return mitigation.analyze_distance(r, s1, sm, cfg.m, cfg.raw["bootstrap_resamples"], (cfg.seed, r))
        except mitigation.EmptyEstimateError as exc:
            raise NumericalFailure(f"distance {r}: {exc}") from exc

    records = _map(cfg, one, cfg.distances)
    _write_csv(cfg, "mitigation.csv", mitigation.records_csv(records))
    return records


def stage_fit(cfg: RunConfig) -> dict:
    rows = _read_csv(_need(cfg, "mitigation.csv"))
    cones = json.loads(_need(cfg, "cones.json").read_text())["cones"]
    mitigated = [(int(r["distance"]), float(r["zne"]), float(r["zne_stderr"])) for r in rows]
    heralded = [(int(r["distance"]), float(r["heralded"]), float(r["heralded_stderr"])) for r in rows]
    raw = [(int(r["distance"]), float(r["raw"]), float(r["raw_stderr"])) for r in rows]
    noiseless = [(int(r["distance"]), float(cones[r["distance"]]["noiseless_xx"])) for r in rows]
    out = {}
    for name, pts in (("mitigated", mitigated), ("heralded", heralded), ("raw", raw), ("noiseless", noiseless)):
        try:
            fits = analysis.fit_both(pts, cfg.raw["bootstrap_resamples"] or 1500, cfg.seed)
        except ValueError as exc:
            if name == "mitigated":
                raise NumericalFailure(f"power-law fit failed: {exc}") from exc
            continue
        out[name] = {k: {"eta": f.eta, "eta_err": f.eta_err, "amplitude": f.amplitude, "distances": list(f.distances),
                         "excluded": list(f.excluded)} for k, f in fits.items()}
    _write_json(cfg, "fit.json", {"fits": out})
    return out


def stage_report(cfg: RunConfig) -> dict:
    net = _load_network(cfg)
    opt = json.loads(_need(cfg, "opt.json").read_text())
    cones = json.loads(_need(cfg, "cones.json").read_text())["cones"]
    rows = _read_csv(_need(cfg, "mitigation.csv"))
    res_rows = _read_csv(_need(cfg, "fig1e.csv"))
    fitdoc = json.loads(_need(cfg, "fit.json").read_text())["fits"]
    mitigated = fitdoc["mitigated"]
    fits = {
        k: analysis.FitResult(v["eta"], v["eta_err"], v["amplitude"], k, tuple(v["distances"]), {}, tuple(v["excluded"]))
        for k, v in mitigated.items()
    }
    points = []
    for r in rows:
        d = r["distance"]
        points.append({
            "distance": int(d), "pair": cones[d]["pair"], "noiseless": cones[d]["noiseless_xx"],
            "raw": float(r["raw"]), "raw_stderr": float(r["raw_stderr"]),
            "heralded": float(r["heralded"]), "heralded_stderr": float(r["heralded_stderr"]),
            "zne": float(r["zne"]), "zne_stderr": float(r["zne_stderr"]),
            "boot_lo": float(r["boot_lo"]) if r["boot_lo"] else None,
            "boot_hi": float(r["boot_hi"]) if r["boot_hi"] else None,
        })
    resource = [{k: (int(v) if v not in ("", None) else None) for k, v in row.items()} for row in res_rows]
    report = analysis.build_report(
        layout_version=mera.LAYOUT_VERSION,
        config_hash=cfg.hash,
        fits=fits,
        energy=opt["energy"],
        energy_exact=opt["energy_exact"],
        L=cfg.mera.L,
        discard_rates={int(r["distance"]): float(r["discard_rate"]) for r in rows},
        resource_rows=resource,
        pairs={int(d): tuple(c["pair"]) for d, c in cones.items() if int(d) in cfg.distances},
        points=points,
    )
    report["eta_noiseless"] = fitdoc.get("noiseless", {}).get("chisq", {}).get("eta")
    report["fits_by_stage"] = fitdoc
    report["discard_rates_m"] = {r["distance"]: float(r["discard_rate_m"]) for r in rows}
    _write(cfg, "report.json", analysis.dumps_report(report))
    _write_csv(cfg, "fig3.csv", analysis.fig3_csv(points))
    _write_csv(cfg, "parity.csv", analysis.parity_csv(
        {int(r["distance"]): (float(r["discard_rate"]), float(r["discard_rate_m"])) for r in rows}))
    entangler = [g.offset + p for g in net.gates for p in (2, 3)]
    _write_csv(cfg, "angles_hist.csv", analysis.angles_hist_csv(net.params[entangler]))
    return report


def stage_mps(cfg: RunConfig, chis: list[int] | None = None) -> list[dict]:
    net = _load_network(cfg)
    c = circuits.lower_network(net)
    cfgm = cfg.mera
    exact = oracle.ff_energy(cfgm.L, cfgm.h / cfgm.J, cfgm.J)
    out = []
    for chi in chis or cfg.raw["mps_chi"]:
        state = mps.apply_circuit(c, chi)
        e = mps.tfim_energy(state, cfgm.J, cfgm.h)
        out.append({"chi_mps": chi, "entropy_half": mps.entropy_half(state),
                    "entropy_half_bits": mps.entropy_half(state, base=2), "truncation_error": state.truncation_error,
                    "energy": e, "energy_rel_error": abs(e - exact) / abs(exact)})
    header = ["chi_mps", "entropy_half", "entropy_half_bits", "truncation_error", "energy", "energy_rel_error"]
    body = ",".join(header) + "\n" + "".join(",".join(repr(r[h]) for h in header) + "\n" for r in out)
    _write_csv(cfg, "mps.csv", body)
    return out


def run_all(cfg: RunConfig) -> dict:
    stage_optimize(cfg)
    stage_cone(cfg)
    stage_compile(cfg)
    stage_simulate(cfg)
    stage_mitigate(cfg)
    stage_fit(cfg)
    return stage_report(cfg)


# ------------------------------------------------------------------------ CLI


def _csv_ints(value: str | None) -> list[int] | None:
    if value is None:
        return None
    try:
        return [int(x) for x in value.split(",") if x.strip()]
    except ValueError as exc:
        raise ConfigError(f"expected a comma-separated list of integers, got {value!r}") from exc


def _common(f):
    opts = [
        click.option("--config", "config_path", type=str, default=None, help="Run configuration (JSON)."),
        click.option("--out", type=str, default=None, help="Output directory (MERA_OUT overrides)."),
        click.option("--seed", type=int, default=None, help="Master seed."),
        click.option("--distances", type=str, default=None, help="Comma-separated distances."),
        click.option("--shots", type=int, default=None, help="Shot budget per distance."),
        click.option("--zne-m", "zne_m", type=int, default=None, help="Noise amplification factor (odd)."),
        click.option("--noise-scale", "noise_scale", type=float, default=None, help="Global noise multiplier."),
        click.option("--threads", type=int, default=1, show_default=True, help="Parallel distance branches."),
    ]
    for o in reversed(opts):
        f = o(f)
    return f


def _make_config(config_path, out, seed, distances, shots, zne_m, noise_scale, threads) -> RunConfig:
    over: dict = {}
    if seed is not None:
        over["seed"] = seed
    d = _csv_ints(distances)
    if d is not None:
        over["distances"] = d
    if shots is not None:
        over["shots"] = shots
    if zne_m is not None:
        if zne_m % 2 == 0:
            raise ConfigError(f"--zne-m must be odd, got {zne_m}")
        over["zne_m"] = zne_m
    if noise_scale is not None:
        over["noise"] = {"scale": noise_scale}
    return load_config(config_path, over, out, max(1, threads))


def _run(fn):
    try:
        fn()
    except (ConfigError, MissingArtifact, NumericalFailure) as exc:
        click.echo(f"error: {exc}", err=True)
        sys.exit(exc.exit_code)
    except FloatingPointError as exc:
        click.echo(f"error: numerical failure: {exc}", err=True)
        sys.exit(NumericalFailure.exit_code)


@click.group()
@click.option("-v", "--verbose", is_flag=True, help="Log progress to stderr.")
def main(verbose: bool) -> None:
    """qMERA pipeline for the critical transverse-field Ising chain."""
    logging.basicConfig(level=logging.INFO if verbose else logging.WARNING, format="%(levelname)s %(name)s: %(message)s")


@main.command("optimize")
@_common
@click.option("--force", is_flag=True, help="Re-optimize even if network.json is current.")
def cmd_optimize(force, **kw):
    """Variationally optimize the network (writes network.json)."""
    _run(lambda: _echo_json(_opt_summary(stage_optimize(_make_config(**kw), force))))


def _opt_summary(net):
    return {"L": net.config.L, "chi": net.config.chi, "energy": mera.energy(net)}


@main.command("cone")
@_common
def cmd_cone(**kw):
    """Place site pairs, lower their causal cones and attach the XX gadget."""
    _run(lambda: _echo_json(stage_cone(_make_config(**kw))))


@main.command("compile")
@_common
@click.option("--distance", type=int, default=None, help="Compile a single distance.")
def cmd_compile(distance, **kw):
    """Qubit-reuse compilation and resource counts (fig1e.csv)."""

    def go():
        cfg = _make_config(**kw)
        rows = stage_compile(cfg, [distance] if distance else None)
        click.echo(compiler.resource_csv(rows), nl=False)

    _run(go)


@main.command("simulate")
@_common
def cmd_simulate(**kw):
    """Sample shots of the folded, compiled circuits."""
    _run(lambda: stage_simulate(_make_config(**kw)))


@main.command("mitigate")
@_common
def cmd_mitigate(**kw):
    """Post-select, extrapolate and bootstrap every distance."""

    def go():
        recs = stage_mitigate(_make_config(**kw))
        click.echo(mitigation.records_csv(recs), nl=False)

    _run(go)


@main.command("fit")
@_common
def cmd_fit(**kw):
    """Fit the power law and write report.json with its CSV tables."""

    def go():
        cfg = _make_config(**kw)
        stage_fit(cfg)
        rep = stage_report(cfg)
        _echo_json({"eta": rep["eta"], "eta_err": rep["eta_err"], "eta_noiseless": rep["eta_noiseless"]})

    _run(go)


@main.command("oracle")
@click.option("--L", "L", type=int, required=True, help="Chain length (even).")
@click.option("--g", "g", type=float, default=1.0, show_default=True, help="h / J.")
@click.option("--J", "J", type=float, default=1.0, show_default=True)
def cmd_oracle(L, g, J):
    """Exact free-fermion ground energy (and ED when L <= 16)."""

    def go():
        if L < 2 or L % 2:
            raise ConfigError(f"L must be even and at least 2, got {L}")
        e = oracle.ff_energy(L, g, J)
        doc = {"L": L, "g": g, "energy": e, "per_site": e / L}
        if L <= oracle.ED_MAX_SITES:
            doc["energy_ed"] = oracle.ed_solve(L, J, g * J, correlations=False).energy
        _echo_json(doc)

    _run(go)


@main.command("mps-entropy")
@_common
@click.option("--chi-mps", "chi_mps", type=str, default=None, help="Comma-separated MPS bond dimensions.")
def cmd_mps(chi_mps, **kw):
    """Half-chain entropy of the network output via MPS evolution (mps.csv)."""
    _run(lambda: _echo_json({"rows": stage_mps(_make_config(**kw), _csv_ints(chi_mps))}))


@main.command("run-all")
@_common
def cmd_run_all(**kw):
    """optimize, then per distance cone, compile, simulate; then mitigate, fit, report."""

    def go():
        rep = run_all(_make_config(**kw))
        _echo_json({"eta": rep["eta"], "eta_err": rep["eta_err"], "eta_noiseless": rep["eta_noiseless"],
                    "energy_per_site": rep["energy_per_site"]})

    _run(go)


def _echo_json(doc) -> None:
    click.echo(json.dumps(doc, indent=2, sort_keys=True, default=_jsonable))


def _jsonable(x):
    if isinstance(x, (np.floating, np.integer)):
        return x.item()
    if isinstance(x, float) and math.isnan(x):
        return None
    raise TypeError(f"not serializable: {type(x)}")


if __name__ == "__main__":
    main()
