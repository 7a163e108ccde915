"""Command-line front end.

    python -m magneto_qed <command> --config run.yaml --out results/

Every run writes ``config.resolved.yaml`` and ``summary.json`` to the output
directory, plus command-specific JSON/CSV tables whose column orders are
listed in ``schema.json`` at the repository root (and in ``OUTPUT_COLUMNS``).
"""

from __future__ import annotations

import argparse
import copy
import csv
import io
import json
import sys
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import causality, fields, modes
from .config import RunConfig, build_grid, build_model, load_config, omega_grid
from .couplings import factorize_gamma_A, partition_n3, random_passive, roundtrip_residual
from .errors import ConfigError, MagnetoQEDError
from .grid import SpectralGrid

COMMANDS = ("validate", "factorize", "modes", "sumrule", "spectra", "synth")

_XYZ = ("x", "y", "z")
_FIELD_COLUMNS = [f"{f}{a}_{p}" for f in ("D", "B", "E", "H") for a in _XYZ for p in ("re", "im")]

OUTPUT_COLUMNS = {
    "validate_<check>.csv": ["omega", "residual"],
    "modes.csv": ["omega", "n", "z_re", "z_im", "cell", "x", "y", "z"] + _FIELD_COLUMNS,
    "sumrule.csv": [
        "refine", "n_frequencies", "kx", "ky", "kz", "i", "j",
        "value_re", "value_im", "target_re", "target_im", "residual_re", "residual_im",
        "relative", "coverage",
    ],
    "spectra.csv": ["omega", "n", "z_re", "z_im", "cell"]
    + [f"{f}{a}_{p}" for f in ("Pnoise", "Mnoise") for a in _XYZ for p in ("re", "im")],
    "synth.csv": ["t"] + [f"{f}{a}" for f in ("D", "B", "E", "H", "P", "M") for a in _XYZ] + ["U_DB"],
}


@dataclass
class Check:
    name: str
    value: float
    tolerance: float
    passed: bool

    def to_dict(self) -> dict:
        return {"name": self.name, "value": self.value, "tolerance": self.tolerance, "passed": self.passed}


@dataclass
class Outcome:
    checks: list = field(default_factory=list)
    files: dict = field(default_factory=dict)  # name -> text
    notes: list = field(default_factory=list)

    def check(self, name, value, tolerance, passed=None):
        value = float(value)
        ok = value <= tolerance if passed is None else bool(passed)
        self.checks.append(Check(name, value, float(tolerance), ok))


def _c(z) -> list:
    return [float(np.real(z)), float(np.imag(z))]


def _csv(header, rows) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for row in rows:
        w.writerow([repr(float(x)) if isinstance(x, (float, np.floating)) else x for x in row])
    return buf.getvalue()


def _json(obj) -> str:
    return json.dumps(obj, indent=2, sort_keys=True) + "\n"


def _tol(cfg: RunConfig, name: str, scale: float) -> float:
    return cfg.tolerances[name] * scale


def _map(fn, items, workers: int):
    if workers > 1:
        with ThreadPoolExecutor(workers) as pool:
            return list(pool.map(fn, items))
    return [fn(x) for x in items]


# --------------------------------------------------------------------------
# commands


def run_validate(cfg: RunConfig, scale: float) -> Outcome:
    model = build_model(cfg)
    spec = cfg.command("validate")
    out = Outcome()
    reports = []
    for check in spec["checks"]:
        if check == "kk":
            rep = causality.kk_residual(model, window=tuple(spec["window"]), tol=_tol(cfg, "kk", scale))
        elif check == "onsager":
            rep = causality.onsager_residual(model, flips=spec["flips"], tol=_tol(cfg, "onsager", scale))
        elif check == "causality":
            rep = causality.causality_residual(model, tol=_tol(cfg, "causality", scale))
        elif check == "passivity":
            rep = causality.passivity_report(model, tol=_tol(cfg, "passivity", scale))
        else:
            rep = causality.cross_bound_report(model, tol=_tol(cfg, "cross_bound", scale))
        reports.append(rep.to_dict())
        out.check(rep.check, rep.max_residual, rep.tolerance, rep.passed)
        out.files[f"validate_{rep.check}.csv"] = rep.to_csv()
    out.files["validate.json"] = _json(reports)
    return out


def run_factorize(cfg: RunConfig, scale: float) -> Outcome:
    model = build_model(cfg)
    spec = cfg.command("factorize")
    tol = _tol(cfg, "roundtrip", scale)
    out = Outcome()
    result = {}
    worst = 0.0
    for region in model.regions:
        if region.is_vacuum:
            continue
        entries = []
        for w in spec["frequencies"]:
            m_a = region.gamma_A(np.array([w]))[0]
            if spec["partition"] == "n3":
                k = partition_n3(m_a, electric_share=spec["electric_share"], frequency=w)
            else:
                k = factorize_gamma_A(m_a, frequency=w)
            res = roundtrip_residual(k, m_a)
            worst = max(worst, res)
            entries.append({"frequency": w, "roundtrip": res, "couplings": k.to_dict()})
        result[region.name] = entries
    out.check("roundtrip", worst, tol)
    if spec["random_samples"]:
        rng = np.random.default_rng(cfg["seed"])
        rand = 0.0
        for _ in range(spec["random_samples"]):
            m_a = random_passive(rng)
            rand = max(rand, roundtrip_residual(factorize_gamma_A(m_a), m_a))
        out.check("roundtrip_random", rand, tol)
        result["_random"] = {"samples": spec["random_samples"], "seed": cfg["seed"], "max_residual": rand}
    out.files["couplings.json"] = _json(result)
    return out


def _solve(cfg: RunConfig, model, grid: SpectralGrid, freqs, workers: int):
    return _map(lambda w: modes.solve_modes(model, grid, w, cfg.c, cfg.hbar), freqs, workers)


def run_modes(cfg: RunConfig, scale: float, workers: int) -> Outcome:
    model = build_model(cfg)
    grid = build_grid(cfg)
    spec = cfg.command("modes")
    fams = _solve(cfg, model, grid, spec["frequencies"], workers)
    out = Outcome()
    worst = {"eigen_residual": 0.0, "normalization": 0.0, "transversality": 0.0, "curl": 0.0}
    records, rows = [], []
    pos = grid.cell_positions()
    for fam in fams:
        for m in fam.modes:
            eh = modes.derived_EH(m, fam.pair)
            x = np.concatenate([m.fields(), eh], axis=1)
            target = modes.normalization_target(m.z, cfg.hbar)
            worst["eigen_residual"] = max(worst["eigen_residual"], m.eigen_residual)
            worst["normalization"] = max(worst["normalization"], abs(m.quad_form - target) / target)
            worst["transversality"] = max(worst["transversality"], modes.transversality(m))
            worst["curl"] = max(worst["curl"], modes.curl_consistency(m, fam.pair))
            cols = np.stack([x.real, x.imag], axis=-1).reshape(grid.n_cells, -1)
            records.append(
                {
                    "omega": m.omega,
                    "n": m.n,
                    "z": _c(m.z),
                    "grid": {"box": list(grid.box), "points": list(grid.points)},
                    "eigen_residual": m.eigen_residual,
                    "quad_form": m.quad_form,
                    "flags": list(m.flags),
                    "columns": _FIELD_COLUMNS,
                    "fields": cols.tolist(),
                }
            )
            for ci in range(grid.n_cells):
                rows.append([m.omega, m.n, m.z.real, m.z.imag, ci, *pos[ci], *cols[ci]])
    for key, value in worst.items():
        out.check(key, value, _tol(cfg, key, scale))
    counts = [{"omega": f.omega, "finite": len(f.modes), "infinite": f.n_infinite, "dimension": f.n_total} for f in fams]
    fmt = spec["format"]
    if fmt in ("json", "both"):
        out.files["modes.json"] = _json({"counts": counts, "modes": records})
    if fmt in ("csv", "both"):
        out.files["modes.csv"] = _csv(OUTPUT_COLUMNS["modes.csv"], rows)
        out.files["mode_counts.json"] = _json(counts)
    return out


def run_sumrule(cfg: RunConfig, scale: float, workers: int) -> Outcome:
    model = build_model(cfg)
    spec = cfg.command("sumrule")
    k = np.asarray(spec["k"], dtype=float)
    comps = tuple(spec["components"])
    out = Outcome()
    rows, rel = [], []
    for refine in spec["refine"]:
        res = fields.sum_rule(model, k, comps, omega_grid(cfg, refine), cfg.hbar, cfg.c, workers)
        r = res.relative(cfg.hbar, cfg.c)
        rel.append(r)
        rows.append(
            [refine, res.n_frequencies, *k, *comps, *_c(res.value), *_c(res.target), *_c(res.residual), r, res.coverage]
        )
        if res.warning:
            out.notes.append(res.warning)
    out.check("sumrule", rel[0], _tol(cfg, "sumrule", scale))
    if len(rel) > 1:
        # refinement must not make things worse beyond quadrature noise
        ok = all(b <= a * (1 + 1e-6) + 1e-9 for a, b in zip(rel, rel[1:]))
        out.check("sumrule_refinement", rel[-1], rel[0], ok)
    out.files["sumrule.csv"] = _csv(OUTPUT_COLUMNS["sumrule.csv"], rows)
    return out


def run_spectra(cfg: RunConfig, scale: float, workers: int) -> Outcome:
    model = build_model(cfg)
    grid = build_grid(cfg)
    fams = _solve(cfg, model, grid, cfg.command("spectra")["frequencies"], workers)
    out = Outcome()
    rows = []
    for fam in fams:
        ns = fields.noise_spectra_TP(fam)
        for m, p, mm in zip(fam.modes, ns.p_noise, ns.m_noise):
            v = np.concatenate([p, mm], axis=1)
            cols = np.stack([v.real, v.imag], axis=-1).reshape(grid.n_cells, -1)
            for ci in range(grid.n_cells):
                rows.append([m.omega, m.n, m.z.real, m.z.imag, ci, *cols[ci]])
    out.notes.append(fields.TP_ONLY)
    out.files["spectra.csv"] = _csv(OUTPUT_COLUMNS["spectra.csv"], rows)
    return out


def run_synth(cfg: RunConfig, scale: float, workers: int) -> Outcome:
    model = build_model(cfg)
    grid = build_grid(cfg)
    spec = cfg.command("synth")
    out = Outcome()
    out.notes.append(fields.TP_ONLY)
    if spec["amplitudes"]:
        fams = _solve(cfg, model, grid, spec["frequencies"], workers)
        amps = {(a["bin"], a["n"]): complex(*a["value"]) for a in spec["amplitudes"]}
        for bi, _ in amps:
            if bi >= len(fams):
                raise ConfigError(f"commands.synth.amplitudes: bin {bi} outside the frequency list")
        ts = spec["times"]
        t = np.linspace(ts["start"], ts["stop"], ts["points"])
        state = fields.synthesize_classical(fams, amps, t)
        if spec["cell"] >= grid.n_cells:
            raise ConfigError("commands.synth.cell: cell index outside the grid")
        u, _ = fields.energy_and_flux(state, grid.cell_volume, cfg.c)
        c = spec["cell"]
        cols = [state.d, state.b, state.e, state.h, state.p, state.m]
        rows = [[t[i], *np.concatenate([f[i, c] for f in cols]), u[i]] for i in range(t.size)]
        out.files["synth.csv"] = _csv(OUTPUT_COLUMNS["synth.csv"], rows)
    tr = spec["transient"]
    if tr is not None:
        res = fields.simulate_transient(
            model, cfg["grid"]["box"][0], tr["points"], tuple(tr["window"]), tr["centre"],
            tr["width"], tr["carrier"], tr["duration"], tr["dt"], cfg.c,
        )
        out.check("energy_balance", res.balance_error, _tol(cfg, "energy", scale))
        out.files["transient.json"] = _json(
            {
                "flux_in": res.flux_in,
                "energy_change": res.energy_change,
                "dissipated_spectral": res.dissipated_spectral,
                "dissipated_direct": res.dissipated_direct,
                "balance_error": res.balance_error,
                "window": list(res.window),
            }
        )
    return out


def dispatch(command: str, cfg: RunConfig, tolerance_scale: float = 1.0, workers: int = 1) -> Outcome:
    if command == "validate":
        return run_validate(cfg, tolerance_scale)
    if command == "factorize":
        return run_factorize(cfg, tolerance_scale)
    if command == "modes":
        return run_modes(cfg, tolerance_scale, workers)
    if command == "sumrule":
        return run_sumrule(cfg, tolerance_scale, workers)
    if command == "spectra":
        return run_spectra(cfg, tolerance_scale, workers)
    if command == "synth":
        return run_synth(cfg, tolerance_scale, workers)
    raise ConfigError(f"unknown command {command!r}")


def _parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="magneto-qed", description="Lossy magneto-electric response and polariton modes.")
    p.add_argument("command", choices=COMMANDS)
    p.add_argument("--config", required=True, help="YAML run configuration")
    p.add_argument("--out", default="out", help="output directory")
    p.add_argument("--tolerance-scale", type=float, default=1.0, help="multiply every tolerance")
    p.add_argument("--workers", type=int, default=None, help="per-frequency worker threads")
    p.add_argument("--seed", type=int, default=None, help="override the config seed")
    return p


def main(argv=None) -> int:
    args = _parser().parse_args(argv)
    out_dir = Path(args.out)
    summary = {"command": args.command, "config": args.config}
    status = 0
    try:
        if args.tolerance_scale <= 0:
            raise ConfigError("--tolerance-scale must be positive")
        cfg = load_config(args.config)
        data = copy.deepcopy(cfg.data)
        if args.seed is not None:
            data["seed"] = args.seed
        if args.workers is not None:
            if args.workers < 1:
                raise ConfigError("--workers must be at least 1")
            data["workers"] = args.workers
        cfg = RunConfig(data)
        out_dir.mkdir(parents=True, exist_ok=True)
        (out_dir / "config.resolved.yaml").write_text(cfg.echo())
        outcome = dispatch(args.command, cfg, args.tolerance_scale, cfg["workers"])
        for name, text in sorted(outcome.files.items()):
            (out_dir / name).write_text(text)
        status = 0 if all(c.passed for c in outcome.checks) else 1
        summary.update(
            {
                "checks": [c.to_dict() for c in outcome.checks],
                "files": sorted(outcome.files),
                "notes": outcome.notes,
                "tolerance_scale": args.tolerance_scale,
            }
        )
        for c in outcome.checks:
            print(f"{'PASS' if c.passed else 'FAIL'} {c.name}: {c.value:.3e} (tolerance {c.tolerance:.3e})")
    except MagnetoQEDError as exc:
        status = exc.exit_code
        summary["error"] = {"type": type(exc).__name__, "message": str(exc)}
        print(f"error: {exc}", file=sys.stderr)
    except np.linalg.LinAlgError as exc:
        status = 3
        summary["error"] = {"type": "LinAlgError", "message": str(exc)}
        print(f"error: {exc}", file=sys.stderr)
    summary["exit_code"] = status
    try:
        out_dir.mkdir(parents=True, exist_ok=True)
        (out_dir / "summary.json").write_text(_json(summary))
    except OSError as exc:
        print(f"error: cannot write summary: {exc}", file=sys.stderr)
    return status


if __name__ == "__main__":
    sys.exit(main())
