"""Command-line scenario runner.

Usage::

    lsmlab template > scenario.json
    lsmlab spectrum --config scenario.json --out run/
    lsmlab report --out fit/ run/results.json other/sweep.csv

Each pipeline writes ``results.json`` (17 significant digits) and the CSV
projections ``sweep.csv``, ``bounds.csv`` and ``flow_theta.csv`` (9 digits).
Exit codes: 0 success, 2 config or usage error, 3 LSM precondition,
4 numeric failure, 5 bound violation.
"""

from __future__ import annotations

import argparse
import copy
import csv
import io
import json
import math
import os
import platform
import sys
from fractions import Fraction
from pathlib import Path

import numpy as np

from . import __version__
from .errors import BoundViolation, ConfigError, LSMLabError, UsageError

PIPELINES = ("spectrum", "twist-scan", "lsm-run", "lr-check", "cluster-check")

DEFAULTS = {
    "model": {
        "kind": "heisenberg",
        "L": [4],
        "legs": 1,
        "geometry": "ring",
        "spins": ["1/2"],
        "J": 1.0,
        "J_rung": None,
        "delta": 1.0,
        "strong": 1.0,
        "weak": 0.25,
    },
    "flow": {
        "theta_steps": 512,
        "mode": "rotate",
        "filter_backend": "spectral",
        "m": None,
        "a": None,
        "T": None,
        "panels": None,
    },
    "twist": {
        "thetas": [0.3, 1.0, math.pi, 2 * math.pi],
        "line": [0.0, 0.7, 2.1],
        "h": 1e-4,
    },
    "bounds": {
        "lambda": 0.5,
        "decay_power": 2.0,
        "t_max": 2.0,
        "points": 21,
        "theta": 1.0,
        "observable": "S3",
        "cluster_points": 41,
    },
    "seed": 0,
}

DOCS = {
    "model": {
        "kind": "heisenberg | dimerized (spin-1/2 ring, alternating strong/weak bonds)",
        "L": "even ring length, or a list of lengths for a sweep",
        "legs": "transverse sites per column",
        "geometry": "ring | ladder | cylinder",
        "spins": "spin magnitude per transverse site, e.g. \"1/2\" or 1",
        "J": "leg coupling",
        "J_rung": "rung coupling, null means J",
        "delta": "XXZ anisotropy, 1 is isotropic",
        "strong": "dimerized chain: odd bonds",
        "weak": "dimerized chain: even bonds",
    },
    "flow": {
        "theta_steps": "RK4 steps on [0, 2 pi], at least 64",
        "mode": "rotate (conjugate the theta = 0 generator) | rebuild (filter H(theta) at every stage)",
        "filter_backend": "spectral | quadrature",
        "m": "twist column, null picks ceil(L/4)",
        "a": "filter width, null means gap / L",
        "T": "filter time cutoff, null means L / 2",
        "panels": "Gauss-Legendre panels for the filter weights, null is automatic",
    },
    "twist": {
        "thetas": "angles for the spectral equivalence check",
        "line": "angles on theta' = -theta for derivative checks",
        "h": "central difference step",
    },
    "bounds": {
        "lambda": "decay rate in F_lambda(r) = e^{-lambda r} (1 + r)^-p",
        "decay_power": "p in the decay function",
        "t_max": "largest time in Lieb-Robinson and restriction grids",
        "points": "grid points per time grid",
        "theta": "twist angle for the restricted dynamics check",
        "observable": "S3 | random (one-site hermitian drawn from the seed)",
        "cluster_points": "grid points inside the clustering time window",
    },
    "seed": "seed for randomized observables",
}


# -- serialization ---------------------------------------------------------------


def _json_value(x, indent: int, level: int) -> str:
    pad = " " * (indent * (level + 1))
    end = " " * (indent * level)
    if x is None or isinstance(x, bool):
        return json.dumps(x)
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    if isinstance(x, (float, np.floating)):
        x = float(x)
        return format(x, ".17g") if math.isfinite(x) else "null"
    if isinstance(x, str):
        return json.dumps(x)
    if isinstance(x, dict):
        if not x:
            return "{}"
        items = [f"{pad}{json.dumps(str(k))}: {_json_value(v, indent, level + 1)}" for k, v in x.items()]
        return "{\n" + ",\n".join(items) + "\n" + end + "}"
    if isinstance(x, (list, tuple, np.ndarray)):
        x = list(x)
        if not x:
            return "[]"
        if all(not isinstance(v, (dict, list, tuple, np.ndarray)) for v in x):
            return "[" + ", ".join(_json_value(v, indent, level + 1) for v in x) + "]"
        return "[\n" + ",\n".join(pad + _json_value(v, indent, level + 1) for v in x) + "\n" + end + "]"
    raise TypeError(f"cannot serialize {type(x).__name__}")


def dumps(obj, indent: int = 2) -> str:
    """JSON with every float written to 17 significant digits."""
    return _json_value(obj, indent, 0) + "\n"


def _csv_cell(x) -> str:
    if x is None:
        return ""
    if isinstance(x, (bool, np.bool_)):
        return "true" if x else "false"
    if isinstance(x, (float, np.floating)):
        return format(float(x), ".9g")
    return str(x)


def write_csv(path: Path, columns, rows) -> None:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(columns)
    for r in rows:
        w.writerow([_csv_cell(r.get(c)) for c in columns])
    _atomic_write(path, buf.getvalue())


def _atomic_write(path: Path, text: str) -> None:
    tmp = path.with_suffix(path.suffix + ".tmp")
    tmp.write_text(text)
    os.replace(tmp, path)


SWEEP_COLUMNS = ["L", "dim", "E0", "gamma_L", "a", "T", "dE", "overlap", "refined_bound", "logL_over_L"]
BOUND_COLUMNS = ["pipeline", "L", "name", "points", "worst_margin", "scale", "passed"]
FLOW_COLUMNS = ["L", "theta", "norm", "energy", "overlap", "trace_distance", "d1_norm", "d1_d2_real", "d1_d2_imag"]


# -- configuration ----------------------------------------------------------------


def _line_of(text: str, key: str) -> int:
    for k, line in enumerate(text.splitlines(), 1):
        if f'"{key}"' in line:
            return k
    return 1


def load_config(path) -> tuple[dict, str]:
    """Parse and validate a scenario file; errors name the offending line."""
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise ConfigError(f"{path}: cannot read config: {exc.strerror}") from exc
    try:
        raw = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path}:{exc.lineno}: invalid JSON: {exc.msg}") from exc
    if not isinstance(raw, dict):
        raise ConfigError(f"{path}:1: top level must be an object")

    def fail(key, msg):
        raise ConfigError(f"{path}:{_line_of(text, key)}: {msg}")

    cfg = copy.deepcopy(DEFAULTS)
    for key, val in raw.items():
        if key.startswith("_"):
            continue
        if key not in cfg:
            fail(key, f"unknown key {key!r}")
        if isinstance(cfg[key], dict):
            if not isinstance(val, dict):
                fail(key, f"{key} must be an object")
            for sub, v in val.items():
                if sub.startswith("_"):
                    continue
                if sub not in cfg[key]:
                    fail(sub, f"unknown key {key}.{sub}")
                cfg[key][sub] = v
        else:
            cfg[key] = val
    try:
        _validate(cfg)
    except ConfigError as exc:
        key, msg = exc.args[0]
        fail(key, msg)
    return cfg, text


def _validate(cfg: dict) -> None:
    def bad(key, msg):
        raise ConfigError((key, msg))

    m = cfg["model"]
    Ls = m["L"] if isinstance(m["L"], list) else [m["L"]]
    if not Ls:
        bad("L", "model.L: empty sweep")
    for L in Ls:
        if not isinstance(L, int) or isinstance(L, bool) or L < 2:
            bad("L", f"model.L: expected integers >= 2, got {L!r}")
        if L % 2:
            bad("L", f"model.L: L must be even, got {L}")
    m["L"] = sorted(set(Ls))
    if m["kind"] not in ("heisenberg", "dimerized"):
        bad("kind", f"model.kind: unknown model {m['kind']!r}")
    if m["geometry"] not in ("ring", "ladder", "cylinder"):
        bad("geometry", f"model.geometry: unknown geometry {m['geometry']!r}")
    if not isinstance(m["legs"], int) or m["legs"] < 1:
        bad("legs", "model.legs: expected a positive integer")
    try:
        spins = [Fraction(str(s)) for s in m["spins"]]
    except (ValueError, TypeError):
        bad("spins", f"model.spins: cannot parse {m['spins']!r}")
    if len(spins) == 1 and m["legs"] > 1:
        spins = spins * m["legs"]
    if len(spins) != m["legs"] or any(s <= 0 or (2 * s).denominator != 1 for s in spins):
        bad("spins", f"model.spins: need {m['legs']} positive half-integers")
    m["spins"] = [str(s) for s in spins]
    for k in ("J", "delta", "strong", "weak"):
        if not isinstance(m[k], (int, float)) or isinstance(m[k], bool):
            bad(k, f"model.{k}: expected a number")
    f = cfg["flow"]
    if not isinstance(f["theta_steps"], int) or f["theta_steps"] < 64:
        bad("theta_steps", "flow.theta_steps: expected an integer >= 64")
    if f["mode"] not in ("rotate", "rebuild"):
        bad("mode", f"flow.mode: unknown mode {f['mode']!r}")
    if f["filter_backend"] not in ("spectral", "quadrature"):
        bad("filter_backend", f"flow.filter_backend: unknown backend {f['filter_backend']!r}")
    for k in ("a", "T"):
        if f[k] is not None and not (isinstance(f[k], (int, float)) and f[k] > 0):
            bad(k, f"flow.{k}: expected a positive number or null")
    b = cfg["bounds"]
    if b["observable"] not in ("S3", "random"):
        bad("observable", f"bounds.observable: unknown observable {b['observable']!r}")
    for k in ("lambda", "decay_power", "t_max"):
        if not isinstance(b[k], (int, float)) or not b[k] > 0:
            bad(k, f"bounds.{k}: expected a positive number")
    for k in ("points", "cluster_points"):
        if not isinstance(b[k], int) or b[k] < 2:
            bad(k, f"bounds.{k}: expected an integer >= 2")
    if not isinstance(cfg["seed"], int):
        bad("seed", "seed: expected an integer")


def template() -> str:
    """A scenario file with every default and a ``_doc`` note per block."""
    out = {}
    for key, val in DEFAULTS.items():
        if isinstance(val, dict):
            out[key] = {"_doc": DOCS[key], **val}
        else:
            out["_doc_" + key] = DOCS[key]
            out[key] = val
    return json.dumps(out, indent=2) + "\n"


# -- model construction ---------------------------------------------------------------


def build_interaction(model: dict, L: int):
    from .lattice import Lattice
    from .model import dimerized_chain, heisenberg

    if model["kind"] == "dimerized":
        return dimerized_chain(L, model["strong"], model["weak"])
    lat = Lattice(L, model["legs"], model["geometry"], tuple(Fraction(s) for s in model["spins"]))
    return heisenberg(lat, model["J"], model["J_rung"], model["delta"])


class Context:
    def __init__(self, cfg: dict, dense_max_dim: int, seed: int):
        self.cfg = cfg
        self.dense_max_dim = dense_max_dim
        self.rng = np.random.default_rng(seed)
        self.sweep, self.bounds, self.flow_rows = [], [], []
        self.details = []

    def add_reports(self, pipeline: str, L: int, reports) -> None:
        for r in reports:
            row = {"pipeline": pipeline, "L": L, "name": r.name, "points": int(len(r.grid)),
                   "worst_margin": r.worst_margin, "scale": r.scale, "passed": r.passed}
            self.bounds.append(row)
            self.details.append({**row, "meta": {k: v for k, v in r.meta.items() if np.isscalar(v)},
                                 "grid": r.grid, "lhs": r.lhs, "rhs": r.rhs})


def _diagonalize(H, interaction, ctx: Context):
    from .algebra import s3_diagonal
    from .spectral import diagonalize

    lat = interaction.lattice
    sectors = s3_diagonal(lat, range(lat.n_sites))
    return diagonalize(H, "auto", k=6, sectors=sectors, dense_max_dim=ctx.dense_max_dim)


def _sweep_row(L, dim, E0, gap, **extra):
    row = {"L": L, "dim": dim, "E0": E0, "gamma_L": gap, "logL_over_L": math.log(L) / L}
    row.update(extra)
    return row


# -- pipelines --------------------------------------------------------------------------


def run_spectrum(ctx: Context, L: int) -> dict:
    from .algebra import translation_operator
    from .lattice import DecayFunction, interaction_norms
    from .model import build_hamiltonian
    from .spectral import ground_and_gap, simple_gap_bound

    I = build_interaction(ctx.cfg["model"], L)
    H = build_hamiltonian(I)
    spec = _diagonalize(H, I, ctx)
    rep = ground_and_gap(spec, translation_operator(I.lattice))
    out = {"L": L, "dim": spec.dim, "backend": spec.backend, "E0": rep.E0, "gap": rep.gap,
           "unique": not rep.degenerate, "translation_phase": rep.translation_eigenvalue_phase,
           "translation_eigenvalue": [rep.translation_eigenvalue.real, rep.translation_eigenvalue.imag],
           "lowest": spec.energies[:6]}
    if spec.complete and not rep.degenerate:
        _, one, _ = interaction_norms(I.lattice, I, DecayFunction.polynomial(1))
        sgb = simple_gap_bound(H, spec, I.lattice.site_dims(), 0, one_norm=one)
        out["simple_gap_bound"] = sgb.value
        out["two_one_norm"] = 2 * one
    ctx.sweep.append(_sweep_row(L, spec.dim, rep.E0, rep.gap))
    return out


def run_twist_scan(ctx: Context, L: int) -> dict:
    from .algebra import translation_operator
    from .model import (TwistConfig, build_hamiltonian, odd_parity, twisted_hamiltonian,
                        twisted_translation)
    from .spectral import energy_surface, lowest_energies
    from .verify import tolerance_report

    tw = ctx.cfg["twist"]
    I = build_interaction(ctx.cfg["model"], L)
    H = build_hamiltonian(I)
    m = TwistConfig().resolve(I).m
    if H.shape[0] > ctx.dense_max_dim:
        raise UsageError(f"twist-scan needs dense spectra; dim {H.shape[0]} > {ctx.dense_max_dim}")
    E = np.linalg.eigvalsh(H.toarray())
    devs = []
    for th in tw["thetas"]:
        Ht = twisted_hamiltonian(H, I, TwistConfig(th, -th, m)).full
        devs.append(float(np.max(np.abs(np.linalg.eigvalsh(Ht.toarray()) - E))))

    def builder(a, b):
        return twisted_hamiltonian(H, I, TwistConfig(a, b, m)).full

    surf = energy_surface(builder, tw["line"], line=tw["line"], h=tw["h"])
    E0 = float(E[0])
    T = translation_operator(I.lattice)
    sign = -1.0 if odd_parity(I.lattice) else 1.0
    T2 = twisted_translation(I.lattice, TwistConfig(2 * math.pi, 0.0, m), T)
    diff = T2 - sign * T
    tdev = float(abs(diff).max()) if diff.nnz else 0.0  # permutation support: max entry = operator norm
    reports = [
        tolerance_report("unitary_equivalence", tw["thetas"], devs, 1e-10),
        tolerance_report("dE0_dtheta", tw["line"], np.abs(surf.d1), 1e-6),
        tolerance_report("dE0_dtheta_prime", tw["line"], np.abs(surf.d2), 1e-6),
        tolerance_report("E0_constant", tw["line"], np.abs(surf.line_E0 - E0), 1e-10),
        tolerance_report("translation_parity", [2 * math.pi], [tdev], 1e-12, sign=sign),
    ]
    ctx.add_reports("twist-scan", L, reports)
    ctx.sweep.append(_sweep_row(L, H.shape[0], E0, float(E[1] - E[0])))
    return {"L": L, "m": m, "spectral_deviation": devs, "line": tw["line"], "line_E0": surf.line_E0,
            "d1": surf.d1, "d2": surf.d2, "odd_parity": sign < 0, "translation_deviation": tdev,
            "lowest_at_pi": lowest_energies(builder(math.pi, -math.pi), 2)}


def run_lsm(ctx: Context, L: int) -> dict:
    from .filter import FilterParams
    from .model import build_hamiltonian
    from .variational import FlowConfig, hastings_flow, lsm_diagnostics, refined_gap_bound
    from .verify import tolerance_report

    f = ctx.cfg["flow"]
    I = build_interaction(ctx.cfg["model"], L)
    H = build_hamiltonian(I)
    if H.shape[0] > ctx.dense_max_dim:
        raise UsageError(f"lsm-run needs dense spectra; dim {H.shape[0]} > {ctx.dense_max_dim}")
    spec = _diagonalize(H, I, ctx)
    gap = float(spec.energies[1] - spec.energies[0])
    params = None
    if f["a"] is not None or f["T"] is not None:
        d = FilterParams.from_gap(gap, L) if gap > 0 else FilterParams(1.0 / L, L / 2)
        params = FilterParams(f["a"] or d.a, f["T"] or d.T)
    fc = FlowConfig(theta_steps=f["theta_steps"], mode=f["mode"], filter_backend=f["filter_backend"],
                    m=f["m"], panels=f["panels"])
    flow = hastings_flow(I, params, fc, H=H, spec=spec)
    diag = lsm_diagnostics(flow, I, spec=spec, H=H)
    bound = refined_gap_bound(diag.excitation_energy, diag.overlap)
    reports = [
        tolerance_report("flow_norm", [2 * math.pi], [abs(flow.norms[-1] - 1.0)], 1e-8),
        _margin_report("overlap_majorant", diag.overlap, diag.overlap_majorant),
        _margin_report("refined_gap_bound", flow.gap, bound),
    ]
    ctx.add_reports("lsm-run", L, reports)
    for k, th in enumerate(flow.thetas):
        z = flow.d1_d2[k]
        ctx.flow_rows.append({"L": L, "theta": th, "norm": flow.norms[k], "energy": flow.energies[k],
                              "overlap": flow.overlaps[k], "trace_distance": flow.trace_distances[k],
                              "d1_norm": flow.d1_norms[k], "d1_d2_real": z.real, "d1_d2_imag": z.imag})
    ctx.sweep.append(_sweep_row(L, spec.dim, flow.E0, flow.gap, a=flow.params.a, T=flow.params.T,
                                dE=diag.excitation_energy, overlap=diag.overlap, refined_bound=bound))
    return {"L": L, "m": flow.m, "a": flow.params.a, "T": flow.params.T, "theta_steps": fc.theta_steps,
            "mode": fc.mode, "filter_backend": fc.filter_backend, "E0": flow.E0, "gap": flow.gap,
            "excitation_energy": diag.excitation_energy, "overlap": diag.overlap,
            "overlap_majorant": diag.overlap_majorant, "refined_bound": bound,
            "translation_sign": diag.translation_sign, "norm_drift": flow.norm_drift,
            "antihermitian_residual": flow.antihermitian_residual}


def _margin_report(name, lhs, rhs):
    from .verify import _report

    return _report(name, [0.0], [lhs], [rhs])


def _observables(ctx: Context, lattice, x: int, y: int):
    from .algebra import LocalOperator, site_operator

    if ctx.cfg["bounds"]["observable"] == "S3":
        return site_operator(lattice, x, "S3"), site_operator(lattice, y, "S3")
    out = []
    for site in (x, y):
        d = lattice.site_dims()[site]
        G = ctx.rng.normal(size=(d, d)) + 1j * ctx.rng.normal(size=(d, d))
        out.append(LocalOperator((site,), (G + G.conj().T) / 2))
    return out


def _decay(ctx: Context, lam=None):
    from .lattice import DecayFunction

    b = ctx.cfg["bounds"]
    p = b["decay_power"]
    return DecayFunction.polynomial(1, p - 1.0, b["lambda"] if lam is None else lam)


def run_lr(ctx: Context, L: int) -> dict:
    from .algebra import embed
    from .filter import FilterParams
    from .lattice import Site
    from .model import TwistConfig, build_hamiltonian, twist_derivative, twisted_hamiltonian
    from . import verify as V

    b = ctx.cfg["bounds"]
    I = build_interaction(ctx.cfg["model"], L)
    lat = I.lattice
    H = build_hamiltonian(I)
    if H.shape[0] > ctx.dense_max_dim:
        raise UsageError(f"lr-check needs dense evolution; dim {H.shape[0]} > {ctx.dense_max_dim}")
    spec = _diagonalize(H, I, ctx)
    F = _decay(ctx)
    ts = np.linspace(0.0, b["t_max"], b["points"])
    y = lat.index(Site(L // 2 + 1, 0))
    A, B = _observables(ctx, lat, 0, y)
    lr = V.lieb_robinson_check(I, A, B, F, ts, spec=spec)
    cfg = TwistConfig(b["theta"], -b["theta"]).resolve(I)
    split = twisted_hamiltonian(H, I, cfg)
    A1 = embed(twist_derivative(I, cfg)[0], lat)
    tr = np.linspace(0.0, min(1.0, b["t_max"]), min(b["points"], 11))
    rd = V.restriction_dynamics_check(split.full, split.strip, A1, tr)
    gap = float(spec.energies[1] - spec.energies[0])
    params = FilterParams.from_gap(gap, L)
    c3 = b["lambda"] * L / 4
    env = V.fit_envelope(split.full, split.strip, A1, params.a, c3)
    dc = V.decoupling_check(split.full, split.strip, A1, params, c3, env)
    ctx.add_reports("lr-check", L, [lr, rd, dc])
    ctx.sweep.append(_sweep_row(L, spec.dim, spec.E0, gap))
    return {"L": L, "sites": [0, y], "lieb_robinson": lr.summary(), "restricted_dynamics": rd.summary(),
            "decoupling": dc.summary(), "envelope": {"c1": env.c1, "c2": env.c2, "c3": env.c3, "M": env.M}}


def run_cluster(ctx: Context, L: int) -> dict:
    from .algebra import embed
    from .model import build_hamiltonian
    from . import verify as V

    b = ctx.cfg["bounds"]
    I = build_interaction(ctx.cfg["model"], L)
    lat = I.lattice
    H = build_hamiltonian(I)
    if H.shape[0] > ctx.dense_max_dim:
        raise UsageError(f"cluster-check needs the full spectrum; dim {H.shape[0]} > {ctx.dense_max_dim}")
    spec = _diagonalize(H, I, ctx)
    gap = float(spec.energies[1] - spec.energies[0])
    y = lat.n_sites // 2
    A, B = _observables(ctx, lat, 0, y)
    reps = V.clustering_check(I, spec, A, B, _decay(ctx), points=b["cluster_points"])
    Ad = embed(A, lat).toarray()
    Ad = Ad - np.vdot(spec.psi0, Ad @ spec.psi0) * np.eye(Ad.shape[0])
    pairs = [(gap / 10, 1.0), (gap / 10, 2.0), (gap / 20, 4.0), (gap / 5, 1.0), (gap / 4, 2.0)]
    gl = V.gap_lemma_check(spec, Ad, pairs)
    ctx.add_reports("cluster-check", L, reps + [gl])
    ctx.sweep.append(_sweep_row(L, spec.dim, spec.E0, gap))
    return {"L": L, "sites": [0, y], "gap": gap, "pairs": [list(p) for p in pairs],
            "clustering": reps[0].summary(), "integrals": reps[1].summary(), "gap_lemma": gl.summary()}


RUNNERS = {
    "spectrum": run_spectrum,
    "twist-scan": run_twist_scan,
    "lsm-run": run_lsm,
    "lr-check": run_lr,
    "cluster-check": run_cluster,
}


def _versions() -> dict:
    import scipy

    from .filter import KERNEL

    return {"lsmlab": __version__, "numpy": np.__version__, "scipy": scipy.__version__,
            "python": platform.python_version(), "filter_kernel": KERNEL}


def run_scenario(pipeline: str, config_path, out_dir, dense_max_dim: int = 8192, seed: int | None = None) -> int:
    """Run one pipeline over the configured L sweep and write all outputs."""
    cfg, _ = load_config(config_path)
    if seed is not None:
        cfg["seed"] = seed
    ctx = Context(cfg, dense_max_dim, cfg["seed"])
    results = [RUNNERS[pipeline](ctx, L) for L in cfg["model"]["L"]]
    failed = [r for r in ctx.bounds if not r["passed"]]
    doc = {"pipeline": pipeline, "config": cfg, "dense_max_dim": dense_max_dim, "versions": _versions(),
           "results": results, "sweep": ctx.sweep, "bounds": ctx.details, "flow_theta": ctx.flow_rows,
           "passed": not failed}
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    _atomic_write(out / "results.json", dumps(doc))
    write_csv(out / "sweep.csv", SWEEP_COLUMNS, ctx.sweep)
    write_csv(out / "bounds.csv", BOUND_COLUMNS, ctx.bounds)
    write_csv(out / "flow_theta.csv", FLOW_COLUMNS, ctx.flow_rows)
    if failed:
        names = ", ".join(f"{r['name']} (L={r['L']}, margin {r['worst_margin']:.3e})" for r in failed)
        raise BoundViolation(f"bound violated: {names}")
    return 0


# -- report -----------------------------------------------------------------------------


def _read_rows(path: Path) -> list[dict]:
    if path.suffix == ".json":
        try:
            doc = json.loads(path.read_text())
        except (OSError, json.JSONDecodeError) as exc:
            raise UsageError(f"{path}: cannot read results: {exc}") from exc
        return [{"L": int(r["L"]), "gamma_L": float(r["gamma_L"])} for r in doc.get("sweep", [])]
    with open(path, newline="") as fh:
        return [{"L": int(r["L"]), "gamma_L": float(r["gamma_L"])} for r in csv.DictReader(fh)]


def fit_log_over_L(Ls, gaps) -> tuple[float, np.ndarray]:
    """Least-squares C in gamma_L = C log(L) / L, and the per-L ratios gamma_L L / log L."""
    Ls = np.asarray(Ls, dtype=float)
    g = np.asarray(gaps, dtype=float)
    if len(Ls) < 2:
        raise UsageError(f"report needs at least 2 sweep rows, got {len(Ls)}")
    x = np.log(Ls) / Ls
    C = float(np.dot(x, g) / np.dot(x, x))
    return C, g / x


def run_report(paths, out_dir) -> int:
    rows = []
    for p in paths:
        p = Path(p)
        if not p.exists():
            raise UsageError(f"{p}: no such file")
        rows.extend(_read_rows(p))
    by_L = {}
    for r in rows:
        by_L.setdefault(r["L"], r)  # first occurrence wins
    Ls = sorted(by_L)
    gaps = [by_L[L]["gamma_L"] for L in Ls]
    C, ratios = fit_log_over_L(Ls, gaps)
    table = [{"L": L, "gamma_L": g, "logL_over_L": math.log(L) / L, "ratio": r, "fit": C * math.log(L) / L}
             for L, g, r in zip(Ls, gaps, ratios)]
    print(f"fit: gamma_L = C log(L)/L with C = {C:.9g}")
    print(f"{'L':>4} {'gamma_L':>14} {'gamma_L L/log L':>16}")
    for row in table:
        print(f"{row['L']:>4} {row['gamma_L']:>14.9g} {row['ratio']:>16.9g}")
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    _atomic_write(out / "results.json", dumps({"pipeline": "report", "C": C, "rows": table,
                                                "versions": _versions()}))
    write_csv(out / "report.csv", ["L", "gamma_L", "logL_over_L", "ratio", "fit"], table)
    return 0


# -- entry point ----------------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="lsmlab", description="Gap bounds for half-integer spin lattice models.")
    sub = p.add_subparsers(dest="command", required=True)
    for name in PIPELINES:
        s = sub.add_parser(name)
        s.add_argument("--config", required=True, help="scenario file (JSON)")
        s.add_argument("--out", default=".", help="output directory")
        s.add_argument("--threads", type=int, default=None, help="BLAS threads")
        s.add_argument("--seed", type=int, default=None, help="overrides the config seed")
        s.add_argument("--dense-max-dim", type=int, default=8192, help="largest dense diagonalization")
    r = sub.add_parser("report")
    r.add_argument("paths", nargs="+", help="results.json or sweep.csv files")
    r.add_argument("--out", default=".", help="output directory")
    sub.add_parser("template", help="print a documented scenario file")
    return p


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        if args.command == "template":
            sys.stdout.write(template())
            return 0
        if args.command == "report":
            return run_report(args.paths, args.out)
        if args.threads is not None:
            if args.threads < 1:
                raise UsageError("--threads must be positive")
            from threadpoolctl import threadpool_limits

            with threadpool_limits(limits=args.threads):
                return run_scenario(args.command, args.config, args.out, args.dense_max_dim, args.seed)
        return run_scenario(args.command, args.config, args.out, args.dense_max_dim, args.seed)
    except LSMLabError as exc:
        print(f"lsmlab: error: {exc}", file=sys.stderr)
        return exc.exit_code


if __name__ == "__main__":
    sys.exit(main())
