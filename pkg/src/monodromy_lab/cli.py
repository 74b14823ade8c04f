"""Command-line front door: experiment configs, sweeps, and result files.

Subcommands
-----------
classify    spectral classification report for a symplectic matrix file
contract    weight-conjugated contraction sweep of the hyperbolic model
ladder      eigenvalue ladders (exact, perturbed, or counting sweep)
geodesic    trajectory plus return-map classification of the warped metric
positivity  sampled escape-function positivity certificate

Exit codes: 0 pass, 1 numeric-assertion failure, 2 classification-
ambiguous, 3 config error.  Configs are JSON documents with strict
unknown-key rejection; commands that draw random samples require a seed.
Identical config and seed produce byte-identical CSV output.
"""

from __future__ import annotations

import argparse
import json
import math
import sys
import time
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path

import numpy as np

from . import geodesic as geo
from . import serialize
from .escape import verify_positivity
from .monodromy import (
    ModelParams,
    build_elliptic_monodromy,
    contraction_sweep,
    elliptic_propagator,
)
from .quasimode import (
    exact_model_ladder,
    hermite_mode,
    perturbed_ladder,
    residual_certify,
)
from .symplectic import (
    ClassificationAmbiguousError,
    SymplecticError,
    build_quadratic_hamiltonian,
    classify_spectrum,
)
from .weyl import PhaseGrid

EXIT_PASS = 0
EXIT_NUMERIC = 1
EXIT_AMBIGUOUS = 2
EXIT_CONFIG = 3


class ConfigError(ValueError):
    pass


class NumericFailure(RuntimeError):
    pass


def _load_config(path, allowed: dict, required=()):
    """Read a JSON config, rejecting unknown keys and checking the type of
    every provided field.  `allowed` maps key -> type tuple."""
    try:
        doc = json.loads(Path(path).read_text())
    except FileNotFoundError:
        raise ConfigError(f"config file not found: {path}")
    except json.JSONDecodeError as exc:
        raise ConfigError(f"config is not valid JSON: {exc}")
    if not isinstance(doc, dict):
        raise ConfigError("config must be a JSON object")
    unknown = set(doc) - set(allowed)
    if unknown:
        raise ConfigError(f"unknown config keys: {sorted(unknown)}")
    for key in required:
        if key not in doc:
            raise ConfigError(f"missing required config key: {key!r}")
    for key, val in doc.items():
        types = allowed[key]
        if not isinstance(val, types):
            raise ConfigError(
                f"config key {key!r} has type {type(val).__name__}, "
                f"expected {'/'.join(t.__name__ for t in types)}"
            )
    return doc


def _grid_from(doc, default_l, default_n, hbar) -> PhaseGrid:
    doc = doc or {}
    unknown = set(doc) - {"L", "N"}
    if unknown:
        raise ConfigError(f"unknown grid keys: {sorted(unknown)}")
    return PhaseGrid(L=float(doc.get("L", default_l)),
                     N=int(doc.get("N", default_n)), hbar=hbar)


def _positive(doc, key):
    if key in doc and not doc[key] > 0:
        raise ConfigError(f"config key {key!r} must be positive")


# ---------------------------------------------------------------------------
# classify
# ---------------------------------------------------------------------------

def cmd_classify(args) -> int:
    started = time.time()
    config = {"matrix_file": args.matrix_file, "tol_unit": args.tol_unit}
    mat = serialize.read_matrix(args.matrix_file)
    outdir = Path(args.out)
    outdir.mkdir(parents=True, exist_ok=True)
    cls = classify_spectrum(mat, tol_unit=args.tol_unit)
    report = {
        "dim": cls.dim,
        "n_hc": cls.n_hc,
        "n_hr_plus": cls.n_hr_plus,
        "n_hr_minus": cls.n_hr_minus,
        "n_e": cls.n_e,
        "blocks": [
            {
                "mu": [b.mu.real, b.mu.imag],
                "multiplicity": b.k,
                "log": [b.lam.real, b.lam.imag],
                "kind": b.kind,
            }
            for b in cls.blocks
        ],
        "rotation_diagonal": [float(v) for v in np.diag(cls.F)[: cls.dim // 2]],
        "reconstruction_error": cls.reconstruction_error(),
    }
    out = outdir / "classification.json"
    out.write_text(json.dumps(report, indent=2) + "\n")
    serialize.write_manifest(outdir, "classify", config, [out], started)
    print(f"classify: wrote {out} (reconstruction error "
          f"{report['reconstruction_error']:.3e})")
    return EXIT_PASS


# ---------------------------------------------------------------------------
# contract
# ---------------------------------------------------------------------------

CONTRACT_KEYS = {
    "lam": (int, float),
    "s": (int, float),
    "hbar_tilde": (int, float),
    "h_values": (list,),
    "grid": (dict,),
    "gap_grid": (dict,),
}


def cmd_contract(args) -> int:
    started = time.time()
    doc = _load_config(args.config, CONTRACT_KEYS, required=("h_values",))
    for key in ("lam", "hbar_tilde"):
        _positive(doc, key)
    if "s" in doc and abs(doc["s"]) > 0.5:
        raise ConfigError("weight strength |s| must be <= 1/2")
    hbar_tilde = float(doc.get("hbar_tilde", 0.2))
    h_values = [float(h) for h in doc["h_values"]]
    if not h_values or any(h <= 0 or h > hbar_tilde for h in h_values):
        raise ConfigError("h_values must be positive and at most hbar_tilde")
    grid = _grid_from(doc.get("grid"), 16.0, 512, hbar_tilde)
    gap_grid = _grid_from(doc.get("gap_grid"), 48.0, 512, hbar_tilde)
    rows = contraction_sweep(h_values, lam=float(doc.get("lam", 1.0)),
                             s=float(doc.get("s", 0.3)),
                             hbar_tilde=hbar_tilde, grid=grid, gap_grid=gap_grid)
    outdir = Path(args.out)
    outdir.mkdir(parents=True, exist_ok=True)
    out = outdir / "contraction.csv"
    serialize.write_csv(
        out,
        ["h", "hbar_tilde", "s", "r", "gap_C", "gap_N", "unitarity_defect"],
        [[r.h, r.hbar_tilde, r.s, r.norm_conjugated, r.gap_constant,
          r.gap_exponent, r.unitarity_defect] for r in rows],
    )
    serialize.write_manifest(outdir, "contract", doc, [out], started)
    worst = max(r.norm_conjugated for r in rows)
    print(f"contract: wrote {out} (max r = {worst:.6f})")
    if worst >= 1.0 and float(doc.get("s", 0.3)) != 0.0:
        raise NumericFailure(f"contraction failed: r = {worst:.6f} >= 1")
    return EXIT_PASS


# ---------------------------------------------------------------------------
# ladder
# ---------------------------------------------------------------------------

LADDER_KEYS = {
    "mode": (str,),
    "alpha": (int, float),
    "h": (int, float),
    "h_values": (list,),
    "m_exponent": (int, float),
    "c0": (int, float),
    "residuals": (bool,),
    "grid": (dict,),
    "order": (int,),
    "lambda0": (list,),
}


def _ladder_rows(ladder, residual_fn=None):
    rows = []
    for e in ladder.entries:
        resid = e.residual if residual_fn is None else residual_fn(e)
        rows.append([e.k] + list(e.beta) + [e.z, resid])
    return rows


def cmd_ladder(args) -> int:
    started = time.time()
    doc = _load_config(args.config, LADDER_KEYS, required=("mode",))
    for key in ("alpha", "h", "m_exponent", "c0"):
        _positive(doc, key)
    mode = doc["mode"]
    alpha = float(doc.get("alpha", 1.0))
    m_exp = float(doc.get("m_exponent", 2.0))
    c0 = float(doc.get("c0", 1.0))
    outdir = Path(args.out)
    outdir.mkdir(parents=True, exist_ok=True)
    outputs = []

    if mode == "counting":
        h_values = [float(h) for h in doc.get("h_values", [1e-2, 1e-3, 1e-4])]
        rows = []
        slopes = []
        for h in h_values:
            count = exact_model_ladder(alpha, h, m_exp, c0).count
            slope = math.log(count) / math.log(1.0 / h) if count else float("nan")
            rows.append([h, count, slope])
            slopes.append(slope)
        out = outdir / "counting.csv"
        serialize.write_csv(out, ["h", "count", "slope"], rows)
        outputs.append(out)
        summary = {"alpha": alpha, "m_exponent": m_exp, "c0": c0,
                   "h_values": h_values, "slopes": slopes}
    elif mode in ("exact", "perturbed"):
        h = float(doc.get("h", 1e-3))
        if mode == "exact":
            ladder = exact_model_ladder(alpha, h, m_exp, c0)
        else:
            lam0 = [float(v) for v in doc.get("lambda0", [alpha / 2.0])]
            ladder = perturbed_ladder([(lambda z, c=c: c) for c in lam0], [],
                                      h, m_exp, c0, order=int(doc.get("order", 0)))
        residual_fn = None
        if doc.get("residuals", False):
            grid_doc = doc.get("grid")
            grid = _grid_from(grid_doc, 1.0, 512, h)
            jobs = max(1, args.jobs)

            def one(e):
                return residual_certify(e.k, e.beta[0], e.z, alpha, h, grid)

            if jobs > 1:
                with ThreadPoolExecutor(max_workers=jobs) as pool:
                    residuals = list(pool.map(one, ladder.entries))
            else:
                residuals = [one(e) for e in ladder.entries]
            lookup = {id(e): r for e, r in zip(ladder.entries, residuals)}
            residual_fn = lambda e: lookup[id(e)]
        out = outdir / f"ladder_{mode}.csv"
        n_beta = len(ladder.entries[0].beta) if ladder.entries else 1
        header = ["k"] + [f"beta_{j + 1}" for j in range(n_beta)] + ["z", "residual"]
        serialize.write_csv(out, header, _ladder_rows(ladder, residual_fn))
        outputs.append(out)
        summary = {"h": h, "m_exponent": m_exp, "c0": c0, "count": ladder.count,
                   "alpha": alpha}
    else:
        raise ConfigError(f"unknown ladder mode {mode!r}")

    summary_path = outdir / "ladder_summary.json"
    summary_path.write_text(json.dumps(summary, indent=2) + "\n")
    outputs.append(summary_path)
    serialize.write_manifest(outdir, "ladder", doc, outputs, started)
    print(f"ladder[{mode}]: wrote {', '.join(str(o) for o in outputs)}")
    return EXIT_PASS


# ---------------------------------------------------------------------------
# geodesic
# ---------------------------------------------------------------------------

GEODESIC_KEYS = {
    "orbit_z": (int, float),
    "initial_state": (list,),
    "t_final": (int, float),
    "step": (int, float),
    "stride": (int,),
    "classify_orbits": (bool,),
}


def cmd_geodesic(args) -> int:
    started = time.time()
    doc = _load_config(args.config, GEODESIC_KEYS)
    _positive(doc, "t_final")
    _positive(doc, "step")
    step = float(doc.get("step", 1e-4))
    stride = int(doc.get("stride", 100))
    outdir = Path(args.out)
    outdir.mkdir(parents=True, exist_ok=True)
    outputs = []

    if "initial_state" in doc:
        state0 = np.array([float(v) for v in doc["initial_state"]])
        if state0.shape != (6,):
            raise ConfigError("initial_state must have six components "
                              "(x, y, z, vx, vy, vz)")
    else:
        z0 = float(doc.get("orbit_z", 0.0))
        w0 = float(geo.WarpedMetric.warp(0.0, z0))
        state0 = np.array([0.0, 0.0, z0, 1.0 / w0, 0.0, 0.0])
    t_final = float(doc.get("t_final", 1.0))
    traj, _ = geo.integrate(state0, t_final, step=step, stride=stride)
    out = outdir / "trajectory.csv"
    serialize.write_csv(
        out,
        ["t", "x", "y", "z", "vx", "vy", "vz", "energy"],
        [[t] + list(row) + [e]
         for t, row, e in zip(traj.t, traj.states, traj.energy)],
    )
    outputs.append(out)

    reports = []
    if doc.get("classify_orbits", True):
        for z0 in (0.0, 0.5, -0.5):
            rep = geo.poincare_linearization(z0, step=step)
            reports.append(rep)
        rep_path = outdir / "poincare.json"
        rep_path.write_text(
            "[\n" + ",\n".join(r.to_json() for r in reports) + "\n]\n"
        )
        outputs.append(rep_path)

    serialize.write_manifest(outdir, "geodesic", doc, outputs, started)
    print(f"geodesic: wrote {', '.join(str(o) for o in outputs)} "
          f"(energy drift {traj.energy_drift:.3e})")
    if traj.truncated:
        raise NumericFailure("trajectory left the domain (|y| or |z| > 10)")
    return EXIT_PASS


# ---------------------------------------------------------------------------
# positivity
# ---------------------------------------------------------------------------

POSITIVITY_KEYS = {
    "rates": (list,),
    "matrix_file": (str,),
    "samples": (int,),
    "radius": (int, float),
}


def cmd_positivity(args) -> int:
    started = time.time()
    doc = _load_config(args.config, POSITIVITY_KEYS)
    if args.seed is None:
        raise ConfigError("positivity sampling requires --seed")
    _positive(doc, "samples")
    _positive(doc, "radius")
    if ("rates" in doc) == ("matrix_file" in doc):
        raise ConfigError("provide exactly one of 'rates' or 'matrix_file'")
    if "rates" in doc:
        rates = [float(v) for v in doc["rates"]]
        if any(v <= 0 for v in rates):
            raise ConfigError("rates must be positive")
        from .symplectic import QuadraticHamiltonian

        n = len(rates)
        q = QuadraticHamiltonian(dim=2 * n, hyp_coeffs=np.diag(rates),
                                 rot_coeffs=np.zeros(n), ah_coeffs=np.zeros(n))
    else:
        mat = serialize.read_matrix(doc["matrix_file"])
        q = build_quadratic_hamiltonian(classify_spectrum(mat))
    rng = np.random.default_rng(args.seed)
    report = verify_positivity(q, samples=int(doc.get("samples", 100000)),
                               radius=float(doc.get("radius", 10.0)), rng=rng)
    outdir = Path(args.out)
    outdir.mkdir(parents=True, exist_ok=True)
    out = outdir / "positivity.json"
    out.write_text(report.to_json() + "\n")
    serialize.write_manifest(outdir, "positivity", doc, [out], started)
    print(f"positivity: wrote {out} (min_ratio = {report.min_ratio:.6g})")
    if report.min_ratio <= 0.0:
        raise NumericFailure(
            f"positivity failed: min_ratio = {report.min_ratio:.6g} at "
            f"{report.argmin_point}"
        )
    return EXIT_PASS


# ---------------------------------------------------------------------------
# entry point
# ---------------------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="monodromy-lab",
        description="numerical laboratory for monodromy contraction, "
                    "quasimode ladders, and the warped-metric geodesic example",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p, config=True):
        p.add_argument("--out", default="out", help="output directory")
        p.add_argument("--format", choices=("csv", "json"), default="csv")
        p.add_argument("--seed", type=int, default=None, help="RNG seed")
        p.add_argument("--jobs", type=int, default=1, help="worker threads")
        if config:
            p.add_argument("--config", required=True, help="JSON config path")

    p_classify = sub.add_parser("classify", help="classify a symplectic matrix")
    p_classify.add_argument("matrix_file", help="JSON matrix file")
    p_classify.add_argument("--tol-unit", type=float, default=1e-6,
                            dest="tol_unit")
    common(p_classify, config=False)
    p_classify.set_defaults(func=cmd_classify)

    for name, func in (("contract", cmd_contract), ("ladder", cmd_ladder),
                       ("geodesic", cmd_geodesic), ("positivity", cmd_positivity)):
        p = sub.add_parser(name)
        common(p)
        p.set_defaults(func=func)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except FileNotFoundError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except ClassificationAmbiguousError as exc:
        print(f"classification ambiguous: {exc}", file=sys.stderr)
        return EXIT_AMBIGUOUS
    except NumericFailure as exc:
        print(f"numeric failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except (SymplecticError, ValueError, OverflowError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_NUMERIC


if __name__ == "__main__":
    sys.exit(main())
