"""Command-line interface: eval, verify, roots, analyze.

Every output file carries the config hash and the sampling seed, either as
``# key=value`` lines at the top of a CSV or as top-level JSON keys.
Exit codes: 0 success, 1 invariant failure, 2 input error.
"""
from __future__ import annotations

import argparse
import csv
import json
import sys
import time
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import analysis, spectral
from .medium import MediumConfig, config_from_dict, validate_profile
from .pm_transform import TransformedModel, green_kernel, green_kernel_dx
from .rayleigh_ode import DisplacementModel, delta_homogeneous
from .riemann import ALL_SHEETS, BranchPointError, SheetTag, SpectralPoint, quasi_momenta, sheet_of

EXIT_OK, EXIT_FAIL, EXIT_INPUT = 0, 1, 2

DEFAULT_TOLS = {
    "max_step": 0.1,
    "min_cell": spectral.MIN_CELL,
    "newton_tol": spectral.NEWTON_TOL,
    "residual_tol": spectral.RESIDUAL_TOL,
    "classify_tol": spectral.CLASSIFY_TOL,
    "verify_rtol": 1e-8,
    "ode_rtol": 1e-12,
    "ode_atol": 1e-14,
}


class InputError(ValueError):
    pass


@dataclass
class RunConfig:
    medium: MediumConfig
    tolerances: dict = field(default_factory=lambda: dict(DEFAULT_TOLS))
    seed: int = 0
    xi: list = field(default_factory=list)
    region: tuple | None = None
    target: str = "F"
    frame: str = "auto"
    radii: list = field(default_factory=list)
    search_radius: float | None = None
    n_samples: int = 20
    mode: str = "auto"

    def __post_init__(self):
        for k, v in self.tolerances.items():
            if not v > 0:
                raise InputError(f"tolerance {k} must be positive, got {v}")

    @property
    def digest(self) -> str:
        return self.medium.digest

    def header(self) -> dict:
        return {"config_hash": self.digest, "seed": self.seed}

    def header_lines(self) -> list:
        return [f"{k}={v}" for k, v in self.header().items()]


def _parse_override(text):
    if "=" not in text:
        raise InputError(f"--tol-override expects K=V, got {text!r}")
    k, v = text.split("=", 1)
    k = k.strip()
    if k not in DEFAULT_TOLS:
        raise InputError(f"unknown tolerance {k!r}; known: {', '.join(sorted(DEFAULT_TOLS))}")
    try:
        return k, float(v)
    except ValueError:
        raise InputError(f"tolerance {k} is not a number: {v!r}") from None


def _parse_xi(text):
    try:
        return complex(text.replace(" ", "").replace("i", "j"))
    except ValueError:
        raise InputError(f"bad xi value {text!r}") from None


def load_run_config(path, overrides=()) -> RunConfig:
    try:
        with open(path) as fh:
            raw = json.load(fh)
    except (OSError, json.JSONDecodeError) as exc:
        raise InputError(f"cannot read config {path}: {exc}") from None
    if not isinstance(raw, dict):
        raise InputError("config must be a JSON object")
    medium = config_from_dict(raw)   # ValueError propagates: unimodularity etc.
    run = raw.get("run", {})
    tols = dict(DEFAULT_TOLS)
    for k, v in run.get("tolerances", {}).items():
        tols[_parse_override(f"{k}={v}")[0]] = float(v)
    for item in overrides:
        k, v = _parse_override(item)
        tols[k] = v
    region = run.get("region")
    if region is not None and len(region) != 4:
        raise InputError("run.region must be [x0, x1, y0, y1]")
    return RunConfig(medium, tols, int(run.get("seed", 0)),
                     [_parse_xi(str(x)) for x in run.get("xi", [])],
                     tuple(float(v) for v in region) if region else None,
                     str(run.get("target", "F")), str(run.get("frame", "auto")),
                     [float(r) for r in run.get("radii", [])],
                     float(run["search_radius"]) if "search_radius" in run else None,
                     int(run.get("n_samples", 20)), str(run.get("mode", "auto")))


def build_model(cfg: RunConfig):
    med = cfg.medium
    frame = cfg.frame
    if frame == "auto":
        transformed = not med.potential.is_zero() or med.raw.get("frame") == "transformed"
        frame = "transformed" if transformed else "displacement"
    tol = cfg.tolerances
    if frame == "transformed":
        if cfg.mode not in ("auto", "iterates", "ode"):
            raise InputError(f"unknown solver mode {cfg.mode!r}")
        return TransformedModel.from_config(med, mode=cfg.mode, ode_rtol=tol["ode_rtol"],
                                            ode_atol=tol["ode_atol"])
    if frame == "displacement":
        return DisplacementModel(med.profile)
    raise InputError(f"unknown frame {frame!r}")


def _target(model, name):
    if name.upper() == "F":
        return spectral.EntireTarget(model)
    try:
        return spectral.DeltaTarget(model, SheetTag.parse(name))
    except ValueError:
        raise InputError(f"unknown target {name!r}") from None


# ---------------------------------------------------------------- eval

EVAL_COLUMNS = ("xi_re", "xi_im", "sheet", "qP_re", "qP_im", "qS_re", "qS_im",
                "delta_re", "delta_im", "F_re", "F_im")


def cmd_eval(cfg: RunConfig, xis, sheets, out: Path) -> int:
    model = build_model(cfg)
    c = cfg.medium.constants
    path = out / "eval.csv"
    nan = float("nan")
    with open(path, "w", newline="") as fh:
        for line in cfg.header_lines():
            fh.write(f"# {line}\n")
        w = csv.writer(fh)
        w.writerow(EVAL_COLUMNS)
        for xi in xis:
            try:
                F = model.F(xi)[0]
            except BranchPointError:
                F = complex(nan, nan)
            for s in sheets:
                try:
                    q = quasi_momenta(SpectralPoint(xi, s), c)
                    d = model.delta(xi, s)[0]
                    row = [q.qP.real, q.qP.imag, q.qS.real, q.qS.imag, d.real, d.imag]
                except BranchPointError:
                    row = [nan] * 6
                w.writerow([repr(float(v)) for v in (xi.real, xi.imag)] + [str(s)]
                           + [repr(float(v)) for v in row + [F.real, F.imag]])
    print(f"wrote {path}")
    return EXIT_OK


# ---------------------------------------------------------------- verify

def _rel(a, b):
    return abs(a - b) / max(abs(a), abs(b), 1e-300)


def _random_points(rng, n, radius):
    """Points off every cut: nonzero real and imaginary parts."""
    z = rng.uniform(-radius, radius, n) + 1j * rng.uniform(-radius, radius, n)
    return [complex(v) for v in z if abs(v.real) > 1e-3 and abs(v.imag) > 1e-3]


def _suite(name, values, limit):
    worst = float(max(values)) if values else 0.0
    return {"name": name, "max": worst, "limit": limit, "n": len(values), "passed": worst <= limit}


def run_verify(cfg: RunConfig) -> dict:
    rng = np.random.default_rng(cfg.seed)
    med = cfg.medium
    c = med.constants
    model = build_model(cfg)
    rtol = cfg.tolerances["verify_rtol"]
    n = cfg.n_samples
    suites = []

    rep = validate_profile(med.profile)
    issues = list(rep.errors) + med.potential.check()
    suites.append({"name": "config", "issues": issues, "warnings": list(rep.warnings),
                   "det_GH": med.transform.det, "passed": not issues})

    pts = _random_points(rng, n, 3.0 * c.r_minus)
    bad = 0
    for z in pts:
        for s in ALL_SHEETS:
            q = quasi_momenta(SpectralPoint(z, s), c)
            bad += sheet_of(q) != s
    suites.append({"name": "sheet_tags", "mismatches": int(bad), "n": len(pts) * 4,
                   "passed": bad == 0})

    gaps = []
    for z in pts:
        for s in ALL_SHEETS:
            p = SpectralPoint(z, s)
            gaps.append(abs(analysis.gamma_bound(p, c) - analysis.gamma_max_formula(quasi_momenta(p, c))))
    suites.append(_suite("gamma_max_formula", gaps, 1e-12))

    if med.profile.is_homogeneous():
        dm = DisplacementModel(med.profile)
        errs = []
        for z in pts:
            for s in ALL_SHEETS:
                q = quasi_momenta(SpectralPoint(z, s), c)
                d = dm.delta(z, s)[0]
                errs.append(abs(d - delta_homogeneous(z, q, c)) / (1 + abs(d)))
        suites.append(_suite("closed_form_determinant", errs, 1e-9))

    if isinstance(model, TransformedModel):
        errs = []
        for z in pts[:max(n // 4, 3)]:
            q = quasi_momenta(SpectralPoint(z), c)
            x = rng.uniform(0, c.H)
            errs.append(float(np.abs(green_kernel(x, x, q, med.transform)).max()))
            errs.append(float(np.abs(green_kernel_dx(x, x, q, med.transform) - np.eye(2)).max()))
        suites.append(_suite("green_kernel", errs, 1e-8))
        if not med.potential.is_zero():
            errs = []
            for z in pts[:3]:
                for s in ALL_SHEETS:
                    p = SpectralPoint(z, s)
                    a = model.frame_at(p, "iterates").jost_function
                    b = model.frame_at(p, "ode").jost_function
                    errs.append(float(np.abs(a - b).max() / np.abs(b).max()))
            suites.append(_suite("iterates_vs_ode", errs, rtol))

    errs = []
    for z in pts[:max(n // 4, 3)]:
        f = model.F(z)[0]
        errs.append(_rel(f, model.F(-z)[0]))
        errs.append(_rel(f.conjugate(), model.F(z.conjugate())[0]))
    suites.append(_suite("F_even_and_real", errs, rtol))

    eps = 1e-8
    errs = []
    for x in (0.5 * c.r_plus, 0.5 * (c.r_plus + c.r_minus)):
        a = model.F(complex(x, eps))[0]
        b = model.F(complex(x, -eps))[0]
        errs.append(_rel(a, b))
    a, b = model.F(complex(eps, 1.3))[0], model.F(complex(-eps, 1.3))[0]
    errs.append(_rel(a, b))
    suites.append(_suite("F_continuous_across_cuts", errs, 1e-6))

    return {**cfg.header(), "suites": suites, "passed": all(s["passed"] for s in suites)}


def cmd_verify(cfg: RunConfig, out: Path) -> int:
    report = run_verify(cfg)
    analysis.write_json(report, out / "verify.json")
    for s in report["suites"]:
        print(f"{'PASS' if s['passed'] else 'FAIL'} {s['name']}")
    return EXIT_OK if report["passed"] else EXIT_FAIL


# ---------------------------------------------------------------- roots

def find_roots(cfg: RunConfig, region, target_name):
    model = build_model(cfg)
    tol = cfg.tolerances
    reg = spectral.SearchRegion(complex(region[0], region[2]), complex(region[1], region[3]))
    res = spectral.search(_target(model, target_name), reg, max_step=tol["max_step"],
                          min_cell=tol["min_cell"], newton_tol=tol["newton_tol"],
                          residual_tol=tol["residual_tol"])
    records = []
    for r in res.records:
        if target_name.upper() == "F":
            try:
                r = spectral.classify(r, model, tol["classify_tol"])
            except spectral.InconsistentZero as exc:
                print(f"warning: {exc}", file=sys.stderr)
                r.classification = "inconsistent"
        records.append(r)
    res.records = records
    return res


def cmd_roots(cfg: RunConfig, region, target_name, out: Path) -> int:
    t0 = time.perf_counter()
    res = find_roots(cfg, region, target_name)
    lines = cfg.header_lines() + [f"target={target_name}", f"region={list(region)}",
                                  f"winding_total={res.total_winding}"]
    spectral.write_records_csv(res.records, out / "roots.csv", lines)
    clusters = sum(r.is_cluster for r in res.records)
    print(f"{len(res.records)} zeros, multiplicity {res.multiplicity_total}, winding "
          f"{res.total_winding}, {clusters} clusters, {time.perf_counter() - t0:.1f} s")
    return EXIT_OK if res.consistent else EXIT_FAIL


# ---------------------------------------------------------------- analyze

def cmd_analyze(cfg: RunConfig, out: Path, zeros_csv=None) -> int:
    model = build_model(cfg)
    H = cfg.medium.constants.H
    radii = cfg.radii or list(np.linspace(15.0, 50.0, 8) / H)
    growth = analysis.growth_fit(model, [0.0, np.pi / 4, np.pi / 2], radii)
    cart = analysis.cartwright_indices(model, radii)
    analysis.write_json({"growth": growth.to_dict(), "cartwright": cart.to_dict()},
                        out / "growth.json", cfg.header())
    analysis.write_samples_csv(growth, out / "growth_samples.csv", cfg.header_lines())

    if zeros_csv:
        records = spectral.read_records_csv(zeros_csv)
        winding = _header_value(zeros_csv, "winding_total")
        R = max((abs(r.xi) for r in records), default=0.0)
    else:
        R = cfg.search_radius or 10.0 / H
        res = spectral.search(spectral.EntireTarget(model), spectral.SearchRegion(-R - 1j * R, R + 1j * R),
                              max_step=cfg.tolerances["max_step"])
        records, winding = res.records, res.total_winding
        spectral.write_records_csv(records, out / "zeros.csv",
                                   cfg.header_lines() + [f"winding_total={winding}"])
    count_radii = [r for r in (2.0, 5.0, 10.0, 15.0, 20.0) if r / H <= R + 1e-12] or [R]
    counts = analysis.levinson_counts(records, count_radii, H, winding_total=winding)
    analysis.write_json(counts.to_dict(), out / "counts.json", cfg.header())
    analysis.write_counts_csv(counts, out / "counts.csv", cfg.header_lines())
    forb = analysis.forbidden_domain_check(records, H)
    analysis.write_json(forb.to_dict(), out / "forbidden.json", cfg.header())

    checks = {"growth_8H": growth.passed, "rho": cart.rho_pass, "counts_bound": counts.within_bound,
              "counts_monotone": counts.monotone, "counts_complete": counts.complete,
              "forbidden_domain": forb.passed}
    for k, v in checks.items():
        print(f"{'PASS' if v else 'FAIL'} {k}")
    return EXIT_OK if all(checks.values()) else EXIT_FAIL


def _header_value(path, key):
    with open(path) as fh:
        for line in fh:
            if not line.startswith("#"):
                break
            k, _, v = line[1:].strip().partition("=")
            if k == key:
                return int(v)
    return None


# ---------------------------------------------------------------- entry point

def make_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="rayleigh-jost",
                                description="Rayleigh determinants, resonances and growth diagnostics")
    sub = p.add_subparsers(dest="command", required=True)

    def common(sp):
        sp.add_argument("--config", required=True, help="JSON medium/run config")
        sp.add_argument("--out", default=".", help="output directory")
        sp.add_argument("--tol-override", action="append", default=[], metavar="K=V")
        sp.add_argument("--frame", choices=("auto", "displacement", "transformed"))
        sp.add_argument("--mode", choices=("auto", "iterates", "ode"),
                        help="Jost solver of the transformed frame")
        return sp

    e = common(sub.add_parser("eval", help="tabulate q, per-sheet determinants and F"))
    e.add_argument("--xi", nargs="*", default=None, help="complex values such as 1.2 or 0.5+0.1j")
    e.add_argument("--sheets", default="++,+-,-+,--")
    common(sub.add_parser("verify", help="run the invariant suites"))
    r = common(sub.add_parser("roots", help="locate zeros in a rectangle"))
    r.add_argument("--region", nargs=4, type=float, metavar=("X0", "X1", "Y0", "Y1"))
    r.add_argument("--target", default=None, help="F or a sheet tag such as ++")
    a = common(sub.add_parser("analyze", help="growth, counting and forbidden-domain reports"))
    a.add_argument("--zeros", default=None, help="roots CSV to reuse instead of searching")
    a.add_argument("--radius", type=float, default=None, help="search half-width for F zeros")
    return p


def main(argv=None) -> int:
    args = make_parser().parse_args(argv)
    try:
        cfg = load_run_config(args.config, args.tol_override)
        if args.frame:
            cfg.frame = args.frame
        if args.mode:
            cfg.mode = args.mode
        out = Path(args.out)
        out.mkdir(parents=True, exist_ok=True)
        if args.command == "eval":
            xis = [_parse_xi(x) for x in args.xi] if args.xi is not None else cfg.xi
            sheets = [SheetTag.parse(s) for s in args.sheets.split(",") if s]
            return cmd_eval(cfg, xis, sheets, out)
        if args.command == "verify":
            return cmd_verify(cfg, out)
        if args.command == "roots":
            region = args.region or cfg.region
            if region is None:
                raise InputError("roots needs --region or run.region in the config")
            return cmd_roots(cfg, region, args.target or cfg.target, out)
        if args.radius:
            cfg.search_radius = args.radius
        return cmd_analyze(cfg, out, args.zeros)
    except InputError as exc:
        print(f"input error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    except ValueError as exc:
        msg = str(exc)
        if "unimodularity" in msg:
            print(f"invariant failure: {msg}", file=sys.stderr)
            return EXIT_FAIL
        print(f"input error: {msg}", file=sys.stderr)
        return EXIT_INPUT


if __name__ == "__main__":
    sys.exit(main())
