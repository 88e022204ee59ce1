"""Growth, counting and zero-location diagnostics for the entire function F.

All growth statements are checked as least-squares fits with a 5% slack on the
predicted exponential type.  Zero counts follow the variable z = i*xi, so the
upper half z-plane corresponds to Re xi > 0.
"""
from __future__ import annotations

import csv
import json
from dataclasses import asdict, dataclass, field

import numpy as np

from .medium import PotentialSpec, TransformData
from .riemann import (BranchPointError, PHYSICAL, QuasiMomenta, SheetTag,
                      SpectralPoint, check_branch_point, quasi_momenta)

SLACK = 0.05
LEVINSON_SLACK = 0.2
STABLE_RH = 50.0
FORBIDDEN_FACTOR = 3.0
COUNT_CONVENTION = ("z = i*xi; N_plus counts zeros with Im z > 0 (Re xi > 0), "
                    "N_minus those with Im z < 0 (Re xi < 0); Re xi = 0 reported as on_axis")


# ---------------------------------------------------------------- gamma

def gamma_bound(point: SpectralPoint, constants) -> float:
    q = quasi_momenta(point, constants)
    if point.sheet.sign_P > 0:
        return 0.0
    return -2.0 * q.qP.imag


def gamma_max_formula(q: QuasiMomenta) -> float:
    a, b = q.qP, q.qS
    return max(abs(a.imag) - a.imag,
               0.5 * (abs((a - b).imag) - (a - b).imag),
               0.5 * (abs((a + b).imag) - (a + b).imag))


def zeta_P(q: QuasiMomenta) -> float:
    return q.qP.imag + abs(q.qP.imag)


def zeta_PS(q: QuasiMomenta) -> float:
    d = (q.qP - q.qS).imag
    return d + abs(d)


# ---------------------------------------------------------------- driver integrals

def _depth_rule(H, breakpoints=(), n_nodes=48, per_interval=8):
    edges = sorted({0.0, float(H), *[float(b) for b in breakpoints if 0.0 < b < H]})
    t, w = np.polynomial.legendre.leggauss(n_nodes)
    ys, ws = [], []
    for lo, hi in zip(edges[:-1], edges[1:]):
        cuts = np.linspace(lo, hi, per_interval + 1)
        for a, b in zip(cuts[:-1], cuts[1:]):
            ys.append(0.5 * (b - a) * (t + 1) + a)
            ws.append(0.5 * (b - a) * w)
    return np.concatenate(ys), np.concatenate(ws)


def _weighted(xi, V: PotentialSpec, td: TransformData, integrand):
    y, w = _depth_rule(td.constants.H, V.breakpoints)
    Vy = np.asarray(V.V(y))
    return complex(np.sum(w * np.exp(2 * complex(xi) * y) * integrand(Vy)))


def _ab(Vy, td: TransformData):
    a = Vy[:, 0, 0] * td.G11H + Vy[:, 0, 1] * td.G12H
    b = Vy[:, 1, 0] * td.G11H + Vy[:, 1, 1] * td.G12H
    return a, b


def script_A(xi, V: PotentialSpec, td: TransformData, mu0=None) -> complex:
    c = td.constants
    mu0 = c.mu_I if mu0 is None else mu0
    return 2 * c.mu_I**2 / (mu0 * c.omega**2) * _weighted(xi, V, td, lambda Vy: Vy[:, 0, 1])


def script_AP(xi, V: PotentialSpec, td: TransformData, mu0=None) -> complex:
    c = td.constants
    mu0 = c.mu_I if mu0 is None else mu0
    pref = 2 * c.mu_I**3 / (mu0 * c.omega**4) * td.G11H
    return pref * _weighted(xi, V, td, lambda Vy: _ab(Vy, td)[0])


def script_AS(xi, V: PotentialSpec, td: TransformData, mu0=None, theta2=None) -> complex:
    c = td.constants
    mu0 = c.mu_I if mu0 is None else mu0
    if theta2 is None:
        theta2 = mu0**2 / (2 * c.mu_I * c.sigma_I)
    G21_0 = float(td.G21(0.0))
    w2 = c.omega**2

    def integrand(Vy):
        a, b = _ab(Vy, td)
        return (theta2 * td.G12H - w2 / c.mu_I * G21_0) * a - theta2 * td.G11H * b

    return c.mu_I**3 / (mu0 * c.omega**4) * _weighted(xi, V, td, integrand)


# ---------------------------------------------------------------- asymptotic constants

def physical_constant_ratio(model, xi: float) -> float:
    """Relative deviation of det F_Theta / xi^3 from mu_I c(0) / omega^2."""
    c = model.constants
    lim = c.mu_I * model.c0 / c.omega**2
    F = model.frame_at(SpectralPoint(complex(xi), PHYSICAL)).jost_function
    return abs(np.linalg.det(F) / complex(xi) ** 3 - lim) / lim


def unphysical_driver_ratio(model, xi: float) -> complex:
    """(det F_Theta - xi^3 mu_I c(0)/omega^2) / (xi^3 A(xi)) on the (-,-) sheet."""
    c = model.constants
    xi = complex(xi)
    F = model.frame_at(SpectralPoint(xi, SheetTag(-1, -1))).jost_function
    resid = np.linalg.det(F) - xi**3 * c.mu_I * model.c0 / c.omega**2
    A = script_A(xi, model.potential, model.td, model.mu0)
    return resid / (xi**3 * A)


# ---------------------------------------------------------------- log |F|

def _sheet_deltas(model, xi):
    if hasattr(model, "deltas_all"):
        return list(model.deltas_all(xi)[0].values())
    return list(model.bundle(xi).delta_by_sheet.values())


def log_abs_F(model, xi) -> float:
    """log|F| as a sum of per-sheet logs, so the product never overflows."""
    xi = complex(xi)
    try:
        check_branch_point(xi, model.constants)
        if xi == 0:
            raise BranchPointError("origin")
        vals = _sheet_deltas(model, xi)
    except BranchPointError:
        return float(np.log(abs(model.F(xi)[0])))
    mags = np.abs(np.asarray(vals, dtype=complex))
    if not np.all(np.isfinite(mags)):
        raise OverflowError(f"determinant overflow at xi={xi}; use smaller radii")
    with np.errstate(divide="ignore"):
        return float(np.sum(np.log(mags)))


# ---------------------------------------------------------------- growth

@dataclass
class RayFit:
    angle: float
    slope: float
    exponent: float
    intercept: float
    slope_stderr: float
    window_slopes: tuple
    confidence: float
    windows_agree: bool
    pass_8H: bool
    pass_12H: bool


@dataclass
class GrowthReport:
    H: float
    rays: list
    samples: list = field(default_factory=list)   # (angle, |xi|, Re xi, log|F|)

    @property
    def passed(self) -> bool:
        return all(r.pass_8H and r.pass_12H for r in self.rays)

    def to_dict(self) -> dict:
        return {"H": self.H, "passed": self.passed, "rays": [asdict(r) for r in self.rays],
                "samples": [list(s) for s in self.samples]}


def _lstsq(cols, y):
    X = np.column_stack(cols)
    coef, *_ = np.linalg.lstsq(X, y, rcond=None)
    dof = max(len(y) - X.shape[1], 1)
    resid = y - X @ coef
    s2 = float(resid @ resid) / dof
    cov = s2 * np.linalg.pinv(X.T @ X)
    return coef, np.sqrt(np.maximum(np.diag(cov), 0.0))


def _exp_coordinate(r, angle):
    c = abs(np.cos(angle))
    return r * c if c > 1e-12 else r, c > 1e-12


def fit_ray(r, logF, angle, H) -> RayFit:
    """Fit log|F| = c + p log r + s x, with x = |Re xi| (or r on the imaginary axis)."""
    r = np.asarray(r, float)
    logF = np.asarray(logF, float)
    x, exponential = _exp_coordinate(r, angle)
    coef, err = _lstsq([np.ones_like(r), np.log(r), x], logF)
    c0, p, s = coef
    # disjoint windows, prefactor exponent held at the global value
    half = len(r) // 2
    wins = []
    for sl in (slice(0, half), slice(half, None)):
        cw, _ = _lstsq([np.ones(len(r[sl])), x[sl]], logF[sl] - p * np.log(r[sl]))
        wins.append(float(cw[1]))
    conf = SLACK * 8 * H + 2 * float(err[2])
    agree = abs(wins[0] - wins[1]) <= conf
    if exponential:
        p8, p12 = s <= 8 * H * (1 + SLACK), s <= 12 * H * (1 + SLACK)
    else:
        p8 = abs(s) <= SLACK * 8 * H
        p12 = p8
    return RayFit(float(angle), float(s), float(p), float(c0), float(err[2]), tuple(wins),
                  float(conf), bool(agree), bool(p8), bool(p12))


def _check_radii(radii, H):
    radii = np.asarray(radii, float)
    if np.any(radii * H > STABLE_RH):
        raise ValueError(f"radius times H exceeds {STABLE_RH}; use smaller radii")
    if len(radii) < 4:
        raise ValueError("need at least four radii per ray")
    return radii


def growth_fit(model, rays, radii) -> GrowthReport:
    """Fit the exponential type of F along rays xi = r exp(i angle)."""
    H = model.constants.H
    radii = _check_radii(radii, H)
    fits, samples = [], []
    for ang in rays:
        pts = radii * np.exp(1j * ang)
        lf = [log_abs_F(model, z) for z in pts]
        samples += [(float(ang), float(r), float(z.real), v) for r, z, v in zip(radii, pts, lf)]
        fits.append(fit_ray(radii, lf, ang, H))
    return GrowthReport(H, fits, samples)


# ---------------------------------------------------------------- Cartwright

@dataclass
class CartwrightReport:
    H: float
    rho_plus: float
    rho_minus: float
    imag_exponent: float
    windows: tuple
    integrals: tuple
    increments: tuple

    @property
    def rho_pass(self) -> bool:
        b = 8 * self.H * (1 + SLACK)
        return self.rho_plus <= b and self.rho_minus <= b

    @property
    def increments_decreasing(self) -> bool:
        inc = self.increments
        return all(b < a for a, b in zip(inc[:-1], inc[1:]))

    @property
    def exponent_flags(self) -> dict:
        return {str(k): bool(self.imag_exponent <= k * (1 + SLACK)) for k in (8, 12, 20)}

    def to_dict(self) -> dict:
        d = asdict(self)
        d.update(rho_pass=self.rho_pass, increments_decreasing=self.increments_decreasing,
                 exponent_flags=self.exponent_flags)
        return d


def _poisson_log(model, windows, panel=2.0, n_nodes=10):
    """Integrals of log+|F| / (1+x^2) over [-T, T] along xi = -i x (real z axis)."""
    t, w = np.polynomial.legendre.leggauss(n_nodes)
    edges = [0.0] + sorted(float(T) for T in windows)
    out, total = [], 0.0
    for lo, hi in zip(edges[:-1], edges[1:]):
        cuts = np.linspace(lo, hi, max(int(round((hi - lo) / panel)), 1) + 1)
        for a, b in zip(cuts[:-1], cuts[1:]):
            xs = 0.5 * (b - a) * (t + 1) + a
            vals = np.array([max(log_abs_F(model, -1j * x), 0.0) for x in xs])
            total += float(np.sum(0.5 * (b - a) * w * vals / (1 + xs**2)))
        out.append(2.0 * total)   # F is even in xi
    return out


def cartwright_indices(model, ys, windows=(10.0, 20.0, 40.0)) -> CartwrightReport:
    """Indicator estimates along xi = -y (rho_plus) and xi = +y (rho_minus)."""
    H = model.constants.H
    ys = _check_radii(ys, H)
    logs = np.log(ys)
    rhos = []
    for sgn in (-1.0, 1.0):
        lf = np.array([log_abs_F(model, sgn * y) for y in ys])
        coef, _ = _lstsq([np.ones_like(ys), logs, ys], lf)
        rhos.append(float(coef[2]))
    lf_imag = np.array([log_abs_F(model, 1j * y) for y in ys])
    coef, _ = _lstsq([np.ones_like(ys), logs], lf_imag)
    integrals = _poisson_log(model, windows)
    incs = [integrals[0]] + [b - a for a, b in zip(integrals[:-1], integrals[1:])]
    return CartwrightReport(H, rhos[0], rhos[1], float(coef[1]), tuple(float(T) for T in windows),
                            tuple(integrals), tuple(incs))


# ---------------------------------------------------------------- counting

def _zero_list(zeros):
    out = []
    for z in zeros:
        if hasattr(z, "xi"):
            out.append((complex(z.xi), int(getattr(z, "multiplicity", 1))))
        else:
            out.append((complex(z), 1))
    return out


@dataclass
class CountReport:
    H: float
    radii: list
    n_plus: list
    n_minus: list
    n_axis: list
    bound: list
    sector_exceptions: dict
    convention: str = COUNT_CONVENTION
    winding_total: int | None = None
    list_total: int = 0

    @property
    def monotone(self) -> bool:
        return all(np.all(np.diff(v) >= 0) for v in (self.n_plus, self.n_minus, self.n_axis))

    @property
    def within_bound(self) -> bool:
        lim = [b * (1 + LEVINSON_SLACK) for b in self.bound]
        return all(p <= l and m <= l for p, m, l in zip(self.n_plus, self.n_minus, lim))

    @property
    def complete(self) -> bool:
        return self.winding_total is None or self.winding_total == self.list_total

    def to_dict(self) -> dict:
        d = asdict(self)
        d["sector_exceptions"] = {str(k): v for k, v in self.sector_exceptions.items()}
        d.update(monotone=self.monotone, within_bound=self.within_bound, complete=self.complete)
        return d


def levinson_counts(zeros, radii, H=1.0, deltas=(0.1, 0.2), winding_total=None,
                    axis_tol=1e-9) -> CountReport:
    zs = _zero_list(zeros)
    radii = [float(r) for r in radii]
    npl, nmi, nax = [], [], []
    sectors = {d: [] for d in deltas}
    for r in radii:
        inside = [(z, m) for z, m in zs if abs(z) <= r]
        tol = [axis_tol * max(1.0, abs(z)) for z, _ in inside]
        npl.append(sum(m for (z, m), t in zip(inside, tol) if z.real > t))
        nmi.append(sum(m for (z, m), t in zip(inside, tol) if z.real < -t))
        nax.append(sum(m for (z, m), t in zip(inside, tol) if abs(z.real) <= t))
        for d in deltas:
            # angular distance from the imaginary xi axis, i.e. from arg xi = +-pi/2
            sectors[d].append(sum(m for z, m in inside
                                  if np.arctan2(abs(z.real), abs(z.imag)) >= d))
    bound = [8 * H * r / np.pi for r in radii]
    total = sum(m for _, m in zs)
    return CountReport(H, radii, npl, nmi, nax, bound, sectors, COUNT_CONVENTION,
                       winding_total, total)


# ---------------------------------------------------------------- forbidden domain

@dataclass
class ForbiddenReport:
    H: float
    C_fit: float
    median_contribution: float
    violations: list
    spread_ok: bool
    n_zeros: int

    @property
    def passed(self) -> bool:
        return not self.violations

    def to_dict(self) -> dict:
        d = asdict(self)
        d["violations"] = [[z.real, z.imag, c] for z, c in self.violations]
        d["passed"] = self.passed
        return d


def forbidden_domain_check(zeros, H=1.0) -> ForbiddenReport:
    """Fit C in |xi| <= C exp(2H|Re xi|) and flag outliers among large-|Re xi| zeros.

    A zero in the top quartile of |Re xi| is a violation when its contribution
    |xi| exp(-2H|Re xi|) exceeds three times the median contribution of all zeros.
    """
    zs = [z for z, _ in _zero_list(zeros)]
    if not zs:
        return ForbiddenReport(H, 0.0, 0.0, [], False, 0)
    z = np.array(zs, dtype=complex)
    re = np.abs(z.real)
    contrib = np.abs(z) * np.exp(-2 * H * re)
    med = float(np.median(contrib))
    q75 = float(np.quantile(re, 0.75))
    viol = [(complex(zz), float(cc)) for zz, cc, rr in zip(z, contrib, re)
            if rr >= q75 and cc > FORBIDDEN_FACTOR * med]
    nz = re[re > 0]
    spread = bool(len(nz) and nz.max() >= 4 * nz.min())
    return ForbiddenReport(H, float(contrib.max()), med, viol, spread, len(zs))


# ---------------------------------------------------------------- output

def write_json(obj, path, header=None):
    data = dict(header or {})
    data.update(obj)
    with open(path, "w") as fh:
        json.dump(data, fh, indent=2, sort_keys=True, default=_json_default)
        fh.write("\n")


def _json_default(o):
    if isinstance(o, complex):
        return [o.real, o.imag]
    if isinstance(o, (np.floating, np.integer, np.bool_)):
        return o.item()
    raise TypeError(f"not serializable: {type(o)}")


def write_samples_csv(report: GrowthReport, path, header_lines=()):
    with open(path, "w", newline="") as fh:
        for line in header_lines:
            fh.write(f"# {line}\n")
        w = csv.writer(fh)
        w.writerow(["angle", "abs_xi", "re_xi", "log_abs_F"])
        for row in report.samples:
            w.writerow([repr(float(v)) for v in row])


def write_counts_csv(report: CountReport, path, header_lines=()):
    with open(path, "w", newline="") as fh:
        for line in header_lines:
            fh.write(f"# {line}\n")
        w = csv.writer(fh)
        ds = list(report.sector_exceptions)
        w.writerow(["r", "n_plus", "n_minus", "n_axis", "bound"] + [f"sector_exc_{d}" for d in ds])
        for i, r in enumerate(report.radii):
            w.writerow([r, report.n_plus[i], report.n_minus[i], report.n_axis[i],
                        repr(report.bound[i])] + [report.sector_exceptions[d][i] for d in ds])


