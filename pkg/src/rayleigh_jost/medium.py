"""Elastic half-space model, transform data and perturbation potentials.

Depth ``Z`` is negative inside the medium and the free surface sits at
``Z = 0``.  All Lame parameters are density normalized.  Below ``Z = -H`` the
medium is homogeneous with constants ``mu_I`` and ``lambda_I``.
"""
from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np
from scipy.interpolate import CubicSpline

UNIMODULAR_TOL = 1e-12


@dataclass(frozen=True)
class HalfSpaceConstants:
    mu_I: float
    lambda_I: float
    omega: float
    H: float

    def __post_init__(self):
        for name in ("mu_I", "lambda_I", "omega", "H"):
            if not np.isfinite(getattr(self, name)):
                raise ValueError(f"{name} must be finite")
        if self.mu_I <= 0:
            raise ValueError("mu_I must be positive")
        if self.lambda_I + self.mu_I <= 0:
            raise ValueError("lambda_I + mu_I must be positive")
        if self.omega <= 0:
            raise ValueError("omega must be positive")
        if self.H <= 0:
            raise ValueError("H must be positive")

    @property
    def sigma_I(self) -> float:
        return self.lambda_I + 2.0 * self.mu_I

    @property
    def c_I(self) -> float:
        return (self.lambda_I + self.mu_I) / self.sigma_I

    @property
    def rho(self) -> float:
        return (self.lambda_I + 3.0 * self.mu_I) / self.sigma_I

    @property
    def kP2(self) -> float:
        """omega^2 / (lambda_I + 2 mu_I), the squared P wavenumber."""
        return self.omega**2 / self.sigma_I

    @property
    def kS2(self) -> float:
        return self.omega**2 / self.mu_I

    @property
    def r_plus(self) -> float:
        return self.omega / np.sqrt(self.sigma_I)

    @property
    def r_minus(self) -> float:
        return self.omega / np.sqrt(self.mu_I)


def branch_radii(constants: HalfSpaceConstants) -> tuple[float, float]:
    """Return ``(r_plus, r_minus)``, the P and S branch points on the real axis."""
    return constants.r_plus, constants.r_minus


def _const(value):
    def f(Z):
        return np.full(np.shape(Z), float(value)) if np.ndim(Z) else float(value)
    return f


@dataclass(frozen=True)
class ElasticProfile:
    """Lame parameters as functions of depth together with two derivatives in Z.

    The callables must accept scalars and numpy arrays.
    """
    constants: HalfSpaceConstants
    mu: Callable
    dmu: Callable
    d2mu: Callable
    lam: Callable
    dlam: Callable
    d2lam: Callable
    kind: str = "custom"

    @classmethod
    def constant(cls, constants: HalfSpaceConstants) -> "ElasticProfile":
        return cls(constants, _const(constants.mu_I), _const(0.0), _const(0.0),
                   _const(constants.lambda_I), _const(0.0), _const(0.0), kind="constant")

    @classmethod
    def polynomial_bump(cls, constants: HalfSpaceConstants, amp_mu: float,
                        amp_lambda: float) -> "ElasticProfile":
        """Quadratic rise above the homogeneous depth: p(Z) = p_I + a (Z + H)^2 for Z > -H."""
        H = constants.H

        def make(base, amp):
            def f(Z):
                s = np.asarray(Z, dtype=float) + H
                out = base + amp * np.where(s > 0, s * s, 0.0)
                return out if np.ndim(Z) else float(out)

            def df(Z):
                s = np.asarray(Z, dtype=float) + H
                out = 2.0 * amp * np.where(s > 0, s, 0.0)
                return out if np.ndim(Z) else float(out)

            def d2f(Z):
                s = np.asarray(Z, dtype=float) + H
                out = np.where(s > 0, 2.0 * amp, 0.0)
                return out if np.ndim(Z) else float(out)
            return f, df, d2f

        mu, dmu, d2mu = make(constants.mu_I, amp_mu)
        lam, dlam, d2lam = make(constants.lambda_I, amp_lambda)
        return cls(constants, mu, dmu, d2mu, lam, dlam, d2lam, kind="polynomial-bump")

    @classmethod
    def from_table(cls, constants: HalfSpaceConstants, Z: Sequence[float],
                   mu: Sequence[float], lam: Sequence[float]) -> "ElasticProfile":
        """Clamped cubic spline through tabulated samples on [-H, 0].

        The table must start at ``Z = -H`` with the deep values; the spline is
        clamped to zero slope there so the value and first derivative join the
        homogeneous region.
        """
        Z = np.asarray(Z, dtype=float)
        order = np.argsort(Z)
        Z = Z[order]
        H = constants.H
        if abs(Z[0] + H) > 1e-12 or Z[-1] < 0:
            raise ValueError("table must cover [-H, 0] and start at -H")

        def make(vals, base):
            vals = np.asarray(vals, dtype=float)[order]
            sp = CubicSpline(Z, vals, bc_type=((1, 0.0), "not-a-knot"))
            d1, d2 = sp.derivative(1), sp.derivative(2)

            def wrap(g, deep):
                def f(z):
                    z_arr = np.asarray(z, dtype=float)
                    out = np.where(z_arr > -H, g(np.maximum(z_arr, -H)), deep)
                    return out if np.ndim(z) else float(out)
                return f
            return wrap(sp, base), wrap(d1, 0.0), wrap(d2, 0.0)

        m = make(mu, constants.mu_I)
        l = make(lam, constants.lambda_I)
        return cls(constants, *m, *l, kind="table+spline")

    # quantities at the free surface; primes are derivatives in x = -Z
    @property
    def mu0(self) -> float:
        return float(self.mu(0.0))

    @property
    def lambda0(self) -> float:
        return float(self.lam(0.0))

    @property
    def mu0_x(self) -> float:
        return -float(self.dmu(0.0))

    @property
    def inv_mu_xx0(self) -> float:
        """Second derivative of 1/mu at the surface (same in x and Z)."""
        m, d1, d2 = self.mu0, float(self.dmu(0.0)), float(self.d2mu(0.0))
        return (2.0 * d1 * d1 - m * d2) / m**3

    @property
    def c0(self) -> float:
        return (self.lambda0 + self.mu0) / (self.lambda0 + 2.0 * self.mu0)

    def is_homogeneous(self) -> bool:
        return self.kind == "constant"


@dataclass
class ValidationReport:
    errors: list = field(default_factory=list)
    warnings: list = field(default_factory=list)

    @property
    def valid(self) -> bool:
        return not self.errors


def validate_profile(profile: ElasticProfile, n: int = 401, fd_rtol: float = 1e-6) -> ValidationReport:
    """Sample the profile on [-H-1, 0] and list every violated invariant.

    Raises ValueError when a sample is not finite.
    """
    c = profile.constants
    H = c.H
    rep = ValidationReport()
    Z = np.linspace(-H - 1.0, 0.0, n)
    Z = np.union1d(Z, [-H])
    names = ("mu", "dmu", "d2mu", "lam", "dlam", "d2lam")
    vals = {}
    for name in names:
        f = getattr(profile, name)
        v = np.array([f(z) for z in Z], dtype=float)
        bad = ~np.isfinite(v)
        if bad.any():
            raise ValueError(f"non-finite {name} at depth Z={Z[bad][0]:.6g}")
        vals[name] = v

    below = Z <= -H
    scale_mu = max(abs(c.mu_I), 1.0)
    scale_lam = max(abs(c.lambda_I), 1.0)
    if (np.abs(vals["mu"][below] - c.mu_I) > 1e-12 * scale_mu).any() or \
            (np.abs(vals["lam"][below] - c.lambda_I) > 1e-12 * scale_lam).any():
        rep.errors.append("not homogeneous below -H")

    inside = ~below | (Z == -H)
    if (vals["mu"][inside] <= 0).any():
        rep.errors.append("mu not positive on [-H, 0]")
    if ((vals["lam"] + 2 * vals["mu"])[inside] <= 0).any():
        rep.errors.append("lambda + 2 mu not positive on [-H, 0]")

    # supplied derivatives vs central differences, away from the junction at -H
    zi = Z[(Z > -H + 1e-3) & (Z < -1e-3)]
    zi = np.append(zi, 0.0)
    for f0, f1, f2, label in ((profile.mu, profile.dmu, profile.d2mu, "mu"),
                              (profile.lam, profile.dlam, profile.d2lam, "lambda")):
        h1, h2 = 1e-5, 1e-4
        for z in zi:
            fd1 = (f0(z + h1) - f0(z - h1)) / (2 * h1)
            fd2 = (f0(z + h2) - 2 * f0(z) + f0(z - h2)) / h2**2
            s1 = max(abs(f1(z)), abs(f0(z)) / max(H, 1.0), 1e-300)
            s2 = max(abs(f2(z)), abs(f0(z)) / max(H, 1.0) ** 2, 1e-300)
            if abs(fd1 - f1(z)) > fd_rtol * s1 or abs(fd2 - f2(z)) > 100 * fd_rtol * s2:
                rep.errors.append(f"{label} derivatives inconsistent near Z={z:.4g}")
                break

    # junction at -H: value and slope must match, curvature jump is only a warning
    eps = 1e-9
    for f0, f1, f2, deep, label in ((profile.mu, profile.dmu, profile.d2mu, c.mu_I, "mu"),
                                    (profile.lam, profile.dlam, profile.d2lam, c.lambda_I, "lambda")):
        if abs(f0(-H + eps) - deep) > 1e-6 * max(abs(deep), 1.0):
            rep.errors.append(f"{label} discontinuous at -H")
        elif abs(f1(-H + eps)) > 1e-6 * max(abs(deep), 1.0):
            rep.errors.append(f"{label} first derivative discontinuous at -H")
        if abs(f2(-H + eps)) > 1e-9 * max(abs(deep), 1.0):
            rep.warnings.append(f"{label} second derivative jumps at -H")
    return rep


@dataclass(frozen=True)
class TransformData:
    """Constant matrix G^H of the transformed frame plus derived deep constants."""
    constants: HalfSpaceConstants
    G11H: float = 1.0
    G12H: float = 0.0
    G21H: float = 0.0
    G22H: float = 1.0

    def __post_init__(self):
        d = self.det
        if abs(d - 1.0) > UNIMODULAR_TOL:
            raise ValueError(f"unimodularity violated: det G^H = {d!r}")

    @property
    def det(self) -> float:
        return self.G11H * self.G22H - self.G12H * self.G21H

    @property
    def c_I(self) -> float:
        return self.constants.c_I

    @property
    def sigma_I(self) -> float:
        return self.constants.sigma_I

    @property
    def rho(self) -> float:
        return self.constants.rho

    def G21(self, x):
        return -0.5 * self.c_I * self.G11H * (np.asarray(x) - self.constants.H) + self.G21H

    def G22(self, x):
        return -0.5 * self.c_I * self.G12H * (np.asarray(x) - self.constants.H) + self.G22H

    @classmethod
    def surface_normalized(cls, constants: HalfSpaceConstants) -> "TransformData":
        """G^H chosen so that the affine G(x) equals the identity at x = 0."""
        return cls(constants, 1.0, 0.0, -0.5 * constants.c_I * constants.H, 1.0)


@dataclass(frozen=True)
class PotentialSpec:
    """Perturbation potential V(x) on x = -Z >= 0, supported in [0, H].

    ``V`` maps an array of shape (n,) to an array of shape (n, 2, 2).
    ``breakpoints`` lists interior points where V is not smooth.
    """
    V: Callable
    H: float
    epsilon: float = 0.1
    kind: str = "custom"
    breakpoints: tuple = ()
    generic: bool = False

    @classmethod
    def zero(cls, H: float) -> "PotentialSpec":
        return cls(lambda x: np.zeros(np.shape(x) + (2, 2)), H, kind="zero")

    @classmethod
    def bump(cls, H: float, start: float, matrix, epsilon: float = 0.1) -> "PotentialSpec":
        """V(x) = M * 4 (x - a)(H - x) / (H - a)^2 on [a, H], zero elsewhere."""
        M = np.asarray(matrix, dtype=float).reshape(2, 2)
        a = float(start)
        if not 0 <= a < H:
            raise ValueError("bump start must lie in [0, H)")

        def V(x):
            x = np.asarray(x, dtype=float)
            prof = np.where((x > a) & (x < H), 4.0 * (x - a) * (H - x) / (H - a) ** 2, 0.0)
            return prof[..., None, None] * M
        return cls(V, H, epsilon, kind="bump", breakpoints=(a,) if a > 0 else (),
                   generic=bool(np.all(M != 0)))

    def is_zero(self) -> bool:
        return self.kind == "zero"

    def check(self, n: int = 200) -> list[str]:
        issues = []
        x = np.linspace(self.H, 2 * self.H + 1, n)
        if np.abs(self.V(x)).max() > 0:
            issues.append("V not zero for x >= H")
        inside = np.linspace(0, self.H, n)
        vals = self.V(inside)
        if not np.isfinite(vals).all():
            issues.append("V not finite on [0, H]")
        if self.generic:
            tail = np.linspace(self.H - self.epsilon, self.H, n + 2)[1:-1]
            vt = self.V(tail)
            for i in range(2):
                for j in range(2):
                    v = vt[:, i, j]
                    if not ((v > 0).all() or (v < 0).all()):
                        issues.append(f"V{i + 1}{j + 1} not sign-definite near H")
        return issues


@dataclass(frozen=True)
class MediumConfig:
    constants: HalfSpaceConstants
    profile: ElasticProfile
    transform: TransformData
    potential: PotentialSpec
    raw: dict = field(default_factory=dict, compare=False)

    @property
    def digest(self) -> str:
        return config_hash(self.raw)


def config_hash(raw: dict) -> str:
    blob = json.dumps(raw, sort_keys=True, separators=(",", ":")).encode()
    return hashlib.sha256(blob).hexdigest()[:16]


def build_profile(constants: HalfSpaceConstants, spec: dict | None) -> ElasticProfile:
    spec = spec or {"kind": "constant"}
    kind = spec.get("kind", "constant")
    p = spec.get("params", {})
    if kind == "constant":
        return ElasticProfile.constant(constants)
    if kind == "polynomial-bump":
        return ElasticProfile.polynomial_bump(constants, float(p.get("amp_mu", 0.1)),
                                              float(p.get("amp_lambda", p.get("amp_mu", 0.1))))
    if kind == "table+spline":
        return ElasticProfile.from_table(constants, p["Z"], p["mu"], p["lambda"])
    raise ValueError(f"unknown profile kind {kind!r}")


def build_potential(constants: HalfSpaceConstants, spec: dict | None) -> PotentialSpec:
    spec = spec or {"kind": "zero"}
    kind = spec.get("kind", "zero")
    p = spec.get("params", {})
    eps = float(spec.get("epsilon", 0.1))
    if kind == "zero":
        return PotentialSpec.zero(constants.H)
    if kind == "bump":
        return PotentialSpec.bump(constants.H, float(p.get("start", 0.0)), p["matrix"], eps)
    raise ValueError(f"unknown potential kind {kind!r}")


def config_from_dict(raw: dict) -> MediumConfig:
    try:
        c = raw["constants"]
        constants = HalfSpaceConstants(float(c["mu_I"]), float(c["lambda_I"]),
                                       float(c["omega"]), float(c["H"]))
    except KeyError as exc:
        raise ValueError(f"missing constants key {exc}") from None
    profile = build_profile(constants, raw.get("profile"))
    t = raw.get("transform") or {}
    if t.get("normalize") == "surface":
        transform = TransformData.surface_normalized(constants)
    else:
        transform = TransformData(constants, float(t.get("G11H", 1.0)), float(t.get("G12H", 0.0)),
                                  float(t.get("G21H", 0.0)), float(t.get("G22H", 1.0)))
    potential = build_potential(constants, raw.get("potential"))
    return MediumConfig(constants, profile, transform, potential, raw)


def load_config(path) -> MediumConfig:
    with open(path) as fh:
        return config_from_dict(json.load(fh))
