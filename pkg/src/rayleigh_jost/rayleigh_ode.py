"""Displacement-frame Jost solutions, traction functionals and determinants.

The Rayleigh system is written as a first-order system in the state
(phi1, phi3, b, a) where

    b = mu (phi1' + i xi phi3),   a = (lambda + 2 mu) phi3' + i xi lambda phi1,

primes being derivatives in Z.  In these variables the right-hand side never
needs derivatives of the Lame parameters, and the surface tractions are read
off directly at Z = 0.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.integrate import solve_ivp

from .medium import ElasticProfile, HalfSpaceConstants
from .riemann import (ALL_SHEETS, PHYSICAL, BranchPointError, QuasiMomenta, SheetTag,
                      SpectralPoint, check_branch_point, quasi_momenta)

RTOL = 1e-10
ATOL = 1e-12


@dataclass
class JostColumn:
    value: np.ndarray      # (phi1, phi3) at Z = 0
    a: complex
    b: complex


@dataclass
class JostFrame:
    value: np.ndarray      # columns f_P^-, f_S^- at Z = 0
    tractions: np.ndarray  # [[a(f_P), a(f_S)], [b(f_P), b(f_S)]]

    @property
    def det(self) -> complex:
        t = self.tractions
        return t[0, 0] * t[1, 1] - t[0, 1] * t[1, 0]

    @property
    def scale(self) -> float:
        t = self.tractions
        return abs(t[0, 0] * t[1, 1]) + abs(t[0, 1] * t[1, 0])


@dataclass
class DeterminantBundle:
    d: tuple
    q: QuasiMomenta
    delta_by_sheet: dict
    F: complex
    scale_by_sheet: dict

    @property
    def F_scale(self) -> float:
        return product_scale(list(self.delta_by_sheet.values()), list(self.scale_by_sheet.values()))


def unperturbed_jost(Z: float, xi: complex, q: QuasiMomenta, branch: str, sign: int):
    """Homogeneous-medium solution and its Z derivative.

    f_P^{+-} = (xi, +-q_P) exp(+-i Z q_P),  f_S^{+-} = (+-q_S, -xi) exp(+-i Z q_S).
    """
    if branch == "P":
        k = sign * q.qP
        v = np.array([xi, k], dtype=complex)
    elif branch == "S":
        k = sign * q.qS
        v = np.array([k, -xi], dtype=complex)
    else:
        raise ValueError("branch must be 'P' or 'S'")
    e = np.exp(1j * Z * k)
    return v * e, 1j * k * v * e


def tractions(xi, mu, lam, phi, dphi):
    """a(Phi) and b(Phi) from values and Z derivatives."""
    a = 1j * xi * lam * phi[0] + (lam + 2 * mu) * dphi[1]
    b = 1j * xi * mu * phi[1] + mu * dphi[0]
    return a, b


def _initial_state(xi, constants: HalfSpaceConstants, q, cols):
    Z0 = -constants.H
    mu, lam = constants.mu_I, constants.lambda_I
    y = np.empty((4, len(cols)), dtype=complex)
    for j, (branch, sign) in enumerate(cols):
        phi, dphi = unperturbed_jost(Z0, xi, q, branch, sign)
        a, b = tractions(xi, mu, lam, phi, dphi)
        y[:, j] = (phi[0], phi[1], b, a)
    return y


def _surface_state(xi, constants, q, cols):
    """Exact surface values for a homogeneous medium."""
    mu, lam = constants.mu_I, constants.lambda_I
    y = np.empty((4, len(cols)), dtype=complex)
    for j, (branch, sign) in enumerate(cols):
        phi, dphi = unperturbed_jost(0.0, xi, q, branch, sign)
        a, b = tractions(xi, mu, lam, phi, dphi)
        y[:, j] = (phi[0], phi[1], b, a)
    return y


def propagate(profile: ElasticProfile, xi: complex, y0: np.ndarray, rtol=RTOL, atol=ATOL):
    """Integrate the state columns y0 (shape (4, m)) from Z = -H to Z = 0."""
    c = profile.constants
    w2 = c.omega**2
    xi = complex(xi)
    ncol = y0.shape[1]
    norms = np.linalg.norm(y0, axis=0)
    norms[norms == 0] = 1.0
    start = (y0 / norms).reshape(-1)
    mu_f, lam_f = profile.mu, profile.lam

    def rhs(Z, y):
        mu = mu_f(Z)
        lam = lam_f(Z)
        s = lam + 2 * mu
        Y = y.reshape(4, ncol)
        p1, p3, b, a = Y
        dp1 = b / mu - 1j * xi * p3
        dp3 = (a - 1j * xi * lam * p1) / s
        db = -1j * xi * lam * dp3 + (s * xi * xi - w2) * p1
        da = -1j * xi * mu * dp1 + (mu * xi * xi - w2) * p3
        return np.concatenate((dp1, dp3, db, da))

    sol = solve_ivp(rhs, (-c.H, 0.0), start, method="DOP853", rtol=rtol, atol=atol)
    if sol.status != 0:
        raise RuntimeError(f"integration failed at Z={sol.t[-1]:.6g}: {sol.message}")
    return sol.y[:, -1].reshape(4, ncol) * norms


def _columns_at_surface(profile, xi, q, cols, force_ode=False, rtol=RTOL, atol=ATOL):
    c = profile.constants
    if profile.is_homogeneous() and not force_ode:
        return _surface_state(xi, c, q, cols)
    return propagate(profile, xi, _initial_state(xi, c, q, cols), rtol, atol)


def propagate_jost(profile: ElasticProfile, point: SpectralPoint, branch: str, sign: int,
                   force_ode=False, rtol=RTOL, atol=ATOL) -> JostColumn:
    q = quasi_momenta(point, profile.constants)
    y = _columns_at_surface(profile, point.xi, q, [(branch, sign)], force_ode, rtol, atol)[:, 0]
    return JostColumn(y[:2].copy(), y[3], y[2])


def jost_frame(profile: ElasticProfile, point: SpectralPoint, force_ode=False,
               rtol=RTOL, atol=ATOL) -> JostFrame:
    """f_P^- and f_S^- on the point's sheet, with their tractions at the surface."""
    q = quasi_momenta(point, profile.constants)
    y = _columns_at_surface(profile, point.xi, q, [("P", -1), ("S", -1)], force_ode, rtol, atol)
    return JostFrame(y[:2].copy(), np.array([y[3], y[2]]))


def rayleigh_determinant(profile: ElasticProfile, point: SpectralPoint, force_ode=False,
                         rtol=RTOL, atol=ATOL) -> complex:
    return jost_frame(profile, point, force_ode, rtol, atol).det


def delta_homogeneous(xi: complex, q: QuasiMomenta, constants: HalfSpaceConstants) -> complex:
    """Closed-form determinant of a homogeneous half-space."""
    mu, w2 = constants.mu_I, constants.omega**2
    return -(w2 - 2 * mu * xi * xi) ** 2 - 4 * mu * mu * xi * xi * q.qP * q.qS


@dataclass
class ThetaPhi:
    """Even and odd parts of the Jost pairs: value (2,) plus tractions (a, b)."""
    theta_P: np.ndarray
    phi_P: np.ndarray
    theta_S: np.ndarray
    phi_S: np.ndarray
    q: QuasiMomenta

    # each array is (phi1, phi3, b, a) at the surface


def theta_phi(profile: ElasticProfile, xi: complex, cut_side="below", force_ode=False,
              rtol=RTOL, atol=ATOL) -> ThetaPhi:
    xi = complex(xi)
    q = quasi_momenta(SpectralPoint(xi, PHYSICAL, cut_side), profile.constants)
    if abs(q.qP) < 1e-8 or abs(q.qS) < 1e-8:
        raise BranchPointError(f"too close to branch point: xi={xi!r}")
    cols = [("P", 1), ("P", -1), ("S", 1), ("S", -1)]
    y = _columns_at_surface(profile, xi, q, cols, force_ode, rtol, atol)
    tP = 0.5 * (y[:, 0] + y[:, 1])
    pP = (y[:, 0] - y[:, 1]) / (2 * q.qP)
    tS = 0.5 * (y[:, 2] + y[:, 3])
    pS = (y[:, 2] - y[:, 3]) / (2 * q.qS)
    return ThetaPhi(tP, pP, tS, pS, q)


def _ab(state):
    return state[3], state[2]


def d_from_theta_phi(tp: ThetaPhi) -> tuple:
    atP, btP = _ab(tp.theta_P)
    apP, bpP = _ab(tp.phi_P)
    atS, btS = _ab(tp.theta_S)
    apS, bpS = _ab(tp.phi_S)
    d1 = atP * btS - atS * btP
    d2 = -(apP * btS - atS * bpP)
    d3 = -(atP * bpS - apS * btP)
    d4 = apP * bpS - apS * bpP
    return d1, d2, d3, d4


def d_coefficients(profile: ElasticProfile, xi: complex, cut_side="below", force_ode=False,
                   rtol=RTOL, atol=ATOL) -> tuple:
    return d_from_theta_phi(theta_phi(profile, xi, cut_side, force_ode, rtol, atol))


def delta_from_d(d, q: QuasiMomenta, sheet: SheetTag) -> complex:
    """d1 + s_P q_P d2 + s_S q_S d3 + s_P s_S q_P q_S d4 with q on the physical branch."""
    sP, sS = sheet.sign_P, sheet.sign_S
    d1, d2, d3, d4 = d
    return d1 + sP * q.qP * d2 + sS * q.qS * d3 + sP * sS * q.qP * q.qS * d4


def _delta_scale(d, q) -> float:
    d1, d2, d3, d4 = d
    return abs(d1) + abs(q.qP * d2) + abs(q.qS * d3) + abs(q.qP * q.qS * d4)


def F_expanded(d, qP2: complex, qS2: complex) -> complex:
    """Product of the four sheet determinants written in q_P^2, q_S^2 only."""
    d1, d2, d3, d4 = d
    P, S = qP2, qS2
    return (d1**4 + P * P * d2**4 + S * S * d3**4 + S * S * P * P * d4**4
            - 2 * P * d1**2 * d2**2 - 2 * S * d1**2 * d3**2 - 2 * S * P * d1**2 * d4**2
            - 2 * P * S * d2**2 * d3**2 - 2 * P * P * S * d2**2 * d4**2
            - 2 * S * S * P * d3**2 * d4**2 + 8 * P * S * d1 * d2 * d3 * d4)


def determinant_bundle(profile: ElasticProfile, xi: complex, cut_side="below", force_ode=False,
                       rtol=RTOL, atol=ATOL) -> DeterminantBundle:
    tp = theta_phi(profile, xi, cut_side, force_ode, rtol, atol)
    d = d_from_theta_phi(tp)
    q = tp.q
    deltas = {str(s): delta_from_d(d, q, s) for s in ALL_SHEETS}
    c = profile.constants
    xi = complex(xi)
    F = F_expanded(d, c.kP2 - xi * xi, c.kS2 - xi * xi)
    sc = _delta_scale(d, q)
    return DeterminantBundle(d, q, deltas, F, {str(s): sc for s in ALL_SHEETS})


def product_scale(values, scales) -> float:
    """Error scale of a product: sum over factors of scale_k times the other |values|."""
    mags = [abs(v) for v in values]
    total = 0.0
    for k, sc in enumerate(scales):
        total += sc * float(np.prod(mags[:k] + mags[k + 1:]))
    return total


def _extrapolate(f, xi0, h):
    """Quadratic extrapolation to xi0 from xi0 + h, + 2h, + 3h."""
    return 3 * f(xi0 + h) - 3 * f(xi0 + 2 * h) + f(xi0 + 3 * h)


def entire_F(profile: ElasticProfile, xi: complex, force_ode=False, rtol=RTOL, atol=ATOL) -> complex:
    """F(xi), the product of the determinant over all four sheets."""
    xi = complex(xi)
    c = profile.constants

    def direct(z):
        return determinant_bundle(profile, z, "below", force_ode, rtol, atol).F
    try:
        check_branch_point(xi, c)
        return direct(xi)
    except BranchPointError:
        return _extrapolate(direct, xi, 1e-4j * c.r_minus)


class DisplacementModel:
    """Determinant evaluator built on the displacement-frame ODE."""

    frame = "displacement"

    def __init__(self, profile: ElasticProfile, force_ode=False, rtol=RTOL, atol=ATOL):
        self.profile = profile
        self.constants = profile.constants
        self.force_ode = force_ode
        self.rtol, self.atol = rtol, atol

    def coarse(self, rtol=1e-8, atol=1e-10) -> "DisplacementModel":
        if self.profile.is_homogeneous() and not self.force_ode:
            return self
        return DisplacementModel(self.profile, self.force_ode, rtol, atol)

    def delta(self, xi, sheet=PHYSICAL, cut_side="below") -> tuple[complex, float]:
        fr = jost_frame(self.profile, SpectralPoint(xi, sheet, cut_side), self.force_ode,
                        self.rtol, self.atol)
        return fr.det, fr.scale

    def bundle(self, xi, cut_side="below") -> DeterminantBundle:
        return determinant_bundle(self.profile, xi, cut_side, self.force_ode, self.rtol, self.atol)

    def F(self, xi) -> tuple[complex, float]:
        c = self.constants
        xi = complex(xi)
        try:
            check_branch_point(xi, c)
        except BranchPointError:
            h = 1e-4j * c.r_minus
            return _extrapolate(lambda z: self.F(z)[0], xi, h), self.F(xi + h)[1]
        b = self.bundle(xi)
        return b.F, b.F_scale
