"""Transformed frame: matrix Schrodinger problem on x = -Z >= 0.

The system is -F'' + (Q0 + V) F = -xi^2 F with the Robin-type condition
F'(0) + Theta(xi) F(0) = 0.  Q0 is the affine background potential built from
G^H, V is the perturbation supported in [0, H].

Jost columns carry exp(+i k x) with k = +-q_P or +-q_S.  Numerically every
column is handled in scaled form h = exp(-i k x) F, for which the Volterra
kernel is G(x, y) exp(i k (y - x)).
"""
from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache

import numpy as np
from scipy.integrate import solve_ivp

from .rayleigh_ode import product_scale
from .medium import ElasticProfile, HalfSpaceConstants, PotentialSpec, TransformData
from .riemann import (ALL_SHEETS, PHYSICAL, BranchPointError, QuasiMomenta, SheetTag,
                      SpectralPoint, check_branch_point, quasi_momenta)

ITER_TOL = 1e-12
MAX_ITER = 60
ODE_RTOL = 1e-12
ODE_ATOL = 1e-14


@dataclass(frozen=True)
class ThetaMatrix:
    theta1: float
    theta2: float
    theta3: float
    xi2_coefficient: float

    @classmethod
    def from_profile(cls, profile: ElasticProfile) -> "ThetaMatrix":
        c = profile.constants
        mu0, lam0 = profile.mu0, profile.lambda0
        theta3 = profile.mu0_x / mu0
        theta2 = mu0**2 / (2 * c.mu_I * (lam0 + 2 * mu0))
        theta1 = (c.mu_I / mu0) * (c.omega**2 / mu0 + mu0 * profile.inv_mu_xx0)
        return cls(theta1, theta2, theta3, 2 * c.mu_I / mu0)

    def matrix(self, xi) -> np.ndarray:
        xi = complex(xi)
        return np.array([[-self.theta3, self.theta2],
                         [self.xi2_coefficient * xi * xi - self.theta1, 0.0]], dtype=complex)


@dataclass
class TransformedFrame:
    value0: np.ndarray
    deriv0: np.ndarray
    jost_function: np.ndarray


def background_potential(x, td: TransformData) -> np.ndarray:
    """Q0(x); accepts a scalar or an array of x, returns (..., 2, 2)."""
    c = td.constants
    x = np.asarray(x, dtype=float)
    w2 = c.omega**2
    g21, g22 = td.G21(x), td.G22(x)
    pref = w2 * (c.lambda_I + c.mu_I) / (c.mu_I * c.sigma_I)
    Q = np.empty(x.shape + (2, 2))
    Q[..., 0, 0] = -w2 / c.mu_I - pref * td.G12H * g21
    Q[..., 0, 1] = pref * g21 * td.G11H
    Q[..., 1, 0] = -pref * td.G12H * g22
    Q[..., 1, 1] = -w2 / c.sigma_I + pref * td.G12H * g21
    return Q


def kernel_A(x, td: TransformData) -> np.ndarray:
    x = np.asarray(x, dtype=float)
    g21, g22 = td.G21(x), td.G22(x)
    A = np.empty(x.shape + (2, 2))
    A[..., 0, 0] = -td.G12H * g21
    A[..., 0, 1] = td.G11H * g21
    A[..., 1, 0] = -td.G12H * g22
    A[..., 1, 1] = td.G11H * g22
    return A


def kernel_B(y, td: TransformData) -> np.ndarray:
    y = np.asarray(y, dtype=float)
    g21, g22 = td.G21(y), td.G22(y)
    B = np.empty(y.shape + (2, 2))
    B[..., 0, 0] = td.G11H * g22
    B[..., 0, 1] = -td.G11H * g21
    B[..., 1, 0] = td.G12H * g22
    B[..., 1, 1] = -td.G12H * g21
    return B


def kernel_C(td: TransformData) -> np.ndarray:
    m = td.constants.mu_I
    g11, g12 = td.G11H, td.G12H
    return m * np.array([[g12 * g11, -g11 * g11], [g12 * g12, -g12 * g11]])


def kernel_A_prime(td: TransformData) -> np.ndarray:
    """dA/dx, constant because G21, G22 are affine."""
    return 0.5 * td.c_I / td.constants.mu_I * kernel_C(td)


def sinc_q(z, q):
    """sin(z q) / q, finite as q -> 0."""
    z = np.asarray(z)
    zq = z * q
    small = np.abs(zq) < 1e-4
    safe = np.where(small, 1.0, zq)
    series = z * (1 - zq**2 / 6 + zq**4 / 120)
    return np.where(small, series, np.sin(safe) / np.where(small, 1.0, q))


def green_kernel(x, y, q: QuasiMomenta, td: TransformData) -> np.ndarray:
    """G(x, y) for broadcastable arrays x, y; returns (..., 2, 2)."""
    x, y = np.broadcast_arrays(np.asarray(x, float), np.asarray(y, float))
    z = x - y
    w2 = td.constants.omega**2
    sP = sinc_q(z, q.qP)[..., None, None]
    sS = sinc_q(z, q.qS)[..., None, None]
    cc = ((np.cos(z * q.qS) - np.cos(z * q.qP)) / w2)[..., None, None]
    return kernel_A(x, td) * sP + kernel_B(y, td) * sS + kernel_C(td) * cc


def green_kernel_dx(x, y, q: QuasiMomenta, td: TransformData) -> np.ndarray:
    """Partial derivative of the Green kernel in its first argument."""
    x, y = np.broadcast_arrays(np.asarray(x, float), np.asarray(y, float))
    z = x - y
    w2 = td.constants.omega**2
    sP = sinc_q(z, q.qP)[..., None, None]
    cP = np.cos(z * q.qP)[..., None, None]
    cS = np.cos(z * q.qS)[..., None, None]
    tail = ((q.qP**2 * sinc_q(z, q.qP) - q.qS**2 * sinc_q(z, q.qS)) / w2)[..., None, None]
    return (kernel_A_prime(td) * sP + kernel_A(x, td) * cP + kernel_B(y, td) * cS
            + kernel_C(td) * tail)


def column_data(xi, q: QuasiMomenta, td: TransformData, branch: str, sign: int):
    """Wavenumber k and affine amplitude v(x) = v0 + v1 x of an unperturbed column.

    The column is exp(i k x) v(x).
    """
    c = td.constants
    w2 = c.omega**2
    g = np.array([td.G11H, td.G12H], dtype=complex)
    if branch == "P":
        k = sign * q.qP
        slope = -0.5 * td.c_I * g
        at_H = np.array([td.G21H, td.G22H], dtype=complex) + 1j * k * c.mu_I / w2 * g
        v0 = at_H - slope * c.H
        return k, v0, slope.astype(complex)
    if branch == "S":
        k = sign * q.qS
        return k, -c.mu_I * xi / w2 * g, np.zeros(2, dtype=complex)
    raise ValueError("branch must be 'P' or 'S'")


def unperturbed_jost_matrix(x, xi, q: QuasiMomenta, td: TransformData):
    """F0(x) with columns F_P^+, F_S^+ and its x derivative."""
    val = np.empty((2, 2), dtype=complex)
    der = np.empty((2, 2), dtype=complex)
    for j, br in enumerate("PS"):
        k, v0, v1 = column_data(complex(xi), q, td, br, 1)
        e = np.exp(1j * k * x)
        v = v0 + v1 * x
        val[:, j] = v * e
        der[:, j] = (v1 + 1j * k * v) * e
    return val, der


@lru_cache(maxsize=None)
def panel_rule(H: float, n_panels: int, n_nodes: int):
    t, w = np.polynomial.legendre.leggauss(n_nodes)
    h = H / n_panels
    a = np.arange(n_panels) * h
    nodes = (a[:, None] + 0.5 * h * (t[None, :] + 1)).reshape(-1)
    weights = np.tile(0.5 * h * w, n_panels)
    return nodes, weights, t, w


def _lagrange_weights(nodes):
    n = len(nodes)
    bw = np.ones(n)
    for j in range(n):
        d = nodes[j] - np.delete(nodes, j)
        bw[j] = 1.0 / np.prod(d)
    return bw


def _lagrange_matrix(nodes, bw, targets):
    """Rows: Lagrange basis on ``nodes`` evaluated at ``targets``."""
    diff = targets[:, None] - nodes[None, :]
    exact = diff == 0
    diff = np.where(exact, 1.0, diff)
    tmp = bw[None, :] / diff
    L = tmp / tmp.sum(axis=1, keepdims=True)
    rows = exact.any(axis=1)
    L[rows] = exact[rows].astype(float)
    return L


class VolterraSolver:
    """Composite Gauss-Legendre Nystrom discretization of the scaled Volterra equation."""

    def __init__(self, td: TransformData, potential: PotentialSpec, n_panels=16, n_nodes=32):
        self.td = td
        self.potential = potential
        H = td.constants.H
        self.H = H
        self.n_panels, self.n_nodes = n_panels, n_nodes
        self.nodes, self.weights, self.t, self.w = panel_rule(H, n_panels, n_nodes)
        self.hp = H / n_panels
        self.Vn = potential.V(self.nodes)
        N = len(self.nodes)
        self.panel_of = np.repeat(np.arange(n_panels), n_nodes)
        # partial-panel rules: for node i, GL nodes on [x_i, end of its panel]
        ends = (self.panel_of + 1) * self.hp
        half = 0.5 * (ends - self.nodes)
        self.sub_nodes = self.nodes[:, None] + half[:, None] * (self.t[None, :] + 1)
        self.sub_weights = half[:, None] * self.w[None, :]
        self.sub_V = potential.V(self.sub_nodes)
        bw = _lagrange_weights(self.nodes[:n_nodes])
        self.sub_L = np.empty((N, n_nodes, n_nodes))
        for i in range(N):
            p = self.panel_of[i]
            local = self.nodes[p * n_nodes:(p + 1) * n_nodes]
            self.sub_L[i] = _lagrange_matrix(local, _lagrange_weights(local), self.sub_nodes[i])
        self.later = self.panel_of[None, :] > self.panel_of[:, None]

    def operator(self, q, k):
        """Matrix M with (K h)(x_i) = sum_j M[i, j] h(x_j); blocks are 2x2."""
        td = self.td
        N, K = len(self.nodes), self.n_nodes
        x = self.nodes
        G = green_kernel(x[:, None], x[None, :], q, td)
        ph = np.exp(1j * k * (x[None, :] - x[:, None]))
        full = (self.later * self.weights[None, :] * ph)[..., None, None] * (G @ self.Vn[None, :])
        Gs = green_kernel(x[:, None], self.sub_nodes, q, td)
        phs = np.exp(1j * k * (self.sub_nodes - x[:, None]))
        part = (self.sub_weights * phs)[..., None, None] * (Gs @ self.sub_V)
        # part[i, m] multiplies h(sub_node_m) = sum_k L[i, m, k] h(local_k)
        local = np.einsum("imab,imk->ikab", part, self.sub_L)
        M = full
        for p in range(self.n_panels):
            sl = slice(p * K, (p + 1) * K)
            M[sl, sl] += local[sl]
        return M.transpose(0, 2, 1, 3).reshape(2 * N, 2 * N)

    def solve_column(self, xi, q, k, v0, v1, tol=ITER_TOL, max_iter=MAX_ITER):
        x = self.nodes
        h0 = (v0[None, :] + v1[None, :] * x[:, None]).reshape(-1)
        if self.potential.is_zero():
            h = h0
        else:
            M = self.operator(q, k)
            h = h0.copy()
            for it in range(max_iter):
                term = M @ h
                new = h0 - term
                step = np.max(np.abs(new - h))
                h = new
                if step <= tol * max(np.max(np.abs(h)), 1e-300):
                    break
            else:
                raise RuntimeError(f"Volterra iteration did not converge: last step {step:.3e}, "
                                   f"solution norm {np.max(np.abs(h)):.3e}")
        hn = h.reshape(-1, 2)
        td = self.td
        e = np.exp(1j * k * x)
        src = np.einsum("jab,jb->ja", self.Vn, hn) * (self.weights * e)[:, None]
        G0 = green_kernel(0.0, x, q, td)
        Gx0 = green_kernel_dx(0.0, x, q, td)
        val = v0 - np.einsum("jab,jb->a", G0, src)
        der = v1 + 1j * k * v0 - np.einsum("jab,jb->a", Gx0, src)
        return val, der


def _ode_columns(td: TransformData, potential: PotentialSpec, xi, ks, v0s, v1s,
                 rtol=ODE_RTOL, atol=ODE_ATOL):
    """Integrate scaled columns h'' = (Q0 + V + xi^2 + k^2) h - 2 i k h' from x = H to 0."""
    H = td.constants.H
    xi = complex(xi)
    m = len(ks)
    ks = np.asarray(ks, dtype=complex)
    shift = xi * xi + ks * ks
    hH = np.stack([v0 + v1 * H for v0, v1 in zip(v0s, v1s)], axis=1)
    dH = np.stack(list(v1s), axis=1)
    norms = np.maximum(np.linalg.norm(hH, axis=0), np.linalg.norm(dH, axis=0))
    norms[norms == 0] = 1.0
    y = np.concatenate([(hH / norms).reshape(-1), (dH / norms).reshape(-1)])
    Vf = potential.V

    def rhs(x, y):
        h = y[:2 * m].reshape(2, m)
        dh = y[2 * m:].reshape(2, m)
        W = background_potential(x, td) + Vf(np.array(x))
        d2 = W @ h + h * shift[None, :] - 2j * dh * ks[None, :]
        return np.concatenate([dh.reshape(-1), d2.reshape(-1)])

    cuts = sorted({b for b in potential.breakpoints if 0 < b < H}, reverse=True)
    edges = [H] + cuts + [0.0]
    for a, b in zip(edges[:-1], edges[1:]):
        sol = solve_ivp(rhs, (a, b), y, method="DOP853", rtol=rtol, atol=atol)
        if sol.status != 0:
            raise RuntimeError(f"integration failed at x={sol.t[-1]:.6g}: {sol.message}")
        y = sol.y[:, -1]
    h0 = y[:2 * m].reshape(2, m) * norms
    dh0 = y[2 * m:].reshape(2, m) * norms
    return h0, dh0 + 1j * ks[None, :] * h0


def jost_function(value0, deriv0, theta: ThetaMatrix, xi) -> np.ndarray:
    return deriv0 + theta.matrix(xi) @ value0


class TransformedModel:
    """Jost function and determinants of the transformed frame."""

    frame = "transformed"

    def __init__(self, td: TransformData, potential: PotentialSpec, theta: ThetaMatrix,
                 mu0: float, mu0_x: float, mode="auto", n_panels=16, n_nodes=32,
                 crossover=30.0, ode_rtol=ODE_RTOL, ode_atol=ODE_ATOL, c0=None):
        self.td = td
        self.c0 = td.constants.c_I if c0 is None else c0
        self.constants = td.constants
        self.potential = potential
        self.theta = theta
        self.mu0, self.mu0_x = mu0, mu0_x
        self.mode = mode
        self.n_panels, self.n_nodes = n_panels, n_nodes
        self.crossover = crossover
        self.ode_rtol, self.ode_atol = ode_rtol, ode_atol
        self._solver = None

    @classmethod
    def from_config(cls, cfg, **kw) -> "TransformedModel":
        p = cfg.profile
        kw.setdefault("c0", p.c0)
        return cls(cfg.transform, cfg.potential, ThetaMatrix.from_profile(p), p.mu0, p.mu0_x, **kw)

    def coarse(self, rtol=1e-8, atol=1e-10) -> "TransformedModel":
        """A cheaper copy for contour sampling, where only the phase matters."""
        if self.potential.is_zero():
            return self
        return TransformedModel(self.td, self.potential, self.theta, self.mu0, self.mu0_x,
                                "ode", self.n_panels, self.n_nodes, self.crossover, rtol, atol, self.c0)

    @property
    def solver(self) -> VolterraSolver:
        if self._solver is None:
            self._solver = VolterraSolver(self.td, self.potential, self.n_panels, self.n_nodes)
        return self._solver

    def _mode_for(self, xi):
        if self.mode != "auto":
            return self.mode
        return "ode" if abs(xi) * self.constants.H > self.crossover else "iterates"

    def columns(self, xi, q: QuasiMomenta, specs, mode=None):
        """Surface values and derivatives of the Jost columns listed in specs."""
        xi = complex(xi)
        mode = mode or self._mode_for(xi)
        data = [column_data(xi, q, self.td, br, s) for br, s in specs]
        if self.potential.is_zero():
            val = np.stack([d[1] for d in data], axis=1)
            der = np.stack([d[2] + 1j * d[0] * d[1] for d in data], axis=1)
            return val, der
        if mode == "iterates":
            out = [self.solver.solve_column(xi, q, k, v0, v1) for k, v0, v1 in data]
            return np.stack([o[0] for o in out], axis=1), np.stack([o[1] for o in out], axis=1)
        if mode == "ode":
            return _ode_columns(self.td, self.potential, xi, [d[0] for d in data],
                                [d[1] for d in data], [d[2] for d in data],
                                self.ode_rtol, self.ode_atol)
        raise ValueError(f"unknown mode {mode!r}")

    def frame_at(self, point: SpectralPoint, mode=None) -> TransformedFrame:
        q = quasi_momenta(point, self.constants)
        specs = [("P", point.sheet.sign_P), ("S", point.sheet.sign_S)]
        # signs are already inside q; columns use the sheet's own q
        q_phys = QuasiMomenta(point.sheet.sign_P * q.qP, point.sheet.sign_S * q.qS)
        val, der = self.columns(point.xi, q_phys, specs, mode)
        return TransformedFrame(val, der, jost_function(val, der, self.theta, point.xi))

    def volterra_solve(self, point: SpectralPoint, mode=None) -> TransformedFrame:
        return self.frame_at(point, mode)

    def bridge(self, F_theta, xi):
        return bridge_boundary_matrix(F_theta, xi, self.constants, self.mu0, self.mu0_x)

    def delta(self, xi, sheet=PHYSICAL, cut_side="below", mode=None) -> tuple[complex, float]:
        fr = self.frame_at(SpectralPoint(xi, sheet, cut_side), mode)
        B = self.bridge(fr.jost_function, xi)
        return B[0, 0] * B[1, 1] - B[0, 1] * B[1, 0], abs(B[0, 0] * B[1, 1]) + abs(B[0, 1] * B[1, 0])

    def deltas_all(self, xi, cut_side="below", mode=None) -> tuple[dict, dict]:
        """Determinant on all four sheets from one solve of the four Jost columns."""
        xi = complex(xi)
        q = quasi_momenta(SpectralPoint(xi, PHYSICAL, cut_side), self.constants)
        specs = [("P", 1), ("P", -1), ("S", 1), ("S", -1)]
        val, der = self.columns(xi, q, specs, mode)
        FT = der + self.theta.matrix(xi) @ val
        out, scales = {}, {}
        for s in ALL_SHEETS:
            iP = 0 if s.sign_P > 0 else 1
            iS = 2 if s.sign_S > 0 else 3
            B = self.bridge(FT[:, [iP, iS]], xi)
            out[str(s)] = B[0, 0] * B[1, 1] - B[0, 1] * B[1, 0]
            scales[str(s)] = abs(B[0, 0] * B[1, 1]) + abs(B[0, 1] * B[1, 0])
        return out, scales

    def F(self, xi, mode=None) -> tuple[complex, float]:
        xi = complex(xi)
        c = self.constants
        try:
            check_branch_point(xi, c)
            if xi == 0:
                raise BranchPointError("origin")
        except BranchPointError:
            h = 1e-4j * c.r_minus
            vals = [self.F(xi + j * h, mode) for j in (1, 2, 3)]
            return 3 * vals[0][0] - 3 * vals[1][0] + vals[2][0], vals[0][1]
        d, s = self.deltas_all(xi, mode=mode)
        keys = list(d)
        return np.prod([d[k] for k in keys]), product_scale([d[k] for k in keys], [s[k] for k in keys])


def bridge_boundary_matrix(F_theta, xi, constants: HalfSpaceConstants, mu0: float,
                           mu0_x: float) -> np.ndarray:
    """Boundary matrix of the displacement frame from the transformed Jost function."""
    xi = complex(xi)
    if xi == 0:
        raise ValueError("bridge singular at origin")
    m, w2 = constants.mu_I, constants.omega**2
    A1 = np.array([[2 * xi * m, 0], [2j * m * mu0_x / mu0, -1j * mu0]], dtype=complex)
    A2 = np.diag([w2 / (1j * xi * m), -w2 / (xi * m)])
    return A1 @ np.asarray(F_theta, dtype=complex) @ A2
