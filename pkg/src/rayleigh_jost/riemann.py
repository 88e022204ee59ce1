"""Points on the four-sheeted surface of the quasi-momenta.

A point is a complex ``xi`` plus a sheet tag giving the signs of Im q_P and
Im q_S.  Branch cuts of q_P lie on [-r_+, r_+] and the imaginary axis, those of
q_S on [-r_-, r_-] and the imaginary axis.  On a cut the value is the limit
taken from one side, chosen by ``cut_side``:

* real-axis cuts: ``below`` is xi - i0, ``above`` is xi + i0;
* imaginary-axis cuts: the same rule rotated by a quarter turn, so ``below``
  is the limit from Re xi > 0 and ``above`` the limit from Re xi < 0.
"""
from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np

from .medium import HalfSpaceConstants

BRANCH_EPS = 1e-12


class BranchPointError(ValueError):
    pass


@dataclass(frozen=True)
class SheetTag:
    sign_P: int = 1
    sign_S: int = 1

    def __post_init__(self):
        if self.sign_P not in (1, -1) or self.sign_S not in (1, -1):
            raise ValueError("sheet signs must be +1 or -1")

    @classmethod
    def parse(cls, text) -> "SheetTag":
        if isinstance(text, SheetTag):
            return text
        text = str(text).strip().replace("(", "").replace(")", "").replace(",", "")
        if len(text) != 2 or any(ch not in "+-" for ch in text):
            raise ValueError(f"bad sheet tag {text!r}")
        return cls(1 if text[0] == "+" else -1, 1 if text[1] == "+" else -1)

    def __str__(self):
        return ("+" if self.sign_P > 0 else "-") + ("+" if self.sign_S > 0 else "-")

    @property
    def physical(self) -> bool:
        return self.sign_P > 0 and self.sign_S > 0


PHYSICAL = SheetTag(1, 1)
ALL_SHEETS = (SheetTag(1, 1), SheetTag(1, -1), SheetTag(-1, 1), SheetTag(-1, -1))


@dataclass(frozen=True)
class SpectralPoint:
    xi: complex
    sheet: SheetTag = PHYSICAL
    cut_side: str = "below"

    def __post_init__(self):
        object.__setattr__(self, "xi", complex(self.xi))
        if not np.isfinite(self.xi.real) or not np.isfinite(self.xi.imag):
            raise ValueError("xi must be finite")
        if self.cut_side not in ("above", "below"):
            raise ValueError("cut_side must be 'above' or 'below'")
        if not isinstance(self.sheet, SheetTag):
            object.__setattr__(self, "sheet", SheetTag.parse(self.sheet))


@dataclass(frozen=True)
class QuasiMomenta:
    qP: complex
    qS: complex


def on_imaginary_axis(xi: complex) -> bool:
    return complex(xi).real == 0.0


def on_cut(xi: complex, constants: HalfSpaceConstants) -> bool:
    """True if xi lies on any branch cut of q_P or q_S."""
    xi = complex(xi)
    if xi.real == 0.0:
        return True
    return xi.imag == 0.0 and abs(xi.real) <= constants.r_minus


def _approach(xi: complex, cut_side: str) -> complex:
    """Direction from which a cut value is approached."""
    below = cut_side == "below"
    if xi.imag == 0.0:
        return -1j if below else 1j
    return 1.0 if below else -1.0


def _branch(q2: complex, xi: complex, sign: int, cut_side: str) -> complex:
    q = np.sqrt(complex(q2))
    if q.imag != 0.0:
        return q if (q.imag > 0) == (sign > 0) else -q
    # q real: xi is on a cut; follow q along xi + t*d for small t > 0.
    # dq = -xi*d*t/q, so Im q has the sign of -Im(xi*d) for the root q > 0.
    d = _approach(xi, cut_side)
    s = -(xi * d).imag
    if s == 0.0:
        return q
    return q if (s > 0) == (sign > 0) else -q


def check_branch_point(xi: complex, constants: HalfSpaceConstants) -> None:
    rad = BRANCH_EPS * constants.r_minus
    for r in (constants.r_plus, constants.r_minus):
        if abs(xi - r) < rad or abs(xi + r) < rad:
            raise BranchPointError(f"branch point: xi={xi!r} within {rad:.1e} of +-{r:.6g}")


def quasi_momenta(point: SpectralPoint, constants: HalfSpaceConstants) -> QuasiMomenta:
    """Quasi-momenta consistent with the sheet tag of ``point``."""
    xi = point.xi
    check_branch_point(xi, constants)
    xi2 = xi * xi
    qP = _branch(constants.kP2 - xi2, xi, point.sheet.sign_P, point.cut_side)
    qS = _branch(constants.kS2 - xi2, xi, point.sheet.sign_S, point.cut_side)
    return QuasiMomenta(qP, qS)


def sheet_of(q: QuasiMomenta) -> SheetTag | None:
    """Sheet tag read off from the imaginary parts; None when one of them is zero."""
    if q.qP.imag == 0 or q.qS.imag == 0:
        return None
    return SheetTag(1 if q.qP.imag > 0 else -1, 1 if q.qS.imag > 0 else -1)


def apply_mapping(point: SpectralPoint, which: str) -> SpectralPoint:
    """The involutions w_P, w_S, w_PS: flip the sign of q_P, q_S, or both."""
    sP, sS = point.sheet.sign_P, point.sheet.sign_S
    if which == "P":
        tag = SheetTag(-sP, sS)
    elif which == "S":
        tag = SheetTag(sP, -sS)
    elif which == "PS":
        tag = SheetTag(-sP, -sS)
    else:
        raise ValueError(f"unknown mapping {which!r}")
    return replace(point, sheet=tag)


def reflect(point: SpectralPoint) -> SpectralPoint:
    """The point -xi on the same sheet; q is unchanged.

    On a cut the approach side is mirrored too, so the quasi-momenta agree.
    """
    side = {"above": "below", "below": "above"}[point.cut_side]
    return replace(point, xi=-point.xi, cut_side=side)


def conjugate(point: SpectralPoint, constants: HalfSpaceConstants) -> SpectralPoint:
    """The point conj(xi) with q(result) = -conj(q(point)).

    Off the cuts -conj(q) has the same sign of Im as q, so the tag is kept.
    """
    if on_cut(point.xi, constants):
        raise ValueError("conjugation is not defined on a branch cut")
    return replace(point, xi=point.xi.conjugate())


def asymptotic_check(point: SpectralPoint, constants: HalfSpaceConstants) -> float:
    """Distance of (q_P, q_S) from the large-xi forms s_P i xi, s_S i xi.

    Valid for Re xi >= 0; the signs follow the sheet tag.
    """
    q = quasi_momenta(point, constants)
    xi = point.xi
    return abs(q.qP - point.sheet.sign_P * 1j * xi) + abs(q.qS - point.sheet.sign_S * 1j * xi)


def asymptotic_bound(point: SpectralPoint, constants: HalfSpaceConstants) -> float:
    return constants.kS2 / abs(point.xi) * 1.1
