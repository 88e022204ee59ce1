"""Zeros of the Rayleigh determinant and of F by the argument principle.

A target is a callable ``target(xi, cut_side) -> (value, scale)`` where
``scale`` is a local magnitude against which ``value`` is judged small.
Targets may also offer ``contour(xi, cut_side)``, a cheaper evaluation used
only for sampling the phase along cell boundaries; Newton refinement always
uses the full-precision call.

Per-sheet determinants jump across the branch cuts, so their search regions
are first split along the cuts; F is entire and needs no splitting.
"""
from __future__ import annotations

import cmath
import csv
import math
from dataclasses import dataclass, field

from .riemann import ALL_SHEETS, PHYSICAL, BranchPointError, SheetTag

CONTOUR_TOL = 1e-10
COARSE_CONTOUR_TOL = 1e-6
NEWTON_TOL = 1e-12
RESIDUAL_TOL = 1e-9
CLASSIFY_TOL = 1e-8
MIN_CELL = 1e-8
DEDUPE = 1e-7
MAX_NUDGES = 8
# split fractions are kept off-centre so symmetric zeros do not land on split lines
_SPLIT_OFFSETS = (0.0123, -0.0371, 0.0619, -0.0877, 0.1131, -0.1409, 0.1667, -0.1913, 0.2221)


class ContourError(RuntimeError):
    pass


class InconsistentZero(RuntimeError):
    pass


class _NearZero(Exception):
    def __init__(self, xi):
        super().__init__(xi)
        self.xi = xi


# ---------------------------------------------------------------- targets

def _coarse_of(model):
    m = model.coarse() if hasattr(model, "coarse") else model
    return None if m is model else m


class DeltaTarget:
    """Rayleigh determinant on one sheet."""

    has_cuts = True
    symmetric = False

    def __init__(self, model, sheet=PHYSICAL, coarse=False):
        self.model = model
        self.sheet = SheetTag.parse(sheet)
        self.constants = model.constants
        self.label = str(self.sheet)
        self._coarse = _coarse_of(model) if coarse else None
        self.contour_tol = COARSE_CONTOUR_TOL if self._coarse else CONTOUR_TOL

    def __call__(self, xi, cut_side="below"):
        return self.model.delta(xi, self.sheet, cut_side)

    def contour(self, xi, cut_side="below"):
        m = self._coarse or self.model
        return m.delta(xi, self.sheet, cut_side)


class EntireTarget:
    """F, the product of the determinant over the four sheets.

    F is even and real on the real axis, which ``search`` can exploit.
    """

    has_cuts = False
    symmetric = True
    label = "all"

    def __init__(self, model, coarse=True):
        self.model = model
        self.constants = model.constants
        self._coarse = _coarse_of(model) if coarse else None
        self.contour_tol = COARSE_CONTOUR_TOL if self._coarse else CONTOUR_TOL

    def __call__(self, xi, cut_side="below"):
        return self.model.F(xi)

    def contour(self, xi, cut_side="below"):
        return (self._coarse or self.model).F(xi)


class FunctionTarget:
    """A plain analytic function; its scale is max(1, |f|)."""

    has_cuts = False
    symmetric = False
    constants = None
    contour_tol = CONTOUR_TOL

    def __init__(self, func, label="f"):
        self.func = func
        self.label = label

    def __call__(self, xi, cut_side="below"):
        v = complex(self.func(xi))
        return v, max(1.0, abs(v))

    contour = __call__


def as_target(obj):
    return obj if hasattr(obj, "has_cuts") else FunctionTarget(obj)


# ---------------------------------------------------------------- records

@dataclass(frozen=True)
class SearchRegion:
    lower_left: complex
    upper_right: complex
    exclusion_radius: float = 1e-9

    def __post_init__(self):
        a, b = complex(self.lower_left), complex(self.upper_right)
        object.__setattr__(self, "lower_left", a)
        object.__setattr__(self, "upper_right", b)
        if not (b.real > a.real and b.imag > a.imag):
            raise ValueError("region corners must satisfy lower_left < upper_right")
        if not self.exclusion_radius > 0:
            raise ValueError("exclusion radius must be positive")

    @classmethod
    def square(cls, center, half_width, **kw) -> "SearchRegion":
        c = complex(center)
        h = half_width * (1 + 1j)
        return cls(c - h, c + h, **kw)

    @property
    def bounds(self):
        return (self.lower_left.real, self.upper_right.real,
                self.lower_left.imag, self.upper_right.imag)

    @property
    def centered(self) -> bool:
        return self.lower_left == -self.upper_right

    def contains(self, z) -> bool:
        x0, x1, y0, y1 = self.bounds
        return x0 <= z.real <= x1 and y0 <= z.imag <= y1


@dataclass
class ResonanceRecord:
    xi: complex
    sheet: str
    multiplicity: int
    residual: float
    classification: str = "unclassified"
    scale: float = 1.0
    sheets: tuple = ()

    @property
    def is_cluster(self) -> bool:
        return self.classification == "cluster"

    @property
    def relative_residual(self) -> float:
        return self.residual / self.scale if self.scale else float("inf")


@dataclass
class SearchResult:
    records: list
    total_winding: int
    evaluations: int
    region: SearchRegion
    cell_windings: list = field(default_factory=list)

    @property
    def multiplicity_total(self) -> int:
        return sum(r.multiplicity for r in self.records)

    @property
    def consistent(self) -> bool:
        return self.multiplicity_total == self.total_winding


# ---------------------------------------------------------------- contour engine

def _special_points(constants):
    if constants is None:
        return ()
    rp, rm = constants.r_plus, constants.r_minus
    return (0.0, rp, -rp, rm, -rm)


class _Evaluator:
    """Cached boundary sampling with exclusion discs around branch points and the origin."""

    def __init__(self, target, exclusion_radius, contour_tol=None):
        self.target = target
        self.rad = exclusion_radius
        self.tol = target.contour_tol if contour_tol is None else contour_tol
        self.special = _special_points(target.constants)
        self.cache = {}
        self.segments = {}

    @staticmethod
    def _side(xi, sides):
        hs, vs = sides
        if xi.imag == 0.0 and hs is not None:
            return hs
        if xi.real == 0.0 and vs is not None:
            return vs
        return "below"

    def _shift(self, xi, sides):
        hs, vs = sides
        for p in self.special:
            if abs(xi - p) < self.rad:
                if hs is not None:
                    return p + self.rad * (1j if hs == "above" else -1j)
                if vs is not None:
                    return p + self.rad * (1.0 if vs == "below" else -1.0)
                return p - 1j * self.rad
        return xi

    def value(self, xi, sides=(None, None)):
        xi = self._shift(complex(xi), sides)
        side = self._side(xi, sides)
        key = (xi, side)
        hit = self.cache.get(key)
        if hit is None:
            try:
                hit = self.target.contour(xi, side)
            except BranchPointError:
                hit = self.target.contour(xi + self.rad * (1j if side == "above" else -1j), side)
            hit = (complex(hit[0]), float(hit[1]))
            self.cache[key] = hit
        return hit

    def sample(self, xi, sides):
        v, s = self.value(xi, sides)
        if not cmath.isfinite(v) or abs(v) <= self.tol * s:
            raise _NearZero(complex(xi))
        return v

    def segment(self, a, b, center, max_step, min_nodes=8):
        """(net change of arg f, sum of z dlog f) along the segment a -> b.

        Points lying on a cut take the limit from the side of ``center``.
        """
        hs = vs = None
        if min(a.imag, b.imag) <= 0.0 <= max(a.imag, b.imag):
            hs = "above" if center.imag > 0 else "below"
        if min(a.real, b.real) <= 0.0 <= max(a.real, b.real):
            vs = "below" if center.real > 0 else "above"
        sides = (hs, vs)
        key = (a, b, sides, max_step, min_nodes)
        if key in self.segments:
            return self.segments[key]
        rkey = (b, a, sides, max_step, min_nodes)
        if rkey in self.segments:
            ph, mo = self.segments[rkey]
            return -ph, -mo
        n = max(min_nodes, int(math.ceil(abs(b - a) / max_step)))
        ts = [k / n for k in range(n + 1)]
        fs = [self.sample(a + (b - a) * t, sides) for t in ts]
        phase, moment = 0.0, 0j
        stack = [(ts[k], fs[k], ts[k + 1], fs[k + 1], 0) for k in range(n)][::-1]
        while stack:
            t0, f0, t1, f1, depth = stack.pop()
            dlog = cmath.log(f1 / f0)
            if abs(dlog.imag) < math.pi / 2:
                phase += dlog.imag
                moment += (a + (b - a) * 0.5 * (t0 + t1)) * dlog
                continue
            if depth >= 40:
                raise ContourError(f"phase not resolved near {a + (b - a) * t0}")
            tm = 0.5 * (t0 + t1)
            fm = self.sample(a + (b - a) * tm, sides)
            stack.append((tm, fm, t1, f1, depth + 1))
            stack.append((t0, f0, tm, fm, depth + 1))
        self.segments[key] = (phase, moment)
        return phase, moment

    def cell(self, x0, x1, y0, y1, max_step, min_nodes=8):
        c = complex(0.5 * (x0 + x1), 0.5 * (y0 + y1))
        corners = (complex(x0, y0), complex(x1, y0), complex(x1, y1), complex(x0, y1))
        phase, moment = 0.0, 0j
        for k in range(4):
            ph, mo = self.segment(corners[k], corners[(k + 1) % 4], c, max_step, min_nodes)
            phase += ph
            moment += mo
        return phase, moment


def _winding_from_phase(total):
    w = total / (2 * math.pi)
    n = int(round(w))
    if abs(w - n) > 0.25:
        raise ContourError(f"non-integer winding {w:.3f}")
    return n


def _nudged_winding(ev, rect, max_step, fixed=frozenset(), step=1e-3):
    """Winding of a rectangle, moving an edge when a zero sits on it.

    Free edges move outward; edges listed in ``fixed`` lie on a cut and move
    inward instead.  Returns the rectangle actually used.
    """
    x0, x1, y0, y1 = map(float, rect)
    size = max(x1 - x0, y1 - y0)
    for k in range(MAX_NUDGES + 1):
        try:
            ph, mo = ev.cell(x0, x1, y0, y1, max_step)
            return (x0, x1, y0, y1), _winding_from_phase(ph), mo
        except _NearZero as exc:
            p, d, tol = exc.xi, step * size * (k + 1), 1e-12 * size + 1e-300
            if abs(p.imag - y1) <= tol:
                y1 = y1 - d if "y1" in fixed else y1 + d
            elif abs(p.imag - y0) <= tol:
                y0 = y0 + d if "y0" in fixed else y0 - d
            elif abs(p.real - x1) <= tol:
                x1 = x1 - d if "x1" in fixed else x1 + d
            else:
                x0 = x0 + d if "x0" in fixed else x0 - d
    raise ContourError("could not separate a zero from the contour after 8 nudges")


def winding_number(target, rectangle, max_step=0.1, exclusion_radius=1e-9,
                   contour_tol=None) -> int:
    """Winding of ``target`` along the boundary of ``rectangle`` = (x0, x1, y0, y1).

    A zero found on the contour pushes the offending edge outward, at most
    eight times.
    """
    if isinstance(rectangle, SearchRegion):
        rectangle = rectangle.bounds
    ev = _Evaluator(as_target(target), exclusion_radius, contour_tol)
    return _nudged_winding(ev, rectangle, max_step)[1]


# ---------------------------------------------------------------- search

class _Search:
    def __init__(self, target, region: SearchRegion, max_step, min_cell, newton_tol,
                 residual_tol, contour_tol):
        self.target = target
        self.region = region
        self.ev = _Evaluator(target, region.exclusion_radius, contour_tol)
        self.max_step = max_step
        self.min_cell = min_cell
        self.newton_tol = newton_tol
        self.residual_tol = residual_tol
        self.records = []
        self.cells = []
        self.fine_evals = 0
        self.resampled = 0

    def f(self, z, side):
        self.fine_evals += 1
        return self.target(z, side)

    def initial_cells(self, bounds):
        x0, x1, y0, y1 = bounds
        if not self.target.has_cuts:
            return [(x0, x1, y0, y1, frozenset())]
        rm = self.target.constants.r_minus
        xs = sorted({x0, x1} | {x for x in (-rm, 0.0, rm) if x0 < x < x1})
        cells = []
        for a, b in zip(xs[:-1], xs[1:]):
            fixed = {"x0"} if a == 0.0 else set()
            if b == 0.0:
                fixed.add("x1")
            if abs(0.5 * (a + b)) < rm and y0 < 0.0 < y1:
                cells.append((a, b, y0, 0.0, frozenset(fixed | {"y1"})))
                cells.append((a, b, 0.0, y1, frozenset(fixed | {"y0"})))
            else:
                cells.append((a, b, y0, y1, frozenset(fixed)))
        return cells

    def split(self, cell, w):
        """Four children with their windings.

        If the children do not add up to the parent, the boundary sampling
        aliased around a zero lying close to it; the split is redone with
        finer sampling.
        """
        x0, x1, y0, y1 = cell
        for off in _SPLIT_OFFSETS:
            xm = x0 + (0.5 + off) * (x1 - x0)
            ym = y0 + (0.5 + off) * (y1 - y0)
            kids = [(x0, xm, y0, ym), (xm, x1, y0, ym), (xm, x1, ym, y1), (x0, xm, ym, y1)]
            try:
                for step, nodes in ((self.max_step, 8), (self.max_step / 8, 64),
                                    (self.max_step / 64, 512)):
                    out = []
                    for k in kids:
                        ph, mo = self.ev.cell(*k, step, nodes)
                        out.append((k, _winding_from_phase(ph), mo))
                    if sum(o[1] for o in out) == w:
                        return out
                    self.resampled += 1
                return out
            except _NearZero:
                continue
        raise ContourError("could not place a split line clear of zeros")

    @staticmethod
    def side_of(cell):
        return "above" if 0.5 * (cell[2] + cell[3]) > 0 else "below"

    @staticmethod
    def inside(z, cell, pad=0.0):
        x0, x1, y0, y1 = cell
        return x0 - pad <= z.real <= x1 + pad and y0 - pad <= z.imag <= y1 + pad

    def newton(self, z, cell, side, mult=1, max_iter=30):
        # the step is scaled by the multiplicity so multiple roots converge quadratically
        pad = 0.1 * max(cell[1] - cell[0], cell[3] - cell[2])
        best = None
        for _ in range(max_iter):
            f, s = self.f(z, side)
            if best is None or abs(f) / s < best[1] / best[2]:
                best = (z, abs(f), s)
            if abs(f) <= self.newton_tol * s:
                break
            h = 1e-7 * max(1.0, abs(z))
            df = (self.f(z + h, side)[0] - self.f(z - h, side)[0]) / (2 * h)
            if df == 0 or not cmath.isfinite(df):
                break
            step = -mult * f / df
            z = z + step
            if not self.inside(z, cell, pad):
                break
            if abs(step) <= 1e-15 * max(1.0, abs(z)):
                f, s = self.f(z, side)
                if abs(f) / s < best[1] / best[2]:
                    best = (z, abs(f), s)
                break
        return best

    def start_point(self, cell, w, moment):
        c = complex(0.5 * (cell[0] + cell[1]), 0.5 * (cell[2] + cell[3]))
        if w:
            z = moment / (2j * math.pi * w)
            if cmath.isfinite(z) and self.inside(z, cell):
                return z
        return c

    def record(self, z, w, r, s, kind="unclassified"):
        # two cells converging on the same point hold one numerically split multiple root
        z = complex(z)
        tol = DEDUPE * max(1.0, abs(z))
        for rec in self.records:
            if abs(rec.xi - z) <= tol:
                rec.multiplicity += w
                if r / s < rec.relative_residual:
                    rec.xi, rec.residual, rec.scale = z, float(r), float(s)
                return
        self.records.append(ResonanceRecord(z, self.target.label, w, float(r), kind, float(s)))

    def multiple_root(self, z0, cell, side, w):
        """One root of multiplicity w, confirmed by the winding of a small box."""
        z, r, s = self.newton(z0, cell, side, mult=w)
        if not self.inside(z, cell) or r > self.residual_tol * s:
            return False
        edge = min(z.real - cell[0], cell[1] - z.real, z.imag - cell[2], cell[3] - z.imag)
        rho = min(1e-3 * max(1.0, abs(z)), 0.5 * edge)
        if rho < 1e-7 * max(1.0, abs(z)):
            return False
        box = (z.real - rho, z.real + rho, z.imag - rho, z.imag + rho)
        try:
            ph, _ = self.ev.cell(*box, self.max_step)
            if _winding_from_phase(ph) != w:
                return False
        except (_NearZero, ContourError):
            return False
        self.record(z, w, r, s)
        return True

    def cluster(self, cell, w, moment):
        z = self.start_point(cell, w, moment)
        f, s = self.f(z, self.side_of(cell))
        self.record(z, w, abs(f), s, "cluster")

    def resolve(self, cell, w, moment):
        stack = [(cell, w, moment)]
        while stack:
            cell, w, moment = stack.pop()
            if w == 0:
                continue
            if w < 0:
                raise ContourError(f"negative winding {w} in cell {cell}")
            size = max(cell[1] - cell[0], cell[3] - cell[2])
            side = self.side_of(cell)
            z0 = self.start_point(cell, w, moment)
            if w == 1:
                z, r, s = self.newton(z0, cell, side)
                if self.inside(z, cell) and (r <= self.newton_tol * s
                                             or (r <= self.residual_tol * s and size <= 1e-4)):
                    self.record(z, 1, r, s)
                    continue
                if size <= self.min_cell:
                    self.record(z if self.inside(z, cell) else z0, 1, r, s)
                    continue
            else:
                if size <= 1e-2 * max(1.0, abs(z0)) and self.multiple_root(z0, cell, side, w):
                    continue
                if size <= self.min_cell:
                    self.cluster(cell, w, moment)
                    continue
            try:
                kids = self.split(cell, w)
            except ContourError:
                # every candidate split line passes too close to a zero
                if not (w > 1 and self.multiple_root(z0, cell, side, w)):
                    self.cluster(cell, w, moment)
                continue
            stack.extend(reversed(kids))

    def run(self, bounds):
        total = 0
        for x0, x1, y0, y1, fixed in self.initial_cells(bounds):
            cell, w, mo = _nudged_winding(self.ev, (x0, x1, y0, y1), self.max_step, fixed,
                                          step=1e-6 if fixed else 1e-3)
            self.cells.append((cell, w))
            total += w
            self.resolve(cell, w, mo)
        return total


def _dedupe(records, extra=()):
    """Drop repeats within the dedupe radius.

    Records in ``records`` come from disjoint cells and are all kept unless
    two coincide; ``extra`` holds mirror images, kept only when new.
    """
    out = []

    def near(r):
        tol = DEDUPE * max(1.0, abs(r.xi))
        return next((k for k, o in enumerate(out) if abs(o.xi - r.xi) <= tol), None)

    out.extend(records)
    for r in extra:
        if near(r) is None:
            out.append(r)
    return sorted(out, key=lambda r: (r.xi.real, r.xi.imag))


def _images(rec):
    z = rec.xi
    for img in (-z, z.conjugate(), -z.conjugate()):
        yield ResonanceRecord(img, rec.sheet, rec.multiplicity, rec.residual,
                              rec.classification, rec.scale, rec.sheets)


def search(target, region: SearchRegion, max_step=0.1, min_cell=MIN_CELL, newton_tol=NEWTON_TOL,
           residual_tol=RESIDUAL_TOL, contour_tol=None, use_symmetry=True) -> SearchResult:
    """Locate every zero of ``target`` in ``region``.

    For an even target that is real on the real axis, and a region centred at
    the origin, only the closed first quadrant (plus a thin margin) is searched
    and the zeros are mirrored; the total winding is still taken on the full
    boundary.
    """
    target = as_target(target)
    s = _Search(target, region, max_step, min_cell, newton_tol, residual_tol, contour_tol)
    if use_symmetry and target.symmetric and region.centered:
        x1, y1 = region.upper_right.real, region.upper_right.imag
        # zeros on the axes must sit well inside the searched quadrant
        margin = min(max(3.0 * max_step, 0.0137 * min(x1, y1)), 0.5 * min(x1, y1))
        s.run((-margin, x1, -margin, y1))
        found = [r for r in s.records if region.contains(r.xi)]
        images = [img for r in s.records for img in _images(r) if region.contains(img.xi)]
        _, total, _ = _nudged_winding(s.ev, region.bounds, max_step)
        out = _dedupe(found, images)
    else:
        total = s.run(region.bounds)
        out = _dedupe(s.records)
    if target.label not in ("all", "f"):
        for r in out:
            if not r.is_cluster:
                r.classification = "eigenvalue" if r.sheet == "++" else "resonance"
            r.sheets = (r.sheet,)
    out.sort(key=lambda r: (r.xi.real, r.xi.imag))
    return SearchResult(out, total, len(s.ev.cache) + s.fine_evals, region, s.cells)


def find_zeros(target, region: SearchRegion, **kw) -> list:
    """Zeros of ``target`` inside ``region``, sorted by (Re, Im)."""
    return search(target, region, **kw).records


# ---------------------------------------------------------------- classification

def _polish(model, sheet, xi, reach, steps=8):
    """Short Newton run on one sheet that never leaves the disc of radius ``reach``."""
    side = "above" if xi.imag > 0 else "below"
    best = None
    z = xi
    for _ in range(steps):
        v, sc = model.delta(z, sheet, side)
        if best is None or abs(v) / sc < best[1]:
            best = (z, abs(v) / sc)
        h = 1e-7 * max(1.0, abs(z))
        dv = (model.delta(z + h, sheet, side)[0] - model.delta(z - h, sheet, side)[0]) / (2 * h)
        if dv == 0 or not cmath.isfinite(dv):
            break
        z_new = z - v / dv
        if abs(z_new - xi) > reach:
            break
        z = z_new
    return best


def classify(record: ResonanceRecord, model, tol=CLASSIFY_TOL) -> ResonanceRecord:
    """Assign the sheets on which the determinant vanishes at a zero of F.

    Each sheet's determinant is polished by a few Newton steps confined to a
    small disc first: zeros of F shared by two sheets are double, so they are
    only located to about the square root of the working precision.
    """
    if record.is_cluster:
        return record
    xi = complex(record.xi)
    reach = 1e-5 * max(1.0, abs(xi))
    hits, seen = [], []
    for s in ALL_SHEETS:
        try:
            _, rel = _polish(model, s, xi, reach)
        except (BranchPointError, ValueError):
            continue
        seen.append((rel, str(s)))
        if rel <= tol:
            hits.append(str(s))
    if not hits:
        raise InconsistentZero(f"inconsistent zero at xi={xi}: best {min(seen)}")
    kind = "eigenvalue" if "++" in hits else "resonance"
    return ResonanceRecord(xi, "/".join(hits), record.multiplicity, record.residual, kind,
                           record.scale, tuple(hits))


# ---------------------------------------------------------------- output

CSV_COLUMNS = ("re_xi", "im_xi", "sheet", "multiplicity", "residual", "classification")


def write_records_csv(records, path, header_lines=()):
    with open(path, "w", newline="") as fh:
        for line in header_lines:
            fh.write(f"# {line}\n")
        w = csv.writer(fh)
        w.writerow(CSV_COLUMNS)
        for r in sorted(records, key=lambda r: (r.xi.real, r.xi.imag)):
            w.writerow([repr(float(r.xi.real)), repr(float(r.xi.imag)), r.sheet, r.multiplicity,
                        f"{r.residual:.6e}", r.classification])


def read_records_csv(path) -> list:
    with open(path) as fh:
        rows = csv.DictReader(line for line in fh if not line.startswith("#"))
        return [ResonanceRecord(complex(float(r["re_xi"]), float(r["im_xi"])), r["sheet"],
                                int(r["multiplicity"]), float(r["residual"]), r["classification"])
                for r in rows]
