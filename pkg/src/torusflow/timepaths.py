"""Time-grid representations of vector-field paths and their primitives.

A time-dependent field is a map t -> FourierMap on [0, 1], stored as a
rational breakpoint grid with one polynomial piece per interval: on
[t_j, t_{j+1}] the field is sum_d c_{j,d} tau^d with FourierMap-valued
coefficients and the local variable tau = (t - t_j) / (t_{j+1} - t_j),
degree <= 3.  Such step/polynomial representatives are dense in L^p and
make every time integral closed-form.

Absolutely continuous paths are primitives of such fields: snapshots at
the breakpoints plus the derivative field, with the integral identity
re-verifiable to rounding.
"""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction
from math import comb

import numpy as np

from .errors import DomainEscape, ScaleMismatch
from .fourier import FourierMap, imag_reach, jacobian, compose, strip_norms

#: relative tolerance for the ACPath self-verification (closed-form integrals)
TOL_INT = 1e-12
#: tolerance for re-verifying the integral identity after a chain-rule step
TOL_CHAIN = 1e-8
#: maximum degree of a field piece
MAX_DEGREE = 3

# 4-point Gauss-Legendre nodes/weights on [0, 1]: exact for degree <= 7
_GL4_X = 0.5 + 0.5 * np.array([-0.8611363115940526, -0.3399810435848563,
                               0.3399810435848563, 0.8611363115940526])
_GL4_W = 0.5 * np.array([0.34785484513745385, 0.6521451548625461,
                         0.6521451548625461, 0.34785484513745385])

# Chebyshev-like fitting nodes in (0,1); strictly interior so piecewise
# fields may be discontinuous at breakpoints
FIT_NODES = 0.5 - 0.5 * np.cos(np.pi * (2 * np.arange(1, 5) - 1) / 8)
_FIT_VANDER_INV = np.linalg.inv(np.vander(FIT_NODES, 4, increasing=True))


@dataclass(frozen=True)
class TimeGrid:
    """Strictly increasing rational breakpoints 0 = t_0 < ... < t_M = 1."""

    breakpoints: tuple

    def __post_init__(self):
        bp = tuple(Fraction(b) for b in self.breakpoints)
        object.__setattr__(self, "breakpoints", bp)
        if bp[0] != 0 or bp[-1] != 1:
            raise ValueError("grid must run from 0 to 1")
        if any(a >= b for a, b in zip(bp, bp[1:])):
            raise ValueError("breakpoints must be strictly increasing")

    @classmethod
    def uniform(cls, n: int) -> "TimeGrid":
        return cls(tuple(Fraction(j, n) for j in range(n + 1)))

    @property
    def floats(self) -> np.ndarray:
        return np.array([float(b) for b in self.breakpoints])

    @property
    def steps(self):
        return tuple(b - a for a, b in zip(self.breakpoints, self.breakpoints[1:]))

    def __len__(self):
        return len(self.breakpoints)

    def interval_of(self, t: float) -> int:
        """Index j with t in [t_j, t_{j+1}); the last interval is closed."""
        ts = self.floats
        j = int(np.searchsorted(ts, t, side="right") - 1)
        return min(max(j, 0), len(ts) - 2)

    def merged(self, other: "TimeGrid") -> "TimeGrid":
        pts = sorted(set(self.breakpoints) | set(other.breakpoints))
        return TimeGrid(tuple(pts))

    def refined(self, max_step) -> "TimeGrid":
        max_step = Fraction(max_step)
        pts = []
        for a, b in zip(self.breakpoints, self.breakpoints[1:]):
            n = int(-(-(b - a) // max_step))  # ceil division
            pts.extend(a + (b - a) * Fraction(i, n) for i in range(n))
        pts.append(Fraction(1))
        return TimeGrid(tuple(pts))


def _poly_eval(poly: np.ndarray, tau) -> np.ndarray:
    """Evaluate sum_d poly[d] tau^d; poly has the degree axis first."""
    out = np.zeros(np.shape(tau) + poly.shape[1:], dtype=complex)
    for d in range(poly.shape[0] - 1, -1, -1):
        out = out * np.reshape(tau, np.shape(tau) + (1,) * (poly.ndim - 1)) + poly[d]
    return out


def _poly_reparam(poly: np.ndarray, a: float, b: float) -> np.ndarray:
    """Coefficients of p(a + b*tau) from those of p(tau)."""
    deg = poly.shape[0] - 1
    out = np.zeros_like(poly)
    for d in range(deg + 1):
        for e in range(d + 1):
            out[e] += poly[d] * comb(d, e) * (a ** (d - e)) * (b ** e)
    return out


def _poly_antiderivative(poly: np.ndarray, h: float) -> np.ndarray:
    """tau -> h * int_0^tau p; one degree higher, zero constant term."""
    out = np.zeros((poly.shape[0] + 1,) + poly.shape[1:], dtype=complex)
    for d in range(poly.shape[0]):
        out[d + 1] = poly[d] * (h / (d + 1))
    return out


def fit_poly3(samples: np.ndarray) -> np.ndarray:
    """Cubic coefficients (in tau on [0,1]) through values at FIT_NODES."""
    flat = samples.reshape(4, -1)
    coeffs = _FIT_VANDER_INV @ flat
    return coeffs.reshape((4,) + samples.shape[1:])


class TimeDependentField:
    """Piecewise-polynomial path of FourierMaps on [0, 1].

    ``scale`` records the strip half-width up to which norms of this field
    may be quoted; requesting a wider strip raises ScaleMismatch.
    """

    def __init__(self, grid: TimeGrid, pieces, scale: float):
        if len(pieces) != len(grid) - 1:
            raise ValueError("need one piece per interval")
        self.grid = grid
        self.pieces = [np.asarray(p, dtype=complex) for p in pieces]
        degs = {p.shape[0] - 1 for p in self.pieces}
        if max(degs) > MAX_DEGREE:
            raise ValueError(f"piece degree exceeds {MAX_DEGREE}")
        shapes = {p.shape[1:] for p in self.pieces}
        if len(shapes) != 1:
            raise ValueError("pieces must share one truncation order")
        shape = shapes.pop()
        self.m = len(shape) - 1
        self.order = shape[0] // 2
        self.ncomp = shape[-1]
        self.scale = float(scale)
        for p in self.pieces:
            FourierMap(p.sum(axis=0))  # reality check of each piece

    # -- constructors -----------------------------------------------------

    @classmethod
    def constant(cls, f: FourierMap, scale: float,
                 grid: TimeGrid | None = None) -> "TimeDependentField":
        grid = grid or TimeGrid.uniform(1)
        return cls(grid, [f.coeffs[None, ...]] * (len(grid) - 1), scale)

    @classmethod
    def step(cls, grid: TimeGrid, values, scale: float) -> "TimeDependentField":
        return cls(grid, [v.coeffs[None, ...] for v in values], scale)

    @classmethod
    def from_profile(cls, f: FourierMap, profile, scale: float,
                     n_pieces: int = 64) -> "TimeDependentField":
        """Field t -> profile(t) * f with a cubic fit of the scalar profile."""
        grid = TimeGrid.uniform(n_pieces)
        ts = grid.floats
        pieces = []
        for j in range(n_pieces):
            tt = ts[j] + (ts[j + 1] - ts[j]) * FIT_NODES
            vals = np.array([profile(t) for t in tt], dtype=float)
            poly = fit_poly3(vals[:, None])[:, 0]       # scalar cubic
            pieces.append(poly.reshape((4,) + (1,) * (f.m + 1)) * f.coeffs[None, ...])
        return cls(grid, pieces, scale)

    # -- evaluation -------------------------------------------------------

    def _local(self, t: float):
        j = self.grid.interval_of(t)
        ts = self.grid.floats
        h = ts[j + 1] - ts[j]
        return j, (t - ts[j]) / h, h

    def value_at(self, t: float) -> FourierMap:
        j, tau, _ = self._local(t)
        return FourierMap(_poly_eval(self.pieces[j], tau), check=False)

    def piece_values(self, j: int, taus: np.ndarray) -> np.ndarray:
        return _poly_eval(self.pieces[j], taus)

    # -- algebra ------------------------------------------------------------

    def on_grid(self, grid: TimeGrid) -> "TimeDependentField":
        """Re-express on a refinement of (or merge with) the own grid."""
        grid = self.grid.merged(grid)
        own = self.grid.floats
        pieces = []
        for a, b in zip(grid.breakpoints, grid.breakpoints[1:]):
            j = self.grid.interval_of(float(a))
            h = own[j + 1] - own[j]
            aa = (float(a) - own[j]) / h
            bb = float(b - a) / h
            pieces.append(_poly_reparam(self.pieces[j], aa, bb))
        return TimeDependentField(grid, pieces, self.scale)

    def _binary(self, other: "TimeDependentField", sign: float) -> "TimeDependentField":
        if (self.m, self.ncomp) != (other.m, other.ncomp):
            raise ValueError("incompatible fields")
        grid = self.grid.merged(other.grid)
        a, b = self.on_grid(grid), other.on_grid(grid)
        pieces = []
        for pa, pb in zip(a.pieces, b.pieces):
            deg = max(pa.shape[0], pb.shape[0])
            order = max(self.order, other.order)
            shape = (deg,) + (2 * order + 1,) * self.m + (self.ncomp,)
            out = np.zeros(shape, dtype=complex)
            out[: pa.shape[0]] += _embed(pa, order, self.m)
            out[: pb.shape[0]] += sign * _embed(pb, order, self.m)
            pieces.append(out)
        return TimeDependentField(grid, pieces, min(self.scale, other.scale))

    def __add__(self, other):
        return self._binary(other, +1.0)

    def __sub__(self, other):
        return self._binary(other, -1.0)

    def __neg__(self):
        return TimeDependentField(self.grid, [-p for p in self.pieces], self.scale)

    def __mul__(self, scalar):
        s = float(scalar)
        return TimeDependentField(self.grid, [s * p for p in self.pieces], self.scale)

    __rmul__ = __mul__

    def time_reversed(self) -> "TimeDependentField":
        """The field t -> value(1 - t), pieces reparametrized exactly."""
        bp = tuple(1 - b for b in reversed(self.grid.breakpoints))
        pieces = [_poly_reparam(p, 1.0, -1.0) for p in reversed(self.pieces)]
        return TimeDependentField(TimeGrid(bp), pieces, self.scale)

    def restricted_rescaled(self, t_end: Fraction) -> "TimeDependentField":
        """The field s -> t_end * value(t_end * s) on [0, 1].

        The right evolution of the result at s = 1 equals the right
        evolution of the original field at t = t_end.
        """
        t_end = Fraction(t_end)
        if not 0 < t_end <= 1:
            raise ValueError("t_end must lie in (0, 1]")
        keep = [b for b in self.grid.breakpoints if b < t_end]
        bp = tuple(b / t_end for b in keep) + (Fraction(1),)
        pieces = []
        own = self.grid.floats
        for a, b in zip(keep, list(keep[1:]) + [t_end]):
            j = self.grid.interval_of(float(a))
            h = own[j + 1] - own[j]
            aa = (float(a) - own[j]) / h
            bb = float(b - a) / h
            pieces.append(float(t_end) * _poly_reparam(self.pieces[j], aa, bb))
        return TimeDependentField(TimeGrid(bp), pieces, self.scale)

    # -- norms --------------------------------------------------------------

    def _seminorm_at(self, j: int, tau: float, kind: str, eps: float) -> float:
        f = FourierMap(_poly_eval(self.pieces[j], tau), check=False)
        rep = strip_norms(f, eps)
        return rep.nu if kind == "nu" else rep.beta

    def lp_norm(self, p, kind: str, eps: float) -> float:
        """Exact L^p norm of t -> seminorm(field(t)) for p in {1, 2, inf}.

        Piecewise-constant pieces contribute closed-form terms; polynomial
        pieces are integrated by Gauss quadrature exact to their degree
        (p = inf uses dense sampling including the endpoints).
        """
        if kind not in ("nu", "beta"):
            raise ValueError("seminorm selector must be 'nu' or 'beta'")
        if eps > self.scale + 1e-15:
            raise ScaleMismatch(
                f"requested eps {eps} exceeds field scale {self.scale}")
        if p not in (1, 2, np.inf, "inf"):
            raise ValueError("p must be 1, 2 or inf")
        steps = [float(s) for s in self.grid.steps]
        if p in (np.inf, "inf"):
            worst = 0.0
            for j, piece in enumerate(self.pieces):
                if piece.shape[0] == 1:
                    worst = max(worst, self._seminorm_at(j, 0.0, kind, eps))
                else:
                    taus = np.concatenate(
                        [[0.0, 1.0], 0.5 - 0.5 * np.cos(np.pi * np.arange(1, 64) / 64)])
                    worst = max(worst, max(self._seminorm_at(j, t, kind, eps)
                                           for t in taus))
            return worst
        total = 0.0
        for j, piece in enumerate(self.pieces):
            if piece.shape[0] == 1:
                s = self._seminorm_at(j, 0.0, kind, eps)
                total += steps[j] * (s if p == 1 else s * s)
            else:
                vals = np.array([self._seminorm_at(j, t, kind, eps)
                                 for t in _GL4_X])
                integrand = vals if p == 1 else vals**2
                total += steps[j] * float(_GL4_W @ integrand)
        return total if p == 1 else float(np.sqrt(total))

    # -- serialization --------------------------------------------------------

    def to_json(self) -> dict:
        return {
            "grid": [str(b) for b in self.grid.breakpoints],
            "m": self.m,
            "order": self.order,
            "ncomp": self.ncomp,
            "scale": self.scale,
            "pieces": [_piece_to_json(p, self.m, self.order) for p in self.pieces],
        }

    @classmethod
    def from_json(cls, data: dict) -> "TimeDependentField":
        grid = TimeGrid(tuple(Fraction(b) for b in data["grid"]))
        m, order, ncomp = data["m"], data["order"], data["ncomp"]
        pieces = [_piece_from_json(p, m, order, ncomp) for p in data["pieces"]]
        return cls(grid, pieces, data["scale"])


def _embed(piece: np.ndarray, order: int, m: int) -> np.ndarray:
    own = piece.shape[1] // 2
    if own == order:
        return piece
    off = order - own
    shape = (piece.shape[0],) + (2 * order + 1,) * m + piece.shape[-1:]
    out = np.zeros(shape, dtype=complex)
    sl = (slice(None),) + tuple(slice(off, off + 2 * own + 1) for _ in range(m))
    out[sl + (slice(None),)] = piece
    return out


def _modes_to_json(coeffs: np.ndarray, m: int, order: int) -> list:
    entries = []
    it = np.ndindex(*coeffs.shape[:-1])
    for idx in it:
        row = coeffs[idx]
        if not np.any(row):
            continue
        k = [int(i - order) for i in idx]
        key = k[0] if m == 1 else k
        if coeffs.shape[-1] == 1:
            entries.append([key, float(row[0].real), float(row[0].imag)])
        else:
            entries.append([key, [[float(v.real), float(v.imag)] for v in row]])
    return entries


def _modes_from_json(entries: list, m: int, order: int, ncomp: int) -> np.ndarray:
    out = np.zeros((2 * order + 1,) * m + (ncomp,), dtype=complex)
    for entry in entries:
        key = entry[0]
        k = (key,) if m == 1 else tuple(key)
        idx = tuple(ki + order for ki in k)
        if ncomp == 1:
            out[idx + (0,)] = entry[1] + 1j * entry[2]
        else:
            out[idx] = [re + 1j * im for re, im in entry[1]]
    return out


def _piece_to_json(piece: np.ndarray, m: int, order: int) -> dict:
    if piece.shape[0] == 1:
        return {"kind": "constant", "coeffs": _modes_to_json(piece[0], m, order)}
    return {"kind": "poly",
            "coeffs": [_modes_to_json(c, m, order) for c in piece]}


def _piece_from_json(data: dict, m: int, order: int, ncomp: int) -> np.ndarray:
    if data["kind"] == "constant":
        return _modes_from_json(data["coeffs"], m, order, ncomp)[None, ...]
    return np.stack([_modes_from_json(c, m, order, ncomp) for c in data["coeffs"]])


# ---------------------------------------------------------------------------
# absolutely continuous paths
# ---------------------------------------------------------------------------

class ACPath:
    """Primitive of a TimeDependentField: snapshots plus the derivative class."""

    def __init__(self, grid: TimeGrid, values, derivative: TimeDependentField,
                 tol: float = TOL_INT, check: bool = True):
        self.grid = grid
        self.values = list(values)
        self.derivative = derivative
        if len(self.values) != len(grid):
            raise ValueError("need one snapshot per breakpoint")
        if check:
            defect = self.integral_defect()
            scale = max(1.0, max(float(np.abs(v.coeffs).max()) for v in self.values))
            if defect > tol * scale:
                raise ValueError(f"integral identity violated (defect {defect:.3e})")

    def integral_defect(self) -> float:
        """Max coefficient defect of values[j+1] = values[j] + int over the piece."""
        worst = 0.0
        steps = [float(s) for s in self.grid.steps]
        der = self.derivative.on_grid(self.grid)
        for j in range(len(self.grid) - 1):
            inc = _poly_eval(_poly_antiderivative(der.pieces[j], steps[j]), 1.0)
            lhs = self.values[j + 1].coeffs
            rhs = self.values[j].with_order(self.values[j + 1].order).coeffs + \
                _embed(inc[None], self.values[j + 1].order, der.m)[0]
            worst = max(worst, float(np.abs(lhs - rhs).max()))
        return worst

    def value_at(self, t: float) -> FourierMap:
        der = self.derivative
        j = self.grid.interval_of(t)
        ts = self.grid.floats
        h = ts[j + 1] - ts[j]
        tau = (t - ts[j]) / h
        dg = der.on_grid(self.grid) if der.grid.breakpoints != self.grid.breakpoints else der
        inc = _poly_eval(_poly_antiderivative(dg.pieces[j], h), tau)
        return self.values[j] + FourierMap(inc, check=False)

    def to_json(self) -> dict:
        return {
            "grid": [str(b) for b in self.grid.breakpoints],
            "values": [_modes_to_json(v.coeffs, self.derivative.m, v.order)
                       for v in self.values],
            "derivative": self.derivative.to_json(),
        }

    @classmethod
    def from_json(cls, data: dict) -> "ACPath":
        der = TimeDependentField.from_json(data["derivative"])
        grid = TimeGrid(tuple(Fraction(b) for b in data["grid"]))
        values = [FourierMap(_modes_from_json(v, der.m, der.order, der.ncomp))
                  for v in data["values"]]
        return cls(grid, values, der)


def integrate_primitive(gamma: TimeDependentField) -> ACPath:
    """Coefficient-wise primitive with value 0 at t = 0 (closed form)."""
    steps = [float(s) for s in gamma.grid.steps]
    acc = FourierMap.zero(gamma.order, gamma.m, gamma.ncomp)
    values = [acc]
    for j, piece in enumerate(gamma.pieces):
        inc = _poly_eval(_poly_antiderivative(piece, steps[j]), 1.0)
        acc = acc + FourierMap(inc, check=False)
        values.append(acc)
    return ACPath(gamma.grid, values, gamma, tol=TOL_INT)


# ---------------------------------------------------------------------------
# postcomposition with analytic superposition rules
# ---------------------------------------------------------------------------

class SuperpositionRule:
    """An analytic map on perturbations, with its directional derivative."""

    is_affine = False

    def value(self, u: FourierMap) -> FourierMap:
        raise NotImplementedError

    def differential(self, u: FourierMap, v: FourierMap) -> FourierMap:
        raise NotImplementedError

    def domain_ok(self, u: FourierMap) -> bool:
        return True


class IdentityRule(SuperpositionRule):
    is_affine = True

    def value(self, u):
        return u

    def differential(self, u, v):
        return v


class AffineRule(SuperpositionRule):
    """u -> a*u + b for a scalar a and a fixed FourierMap b (b may be None)."""

    is_affine = True

    def __init__(self, a: float, b: FourierMap | None = None):
        self.a = float(a)
        self.b = b

    def value(self, u):
        out = self.a * u
        return out if self.b is None else out + self.b

    def differential(self, u, v):
        return self.a * v


class SelfCompositionRule(SuperpositionRule):
    """u -> perturbation of (id+u) o (id+u), i.e. u + u o (id+u).

    The derivative in direction v is v + v o (id+u) + (Du o (id+u)) . v.
    The domain is the set of perturbations whose certified imaginary reach
    from the inner strip stays inside the outer strip.
    """

    def __init__(self, inner_scale: float, outer_scale: float):
        self.inner_scale = float(inner_scale)
        self.outer_scale = float(outer_scale)

    def domain_ok(self, u):
        return imag_reach(u, self.inner_scale) <= self.outer_scale

    def value(self, u):
        return u + compose(u, u, outer_scale=self.outer_scale,
                           inner_scale=self.inner_scale)

    def differential(self, u, v):
        term1 = v + compose(v, u)
        J = jacobian(u)
        shifted = _jacobian_compose_apply(J, u, v)
        return term1 + shifted


def _jacobian_compose_apply(J, u: FourierMap, v: FourierMap) -> FourierMap:
    """(J o (id+u)) . v re-expanded as a FourierMap (sampled product)."""
    from .fourier import _grid_points, fit_grid
    n = u.order
    M = 4 * (2 * n + 1)
    pts = _grid_points(M, u.m)
    uv = u.sample_grid(M).reshape(pts.shape[0], u.m)
    args = (pts + uv.real).astype(complex)
    Jv = J.eval(args)
    vv = v.sample_grid(M).reshape(pts.shape[0], v.ncomp)
    out = np.einsum("pij,pj->pi", Jv, vv)
    return fit_grid(out.reshape((M,) * u.m + (u.m,)), n, u.m,
                    tol_trunc=1e-7, context="jacobian product")


def ac_postcompose(path: ACPath, rule: SuperpositionRule,
                   tol_chain: float = TOL_CHAIN,
                   max_step=Fraction(1, 64)) -> ACPath:
    """Compose an AC path with an analytic rule; derivative by the chain rule.

    For affine rules the result is exact in coefficient arithmetic.  For
    nonlinear rules the derivative t -> df(path(t), path'(t)) is re-fitted
    as a cubic on a refined grid and the integral identity is re-verified
    within ``tol_chain``.
    """
    grid = path.grid.refined(max_step) if not rule.is_affine else path.grid
    der = path.derivative.on_grid(grid)
    values = [path.value_at(float(t)) if t not in path.grid.breakpoints
              else path.values[path.grid.breakpoints.index(t)]
              for t in grid.breakpoints]
    for v in values:
        if not rule.domain_ok(v):
            raise DomainEscape("path leaves the domain of the postcomposition rule")
    new_values = [rule.value(v) for v in values]
    if rule.is_affine:
        new_pieces = [np.stack([rule.differential(None, FourierMap(c, check=False)).coeffs
                                for c in piece]) for piece in der.pieces]
        new_der = TimeDependentField(grid, new_pieces, path.derivative.scale)
        return ACPath(grid, new_values, new_der, tol=TOL_INT)
    ts = grid.floats
    new_pieces = []
    for j in range(len(grid) - 1):
        h = ts[j + 1] - ts[j]
        samples = []
        for tau in FIT_NODES:
            t = ts[j] + h * tau
            ut = path.value_at(t)
            gt = der.value_at(t)
            samples.append(rule.differential(ut, gt).coeffs)
        new_pieces.append(fit_poly3(np.stack(samples)))
    new_der = TimeDependentField(grid, new_pieces, path.derivative.scale)
    return ACPath(grid, new_values, new_der, tol=tol_chain)
