"""Quantitative inversion of a local addition and chart transport of flows.

A local addition is an analytic rule alpha(z, w) = z + w + higher order
terms in w, with alpha(z, 0) = z and unit w-derivative at w = 0.  On a
strip in z and a ball ||w|| <= delta0 where the defect

    h(z, w) = || d_w alpha(z, w) - id ||_op

is certified <= 1/2, the map w -> alpha(z, w) covers the ball of radius
delta/2 around z for every delta <= delta0, and its inverse is Lipschitz
with constant 2.  The inverse is computed by the displacement iteration

    w  <-  w + (target - alpha(z, w)),

which the 1/2-Lipschitz certificate makes a contraction with per-step
factor <= 1/2; the observed convergence rate is itself a checked invariant.

``flow_to_chart`` moves a solved flow into chart coordinates: w(t) with
alpha(x, w(t)(x)) = zeta(t)(x) pointwise, re-expanded as Fourier snapshots.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import (AdmissibilityViolation, ContractionStall,
                     NoPositiveRadius, OutOfRange)
from .fourier import FourierMap, fit_grid, nu_per_component, _grid_points
from .timepaths import (ACPath, FIT_NODES, TimeDependentField, fit_poly3)

#: residual target for the displacement inversion
TOL_INVERT = 1e-12
#: geometric search lattice for the certified radius: ratio 2^(1/64)
GRID_RATIO_LOG2 = 1.0 / 64.0
GRID_LOG2_MIN = -40.0
GRID_LOG2_MAX = 12.0


class LocalAddition:
    """alpha(z, w) = z + w + sum_p C_p(z) w^p with periodic coefficients.

    ``terms`` is a list of (power, coefficient) pairs; the power is a
    multi-index (int for m = 1) of total degree >= 2 and the coefficient a
    FourierMap with m components.  The constructor rejects terms of total
    degree <= 1: they would break alpha(z, 0) = z or the unit fiber
    derivative, which hold identically for this expression form.
    """

    def __init__(self, terms=(), m: int = 1, order: int = 8):
        self.m = m
        self.order = order
        norm_terms = []
        for power, coeff in terms:
            p = (int(power),) if np.isscalar(power) else tuple(int(q) for q in power)
            if len(p) != m or any(q < 0 for q in p):
                raise ValueError(f"bad power multi-index {p}")
            if not isinstance(coeff, FourierMap) or coeff.m != m or coeff.ncomp != m:
                raise ValueError("coefficients must be m-component FourierMaps")
            if not np.any(coeff.coeffs):
                continue
            if sum(p) == 0:
                raise ValueError("a w-free term would violate alpha(z, 0) = z")
            if sum(p) == 1:
                raise ValueError(
                    "a linear term would violate the unit fiber derivative")
            norm_terms.append((p, coeff))
        self.terms = norm_terms

    @property
    def flat(self) -> bool:
        return not self.terms

    def __call__(self, z: np.ndarray, w: np.ndarray) -> np.ndarray:
        z = np.asarray(z, dtype=complex)
        w = np.asarray(w, dtype=complex)
        out = z + w
        for p, coeff in self.terms:
            mono = np.ones(w.shape[:-1], dtype=complex)
            for axis, q in enumerate(p):
                if q:
                    mono = mono * w[..., axis] ** q
            out = out + coeff.eval(z) * mono[..., None]
        return out

    def higher_terms(self, z_vals_list, w: np.ndarray) -> np.ndarray:
        """sum_p C_p(z) w^p from pre-evaluated coefficient values."""
        out = np.zeros_like(w)
        for (p, _), cv in zip(self.terms, z_vals_list):
            mono = np.ones(w.shape[:-1], dtype=complex)
            for axis, q in enumerate(p):
                if q:
                    mono = mono * w[..., axis] ** q
            out = out + cv * mono[..., None]
        return out

    def fiber_jacobian_defect(self, z: np.ndarray, w: np.ndarray) -> np.ndarray:
        """h(z, w) = ||d_w alpha - id||_op at each point (max-norm rows)."""
        z = np.asarray(z, dtype=complex)
        w = np.asarray(w, dtype=complex)
        rows = np.zeros(w.shape[:-1] + (self.m, self.m), dtype=complex)
        for p, coeff in self.terms:
            cv = coeff.eval(z)
            for j, q in enumerate(p):
                if not q:
                    continue
                mono = np.ones(w.shape[:-1], dtype=complex) * q
                for axis, r in enumerate(p):
                    e = r - 1 if axis == j else r
                    if e:
                        mono = mono * w[..., axis] ** e
                rows[..., :, j] += cv * mono[..., None]
        return np.abs(rows).sum(axis=-1).max(axis=-1)

    def defect_majorant(self, eps: float, delta: float) -> float:
        """Analytic bound on h over ||Im z|| <= eps, ||w|| <= delta."""
        bound = 0.0
        per_row = np.zeros(self.m)
        for p, coeff in self.terms:
            nu_i = nu_per_component(coeff, eps)
            per_row = per_row + nu_i * sum(p) * delta ** (sum(p) - 1)
        bound = float(per_row.max()) if self.terms else 0.0
        return bound

    def to_json(self) -> dict:
        from .timepaths import _modes_to_json
        return {
            "m": self.m,
            "order": self.order,
            "terms": [{"wPower": list(p),
                       "coeffMap": _modes_to_json(c.coeffs, self.m, c.order)}
                      for p, c in self.terms],
        }

    @classmethod
    def from_json(cls, data: dict) -> "LocalAddition":
        from .timepaths import _modes_from_json
        m, order = data["m"], data["order"]
        terms = []
        for t in data["terms"]:
            coeffs = _modes_from_json(t["coeffMap"], m, order, m)
            terms.append((tuple(t["wPower"]), FourierMap(coeffs)))
        return cls(terms, m=m, order=order)


@dataclass(frozen=True)
class InverseChartCert:
    """Certified radius for the displacement inversion of a local addition."""

    delta0: float
    eps: float
    defect_bound: float
    flat: bool
    grid_exponent: float

    def __post_init__(self):
        if self.delta0 <= 0:
            raise ValueError("certified radius must be positive")


def find_delta0(alpha: LocalAddition, eps: float) -> InverseChartCert:
    """Largest radius on the geometric lattice 2^(j/64) with defect <= 1/2.

    The flat addition has no defect at all; its certificate carries the
    sentinel radius 1.  NoPositiveRadius is raised when even the smallest
    lattice radius fails.
    """
    if alpha.flat:
        return InverseChartCert(delta0=1.0, eps=eps, defect_bound=0.0,
                                flat=True, grid_exponent=0.0)
    lo, hi = GRID_LOG2_MIN, GRID_LOG2_MAX
    if alpha.defect_majorant(eps, 2.0**lo) > 0.5:
        raise NoPositiveRadius(
            f"defect bound exceeds 1/2 even at radius 2^{lo}")
    # largest lattice exponent whose majorant is certified
    n_lo = int(np.floor(lo / GRID_RATIO_LOG2))
    n_hi = int(np.ceil(hi / GRID_RATIO_LOG2))
    while n_hi - n_lo > 1:
        mid = (n_hi + n_lo) // 2
        if alpha.defect_majorant(eps, 2.0 ** (mid * GRID_RATIO_LOG2)) <= 0.5:
            n_lo = mid
        else:
            n_hi = mid
    expo = n_lo * GRID_RATIO_LOG2
    delta0 = 2.0**expo
    return InverseChartCert(delta0=delta0, eps=eps,
                            defect_bound=alpha.defect_majorant(eps, delta0),
                            flat=False, grid_exponent=expo)


@dataclass
class InversionResult:
    w: np.ndarray
    residuals: list
    steps: int

    @property
    def step_factors(self) -> np.ndarray:
        r = np.asarray(self.residuals)
        good = r[:-1] > 0
        return r[1:][good] / r[:-1][good]


def invert_local(alpha: LocalAddition, cert: InverseChartCert,
                 z, target, delta: float | None = None,
                 tol: float = TOL_INVERT, max_iter: int = 200,
                 full: bool = False):
    """Solve alpha(z, w) = target by the displacement contraction.

    Requires ||target - z|| < delta/2 with delta <= delta0; the result
    satisfies ||w|| < delta and the residual is driven below ``tol``.
    Vectorized over leading axes of ``z`` and ``target``.
    """
    delta = cert.delta0 if delta is None else delta
    if delta > cert.delta0 * (1 + 1e-12):
        raise OutOfRange(f"delta {delta} exceeds certified radius {cert.delta0}")
    z = np.asarray(z, dtype=complex)
    target = np.asarray(target, dtype=complex)
    dist = np.abs(target - z).max(axis=-1)
    if np.any(dist >= delta / 2):
        raise OutOfRange(
            f"target distance {float(dist.max()):.6g} is not below delta/2 = "
            f"{delta / 2:.6g}")
    if alpha.flat:
        w = target - z
        return InversionResult(w, [0.0], 0) if full else w
    z_vals = [coeff.eval(z) for _, coeff in alpha.terms]
    w = np.zeros_like(target)
    residuals = []
    r_prev = None
    for step in range(max_iter):
        res_vec = target - z - w - alpha.higher_terms(z_vals, w)
        r = float(np.abs(res_vec).max())
        residuals.append(r)
        if r <= tol:
            return InversionResult(w, residuals, step) if full else w
        if r_prev is not None and r > 0.95 * r_prev and r > 1e3 * tol:
            raise ContractionStall(
                f"residual stalled at {r:.3e} (factor {r / r_prev:.3f})")
        w = w + res_vec
        r_prev = r
    raise ContractionStall(f"no convergence in {max_iter} displacement steps")


# ---------------------------------------------------------------------------
# chart transport of flows
# ---------------------------------------------------------------------------

def flow_to_chart(flow, alpha: LocalAddition, cert: InverseChartCert,
                  tol_chain: float = 1e-8) -> ACPath:
    """Chart vectors w(t) with alpha(x, w(t)(x)) = zeta(t)(x) pointwise.

    The flow displacement must stay below delta0/2, which the chart
    admissibility certificate (L^1 nu norm < delta0/4 and the solver's
    parameter-Lipschitz constant 2) guarantees.  Snapshots are re-expanded
    on the sampling grid; the derivative is a cubic re-fit per interval and
    the path invariant is re-verified within ``tol_chain``.
    """
    gamma = flow.source
    if gamma is not None and 2 * gamma.l1_nu >= cert.delta0 / 2:
        raise AdmissibilityViolation(
            f"flow displacement bound {2 * gamma.l1_nu:.6g} reaches "
            f"delta0/2 = {cert.delta0 / 2:.6g}")
    m, order = flow.m, flow.order
    M = 4 * (2 * order + 1)
    pts = _grid_points(M, m).astype(complex)
    z_vals = [coeff.eval(pts) for _, coeff in alpha.terms]

    def chart_vector_values(t: float) -> np.ndarray:
        u_vals = flow.u_at(t).eval(pts)
        if alpha.flat:
            return u_vals
        w = u_vals.copy()
        for _ in range(200):
            res = u_vals - w - alpha.higher_terms(z_vals, w)
            w = w + res
            if np.abs(res).max() <= TOL_INVERT:
                return w
        raise ContractionStall("pointwise chart inversion did not converge")

    def to_map(vals: np.ndarray) -> FourierMap:
        shaped = vals.reshape((M,) * m + (m,))
        return fit_grid(shaped, order, m, tol_trunc=1e-8,
                        context="chart re-expansion")

    ts = flow.grid.floats
    values = [to_map(chart_vector_values(t)) for t in ts]
    pieces = []
    for j in range(len(ts) - 1):
        h = ts[j + 1] - ts[j]
        samples = np.stack([to_map(chart_vector_values(ts[j] + h * tau)).coeffs
                            for tau in FIT_NODES])
        val_poly = fit_poly3(samples)
        der_poly = np.stack([(d + 1) * val_poly[d + 1] / h for d in range(3)])
        pieces.append(der_poly)
    scale = gamma.field.scale if gamma is not None else cert.eps
    derivative = TimeDependentField(flow.grid, pieces, scale)
    return ACPath(flow.grid, values, derivative, tol=tol_chain)


def chart_roundtrip_defect(flow, alpha: LocalAddition, path: ACPath,
                           n_probe: int = 64) -> float:
    """sup over probe points and grid times of |alpha(x, w(t)(x)) - zeta(t)(x)|."""
    m = flow.m
    if m == 1:
        pts = (np.arange(n_probe) / n_probe)[:, None].astype(complex)
    else:
        g = np.arange(int(np.sqrt(n_probe))) / int(np.sqrt(n_probe))
        pts = np.stack(np.meshgrid(g, g, indexing="ij"), axis=-1).reshape(-1, 2)
        pts = pts.astype(complex)
    worst = 0.0
    for t, w_map in zip(flow.grid.floats, path.values):
        lhs = alpha(pts, w_map.eval(pts))
        rhs = flow.eval_points(t, pts)
        worst = max(worst, float(np.abs(lhs - rhs).max()))
    return worst
