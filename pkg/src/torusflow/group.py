"""Near-identity analytic diffeomorphisms of the torus and their evolutions.

Group elements are maps id + u with a periodic analytic perturbation u and
an invertibility certificate (Jacobian majorant mu_eps(u) < 1, or an
explicitly verified inverse).  The right evolution of a time-dependent
field is the solved flow itself:

    (d/dt) eta(t) = gamma(t) o eta(t),        eta(0) = id,

while the left evolution carries the derivative by the Jacobian,

    (d/dt) eta(t) = D eta(t) . gamma(t),      eta(0) = id,

and equals the pointwise inverse of the right evolution of the negated
field.  On fields, the group product

    (gamma ⊙ eta)(t) = Ad(Evol(eta)(t))^{-1} gamma(t) + eta(t)

makes the left evolution a homomorphism into pointwise composition:
Evol(gamma ⊙ eta)(t) = Evol(gamma)(t) o Evol(eta)(t).  The directional
derivatives of Evol at zero and at a base field, the Trotter product
limit, and pointwise evolution recognition are all exposed as checkable
reports with explicit tolerances.
"""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction

import numpy as np

from .errors import InvertibilityLost
from .flow import (AdmissibleField, FlowPath, MAX_STEP, TOL_POINTWISE,
                   TOL_SOLVE, invert_at_point, solve_flow)
from .fourier import (FourierMap, fit_grid, jacobian, strip_norms,
                      _grid_points)
from .timepaths import (FIT_NODES, TimeDependentField, TimeGrid, fit_poly3,
                        integrate_primitive, _GL4_W, _GL4_X, _poly_eval)

#: sup-sampled residual bound for verified inverses
TOL_INVERSE = 1e-10


def _probe_points(m: int, n: int = 64) -> np.ndarray:
    if m == 1:
        return ((np.arange(n) + 0.31) / n)[:, None].astype(complex)
    g = (np.arange(int(np.ceil(np.sqrt(n)))) + 0.31) / int(np.ceil(np.sqrt(n)))
    pts = np.stack(np.meshgrid(g, g, indexing="ij"), axis=-1).reshape(-1, 2)
    return pts[:n].astype(complex)


class AnalyticDiffeo:
    """Degree-one torus self-map id + u with an invertibility certificate."""

    __slots__ = ("u", "eps", "mu", "inverse_residual")

    def __init__(self, u: FourierMap, eps: float, mu: float,
                 inverse_residual: float | None = None):
        self.u = u
        self.eps = float(eps)
        self.mu = float(mu)
        self.inverse_residual = inverse_residual

    @classmethod
    def certify(cls, u: FourierMap, eps: float) -> "AnalyticDiffeo":
        mu = strip_norms(u, eps).mu
        if mu < 1.0:
            return cls(u, eps, mu)
        probe = cls(u, eps, mu, inverse_residual=np.inf)
        inv = invert_diffeo(probe, certify_result=False)
        resid = composition_residual(probe, inv)
        if resid <= TOL_INVERSE:
            return cls(u, eps, mu, inverse_residual=resid)
        raise InvertibilityLost(
            f"mu_eps(u) = {mu:.4g} >= 1 and inverse residual {resid:.3e} "
            f"exceeds {TOL_INVERSE:.1e}")

    @classmethod
    def identity(cls, order: int, m: int, eps: float) -> "AnalyticDiffeo":
        return cls(FourierMap.zero(order, m, m), eps, 0.0)

    @property
    def m(self) -> int:
        return self.u.m

    @property
    def order(self) -> int:
        return self.u.order

    def __call__(self, pts: np.ndarray) -> np.ndarray:
        pts = np.asarray(pts, dtype=complex)
        return pts + self.u.eval(pts)

    def jacobian_values(self, pts: np.ndarray) -> np.ndarray:
        J = jacobian(self.u).eval(pts)
        return J + np.eye(self.m)[None, ...]

    def min_real_jacobian(self, samples: int = 256) -> float:
        """min over sampled real points of the Jacobian determinant."""
        pts = _probe_points(self.m, samples)
        J = self.jacobian_values(pts)
        if self.m == 1:
            return float(J[..., 0, 0].real.min())
        det = (J[..., 0, 0] * J[..., 1, 1] - J[..., 0, 1] * J[..., 1, 0]).real
        return float(det.min())


def composition_residual(phi: AnalyticDiffeo, psi: AnalyticDiffeo,
                         n_probe: int = 257) -> float:
    """sup-sampled |phi(psi(x)) - x| on an off-grid probe set."""
    pts = _probe_points(phi.m, n_probe)
    return float(np.abs(phi(psi(pts)) - pts).max())


def compose_diffeo(phi: AnalyticDiffeo, psi: AnalyticDiffeo) -> AnalyticDiffeo:
    """(id+u) o (id+v) = id + (v + u o (id+v)); certificate recomputed."""
    from .fourier import compose as _compose
    eps = min(phi.eps, psi.eps)
    order = max(phi.order, psi.order)
    w = psi.u.with_order(order) + _compose(phi.u.with_order(order), psi.u,
                                           order=order,
                                           outer_scale=2 * eps,
                                           inner_scale=eps)
    return AnalyticDiffeo.certify(w, eps)


def invert_diffeo(phi: AnalyticDiffeo, certify_result: bool = True,
                  tol: float = 1e-13) -> AnalyticDiffeo:
    """id + v with (id+u) o (id+v) = id, by pointwise displacement inversion."""
    m, order = phi.m, phi.order
    M = 4 * (2 * order + 1)
    pts = _grid_points(M, m).astype(complex)
    y = invert_at_point(phi.u, pts, tol=tol)
    v_vals = (y - pts).reshape((M,) * m + (m,))
    v = fit_grid(v_vals, order, m, tol_trunc=1e-8, context="inversion")
    if not certify_result:
        return AnalyticDiffeo(v, phi.eps, strip_norms(v, phi.eps).mu)
    inv = AnalyticDiffeo.certify(v, phi.eps)
    resid = composition_residual(phi, inv)
    if resid > TOL_INVERSE:
        raise InvertibilityLost(
            f"inverse residual {resid:.3e} exceeds {TOL_INVERSE:.1e}")
    return AnalyticDiffeo(inv.u, inv.eps, inv.mu, inverse_residual=resid)


# ---------------------------------------------------------------------------
# adjoint action
# ---------------------------------------------------------------------------

def _adjoint_values(phi: AnalyticDiffeo, X: FourierMap,
                    pts: np.ndarray) -> np.ndarray:
    """(Ad(phi) X)(x) = D phi(phi^{-1}(x)) . X(phi^{-1}(x))."""
    y = invert_at_point(phi.u, pts)
    J = phi.jacobian_values(y)
    return np.einsum("pij,pj->pi", J, X.eval(y))


def _adjoint_inverse_values(phi: AnalyticDiffeo, X: FourierMap,
                            pts: np.ndarray) -> np.ndarray:
    """(Ad(phi)^{-1} X)(x) = [D phi(x)]^{-1} . X(phi(x))."""
    J = phi.jacobian_values(pts)
    vals = X.eval(phi(pts))
    if phi.m == 1:
        return vals / J[..., 0, 0][..., None]
    return np.linalg.solve(J, vals[..., None])[..., 0]


def adjoint(phi: AnalyticDiffeo, X: FourierMap,
            inverse: bool = False) -> FourierMap:
    """Pushforward of a vector field, truncated back to the ambient order."""
    m, order = phi.m, max(phi.order, X.order)
    M = 4 * (2 * order + 1)
    pts = _grid_points(M, m).astype(complex)
    vals = (_adjoint_inverse_values if inverse else _adjoint_values)(
        phi, X.with_order(order) if X.order != order else X, pts)
    return fit_grid(vals.reshape((M,) * m + (m,)), order, m,
                    tol_trunc=1e-7, context="adjoint")


# ---------------------------------------------------------------------------
# evolutions
# ---------------------------------------------------------------------------

class EvolutionResult:
    """Group-valued evolution of a field, as snapshots over the solver grid.

    side = "right": eta(t) = zeta(t), the solved flow of gamma itself.
    side = "left":  eta(t) = zeta_{-gamma}(t)^{-1}, inverted per snapshot.
    """

    def __init__(self, side: str, source: AdmissibleField, flow: FlowPath,
                 snapshots=None):
        self.side = side
        self.source = source
        self.flow = flow
        self._snapshots = list(snapshots) if snapshots is not None else None
        self.grid = flow.grid
        self.eps = flow.eps

    @property
    def snapshots(self):
        """Perturbations of eta at the grid times; left sides invert lazily."""
        if self._snapshots is None:
            if self.side == "right":
                self._snapshots = list(self.flow.snapshots)
            else:
                self._snapshots = [
                    invert_diffeo(AnalyticDiffeo.certify(u, self.eps)).u
                    for u in self.flow.snapshots]
        return self._snapshots

    @property
    def order(self) -> int:
        return self.flow.order

    @property
    def m(self) -> int:
        return self.flow.m

    def map_at(self, t: float) -> AnalyticDiffeo:
        if self.side == "right":
            return AnalyticDiffeo.certify(self.flow.u_at(t), self.eps)
        inner = AnalyticDiffeo.certify(self.flow.u_at(t), self.eps)
        return invert_diffeo(inner)

    def eval_at(self, t: float, pts: np.ndarray) -> np.ndarray:
        pts = np.asarray(pts, dtype=complex)
        if self.side == "right":
            return self.flow.eval_points(t, pts)
        return invert_at_point(self.flow.u_at(t), pts)

    def snapshot_map(self, j: int) -> AnalyticDiffeo:
        return AnalyticDiffeo.certify(self.snapshots[j], self.eps)

    def derivative_residual(self, n_probe: int = 16, times=None,
                            fd_step: float = 1e-3) -> float:
        """Max defect of the side's derivative identity at probe points.

        right: d/dt eta(t)(x) = gamma(t)(eta(t)(x));
        left:  d/dt eta(t)(x) = (D eta(t))(x) . gamma(t)(x).
        The time derivative is a 4th-order central difference of the
        evaluated path, so the residual isolates the convention, not the
        interpolation.
        """
        pts = _probe_points(self.m, n_probe)
        gamma = self.source
        if times is None:
            times = [0.21337, 0.517, 0.8123]
        worst = 0.0
        stencil = np.array([1.0, -8.0, 8.0, -1.0]) / (12.0 * fd_step)
        offsets = np.array([-2, -1, 1, 2]) * fd_step
        for t in times:
            vals = np.stack([self.eval_at(t + o, pts) for o in offsets])
            dpath = np.tensordot(stencil, vals, axes=(0, 0))
            g_t = gamma.field.value_at(t)
            if self.side == "right":
                rhs = g_t.eval(self.eval_at(t, pts))
            else:
                eta_u = invert_diffeo(
                    AnalyticDiffeo.certify(self.flow.u_at(t), self.eps)).u
                J = jacobian(eta_u).eval(pts) + np.eye(self.m)[None, ...]
                rhs = np.einsum("pij,pj->pi", J, g_t.eval(pts))
            worst = max(worst, float(np.abs(dpath - rhs).max()))
        return worst

    def to_json(self) -> dict:
        from .timepaths import _modes_to_json
        return {
            "side": self.side,
            "eps": self.eps,
            "grid": [str(b) for b in self.grid.breakpoints],
            "snapshots": [_modes_to_json(u.coeffs, self.m, u.order)
                          for u in self.snapshots],
        }


def evol_right(gamma: AdmissibleField,
               tol_solve: float = TOL_SOLVE) -> EvolutionResult:
    """The flow of the field IS its right evolution."""
    flow = solve_flow(gamma, tol_solve)
    return EvolutionResult("right", gamma, flow, flow.snapshots)


def evol_left(gamma: AdmissibleField,
              tol_solve: float = TOL_SOLVE) -> EvolutionResult:
    """Pointwise inverse of the right evolution of the negated field.

    Snapshot maps are inverted lazily: evaluation at points only needs the
    displacement contraction, not the re-expanded inverse coefficients.
    """
    flow = solve_flow(gamma.negated(), tol_solve)
    return EvolutionResult("left", gamma, flow)


def evol_left_by_reversal(gamma: AdmissibleField, t: Fraction,
                          tol_solve: float = TOL_SOLVE) -> AnalyticDiffeo:
    """Independent construction of Evol(gamma)(t) by time reversal.

    The left evolution at time t equals the right evolution, at time 1, of
    the reversed-and-rescaled field s -> t * gamma(t - t*s).  This solves a
    fresh flow per requested time and never inverts a map, so it is to be
    cross-checked against the inversion route.
    """
    t = Fraction(t)
    if t == 0:
        f = gamma.field
        return AnalyticDiffeo.identity(f.order, f.m, gamma.eps)
    restricted = gamma.field.restricted_rescaled(t)
    reversed_field = restricted.time_reversed()
    adm = AdmissibleField.certify(reversed_field, gamma.eps,
                                  gamma.chart_delta0, gamma.for_chart)
    flow = solve_flow(adm, tol_solve)
    return AnalyticDiffeo.certify(flow.snapshots[-1], gamma.eps)


def flow_two_param(evol: EvolutionResult, t: float, t0: float) -> AnalyticDiffeo:
    """Fl_{t, t0} = Fl_{t, 0} o (Fl_{t0, 0})^{-1} from a right evolution."""
    if evol.side != "right":
        raise ValueError("two-parameter flows are built from right evolutions")
    if t == t0:
        return AnalyticDiffeo.identity(evol.order, evol.m, evol.eps)
    head = AnalyticDiffeo.certify(evol.flow.u_at(t), evol.eps)
    if t0 == 0.0:
        return head
    base = AnalyticDiffeo.certify(evol.flow.u_at(t0), evol.eps)
    return compose_diffeo(head, invert_diffeo(base))


# ---------------------------------------------------------------------------
# the product on fields and the derivative formulas
# ---------------------------------------------------------------------------

def _left_evol_adjoint_rows(eta_flow: FlowPath, field: TimeDependentField,
                            grid: TimeGrid, inverse_side: bool,
                            pts: np.ndarray):
    """Values of Ad(Evol(eta)(s))^{+-1} field(s) at collocation nodes.

    ``eta_flow`` is the right flow of -eta, so Evol(eta)(s) is the inverse
    of its maps; Ad(Evol(eta)(s))^{-1} = Ad(zeta_{-eta}(s)) needs pointwise
    inversion only, while Ad(Evol(eta)(s)) = Ad(zeta_{-eta}(s)^{-1}) uses
    the Jacobian-solve form.
    """
    ts = grid.floats
    rows = []
    gam = field.on_grid(grid)
    for j in range(len(ts) - 1):
        h = ts[j + 1] - ts[j]
        for tau in FIT_NODES:
            s = ts[j] + h * tau
            g_s = FourierMap(_poly_eval(gam.pieces[j], tau), check=False)
            zeta = AnalyticDiffeo(eta_flow.u_at(s), eta_flow.eps, 0.0)
            if inverse_side:
                vals = _adjoint_values(zeta, g_s, pts)
            else:
                vals = _adjoint_inverse_values(zeta, g_s, pts)
            rows.append(vals)
    return rows


def odot(gamma: AdmissibleField, eta: AdmissibleField,
         tol_solve: float = TOL_SOLVE) -> TimeDependentField:
    """The field product (gamma ⊙ eta)(t) = Ad(Evol(eta)(t))^{-1} gamma(t) + eta(t).

    Ad values are sampled at collocation nodes of the merged grid and
    re-fitted as cubic pieces; the left evolution of the result composes
    pointwise with that of eta.
    """
    eta_flow = solve_flow(eta.negated(), tol_solve)
    grid = gamma.field.grid.merged(eta.field.grid).refined(MAX_STEP)
    m, order = gamma.field.m, gamma.field.order
    M = 4 * (2 * order + 1)
    pts = _grid_points(M, m).astype(complex)
    rows = _left_evol_adjoint_rows(eta_flow, gamma.field, grid,
                                   inverse_side=True, pts=pts)
    eta_on = eta.field.on_grid(grid)
    ts = grid.floats
    pieces = []
    idx = 0
    for j in range(len(ts) - 1):
        samples = []
        for tau in FIT_NODES:
            ad_map = fit_grid(rows[idx].reshape((M,) * m + (m,)), order, m,
                              tol_trunc=1e-7, context="odot")
            g_eta = FourierMap(_poly_eval(eta_on.pieces[j], tau), check=False)
            samples.append((ad_map + g_eta).coeffs)
            idx += 1
        pieces.append(fit_poly3(np.stack(samples)))
    return TimeDependentField(grid, pieces, gamma.field.scale)


def ad_transport_integral(eta: AdmissibleField, gamma_field: TimeDependentField,
                          t: float, tol_solve: float = TOL_SOLVE) -> FourierMap:
    """W(t) = int_0^t Ad(Evol(eta)(s)) gamma(s) ds, by collocation quadrature."""
    eta_flow = solve_flow(eta.negated(), tol_solve)
    grid = eta_flow.grid
    m, order = gamma_field.m, gamma_field.order
    M = 4 * (2 * order + 1)
    pts = _grid_points(M, m).astype(complex)
    gam = gamma_field.on_grid(grid)
    ts = grid.floats
    acc = FourierMap.zero(order, m, m)
    for j in range(len(ts) - 1):
        if ts[j] >= t:
            break
        a, b = ts[j], min(ts[j + 1], t)
        h_full = ts[j + 1] - ts[j]
        node_vals = []
        for tau in _GL4_X:
            s = a + (b - a) * tau
            g_s = FourierMap(
                _poly_eval(gam.pieces[j], (s - ts[j]) / h_full), check=False)
            zeta = AnalyticDiffeo(eta_flow.u_at(s), eta_flow.eps, 0.0)
            node_vals.append(_adjoint_inverse_values(zeta, g_s, pts))
        integ = (b - a) * np.tensordot(_GL4_W, np.array(node_vals), axes=(0, 0))
        acc = acc + fit_grid(integ.reshape((M,) * m + (m,)), order, m,
                             tol_trunc=1e-6, context="transport integral")
    return acc


@dataclass
class DerivativeReport:
    tau: float
    discrepancy: float
    discrepancy_half: float

    @property
    def richardson_ratio(self) -> float:
        if self.discrepancy == 0:
            return 0.0
        return self.discrepancy_half / self.discrepancy


def derivative_at_zero(gamma: AdmissibleField, t: float,
                       tau_step: float = 1e-3,
                       window: int = 8) -> DerivativeReport:
    """Central difference of the chart image of Evol(tau gamma)(t) against
    the integral of the field up to t; second-order in tau_step.

    Solver sweeps and pointwise inversions run with pinned iteration
    counts so the chart image is a smooth function of tau and the finite
    difference is not polluted by stopping noise.  The nu report compares
    the two sides on the mode window ||k||_1 <= window: under the
    exponential majorant weights, the white rounding dust that any float
    pipeline leaves on far modes (~1e-17 per coefficient, amplified by
    1/tau) would otherwise swamp the tau^2 signal of every admissible
    field, while the signal itself lives on a handful of low modes.
    """
    primitive = integrate_primitive(gamma.field).value_at(t)
    m, order = gamma.field.m, gamma.field.order
    window = min(window, order)
    M = 4 * (2 * order + 1)
    pts = _grid_points(M, m).astype(complex)

    def chart_image(tau: float) -> FourierMap:
        scaled = gamma.scaled(tau)
        flow = solve_flow(scaled.negated(), fixed_iters=12)
        y = invert_at_point(flow.u_at(t), pts, fixed_iters=100)
        return fit_grid((y - pts).reshape((M,) * m + (m,)), order, m,
                        tol_trunc=1e-6, context="chart image")

    def discrepancy(step: float) -> float:
        fd = (1.0 / (2 * step)) * (chart_image(step) - chart_image(-step))
        return strip_norms((fd - primitive).with_order(window), gamma.eps).nu

    return DerivativeReport(tau=tau_step,
                            discrepancy=discrepancy(tau_step),
                            discrepancy_half=discrepancy(tau_step / 2))


def derivative_at_eta(eta: AdmissibleField, gamma: AdmissibleField, t: float,
                      tau_step: float = 1e-3, n_probe: int = 32) -> float:
    """Probe-point defect of the directional derivative of Evol at eta.

    Compares the central difference of Evol(eta + tau gamma)(t) against
    W(t) o Evol(eta)(t) with W(t) = int_0^t Ad(Evol(eta)(s)) gamma(s) ds.
    """
    pts = _probe_points(gamma.field.m, n_probe)

    def left_eval(field: TimeDependentField) -> np.ndarray:
        adm = AdmissibleField.certify(field, gamma.eps)
        flow = solve_flow(adm.negated(), tol_solve=1e-15)
        return invert_at_point(flow.u_at(t), pts)

    up = left_eval(eta.field + tau_step * gamma.field)
    dn = left_eval(eta.field - tau_step * gamma.field)
    fd = (up - dn) / (2 * tau_step)

    W = ad_transport_integral(eta, gamma.field, t, tol_solve=1e-13)
    eta_pts = left_eval(eta.field)
    formula = W.eval(eta_pts)
    return float(np.abs(fd - formula).max())


# ---------------------------------------------------------------------------
# Trotter product
# ---------------------------------------------------------------------------

def exp_field(X: FourierMap, eps: float,
              tol_solve: float = TOL_SOLVE) -> AnalyticDiffeo:
    """Time-1 flow of the autonomous field X (no splitting shortcuts)."""
    adm = AdmissibleField.certify(
        TimeDependentField.constant(X, scale=4 * eps), eps)
    flow = solve_flow(adm, tol_solve)
    return AnalyticDiffeo.certify(flow.snapshots[-1], eps)


def trotter_curve(v: FourierMap, w: FourierMap, eps: float,
                  n_values=(8, 16, 32, 64, 128), n_probe: int = 64):
    """d(n) = sup-sampled distance of (exp(v/n) exp(w/n))^n from exp(v+w).

    Dyadic n are reached by repeated squaring of the single-step map.
    """
    pts = _probe_points(v.m, n_probe)
    target = exp_field(v + w, eps)(pts)
    out = []
    for n in n_values:
        k = int(np.log2(n))
        if 2**k != n:
            raise ValueError("trotter ladder must be dyadic")
        step = compose_diffeo(exp_field((1.0 / n) * v, eps),
                              exp_field((1.0 / n) * w, eps))
        prod = step
        for _ in range(k):
            prod = compose_diffeo(prod, prod)
        out.append((n, float(np.abs(prod(pts) - target).max())))
    return out


# ---------------------------------------------------------------------------
# pointwise evolution recognition
# ---------------------------------------------------------------------------

@dataclass
class VerificationReport:
    rows: list            # (probe index, time, residual)
    max_residual: float
    tol: float

    @property
    def passed(self) -> bool:
        return self.max_residual <= self.tol

    def worst_time(self) -> float:
        j = int(np.argmax([r for _, _, r in self.rows]))
        return self.rows[j][1]


def verify_evolution_pointwise(candidate: EvolutionResult,
                               gamma: AdmissibleField, probes,
                               tol_pointwise: float = TOL_POINTWISE
                               ) -> VerificationReport:
    """Scalar Caratheodory check of the side-appropriate integral equation.

    right: eta(t)(x) = x + int_0^t gamma(s)(eta(s)(x)) ds;
    left:  eta(t)(x) = x + int_0^t (D eta(s))(x) gamma(s)(x) ds.
    Trajectory values at grid times come from the snapshots; integrals use
    the continuous path between them.  Residual violations are reported,
    never raised.
    """
    probes = np.asarray(probes, dtype=complex)
    if probes.ndim == 1:
        probes = probes[:, None]
    grid = candidate.grid
    ts = grid.floats
    gam = gamma.field.on_grid(grid)
    P = probes.shape[0]

    traj = np.empty((len(ts), P, candidate.m), dtype=complex)
    for j, u in enumerate(candidate.snapshots):
        traj[j] = probes + u.eval(probes)

    increments = np.zeros_like(traj)
    for j in range(len(ts) - 1):
        h = ts[j + 1] - ts[j]
        node_vals = []
        for tau in _GL4_X:
            s = ts[j] + h * tau
            g_s = FourierMap(_poly_eval(gam.pieces[j], tau), check=False)
            if candidate.side == "right":
                y_s = candidate.eval_at(s, probes)
                node_vals.append(g_s.eval(y_s))
            else:
                eta_u_vals = candidate.eval_at(s, probes) - probes
                inner = AnalyticDiffeo(candidate.flow.u_at(s),
                                       candidate.eps, 0.0)
                Jz = inner.jacobian_values(candidate.eval_at(s, probes))
                g_vals = g_s.eval(probes)
                if candidate.m == 1:
                    rhs = g_vals / Jz[..., 0, 0][..., None]
                else:
                    rhs = np.linalg.solve(Jz, g_vals[..., None])[..., 0]
                node_vals.append(rhs)
        increments[j + 1] = increments[j] + h * np.tensordot(
            _GL4_W, np.array(node_vals), axes=(0, 0))

    rows = []
    worst = 0.0
    for j, t in enumerate(ts):
        resid = np.abs(traj[j] - probes - increments[j]).max(axis=-1)
        for p in range(P):
            rows.append((p, float(t), float(resid[p])))
        worst = max(worst, float(resid.max()))
    return VerificationReport(rows=rows, max_residual=worst, tol=tol_pointwise)


def ac_modulus_check(evol: EvolutionResult, n_pairs: int = 16,
                     n_probe: int = 64):
    """Snapshot increments against the integral bound of the field size.

    For dyadic pairs (t_a, t_b): sup-sampled |eta(t_b)(x) - eta(t_a)(x)|
    must not exceed int_{t_a}^{t_b} nu_{2 eps}(gamma(s)) ds.
    """
    gamma = evol.source
    pts = _probe_points(evol.m, n_probe)
    ts = evol.grid.floats
    idx = np.linspace(0, len(ts) - 1, n_pairs + 1).astype(int)
    rows = []
    for a, b in zip(idx, idx[1:]):
        if a == b:
            continue
        lhs = float(np.abs(evol.eval_at(ts[b], pts)
                           - evol.eval_at(ts[a], pts)).max())
        sub = _field_nu_integral(gamma, ts[a], ts[b])
        rows.append((ts[a], ts[b], lhs, sub, lhs <= sub * (1 + 1e-9)))
    return rows


def _field_nu_integral(gamma: AdmissibleField, a: float, b: float) -> float:
    gam = gamma.field
    ts = gam.grid.floats
    total = 0.0
    for j in range(len(ts) - 1):
        lo, hi = max(a, ts[j]), min(b, ts[j + 1])
        if hi <= lo:
            continue
        h_full = ts[j + 1] - ts[j]
        for tau, wq in zip(_GL4_X, _GL4_W):
            s = lo + (hi - lo) * tau
            f = FourierMap(_poly_eval(gam.pieces[j], (s - ts[j]) / h_full),
                           check=False)
            total += (hi - lo) * wq * strip_norms(f, 2 * gamma.eps).nu
    return total
