"""Contraction solver for the flow integral equation on the torus.

For an admissible time-dependent field ``gamma`` (L^1-in-time beta-majorant
below 1/2 at twice the working half-width) the map

    P(eta)(t) = id + int_0^t gamma(s) o eta(s) ds

is a contraction on continuous paths of near-identity maps, with Lipschitz
constant bounded by the certificate

    theta_hat = ||gamma||_{L^1, beta_{2 eps}} < 1/2.

Iterating P from the identity path converges geometrically to the unique
solution ``zeta``; the perturbations ``u(t) = zeta(t) - id`` are stored as
snapshots on a refined time grid together with one polynomial piece per
interval (the integral of a cubic collocation fit of s -> gamma(s) o
zeta(s), so time integration is closed-form).  The iteration log records
the observed sup-distances and their ratios, which must respect the
certified contraction factor; two solved parameter values can never drift
apart by more than twice their L^1 distance, which is checked by
``param_lipschitz_check``.
"""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction

import numpy as np

from .errors import (AdmissibilityViolation, ContractionStall, DomainEscape,
                     NonContraction, TruncationBudgetExceeded)
from .fourier import (FourierMap, TWO_PI, TOL_TRUNC, _k_axis, compose,
                      imag_reach, strip_norms)
from .timepaths import (FIT_NODES, TimeDependentField, TimeGrid,
                        _FIT_VANDER_INV, _GL4_W, _GL4_X, _poly_antiderivative,
                        _poly_eval)

#: default solver tolerance, measured in nu_eps of snapshot differences
TOL_SOLVE = 1e-10
#: slack for the parameter-Lipschitz-2 contract
TOL_SLACK = 1e-6
#: default tolerance for pointwise trajectory residuals
TOL_POINTWISE = 1e-8
#: solver grids are refined to at most this step
MAX_STEP = Fraction(1, 64)
#: admissibility thresholds
BETA_BOUND = 0.5


@dataclass(frozen=True)
class AdmissibleField:
    """A field together with the certificates that admit the local solver.

    ``l1_beta`` is the L^1-in-time beta majorant at half-width ``2 eps``
    (must be < 1/2); ``l1_nu`` the L^1 nu majorant at the same width, which
    must be < delta0/4 when the field is flagged for chart transport.
    """

    field: TimeDependentField
    eps: float
    l1_beta: float
    l1_nu: float
    chart_delta0: float = 1.0
    for_chart: bool = False

    @classmethod
    def certify(cls, field: TimeDependentField, eps: float,
                chart_delta0: float = 1.0,
                for_chart: bool = False) -> "AdmissibleField":
        l1_beta = field.lp_norm(1, "beta", 2 * eps)
        l1_nu = field.lp_norm(1, "nu", 2 * eps)
        if not l1_beta < BETA_BOUND:
            raise AdmissibilityViolation(
                f"L1 beta norm {l1_beta:.6g} at width {2 * eps:.6g} is not "
                f"below the admissibility bound {BETA_BOUND}")
        if for_chart and not l1_nu < chart_delta0 / 4:
            raise AdmissibilityViolation(
                f"L1 nu norm {l1_nu:.6g} is not below delta0/4 = "
                f"{chart_delta0 / 4:.6g} required for chart transport")
        return cls(field, float(eps), l1_beta, l1_nu, chart_delta0, for_chart)

    @property
    def theta_hat(self) -> float:
        return self.l1_beta

    def negated(self) -> "AdmissibleField":
        return AdmissibleField.certify(-self.field, self.eps,
                                       self.chart_delta0, self.for_chart)

    def scaled(self, a: float) -> "AdmissibleField":
        return AdmissibleField.certify(a * self.field, self.eps,
                                       self.chart_delta0, self.for_chart)


class FlowPath:
    """Solution path zeta(t) = id + u(t) of the flow integral equation.

    ``snapshots`` hold u at the grid times (u(0) = 0) and ``pieces`` the
    local polynomial of u on each interval, so zeta can be evaluated at
    any t in [0, 1].  ``iteration_log`` rows are (step, sup_diff, ratio).
    """

    def __init__(self, grid: TimeGrid, eps: float, snapshots, pieces,
                 source: AdmissibleField | None = None,
                 iteration_log=None, residual: float = np.nan):
        self.grid = grid
        self.eps = float(eps)
        self.snapshots = list(snapshots)
        self.pieces = list(pieces)
        self.source = source
        self.iteration_log = list(iteration_log or [])
        self.residual = residual
        first = self.snapshots[0]
        self.m = first.m
        self.order = first.order

    def u_at(self, t: float) -> FourierMap:
        j = self.grid.interval_of(t)
        ts = self.grid.floats
        tau = (t - ts[j]) / (ts[j + 1] - ts[j])
        return FourierMap(_poly_eval(self.pieces[j], tau), check=False)

    def eval_points(self, t: float, pts: np.ndarray) -> np.ndarray:
        """zeta(t) applied to points of shape (..., m)."""
        pts = np.asarray(pts, dtype=complex)
        return pts + self.u_at(t).eval(pts)

    def sup_distance(self, other: "FlowPath", eps: float | None = None) -> float:
        eps = eps if eps is not None else self.eps
        worst = 0.0
        for a, b in zip(self.snapshots, other.snapshots):
            worst = max(worst, strip_norms(a - b, eps).nu)
        return worst

    def imag_reach_max(self, start_width: float | None = None) -> float:
        """Certified bound on ||Im zeta(t)(z)|| over starts ||Im z|| <= start_width."""
        w = self.eps / 2 if start_width is None else start_width
        return max(imag_reach(u, w) for u in self.snapshots)

    def check_strip_invariant(self) -> bool:
        """Flows started in the half strip stay strictly inside the full strip."""
        return self.imag_reach_max(self.eps / 2) < self.eps

    def with_perturbed_snapshot(self, j: int, delta: FourierMap) -> "FlowPath":
        """Copy with one tampered snapshot (fault-injection support)."""
        snaps = list(self.snapshots)
        snaps[j] = snaps[j] + delta
        return FlowPath(self.grid, self.eps, snaps, self.pieces,
                        self.source, self.iteration_log, self.residual)

    def to_json(self) -> dict:
        from .timepaths import _modes_to_json
        return {
            "eps": self.eps,
            "grid": [str(b) for b in self.grid.breakpoints],
            "snapshots": [_modes_to_json(u.coeffs, self.m, self.order)
                          for u in self.snapshots],
            "residual": self.residual,
        }

    def iteration_log_rows(self):
        return [(step, diff, ratio) for step, diff, ratio in self.iteration_log]


def identity_path(gamma: AdmissibleField,
                  max_step: Fraction = MAX_STEP) -> FlowPath:
    grid = gamma.field.grid.refined(max_step)
    f = gamma.field
    zero = FourierMap.zero(f.order, f.m, f.ncomp)
    snaps = [zero] * len(grid)
    pieces = [zero.coeffs[None, ...]] * (len(grid) - 1)
    return FlowPath(grid, gamma.eps, snaps, pieces, source=gamma)


# ---------------------------------------------------------------------------
# one application of the integral-equation map
# ---------------------------------------------------------------------------

def _nu_weights(order: int, eps: float) -> np.ndarray:
    return np.exp(TWO_PI * eps * np.abs(_k_axis(order)))


class _Sweep1D:
    """Vectorized Picard sweep for m = 1 (single component).

    Evaluates gamma(s) o zeta(s) at 4 collocation nodes of every interval
    in one batch: synthesis of u on the oversampled grid by FFT, outer
    evaluation by a Horner pass over the shifted unit-circle powers, then
    one batched FFT back to coefficients.  Field samples and grid data are
    precomputed once per solve.
    """

    def __init__(self, gam: TimeDependentField, grid: TimeGrid,
                 tol_trunc: float):
        self.ts = grid.floats
        self.n = gam.order
        self.nmodes = 2 * self.n + 1
        self.M = 4 * self.nmodes
        self.x = np.arange(self.M) / self.M
        self.J = len(grid) - 1
        self.Q = len(FIT_NODES)
        self.k = _k_axis(self.n)
        self.tol_trunc = tol_trunc
        rows = np.empty((self.J, self.Q, self.nmodes), dtype=complex)
        for j in range(self.J):
            rows[j] = _poly_eval(gam.pieces[j], FIT_NODES)[..., 0]
        self.gam_rows = rows.reshape(self.J * self.Q, self.nmodes)
        kfull = np.fft.fftfreq(self.M, d=1.0 / self.M).astype(int)
        self.outside = np.abs(kfull) > self.n

    def run(self, pieces):
        n, nmodes, M, J, Q = self.n, self.nmodes, self.M, self.J, self.Q
        u_rows = np.empty((J, Q, nmodes), dtype=complex)
        for j in range(J):
            u_rows[j] = _poly_eval(pieces[j], FIT_NODES)[..., 0]
        u_rows = u_rows.reshape(J * Q, nmodes)

        dense = np.zeros((J * Q, M), dtype=complex)
        dense[:, self.k % M] = u_rows
        u_vals = M * np.fft.ifft(dense, axis=1)
        args = self.x[None, :] + u_vals.real

        z = np.exp(TWO_PI * 1j * args)
        acc = np.zeros_like(z)
        for idx in range(nmodes - 1, -1, -1):
            acc = acc * z + self.gam_rows[:, idx][:, None]
        vals = acc * np.exp(-TWO_PI * 1j * n * args)

        spec = np.fft.fft(vals, axis=1) / M
        amp = np.abs(spec)
        totals = amp.sum(axis=1)
        tails = amp[:, self.outside].sum(axis=1)
        nz = totals > 0
        worst_tail = float((tails[nz] / totals[nz]).max()) if nz.any() else 0.0
        if worst_tail > self.tol_trunc:
            raise TruncationBudgetExceeded(
                f"picard sweep: tail ratio {worst_tail:.3e} > {self.tol_trunc:.1e}")
        kept = spec[:, self.k % M].reshape(J, Q, nmodes)

        new_pieces = []
        snaps_c = np.empty((J + 1, nmodes), dtype=complex)
        snaps_c[0] = 0.0
        acc_c = np.zeros(nmodes, dtype=complex)
        for j in range(J):
            h = self.ts[j + 1] - self.ts[j]
            poly = _FIT_VANDER_INV @ kept[j]
            anti = _poly_antiderivative(poly[..., None], h)[..., 0]
            piece = anti.copy()
            piece[0] += acc_c
            new_pieces.append(piece[..., None])
            acc_c = acc_c + anti.sum(axis=0)
            snaps_c[j + 1] = acc_c
        snaps = [FourierMap(c[:, None], check=False) for c in snaps_c]
        return snaps, new_pieces


def _sweep_fast_1d(gam: TimeDependentField, path: FlowPath, tol_trunc: float):
    return _Sweep1D(gam, path.grid, tol_trunc).run(path.pieces)


def _sweep_generic(gam: TimeDependentField, path: FlowPath, eps: float,
                   tol_trunc: float):
    """Reference sweep through ``compose`` (any m); used for m = 2."""
    grid = path.grid
    ts = grid.floats
    J = len(grid) - 1
    new_pieces = []
    zero = FourierMap.zero(gam.order, gam.m, gam.ncomp)
    snaps = [zero]
    acc = zero
    for j in range(J):
        h = ts[j + 1] - ts[j]
        samples = []
        for tau in FIT_NODES:
            g_s = FourierMap(_poly_eval(gam.pieces[j], tau), check=False)
            u_s = FourierMap(_poly_eval(path.pieces[j], tau), check=False)
            comp = compose(g_s, u_s, order=gam.order, tol_trunc=tol_trunc,
                           outer_scale=2 * eps, inner_scale=eps)
            samples.append(comp.coeffs)
        flat = np.stack(samples).reshape(4, -1)
        poly = (_FIT_VANDER_INV @ flat).reshape((4,) + samples[0].shape)
        anti = _poly_antiderivative(poly, h)
        piece = anti.copy()
        piece[0] += acc.coeffs
        new_pieces.append(piece)
        acc = acc + FourierMap(_poly_eval(anti, 1.0), check=False)
        snaps.append(acc)
    return snaps, new_pieces


def picard_step(gamma: AdmissibleField, path: FlowPath,
                tol_trunc: float = TOL_TRUNC) -> FlowPath:
    """One application of the integral-equation map to a candidate path.

    The candidate must map the working strip into the doubled strip where
    the field's majorants are certified; the certificate implies this for
    every iterate of an admissible field.
    """
    reach = path.imag_reach_max(gamma.eps)
    if reach > 2 * gamma.eps * (1 + 1e-12):
        raise DomainEscape(
            f"candidate path reaches {reach:.6g}, beyond the controlled "
            f"strip {2 * gamma.eps:.6g}")
    gam = gamma.field.on_grid(path.grid)
    if gam.m == 1 and gam.ncomp == 1:
        snaps, pieces = _sweep_fast_1d(gam, path, tol_trunc)
    else:
        snaps, pieces = _sweep_generic(gam, path, gamma.eps, tol_trunc)
    return FlowPath(path.grid, gamma.eps, snaps, pieces, source=gamma,
                    iteration_log=path.iteration_log)


# ---------------------------------------------------------------------------
# the solver
# ---------------------------------------------------------------------------

def solve_flow(gamma: AdmissibleField, tol_solve: float = TOL_SOLVE,
               max_step: Fraction = MAX_STEP, max_iter: int = 200,
               start: FlowPath | None = None,
               fixed_iters: int | None = None) -> FlowPath:
    """Iterate the integral-equation map from the identity path to its fixed point.

    Stops when successive sup-distances (nu_eps over grid times) drop below
    ``tol_solve * (1 - theta_hat)``, which bounds the distance to the fixed
    point by ``tol_solve``.  Logged ratios above 1 raise NonContraction: the
    certificate guarantees observed ratios below theta_hat in exact
    arithmetic, so growth signals a certificate or truncation bug.

    ``fixed_iters`` pins the sweep count (no stopping or growth test):
    derivative probes need the solution to vary smoothly with parameters,
    which tolerance-based stopping would break.
    """
    theta = gamma.theta_hat
    path = start if start is not None else identity_path(gamma, max_step)
    target = tol_solve * (1 - theta)
    w = _nu_weights(path.order, gamma.eps)
    gam = gamma.field.on_grid(path.grid)
    fast = gam.m == 1 and gam.ncomp == 1
    ctx = _Sweep1D(gam, path.grid, TOL_TRUNC) if fast else None

    def _one_sweep(p: FlowPath):
        if fast:
            return ctx.run(p.pieces)
        return _sweep_generic(gam, p, gamma.eps, TOL_TRUNC)

    def _diff(snaps_a, snaps_b) -> float:
        worst = 0.0
        for a, b in zip(snaps_a, snaps_b):
            if fast:
                worst = max(worst, float(
                    (np.abs(a.coeffs - b.coeffs)[..., 0] * w).sum()))
            else:
                worst = max(worst, strip_norms(a - b, gamma.eps).nu)
        return worst

    if fixed_iters is not None:
        log = []
        for step in range(1, fixed_iters + 1):
            snaps, pieces = _one_sweep(path)
            log.append((step, _diff(snaps, path.snapshots), float("nan")))
            path = FlowPath(path.grid, gamma.eps, snaps, pieces, source=gamma)
        return FlowPath(path.grid, gamma.eps, path.snapshots, path.pieces,
                        source=gamma, iteration_log=log, residual=log[-1][1])

    prev_diff = None
    log = []
    converged = False
    for step in range(1, max_iter + 1):
        snaps, pieces = _one_sweep(path)
        diff = _diff(snaps, path.snapshots)
        ratio = diff / prev_diff if prev_diff else float("nan")
        log.append((step, diff, ratio))
        noise_floor = 64 * np.finfo(float).eps * max(
            1.0, max(float(np.abs(s.coeffs).max()) for s in snaps))
        if prev_diff is not None and diff > prev_diff and diff > 16 * noise_floor:
            raise NonContraction(
                f"observed ratio {ratio:.3f} >= 1 at step {step} "
                f"(certificate theta_hat = {theta:.3f})")
        path = FlowPath(path.grid, gamma.eps, snaps, pieces, source=gamma)
        if diff <= max(target, noise_floor):
            converged = True
            break
        prev_diff = diff
    if not converged:
        raise ContractionStall(f"no convergence within {max_iter} iterations")
    snaps, _ = _one_sweep(path)
    residual = _diff(snaps, path.snapshots)
    return FlowPath(path.grid, gamma.eps, path.snapshots, path.pieces,
                    source=gamma, iteration_log=log, residual=residual)


def contraction_certificate_ok(path: FlowPath, slack: float = 0.05) -> bool:
    """Logged ratios from step 2 onward stay below theta_hat + slack."""
    theta = path.source.theta_hat
    floor = 1e3 * np.finfo(float).eps
    for step, diff, ratio in path.iteration_log[1:]:
        if diff <= floor:
            continue
        if np.isfinite(ratio) and ratio > theta + slack:
            return False
    return True


@dataclass(frozen=True)
class LipschitzReport:
    sup_distance: float
    l1_distance: float
    ratio: float
    bound: float = 2.0

    def ok(self, slack: float = TOL_SLACK) -> bool:
        return self.ratio <= self.bound + slack


def param_lipschitz_check(g1: AdmissibleField, g2: AdmissibleField,
                          tol_solve: float = TOL_SOLVE) -> LipschitzReport:
    """Observed flow distance against twice the L^1 field distance."""
    if abs(g1.eps - g2.eps) > 1e-15:
        raise ValueError("fields must share the working half-width")
    grid = g1.field.grid.merged(g2.field.grid).refined(MAX_STEP)
    p1 = solve_flow(g1, tol_solve, start=_identity_on(g1, grid))
    p2 = solve_flow(g2, tol_solve, start=_identity_on(g2, grid))
    sup = p1.sup_distance(p2, g1.eps)
    l1 = (g2.field - g1.field).lp_norm(1, "nu", 2 * g1.eps)
    ratio = 0.0 if sup == 0 else (np.inf if l1 == 0 else sup / l1)
    return LipschitzReport(sup_distance=sup, l1_distance=l1, ratio=ratio)


def _identity_on(gamma: AdmissibleField, grid: TimeGrid) -> FlowPath:
    f = gamma.field
    zero = FourierMap.zero(f.order, f.m, f.ncomp)
    return FlowPath(grid, gamma.eps, [zero] * len(grid),
                    [zero.coeffs[None, ...]] * (len(grid) - 1), source=gamma)


# ---------------------------------------------------------------------------
# pointwise Caratheodory trajectories
# ---------------------------------------------------------------------------

@dataclass
class Trajectory:
    times: np.ndarray
    points: np.ndarray
    residuals: np.ndarray
    tol: float

    @property
    def max_residual(self) -> float:
        return float(self.residuals.max())

    @property
    def ok(self) -> bool:
        return self.max_residual <= self.tol


def invert_at_point(u: FourierMap, y: np.ndarray, tol: float = 1e-13,
                    max_iter: int = 200,
                    fixed_iters: int | None = None) -> np.ndarray:
    """Solve x + u(x) = y pointwise by the displacement contraction.

    With ``fixed_iters`` the iteration count is pinned (no stopping test),
    which keeps the result a smooth function of parameters; used by the
    finite-difference derivative probes.
    """
    y = np.asarray(y, dtype=complex)
    x = y.copy()
    if fixed_iters is not None:
        for _ in range(fixed_iters):
            x = y - u.eval(x)
        return x
    for _ in range(max_iter):
        step = y - x - u.eval(x)
        x = x + step
        if np.abs(step).max() <= tol:
            return x
    raise ContractionStall("pointwise inversion did not converge")


def pointwise_solution(flow: FlowPath, t0: float, y0,
                       tol_pointwise: float = TOL_POINTWISE) -> Trajectory:
    """Trajectory t -> Fl_{t, t0}(y0) with its integral-equation residuals.

    The residual at each grid time re-checks the scalar Caratheodory
    equation y(t) = y0 + int_{t0}^t gamma(s)(y(s)) ds by Gauss quadrature
    along the stored path.
    """
    gamma = flow.source
    y0 = np.atleast_1d(np.asarray(y0, dtype=complex))
    if np.abs(y0.imag).max() > flow.eps / 2 + 1e-15:
        raise DomainEscape(
            f"start point leaves the half-width-{flow.eps / 2:.6g} region")
    if t0 == 0.0:
        base = y0
    else:
        base = invert_at_point(flow.u_at(t0), y0)
    ts = flow.grid.floats
    pts = np.array([flow.eval_points(t, base[None, :])[0] for t in ts])
    gam = gamma.field.on_grid(flow.grid)

    def _gauss_piece(j: int, a: float, b: float) -> np.ndarray:
        """int_a^b gamma(s)(y(s)) ds inside interval j."""
        h_full = ts[j + 1] - ts[j]
        node_vals = []
        for tau in _GL4_X:
            t = a + (b - a) * tau
            g_s = FourierMap(
                _poly_eval(gam.pieces[j], (t - ts[j]) / h_full), check=False)
            y_s = flow.eval_points(t, base[None, :])[0]
            node_vals.append(g_s.eval(y_s[None, :])[0])
        return (b - a) * np.tensordot(_GL4_W, np.array(node_vals), axes=(0, 0))

    cumulative = np.zeros_like(pts)
    for j in range(len(ts) - 1):
        cumulative[j + 1] = cumulative[j] + _gauss_piece(j, ts[j], ts[j + 1])
    j0 = flow.grid.interval_of(t0)
    at_t0 = cumulative[j0] + (_gauss_piece(j0, ts[j0], t0)
                              if t0 > ts[j0] else 0.0)
    residuals = np.abs(pts - y0[None, :]
                       - (cumulative - at_t0[None, :])).max(axis=1)
    return Trajectory(times=ts, points=pts, residuals=residuals,
                      tol=tol_pointwise)


# ---------------------------------------------------------------------------
# restriction consistency across scales
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class RestrictionReport:
    eps: float
    delta: float
    discrepancy: float
    tol: float

    @property
    def ok(self) -> bool:
        return self.discrepancy <= self.tol


def restriction_consistency(gamma: AdmissibleField, delta: float,
                            tol_solve: float = TOL_SOLVE) -> RestrictionReport:
    """Solve at eps and at delta < eps with identical truncation; compare.

    Restriction does not change Fourier data, only the scale at which the
    certificates are quoted, so the two perturbation paths must agree to
    solver tolerance.
    """
    if not 0 < delta < gamma.eps:
        raise ValueError("need 0 < delta < eps")
    g_delta = AdmissibleField.certify(gamma.field, delta,
                                      gamma.chart_delta0, gamma.for_chart)
    p_eps = solve_flow(gamma, tol_solve)
    p_delta = solve_flow(g_delta, tol_solve)
    worst = 0.0
    for a, b in zip(p_eps.snapshots, p_delta.snapshots):
        worst = max(worst, float(np.abs(a.coeffs - b.coeffs).max()))
    return RestrictionReport(eps=gamma.eps, delta=delta, discrepancy=worst,
                             tol=10 * tol_solve)
