"""Nested-ball harness on the strip scale: continuity and Cauchy estimates.

The scale of strip spaces is filtered by levels n = 1, 2, ...: level n
carries the seminorm q_n = nu_{eps_n} with eps_1 > eps_2 > ... (thinner
strips mean weaker norms, so the q_n-balls U_n of radii r_1 <= r_2 <= ...
grow along the scale).  For a map f that is Lipschitz on each U_n with a
per-level constant, the telescoping construction

    y = z_1 + ... + z_n,   z_k drawn from B^{q'_k}_{eps 2^{-k}}(0) ∩ 2^{-k} U_k

(with q'_k the Lipschitz-weighted seminorm of level k) keeps every partial
sum inside U_k by convexity and forces

    p(f(y) - f(0))  <=  sum_k p(f(y_k) - f(y_{k-1}))  <=  sum_k q'_k(z_k)
                    <   sum_k eps 2^{-k}  <  eps,

each link of which is asserted per sample.  Separately, for an analytic
map bounded on U_n, the derivative obeys the Cauchy estimate

    p(df(v, w))  <=  M_{n,p} q_n(w),     M_{n,p} = sup p(f(U_n)),

with q_n the Minkowski functional of U_n/3 and v ranging over U_n/3, and
f is Lipschitz on the third-ball with the same constant; both ratios are
swept with finite-difference derivatives.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import EmptyLevel
from .fourier import FourierMap, multiply_exact, strip_norms

#: slack for the Cauchy / third-ball ratio contracts
RATIO_SLACK = 1e-3


@dataclass(frozen=True)
class ScaleLevel:
    """One level of the nested scale: seminorm nu_eps, ball radius r."""

    index: int
    eps: float
    order: int
    radius: float

    def q(self, f: FourierMap) -> float:
        return strip_norms(f, self.eps).nu


def make_levels(eps_top: float, radii, order: int,
                ratio: float = 0.5) -> list:
    """Geometric ladder of levels; radii must be nondecreasing."""
    radii = list(radii)
    if any(a > b for a, b in zip(radii, radii[1:])):
        raise ValueError("ball radii must be nondecreasing along the scale")
    return [ScaleLevel(index=n + 1, eps=eps_top * ratio**n, order=order,
                       radius=float(r)) for n, r in enumerate(radii)]


@dataclass(frozen=True)
class LevelLipschitzCert:
    """p(f(x) - f(y)) <= constant * q_n(x - y) on U_n, with its derivation."""

    level: int
    constant: float
    derivation: str


# ---------------------------------------------------------------------------
# concrete maps on the scale
# ---------------------------------------------------------------------------

class ScaleMap:
    """A map of the scale with certified per-level data."""

    def apply(self, u: FourierMap) -> FourierMap:
        raise NotImplementedError

    def lipschitz_certs(self, levels, p_eps: float) -> list:
        raise NotImplementedError

    def sup_bound(self, level: ScaleLevel, p_eps: float) -> float:
        """Certified sup of p over the level ball U_n."""
        raise NotImplementedError


class LinearScaleMap(ScaleMap):
    """Coefficient multiplier (lambda_k), |lambda_k| <= 1; norm-nonexpanding."""

    def __init__(self, multipliers: np.ndarray):
        if np.abs(multipliers).max() > 1 + 1e-15:
            raise ValueError("multipliers must be bounded by 1")
        self.multipliers = np.asarray(multipliers, dtype=complex)

    def apply(self, u: FourierMap) -> FourierMap:
        mult = self.multipliers
        if mult.shape[0] != u.coeffs.shape[0]:
            half = (mult.shape[0] - u.coeffs.shape[0]) // 2
            mult = mult[half:half + u.coeffs.shape[0]]
        return FourierMap(u.coeffs * mult[..., None], check=False)

    def lipschitz_certs(self, levels, p_eps):
        return [LevelLipschitzCert(
            lv.index, 1.0,
            "diagonal multiplier bounded by 1; p <= q_n since eps_p <= eps_n")
            for lv in levels]

    def sup_bound(self, level, p_eps):
        return level.radius


class ConstantScaleMap(ScaleMap):
    def __init__(self, value: FourierMap):
        self.value = value

    def apply(self, u):
        return self.value

    def lipschitz_certs(self, levels, p_eps):
        return [LevelLipschitzCert(lv.index, 0.0, "constant map")
                for lv in levels]

    def sup_bound(self, level, p_eps):
        return strip_norms(self.value, p_eps).nu


class PointwiseSquareMap(ScaleMap):
    """u -> u*u (exact convolution); Lipschitz by nu-submultiplicativity.

    p(x^2 - y^2) = p((x+y)(x-y)) <= nu_p(x+y) nu_p(x-y) <= 2 r_n q_n(x-y)
    on the q_n-ball of radius r_n, since nu_p <= q_n for p at a thinner
    strip.
    """

    def apply(self, u):
        return multiply_exact(u, u)

    def lipschitz_certs(self, levels, p_eps):
        certs = []
        for lv in levels:
            if p_eps > lv.eps + 1e-15:
                raise ValueError("target seminorm must sit at a thinner strip")
            certs.append(LevelLipschitzCert(
                lv.index, 2.0 * lv.radius,
                f"nu submultiplicative: factor 2 r_{lv.index} = {2 * lv.radius}"))
        return certs

    def sup_bound(self, level, p_eps):
        return level.radius**2


# ---------------------------------------------------------------------------
# the telescoping neighbourhood
# ---------------------------------------------------------------------------

def _random_ball_map(rng, order: int, eps: float, nu_target: float,
                     max_mode: int = 6) -> FourierMap:
    f = FourierMap.zero(order, 1, 1)
    for k in range(1, max_mode + 1):
        v = (rng.normal() + 1j * rng.normal()) * np.exp(-0.7 * k)
        f.coeffs[order + k, 0] = v
        f.coeffs[order - k, 0] = np.conj(v)
    f.coeffs[order, 0] = rng.normal()
    f = FourierMap(f.coeffs, check=False)
    nu = strip_norms(f, eps).nu
    if nu == 0:
        f.coeffs[order, 0] = 1.0
        nu = 1.0
    return (nu_target / nu) * f


@dataclass
class NeighborhoodSample:
    """One telescoping draw with its per-level bookkeeping."""

    parts: list          # z_k
    partial_sums: list   # y_0 = 0, y_1, ..., y_n
    q_values: list       # q_k(z_k)
    caps: list           # eps 2^{-k} after Lipschitz weighting

    @property
    def point(self) -> FourierMap:
        return self.partial_sums[-1]


def build_neighborhood(levels, certs, eps_target: float,
                       rng: np.random.Generator, depth: int | None = None):
    """Generator of telescoping samples y = sum z_k with bookkeeping.

    z_k is drawn inside both the Lipschitz-weighted ball (q'_k = L_k q_k
    below eps 2^{-k}) and the shrunken level ball 2^{-k} U_k; the partial
    sums stay in U_k by convexity, which the caller re-asserts.
    """
    if len(certs) != len(levels):
        raise ValueError("need one Lipschitz certificate per level")
    depth = len(levels) if depth is None else depth
    caps = []
    for lv, cert in zip(levels[:depth], certs[:depth]):
        lip_cap = (eps_target * 2.0**-lv.index / cert.constant
                   if cert.constant > 0 else np.inf)
        ball_cap = 2.0**-lv.index * lv.radius
        cap = min(lip_cap, ball_cap)
        if not cap > 0:
            raise EmptyLevel(f"level {lv.index} has an empty intersection")
        caps.append(cap)
    while True:
        parts, sums, qs = [], [FourierMap.zero(levels[0].order, 1, 1)], []
        for lv, cap in zip(levels[:depth], caps):
            z = _random_ball_map(rng, lv.order, lv.eps,
                                 cap * rng.uniform(0.05, 0.99))
            parts.append(z)
            sums.append(sums[-1] + z)
            qs.append(lv.q(z))
        yield NeighborhoodSample(parts=parts, partial_sums=sums, q_values=qs,
                                 caps=[eps_target * 2.0**-lv.index
                                       for lv in levels[:depth]])


@dataclass
class ContinuityReport:
    rows: list        # (sample, depth, telescoped, observed, ok)
    eps_target: float
    violations: int

    @property
    def max_observed(self) -> float:
        return max((r[3] for r in self.rows), default=0.0)

    @property
    def ok(self) -> bool:
        return self.violations == 0


def verify_continuity_estimate(f: ScaleMap, levels, certs, p_eps: float,
                               eps_target: float, count: int,
                               rng: np.random.Generator) -> ContinuityReport:
    """Sweep telescoping samples and assert every link of the chain.

    Per sample: membership q_j(y_j) < r_j for every level, the per-level
    Lipschitz link p(f(y_k) - f(y_{k-1})) <= L_k q_k(z_k), the telescoped
    sum below sum_k eps 2^{-k}, and the headline p(f(y) - f(0)) < eps.
    """
    gen = build_neighborhood(levels, certs, eps_target, rng)
    f0 = f.apply(FourierMap.zero(levels[0].order, 1, 1))
    rows = []
    violations = 0
    for i in range(count):
        sample = next(gen)
        ok = True
        # convexity membership of every partial sum
        for j, lv in enumerate(levels[:len(sample.parts)], start=1):
            if lv.q(sample.partial_sums[j]) >= lv.radius:
                ok = False
        telescoped = 0.0
        for k, (lv, cert) in enumerate(list(zip(levels, certs))[:len(sample.parts)]):
            step = strip_norms(f.apply(sample.partial_sums[k + 1])
                               - f.apply(sample.partial_sums[k]), p_eps).nu
            link_bound = cert.constant * sample.q_values[k]
            if step > link_bound * (1 + 1e-9) + 1e-15:
                ok = False
            if link_bound > sample.caps[k] * (1 + 1e-9):
                ok = False
            telescoped += step
        observed = strip_norms(f.apply(sample.point) - f0, p_eps).nu
        if observed > telescoped * (1 + 1e-9) + 1e-15:
            ok = False
        if observed >= eps_target:
            ok = False
        if not ok:
            violations += 1
        rows.append((i, len(sample.parts), telescoped, observed, ok))
    return ContinuityReport(rows=rows, eps_target=eps_target,
                            violations=violations)


# ---------------------------------------------------------------------------
# Cauchy estimate and third-ball Lipschitz sweeps
# ---------------------------------------------------------------------------

def _fd_directional(f: ScaleMap, v: FourierMap, w: FourierMap,
                    step: float = 1e-5) -> FourierMap:
    """Central complex finite difference of f at v along w."""
    up = f.apply(v + step * w)
    dn = f.apply(v + (-step) * w)
    return (1.0 / (2 * step)) * (up - dn)


@dataclass
class RatioSweep:
    ratios: np.ndarray

    @property
    def max_ratio(self) -> float:
        return float(self.ratios.max()) if self.ratios.size else 0.0

    def ok(self, slack: float = RATIO_SLACK) -> bool:
        return self.max_ratio <= 1.0 + slack


def cauchy_bound_check(f: ScaleMap, level: ScaleLevel, p_eps: float,
                       n_samples: int, rng: np.random.Generator,
                       fd_step: float = 1e-5) -> RatioSweep:
    """max over samples of p(df(v, w)) / (M_{n,p} q_n(w)), v in U_n/3."""
    M = f.sup_bound(level, p_eps)
    ratios = []
    for _ in range(n_samples):
        v = _random_ball_map(rng, level.order, level.eps,
                             rng.uniform(0.02, 0.99) * level.radius / 3.0)
        w = _random_ball_map(rng, level.order, level.eps,
                             rng.uniform(0.05, 2.0))
        df = _fd_directional(f, v, w, fd_step)
        minkowski = 3.0 * level.q(w) / level.radius
        ratios.append(strip_norms(df, p_eps).nu / (M * minkowski))
    return RatioSweep(np.array(ratios))


def third_ball_lipschitz(f: ScaleMap, level: ScaleLevel, p_eps: float,
                         n_samples: int, rng: np.random.Generator) -> RatioSweep:
    """max over pairs in U_n/3 of p(f(w) - f(v)) / (M_{n,p} q_n(w - v))."""
    M = f.sup_bound(level, p_eps)
    ratios = []
    for _ in range(n_samples):
        v = _random_ball_map(rng, level.order, level.eps,
                             rng.uniform(0.02, 0.99) * level.radius / 3.0)
        w = _random_ball_map(rng, level.order, level.eps,
                             rng.uniform(0.02, 0.99) * level.radius / 3.0)
        num = strip_norms(f.apply(w) - f.apply(v), p_eps).nu
        den = M * 3.0 * level.q(w - v) / level.radius
        if den > 0:
            ratios.append(num / den)
    return RatioSweep(np.array(ratios))
