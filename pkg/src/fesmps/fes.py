"""Finite-entanglement scaling analysis.

Everything here works on a :class:`ScalingDataset`: per-bond-dimension
correlation lengths, sampled correlators, entropies and transfer spectra.
Exponents come from regressions of ``log G(s mu2(D))`` against
``log(s mu2(D))`` across bond dimensions, scanned over the scale ``s``.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Dict, List, Optional

import numpy as np
from scipy import stats
from scipy.interpolate import CubicSpline

from .errors import InsufficientPoints, InversionOutOfRange, NoCoupling, ScaleOutOfRange
from .observables import (
    CorrelatorSeries,
    EntropyRecord,
    half_line_entropy,
    interval_entropy,
    sample_grid,
    spectral_couplings,
    two_point,
)
from .umps import correlation_length, transfer_spectrum

LEVELS = (0.95, 0.9973)
S_MIN, S_MAX, N_SCALES = 0.05, 40.0, 160
COUPLING_THRESHOLD = 1e-12
DRIFT_TOL = 0.02
TIE_ATOL = 1e-12


# --------------------------------------------------------------------------
# regression


@dataclass(frozen=True)
class FitResult:
    slope: float
    intercept: float
    ci: Dict[float, float]
    n_points: int
    scale: Optional[float] = None
    r2: float = float("nan")
    max_abs_residual: float = float("nan")
    stderr: float = float("nan")

    def ci_at(self, level):
        return self.ci[level]

    def to_dict(self):
        return {
            "slope": self.slope,
            "intercept": self.intercept,
            "ci95": self.ci[0.95],
            "ci9973": self.ci[0.9973],
            "n_points": self.n_points,
            "scale": self.scale,
            "r2": self.r2,
            "max_abs_residual": self.max_abs_residual,
            "stderr": self.stderr,
        }


def t_quantile(level, dof):
    return float(stats.t.ppf(0.5 * (1.0 + level), dof))


def ols(x, y, scale=None, levels=LEVELS) -> FitResult:
    """Least-squares line with Student-t confidence half-widths on the slope."""
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    n = x.size
    if n < 3:
        raise InsufficientPoints(f"need at least 3 points for a slope CI, got {n}")
    xm, ym = x.mean(), y.mean()
    sxx = np.sum((x - xm) ** 2)
    if sxx == 0:
        raise InsufficientPoints("all abscissae coincide")
    slope = float(np.sum((x - xm) * (y - ym)) / sxx)
    intercept = float(ym - slope * xm)
    resid = y - (intercept + slope * x)
    ssr = float(np.sum(resid**2))
    sst = float(np.sum((y - ym) ** 2))
    se = float(np.sqrt(ssr / (n - 2) / sxx))
    ci = {lv: t_quantile(lv, n - 2) * se for lv in levels}
    r2 = 1.0 - ssr / sst if sst > 0 else 1.0
    return FitResult(slope, intercept, ci, n, scale, r2, float(np.max(np.abs(resid))), se)


# --------------------------------------------------------------------------
# dataset


@dataclass(eq=False)
class DRecord:
    """Observables of the converged state at one bond dimension.

    ``couplings[label]`` holds ``(lambda_I, (l|O+|r_I)(l_I|O|r))`` pairs of the
    operator's middle transfer operator, ordered by descending Re lambda.
    """

    D: int
    mu2: float
    mus: np.ndarray = field(default_factory=lambda: np.empty(0))
    eigenvalues: np.ndarray = field(default_factory=lambda: np.empty(0, dtype=complex))
    correlators: Dict[str, CorrelatorSeries] = field(default_factory=dict)
    half_line: Optional[EntropyRecord] = None
    intervals: List[EntropyRecord] = field(default_factory=list)
    couplings: Dict[str, list] = field(default_factory=dict)


@dataclass(eq=False)
class ScalingDataset:
    records: List[DRecord]
    model: str = "ising"
    params: dict = field(default_factory=dict)

    def __post_init__(self):
        Ds = [r.D for r in self.records]
        if len(set(Ds)) != len(Ds):
            raise ValueError("bond dimensions in a dataset must be distinct")
        self.records = sorted(self.records, key=lambda r: r.D)

    @property
    def D_range(self):
        return [r.D for r in self.records]

    @property
    def mu2(self):
        return np.array([r.mu2 for r in self.records])

    def series(self, label):
        out = []
        for r in self.records:
            if label not in r.correlators:
                raise KeyError(f"no correlator {label!r} at D={r.D}")
            out.append(r.correlators[label])
        return out


def interval_lengths(x0):
    """Integer interval lengths bracketing ``x0`` (two on each side when possible)."""
    lo = max(1, int(np.floor(x0)) - 1)
    return list(range(lo, max(int(np.ceil(x0)) + 1, lo + 3) + 1))


def build_record(state, ops, connected=(), K=15, n_couplings=8, per_decade=24, s_max=S_MAX,
                 interval_scales=(), interpolant="spline", interval_max_D=32) -> DRecord:
    """Every observable the analysis needs from one converged state.

    ``ops`` maps labels to insertions; labels in ``connected`` get the
    connected correlator.
    """
    spec = transfer_spectrum(state, min(K, state.D**2))
    mu2 = correlation_length(spec)
    rec = DRecord(state.D, mu2, spec.lengths, spec.eigenvalues)
    for label, op in ops.items():
        xs = sample_grid(mu2, op.footprint, per_decade, s_max)
        rec.correlators[label] = two_point(state, op, xs, label in connected, interpolant, mu2)
        rec.couplings[label] = spectral_couplings(state, op, n_couplings)
    rec.half_line = half_line_entropy(state)
    xs = sorted({x for s in interval_scales for x in interval_lengths(s * mu2)})
    rec.intervals = [interval_entropy(state, x, interval_max_D) for x in xs]
    return rec


def default_s_grid(n=N_SCALES, s_min=S_MIN, s_max=S_MAX):
    return np.logspace(np.log10(s_min), np.log10(s_max), n)


# --------------------------------------------------------------------------
# exponents


@dataclass(frozen=True)
class CurvePoint:
    s: float
    fit: Optional[FitResult]
    skipped: bool = False
    reason: str = ""


def fes_fit_at(data: ScalingDataset, label, s, min_points=4) -> FitResult:
    mu2 = data.mu2
    logs_x, logs_g = [], []
    for series, m in zip(data.series(label), mu2):
        x = s * m
        lo, hi = series.x_range
        if x < lo or x > hi:
            raise ScaleOutOfRange(f"{label}: x = {x:.3g} outside sampled [{lo}, {hi}] at D={series.D}")
        logs_x.append(np.log(x))
        logs_g.append(float(series.log_interpolator()(np.log(x))))
    if len(logs_x) < min_points:
        raise InsufficientPoints(f"FES fit needs >= {min_points} bond dimensions, got {len(logs_x)}")
    return ols(logs_x, logs_g, scale=float(s))


def fes_exponent_curve(data: ScalingDataset, label, s_grid=None, min_points=4) -> List[CurvePoint]:
    """OLS slope of ``log G(s mu2)`` vs ``log(s mu2)`` at every scale in ``s_grid``.

    Scales where some bond dimension was not sampled far enough are kept as
    skipped points rather than dropped.
    """
    if len(data.records) < min_points:
        raise InsufficientPoints(f"FES needs >= {min_points} bond dimensions, got {len(data.records)}")
    s_grid = default_s_grid() if s_grid is None else np.asarray(s_grid, dtype=float)
    if np.any(s_grid <= 0):
        raise ValueError("scales must be positive")
    # build each interpolant once
    interps = [(ser.log_interpolator(), ser.x_range) for ser in data.series(label)]
    mu2 = data.mu2
    out = []
    for s in s_grid:
        xs = s * mu2
        bad = [i for i, (_, (lo, hi)) in enumerate(interps) if not lo <= xs[i] <= hi]
        if bad:
            out.append(CurvePoint(float(s), None, True, "scale out of sampled range"))
            continue
        lg = [float(f(np.log(x))) for (f, _), x in zip(interps, xs)]
        out.append(CurvePoint(float(s), ols(np.log(xs), lg, scale=float(s))))
    return out


def direct_exponent_curve(series: CorrelatorSeries, mu2: float) -> Callable[[float], float]:
    """Local log-log slope ``d log G / d log x`` at ``x = s mu2``."""
    deriv = series.log_interpolator().derivative()
    lo, hi = series.x_range

    def slope_at(s):
        x = s * mu2
        if x < lo or x > hi:
            raise ScaleOutOfRange(f"x = {x:.3g} outside sampled [{lo}, {hi}]")
        return float(deriv(np.log(x)))

    return slope_at


def find_s0(curve: List[CurvePoint], direct: Callable[[float], float], level=0.9973, atol=1e-10):
    """Largest grid scale below 1 where the direct slope lies in the FES band.

    Returns ``(s0, method)`` with method ``"scan"`` or ``"s0_fallback_1"``.
    """
    best = None
    for p in curve:
        if p.skipped or p.s >= 1.0:
            continue
        try:
            dval = direct(p.s)
        except ScaleOutOfRange:
            continue
        if abs(dval - p.fit.slope) <= p.fit.ci[level] + atol:
            best = p.s if best is None else max(best, p.s)
    if best is None:
        return 1.0, "s0_fallback_1"
    return best, "scan"


@dataclass(frozen=True)
class ExponentEstimate:
    label: str
    s_star: float
    two_delta: float
    ci: Dict[float, float]
    s0: float
    method: str
    fit: FitResult
    n_points: int

    def to_dict(self):
        return {
            "label": self.label,
            "s_star": self.s_star if np.isfinite(self.s_star) else "inf",
            "two_delta": self.two_delta,
            "ci95": self.ci[0.95],
            "ci9973": self.ci[0.9973],
            "s0": self.s0,
            "method": self.method,
            "n_points": self.n_points,
            "fit": self.fit.to_dict(),
        }


def _dominant_term(couplings, threshold=COUPLING_THRESHOLD):
    for lam, coef in couplings:
        if abs(coef) > threshold:
            return lam, coef
    return None


def infinite_scale_estimate(data: ScalingDataset, label, include_disconnected=None) -> FitResult:
    """Fit ``log|(l|O+|r_a)(l_a|O|r)|`` of the dominant coupled eigenvector vs ``log mu2``.

    By default the disconnected (lambda = 0) term counts only for series that
    were not made connected.
    """
    xs, ys = [], []
    for rec in data.records:
        if label not in rec.couplings:
            raise NoCoupling(f"no spectral couplings stored for {label!r} at D={rec.D}")
        series = rec.correlators.get(label)
        keep_disc = include_disconnected
        if keep_disc is None:
            keep_disc = series is None or not series.connected
        terms = [
            (lam, c) for lam, c in rec.couplings[label]
            if keep_disc or abs(lam) > 1e-10
        ]
        dom = _dominant_term(terms)
        if dom is None:
            raise NoCoupling(f"{label} couples to no eigenvector above threshold at D={rec.D}")
        xs.append(np.log(rec.mu2))
        ys.append(np.log(abs(dom[1])))
    return ols(xs, ys, scale=float("inf"))


def estimate_exponent(data: ScalingDataset, label, s_grid=None, level=0.9973, use_infinite=True) -> ExponentEstimate:
    """Scan, bound s0 with the direct approach at the largest D, pick the tightest fit above s0."""
    s_grid = default_s_grid() if s_grid is None else np.asarray(s_grid, dtype=float)
    curve = fes_exponent_curve(data, label, s_grid)
    top = data.records[-1]
    direct = direct_exponent_curve(top.correlators[label], top.mu2)
    s0, method = find_s0(curve, direct, level)

    candidates = [p for p in curve if not p.skipped and p.s >= s0]
    if use_infinite:
        try:
            candidates.append(CurvePoint(float("inf"), infinite_scale_estimate(data, label)))
        except NoCoupling:
            pass
    if not candidates:
        raise InsufficientPoints(f"{label}: no valid scale at or above s0 = {s0}")
    widths = np.array([p.fit.ci[level] for p in candidates])
    best_w = widths.min()
    ties = [p for p, w in zip(candidates, widths) if w <= best_w + TIE_ATOL]
    best = min(ties, key=lambda p: p.s)
    if not np.isfinite(best.s):
        method = "infinite_scale"
    return ExponentEstimate(
        label=label,
        s_star=best.s,
        two_delta=-best.fit.slope,
        ci=dict(best.fit.ci),
        s0=s0,
        method=method,
        fit=best.fit,
        n_points=best.fit.n_points,
    )


# --------------------------------------------------------------------------
# central charge and kappa


@dataclass(frozen=True)
class CentralChargeFit:
    source: str
    fit: FitResult
    c: float
    ci: Dict[float, float]
    scale: Optional[float] = None

    def to_dict(self):
        return {"source": self.source, "c": self.c, "ci95": self.ci[0.95], "ci9973": self.ci[0.9973],
                "scale": self.scale, "fit": self.fit.to_dict()}


def interval_entropy_at(rec: DRecord, x: float) -> float:
    """Interval entropy at a non-integer length, by interpolation in log x."""
    pts = sorted((e.x, e.S) for e in rec.intervals)
    if not pts:
        raise ScaleOutOfRange(f"no interval entropies at D={rec.D}")
    xs = np.array([p[0] for p in pts], dtype=float)
    ss = np.array([p[1] for p in pts])
    if x < xs[0] or x > xs[-1]:
        raise ScaleOutOfRange(f"interval length {x:.3g} outside sampled [{xs[0]}, {xs[-1]}] at D={rec.D}")
    if xs.size >= 4:
        return float(CubicSpline(np.log(xs), ss)(np.log(x)))
    return float(np.interp(np.log(x), np.log(xs), ss))


def fit_central_charge(data: ScalingDataset, source="half_line", scale=0.1) -> CentralChargeFit:
    """``c`` from S vs log mu2: 6 x slope for the half line, 3 x slope for an interval."""
    mu2 = data.mu2
    if source == "half_line":
        S = [rec.half_line.S if rec.half_line is not None else np.nan for rec in data.records]
        factor = 6.0
    elif source == "interval":
        S = [interval_entropy_at(rec, scale * rec.mu2) for rec in data.records]
        factor = 3.0
    else:
        raise ValueError(f"unknown entropy source {source!r}")
    if np.any(np.isnan(S)):
        raise InsufficientPoints("missing entropy records")
    fit = ols(np.log(mu2), S, scale=None if source == "half_line" else scale)
    return CentralChargeFit(source, fit, factor * fit.slope, {k: factor * v for k, v in fit.ci.items()},
                            None if source == "half_line" else scale)


def kappa_of_c(c):
    """Predicted ``mu2 ~ D^kappa`` exponent for central charge c."""
    return 6.0 / (c * (np.sqrt(12.0 / c) + 1.0))


def c_of_kappa(kappa, lo=0.05, hi=10.0, tol=1e-15):
    """Invert ``kappa_of_c`` by bisection; kappa(c) is decreasing on (0, inf)."""
    k_lo, k_hi = kappa_of_c(lo), kappa_of_c(hi)
    if not k_hi <= kappa <= k_lo:
        raise InversionOutOfRange(f"kappa = {kappa} outside [{k_hi:.4g}, {k_lo:.4g}]")
    a, b = lo, hi
    while b - a > tol * max(1.0, a):
        m = 0.5 * (a + b)
        if kappa_of_c(m) > kappa:
            a = m
        else:
            b = m
    return 0.5 * (a + b)


@dataclass(frozen=True)
class KappaFit:
    fit: FitResult
    kappa: float
    c_from_kappa: float
    c_from_kappa_ci: Dict[float, float]
    entropy_fit: Optional[FitResult]
    c_free: Optional[float]
    c_free_ci: Optional[Dict[float, float]]

    def to_dict(self):
        out = {
            "kappa": self.kappa,
            "kappa_ci95": self.fit.ci[0.95],
            "kappa_ci9973": self.fit.ci[0.9973],
            "c_from_kappa": self.c_from_kappa,
            "c_from_kappa_ci95": self.c_from_kappa_ci[0.95],
            "c_from_kappa_ci9973": self.c_from_kappa_ci[0.9973],
            "fit": self.fit.to_dict(),
        }
        if self.c_free is not None:
            out.update({
                "c_free": self.c_free,
                "c_free_ci95": self.c_free_ci[0.95],
                "c_free_ci9973": self.c_free_ci[0.9973],
                "entropy_fit": self.entropy_fit.to_dict(),
            })
        return out


def fit_kappa(data: ScalingDataset) -> KappaFit:
    """kappa from log mu2 vs log D, and two central-charge estimates built on it.

    ``c_from_kappa`` inverts the analytic kappa(c) relation; ``c_free`` uses
    the half-line entropy slope against log D with the fitted kappa.
    Half-widths are propagated to first order.
    """
    if len(data.records) < 4:
        raise InsufficientPoints("kappa fit needs >= 4 bond dimensions")
    logD = np.log(np.array(data.D_range, dtype=float))
    fit = ols(logD, np.log(data.mu2))
    kappa = fit.slope
    c_k = c_of_kappa(kappa)
    h = 1e-6 * max(1.0, abs(kappa))
    dcdk = (c_of_kappa(kappa + h) - c_of_kappa(kappa - h)) / (2 * h)
    c_k_ci = {lv: abs(dcdk) * w for lv, w in fit.ci.items()}

    ent_fit = c_free = c_free_ci = None
    if all(r.half_line is not None for r in data.records):
        ent_fit = ols(logD, [r.half_line.S for r in data.records])
        c_free = 6.0 * ent_fit.slope / kappa
        c_free_ci = {
            lv: float(np.hypot(6.0 / kappa * ent_fit.ci[lv], c_free / kappa * fit.ci[lv]))
            for lv in fit.ci
        }
    return KappaFit(fit, kappa, c_k, c_k_ci, ent_fit, c_free, c_free_ci)


# --------------------------------------------------------------------------
# spectrum diagnostics


@dataclass(frozen=True)
class RatioDiagnostic:
    rows: list
    drift: Dict[int, float]
    converged: Dict[int, bool]


def eigenvalue_ratio_diagnostic(data: ScalingDataset, K=15, tol=DRIFT_TOL) -> RatioDiagnostic:
    """``Re lambda_I / Re lambda_2`` per D, and the relative drift between the two largest D."""
    rows = []
    ratios = {}
    for rec in data.records:
        lam = np.asarray(rec.eigenvalues)
        kk = min(K, lam.size)
        for I in range(2, kk + 1):
            ratio = lam[I - 1].real / lam[1].real
            rows.append({"D": rec.D, "I": I, "ratio": float(ratio)})
            ratios.setdefault(I, {})[rec.D] = float(ratio)
    drift, conv = {}, {}
    if len(data.records) >= 2:
        d_prev, d_last = data.records[-2].D, data.records[-1].D
        for I, byD in ratios.items():
            if d_prev in byD and d_last in byD:
                drift[I] = abs(byD[d_last] - byD[d_prev]) / abs(byD[d_prev])
                conv[I] = drift[I] < tol
    return RatioDiagnostic(rows, drift, conv)


def length_scaling_slopes(data: ScalingDataset, K=15) -> Dict[int, FitResult]:
    """Slope of log mu_I vs log D for each I (compare with kappa)."""
    logD = np.log(np.array(data.D_range, dtype=float))
    out = {}
    kk = min(len(r.eigenvalues) for r in data.records)
    for I in range(2, min(K, kk) + 1):
        mus = [-1.0 / r.eigenvalues[I - 1].real for r in data.records]
        out[I] = ols(logD, np.log(mus))
    return out
