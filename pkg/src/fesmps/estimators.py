"""scikit-learn style wrappers around the solver and the scaling fits.

``fit`` returns ``self``; learned quantities end in an underscore.
"""

from __future__ import annotations

from sklearn.base import BaseEstimator
from sklearn.utils.validation import check_is_fitted

from ._validation import (
    check_dataset,
    check_model,
    check_positive_float,
    check_positive_int,
    check_scale_range,
)
from .fes import default_s_grid, estimate_exponent, fes_exponent_curve, fit_central_charge
from .isolve import solve_ground_state
from .umps import correlation_length, transfer_spectrum


class GroundStateSolver(BaseEstimator):
    def __init__(self, model="ising", J=1.0, h=1.0, D=16, tol=1e-8, max_iter=2000, seed=0):
        self.model = model
        self.J = J
        self.h = h
        self.D = D
        self.tol = tol
        self.max_iter = max_iter
        self.seed = seed

    def fit(self, X=None, y=None, init=None):
        """Solve for the ground state; ``X`` and ``y`` are ignored."""
        model = check_model(self.model, J=self.J, h=self.h)
        D = check_positive_int(self.D, "D")
        tol = check_positive_float(self.tol, "tol")
        state, report = solve_ground_state(model, D, tol, init=init, seed=self.seed,
                                           max_iter=check_positive_int(self.max_iter, "max_iter"))
        self.state_ = state
        self.report_ = report
        self.energy_density_ = report.energy_density
        self.converged_ = report.converged
        self.correlation_length_ = correlation_length(transfer_spectrum(state, 2)) if D > 1 else 0.0
        return self

    def score(self, X=None, y=None):
        """Negative energy density, so larger is better."""
        check_is_fitted(self, "state_")
        return -self.energy_density_


class FESExponentEstimator(BaseEstimator):
    def __init__(self, operator="sigma", s_min=0.05, s_max=40.0, n_scales=160, use_infinite=True):
        self.operator = operator
        self.s_min = s_min
        self.s_max = s_max
        self.n_scales = n_scales
        self.use_infinite = use_infinite

    def fit(self, X, y=None):
        """``X`` is a ScalingDataset containing the operator's correlators."""
        data = check_dataset(X, self.operator)
        s_min, s_max, n = check_scale_range(self.s_min, self.s_max, self.n_scales)
        grid = default_s_grid(n, s_min, s_max)
        est = estimate_exponent(data, self.operator, grid, use_infinite=self.use_infinite)
        self.estimate_ = est
        self.two_delta_ = est.two_delta
        self.ci_ = dict(est.ci)
        self.s_star_ = est.s_star
        self.s0_ = est.s0
        self.method_ = est.method
        self.curve_ = fes_exponent_curve(data, self.operator, grid)
        return self


class CentralChargeEstimator(BaseEstimator):
    def __init__(self, source="half_line", scale=0.1):
        self.source = source
        self.scale = scale

    def fit(self, X, y=None):
        data = check_dataset(X)
        if self.source not in ("half_line", "interval"):
            raise ValueError(f"source must be 'half_line' or 'interval', got {self.source!r}")
        res = fit_central_charge(data, self.source, check_positive_float(self.scale, "scale"))
        self.result_ = res
        self.c_ = res.c
        self.ci_ = dict(res.ci)
        self.r2_ = res.fit.r2
        return self
