"""Argument checks shared by the estimator wrappers."""

from __future__ import annotations

import numbers

import numpy as np

from .models import SpinChainModel, build_model


def check_positive_int(value, name):
    if isinstance(value, bool) or not isinstance(value, numbers.Integral) or value < 1:
        raise ValueError(f"{name} must be a positive integer, got {value!r}")
    return int(value)


def check_positive_float(value, name):
    try:
        v = float(value)
    except (TypeError, ValueError):
        raise ValueError(f"{name} must be a positive number, got {value!r}") from None
    if not np.isfinite(v) or v <= 0:
        raise ValueError(f"{name} must be a positive number, got {value!r}")
    return v


def check_bond_dimensions(dims):
    dims = [check_positive_int(D, "bond dimension") for D in dims]
    if any(b <= a for a, b in zip(dims, dims[1:])):
        raise ValueError(f"bond dimensions must be strictly ascending, got {dims}")
    return dims


def check_model(model, **params) -> SpinChainModel:
    if isinstance(model, SpinChainModel):
        return model
    if isinstance(model, str):
        return build_model(model, **params)
    raise TypeError(f"model must be a SpinChainModel or a model name, got {type(model).__name__}")


def check_scale_range(s_min, s_max, n_scales):
    s_min = check_positive_float(s_min, "s_min")
    s_max = check_positive_float(s_max, "s_max")
    if s_max <= s_min:
        raise ValueError("s_max must exceed s_min")
    n = check_positive_int(n_scales, "n_scales")
    if n < 2:
        raise ValueError("n_scales must be at least 2")
    return s_min, s_max, n


def check_dataset(data, label=None):
    from .fes import ScalingDataset

    if not isinstance(data, ScalingDataset):
        raise TypeError(f"expected a ScalingDataset, got {type(data).__name__}")
    if label is not None:
        missing = [r.D for r in data.records if label not in r.correlators]
        if missing:
            raise ValueError(f"operator {label!r} missing at D = {missing}")
    return data
