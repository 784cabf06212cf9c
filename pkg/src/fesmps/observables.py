"""Correlators, entanglement entropies and Schmidt spectra of a uniform MPS."""

from __future__ import annotations

from dataclasses import dataclass, field
from math import comb
from typing import Optional

import numpy as np
import scipy.linalg as la
from scipy.interpolate import CubicSpline

from .errors import (
    BondDimensionTooLarge,
    NonPositiveFixedPoint,
    NotNormalized,
    OverlapError,
    UnsupportedLevel,
)
from .models import ID2, SM, SP, SX, SZ
from .umps import TransferOperator, UniformMPS, transfer_spectrum

KINDS = ("onsite", "two_site", "string_z", "string_z_plus", "string_z_minus", "derivative")
PSD_TOL = 1e-12
MAX_INTERVAL_D = 32


@dataclass(frozen=True, eq=False)
class OperatorInsertion:
    """An operator whose two-point function with itself we evaluate.

    ``matrix`` is d x d for on-site kinds and string endpoints, d^2 x d^2 for
    ``two_site``.  String kinds replace E between the endpoints by E_z.  For
    ``derivative`` the insertion is the ``level``-th finite difference of
    ``base``.
    """

    kind: str
    label: str
    matrix: Optional[np.ndarray] = None
    base: Optional["OperatorInsertion"] = None
    level: int = 0
    string: Optional[np.ndarray] = field(default=None, repr=False)

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ValueError(f"unknown operator kind {self.kind!r}")
        if self.kind == "derivative" and (self.base is None or self.level < 1):
            raise ValueError("derivative insertions need a base operator and level >= 1")
        if self.kind in ("onsite", "string_z_plus", "string_z_minus"):
            m = np.asarray(self.matrix)
            if m.ndim != 2 or m.shape[0] != m.shape[1]:
                raise ValueError("on-site operator must be a square matrix")
        if self.kind == "two_site":
            m = np.asarray(self.matrix)
            n = int(round(np.sqrt(m.shape[0])))
            if m.shape != (n * n, n * n):
                raise ValueError("two-site operator must be d^2 x d^2")

    @property
    def footprint(self) -> int:
        """Sites covered by one insertion (0 for the bare string)."""
        if self.kind == "two_site":
            return 2
        if self.kind == "string_z":
            return 0
        if self.kind == "derivative":
            return self.base.footprint + self.level
        return 1

    @property
    def is_string(self) -> bool:
        return self.kind.startswith("string")


def onsite(matrix, label="O") -> OperatorInsertion:
    return OperatorInsertion("onsite", label, np.asarray(matrix, dtype=complex))


def two_site(matrix, label="O2") -> OperatorInsertion:
    return OperatorInsertion("two_site", label, np.asarray(matrix, dtype=complex))


def discrete_derivative_series(base: OperatorInsertion, level: int, label=None) -> OperatorInsertion:
    """Insertion for the ``level``-th lattice derivative of ``base``.

    Realized exactly as a (level + footprint)-site block with coefficients
    ``(-1)^(n-k) C(n, k)`` at offset k.
    """
    if level not in (1, 2, 3):
        raise UnsupportedLevel(f"derivative level must be 1, 2 or 3, got {level}")
    if base.kind not in ("onsite", "two_site"):
        raise UnsupportedLevel(f"derivatives are defined for local operators, not {base.kind}")
    prefix = "d" if level == 1 else f"d{level}"
    return OperatorInsertion("derivative", label or prefix + base.label, base=base, level=level)


def derivative_coefficients(level: int):
    return np.array([(-1) ** (level - k) * comb(level, k) for k in range(level + 1)], dtype=float)


def ising_operators(J=1.0):
    """The Ising scaling operators, keyed by their CLI names.

    The energy operator is the combination of bond and field terms that is odd
    under Kramers-Wannier duality, so its relative sign follows the sign of J.
    """
    sigma = onsite(SX, "sigma")
    bond_sign = 1.0 if J >= 0 else -1.0
    eps = two_site(bond_sign * np.kron(SX, SX) + np.kron(SZ, ID2), "eps")
    return {
        "sigma": sigma,
        "eps": eps,
        "mu": OperatorInsertion("string_z", "mu", string=SZ),
        "psi": OperatorInsertion("string_z_plus", "psi", SP, string=SZ),
        "psibar": OperatorInsertion("string_z_minus", "psibar", SM, string=SZ),
        "dsigma": discrete_derivative_series(sigma, 1, "dsigma"),
        "d2sigma": discrete_derivative_series(sigma, 2, "d2sigma"),
        "d3sigma": discrete_derivative_series(sigma, 3, "d3sigma"),
        "deps": discrete_derivative_series(eps, 1, "deps"),
    }


# --------------------------------------------------------------------------
# insertion vectors


def _block_right(A, matrix, nsites, v):
    """Apply the nsites-site generalized transfer of ``matrix`` to right vector v."""
    D, d, _ = A.shape
    if nsites == 1:
        return TransferOperator(A, matrix).right(v)
    T2 = np.einsum("asx,xtb->astb", A, A)
    h = np.asarray(matrix).reshape(d, d, d, d)
    hT = np.einsum("stuv,auvb->astb", h, T2)
    return np.einsum("astb,bc,dstc->ad", hT, v, T2.conj(), optimize=True)


def _block_left(A, matrix, nsites, w):
    D, d, _ = A.shape
    if nsites == 1:
        return TransferOperator(A, matrix).left(w)
    T2 = np.einsum("asx,xtb->astb", A, A)
    h = np.asarray(matrix).reshape(d, d, d, d)
    hT = np.einsum("stuv,auvb->astb", h, T2)
    return np.einsum("ac,astb,cstd->bd", w, hT, T2.conj(), optimize=True)


def _dag(m):
    return np.asarray(m).conj().T


def insertion_vectors(state: UniformMPS, op: OperatorInsertion):
    """``(left, right, middle)`` with ``G(x) = (left| middle^(x - w) |right)``.

    ``left`` carries the adjoint insertion, ``right`` the insertion itself and
    ``middle`` is E or the string-modified E_z.
    """
    A, l, r = state.A, state.l, state.r
    E = TransferOperator(A)
    if op.kind == "onsite":
        return TransferOperator(A, _dag(op.matrix)).left(l), TransferOperator(A, op.matrix).right(r), E
    if op.kind == "two_site":
        return _block_left(A, _dag(op.matrix), 2, l), _block_right(A, op.matrix, 2, r), E
    if op.kind == "string_z":
        return l, r, TransferOperator(A, op.string)
    if op.kind in ("string_z_plus", "string_z_minus"):
        left = TransferOperator(A, op.matrix).left(l)
        right = TransferOperator(A, _dag(op.matrix)).right(r)
        return left, right, TransferOperator(A, op.string)
    # derivative block: base at offset k inside n + w sites
    base, n = op.base, op.level
    coeffs = derivative_coefficients(n)
    bl, br, _ = insertion_vectors(state, base)
    left = np.zeros_like(l)
    right = np.zeros_like(r)
    for k, c in enumerate(coeffs):
        right = right + c * E.power_right(br, k)
        left = left + c * E.power_left(bl, n - k)
    return left, right, E


def _check_normalized(state, tol=1e-8):
    if state.l is None or state.r is None:
        raise NotNormalized("state carries no fixed points")
    E = TransferOperator(state.A)
    if np.linalg.norm(E.right(state.r) - state.r) > tol * max(1.0, np.linalg.norm(state.r)):
        raise NotNormalized("r is not a unit-eigenvalue fixed point of E")
    if abs(np.sum(state.l * state.r) - 1.0) > 1e-8:
        raise NotNormalized("(l|r) != 1")


# --------------------------------------------------------------------------
# correlators


@dataclass(frozen=True, eq=False)
class CorrelatorSeries:
    """Sampled two-point function of one operator at one bond dimension."""

    label: str
    D: int
    x: np.ndarray
    G: np.ndarray
    connected: bool
    disconnected: complex = 0.0
    interpolant: str = "spline"
    mu2: Optional[float] = None

    @property
    def abs(self):
        return np.abs(self.G)

    @property
    def arg(self):
        return np.angle(self.G)

    def _fit_data(self):
        a = np.abs(self.G)
        keep = a > 0
        return np.log(self.x[keep].astype(float)), np.log(a[keep])

    def log_interpolator(self):
        """Callable ``log x -> log|G|``; ``.derivative()`` gives the local slope."""
        lx, lg = self._fit_data()
        if self.interpolant == "spline":
            return CubicSpline(lx, lg)
        return _LinearLogInterp(lx, lg)

    def __call__(self, x):
        lx = np.log(np.asarray(x, dtype=float))
        return np.exp(self.log_interpolator()(lx))

    @property
    def x_range(self):
        lx, _ = self._fit_data()
        return float(np.exp(lx[0])), float(np.exp(lx[-1]))


class _LinearLogInterp:
    def __init__(self, lx, lg):
        self.lx, self.lg = lx, lg

    def __call__(self, t):
        return np.interp(t, self.lx, self.lg)

    def derivative(self):
        # centered difference on the sample grid, then linear in between
        slopes = np.gradient(self.lg, self.lx)
        return _LinearLogInterp(self.lx, slopes)


def sample_grid(mu2, footprint=1, per_decade=24, s_max=40.0):
    """Integer separations, log-spaced from 1 to ``s_max * mu2``."""
    x_max = max(s_max * mu2, footprint + 2)
    n = int(np.ceil(per_decade * np.log10(x_max))) + 1
    xs = np.unique(np.round(np.logspace(0, np.log10(x_max), n)).astype(int))
    xs = xs[xs >= max(footprint, 1)]
    return xs


def two_point(state: UniformMPS, op: OperatorInsertion, x_list, connected=False, interpolant="spline", mu2=None):
    """``G(x) = (l| O^+ E^(x - w) O |r)`` at each separation in ``x_list``.

    With ``connected=True`` the dominant term ``(l|O^+|r)(l|O|r)`` is projected
    out at every step (only for non-string operators).
    """
    _check_normalized(state)
    xs = np.asarray(sorted(set(int(x) for x in x_list)))
    w = op.footprint
    if xs.size == 0 or xs[0] < max(w, 1):
        raise OverlapError(f"{op.label}: separations must be >= {max(w, 1)}, got {xs[:1]}")
    left, right, mid = insertion_vectors(state, op)
    l, r = state.l, state.r
    project = connected and not op.is_string
    disc = complex(np.sum(left * r) * np.sum(l * right)) if not op.is_string else 0.0
    cur = left.copy()
    if project:
        cur = cur - np.sum(cur * r) * l
    out = np.empty(xs.size, dtype=complex)
    pos = w
    for k, x in enumerate(xs):
        while pos < x:
            cur = mid.left(cur)
            if project:
                cur = cur - np.sum(cur * r) * l
            pos += 1
        out[k] = np.sum(cur * right)
    return CorrelatorSeries(op.label, state.D, xs, out, bool(project), disc, interpolant, mu2)


def two_point_spectral(state: UniformMPS, op: OperatorInsertion, x_list, connected=False):
    """Same correlator from the full eigen-expansion of the middle operator."""
    left, right, mid = insertion_vectors(state, op)
    M = mid.dense()
    w, VL, VR = la.eig(M, left=True, right=True)
    VL = VL.conj()
    VL = VL / np.sum(VL * VR, axis=0)
    cl = left.ravel() @ VR
    cr = VL.T @ right.ravel()
    if connected and not op.is_string:
        i = np.argmin(abs(w - 1.0))
        cl[i] = 0.0
    xs = np.asarray(x_list)
    return np.array([np.sum(cl * w ** (x - op.footprint) * cr) for x in xs])


def spectral_couplings(state: UniformMPS, op: OperatorInsertion, K=8):
    """``(lambda_I, (left|r_I)(l_I|right))`` for the K leading modes of the middle operator.

    These are the terms of ``G(x) = sum_I c_I exp(lambda_I (x - w))``.
    """
    left, right, _ = insertion_vectors(state, op)
    K = min(K, state.D**2)
    spec = transfer_spectrum(state, K, op=op.string if op.is_string else None)
    out = []
    for lam, lv, rv in zip(spec.eigenvalues, spec.left_vectors, spec.right_vectors):
        out.append((complex(lam), complex(np.sum(left * rv) * np.sum(lv * right))))
    return out


# --------------------------------------------------------------------------
# expectation values and entropies


def onsite_expectation(state: UniformMPS, op) -> complex:
    """``(l| E_O |r) / (l|r)``."""
    v = TransferOperator(state.A, op).right(state.r)
    return complex(np.sum(state.l * v) / np.sum(state.l * state.r))


@dataclass(frozen=True, eq=False)
class EntropyRecord:
    D: int
    kind: str
    S: float
    schmidt: np.ndarray
    x: Optional[float] = None

    def to_row(self):
        return {"D": self.D, "kind": self.kind, "x": self.x, "S": self.S}


def _entropy(p):
    p = p[p > 0]
    return float(-np.sum(p * np.log(p)))


def _psd_sqrt(m, name):
    w, U = la.eigh(0.5 * (m + m.conj().T))
    if w.min() < -PSD_TOL:
        raise NonPositiveFixedPoint(f"{name} has eigenvalue {w.min():.3e}")
    return (U * np.sqrt(np.clip(w, 0.0, None))) @ U.conj().T


def half_line_entropy(state: UniformMPS) -> EntropyRecord:
    """Entanglement of a half-infinite line from the D x D matrix sqrt(l^T) sqrt(r)."""
    X = _psd_sqrt(state.l.T, "l")
    Y = _psd_sqrt(state.r, "r")
    lam = la.svdvals(X @ Y)
    lam = lam / np.linalg.norm(lam)
    return EntropyRecord(state.D, "half_line", _entropy(lam**2), lam)


def _transfer_power(A, x):
    """Dense E^x as a (D, D, D, D) array indexed [a, abar, b, bbar]."""
    D = A.shape[0]
    if x > 64:
        E = TransferOperator(A).dense()
        return np.linalg.matrix_power(E, x).reshape(D, D, D, D)
    F = np.eye(D * D, dtype=complex).reshape(D, D, D, D)
    Ac = A.conj()
    for _ in range(x):
        F = np.tensordot(np.tensordot(F, A, axes=(2, 0)), Ac, axes=([2, 3], [0, 1]))
    return F


def interval_entropy(state: UniformMPS, x: int, max_D: int = MAX_INTERVAL_D) -> EntropyRecord:
    """Entanglement of ``x`` contiguous sites; O(D^6) in time, O(D^4) in memory."""
    if x < 1:
        raise ValueError("interval length must be >= 1")
    D = state.D
    if D > max_D:
        raise BondDimensionTooLarge(f"interval entropy capped at D={max_D}, got D={D}")
    F = _transfer_power(np.asarray(state.A), int(x))
    # reshuffle E^x[(a, abar), (b, bbar)] -> M[(a, b), (abar, bbar)]
    M = F.transpose(0, 2, 1, 3).reshape(D * D, D * D)
    K = np.kron(_psd_sqrt(state.l.T, "l"), _psd_sqrt(state.r.T, "r"))
    rho = K @ M @ K.conj().T
    p = la.eigvalsh(0.5 * (rho + rho.conj().T))
    if p.min() < -PSD_TOL * max(1.0, p.max()):
        raise NonPositiveFixedPoint(f"interval density matrix eigenvalue {p.min():.3e}")
    p = np.clip(p, 0.0, None)
    p = np.sort(p / p.sum())[::-1]
    return EntropyRecord(D, "interval", _entropy(p), np.sqrt(p), float(x))
