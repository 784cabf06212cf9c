"""Uniform (translation-invariant) matrix product states.

Tensors are stored as ``A[left, phys, right]``.  Vectors in the double layer
(the space the transfer operator acts on) are stored as ``D x D`` matrices
indexed ``[ket, bra]`` and paired without conjugation::

    (w|v) = sum_ij w[i, j] * v[i, j]

so the left fixed point ``l`` satisfies ``l = sum_s A^sT l conj(A^s)`` and is
the transpose of the usual ``sum_s A^s+ l A^s`` fixed point.  With this
convention ``trace(l.T @ r) == (l|r)``.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace
from typing import Optional

import numpy as np
import scipy.linalg as la
from scipy.sparse.linalg import ArpackNoConvergence, LinearOperator, eigs

from .errors import DegenerateDominantEigenvalue, EigensolverNoConvergence, KTooLarge

GAUGES = ("raw", "left-canonical", "right-canonical", "mixed-canonical")

NORM_TOL = 1e-12
FIXED_POINT_TOL = 1e-10
DEGENERACY_TOL = 1e-12

# below this D**2 a dense eigendecomposition is cheaper than ARPACK
_DENSE_CUTOFF = 64


@dataclass(frozen=True, eq=False)
class UniformMPS:
    """A translation-invariant MPS defined by a single site tensor.

    ``ar`` and ``c`` are only populated in the mixed-canonical gauge, where
    ``A`` holds the left-canonical tensor and ``A @ c == c @ ar``.
    """

    A: np.ndarray
    gauge: str = "raw"
    l: Optional[np.ndarray] = None
    r: Optional[np.ndarray] = None
    ar: Optional[np.ndarray] = field(default=None, repr=False)
    c: Optional[np.ndarray] = field(default=None, repr=False)

    def __post_init__(self):
        if self.A.ndim != 3 or self.A.shape[0] != self.A.shape[2]:
            raise ValueError(f"site tensor must have shape (D, d, D), got {self.A.shape}")
        if self.gauge not in GAUGES:
            raise ValueError(f"unknown gauge {self.gauge!r}")
        for arr in (self.A, self.l, self.r, self.ar, self.c):
            if arr is not None:
                arr.setflags(write=False)

    @property
    def D(self) -> int:
        return self.A.shape[0]

    @property
    def d(self) -> int:
        return self.A.shape[1]

    @classmethod
    def from_tensor(cls, A, normalize=True) -> "UniformMPS":
        """Wrap a raw tensor, optionally rescaling it so E has spectral radius 1."""
        A = np.array(A, dtype=complex)
        if not np.all(np.isfinite(A)):
            raise ValueError("site tensor contains non-finite entries")
        ev, l, r = fixed_points(A)
        if normalize:
            A = A / np.sqrt(abs(ev))
        return cls(A, "raw", l, r)


class TransferOperator:
    """Matrix-free ``E_O = sum_ij O_ij A^j (x) conj(A^i)``.

    With ``op=None`` this is the plain transfer operator E.  ``matvec`` acts
    on right vectors (E v), ``rmatvec`` on left vectors (v E); both cost
    O(D^3 d).
    """

    def __init__(self, A, op=None):
        self.A = np.asarray(A)
        self.D, self.d, _ = self.A.shape
        self.op = None if op is None else np.asarray(op, dtype=complex)
        self._Ac = self.A.conj()

    def _apply_op(self, X, axis):
        if self.op is None:
            return X
        return np.moveaxis(np.tensordot(self.op, X, axes=(1, axis)), 0, axis)

    def right(self, v):
        D, d = self.D, self.d
        v = np.asarray(v).reshape(D, D)
        # X[a, j, c] = sum_b A[a, j, b] v[b, c]
        X = (self.A.reshape(D * d, D) @ v).reshape(D, d, D)
        X = self._apply_op(X, 1)
        return X.reshape(D, d * D) @ self._Ac.reshape(D, d * D).T

    def left(self, w):
        D, d = self.D, self.d
        w = np.asarray(w).reshape(D, D)
        # X[j, b, c] = sum_a A[a, j, b] w[a, c]
        X = np.tensordot(self.A, w, axes=(0, 0))
        X = self._apply_op(X, 0)
        # w'[b, e] = sum_{i, c} X[i, b, c] conj(A)[c, i, e]
        return np.tensordot(X, self._Ac, axes=([0, 2], [1, 0]))

    def power_right(self, v, n):
        for _ in range(n):
            v = self.right(v)
        return v

    def power_left(self, w, n):
        for _ in range(n):
            w = self.left(w)
        return w

    def linear_operator(self, side="right") -> LinearOperator:
        n = self.D * self.D
        if side == "right":
            f = lambda x: self.right(x).ravel()  # noqa: E731
        else:
            f = lambda x: self.left(x).ravel()  # noqa: E731
        return LinearOperator((n, n), matvec=f, dtype=complex)

    def dense(self) -> np.ndarray:
        """The D^2 x D^2 matrix, rows (ket, bra) of the output index."""
        D = self.D
        op = np.eye(self.d) if self.op is None else self.op
        E = np.einsum("ij,ajb,cid->acbd", op, self.A, self._Ac, optimize=True)
        return E.reshape(D * D, D * D)


def build_transfer_operator(state, op=None) -> TransferOperator:
    A = state.A if isinstance(state, UniformMPS) else state
    return TransferOperator(A, op)


def _leading_eig(A, side, tol=1e-14):
    """Dominant eigenpair of E acting on ``side`` vectors."""
    T = TransferOperator(A)
    D = T.D
    if D * D <= _DENSE_CUTOFF:
        M = T.dense()
        if side == "left":
            M = M.T
        w, V = np.linalg.eig(M)
        i = np.argmax(abs(w))
        return w[i], V[:, i].reshape(D, D)
    v0 = np.eye(D, dtype=complex).ravel()
    try:
        w, V = eigs(T.linear_operator(side), k=1, which="LM", v0=v0, tol=tol, maxiter=10000)
    except ArpackNoConvergence as exc:
        raise EigensolverNoConvergence(
            "leading transfer eigenvector did not converge",
            {"side": side, "D": D, "converged": len(exc.eigenvalues)},
        ) from exc
    return w[0], V[:, 0].reshape(D, D)


def _hermitian_psd(m):
    tr = np.trace(m)
    m = m * (abs(tr) / tr)
    return 0.5 * (m + m.conj().T)


def fixed_points(A):
    """Return ``(eigenvalue, l, r)`` for the dominant eigenvalue of E.

    ``l`` and ``r`` are Hermitian PSD, normalized so that ``(l|r) = 1``.
    """
    A = np.asarray(A)
    ev, r = _leading_eig(A, "right")
    _, l = _leading_eig(A, "left")
    l, r = _hermitian_psd(l), _hermitian_psd(r)
    r = r / np.trace(r).real
    l = l / np.sum(l * r).real
    return ev, l, r


def _sqrt_psd(m, inverse=False):
    w, U = la.eigh(m)
    w = np.clip(w, 0.0, None)
    s = np.sqrt(w)
    if inverse:
        s = 1.0 / s
    return (U * s) @ U.conj().T


def _check_injective(A):
    T = TransferOperator(A)
    D = T.D
    if D == 1:
        return
    if D * D <= _DENSE_CUTOFF:
        w = np.linalg.eigvals(T.dense())
    else:
        w = eigs(T.linear_operator(), k=2, which="LM", return_eigenvectors=False, tol=1e-14)
    w = np.sort(abs(w))[::-1]
    if w[0] - w[1] < DEGENERACY_TOL:
        raise DegenerateDominantEigenvalue(
            f"two largest moduli of E coincide: {w[0]!r}, {w[1]!r}"
        )


def canonicalize(state: UniformMPS, mode: str = "mixed-canonical") -> UniformMPS:
    """Return the same physical state in the requested gauge.

    Raises DegenerateDominantEigenvalue for non-injective states.
    """
    if mode not in GAUGES:
        raise ValueError(f"unknown gauge {mode!r}")
    A = np.asarray(state.A, dtype=complex)
    _check_injective(A)
    ev, l, r = fixed_points(A)
    A = A / np.sqrt(abs(ev))
    if mode == "raw":
        return UniformMPS(A, "raw", l, r)

    D = A.shape[0]
    eye = np.eye(D, dtype=complex)
    # natural (conjugate-paired) left fixed point
    l_nat = l.T
    if mode == "left-canonical":
        X, Xi = _sqrt_psd(l_nat), _sqrt_psd(l_nat, inverse=True)
        AL = np.einsum("ab,bsc,cd->asd", X, A, Xi)
        r_new = X @ r @ X.conj().T
        r_new = _hermitian_psd(r_new)
        return UniformMPS(AL, mode, eye, r_new / np.trace(r_new).real)
    if mode == "right-canonical":
        Y, Yi = _sqrt_psd(r), _sqrt_psd(r, inverse=True)
        AR = np.einsum("ab,bsc,cd->asd", Yi, A, Y)
        l_new = _hermitian_psd((Y.conj().T @ l_nat @ Y).T)
        return UniformMPS(AR, mode, l_new / np.trace(l_new).real, eye)

    X, Xi = _sqrt_psd(l_nat), _sqrt_psd(l_nat, inverse=True)
    Y, Yi = _sqrt_psd(r), _sqrt_psd(r, inverse=True)
    U, S, Vh = la.svd(X @ Y)
    S = S / np.linalg.norm(S)
    AL = np.einsum("ab,bsc,cd->asd", U.conj().T @ X, A, Xi @ U)
    AR = np.einsum("ab,bsc,cd->asd", Vh @ Yi, A, Y @ Vh.conj().T)
    C = np.diag(S).astype(complex)
    return UniformMPS(AL, mode, eye, C @ C.conj().T, ar=AR, c=C)


def mixed_from_tensors(AL, AR, C) -> UniformMPS:
    """Assemble a mixed-canonical state from solver output, diagonalizing C."""
    U, S, Vh = la.svd(C)
    S = S / np.linalg.norm(S)
    AL = np.einsum("ab,bsc,cd->asd", U.conj().T, AL, U)
    AR = np.einsum("ab,bsc,cd->asd", Vh, AR, Vh.conj().T)
    C = np.diag(S).astype(complex)
    # exact fixed points of AL, so the state agrees with one rebuilt from AL alone
    ev, l, r = fixed_points(AL)
    AL = AL / np.sqrt(abs(ev))
    return UniformMPS(AL, "mixed-canonical", l, r, ar=AR, c=C)


def fixed_point_residuals(state: UniformMPS):
    """Frobenius norms of ``l E - l`` and ``E r - r``."""
    T = TransferOperator(state.A)
    return (
        float(np.linalg.norm(T.left(state.l) - state.l)),
        float(np.linalg.norm(T.right(state.r) - state.r)),
    )


@dataclass(frozen=True, eq=False)
class TransferSpectrum:
    """Leading eigen-data of ``T = log(E)`` (or of a string-modified E_O).

    ``left_vectors[I]`` and ``right_vectors[I]`` are D x D matrices with
    ``(l_I|r_J) = delta_IJ``; ``lengths[0]`` is ``inf``.
    """

    eigenvalues: np.ndarray
    left_vectors: np.ndarray
    right_vectors: np.ndarray
    transfer_eigenvalues: np.ndarray

    @property
    def lengths(self) -> np.ndarray:
        re = self.eigenvalues.real
        with np.errstate(divide="ignore"):
            mu = -1.0 / re
        mu[0] = np.inf
        return mu

    @property
    def K(self) -> int:
        return len(self.eigenvalues)


def _order(lam, rtol=1e-9):
    """Indices by descending real part; near-equal real parts by descending imaginary part."""
    idx = list(np.argsort(-lam.real, kind="stable"))
    out, group = [], []
    for i in idx:
        if group and abs(lam[i].real - lam[group[0]].real) > rtol * max(1.0, abs(lam[group[0]].real)):
            out += sorted(group, key=lambda j: -lam[j].imag)
            group = []
        group.append(i)
    out += sorted(group, key=lambda j: -lam[j].imag)
    return np.array(out, dtype=int)


def _match_left(w_right, w_left, VL):
    """Reorder left eigenvectors so that eigenvalues line up with ``w_right``."""
    out = np.empty((VL.shape[0], len(w_right)), dtype=complex)
    free = list(range(len(w_left)))
    for k, w in enumerate(w_right):
        j = min(free, key=lambda j: abs(w_left[j] - w))
        free.remove(j)
        out[:, k] = VL[:, j]
    return out


def transfer_spectrum(state: UniformMPS, K: int, op=None, tol=1e-13, dense=None) -> TransferSpectrum:
    """The K eigenvalues of log(E_O) with largest real part, with eigenvectors.

    Uses ARPACK (implicitly restarted Arnoldi) on the matrix-free operator
    unless ``dense`` is set or K is too close to D^2 for Arnoldi.
    """
    D = state.D
    n = D * D
    if K > n:
        raise KTooLarge(f"K={K} exceeds D^2={n}")
    if K < 1:
        raise ValueError("K must be positive")
    T = TransferOperator(state.A, op)
    if dense is None:
        dense = n <= _DENSE_CUTOFF or K >= n - 1
    if dense:
        M = T.dense()
        w, VL, VR = la.eig(M, left=True, right=True)
        # scipy's left vectors satisfy vl^H M = w vl^H; we pair without conj
        VL = VL.conj()
    else:
        # one extra mode so a conjugate pair split at K is resolved by the ordering rule
        k = min(K + 1, n - 2)
        ncv = min(n, max(2 * k + 1, 20))
        v0 = np.eye(D, dtype=complex).ravel()
        try:
            w, VR = eigs(T.linear_operator("right"), k=k, which="LM", v0=v0, tol=tol, ncv=ncv, maxiter=20000)
            wl, VL = eigs(T.linear_operator("left"), k=k, which="LM", v0=v0, tol=tol, ncv=ncv, maxiter=20000)
        except ArpackNoConvergence as exc:
            raise EigensolverNoConvergence(
                "transfer spectrum did not converge",
                {"D": D, "K": K, "converged": len(exc.eigenvalues), "ncv": ncv},
            ) from exc
        VL = _match_left(w, wl, VL)

    w = w.astype(complex)
    # negative real eigenvalues of E: put log on the +i*pi side of the branch cut
    on_cut = (w.real < 0) & (abs(w.imag) <= 1e-13 * abs(w))
    w[on_cut] = w[on_cut].real + 0j
    with np.errstate(divide="ignore"):
        lam = np.log(w)
    lam[on_cut] = np.log(abs(w[on_cut])) + 1j * np.pi
    idx = _order(lam)[:K]
    lam, w, VL, VR = lam[idx], w[idx], VL[:, idx], VR[:, idx]

    # biorthonormalize, then fix phases so the largest |entry| of r_I is real positive
    O = VL.T @ VR
    VL = VL @ np.linalg.inv(O).T
    for k in range(K):
        j = np.argmax(abs(VR[:, k]))
        ph = VR[j, k] / abs(VR[j, k])
        VR[:, k] /= ph
        VL[:, k] *= ph
    return TransferSpectrum(
        eigenvalues=lam,
        left_vectors=VL.T.reshape(K, D, D),
        right_vectors=VR.T.reshape(K, D, D),
        transfer_eigenvalues=w,
    )


def correlation_length(spectrum: TransferSpectrum) -> float:
    if spectrum.K < 2:
        raise ValueError("need at least two eigenvalues for a correlation length")
    return float(-1.0 / spectrum.eigenvalues[1].real)


def with_fixed_points(state: UniformMPS) -> UniformMPS:
    """Fill in l and r if the state was built without them."""
    if state.l is not None and state.r is not None:
        return state
    _, l, r = fixed_points(state.A)
    return replace(state, l=l, r=r)


def product_state(vec) -> UniformMPS:
    """D = 1 state with every site in ``vec``."""
    v = np.asarray(vec, dtype=complex)
    v = v / np.linalg.norm(v)
    one = np.ones((1, 1), dtype=complex)
    return UniformMPS(v.reshape(1, -1, 1), "mixed-canonical", one, one, ar=v.reshape(1, -1, 1), c=one)


def random_state(D, d=2, seed=None, real=False) -> UniformMPS:
    rng = np.random.default_rng(seed)
    A = rng.normal(size=(D, d, D))
    if not real:
        A = A + 1j * rng.normal(size=(D, d, D))
    return UniformMPS.from_tensor(A / np.sqrt(D))
