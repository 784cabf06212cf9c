"""Variational ground states of nearest-neighbour chains in the thermodynamic limit.

The optimizer is a VUMPS-style tangent-space fixed-point iteration on the
mixed-canonical tensors (AL, AC, C, AR).  No symmetry is imposed: at finite
bond dimension the optimum of the critical Ising chain is weakly
symmetry-broken, and restricting to Z2-symmetric tensors drives the search
into non-injective cat states.
"""

from __future__ import annotations

import logging
import time
from dataclasses import dataclass, field
from typing import Optional

import numpy as np
import scipy.linalg as la
from scipy.sparse.linalg import LinearOperator, eigsh, gmres

from .errors import InitDimensionMismatch
from .models import SX, SpinChainModel
from .umps import UniformMPS, canonicalize, mixed_from_tensors

log = logging.getLogger(__name__)

DEFAULT_TOL = 1e-8
DEFAULT_MAX_ITER = 2000
STALL_WINDOW = 50
STALL_RATIO = 1e-3


@dataclass(frozen=True)
class SolveReport:
    D: int
    energy_density: float
    gradient_norm: float
    iterations: int
    converged: bool
    wall_time: float
    seed: Optional[int] = None
    restarted: bool = False
    error: Optional[str] = None
    tol: Optional[float] = None
    history: tuple = field(default=(), repr=False, compare=False)

    def to_dict(self):
        out = {k: getattr(self, k) for k in (
            "D", "energy_density", "gradient_norm", "iterations", "converged",
            "wall_time", "seed", "restarted", "error", "tol")}
        return out


# --------------------------------------------------------------------------
# contractions


def _two_site(A, B):
    return np.einsum("asx,xtb->astb", A, B, optimize=True)


def _apply_h(h, T2):
    return np.einsum("stuv,auvb->astb", h, T2, optimize=True)


def expectation_two_site(state: UniformMPS, h2) -> complex:
    """``(l| E_h |r)`` for a two-site operator on a normalized state."""
    d = state.d
    h = np.asarray(h2).reshape(d, d, d, d)
    T2 = _two_site(state.A, state.A)
    val = np.einsum("ac,astb,bd,cstd->", state.l, _apply_h(h, T2), state.r, T2.conj(), optimize=True)
    norm = np.sum(state.l * state.r)
    return val / norm


def _energy(h, AL, AC):
    T2 = _two_site(AL, AC)
    return float(np.real(np.einsum("astb,astb->", _apply_h(h, T2), T2.conj())))


def _left_env(h, AL, C, x0, tol):
    D = AL.shape[0]
    T2 = _two_site(AL, AL)
    hL = np.einsum("astb,astc->bc", _apply_h(h, T2), T2.conj(), optimize=True)
    r = C @ C.conj().T
    eye = np.eye(D)
    hL = hL - np.sum(hL * r) * eye
    ALc = AL.conj()

    def mv(x):
        x = x.reshape(D, D)
        xE = np.tensordot(np.tensordot(AL, x, axes=(0, 0)), ALc, axes=([0, 2], [1, 0]))
        return (x - xE + np.sum(x * r) * eye).ravel()

    op = LinearOperator((D * D, D * D), matvec=mv, dtype=complex)
    x, _ = gmres(op, hL.ravel(), x0=None if x0 is None else x0.ravel(), rtol=tol, atol=0.0, restart=min(D * D, 40), maxiter=200)
    x = x.reshape(D, D)
    return 0.5 * (x + x.conj().T)


def _right_env(h, AR, C, x0, tol):
    D = AR.shape[0]
    T2 = _two_site(AR, AR)
    hR = np.einsum("astb,cstb->ac", _apply_h(h, T2), T2.conj(), optimize=True)
    l = (C.conj().T @ C).T
    eye = np.eye(D)
    hR = hR - np.sum(hR * l) * eye
    ARc = AR.conj()

    def mv(x):
        x = x.reshape(D, D)
        Ex = (AR.reshape(-1, D) @ x).reshape(D, -1) @ ARc.reshape(D, -1).T
        return (x - Ex + np.sum(l * x) * eye).ravel()

    op = LinearOperator((D * D, D * D), matvec=mv, dtype=complex)
    x, _ = gmres(op, hR.ravel(), x0=None if x0 is None else x0.ravel(), rtol=tol, atol=0.0, restart=min(D * D, 40), maxiter=200)
    x = x.reshape(D, D)
    return 0.5 * (x + x.conj().T)


def _h_ac(h, AL, AR, Lh, Rh, AC):
    ALc, ARc = AL.conj(), AR.conj()
    t1 = np.einsum("xsa,xstb->atb", ALc, _apply_h(h, _two_site(AL, AC)), optimize=True)
    t2 = np.einsum("astd,btd->asb", _apply_h(h, _two_site(AC, AR)), ARc, optimize=True)
    t3 = np.tensordot(Lh, AC, axes=(0, 0))
    t4 = np.tensordot(AC, Rh, axes=(2, 0))
    return t1 + t2 + t3 + t4


def _h_c(h, AL, AR, Lh, Rh, C):
    T2 = _two_site(np.tensordot(AL, C, axes=(2, 0)), AR)
    t1 = np.einsum("xsa,xstd,btd->ab", AL.conj(), _apply_h(h, T2), AR.conj(), optimize=True)
    return t1 + Lh.T @ C + C @ Rh


def _lowest(apply, x0, tol):
    """Lowest eigenvector of a Hermitian map, seeded with ``x0``."""
    shape = x0.shape
    n = x0.size

    def mv(v):
        return apply(v.reshape(shape)).ravel()

    if n <= 8:
        M = np.column_stack([mv(e) for e in np.eye(n, dtype=complex)])
        _, V = la.eigh(0.5 * (M + M.conj().T))
        v = V[:, 0]
    else:
        op = LinearOperator((n, n), matvec=mv, dtype=complex)
        _, V = eigsh(op, k=1, which="SA", v0=x0.ravel(), tol=tol, ncv=min(n, 20), maxiter=5000)
        v = V[:, 0]
    return (v / np.linalg.norm(v)).reshape(shape)


def _polar_l(AC, C):
    D, d, _ = AC.shape
    Uac, _ = la.polar(AC.reshape(D * d, D))
    Uc, _ = la.polar(C)
    return (Uac @ Uc.conj().T).reshape(D, d, D)


def _polar_r(AC, C):
    D, d, _ = AC.shape
    Uac, _ = la.polar(AC.reshape(D, d * D), side="left")
    Uc, _ = la.polar(C, side="left")
    return (Uc.conj().T @ Uac).reshape(D, d, D)


def _gauge_fix(A):
    """Mixed-canonical tensors (AL, AR, C); C is not diagonalized."""
    st = canonicalize(UniformMPS(np.asarray(A, dtype=complex)), "raw")
    A = st.A
    w, U = la.eigh(st.l.T)
    X = (U * np.sqrt(np.clip(w, 1e-300, None))) @ U.conj().T
    Xi = (U / np.sqrt(np.clip(w, 1e-300, None))) @ U.conj().T
    w, U = la.eigh(st.r)
    Y = (U * np.sqrt(np.clip(w, 1e-300, None))) @ U.conj().T
    Yi = (U / np.sqrt(np.clip(w, 1e-300, None))) @ U.conj().T
    AL = np.einsum("ab,bsc,cd->asd", X, A, Xi)
    AR = np.einsum("ab,bsc,cd->asd", Yi, A, Y)
    C = X @ Y
    return AL, AR, C / np.linalg.norm(C)


def _random_tensor(D, d, rng):
    return (rng.normal(size=(D, d, D)) + 1j * rng.normal(size=(D, d, D))) / np.sqrt(D)


# --------------------------------------------------------------------------
# driver


def _vumps(h, AL, AR, C, tol, max_iter, rng, allow_restart=True):
    AC = np.tensordot(AL, C, axes=(2, 0))
    Lh = Rh = None
    history = []
    restarted = False
    grad = np.inf
    it = 0
    for it in range(1, max_iter + 1):
        e = _energy(h, AL, AC)
        ht = h - e * np.eye(h.shape[0] * h.shape[1]).reshape(h.shape)
        prec = max(min(1e-6, 1e-2 * grad), 1e-14)
        Lh = _left_env(ht, AL, C, Lh, prec)
        Rh = _right_env(ht, AR, C, Rh, prec)

        HAC = _h_ac(ht, AL, AR, Lh, Rh, AC)
        HC = _h_c(ht, AL, AR, Lh, Rh, C)
        grad = float(np.linalg.norm(HAC - np.tensordot(AL, HC, axes=(2, 0))))
        history.append(grad)
        if grad <= tol:
            break

        if (
            allow_restart
            and not restarted
            and it > STALL_WINDOW
            and grad > (1.0 - STALL_RATIO) * history[-STALL_WINDOW - 1]
        ):
            log.info("gradient stalled at %.3e after %d iterations; restarting with noise", grad, it)
            restarted = True
            AL, AR, C = _gauge_fix(AL + 1e-3 * _random_tensor(AL.shape[0], AL.shape[1], rng))
            AC = np.tensordot(AL, C, axes=(2, 0))
            Lh = Rh = None
            continue

        eig_tol = max(min(1e-4, 1e-3 * grad), 1e-14)
        AC = _lowest(lambda x: _h_ac(ht, AL, AR, Lh, Rh, x), AC, eig_tol)
        C = _lowest(lambda x: _h_c(ht, AL, AR, Lh, Rh, x), C, eig_tol)
        AL = _polar_l(AC, C)
        AR = _polar_r(AC, C)
    return AL, AR, C, grad, it, restarted, history


def _expand(A, D_new, rng, noise):
    """Embed ``A`` into a larger bond space and add noise of amplitude ``noise``."""
    D, d, _ = A.shape
    out = np.zeros((D_new, d, D_new), dtype=complex)
    out[:D, :, :D] = A
    return out + noise * _random_tensor(D_new, d, rng) * np.sqrt(D_new)


def _h_two_site(h, AL, AR, Lh, Rh, AC2):
    """Effective Hamiltonian on a two-site centre tensor ``AC2[a, s, t, b]``."""
    ALc, ARc = AL.conj(), AR.conj()
    mid = _apply_h(h, AC2)
    T3 = np.einsum("xra,astb->xrstb", AL, AC2, optimize=True)
    left = np.einsum("xrp,xrqtb->pqtb", ALc, np.einsum("rsuv,xuvtb->xrstb", h, T3, optimize=True), optimize=True)
    T3 = np.einsum("astc,cub->astub", AC2, AR, optimize=True)
    right = np.einsum("astub,cub->astc", np.einsum("tuvw,asvwb->astub", h, T3, optimize=True), ARc, optimize=True)
    return mid + left + right + np.tensordot(Lh, AC2, axes=(0, 0)) + np.tensordot(AC2, Rh, axes=(3, 0))


def _expand_subspace(h, AL, AR, C, D_new):
    """Grow the bond space along the dominant two-site gradient directions.

    New left (right) directions come from the null space of AL (AR) and the
    singular vectors of the projected two-site gradient; the new blocks of C
    start at zero and are filled by the next iteration.  Returns ``None`` when
    the null space is too small for the requested growth.
    """
    D, d, _ = AL.shape
    delta = D_new - D
    if delta > D * (d - 1):
        return None
    AC = np.tensordot(AL, C, axes=(2, 0))
    e = _energy(h, AL, AC)
    ht = h - e * np.eye(d * d).reshape(h.shape)
    Lh = _left_env(ht, AL, C, None, 1e-12)
    Rh = _right_env(ht, AR, C, None, 1e-12)
    AC2 = _two_site(AC, AR)
    H2 = _h_two_site(ht, AL, AR, Lh, Rh, AC2).reshape(D * d, d * D)
    NL = la.null_space(AL.reshape(D * d, D).conj().T)
    W = la.null_space(AR.reshape(D, d * D)).conj().T
    U, _, Vh = la.svd(NL.conj().T @ H2 @ W.conj().T)
    AL2 = np.zeros((D_new, d, D_new), dtype=complex)
    AL2[:D, :, :D] = AL
    AL2[:D, :, D:] = (NL @ U[:, :delta]).reshape(D, d, delta)
    AR2 = np.zeros((D_new, d, D_new), dtype=complex)
    AR2[:D, :, :D] = AR
    AR2[D:, :, :D] = (Vh[:delta] @ W).reshape(delta, d, D)
    C2 = np.zeros((D_new, D_new), dtype=complex)
    C2[:D, :D] = C
    return AL2, AR2, C2


def solve_ground_state(
    model: SpinChainModel,
    D: int,
    tol: float = DEFAULT_TOL,
    init: Optional[UniformMPS] = None,
    seed: Optional[int] = 0,
    max_iter: int = DEFAULT_MAX_ITER,
    bias: Optional[np.ndarray] = None,
):
    """Variational ground state at bond dimension ``D``.

    Returns ``(state, report)``; ``state`` is normalized and mixed-canonical.
    An ``init`` with smaller bond dimension is embedded and padded with noise
    of amplitude 1e-3.  ``bias`` is an on-site vector mixed into the cold-start
    tensor to select a symmetry-broken branch.
    """
    if tol <= 0:
        raise ValueError("tol must be positive")
    if D < 1:
        raise ValueError("D must be a positive integer")
    d = model.d
    if init is not None and init.d != d:
        raise InitDimensionMismatch(f"init has d={init.d}, model has d={d}")
    t0 = time.perf_counter()
    rng = np.random.default_rng(seed)
    h = model.h2_tensor

    start = None
    if init is not None:
        A0 = np.asarray(init.A, dtype=complex)
        if A0.shape[0] > D:
            raise InitDimensionMismatch(f"init has D={A0.shape[0]} > requested D={D}")
        if A0.shape[0] < D:
            start = _expand_subspace(h, *_gauge_fix(A0), D)
            if start is None:
                A0 = _expand(A0, D, rng, 1e-3)
    else:
        A0 = _random_tensor(D, d, rng)
        if bias is not None:
            A0 = 1e-2 * A0
            A0[0, :, 0] += np.asarray(bias, dtype=complex)

    AL, AR, C = start if start is not None else _gauge_fix(A0)
    AL, AR, C, grad, it, restarted, history = _vumps(h, AL, AR, C, tol, max_iter, rng)
    state = mixed_from_tensors(AL, AR, C)
    energy = float(np.real(expectation_two_site(state, model.h2)))
    report = SolveReport(
        D=D,
        energy_density=energy,
        gradient_norm=grad,
        iterations=it,
        converged=bool(grad <= tol),
        wall_time=time.perf_counter() - t0,
        seed=seed,
        restarted=restarted,
        tol=tol,
        history=tuple(history),
    )
    log.info("D=%d e=%.14f grad=%.2e iters=%d", D, energy, grad, it)
    return state, report


def sweep_bond_dimensions(model, D_list, tol=DEFAULT_TOL, seed=0, max_iter=DEFAULT_MAX_ITER, callback=None):
    """Solve at each D in ascending order, warm-starting from the previous D.

    Failures are recorded as ``(None, report)`` with ``report.error`` set and
    the sweep continues from the last good state.  ``callback(state, report)``
    is invoked after each D (used for per-D persistence).
    """
    D_list = list(D_list)
    if any(b <= a for a, b in zip(D_list, D_list[1:])):
        raise ValueError("D_list must be strictly ascending")
    results = []
    prev = None
    for D in D_list:
        try:
            state, report = solve_ground_state(
                model, D, tol=tol, init=prev, seed=seed, max_iter=max_iter
            )
        except Exception as exc:  # noqa: BLE001 - sweep continues past per-D failures
            log.error("solve failed at D=%d: %s", D, exc)
            report = SolveReport(D, float("nan"), float("nan"), 0, False, 0.0, seed, error=repr(exc))
            results.append((None, report))
            continue
        results.append((state, report))
        prev = state
        if callback is not None:
            callback(state, report)
    return results


def order_parameter_sweep(
    D,
    h_grid,
    J=1.0,
    tol=1e-10,
    seed=0,
    zero_tol=1e-5,
    max_iter=DEFAULT_MAX_ITER,
    model_factory=None,
    stop_after=None,
):
    """``<sx>`` along ``h_grid`` on the symmetry-broken branch.

    Each point is warm-started from the previous one.  Returns a dict with the
    table rows, and ``h_star``: the midpoint between the last grid point with
    ``<sx> > zero_tol`` and the first with ``|<sx>| <= zero_tol``.  With
    ``stop_after = n`` the scan ends after n consecutive zero points that
    follow a nonzero one.
    """
    from .models import ising
    from .observables import onsite_expectation

    h_grid = np.asarray(h_grid, dtype=float)
    if np.any(np.diff(h_grid) <= 0):
        raise ValueError("h_grid must be ascending")
    factory = model_factory or (lambda h: ising(J=J, h=h))
    bias = np.array([1.0, 1.0]) / np.sqrt(2.0)
    rows = []
    prev = None
    zeros = 0
    for h in h_grid:
        model = factory(float(h))
        state, report = solve_ground_state(
            model, D, tol=tol, init=prev, seed=seed,
            bias=None if prev is not None else bias, max_iter=max_iter,
        )
        m = float(np.real(onsite_expectation(state, SX)))
        if m < 0:
            m = -m
        rows.append({"h": float(h), "sx": m, "energy_density": report.energy_density,
                     "gradient_norm": report.gradient_norm, "converged": report.converged})
        prev = state
        if m <= zero_tol and len(rows) > 1 and (zeros or rows[-2]["sx"] > zero_tol):
            zeros += 1
        if stop_after is not None and zeros >= stop_after:
            break
    h_star = None
    for a, b in zip(rows, rows[1:]):
        if a["sx"] > zero_tol and b["sx"] <= zero_tol:
            h_star = 0.5 * (a["h"] + b["h"])
    return {"D": D, "rows": rows, "h_star": h_star}


def solver_report_consistency(state, report, model, atol=1e-12):
    """Difference between the reported energy density and a fresh evaluation."""
    return abs(float(np.real(expectation_two_site(state, model.h2))) - report.energy_density)
