"""Two-site Hamiltonian densities for translation-invariant spin chains."""

from __future__ import annotations

from dataclasses import dataclass, field
import numpy as np

from .errors import NonHermitianHamiltonian

# basis order is the sigma^z eigenbasis (|up>, |down>)
SX = np.array([[0, 1], [1, 0]], dtype=complex)
SY = np.array([[0, -1j], [1j, 0]], dtype=complex)
SZ = np.array([[1, 0], [0, -1]], dtype=complex)
SP = np.array([[0, 1], [0, 0]], dtype=complex)
SM = np.array([[0, 0], [1, 0]], dtype=complex)
ID2 = np.eye(2, dtype=complex)


@dataclass(frozen=True, eq=False)
class SpinChainModel:
    """A nearest-neighbour chain ``H = sum_i h2(i, i+1)``."""

    name: str
    d: int
    h2: np.ndarray
    params: dict = field(default_factory=dict)

    def __post_init__(self):
        h2 = np.asarray(self.h2, dtype=complex)
        n = self.d * self.d
        if h2.shape != (n, n):
            raise ValueError(f"h2 must be {n}x{n}, got {h2.shape}")
        if np.max(abs(h2 - h2.conj().T), initial=0.0) > 1e-14:
            raise NonHermitianHamiltonian("two-site Hamiltonian density is not Hermitian")

    @property
    def h2_tensor(self) -> np.ndarray:
        """``h[s1, s2, t1, t2] = <s1 s2| h2 |t1 t2>``."""
        d = self.d
        return np.asarray(self.h2, dtype=complex).reshape(d, d, d, d)


def ising(J=1.0, h=1.0) -> SpinChainModel:
    """Transverse-field Ising chain ``sum_i -J sx_i sx_{i+1} + h sz_i``.

    The field is split symmetrically over the two sites of each bond.
    """
    h2 = -J * np.kron(SX, SX) + 0.5 * h * (np.kron(SZ, ID2) + np.kron(ID2, SZ))
    return SpinChainModel("ising", 2, h2, {"J": float(J), "h": float(h)})


MODELS = {"ising": ising}


def build_model(name, **params) -> SpinChainModel:
    try:
        factory = MODELS[name]
    except KeyError:
        raise ValueError(f"unknown model {name!r}; available: {sorted(MODELS)}") from None
    return factory(**params)
