import numpy as np
import pytest

from fesmps.errors import NonHermitianHamiltonian
from fesmps.models import SX, SZ, SpinChainModel, build_model, ising


def test_ising_density_terms():
    m = ising(J=0.7, h=1.3)
    expect = -0.7 * np.kron(SX, SX) + 0.65 * (np.kron(SZ, np.eye(2)) + np.kron(np.eye(2), SZ))
    assert np.allclose(m.h2, expect)
    assert m.params == {"J": 0.7, "h": 1.3}
    assert m.h2_tensor.shape == (2, 2, 2, 2)


def test_non_hermitian_rejected():
    h2 = np.zeros((4, 4), dtype=complex)
    h2[0, 1] = 1.0
    with pytest.raises(NonHermitianHamiltonian):
        SpinChainModel("bad", 2, h2)


def test_wrong_shape_rejected():
    with pytest.raises(ValueError):
        SpinChainModel("bad", 2, np.eye(3))


def test_build_model_lookup():
    assert build_model("ising", J=1, h=2).params["h"] == 2.0
    with pytest.raises(ValueError):
        build_model("heisenberg")
