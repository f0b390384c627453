import numpy as np
import pytest

from qtps import potentials
from qtps.errors import ValidationError


def finite_diff_gradient(pot, q, h=1e-6):
    g = np.zeros_like(q, dtype=float)
    for i in range(len(q)):
        qp, qm = q.copy(), q.copy()
        qp[i] += h
        qm[i] -= h
        g[i] = (pot.energy(qp) - pot.energy(qm)) / (2 * h)
    return g


def finite_diff_laplacian(pot, q, h=1e-4):
    lap = 0.0
    e0 = pot.energy(q)
    for i in range(len(q)):
        qp, qm = q.copy(), q.copy()
        qp[i] += h
        qm[i] -= h
        lap += (pot.energy(qp) - 2 * e0 + pot.energy(qm)) / h**2
    return lap


ALL_POTENTIALS = [
    potentials.DoubleWell(a=5.0),
    potentials.DoubleWell(a=1.3),
    potentials.MuellerBrown(scale=0.01),
    potentials.Harmonic(kappa=[2.0, 7.0]),
    potentials.CustomPolynomial([(1.0, (4, 0)), (-2.0, (2, 0)), (1.5, (1, 2)), (0.3, (0, 0))], dim=2),
]


@pytest.mark.parametrize("pot", ALL_POTENTIALS, ids=lambda p: p.kind)
def test_gradient_matches_finite_differences(pot, rng):
    # spec invariant: 1e-5 relative at step 1e-6
    for _ in range(20):
        q = rng.uniform(-1.5, 1.5, size=pot.dim)
        g = pot.gradient(q)
        fd = finite_diff_gradient(pot, q)
        scale = max(np.linalg.norm(fd), 1.0)
        assert np.allclose(g, fd, atol=1e-5 * scale)


@pytest.mark.parametrize("pot", ALL_POTENTIALS, ids=lambda p: p.kind)
def test_laplacian_matches_finite_differences(pot, rng):
    for _ in range(10):
        q = rng.uniform(-1.2, 1.2, size=pot.dim)
        lap = pot.laplacian(q)
        fd = finite_diff_laplacian(pot, q)
        assert lap == pytest.approx(fd, rel=1e-3, abs=1e-3)


def test_double_well_closed_forms():
    dw = potentials.DoubleWell(a=5.0)
    assert dw.energy(np.array([1.0, 0.0])) == 0.0
    assert dw.energy(np.array([0.0, 0.0])) == 1.0
    assert np.allclose(dw.gradient(np.array([0.0, 0.0])), [0.0, 0.0])
    assert dw.laplacian(np.array([0.0, 0.0])) == pytest.approx(-4.0 + 10.0)


def test_constant_potential_is_flat(rng):
    flat = potentials.constant(2.5, dim=3)
    q = rng.normal(size=3)
    assert flat.energy(q) == 2.5
    assert np.all(flat.gradient(q) == 0.0)
    assert flat.laplacian(q) == 0.0


def test_harmonic_broadcast_and_validation():
    h = potentials.Harmonic(kappa=3.0, dim=4)
    assert h.dim == 4
    assert h.laplacian(np.zeros(4)) == pytest.approx(12.0)
    with pytest.raises(ValidationError):
        potentials.Harmonic(kappa=[-1.0])
    with pytest.raises(ValidationError):
        potentials.DoubleWell(a=0.0)


def test_factory_round_trip():
    for pot in ALL_POTENTIALS:
        clone = potentials.make_potential(pot.kind, pot.params())
        q = np.full(pot.dim, 0.37)
        assert clone.energy(q) == pytest.approx(pot.energy(q), rel=1e-12)
    with pytest.raises(ValidationError):
        potentials.make_potential("nope", {})


def test_dimension_check():
    dw = potentials.DoubleWell()
    with pytest.raises(ValidationError):
        dw.energy(np.zeros(3))
