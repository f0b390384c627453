import numpy as np
import pytest
import scipy.stats

from qtps import dynamics, potentials
from qtps.dynamics import Configuration, LangevinParams
from qtps.errors import IntegrationError, ValidationError


def test_step_pure_diffusion_moments():
    # zero force: <dq> = 0, Var per coordinate = 2 D dt
    flat = potentials.constant(0.0, dim=2)
    lp = LangevinParams(mass=1.0, gamma=1.0, kbt=0.5, dt=0.01, dim=2)
    rng = dynamics.rng_from_seed(42)
    q = Configuration(np.zeros(2))
    steps = np.array([dynamics.step(q, flat, lp, rng).q for _ in range(40000)])
    var = steps.var(axis=0)
    expected = 2 * lp.diffusion * lp.dt
    assert np.allclose(steps.mean(axis=0), 0.0, atol=4 * np.sqrt(expected / len(steps)))
    assert np.allclose(var, expected, rtol=0.05)


def test_fluctuation_dissipation_msd():
    # acceptance: per-coordinate MSD per step within 5% of 2 D dt over >= 1e5 steps
    flat = potentials.constant(0.0, dim=2)
    lp = LangevinParams(mass=2.0, gamma=0.5, kbt=0.3, dt=0.02, dim=2)
    rng = dynamics.rng_from_seed(7)
    traj = dynamics.burst(Configuration(np.zeros(2)), 100_000, flat, lp, rng)
    disp = np.diff(traj.points, axis=0)
    msd = (disp**2).mean(axis=0)
    assert np.allclose(msd, 2 * lp.diffusion * lp.dt, rtol=0.05)


def test_harmonic_stationary_variance():
    # long run -> empirical variance matches k_B T / kappa within 3 SE
    kappa = 4.0
    pot = potentials.Harmonic(kappa=[kappa])
    lp = LangevinParams(mass=1.0, gamma=1.0, kbt=0.5, dt=0.01, dim=1)
    rng = dynamics.rng_from_seed(3)
    traj = dynamics.burst(Configuration(np.zeros(1)), 200_000, pot, lp, rng)
    x = traj.points[5000:, 0]
    target = lp.kbt / kappa
    # batch means standard error (correlated samples)
    batches = x[: (len(x) // 50) * 50].reshape(50, -1)
    bvars = batches.var(axis=1)
    se = bvars.std(ddof=1) / np.sqrt(len(bvars))
    assert abs(x.var() - target) < 3 * se + 1e-12


def test_harmonic_boltzmann_ks():
    # acceptance: KS vs analytic Gaussian passes at 1% on thinned samples
    kappa = 2.0
    pot = potentials.Harmonic(kappa=[kappa])
    lp = LangevinParams(mass=1.0, gamma=1.0, kbt=0.4, dt=0.01, dim=1)
    rng = dynamics.rng_from_seed(11)
    traj = dynamics.burst(Configuration(np.zeros(1)), 100_000, pot, lp, rng)
    tau = lp.mass * lp.gamma / (kappa * lp.dt)   # relaxation time in steps
    stride = int(5 * tau)
    x = traj.points[2000::stride, 0]
    sigma = np.sqrt(lp.kbt / kappa)
    stat = scipy.stats.kstest(x, scipy.stats.norm(0.0, sigma).cdf).statistic
    critical = scipy.stats.ksone.ppf(0.99, len(x))
    assert stat < critical


def test_double_well_crossing():
    # k_BT = 0.15, 1e6 steps from (-1, 0): at least one crossing of x = 0
    dw = potentials.DoubleWell(a=5.0)
    lp = LangevinParams(mass=1.0, gamma=1.0, kbt=0.15, dt=0.01, dim=2)
    rng = dynamics.rng_from_seed(123)
    traj = dynamics.burst(Configuration(np.array([-1.0, 0.0])), 1_000_000, dw, lp, rng)
    x = traj.points[:, 0]
    crossings = np.sum((x[:-1] < 0) & (x[1:] >= 0))
    assert crossings > 0


def test_burst_preconditions_and_determinism():
    flat = potentials.constant(0.0, dim=2)
    lp = LangevinParams(dt=0.01, dim=2)
    with pytest.raises(ValidationError):
        dynamics.burst(Configuration(np.zeros(2)), 0, flat, lp, dynamics.rng_from_seed(0))
    t1 = dynamics.burst(Configuration(np.zeros(2)), 100, flat, lp, dynamics.rng_from_seed(5))
    t2 = dynamics.burst(Configuration(np.zeros(2)), 100, flat, lp, dynamics.rng_from_seed(5))
    assert np.array_equal(t1.points, t2.points)
    assert len(t1) == 101
    assert np.allclose(np.diff(t1.times), lp.dt)


def test_step_error_on_nonfinite():
    bad = potentials.CustomPolynomial([(1e308, (8, 0))], dim=2)
    lp = LangevinParams(dt=0.01, dim=2)
    with pytest.raises(IntegrationError) as err:
        dynamics.step(Configuration(np.array([50.0, 0.0])), bad, lp, dynamics.rng_from_seed(0))
    assert err.value.point is not None


def test_effective_potential_values():
    lp = LangevinParams(mass=1.0, gamma=1.0, kbt=0.5, dt=0.01, dim=2)
    flat = potentials.constant(3.0, dim=2)
    assert dynamics.effective_potential(Configuration(np.zeros(2)), flat, lp) == 0.0

    # harmonic U = 1/2 m w^2 x^2 at origin: -hbar_eff w^2 / (2 gamma)
    omega2 = 3.0
    lp1 = LangevinParams(mass=2.0, gamma=1.5, kbt=0.5, dt=0.01, dim=1)
    pot = potentials.Harmonic(kappa=[lp1.mass * omega2])
    got = dynamics.effective_potential(Configuration(np.zeros(1)), pot, lp1)
    assert got == pytest.approx(-lp1.hbar_eff * omega2 / (2 * lp1.gamma), rel=1e-12)


def test_effective_potential_finite_difference_oracle(rng):
    # acceptance: double-well at 20 random points matches the same formula
    # with a central-difference gradient, 1e-4 relative
    dw = potentials.DoubleWell(a=5.0)
    lp = LangevinParams(mass=1.0, gamma=2.0, kbt=0.3, dt=0.01, dim=2)
    h = 1e-6
    for _ in range(20):
        q = rng.uniform(-1.5, 1.5, size=2)
        got = dynamics.effective_potential(Configuration(q), dw, lp)
        grad = np.zeros(2)
        for i in range(2):
            qp, qm = q.copy(), q.copy()
            qp[i] += h
            qm[i] -= h
            grad[i] = (dw.energy(qp) - dw.energy(qm)) / (2 * h)
        lap = dw.laplacian(q)
        expected = (grad @ grad - lp.hbar_eff * lp.gamma * lap) / (2 * lp.mass * lp.gamma**2)
        assert got == pytest.approx(expected, rel=1e-4, abs=1e-10)


def test_effective_potential_quadratic_closed_form(rng):
    # pure quadratic: formula equals the closed-form expansion to 1e-12 relative
    kappa = np.array([2.0, 5.0])
    pot = potentials.Harmonic(kappa=kappa)
    lp = LangevinParams(mass=1.3, gamma=0.8, kbt=0.25, dt=0.01, dim=2)
    for _ in range(10):
        q = rng.normal(size=2)
        got = dynamics.effective_potential(Configuration(q), pot, lp)
        closed = (np.sum((kappa * q) ** 2) - lp.hbar_eff * lp.gamma * kappa.sum()) / (
            2 * lp.mass * lp.gamma**2
        )
        assert got == pytest.approx(closed, rel=1e-12)


def test_smoothing_mean_and_idempotence(rng):
    vals = np.array([0.0, 2.0])
    out = dynamics.smooth_effective_potential(vals, [[0, 1], [0, 1]])
    assert np.allclose(out, [1.0, 1.0])

    const = np.full(5, 3.0)
    nbrs = [[i, (i + 1) % 5] for i in range(5)]
    assert np.allclose(dynamics.smooth_effective_potential(const, nbrs), 3.0)

    rand = rng.normal(size=7)
    ident = dynamics.smooth_effective_potential(rand, [[i] for i in range(7)])
    assert np.array_equal(ident, rand)

    with pytest.raises(ValidationError):
        dynamics.smooth_effective_potential(rand, [[i] for i in range(6)] + [[]])
    with pytest.raises(ValidationError):
        dynamics.smooth_effective_potential(vals, [[1], [0, 1]])


def test_trajectory_csv_round_trip(tmp_path):
    flat = potentials.constant(0.0, dim=2)
    lp = LangevinParams(dt=0.05, dim=2)
    traj = dynamics.burst(Configuration(np.zeros(2)), 10, flat, lp, dynamics.rng_from_seed(1))
    path = tmp_path / "traj.csv"
    traj.to_csv(path)
    lines = path.read_text().strip().split("\n")
    assert lines[0] == "t,x0,x1"
    data = np.array([[float(v) for v in ln.split(",")] for ln in lines[1:]])
    assert np.array_equal(data[:, 1:], traj.points)
    assert np.array_equal(data[:, 0], traj.times)


def test_langevin_params_validation():
    with pytest.raises(ValidationError):
        LangevinParams(mass=0.0)
    lp = LangevinParams(mass=2.0, gamma=4.0, kbt=1.0)
    assert lp.diffusion == pytest.approx(1.0 / 8.0)
    assert lp.hbar_eff == pytest.approx(0.5)
