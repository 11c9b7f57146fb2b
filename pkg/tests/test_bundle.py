import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

import floquet_sep as fs
from floquet_sep.coefficients import HullPoint

B0 = HullPoint(())

positive_vec = st.lists(st.floats(1e-3, 1e3), min_size=2, max_size=12).map(np.array)


# ---------------------------------------------------------------- metric


def test_hilbert_projective_identity(rng):
    u = rng.uniform(0.1, 5.0, 17)
    assert fs.hilbert_metric(u, 3.7 * u) == pytest.approx(0.0, abs=1e-12)


def test_hilbert_direct_formula():
    assert fs.hilbert_metric(np.array([1.0, 2.0]), np.array([2.0, 1.0])) == pytest.approx(
        np.log(4.0), rel=1e-14
    )


def test_hilbert_support_mismatch_and_zero():
    assert fs.hilbert_metric(np.array([1.0, 0.0]), np.array([1.0, 1.0])) == np.inf
    assert fs.hilbert_metric(np.zeros(3), np.zeros(3)) == 0.0
    assert fs.hilbert_metric(np.array([0.0, 1.0]), np.array([0.0, 2.0])) == pytest.approx(0.0)
    with pytest.raises(ValueError):
        fs.hilbert_metric(np.array([-1.0, 1.0]), np.array([1.0, 1.0]))


@given(u=positive_vec, alpha=st.floats(1e-6, 1e6), beta=st.floats(1e-6, 1e6))
@settings(max_examples=100, deadline=None)
def test_hilbert_scale_invariance(u, alpha, beta):
    w = u[::-1].copy()
    d0 = fs.hilbert_metric(u, w)
    d1 = fs.hilbert_metric(alpha * u, beta * w)
    assert d1 == pytest.approx(d0, abs=1e-10)


def test_birkhoff_non_expansion_random_matrices(rng):
    # oracle: entrywise positive matrices never expand the metric
    for _ in range(200):
        n = int(rng.integers(2, 8))
        M = rng.uniform(0.05, 1.0, (n, n))
        u = rng.uniform(0.01, 10.0, n)
        w = rng.uniform(0.01, 10.0, n)
        d0 = fs.hilbert_metric(u, w)
        d1 = fs.hilbert_metric(M @ u, M @ w)
        assert d1 <= d0 * (1 + 1e-12) + 1e-14


# ---------------------------------------------------------------- fibers


def test_principal_vector_heat_is_constant(prop_heat, mesh41):
    v, growth = fs.principal_vector(prop_heat, B0)
    assert mesh41.norm_l1(v - 1.0) < 1e-10
    assert abs(growth) < 1e-10


def test_principal_vector_autonomous_robin_matches_eigenvector(mesh41):
    # oracle: dominant eigenvector of the dense time-one matrix
    import scipy.linalg

    op = fs.build_operator(mesh41, 1.0, (1.0, 1.0))
    field = fs.field_from_profiles(mesh41, "constant")
    prop = fs.Propagator(op, field, fs.PropagatorConfig(dt=1e-2))
    v, growth = fs.principal_vector(prop, B0)
    M = prop.time_one_map(B0)
    vals, vecs = scipy.linalg.eig(M)
    lead = int(np.argmax(np.abs(vals)))
    ref = np.real(vecs[:, lead])
    if ref.sum() < 0:
        ref = -ref
    ref /= mesh41.norm_l1(ref)
    assert mesh41.norm_l1(v - ref) < 1e-8
    assert growth == pytest.approx(np.log(np.abs(vals[lead])), abs=1e-8)


def test_principal_vector_space_independent_reaction(mesh41, op_neumann):
    # scalar reaction factor cannot bend the ray: v is constant at every phase
    field = fs.field_from_profiles(
        mesh41, "time-periodic", modes=[(1.0, fs.Profile("const", 1.0))]
    )
    prop = fs.Propagator(op_neumann, field, fs.PropagatorConfig(dt=1e-2))
    for theta in (0.0, 0.37, 0.75):
        v, _ = fs.principal_vector(prop, HullPoint((theta,)))
        assert mesh41.norm_l1(v - 1.0) < 1e-10


def test_dual_vector_heat_constant_and_normalized(prop_heat, mesh41):
    fib = fs.principal_fiber(prop_heat, B0)
    assert mesh41.norm_l1(fib.vstar - 1.0) < 1e-8
    assert mesh41.pairing(fib.vstar, fib.v) == pytest.approx(1.0, abs=1e-12)


def test_fiber_contract(periodic_fiber, prop_periodic, mesh41):
    fib = periodic_fiber
    assert fib.v.min() > 0
    assert fib.vstar.min() > 0
    assert mesh41.norm_l1(fib.v) == pytest.approx(1.0, abs=1e-12)
    assert mesh41.pairing(fib.vstar, fib.v) == pytest.approx(1.0, abs=1e-12)


def test_dual_invariance_one_adjoint_factor(prop_periodic, periodic_fiber, mesh41):
    # transpose of the time-one map carries vstar at the advanced point back
    # onto vstar(b); the coefficient is 1-periodic so both fibers coincide
    pulled = prop_periodic.propagate_adjoint(
        periodic_fiber.b, 0.0, 1.0, periodic_fiber.vstar
    )
    pulled /= mesh41.norm_l1(pulled)
    ref = periodic_fiber.vstar / mesh41.norm_l1(periodic_fiber.vstar)
    assert mesh41.norm_l1(pulled - ref) < 1e-9


def test_nonconvergence_reports_increments(prop_periodic):
    with pytest.raises(fs.NumericalError, match="increments"):
        fs.principal_vector(prop_periodic, HullPoint((0.1,)), tol=1e-16, max_back=4)


# ---------------------------------------------------------------- projection


def test_project_fixed_point_and_kernel(prop_periodic, periodic_fiber, mesh41, rng):
    u1, u2 = fs.project(mesh41, periodic_fiber, periodic_fiber.v)
    assert mesh41.norm_l1(u1) < 1e-12
    assert np.allclose(u2, periodic_fiber.v, atol=1e-12)
    w = rng.standard_normal(41)
    k1, _ = fs.project(mesh41, periodic_fiber, w)
    kk1, kk2 = fs.project(mesh41, periodic_fiber, k1)
    assert mesh41.norm_l1(kk2) < 1e-12 * mesh41.norm_l1(k1)
    assert np.allclose(kk1, k1, atol=1e-12)


def test_project_idempotent_and_annihilated(periodic_fiber, mesh41, rng):
    for _ in range(20):
        u = rng.standard_normal(41)
        u1, u2 = fs.project(mesh41, periodic_fiber, u)
        assert abs(mesh41.pairing(periodic_fiber.vstar, u1)) < 1e-12 * mesh41.norm_l1(u)
        r1, r2 = fs.project(mesh41, periodic_fiber, u2)
        assert mesh41.norm_l1(r2 - u2) < 1e-12 * (mesh41.norm_l1(u2) + 1e-30)


def test_projection_ratio_bound(periodic_fiber, mesh41, rng):
    # for nonnegative w the complement fraction obeys
    # ||(I-P)w|| / ||Pw|| <= (1 + sup ||Pw||/||w||) / inf <vstar, w>/||w||
    # with the sup/inf taken over the same draw
    ratios, norms, lows = [], [], []
    for _ in range(200):
        w = rng.uniform(0.0, 1.0, 41)
        u1, u2 = fs.project(mesh41, periodic_fiber, w)
        ratios.append(mesh41.norm_l1(u1) / mesh41.norm_l1(u2))
        norms.append(mesh41.norm_l1(u2) / mesh41.norm_l1(w))
        lows.append(mesh41.pairing(periodic_fiber.vstar, w) / mesh41.norm_l1(w))
    bound = (1 + max(norms)) / min(lows)
    assert max(ratios) <= bound * (1 + 1e-12)


# ---------------------------------------------------------------- separation


def test_separation_autonomous_matches_gap_oracle(prop_heat, rng):
    # oracle: eigenvalue moduli of the dense time-one matrix
    fib = fs.principal_fiber(prop_heat, B0)
    est = fs.estimate_separation(prop_heat, [fib], k_max=6, trials=2, rng=rng)
    growth, ratio = fs.time_one_gap(prop_heat, B0)
    assert est.lam == pytest.approx(ratio, rel=1e-6)
    assert est.mu == pytest.approx(-np.log(ratio), rel=1e-6)
    assert est.residual < 1e-3
    assert est.dprime >= 1.0


def test_separation_periodic_scenario(prop_periodic, periodic_fiber, rng):
    est = fs.estimate_separation(prop_periodic, [periodic_fiber], k_max=10, trials=3, rng=rng)
    growth, ratio = fs.time_one_gap(prop_periodic, periodic_fiber.b)
    assert 0 < est.lam < 1
    assert est.lam == pytest.approx(ratio, rel=1e-2)
    assert est.residual < 0.05
    assert est.K > 0
    assert 0 < est.L <= 1 + est.N
    # r_k decays monotonically
    tab = est.table
    for (s, t) in {(int(r[0]), int(r[1])) for r in tab}:
        rs = tab[(tab[:, 0] == s) & (tab[:, 1] == t)]
        rs = rs[np.argsort(rs[:, 2])]
        assert np.all(np.diff(rs[:, 3]) < 0)


def test_separation_rejects_bad_k_range(prop_heat, rng):
    fib = fs.principal_fiber(prop_heat, B0)
    with pytest.raises(ValueError):
        fs.estimate_separation(prop_heat, [fib], k_max=2, trials=1, rng=rng)


def test_separation_flags_large_residual(prop_periodic, periodic_fiber, rng):
    # an absurdly tight residual threshold must surface as a flagged failure
    with pytest.raises(fs.NumericalError, match="residual"):
        fs.estimate_separation(
            prop_periodic, [periodic_fiber], k_max=6, trials=1, rng=rng,
            residual_threshold=1e-12,
        )


def test_continuous_time_fit_matches_discrete(prop_periodic, periodic_fiber, rng):
    est = fs.estimate_separation(prop_periodic, [periodic_fiber], k_max=8, trials=2, rng=rng)
    mu_c, dprime_c, res_c = fs.continuous_separation(
        prop_periodic, periodic_fiber, t_max=6, substeps=4, trials=2, rng=rng
    )
    assert mu_c == pytest.approx(est.mu, rel=0.05)
    assert dprime_c >= 1.0
    assert res_c < 0.25  # sub-unit modulation is absorbed by the prefactor


def test_uniform_positivity_across_hull(prop_periodic, field_periodic):
    # K > 0 across 32 hull samples; fibers dedupe by phase automatically
    points = field_periodic.hull_sample(32)
    cache = {}
    fibers = []
    for b in points:
        fibers.extend(fs.orbit_fibers(prop_periodic, b, [0.0], tol=1e-8, cache=cache))
    K = min(f.vstar.min() for f in fibers)
    assert K > 0
    assert len(cache) == 32


# ---------------------------------------------------------------- invariance


def test_invariance_autonomous(prop_heat):
    fibers = fs.orbit_fibers(prop_heat, B0, [0, 1, 2])
    defect = fs.verify_invariance(prop_heat, B0, [0, 1, 2], fibers)
    assert defect < 1e-8


def test_invariance_periodic_one_period(prop_periodic, periodic_fiber):
    fibers = fs.orbit_fibers(
        prop_periodic, periodic_fiber.b, [0, 1, 3],
        cache={fs.bundle._phase_key(periodic_fiber.b): periodic_fiber},
    )
    defect = fs.verify_invariance(prop_periodic, periodic_fiber.b, [0, 1, 3], fibers)
    assert defect < 1e-8


def test_invariance_fractional_times(prop_periodic, periodic_fiber):
    # fibers at fractional translates are genuinely different; recompute them
    times = [0, 0.5, 1.5]
    fibers = fs.orbit_fibers(prop_periodic, periodic_fiber.b, times)
    defect = fs.verify_invariance(prop_periodic, periodic_fiber.b, times, fibers)
    assert defect < 1e-8


# ---------------------------------------------------------------- contraction


def test_measured_contraction_consistent_with_fit(prop_periodic, periodic_fiber, rng):
    est = fs.estimate_separation(prop_periodic, [periodic_fiber], k_max=8, trials=2, rng=rng)
    factor = fs.measure_contraction(prop_periodic, periodic_fiber.b, pairs=8, rng=rng)
    assert factor <= est.lam * 1.05


def test_time_one_gap_rejects_degenerate():
    mesh = fs.build_mesh(1, 1.0, 5)
    op = fs.build_operator(mesh, 1.0, 0.0)
    field = fs.field_from_profiles(mesh, "constant")
    prop = fs.Propagator(op, field, fs.PropagatorConfig(dt=0.5))

    class _Fake(fs.Propagator):
        def time_one_map(self, b, t0=0.0):
            return np.eye(5)  # spectral tie

    fake = _Fake(op, field, fs.PropagatorConfig(dt=0.5))
    with pytest.raises(fs.NumericalError, match="tied"):
        fs.time_one_gap(fake, B0)
