from concurrent.futures import ThreadPoolExecutor

import numpy as np
import pytest

import floquet_sep as fs
from floquet_sep.coefficients import HullPoint

B0 = HullPoint(())


def _const_field(mesh, value):
    return fs.field_from_profiles(mesh, "constant", offset=fs.Profile("const", value))


def test_constant_state_reaction_only(mesh41, op_neumann):
    # constants are invariant under Neumann diffusion, so one step is a
    # pure exponential factor
    field = _const_field(mesh41, 0.7)
    prop = fs.Propagator(op_neumann, field, fs.PropagatorConfig(dt=1e-2))
    out = prop.step(np.ones(41), B0, 0.0)
    assert np.allclose(out, np.exp(0.7 * 1e-2), rtol=1e-12, atol=0)


def test_closed_form_exponential_growth(mesh41, op_neumann):
    field = _const_field(mesh41, 0.5)
    prop = fs.Propagator(op_neumann, field, fs.PropagatorConfig(dt=1e-3))
    u, _ = prop.propagate_final(B0, 0.0, 2.0, np.ones(41), renorm=False)
    assert np.allclose(u, np.e, rtol=1e-11, atol=0)


def test_mass_conservation_neumann(prop_heat, mesh41, rng):
    u = rng.uniform(0.0, 1.0, 41)
    out, _ = prop_heat.propagate_final(B0, 0.0, 1.0, u, renorm=False)
    assert mesh41.norm_l1(out) == pytest.approx(mesh41.norm_l1(u), rel=1e-12)


def test_l1_contraction_robin(op_robin, mesh41, rng):
    field = _const_field(mesh41, 0.0)
    prop = fs.Propagator(op_robin, field, fs.PropagatorConfig(dt=1e-2))
    u = rng.standard_normal(41)
    out, _ = prop.propagate_final(B0, 0.0, 1.0, u, renorm=False)
    assert mesh41.norm_l1(out) <= mesh41.norm_l1(u) * (1 + 1e-12)


def test_single_node_spreads_positive(prop_heat, op_neumann):
    # oracle: the dense inverse of the implicit Euler matrix is entrywise
    # positive, hence a single positive node lights up every node in one step
    dt = prop_heat.config.dt
    M = np.linalg.inv(np.eye(41) - dt * op_neumann.matrix)
    assert M.min() > 0
    u = np.zeros(41)
    u[3] = 1.0
    out = prop_heat.step(u, B0, 0.0)
    assert out.min() > 0


def test_linearity(prop_periodic, rng):
    b = HullPoint((0.2,))
    for _ in range(10):
        u = rng.standard_normal(41)
        w = rng.standard_normal(41)
        al, be = rng.uniform(-2, 2, 2)
        lhs, _ = prop_periodic.propagate_final(b, 0.0, 0.05, al * u + be * w, renorm=False)
        ua, _ = prop_periodic.propagate_final(b, 0.0, 0.05, u, renorm=False)
        wa, _ = prop_periodic.propagate_final(b, 0.0, 0.05, w, renorm=False)
        rhs = al * ua + be * wa
        scale = np.max(np.abs(lhs)) + 1e-30
        assert np.max(np.abs(lhs - rhs)) / scale < 1e-12


def test_space_independent_reaction_factorizes(mesh41, op_neumann, rng):
    # with a space-independent coefficient the reaction factor commutes with
    # the diffusion solve; over whole periods of sin(2 pi t) the accumulated
    # factor is exactly one, so the run must match pure diffusion
    field = fs.field_from_profiles(
        mesh41, "time-periodic", modes=[(1.0, fs.Profile("const", 1.0))]
    )
    prop = fs.Propagator(op_neumann, field, fs.PropagatorConfig(dt=1e-2))
    heat = fs.Propagator(op_neumann, _const_field(mesh41, 0.0), fs.PropagatorConfig(dt=1e-2))
    u0 = rng.uniform(0.5, 1.5, 41)
    got, _ = prop.propagate_final(HullPoint((0.0,)), 0.0, 2.0, u0, renorm=False)
    want, _ = heat.propagate_final(B0, 0.0, 2.0, u0, renorm=False)
    assert np.max(np.abs(got - want)) / np.max(np.abs(want)) < 1e-10


def test_space_independent_commuting_factorization_noninteger(mesh41, op_neumann, rng):
    # same factorization at a non-integer horizon: the scalar factor is the
    # midpoint-sampled quadrature the scheme itself uses
    field = fs.field_from_profiles(
        mesh41, "time-periodic", modes=[(1.0, fs.Profile("const", 1.0))]
    )
    dt = 1e-2
    prop = fs.Propagator(op_neumann, field, fs.PropagatorConfig(dt=dt))
    heat = fs.Propagator(op_neumann, _const_field(mesh41, 0.0), fs.PropagatorConfig(dt=dt))
    t1 = 0.37
    steps = np.arange(37) * dt
    quad = (dt / 2) * (
        np.sin(2 * np.pi * (steps + dt / 4)).sum()
        + np.sin(2 * np.pi * (steps + 3 * dt / 4)).sum()
    )
    u0 = rng.uniform(0.5, 1.5, 41)
    got, _ = prop.propagate_final(HullPoint((0.0,)), 0.0, t1, u0, renorm=False)
    want, _ = heat.propagate_final(B0, 0.0, t1, u0, renorm=False)
    want = np.exp(quad) * want
    assert np.max(np.abs(got - want)) / np.max(np.abs(want)) < 1e-12


def test_uniform_growth_bound(prop_periodic, mesh41, rng):
    # || psi(t,b) u || <= exp((R+1) t) ||u|| for the crude reaction bound
    R = prop_periodic.field.bound
    for t in (1.0, 3.0, 8.0):
        b = HullPoint((float(rng.uniform()),))
        u = rng.standard_normal(41)
        out, log_scale = prop_periodic.propagate_final(b, 0.0, t, u)
        norm = mesh41.norm_l1(out) * np.exp(log_scale)
        assert norm <= np.exp((R + 1) * t) * mesh41.norm_l1(u)


def test_time_one_map_matches_propagate(prop_periodic, rng):
    b = HullPoint((0.4,))
    M = prop_periodic.time_one_map(b)
    for j in (0, 17, 40):
        e = np.zeros(41)
        e[j] = 1.0
        col, _ = prop_periodic.propagate_final(b, 0.0, 1.0, e, renorm=False)
        assert np.max(np.abs(M[:, j] - col)) <= 1e-12 * np.max(np.abs(col))


def test_time_one_map_entrywise_positive(prop_periodic):
    M = prop_periodic.time_one_map(HullPoint((0.8,)))
    assert M.min() > 0


def test_time_one_map_mass_columns(prop_heat, mesh41):
    # mass conservation in the weighted sense: weights @ M = weights
    M = prop_heat.time_one_map(B0)
    col = mesh41.weights @ M
    assert np.max(np.abs(col - mesh41.weights)) < 1e-10 * np.max(mesh41.weights)


def test_adjoint_duality_identity(prop_periodic, mesh41, rng):
    b = HullPoint((0.15,))
    for _ in range(100):
        u = rng.standard_normal(41)
        w = rng.standard_normal(41)
        pu, _ = prop_periodic.propagate_final(b, 0.0, 0.13, u, renorm=False)
        aw = prop_periodic.propagate_adjoint(b, 0.0, 0.13, w)
        lhs = mesh41.pairing(w, pu)
        rhs = mesh41.pairing(aw, u)
        assert abs(lhs - rhs) <= 1e-12 * (abs(lhs) + abs(rhs) + 1e-30)


def test_adjoint_equals_forward_autonomous(mesh41, rng):
    # time-independent coefficient and symmetric operator: psi* = psi
    op = fs.build_operator(mesh41, 1.0, (0.5, 0.5))
    prop = fs.Propagator(op, _const_field(mesh41, 0.3), fs.PropagatorConfig(dt=1e-2))
    w = rng.standard_normal(41)
    fwd, _ = prop.propagate_final(B0, 0.0, 1.0, w, renorm=False)
    adj = prop.propagate_adjoint(B0, 0.0, 1.0, w)
    assert np.max(np.abs(fwd - adj)) <= 1e-12 * np.max(np.abs(fwd))


def test_adjoint_positivity(prop_periodic, rng):
    w = rng.uniform(0.0, 1.0, 41)
    w[w < 0.5] = 0.0
    assert np.any(w > 0)
    out = prop_periodic.propagate_adjoint(HullPoint((0.6,)), 0.0, 1.0, w)
    assert out.min() > 0


def test_cocycle_identity_aligned(prop_periodic, rng):
    b = HullPoint((0.3,))
    u = rng.uniform(0.5, 1.5, 41)
    assert prop_periodic.verify_cocycle(b, 1.0, 0.0, u) == 0.0
    assert prop_periodic.verify_cocycle(b, 1.0, 1.0, u) <= 1e-10
    assert prop_periodic.verify_cocycle(b, 0.13, 0.87, u) <= 1e-10


def test_cocycle_misaligned_first_order(mesh41, op_slow, field_periodic, rng):
    t2 = 0.25 * np.sqrt(2.0)  # off both step grids
    u = rng.uniform(0.5, 1.5, 41)
    defects = []
    for q in (50, 100):
        prop = fs.Propagator(op_slow, field_periodic, fs.PropagatorConfig(dt=1.0 / q))
        defects.append(prop.verify_cocycle(HullPoint((0.1,)), 1.0, t2, u))
    assert defects[0] > 0
    assert defects[0] / defects[1] >= 1.8  # halving dt at least halves the defect


def test_trajectory_contract(prop_periodic, rng):
    b = HullPoint((0.7,))
    u0 = rng.uniform(0.0, 1.0, 41)
    traj = prop_periodic.propagate(b, 0.0, 0.5, u0)
    assert traj.times[0] == 0.0 and traj.times[-1] == pytest.approx(0.5)
    assert len(traj.times) == 51
    assert np.all(np.isfinite(traj.states))
    assert np.all(traj.states[1:] > 0)  # positivity from the first step on
    assert traj.start == b
    # identity at zero span
    same = prop_periodic.propagate(b, 1.0, 1.0, u0)
    assert same.states.shape == (1, 41)
    assert np.array_equal(same.states[0], u0)


def test_positivity_across_hull_samples(prop_periodic, field_periodic, rng):
    for b in field_periodic.hull_sample(8):
        u = rng.uniform(0.0, 1.0, 41) * (rng.uniform(0, 1, 41) > 0.7)
        if not np.any(u > 0):
            u[0] = 1.0
        out, _ = prop_periodic.propagate_final(b, 0.0, 0.05, u, renorm=False)
        assert out.min() > 0


def test_crank_nicolson_breaks_positivity_at_large_dt(mesh41, op_neumann):
    # documented diagnostic behavior: CN is not positivity preserving
    field = _const_field(mesh41, 0.0)
    cn = fs.Propagator(op_neumann, field, fs.PropagatorConfig(dt=0.5, scheme="crank-nicolson"))
    strang = fs.Propagator(op_neumann, field, fs.PropagatorConfig(dt=0.5))
    impulse = np.zeros(41)
    impulse[20] = 1.0
    assert cn.step(impulse, B0, 0.0).min() < 0
    assert strang.step(impulse, B0, 0.0).min() > 0


def test_crank_nicolson_adjoint_duality(mesh41, op_slow, field_periodic, rng):
    prop = fs.Propagator(op_slow, field_periodic,
                         fs.PropagatorConfig(dt=1e-2, scheme="crank-nicolson"))
    b = HullPoint((0.25,))
    u = rng.standard_normal(41)
    w = rng.standard_normal(41)
    pu, _ = prop.propagate_final(b, 0.0, 0.2, u, renorm=False)
    aw = prop.propagate_adjoint(b, 0.0, 0.2, w)
    lhs = mesh41.pairing(w, pu)
    rhs = mesh41.pairing(aw, u)
    assert abs(lhs - rhs) <= 1e-12 * (abs(lhs) + abs(rhs))


def test_temporal_order_at_least_one(mesh41, op_slow, field_periodic):
    # Strang with implicit Euler diffusion is globally first order in dt;
    # unconditional positivity rules out rational schemes of higher order,
    # so order >= 1 is the honest bound (order 2 would need the exact
    # diffusion flow).
    u0 = 1.0 + 0.5 * np.cos(np.pi * mesh41.nodes[:, 0])
    ref, _ = fs.Propagator(
        op_slow, field_periodic, fs.PropagatorConfig(dt=1 / 1280)
    ).propagate_final(HullPoint((0.0,)), 0.0, 1.0, u0, renorm=False)
    errs = []
    for q in (40, 80, 160):
        u, _ = fs.Propagator(
            op_slow, field_periodic, fs.PropagatorConfig(dt=1 / q)
        ).propagate_final(HullPoint((0.0,)), 0.0, 1.0, u0, renorm=False)
        errs.append(mesh41.norm_l1(u - ref))
    orders = [np.log2(errs[i] / errs[i + 1]) for i in range(2)]
    assert min(orders) >= 0.9


def test_temporal_order_rough_data(mesh41, op_slow, field_periodic):
    u0 = np.zeros(41)
    u0[13] = 1.0  # rough initial state
    ref, _ = fs.Propagator(
        op_slow, field_periodic, fs.PropagatorConfig(dt=1 / 1280)
    ).propagate_final(HullPoint((0.0,)), 0.0, 1.0, u0, renorm=False)
    errs = []
    for q in (40, 80):
        u, _ = fs.Propagator(
            op_slow, field_periodic, fs.PropagatorConfig(dt=1 / q)
        ).propagate_final(HullPoint((0.0,)), 0.0, 1.0, u0, renorm=False)
        errs.append(mesh41.norm_l1(u - ref))
    assert np.log2(errs[0] / errs[1]) >= 0.9


def test_phase_continuity(prop_periodic, mesh41, rng):
    # continuity of the cocycle in the torus phase: a small phase change
    # perturbs the time-one image proportionally
    u = rng.uniform(0.5, 1.5, 41)
    base, _ = prop_periodic.propagate_final(HullPoint((0.5,)), 0.0, 1.0, u, renorm=False)
    for delta in (1e-3, 1e-5):
        pert, _ = prop_periodic.propagate_final(
            HullPoint((0.5 + delta,)), 0.0, 1.0, u, renorm=False
        )
        rel = mesh41.norm_l1(pert - base) / mesh41.norm_l1(base)
        assert rel < 20 * delta


def test_concurrent_trajectories_match_serial(prop_periodic, rng):
    us = [rng.uniform(0.5, 1.5, 41) for _ in range(4)]
    bs = [HullPoint((i / 4,)) for i in range(4)]
    serial = [
        prop_periodic.propagate_final(b, 0.0, 1.0, u, renorm=False)[0]
        for b, u in zip(bs, us)
    ]
    with ThreadPoolExecutor(max_workers=4) as pool:
        parallel = list(
            pool.map(
                lambda bu: prop_periodic.propagate_final(bu[0], 0.0, 1.0, bu[1], renorm=False)[0],
                zip(bs, us),
            )
        )
    for s, p in zip(serial, parallel):
        assert np.array_equal(s, p)


def test_renormalization_bookkeeping(mesh41, op_neumann):
    # strong constant growth overflows without renormalization; the log
    # factors must reassemble the true magnitude
    field = _const_field(mesh41, 5.0)
    prop = fs.Propagator(op_neumann, field, fs.PropagatorConfig(dt=1e-2))
    u, log_scale = prop.propagate_final(B0, 0.0, 50.0, np.ones(41))
    assert np.all(np.isfinite(u))
    total = np.log(u[0]) + log_scale
    assert total == pytest.approx(250.0, rel=1e-9)


def test_2d_propagation_smoke(rng):
    mesh = fs.build_mesh(2, (1.0, 1.0), (7, 6))
    op = fs.build_operator(mesh, 0.5, 0.0)
    field = fs.field_from_profiles(
        mesh, "time-periodic", modes=[(1.0, fs.Profile("cos-kx", 0.5, k=1))]
    )
    prop = fs.Propagator(op, field, fs.PropagatorConfig(dt=1e-2))
    b = field.reference_point()
    impulse = np.zeros(42)
    impulse[17] = 1.0
    assert prop.step(impulse, b, 0.0).min() > 0
    u = rng.standard_normal(42)
    w = rng.standard_normal(42)
    pu, _ = prop.propagate_final(b, 0.0, 0.5, u, renorm=False)
    aw = prop.propagate_adjoint(b, 0.0, 0.5, w)
    lhs = mesh.pairing(w, pu)
    rhs = mesh.pairing(aw, u)
    assert abs(lhs - rhs) <= 1e-12 * (abs(lhs) + abs(rhs))
    assert prop.verify_cocycle(b, 0.5, 0.5, np.abs(u)) <= 1e-10


def test_config_validation():
    with pytest.raises(ValueError):
        fs.PropagatorConfig(dt=0.3)  # not 1/q
    with pytest.raises(ValueError):
        fs.PropagatorConfig(dt=-0.1)
    with pytest.raises(ValueError):
        fs.PropagatorConfig(scheme="leapfrog")


def test_span_validation(prop_heat, rng):
    with pytest.raises(ValueError):
        prop_heat.propagate_final(B0, 1.0, 0.5, np.ones(41))
    with pytest.raises(ValueError):
        prop_heat.propagate_final(B0, 0.0, 1.0, np.ones(40))
