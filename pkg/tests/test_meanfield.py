import math
import warnings

import numpy as np
import pytest
from scipy.integrate import solve_ivp
from scipy.linalg import expm

from becqubit.errors import InvalidStateError, StepSizeError
from becqubit.meanfield import (
    ControlSchedule,
    EffectiveParams,
    EmptyScheduleWarning,
    FeedbackRule,
    Segment,
    default_dt,
    flow_field,
    h_eff,
    integrate,
    rotate_x,
    rotate_z,
    sphere_grid,
    step,
    write_flow_csv,
)
from becqubit.protocols import prepare_inputs_simple
from becqubit.qubit import (
    SIGMA_X,
    SIGMA_Z,
    BlochVector,
    QubitAmplitudes,
    equator_state,
    from_bloch,
    to_bloch,
    trace_distance,
)

S = 1 / math.sqrt(2)


def bloch(q):
    return to_bloch(q).as_array()


def amplitude_rhs(params):
    """Mean-field vector field on real coordinates, for scipy oracles."""
    def rhs(t, y):
        psi = y[:2] + 1j * y[2:]
        z = abs(psi[0]) ** 2 - abs(psi[1]) ** 2
        h = params.v01 * SIGMA_X + (params.bz + params.g * z) * SIGMA_Z
        d = -1j * h @ psi
        return np.concatenate([d.real, d.imag])
    return rhs


def oracle_evolve(q, params, t):
    y0 = np.array([q.psi0.real, q.psi1.real, q.psi0.imag, q.psi1.imag])
    sol = solve_ivp(amplitude_rhs(params), (0, t), y0, method="DOP853", rtol=1e-13, atol=1e-14)
    y = sol.y[:, -1]
    return QubitAmplitudes.trusted(y[0] + 1j * y[2], y[1] + 1j * y[3])


class TestHeff:
    def test_equator_drops_torsion(self):
        h = h_eff(equator_state(0.7), EffectiveParams(0.3, 0.0, 5.0))
        assert np.allclose(h, 0.3 * SIGMA_X, atol=1e-15)

    def test_north_pole(self):
        assert np.allclose(h_eff(QubitAmplitudes(1, 0), EffectiveParams(0, 0, 2.5)), np.diag([2.5, -2.5]))

    def test_direct_assembly(self):
        q = QubitAmplitudes(S, 1j * S)
        z = abs(q.psi0) ** 2 - abs(q.psi1) ** 2
        expected = 1.0 * SIGMA_X + (2.0 + 3.0 * z) * SIGMA_Z
        got = h_eff(q, EffectiveParams(1, 2, 3))
        assert np.allclose(got, expected, atol=1e-15)
        assert np.allclose(got, SIGMA_X + 2 * SIGMA_Z, atol=1e-15)
        assert np.array_equal(got, got.conj().T)

    def test_params_must_be_finite(self):
        with pytest.raises(ValueError):
            EffectiveParams(math.inf, 0, 0)


class TestStep:
    def test_free_evolution_is_identity(self):
        q = from_bloch(BlochVector(0.6, 0.0, 0.8))
        out = step(q, EffectiveParams(0, 0, 0), 0.37)
        assert out == q

    def test_basis_state_under_bias(self):
        bz, t = 0.8, 2.0
        traj = integrate(QubitAmplitudes(1, 0), ControlSchedule.constant(EffectiveParams(0, bz, 0), t))
        assert traj[-1][1].psi0 == pytest.approx(complex(math.cos(bz * t), -math.sin(bz * t)), abs=1e-12)
        for _, q in traj[:: len(traj) // 10]:
            assert np.allclose(bloch(q), [0, 0, 1], atol=1e-12)

    def test_equator_static_under_torsion(self):
        q = equator_state(1.1)
        traj = integrate(q, ControlSchedule.constant(EffectiveParams(0, 0, 1.0), 5.0))
        for _, s in traj[:: len(traj) // 20]:
            assert np.allclose(bloch(s), bloch(q), atol=1e-12)

    def test_norm_drift_per_step(self):
        q = from_bloch(BlochVector(0.6, 0.0, 0.8))
        p = EffectiveParams(0.4, 0.3, 1.0)
        out = step(q, p, default_dt(p))
        assert abs(out.norm2 - 1) <= 1e-12

    @pytest.mark.parametrize("dt", [0.0, -1e-3, 1.0, math.nan])
    def test_step_size_violation(self, dt):
        with pytest.raises(StepSizeError):
            step(QubitAmplitudes(1, 0), EffectiveParams(0, 0, 1.0), dt)

    def test_rejects_unnormalized_input(self):
        with pytest.raises(InvalidStateError):
            step(QubitAmplitudes.trusted(2.0, 0.0), EffectiveParams(0, 0, 1), 1e-3)

    def test_matches_oracle(self):
        q = from_bloch(BlochVector(0.48, 0.6, 0.64))
        p = EffectiveParams(0.7, -0.2, 1.3)
        ours = integrate(q, ControlSchedule.constant(p, 3.0), dense=False)[-1][1]
        ref = oracle_evolve(q, p, 3.0)
        assert np.allclose(ours.as_array(), ref.as_array(), atol=1e-10)


class TestIntegrate:
    def test_empty_schedule(self):
        q = QubitAmplitudes(S, S)
        with pytest.warns(EmptyScheduleWarning):
            assert integrate(q, ControlSchedule()) == [(0.0, q)]

    def test_constant_bloch_under_sigma_z_on_pole(self):
        traj = integrate(QubitAmplitudes(1, 0), ControlSchedule.constant(EffectiveParams(0, 1, 0), 1.0))
        zs = [to_bloch(q).z for _, q in traj]
        assert np.allclose(zs, 1.0, atol=1e-12)

    def test_segments_and_observer(self):
        seen = []
        schedule = ControlSchedule((Segment(0.5, EffectiveParams(1, 0, 0)), Segment(0.25, EffectiveParams(0, 0, 1))))
        traj = integrate(QubitAmplitudes(1, 0), schedule, dt=0.01, observer=lambda t, q: seen.append(t))
        assert len(traj) == 76 and len(seen) == 76
        assert traj[-1][0] == pytest.approx(0.75)
        assert traj[50][0] == pytest.approx(0.5)

    def test_sparse_storage(self):
        traj = integrate(QubitAmplitudes(1, 0), ControlSchedule.constant(EffectiveParams(1, 0, 0), 1.0), dense=False)
        assert len(traj) == 2 and traj[-1][0] == pytest.approx(1.0)

    def test_duration_not_multiple_of_dt(self):
        traj = integrate(QubitAmplitudes(1, 0), ControlSchedule.constant(EffectiveParams(1, 0, 0), 0.1234), dt=0.01)
        assert traj[-1][0] == pytest.approx(0.1234)
        assert np.diff([t for t, _ in traj]).max() <= 0.01

    def test_invalid_segment(self):
        with pytest.raises(ValueError):
            Segment(0.0, EffectiveParams(0, 0, 1))

    def test_feedback_queried(self):
        calls = []

        def law(q):
            calls.append(q)
            return EffectiveParams(0.0, 0.0, 1.0)

        rule = FeedbackRule("probe", law, 1.0)
        integrate(QubitAmplitudes(S, S), ControlSchedule.constant(rule, 0.01), dt=0.001)
        assert len(calls) == 40

    def test_azimuthal_separation_rate(self):
        # Dense-output oracle of dr/dt = 2 h x r with h = (0, 0, g z).
        theta, g, t_end = 0.3, 1.7, 2.0
        a, b = prepare_inputs_simple(theta)

        def bloch_rhs(t, r):
            return 2 * np.cross([0.0, 0.0, g * r[2]], r)

        schedule = ControlSchedule.constant(EffectiveParams(0, 0, g), t_end)
        ta, tb = integrate(a, schedule), integrate(b, schedule)
        sa = solve_ivp(bloch_rhs, (0, t_end), bloch(a), method="DOP853", rtol=1e-12, atol=1e-13, dense_output=True)
        sb = solve_ivp(bloch_rhs, (0, t_end), bloch(b), method="DOP853", rtol=1e-12, atol=1e-13, dense_output=True)
        rate = 4 * g * math.sin(theta / 2)
        for i in range(0, len(ta), 250):
            t = ta[i][0]
            ra, rb = bloch(ta[i][1]), bloch(tb[i][1])
            sep = math.atan2(ra[1], ra[0]) - math.atan2(rb[1], rb[0])
            assert sep == pytest.approx(rate * t, abs=1e-9)
            assert np.allclose(ra, sa.sol(t), atol=1e-9)
            assert np.allclose(rb, sb.sol(t), atol=1e-9)


class TestRotations:
    def test_x_pi_flips(self):
        out = rotate_x(QubitAmplitudes(1, 0), math.pi)
        assert abs(out.psi1) == pytest.approx(1, abs=1e-15) and abs(out.psi0) < 1e-15

    def test_z_advances_azimuth(self):
        q = equator_state(0.4)
        assert np.allclose(bloch(rotate_z(q, math.pi / 2)), bloch(equator_state(0.4 + math.pi / 2)), atol=1e-15)

    def test_x_half_pi_direction(self):
        ref = expm(-1j * (math.pi / 2) * SIGMA_X / 2) @ np.array([1, 0])
        out = rotate_x(QubitAmplitudes(1, 0), math.pi / 2)
        assert np.allclose(out.as_array(), ref, atol=1e-15)
        assert np.allclose(bloch(out), [0, -1, 0], atol=1e-15)

    @pytest.mark.parametrize("angle", [0.3, -1.2, 2.9])
    def test_matches_matrix_exponential(self, angle):
        q = from_bloch(BlochVector(0.48, 0.6, 0.64))
        for rot, sigma in ((rotate_x, SIGMA_X), (rotate_z, SIGMA_Z)):
            ref = expm(-1j * angle * sigma / 2) @ q.as_array()
            assert np.allclose(rot(q, angle).as_array(), ref, atol=1e-14)


class TestFlowField:
    def test_equator_is_fixed_under_torsion(self):
        (s,) = flow_field([BlochVector(1, 0, 0)], EffectiveParams(0, 0, 1), nonlinear=True)
        assert s.velocity == (0.0, 0.0, 0.0)

    def test_linear_flow_moves_equator(self):
        (s,) = flow_field([BlochVector(1, 0, 0)], EffectiveParams(0, 0, 1), nonlinear=False)
        assert np.linalg.norm(s.velocity) == pytest.approx(2.0)
        assert np.dot(s.velocity, [1, 0, 0]) == 0

    def test_opposite_hemispheres_turn_opposite_ways(self):
        c, z = math.sqrt(1 - 0.36), 0.6
        up, down = flow_field([BlochVector(c, 0, z), BlochVector(c, 0, -z)], EffectiveParams(0, 0, 1))
        assert np.linalg.norm(up.velocity) == pytest.approx(np.linalg.norm(down.velocity))
        assert up.velocity[1] > 0 > down.velocity[1]

    def test_rejects_off_sphere(self):
        with pytest.raises(InvalidStateError):
            flow_field([BlochVector(0.5, 0, 0)], EffectiveParams(0, 0, 1))

    def test_velocity_tangent(self):
        samples = flow_field(sphere_grid(9, 12), EffectiveParams(0.4, -0.3, 1.2))
        for s in samples:
            assert abs(np.dot(s.velocity, s.point.as_array())) < 1e-9

    def test_csv(self, tmp_path):
        samples = flow_field(sphere_grid(4, 5), EffectiveParams(0, 0, 1))
        path = tmp_path / "flow.csv"
        write_flow_csv(samples, path)
        lines = path.read_text().splitlines()
        assert lines[0] == "x,y,z,vx,vy,vz"
        assert len(lines) == 21
        first = [float(v) for v in lines[1].split(",")]
        assert first[:3] == [samples[0].point.x, samples[0].point.y, samples[0].point.z]


class TestInvariants:
    def test_norm_conservation_long_run(self):
        p = EffectiveParams(0.5, 0.3, 1.0)
        q = from_bloch(BlochVector(0.48, 0.6, 0.64))
        worst = 0.0

        def watch(t, s):
            nonlocal worst
            worst = max(worst, abs(s.norm2 - 1))

        integrate(q, ControlSchedule.constant(p, 100.0), observer=watch, dense=False)
        assert worst < 1e-9

    def test_z_conserved_under_pure_torsion(self):
        q = from_bloch(BlochVector(0.48, 0.6, 0.64))
        z0 = q.z
        worst = 0.0

        def watch(t, s):
            nonlocal worst
            worst = max(worst, abs(s.z - z0))

        integrate(q, ControlSchedule.constant(EffectiveParams(0, 0, 1), 100.0), observer=watch, dense=False)
        assert worst < 1e-10

    def test_fourth_order_convergence(self):
        q = from_bloch(BlochVector(0.6, 0.0, 0.8))
        p = EffectiveParams(0.3, 0.1, 2.0)
        schedule = ControlSchedule.constant(p, 2.0)
        ref = oracle_evolve(q, p, 2.0).as_array()
        errs = [np.linalg.norm(integrate(q, schedule, dt, dense=False)[-1][1].as_array() - ref)
                for dt in (0.02, 0.01)]
        assert 12 < errs[0] / errs[1] < 20

    def test_equator_linearity(self):
        q = equator_state(0.9)
        p_nl = EffectiveParams(0.0, 0.0, 2.0)
        torsion = integrate(q, ControlSchedule.constant(p_nl, 3.0), dense=False)[-1][1]
        assert np.allclose(torsion.as_array(), q.as_array(), atol=1e-12)

    def test_superposition_violated_off_equator(self):
        g, t = 1.0, 1.0
        z = 0.5
        q = from_bloch(BlochVector(math.sqrt(1 - z * z), 0, z))
        schedule = ControlSchedule.constant(EffectiveParams(0, 0, g), t)
        actual = integrate(q, schedule, dense=False)[-1][1]
        e0 = integrate(QubitAmplitudes(1, 0), schedule, dense=False)[-1][1]
        e1 = integrate(QubitAmplitudes(0, 1), schedule, dense=False)[-1][1]
        superposed = QubitAmplitudes.normalized(q.psi0 * e0.psi0, q.psi1 * e1.psi1)
        assert trace_distance(actual, superposed) > 0.1

    def test_default_dt_scale(self):
        assert default_dt(EffectiveParams(0.2, 0.1, 4.0)) == pytest.approx(2.5e-4)
        assert default_dt(EffectiveParams(0, 0, 0)) == pytest.approx(1e-3)

    def test_no_silent_warnings(self):
        with warnings.catch_warnings():
            warnings.simplefilter("error")
            integrate(QubitAmplitudes(1, 0), ControlSchedule.constant(EffectiveParams(1, 0, 0), 0.1))
