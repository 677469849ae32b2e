import numpy as np
import pytest

from attiq.quat import angular_distance, dcm_of, euler_of_quat
from attiq.sim import (
    CASE_DEFAULTS,
    NoiseParams,
    ScenarioConfig,
    SensorStreams,
    generate_truth,
    measure,
    simulate_scenario,
)


def quiet_config(case, seed=1, **kw):
    kw.setdefault("noise", NoiseParams.zero())
    return ScenarioConfig.for_case(case, seed=seed, **kw)


class TestNoiseParams:
    def test_rejects_negative_std(self):
        with pytest.raises(ValueError):
            NoiseParams(n_w=-1e-3, n_b=0.0, n_a=0.0, n_m=0.0)

    def test_mpu_defaults_scale_with_rate(self):
        p = NoiseParams.mpu9250(150.0)
        assert p.n_w == pytest.approx(8.7e-4 * np.sqrt(150.0))
        assert p.n_a == pytest.approx(8e-3 * np.sqrt(150.0))


class TestScenarioConfig:
    def test_rejects_bad_rate(self):
        with pytest.raises(ValueError):
            ScenarioConfig.for_case("I", seed=1, sample_rate=0.0)

    def test_rejects_unknown_case(self):
        with pytest.raises(ValueError):
            ScenarioConfig.for_case("V", seed=1)

    def test_sample_count(self):
        cfg = ScenarioConfig.for_case("I", seed=1)
        assert cfg.n_samples == 7500


class TestTruth:
    def test_case_one_starts_level_at_rest(self):
        truth = generate_truth(quiet_config("I"))
        np.testing.assert_allclose(truth[0].q, [0.0, 0.0, 0.0, 1.0], atol=1e-15)
        np.testing.assert_allclose(truth[0].w, 0.0, atol=1e-15)

    def test_all_cases_start_level(self):
        for case in ("I", "II", "III", "IV"):
            truth = generate_truth(quiet_config(case))
            assert angular_distance(truth[0].q, np.array([0, 0, 0, 1.0])) < 1e-12

    def test_case_one_single_axis_bounded(self):
        cfg = quiet_config("I")
        truth = generate_truth(cfg)
        limit = np.radians(30.0)
        seg = cfg.duration / 3.0
        for state in truth:
            angles = euler_of_quat(state.q)
            assert np.max(np.abs(angles)) < limit
            # axes other than the active one stay at rest
            active = min(int(state.t / seg), 2)
            others = np.delete(np.abs(angles), active)
            assert np.max(others) < 1e-3

    def test_case_two_excursions_exceed_thirty_deg(self):
        truth = generate_truth(quiet_config("II"))
        angles = np.array([euler_of_quat(s.q) for s in truth])
        assert np.all(np.max(np.abs(angles), axis=0) > np.radians(30.0))
        rates = np.array([np.linalg.norm(s.w) for s in truth])
        assert rates.max() > 0.8 * CASE_DEFAULTS["II"][1]

    def test_case_three_pitch_passes_vertical(self):
        truth = generate_truth(quiet_config("III"))
        # the sweep is a pure y-axis rotation, so the physical pitch is the
        # rotation angle about y
        pitch = np.array([2.0 * np.arctan2(s.q[1], s.q[3]) for s in truth])
        assert pitch.max() > np.pi / 2
        rates = np.array([np.linalg.norm(s.w) for s in truth])
        assert rates.max() == pytest.approx(CASE_DEFAULTS["III"][1], rel=1e-2)

    def test_case_four_script_has_three_heading_changes(self):
        truth = generate_truth(quiet_config("IV"))
        yaw = np.unwrap([euler_of_quat(s.q)[2] for s in truth])
        assert yaw[-1] == pytest.approx(4.0, abs=0.01)
        pitch = np.array([euler_of_quat(s.q)[1] for s in truth])
        assert pitch.max() > np.radians(5.0)  # take-off transient
        assert pitch.min() < np.radians(-3.0)  # descent

    def test_consecutive_samples_within_rate_bound(self):
        for case in ("I", "II", "III", "IV"):
            cfg = quiet_config(case, duration=6.0)
            truth = generate_truth(cfg)
            for a, b in zip(truth, truth[1:]):
                bound = np.linalg.norm(a.w) * cfg.dt + 1e-6
                assert angular_distance(a.q, b.q) <= bound

    def test_zero_angular_rate_is_static(self):
        truth = generate_truth(quiet_config("I", angular_rate=0.0, duration=2.0))
        for state in truth:
            assert angular_distance(state.q, np.array([0, 0, 0, 1.0])) < 1e-14
            np.testing.assert_allclose(state.w, 0.0, atol=1e-15)

    def test_bias_constant_when_walk_disabled(self):
        noise = NoiseParams(n_w=0.0, n_b=0.0, n_a=0.0, n_m=0.0, b0=(0.02, -0.01, 0.015))
        truth = generate_truth(quiet_config("II", noise=noise, duration=2.0))
        for state in truth:
            np.testing.assert_array_equal(state.b, [0.02, -0.01, 0.015])

    def test_bias_walks_with_configured_intensity(self):
        noise = NoiseParams(n_w=0.0, n_b=1e-3, n_a=0.0, n_m=0.0)
        cfg = quiet_config("I", noise=noise, angular_rate=0.0, duration=40.0)
        truth = generate_truth(cfg)
        steps = np.diff(np.array([s.b for s in truth]), axis=0)
        expected = 1e-3 * np.sqrt(cfg.dt)
        assert np.std(steps) == pytest.approx(expected, rel=0.05)


class TestMeasure:
    def test_noise_free_measurements_are_exact(self):
        ds = simulate_scenario(quiet_config("II", duration=2.0))
        for sample, state in zip(ds.samples, ds.truth):
            c = dcm_of(state.q)
            np.testing.assert_allclose(sample.w_m, state.w, atol=1e-15)
            np.testing.assert_allclose(sample.a_m, c @ [0.0, 0.0, 9.81], atol=1e-12)

    def test_gyro_includes_bias(self):
        noise = NoiseParams(n_w=0.0, n_b=0.0, n_a=0.0, n_m=0.0, b0=(0.01, 0.02, -0.03))
        ds = simulate_scenario(quiet_config("I", noise=noise, duration=1.0))
        for sample, state in zip(ds.samples, ds.truth):
            np.testing.assert_allclose(sample.w_m - state.w, [0.01, 0.02, -0.03])

    def test_determinism(self):
        cfg = ScenarioConfig.for_case("II", seed=99, duration=2.0)
        a = simulate_scenario(cfg)
        b = simulate_scenario(cfg)
        np.testing.assert_array_equal(a.w_m, b.w_m)
        np.testing.assert_array_equal(a.a_m, b.a_m)
        np.testing.assert_array_equal(a.m_m, b.m_m)
        np.testing.assert_array_equal(a.q_true, b.q_true)
        np.testing.assert_array_equal(a.b_true, b.b_true)

    def test_seeds_decorrelate(self):
        a = simulate_scenario(ScenarioConfig.for_case("II", seed=1, duration=1.0))
        b = simulate_scenario(ScenarioConfig.for_case("II", seed=2, duration=1.0))
        assert not np.array_equal(a.w_m, b.w_m)

    def test_noise_statistics(self):
        # long static scenario: per-channel noise std within 5 percent and
        # accelerometer residual mean within 3 sigma / sqrt(N)
        noise = NoiseParams(n_w=2e-3, n_b=0.0, n_a=0.05, n_m=0.4)
        cfg = ScenarioConfig.for_case(
            "I", seed=7, angular_rate=0.0, duration=1000.0, sample_rate=100.0,
            noise=noise,
        )
        ds = simulate_scenario(cfg)
        n = len(ds.samples)
        assert n == 100000
        gyro_res = ds.w_m - ds.b_true
        accel_res = ds.a_m - np.array([0.0, 0.0, 9.81])
        mag_res = ds.m_m - np.array(cfg.h)
        for res, std in ((gyro_res, 2e-3), (accel_res, 0.05), (mag_res, 0.4)):
            assert np.std(res) == pytest.approx(std, rel=0.05)
        assert np.all(np.abs(accel_res.mean(axis=0)) < 3.0 * 0.05 / np.sqrt(n))

    def test_streams_are_independent_channels(self):
        # consuming the gyro stream must not shift accel or mag draws
        noise = NoiseParams(n_w=1e-3, n_b=0.0, n_a=1e-2, n_m=0.5)
        cfg = quiet_config("I", noise=noise, duration=1.0)
        truth = generate_truth(cfg)
        s1 = SensorStreams(cfg.seed)
        s2 = SensorStreams(cfg.seed)
        s2.gyro.standard_normal(3000)  # burn the gyro channel only
        a1 = measure(truth[0], noise, s1)
        a2 = measure(truth[0], noise, s2)
        assert not np.array_equal(a1.w_m, a2.w_m)
        np.testing.assert_array_equal(a1.a_m, a2.a_m)
        np.testing.assert_array_equal(a1.m_m, a2.m_m)
