import numpy as np
import pytest
from scipy.linalg import solve_continuous_are

from attiq.plant import N_OCTANTS, LinearErrorPlant, build_plant, closed_loop, octant_rotation
from attiq.sim import NoiseParams
from attiq.synthesis import (
    GainFileError,
    SynthesisError,
    default_stabilizer,
    gain_symmetry_transform,
    h2_norm,
    load_gains,
    save_gains,
    schedule_from_dict,
    schedule_to_dict,
    solve_h2_care,
    solve_h2_lmi,
    synthesize_schedule,
)

NOISE = NoiseParams(n_w=1e-3, n_b=1e-4, n_a=1e-2, n_m=0.5)

SCALAR = LinearErrorPlant(a=[[-1.0]], bw=[[1.0]], cy=[[1.0]], dw=[[1.0]], cz=[[1.0]])


def random_plant(seed):
    """A small random Hurwitz plant with an exact H2-optimal estimator."""
    rng = np.random.default_rng(seed)
    n = 3
    a = rng.standard_normal((n, n))
    a -= (np.linalg.eigvals(a).real.max() + 0.5) * np.eye(n)
    bw = np.diag(0.5 + rng.random(n))
    cy = rng.standard_normal((2, n))
    dw = np.diag(0.5 + rng.random(2))
    cz = np.eye(n)
    return LinearErrorPlant(a=a, bw=bw, cy=cy, dw=dw, cz=cz)


class TestH2Norm:
    def test_scalar_closed_form(self):
        # integrator -1 with unit input and output has H2 norm 1/sqrt(2)
        assert h2_norm([[-1.0]], [[1.0]], [[1.0]]) == pytest.approx(
            1.0 / np.sqrt(2.0), abs=1e-9
        )

    def test_diagonal_closed_form(self):
        val = h2_norm(-2.0 * np.eye(2), np.eye(2), np.eye(2))
        assert val == pytest.approx(np.sqrt(0.5), abs=1e-9)

    def test_rejects_unstable(self):
        with pytest.raises(SynthesisError, match="Hurwitz"):
            h2_norm([[1.0]], [[1.0]], [[1.0]])


class TestScalarClosedForms:
    def test_care_route(self):
        l, gamma, p = solve_h2_care(SCALAR)
        root2 = np.sqrt(2.0)
        assert p[0, 0] == pytest.approx(root2 - 1.0, abs=1e-9)
        assert l[0, 0] == pytest.approx(-(root2 - 1.0), abs=1e-9)
        assert gamma**2 == pytest.approx(root2 - 1.0, abs=1e-9)

    def test_lmi_route(self):
        l, gamma, _ = solve_h2_lmi(SCALAR)
        root2 = np.sqrt(2.0)
        assert l[0, 0] == pytest.approx(-(root2 - 1.0), abs=1e-6)
        assert gamma**2 == pytest.approx(root2 - 1.0, abs=1e-6)


class TestCareAgainstScipy:
    @pytest.mark.parametrize("seed", [0, 1, 2, 3, 4])
    def test_riccati_solution_matches(self, seed):
        plant = random_plant(seed)
        _, _, p = solve_h2_care(plant)
        p_ref = solve_continuous_are(
            plant.a.T, plant.cy.T, plant.bw @ plant.bw.T, plant.dw @ plant.dw.T
        )
        np.testing.assert_allclose(p, p_ref, rtol=1e-8, atol=1e-12)


class TestRouteAgreement:
    @pytest.mark.parametrize("seed", [0, 1, 2])
    def test_random_plants(self, seed):
        plant = random_plant(seed)
        l_lmi, gamma_lmi, _ = solve_h2_lmi(plant)
        l_care, gamma_care, _ = solve_h2_care(plant)
        assert np.linalg.norm(l_lmi - l_care) / np.linalg.norm(l_care) < 1e-5
        assert gamma_lmi == pytest.approx(gamma_care, rel=1e-6)

    def test_attitude_plant(self):
        plant = build_plant(NOISE, 0)
        l_lmi, gamma_lmi, _ = solve_h2_lmi(plant)
        l_care, gamma_care, _ = solve_h2_care(plant)
        assert np.linalg.norm(l_lmi - l_care) / np.linalg.norm(l_care) < 1e-4
        assert gamma_lmi == pytest.approx(gamma_care, rel=1e-5)

    def test_lmi_bound_is_achieved(self):
        plant = build_plant(NOISE, 0)
        l, gamma, _ = solve_h2_lmi(plant)
        acl, bcl = closed_loop(plant, l)
        assert h2_norm(acl, bcl, plant.cz) == pytest.approx(gamma, rel=1e-5)


class TestDefaultStabilizer:
    def test_zero_for_hurwitz(self):
        np.testing.assert_array_equal(default_stabilizer(SCALAR), np.zeros((1, 1)))

    def test_stabilizes_attitude_plant(self):
        for octant in range(N_OCTANTS):
            plant = build_plant(NOISE, octant)
            l0 = default_stabilizer(plant)
            acl, _ = closed_loop(plant, l0)
            assert np.linalg.eigvals(acl).real.max() < 0.0

    def test_raises_without_structure(self):
        # unstable plant without the attitude block layout
        plant = LinearErrorPlant(
            a=[[1.0]], bw=[[1.0]], cy=[[1.0]], dw=[[1.0]], cz=[[1.0]]
        )
        with pytest.raises(SynthesisError):
            default_stabilizer(plant)


@pytest.fixture(scope="module")
def schedule():
    return synthesize_schedule(NOISE)


class TestSchedule:
    def test_shapes(self, schedule):
        assert schedule.gains.shape == (8, 6, 6)
        assert schedule.gammas.shape == (8,)
        assert np.all(schedule.gammas > 0.0)

    def test_gammas_equal_across_octants(self, schedule):
        # octant centers are orthogonal transforms of each other and the
        # error weight is the identity, so the optimal cost is shared
        np.testing.assert_allclose(schedule.gammas, schedule.gammas[0], rtol=1e-6)

    def test_gains_related_by_symmetry(self, schedule):
        l0 = schedule.gains[0]
        for octant in range(N_OCTANTS):
            r = octant_rotation(octant)
            np.testing.assert_allclose(
                schedule.gains[octant],
                gain_symmetry_transform(l0, r),
                atol=1e-6 * np.linalg.norm(l0),
            )

    def test_every_closed_loop_is_hurwitz(self, schedule):
        for octant in range(N_OCTANTS):
            plant = build_plant(NOISE, octant)
            acl, _ = closed_loop(plant, schedule.gains[octant])
            assert np.linalg.eigvals(acl).real.max() < 0.0

    def test_more_measurement_noise_costs_more(self, schedule):
        noisier = NoiseParams(n_w=1e-3, n_b=1e-4, n_a=5e-2, n_m=2.5)
        plant = build_plant(noisier, 0)
        _, gamma_noisy, _ = solve_h2_care(plant)
        assert gamma_noisy > schedule.gammas[0]


class TestGainFile:
    def test_round_trip(self, schedule, tmp_path):
        path = save_gains(schedule, tmp_path / "gains.json")
        loaded = load_gains(path)
        np.testing.assert_array_equal(loaded.gains, schedule.gains)
        np.testing.assert_array_equal(loaded.gammas, schedule.gammas)
        assert loaded.noise == schedule.noise
        assert loaded.g == schedule.g
        assert loaded.h == schedule.h

    def test_rewrite_is_byte_identical(self, schedule, tmp_path):
        p1 = save_gains(schedule, tmp_path / "a.json")
        p2 = save_gains(load_gains(p1), tmp_path / "b.json")
        assert p1.read_bytes() == p2.read_bytes()

    def test_rejects_wrong_version(self, schedule):
        data = schedule_to_dict(schedule)
        data["format_version"] = 99
        with pytest.raises(GainFileError, match="format_version"):
            schedule_from_dict(data)

    def test_rejects_missing_keys(self, schedule):
        data = schedule_to_dict(schedule)
        del data["gammas"]
        with pytest.raises(GainFileError, match="gammas"):
            schedule_from_dict(data)

    def test_rejects_bad_shape(self, schedule):
        data = schedule_to_dict(schedule)
        data["gains"] = data["gains"][:4]
        with pytest.raises(GainFileError, match="shape"):
            schedule_from_dict(data)

    def test_rejects_non_finite(self, schedule):
        data = schedule_to_dict(schedule)
        data["gains"][0][0][0] = float("nan")
        with pytest.raises(GainFileError, match="finite"):
            schedule_from_dict(data)

    def test_rejects_invalid_json(self, tmp_path):
        path = tmp_path / "bad.json"
        path.write_text("{oops")
        with pytest.raises(GainFileError, match="JSON"):
            load_gains(path)
