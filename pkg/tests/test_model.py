"""Field profiles, mean-field matrix assembly and the energy functional."""
import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from nanocap.lattice import build_ribbon
from nanocap.model import (
    AppliedField,
    MeanFieldHamiltonian,
    ModelParams,
    build_mf_hamiltonian,
    ramp_potential,
    step_potential,
    total_energy,
)


def uniform_state(lat, value=0.5):
    n = np.full(lat.n_sites, value)
    return (n, n.copy())


class TestModelParams:
    def test_defaults(self):
        p = ModelParams()
        assert p.u == 0.0 and p.v == 0.0 and p.t == 1.0 and p.t_ev == 2.7

    @pytest.mark.parametrize(
        "kwargs",
        [dict(u=-0.1), dict(v=-1e-9), dict(t=0.0), dict(t=-1.0),
         dict(t_ev=0.0), dict(filling=0.5)],
    )
    def test_rejects_bad_values(self, kwargs):
        with pytest.raises(ValueError):
            ModelParams(**kwargs)


class TestRamp:
    def test_endpoint_values(self):
        lat = build_ribbon("C", 2, 4)
        field = ramp_potential(lat, 0.01)
        x = lat.positions[:, 0]
        assert field.profile[x == x.min()] == pytest.approx(+0.005, abs=1e-12)
        assert field.profile[x == x.max()] == pytest.approx(-0.005, abs=1e-12)

    def test_zero_field(self):
        lat = build_ribbon("C", 3, 6)
        field = ramp_potential(lat, 0.0)
        assert np.all(field.profile == 0.0)
        assert AppliedField.zero(lat).delta_v == 0.0

    @settings(max_examples=25, deadline=None)
    @given(
        n=st.integers(2, 8),
        half_length=st.integers(2, 6),
        dv=st.floats(-0.5, 0.5, allow_nan=False),
    )
    def test_profile_properties(self, n, half_length, dv):
        lat = build_ribbon("C", n, 2 * half_length)
        field = ramp_potential(lat, dv)
        assert abs(field.profile.mean()) < 1e-12 * max(1.0, abs(dv))
        assert field.profile.max() - field.profile.min() == pytest.approx(
            abs(dv), abs=1e-12
        )

    def test_sign_flip_negates_profile(self):
        lat = build_ribbon("C", 3, 6)
        up = ramp_potential(lat, 0.02)
        down = ramp_potential(lat, -0.02)
        assert np.allclose(up.profile, -down.profile, atol=1e-15)

    def test_monotone_across_width(self):
        lat = build_ribbon("C", 5, 6)
        field = ramp_potential(lat, 0.1)
        order = np.argsort(lat.positions[:, 0])
        assert np.all(np.diff(field.profile[order]) <= 1e-15)


class TestStepProfile:
    def test_values(self):
        lat = build_ribbon("C", 4, 6)
        field = step_potential(lat, 0.02)
        assert np.all(field.profile[lat.electrode_bottom] == pytest.approx(0.01))
        assert np.all(field.profile[lat.electrode_top] == pytest.approx(-0.01))
        interior = np.setdiff1d(
            np.arange(lat.n_sites),
            np.concatenate([lat.electrode_bottom, lat.electrode_top]),
        )
        assert np.all(field.profile[interior] == 0.0)
        assert abs(field.profile.mean()) < 1e-15


class TestAppliedFieldValidation:
    def test_rejects_nonzero_mean(self):
        with pytest.raises(ValueError):
            AppliedField(delta_v=1.0, profile=np.array([1.0, 1.0, 0.0, 0.0]))

    def test_rejects_span_mismatch(self):
        with pytest.raises(ValueError):
            AppliedField(delta_v=2.0, profile=np.array([0.5, -0.5]))


class TestHamiltonian:
    def test_noninteracting_carbon(self):
        lat = build_ribbon("C", 2, 4)
        h = build_mf_hamiltonian(lat, ModelParams(), uniform_state(lat), None, "up")
        assert np.all(np.diag(h) == 0.0)
        assert np.array_equal(h, h.T)
        for i, j in lat.bonds:
            assert h[i, j] == -1.0
        assert np.count_nonzero(h) == 2 * len(lat.bonds)

    def test_bn_site_energies_on_diagonal(self):
        lat = build_ribbon("BN", 2, 4)
        h = build_mf_hamiltonian(lat, ModelParams(), uniform_state(lat), None, "up")
        assert np.all(np.diag(h)[lat.sublattice > 0] == +1.0)
        assert np.all(np.diag(h)[lat.sublattice < 0] == -1.0)

    def test_hubbard_diagonal_vanishes_at_neutrality(self):
        # half filling per spin is the compensated background: no Hartree shift
        lat = build_ribbon("C", 2, 4)
        h = build_mf_hamiltonian(
            lat, ModelParams(u=1.0, v=0.7), uniform_state(lat), None, "up"
        )
        assert np.all(np.diag(h) == pytest.approx(0.0))

    def test_hubbard_uses_opposite_spin(self):
        lat = build_ribbon("C", 2, 4)
        n_up = np.full(lat.n_sites, 0.75)
        n_down = np.full(lat.n_sites, 0.25)
        h_up = build_mf_hamiltonian(lat, ModelParams(u=2.0), (n_up, n_down), None, "up")
        h_down = build_mf_hamiltonian(lat, ModelParams(u=2.0), (n_up, n_down), None, "down")
        assert np.all(np.diag(h_up) == pytest.approx(2.0 * (0.25 - 0.5)))
        assert np.all(np.diag(h_down) == pytest.approx(2.0 * (0.75 - 0.5)))

    def test_neighbour_term_counts_each_bond(self):
        lat = build_ribbon("C", 2, 4)
        h = build_mf_hamiltonian(
            lat, ModelParams(v=0.5), uniform_state(lat, 0.75), None, "up"
        )
        deg = lat.degrees()
        # V * sum over neighbours of excess density 0.5 -> 0.25 * degree
        assert np.allclose(np.diag(h), 0.25 * deg)

    def test_field_enters_diagonal_linearly(self):
        lat = build_ribbon("C", 3, 6)
        field = ramp_potential(lat, 0.05)
        p = ModelParams(u=1.0, v=0.3)
        state = uniform_state(lat)
        h0 = build_mf_hamiltonian(lat, p, state, None, "up")
        hf = build_mf_hamiltonian(lat, p, state, field, "up")
        assert np.allclose(hf - h0, np.diag(field.profile), atol=1e-15)

    def test_particle_hole_symmetric_spectrum(self):
        lat = build_ribbon("C", 3, 6)
        h = build_mf_hamiltonian(lat, ModelParams(), uniform_state(lat), None, "up")
        eps = np.linalg.eigvalsh(h)
        assert np.allclose(eps + eps[::-1], 0.0, atol=1e-12)

    def test_workspace_matches_one_shot_builder(self):
        lat = build_ribbon("BN", 3, 4)
        p = ModelParams(u=1.2, v=0.4)
        field = ramp_potential(lat, 0.02)
        rng = np.random.default_rng(7)
        n_up = rng.uniform(0.2, 0.8, lat.n_sites)
        n_down = rng.uniform(0.2, 0.8, lat.n_sites)
        ws = MeanFieldHamiltonian(lat, p, field)
        assert np.allclose(
            ws.assemble(n_down, n_up + n_down),
            build_mf_hamiltonian(lat, p, (n_up, n_down), field, "up"),
            atol=1e-15,
        )

    def test_rejects_bad_densities(self):
        lat = build_ribbon("C", 2, 4)
        good = np.full(lat.n_sites, 0.5)
        with pytest.raises(ValueError):
            build_mf_hamiltonian(lat, ModelParams(), (good[:-1], good), None, "up")
        with pytest.raises(ValueError):
            build_mf_hamiltonian(
                lat, ModelParams(), (good, np.full(lat.n_sites, 1.5)), None, "up"
            )
        with pytest.raises(ValueError):
            build_mf_hamiltonian(lat, ModelParams(), (good, good), None, "sideways")


class TestTotalEnergy:
    def test_noninteracting_is_band_sum(self):
        lat = build_ribbon("C", 2, 4)
        h = build_mf_hamiltonian(lat, ModelParams(), uniform_state(lat), None, "up")
        eps = np.linalg.eigvalsh(h)
        occ = eps[: lat.n_sites // 2]
        e = total_energy(ModelParams(), lat, uniform_state(lat), (occ, occ))
        assert e == pytest.approx(2.0 * occ.sum(), abs=1e-12)

    def test_hubbard_double_counting_value(self):
        lat = build_ribbon("C", 2, 4)
        e = total_energy(
            ModelParams(u=1.0), lat, uniform_state(lat, 1.0),
            (np.zeros(4), np.zeros(4))
        )
        assert e == pytest.approx(-2.0, abs=1e-12)  # -U * 8 * (1/2)^2

    def test_no_double_counting_at_neutrality(self):
        lat = build_ribbon("C", 2, 4)
        e = total_energy(
            ModelParams(u=1.3, v=0.8), lat, uniform_state(lat),
            (np.full(4, -1.0), np.full(4, -1.0))
        )
        assert e == pytest.approx(-8.0, abs=1e-12)  # band sum only

    def test_neighbour_double_counting_value(self):
        lat = build_ribbon("C", 2, 4)
        ones = np.ones(lat.n_sites)
        e = total_energy(
            ModelParams(v=0.5), lat, (ones, ones), (np.zeros(4), np.zeros(4))
        )
        # every bond carries excess (1)(1), counted once
        assert e == pytest.approx(-0.5 * len(lat.bonds), abs=1e-12)
