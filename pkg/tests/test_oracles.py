"""Cross-checks for the independent validation oracles."""

import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from nanocap.lattice import build_ribbon
from nanocap.model import AppliedField, ModelParams, ramp_potential
from nanocap.oracles import (
    ed_ground_energy,
    lr_capacitance,
    quantum_cap_estimate,
    quantum_capacitance,
    tube_gap,
)
from nanocap.response import capacitance_fd
from nanocap.scf import fermi_occupations, ground_state


class TestQuantumCapacitance:
    def test_graphene_velocity_lands_near_hundred(self):
        c = quantum_capacitance(8e5)
        assert 95.0 <= c <= 100.0
        assert c == pytest.approx(96.8511466, rel=1e-6)

    def test_inverse_proportionality(self):
        assert quantum_capacitance(1.6e6) == pytest.approx(
            quantum_capacitance(8e5) / 2.0, rel=1e-12)

    def test_rejects_nonpositive_velocity(self):
        for bad in (0.0, -8e5, math.inf):
            with pytest.raises(ValueError):
                quantum_capacitance(bad)

    @given(st.floats(min_value=1e-9, max_value=1e-3))
    @settings(max_examples=30, deadline=None)
    def test_box_length_cancels(self, box):
        ref = quantum_cap_estimate(8e5, 1e-6)
        alt = quantum_cap_estimate(8e5, box)
        assert alt.c_q_per_length == pytest.approx(ref.c_q_per_length,
                                                   rel=1e-9)
        assert alt.level_spacing > 0.0


class TestTubeGap:
    def test_metallic_family(self):
        for m in (6, 9, 12):
            assert tube_gap(m) < 1e-6

    def test_semiconducting_values(self):
        # minima sit at | |2 cos(pi j / m)| - 1 | doubled; frozen anchors
        assert tube_gap(8) == pytest.approx(0.469266, abs=1e-5)
        assert tube_gap(10) == pytest.approx(0.351141, abs=1e-5)
        assert tube_gap(11) == pytest.approx(0.338340, abs=1e-5)

    def test_rejects_tiny_tubes(self):
        with pytest.raises(ValueError):
            tube_gap(2)

    @given(st.integers(min_value=3, max_value=36))
    @settings(max_examples=34, deadline=None)
    def test_divisibility_rule(self, m):
        gap = tube_gap(m)
        if m % 3 == 0:
            assert gap < 1e-6
        else:
            assert gap > 0.05


class TestLinearResponse:
    def test_matches_finite_difference_when_gapped(self):
        lat = build_ribbon("BN", 4, 8)
        lr = lr_capacitance(lat, ramp_potential(lat, 0.001))
        fd = capacitance_fd(lat, ModelParams(), 0.001)
        assert lr.c_natural == pytest.approx(fd.c_natural, rel=0.01)
        assert lr.shell_engaged is False

    def test_matches_finite_difference_with_fermi_shell(self):
        # L/2 even leaves a partially filled degenerate level; its sharp
        # re-occupation dominates the response and must match the SCF route
        lat = build_ribbon("C", 3, 8)
        lr = lr_capacitance(lat, ramp_potential(lat, 0.001))
        fd = capacitance_fd(lat, ModelParams(), 0.001)
        assert lr.shell_engaged is True
        assert lr.c_natural == pytest.approx(fd.c_natural, rel=0.01)

    def test_zero_profile_gives_zero(self):
        lat = build_ribbon("BN", 4, 8)
        zero = AppliedField(0.0, np.zeros(lat.n_sites))
        r = lr_capacitance(lat, zero)
        assert r.c_natural == 0.0
        assert r.q_bottom_shift == 0.0

    def test_response_is_linear_in_profile(self):
        lat = build_ribbon("BN", 4, 8)
        small = lr_capacitance(lat, ramp_potential(lat, 0.001))
        large = lr_capacitance(lat, ramp_potential(lat, 0.002))
        assert large.q_bottom_shift == pytest.approx(
            2.0 * small.q_bottom_shift, rel=1e-9)
        assert large.c_natural == pytest.approx(small.c_natural, rel=1e-9)

    def test_refuses_interacting_parameters(self):
        lat = build_ribbon("C", 3, 8)
        field = ramp_potential(lat, 0.01)
        with pytest.raises(ValueError, match="without interactions"):
            lr_capacitance(lat, field, params=ModelParams(u=1.0))
        with pytest.raises(ValueError, match="without interactions"):
            lr_capacitance(lat, field, params=ModelParams(v=0.5))

    def test_density_shift_conserves_charge(self):
        for mat, n_rows, length in (("C", 3, 8), ("BN", 4, 8), ("BCN", 3, 12)):
            lat = build_ribbon(mat, n_rows, length)
            field = ramp_potential(lat, 0.003)
            r = lr_capacitance(lat, field)
            # top electrode must mirror the bottom shift through the bulk
            assert math.isfinite(r.c_natural)
            assert r.c_natural >= 0.0


class TestExactDiagonalization:
    def test_free_fermions_reproduce_band_sum(self):
        lat = build_ribbon("C", 2, 4)
        h0 = np.zeros((8, 8))
        for i, j in lat.bonds:
            h0[i, j] = h0[j, i] = -1.0
        eps = np.linalg.eigvalsh(h0)
        band = 2.0 * float(eps @ fermi_occupations(eps, 4))
        assert ed_ground_energy(lat, ModelParams()) == pytest.approx(
            band, abs=1e-9)

    @pytest.mark.parametrize("u,v", [(1.0, 0.0), (0.0, 0.5), (1.0, 0.5)])
    def test_mean_field_energy_is_an_upper_bound(self, u, v):
        lat = build_ribbon("C", 2, 4)
        params = ModelParams(u=u, v=v)
        e_exact = ed_ground_energy(lat, params)
        sol = ground_state(lat, params, None)
        assert sol.total_energy >= e_exact - 1e-9

    def test_frozen_interacting_anchor(self):
        lat = build_ribbon("C", 2, 4)
        assert ed_ground_energy(lat, ModelParams(u=1.0)) == pytest.approx(
            -10.612041, abs=1e-5)

    def test_site_cap_enforced(self):
        lat = build_ribbon("C", 3, 4)  # 12 sites
        with pytest.raises(ValueError, match="cap"):
            ed_ground_energy(lat, ModelParams())

    def test_field_lowers_the_ground_energy(self):
        # zero-mean profile couples at second order only, so any bias helps
        lat = build_ribbon("C", 2, 4)
        params = ModelParams(u=1.0, v=0.5)
        e0 = ed_ground_energy(lat, params)
        ev = ed_ground_energy(lat, params, ramp_potential(lat, 0.5))
        assert ev < e0 + 1e-12
