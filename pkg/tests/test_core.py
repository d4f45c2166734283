import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

import bohmlab as bl
from bohmlab.errors import GridMismatchError, ZeroNormError


@pytest.fixture
def grid():
    return bl.SpatialGrid(-10.0, 10.0, 1024)


def random_state(grid, rng):
    amps = rng.standard_normal(grid.n_points) + 1j * rng.standard_normal(grid.n_points)
    # taper so spectral operators stay well conditioned
    amps *= np.exp(-grid.x ** 2 / 8.0)
    return bl.normalize(bl.WaveFunction(grid, amps))


class TestGrid:
    def test_dx_and_periodicity(self, grid):
        assert grid.dx == pytest.approx(20.0 / 1024)
        assert grid.x[0] == -10.0
        assert grid.x[-1] == pytest.approx(10.0 - grid.dx)

    def test_wavenumbers_signed_symmetric(self, grid):
        k = grid.wavenumbers
        # symmetric about zero except the Nyquist mode
        assert np.allclose(np.sort(k[1:]), -np.sort(-k[1:]) * 0 + np.sort(k[1:]))
        assert k[0] == 0.0
        pos = k[1:grid.n_points // 2]
        neg = k[grid.n_points // 2 + 1:]
        assert np.allclose(np.sort(pos), np.sort(-neg))

    def test_rejects_non_power_of_two(self):
        with pytest.raises(ValueError):
            bl.SpatialGrid(0.0, 1.0, 1000)

    def test_wrap(self, grid):
        assert grid.wrap(10.0) == pytest.approx(-10.0)
        assert grid.wrap(-10.5) == pytest.approx(9.5)


class TestNormalize:
    def test_already_normalized_is_identity(self, grid):
        psi = bl.gaussian_packet(grid, 1.0)
        out = bl.normalize(psi)
        assert np.allclose(out.amplitudes, psi.amplitudes, atol=1e-15)

    def test_scaling_undone(self, grid):
        psi = bl.gaussian_packet(grid, 1.0)
        scaled = bl.WaveFunction(grid, 2.0 * psi.amplitudes)
        out = bl.normalize(scaled)
        assert np.allclose(out.amplitudes, psi.amplitudes, atol=1e-14)
        assert abs(out.norm_squared() - 1.0) < 1e-12

    def test_zero_state_raises(self, grid):
        psi = bl.WaveFunction(grid, np.zeros(grid.n_points, complex))
        with pytest.raises(ZeroNormError):
            bl.normalize(psi)


class TestInnerProduct:
    def test_self_overlap_is_one(self, grid):
        psi = bl.gaussian_packet(grid, 1.3, 0.7, 1.0)
        assert bl.inner_product(psi, psi) == pytest.approx(1.0, abs=1e-12)

    def test_orthogonal_plane_waves(self):
        g = bl.SpatialGrid(0.0, 2 * np.pi, 256)
        w1, w2 = bl.plane_wave(g, 1), bl.plane_wave(g, 3)
        assert abs(bl.inner_product(w1, w2)) < 1e-12

    def test_offset_gaussians_vs_analytic(self, grid):
        # closed-form overlap of unit-width Gaussians one apart: exp(-1/8)
        a = bl.gaussian_packet(grid, 1.0, -0.5)
        b = bl.gaussian_packet(grid, 1.0, 0.5)
        assert bl.inner_product(a, b).real == pytest.approx(
            0.8824969025845955, abs=1e-12)

    def test_refined_grid_agrees(self):
        coarse = bl.SpatialGrid(-10.0, 10.0, 512)
        fine = bl.SpatialGrid(-10.0, 10.0, 1024)
        val_c = bl.inner_product(bl.gaussian_packet(coarse, 1.0, -0.5, 0.7),
                                 bl.gaussian_packet(coarse, 0.8, 0.9))
        val_f = bl.inner_product(bl.gaussian_packet(fine, 1.0, -0.5, 0.7),
                                 bl.gaussian_packet(fine, 0.8, 0.9))
        assert val_c == pytest.approx(val_f, abs=1e-12)

    def test_grid_mismatch_raises(self, grid):
        other = bl.SpatialGrid(-5.0, 5.0, 256)
        with pytest.raises(GridMismatchError):
            bl.inner_product(bl.gaussian_packet(grid, 1.0),
                             bl.gaussian_packet(other, 1.0))

    def test_conjugate_symmetry(self, grid):
        rng = np.random.default_rng(3)
        a, b = random_state(grid, rng), random_state(grid, rng)
        assert bl.inner_product(a, b) == pytest.approx(
            np.conj(bl.inner_product(b, a)), abs=1e-14)

    @settings(max_examples=30, deadline=None)
    @given(re=st.floats(-5, 5, allow_nan=False), im=st.floats(-5, 5, allow_nan=False))
    def test_sesquilinear_in_first_slot(self, re, im):
        grid = bl.SpatialGrid(-10.0, 10.0, 256)
        rng = np.random.default_rng(11)
        phi, psi = random_state(grid, rng), random_state(grid, rng)
        a = complex(re, im)
        lhs = bl.inner_product(phi.with_amplitudes(a * phi.amplitudes), psi)
        rhs = np.conj(a) * bl.inner_product(phi, psi)
        assert lhs == pytest.approx(rhs, abs=1e-10)


class TestApply:
    def test_velocity_on_plane_wave(self):
        g = bl.SpatialGrid(0.0, 2 * np.pi, 256)
        pw = bl.plane_wave(g, 5)
        out = bl.VelocityOperator().apply(pw)
        assert np.allclose(out.amplitudes, 5.0 * pw.amplitudes, atol=1e-12)

    def test_hamiltonian_on_ho_ground_state(self, grid):
        pot = bl.harmonic_potential(grid, 1.0)
        psi = bl.harmonic_ground_state(grid, 1.0)
        out = bl.HamiltonianOperator(pot.values).apply(psi)
        interior = np.abs(grid.x) < 6.0
        assert np.allclose(out.amplitudes[interior],
                           0.5 * psi.amplitudes[interior], atol=1e-8)

    def test_position_on_centered_gaussian_is_odd(self, grid):
        psi = bl.gaussian_packet(grid, 1.0, 0.0)
        out = bl.PositionOperator().apply(psi)
        assert abs(bl.inner_product(psi, out)) < 1e-12


class TestExpectation:
    def test_position_of_offset_gaussian(self, grid):
        psi = bl.gaussian_packet(grid, 1.0, 2.25)
        assert bl.expectation(bl.PositionOperator(), psi) == pytest.approx(
            2.25, abs=1e-10)

    def test_velocity_of_plane_wave(self):
        g = bl.SpatialGrid(0.0, 2 * np.pi, 256)
        assert bl.expectation(bl.VelocityOperator(), bl.plane_wave(g, 4)) == \
            pytest.approx(4.0, abs=1e-12)

    def test_ho_ground_state_energy(self, grid):
        pot = bl.harmonic_potential(grid, 1.0)
        psi = bl.harmonic_ground_state(grid, 1.0)
        assert bl.expectation(bl.HamiltonianOperator(pot.values), psi) == \
            pytest.approx(0.5, abs=1e-8)

    def test_imaginary_residue_small(self, grid):
        rng = np.random.default_rng(5)
        psi = random_state(grid, rng)
        val = bl.inner_product(psi, bl.MomentumOperator().apply(psi))
        assert abs(val.imag) < 1e-10

    def test_nonunit_constants(self, grid):
        c = bl.PhysicalConstants(hbar=2.0, mass=0.5)
        g = bl.SpatialGrid(0.0, 2 * np.pi, 256)
        pw = bl.plane_wave(g, 3)
        assert bl.expectation(bl.VelocityOperator(c), pw) == pytest.approx(
            2.0 * 3.0 / 0.5, abs=1e-10)


class TestHermiticity:
    @pytest.mark.parametrize("make_op", [
        lambda g: bl.PositionOperator(),
        lambda g: bl.MomentumOperator(),
        lambda g: bl.VelocityOperator(),
        lambda g: bl.HamiltonianOperator(bl.harmonic_potential(g, 1.0).values),
        lambda g: bl.ScaledOperator(1.5, bl.MomentumOperator()),
        lambda g: bl.SumOperator(bl.PositionOperator(), bl.VelocityOperator()),
    ])
    def test_hundred_random_pairs(self, make_op):
        grid = bl.SpatialGrid(-10.0, 10.0, 256)
        op = make_op(grid)
        rng = np.random.default_rng(17)
        for _ in range(100):
            phi, psi = random_state(grid, rng), random_state(grid, rng)
            # normalized states; scale estimate O(10) covers X, V, H here
            assert bl.core.hermiticity_defect(op, phi, psi) < 1e-10 * 10.0


class TestSpectralDerivative:
    @pytest.mark.parametrize("k_index", [0, 1, 7, -5, 63])
    def test_plane_wave_exact(self, k_index):
        g = bl.SpatialGrid(0.0, 2 * np.pi, 256)
        pw = bl.plane_wave(g, k_index)
        d = bl.spectral_derivative(g, pw.amplitudes)
        k = 2 * np.pi * k_index / g.length
        if k_index == 0:
            assert np.max(np.abs(d)) < 1e-14
        else:
            rel = np.max(np.abs(d - 1j * k * pw.amplitudes)) / abs(k)
            assert rel < 1e-12
