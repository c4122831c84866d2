import math

import numpy as np
import pytest

from epi_lab import channels as ch
from epi_lab import fock as fk
from epi_lab import gaussian as ga
from epi_lab import phase_space as ps
from epi_lab.errors import (
    DomainError,
    ParameterError,
    QuadratureError,
    TailError,
    UnsupportedFamilyError,
)


class TestClassicalNoiseChannel:
    def test_near_delta_is_identity(self):
        rho = fk.coherent(0.5, 20)
        f = ps.gaussian_pdf(1e-6, spacing=2.5e-4)
        out = ch.classical_noise_channel(f, rho)
        assert fk.trace_norm_distance(out, rho) <= 1e-4

    def test_vacuum_becomes_thermal(self):
        t = 0.3
        out = ch.classical_noise_channel(ps.gaussian_pdf(t), fk.vacuum(40))
        assert fk.von_neumann_entropy(out) == pytest.approx(ga.g_function(t), abs=1e-4)
        assert fk.trace_norm_distance(out, fk.thermal(t, 40)) <= 1e-4

    def test_moment_bookkeeping(self):
        rho = fk.coherent(0.4 + 0.2j, 40)
        f = ps.gaussian_pdf(0.3, center=(0.5, -0.25))
        out = ch.classical_noise_channel(f, rho)
        m_in, c_in = fk.moments_of_state(rho)
        m_f, c_f = ps.moments(f)
        m_out, c_out = fk.moments_of_state(out)
        assert np.abs(m_out - (m_in + m_f)).max() <= 1e-4
        assert np.abs(c_out - (c_in + c_f)).max() <= 1e-4

    def test_quadrature_guard(self):
        f = ps.gaussian_pdf(0.05, spacing=0.12)
        with pytest.raises(QuadratureError):
            ch.classical_noise_channel(f, fk.vacuum(30))

    def test_tail_guard(self):
        with pytest.raises(TailError):
            ch.classical_noise_channel(ps.gaussian_pdf(1.0), fk.vacuum(25))

    def test_drift_guard(self):
        # a cutoff this small leaks trace through the truncated displacements
        from epi_lab.errors import DriftError
        with pytest.raises(DriftError):
            ch.classical_noise_channel(ps.gaussian_pdf(1.0), fk.vacuum(6))

    def test_trace_and_positivity(self):
        rho = fk.random_mixed(3, 40, seed=2, support=12)
        out = ch.classical_noise_channel(ps.gaussian_pdf(0.4), rho)
        assert out.trace() == pytest.approx(1.0, abs=1e-12)
        assert fk.eigenvalues(out).min() >= -1e-9

    def test_displacement_compatibility(self):
        # (f * rho) displaced by xi1 + xi2 equals f^(xi1) * rho^(xi2)
        rho = fk.coherent(0.3, 30)
        f = ps.gaussian_pdf(0.2)
        xi1 = (2 * f.spacing, -3 * f.spacing)
        xi2 = (0.4, 0.7)
        lhs = fk.displace_state(
            ch.classical_noise_channel(f, rho), (xi1[0] + xi2[0], xi1[1] + xi2[1])
        )
        rhs = ch.classical_noise_channel(f.displaced(xi1), fk.displace_state(rho, xi2))
        assert fk.trace_norm_distance(lhs, rhs) <= 1e-4

    def test_heat_semigroup_compatibility(self):
        # N(t1+t2)(f * rho) = N_cl(t1) f * N(t2) rho
        rho = fk.fock(1, 24)
        f = ps.gaussian_pdf(0.2, spacing=0.1)
        t1, t2 = 0.15, 0.1
        lhs = ch.quantum_heat_flow_fock(ch.classical_noise_channel(f, rho), t1 + t2)
        rhs = ch.classical_noise_channel(
            ps.classical_heat_flow(f, t1), ch.quantum_heat_flow_fock(rho, t2)
        )
        assert fk.trace_norm_distance(lhs, rhs) <= 1e-4


class TestHeatFlowFock:
    def test_zero_time(self):
        rho = fk.thermal(0.5, 20)
        out = ch.quantum_heat_flow_fock(rho, 0.0)
        assert np.array_equal(out.matrix, rho.matrix)

    def test_entropy_value(self):
        out = ch.quantum_heat_flow_fock(fk.vacuum(40), 0.5)
        assert fk.von_neumann_entropy(out) == pytest.approx(ga.g_function(0.5), abs=1e-4)

    def test_multi_matches_single(self):
        rho = fk.thermal(0.4, 30)
        outs = ch.quantum_heat_flow_fock_multi(rho, [0.0, 0.1, 0.2])
        assert np.array_equal(outs[0].matrix, rho.matrix)
        single = ch.quantum_heat_flow_fock(rho, 0.2)
        assert fk.trace_norm_distance(outs[2], single) <= 2e-5

    def test_gaussian_oracle_two_mode(self):
        tm = fk.two_mode_squeezed_vacuum(0.4, 20)
        out = ch.quantum_heat_flow_fock(tm, 0.3, target="A")
        gs = ga.gaussian_heat_flow(ga.tmsv_state(0.4), 0.3, "A")
        mean, cov = fk.moments_of_state(out)
        assert np.abs(cov - gs.cov).max() <= 1e-4
        assert np.abs(mean).max() <= 1e-6


class TestExtendedChannel:
    def test_trivial_memory_reduces(self):
        rho = fk.thermal(0.5, 30)
        f = ps.gaussian_pdf(0.3)
        via_cq = ch.extended_channel(ch.CQState(f, rho))
        direct = ch.classical_noise_channel(f, rho)
        assert np.array_equal(via_cq.matrix, direct.matrix)

    def test_single_label_register_reduces(self):
        rho = fk.fock(1, 30)
        f = ps.gaussian_pdf(0.3)
        reg = ch.RegisterState([1.0], [rho], [f])
        out = ch.extended_channel(reg)
        direct = ch.classical_noise_channel(f, rho)
        assert fk.trace_norm_distance(out.states[0], direct) <= 1e-12

    def test_f1_gaussian_oracle(self):
        tm = fk.two_mode_squeezed_vacuum(0.4, 20)
        f = ps.gaussian_pdf(0.3)
        out = ch.extended_channel(ch.CQState(f, tm), target="A")
        gs = ga.gaussian_heat_flow(ga.tmsv_state(0.4), 0.3, "A")
        _, cov = fk.moments_of_state(out)
        assert np.abs(cov - gs.cov).max() <= 1e-4

    def test_rejects_uncertified_family(self):
        f = ps.gaussian_pdf(0.5, spacing=0.25, extent=6.1)
        conds = [fk.vacuum(4) for _ in range(f.size ** 2)]
        state = ch.CQState(f, conds)
        with pytest.raises(UnsupportedFamilyError):
            ch.extended_channel(state)


class TestBeamSplitter:
    def test_unitary_orthogonal(self):
        U = ch.beam_splitter_unitary((12, 12), 0.3)
        assert np.abs(U @ U.T - np.eye(144)).max() <= 1e-12

    def test_identity_and_swap(self):
        joint = fk.tensor_product(fk.coherent(0.7, 16), fk.thermal(0.4, 16), labels=("A", "B"))
        keep_all = ch.beam_splitter(joint, 1.0)
        assert fk.trace_norm_distance(keep_all, fk.coherent(0.7, 16)) <= 1e-12
        swapped = ch.beam_splitter(joint, 0.0)
        assert fk.trace_norm_distance(swapped, fk.thermal(0.4, 16, label="A")) <= 1e-6

    def test_thermal_mixing(self):
        joint = fk.tensor_product(fk.vacuum(30), fk.thermal(1.0, 30), labels=("A", "B"))
        out = ch.beam_splitter(joint, 0.4)
        assert fk.trace_norm_distance(out, fk.thermal(0.6, 30)) <= 1e-6

    def test_parameter_domain(self):
        joint = fk.tensor_product(fk.vacuum(8), fk.vacuum(8))
        with pytest.raises(ParameterError):
            ch.beam_splitter(joint, 1.2)


class TestQouChannel:
    def test_fixed_point(self):
        omega = ch.qou_environment(1.0, 0.5)
        omega = fk.FockState(omega.mode_dims, omega.matrix, ("A",))
        out = ch.qou_channel_fock(omega, 1.3, 1.0, 0.5)
        assert fk.trace_norm_distance(out, omega) <= 1e-6

    def test_zero_time(self):
        rho = fk.fock(1, 18)
        out = ch.qou_channel_fock(rho, 0.0, 1.0, 0.5)
        assert np.array_equal(out.matrix, rho.matrix)

    def test_semigroup(self):
        rho = fk.fock(1, 25)
        one = ch.qou_channel_fock(ch.qou_channel_fock(rho, 0.3, 1.0, 0.5), 0.7, 1.0, 0.5)
        two = ch.qou_channel_fock(rho, 1.0, 1.0, 0.5)
        assert fk.trace_norm_distance(one, two) <= 1e-5

    def test_gaussian_moment_flow(self):
        rho = fk.thermal(1.2, 34)
        out = ch.qou_channel_fock(rho, 0.6, 1.0, 0.5)
        eta = math.exp(-0.75 * 0.6)
        expected = eta * 1.7 + (1 - eta) * (ga.qou_mean_photon(1.0, 0.5) + 0.5)
        _, cov = fk.moments_of_state(out)
        assert cov[0, 0] == pytest.approx(expected, abs=1e-6)

    def test_two_mode_kernel_matches_gaussian(self):
        tm = fk.two_mode_squeezed_vacuum(0.5, 20)
        out = ch.qou_channel_fock(tm, 0.8, 1.0, 0.5, target="A")
        gs = ga.gaussian_qou_evolution(ga.tmsv_state(0.5), 0.8, 1.0, 0.5, "A")
        mean, cov = fk.moments_of_state(out)
        assert np.abs(cov - gs.cov).max() <= 1e-4
        assert np.abs(mean - gs.mean).max() <= 1e-8

    def test_bad_params(self):
        with pytest.raises(ParameterError):
            ch.qou_channel_fock(fk.vacuum(8), 1.0, 0.5, 0.5)


class TestCQStateMachinery:
    def test_heat_flow_shared_vs_cellwise(self):
        f = ps.gaussian_pdf(0.4, spacing=0.2, extent=5.2)
        rho = fk.thermal(0.3, 14)
        shared = ch.CQState(f, rho)
        cellwise = ch.CQState(f, [rho.copy() for _ in range(f.size ** 2)])
        a = ch.cq_classical_heat_flow(shared, 0.3)
        b = ch.cq_classical_heat_flow(cellwise, 0.3)
        assert np.abs(a.grid.values - b.grid.values).max() <= 1e-10
        mats = np.stack([c.matrix for c in b.conditionals])
        # compare only where the density carries real mass; conditionals at
        # near-empty cells are dominated by FFT rounding
        live = b.grid.values.ravel() > 1e-6 * b.grid.values.max()
        assert np.abs(mats[live] - rho.matrix).max() <= 1e-9

    def test_register_validation(self):
        with pytest.raises(DomainError):
            ch.RegisterState([0.7, 0.7], [fk.vacuum(8), fk.vacuum(8)])
        with pytest.raises(DomainError):
            ch.RegisterState([1.0], [fk.vacuum(8)], [])

    def test_register_heat_flows(self):
        reg = ch.RegisterState(
            [0.5, 0.5],
            [fk.fock(1, 24), fk.vacuum(24)],
            [ps.gaussian_pdf(0.4, spacing=0.1), ps.gaussian_pdf(0.6, spacing=0.1)],
        )
        heated_r = ch.register_heat_flow_R(reg, 0.5)
        assert ps.moments(heated_r.pdfs[0])[1][0, 0] == pytest.approx(0.9, abs=1e-6)
        heated_a = ch.register_heat_flow_A(reg, 0.2)
        assert fk.mean_energy(heated_a.states[1]) == pytest.approx(0.2, abs=1e-6)


class TestConditionalEntropyUnderHeat:
    def test_fock_conditional_entropy_increases(self):
        tm = fk.two_mode_squeezed_vacuum(0.4, 20)
        values = []
        for out in ch.quantum_heat_flow_fock_multi(tm, [0.0, 0.1, 0.3], target="A"):
            values.append(fk.conditional_entropy(out, "A", "M"))
        assert values[0] < values[1] < values[2]
