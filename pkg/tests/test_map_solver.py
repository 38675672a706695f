import numpy as np
import pytest

from buqo.bayes import in_credible_region, region_from_map
from buqo.errors import ConfigurationError
from buqo.map_solver import (PdStepsizes, SolverOptions, default_map_stepsizes,
                             solve_map)
from buqo.operators import (FourierMasked, GradientOp, full_pattern,
                            make_radial_fourier)
from buqo.sim import StructureSpec, generate_phantom, simulate_measurements


class TestStepsizes:
    def test_defaults_satisfy_condition(self):
        phi, _ = make_radial_fourier(32, 20)
        psi = GradientOp(32)
        st = default_map_stepsizes(phi, psi)
        st.validate()
        bound = st.sigma * (st.mu1 * st.norm_psi_sq + st.mu2 * st.norm_phi_sq)
        assert 0.98 < bound < 1.0

    def test_violation_rejected(self):
        st = PdStepsizes(mu1=1.0, mu2=1.0, sigma=1.0, norm_psi_sq=8.0, norm_phi_sq=1.0)
        with pytest.raises(ConfigurationError):
            st.validate()


class TestSolveMap:
    def test_zero_data_returns_zero(self):
        phi, _ = make_radial_fourier(16, 8)
        psi = GradientOp(16)
        y = np.zeros(phi.out_shape, dtype=complex)
        x, trace = solve_map(y, phi, psi, lam=1.0, epsilon=0.5,
                             x0=np.zeros((16, 16)))
        assert np.allclose(x, 0.0)
        assert trace.iterations <= 2

    def test_full_sampling_noiseless_recovers_phantom(self):
        n = 32
        phantom = generate_phantom(n, StructureSpec(count=0), seed=1)
        phi = FourierMasked(full_pattern(n))
        y = phi.apply(phantom.image)
        x, trace = solve_map(y, phi, GradientOp(n), lam=1e-3, epsilon=1e-4,
                             opts=SolverOptions(max_iter=4000, tol=1e-7))
        rel_err = np.linalg.norm(x - phantom.image) / np.linalg.norm(phantom.image)
        assert rel_err <= 1e-2

    def test_radial_measurement_feasibility(self):
        n = 64
        phantom = generate_phantom(n, StructureSpec(count=1), seed=2)
        phi, _ = make_radial_fourier(n, 75)
        data = simulate_measurements(phantom.image, phi, isnr=30, seed=3)
        x, trace = solve_map(data.y, phi, GradientOp(n), lam=1.0,
                             epsilon=data.epsilon)
        assert np.linalg.norm(phi.apply(x) - data.y) <= data.epsilon * (1 + 1e-3)
        assert x.min() >= 0.0 and x.max() <= 1.0

    def test_residual_trace_settles_below_tolerance(self):
        n = 32
        phantom = generate_phantom(n, StructureSpec(count=0), seed=4)
        phi, _ = make_radial_fourier(n, 40)
        data = simulate_measurements(phantom.image, phi, isnr=30, seed=5)
        _, trace = solve_map(data.y, phi, GradientOp(n), lam=1.0,
                             epsilon=data.epsilon)
        tail = np.array(trace.data_residual[-50:])
        assert np.all(tail <= data.epsilon * (1 + 1e-3))

    def test_self_consistent_credible_region_membership(self):
        n = 32
        phantom = generate_phantom(n, StructureSpec(count=0), seed=6)
        phi, _ = make_radial_fourier(n, 40)
        data = simulate_measurements(phantom.image, phi, isnr=25, seed=7)
        psi = GradientOp(n)
        x, _ = solve_map(data.y, phi, psi, lam=1.0, epsilon=data.epsilon)
        region = region_from_map(x, psi, data.epsilon, lam=1.0, alpha=0.05)
        ok, _ = in_credible_region(x, region, phi, psi, data.y)
        assert ok

    def test_determinism(self):
        n = 32
        phantom = generate_phantom(n, StructureSpec(count=0), seed=8)
        phi, _ = make_radial_fourier(n, 40)
        data = simulate_measurements(phantom.image, phi, isnr=30, seed=9)
        opts = SolverOptions(max_iter=300, tol=0.0)
        x1, t1 = solve_map(data.y, phi, GradientOp(n), 1.0, data.epsilon, opts=opts)
        x2, t2 = solve_map(data.y, phi, GradientOp(n), 1.0, data.epsilon, opts=opts)
        assert np.array_equal(x1, x2)
        assert t1.rel_change == t2.rel_change

    def test_bad_initial_point_rejected(self):
        phi, _ = make_radial_fourier(16, 8)
        y = np.zeros(phi.out_shape, dtype=complex)
        with pytest.raises(ConfigurationError):
            solve_map(y, phi, GradientOp(16), 1.0, 0.5,
                      x0=np.full((16, 16), 2.0))

    def test_trace_csv_roundtrip(self, tmp_path):
        phi, _ = make_radial_fourier(16, 8)
        y = np.zeros(phi.out_shape, dtype=complex)
        _, trace = solve_map(y, phi, GradientOp(16), 1.0, 0.5,
                             x0=np.zeros((16, 16)))
        path = tmp_path / "trace.csv"
        trace.to_csv(path)
        lines = path.read_text().strip().splitlines()
        assert lines[0] == "iter,data_residual,reg_value,rel_change"
        assert len(lines) == trace.iterations + 1
