import numpy as np
import pytest

from buqo.errors import ConfigurationError
from buqo.operators import FourierMasked, full_pattern, make_radial_fourier
from buqo.sim import (StructureSpec, generate_phantom, inject_artifact,
                      simulate_measurements)


class TestPhantom:
    def test_seed_determinism(self):
        a = generate_phantom(64, StructureSpec(count=2), seed=11)
        b = generate_phantom(64, StructureSpec(count=2), seed=11)
        assert np.array_equal(a.image, b.image)
        assert all(np.array_equal(ma.pixels, mb.pixels)
                   for (ma, _), (mb, _) in zip(a.structures, b.structures))

    def test_no_structures_requested(self):
        p = generate_phantom(64, StructureSpec(count=0), seed=3)
        assert p.structures == []
        assert np.array_equal(p.image, p.base)

    def test_zero_amplitude_equals_base_exactly(self):
        p = generate_phantom(64, StructureSpec(count=2, amplitude=0.0), seed=5)
        assert np.array_equal(p.image, p.base)
        assert len(p.structures) == 2

    def test_values_in_unit_interval(self):
        p = generate_phantom(64, StructureSpec(count=3, amplitude=0.9), seed=1)
        assert p.image.min() >= 0.0 and p.image.max() <= 1.0

    def test_structures_disjoint_and_away_from_border(self):
        p = generate_phantom(64, StructureSpec(count=3), seed=2)
        total = np.zeros((64, 64), dtype=int)
        for mask, _ in p.structures:
            total += mask.pixels
            rows, cols = np.nonzero(mask.pixels)
            assert rows.min() >= 2 and cols.min() >= 2
            assert rows.max() < 62 and cols.max() < 62
        assert total.max() <= 1

    def test_impossible_placement_raises(self):
        with pytest.raises(ConfigurationError):
            generate_phantom(32, StructureSpec(count=40, radius=6.0), seed=0)

    def test_structure_adds_amplitude_at_center(self):
        p = generate_phantom(64, StructureSpec(count=1, amplitude=0.3), seed=4)
        mask, amp = p.structures[0]
        diff = p.image - p.base
        assert amp == 0.3
        assert abs(diff.max() - 0.3) < 0.05 or p.image.max() == 1.0
        assert np.allclose(diff.ravel()[mask.comp_index_set], 0.0)


class TestSimulateMeasurements:
    def test_noiseless_limit(self):
        p = generate_phantom(32, StructureSpec(count=0), seed=0)
        op, _ = make_radial_fourier(32, 20)
        data = simulate_measurements(p.image, op, isnr=np.inf, seed=0)
        assert np.array_equal(data.y, op.apply(p.image))
        assert data.delta == 0.0 and data.epsilon == 0.0

    def test_seed_determinism(self):
        p = generate_phantom(32, StructureSpec(count=0), seed=0)
        op, _ = make_radial_fourier(32, 20)
        a = simulate_measurements(p.image, op, isnr=30, seed=7)
        b = simulate_measurements(p.image, op, isnr=30, seed=7)
        assert np.array_equal(a.y, b.y)
        assert a.delta == b.delta and a.epsilon == b.epsilon

    def test_delta_formula(self):
        p = generate_phantom(32, StructureSpec(count=0), seed=0)
        op = FourierMasked(full_pattern(32))
        data = simulate_measurements(p.image, op, isnr=20, seed=0)
        m = 32 * 32
        expected = np.linalg.norm(op.apply(p.image)) / m * 10 ** (-1.0)
        assert abs(data.delta - expected) < 1e-15
        assert abs(data.epsilon - expected * np.sqrt(m + 2 * np.sqrt(m))) < 1e-12

    def test_delta_decreasing_in_isnr(self):
        p = generate_phantom(32, StructureSpec(count=0), seed=0)
        op, _ = make_radial_fourier(32, 20)
        deltas = [simulate_measurements(p.image, op, isnr=s, seed=0).delta
                  for s in (10, 20, 30, 40)]
        assert all(a > b for a, b in zip(deltas, deltas[1:]))

    def test_noise_norm_within_ball_with_high_probability(self):
        p = generate_phantom(32, StructureSpec(count=0), seed=0)
        op, _ = make_radial_fourier(32, 20)
        clean = op.apply(p.image)
        hits = 0
        trials = 1000
        for seed in range(trials):
            data = simulate_measurements(p.image, op, isnr=25, seed=seed)
            if np.linalg.norm(data.y - clean) <= data.epsilon:
                hits += 1
        assert hits / trials >= 0.93

    def test_isnr_range_validated(self):
        p = generate_phantom(32, StructureSpec(count=0), seed=0)
        op, _ = make_radial_fourier(32, 20)
        with pytest.raises(ConfigurationError):
            simulate_measurements(p.image, op, isnr=-5, seed=0)


class TestInjectArtifact:
    def test_zero_amplitude_is_identity(self, small_disc_mask, rng):
        x = rng.random((16, 16))
        assert np.array_equal(inject_artifact(x, small_disc_mask, 0.0), x)

    def test_support_confined_to_mask(self, small_disc_mask, rng):
        x = rng.random((16, 16)) * 0.5 + 0.25
        out = inject_artifact(x, small_disc_mask, 0.3)
        diff = (out - x).ravel()
        assert np.allclose(diff[small_disc_mask.comp_index_set], 0.0)
        assert np.abs(diff[small_disc_mask.index_set]).max() > 0.0

    def test_output_stays_in_unit_box(self, small_disc_mask, rng):
        x = rng.random((16, 16))
        out = inject_artifact(x, small_disc_mask, 0.9)
        assert out.min() >= 0.0 and out.max() <= 1.0

    def test_checkerboard_sign_pattern(self, small_disc_mask):
        x = np.full((16, 16), 0.5)
        out = inject_artifact(x, small_disc_mask, 0.2)
        diff = out - x
        rows, cols = np.nonzero(small_disc_mask.pixels)
        signs = np.sign(diff[rows, cols])
        assert np.array_equal(signs, np.where((rows + cols) % 2 == 0, 1.0, -1.0))
