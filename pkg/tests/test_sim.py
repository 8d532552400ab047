import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from slipflow import ParameterError, SlipState
from slipflow.sim import (
    Mixed,
    Motion,
    Renderer,
    Scenario,
    gaussian_noise,
    generate_sequence,
    make_texture,
    render_frame,
    translated_pair,
)
from slipflow.slip import build_masks

from oracles import autocorrelation, best_integer_shift, gaussian_peak_offset


def crop(img, roi, half=40):
    cx, cy = int(roi.cx), int(roi.cy)
    return img[cy - half:cy + half, cx - half:cx + half]


class TestTexture:
    def test_deterministic(self):
        assert np.array_equal(make_texture(7, 64, 48), make_texture(7, 64, 48))

    def test_seeds_differ(self):
        assert not np.array_equal(make_texture(7, 64, 48), make_texture(8, 64, 48))

    def test_range_attained(self):
        t = make_texture(3, 100, 80)
        assert t.min() == pytest.approx(0.2, abs=1e-15) and t.max() == pytest.approx(0.8, abs=1e-15)

    def test_autocorrelation_length(self):
        # Gaussian-filtered white noise has autocorrelation exp(-tau^2 / (4 sigma^2))
        lengths = []
        for seed in range(4):
            ac = autocorrelation(make_texture(seed, 256, 256, 0.25), 4)
            lengths.append(4 / (2 * math.sqrt(-math.log(ac))))
        assert np.mean(lengths) == pytest.approx(4.0, rel=0.15)

    def test_finer_cutoff_decorrelates_faster(self):
        coarse = autocorrelation(make_texture(0, 128, 128, 0.2), 3)
        fine = autocorrelation(make_texture(0, 128, 128, 0.5), 3)
        assert fine < coarse

    @pytest.mark.parametrize("cutoff", [0.0, 1.5, -0.1])
    def test_bad_cutoff(self, cutoff):
        with pytest.raises(ParameterError):
            make_texture(0, 32, 32, cutoff)


def test_translated_pair_integer_shift_is_exact():
    a, b = translated_pair(2, 64, 64, 3, -2)
    assert np.array_equal(b, np.roll(a, (-2, 3), axis=(0, 1)))


def test_noise_is_standard_normal_and_per_frame():
    z = gaussian_noise(1, 0, (200, 200))
    assert abs(z.mean()) < 0.02 and abs(z.std() - 1) < 0.02
    assert np.array_equal(z, gaussian_noise(1, 0, (200, 200)))
    assert not np.array_equal(z, gaussian_noise(1, 1, (200, 200)))


class TestRender:
    def test_static_frames_identical(self):
        sc = Scenario(seed=1, num_frames=6)
        assert np.array_equal(render_frame(sc, 0).data, render_frame(sc, 5).data)

    def test_static_frames_differ_only_by_noise(self):
        sc = Scenario(seed=1, num_frames=6, noise_sigma=0.01)
        diff = render_frame(sc, 5).data - render_frame(sc, 0).data
        assert 0 < np.abs(diff).max() < 0.1

    def test_out_of_range(self):
        sc = Scenario(num_frames=4)
        with pytest.raises(ParameterError):
            render_frame(sc, 4)
        with pytest.raises(ParameterError):
            render_frame(sc, -1)

    def test_slip_integer_correlation_peak(self):
        sc = Scenario(seed=3, motion=Motion.slip(2.0), num_frames=3)
        f0, f1 = render_frame(sc, 0).data, render_frame(sc, 1).data
        shift, _ = best_integer_shift(crop(f0, sc.roi), crop(f1, sc.roi), 4)
        assert shift == (0, 2)

    @pytest.mark.parametrize("motion,expected", [(Motion.slip(1.5), (0.0, 1.5)), (Motion.rotate(-2.5), (-2.5, 0.0))])
    def test_subpixel_consistency(self, motion, expected):
        sc = Scenario(seed=4, motion=motion, num_frames=2)
        f0, f1 = (crop(render_frame(sc, t).data, sc.roi) for t in (0, 1))
        (sx, sy), table = best_integer_shift(f0, f1, 4)
        ox = gaussian_peak_offset(table[(sx - 1, sy)], table[(sx, sy)], table[(sx + 1, sy)])
        oy = gaussian_peak_offset(table[(sx, sy - 1)], table[(sx, sy)], table[(sx, sy + 1)])
        assert abs(sx + ox - expected[0]) <= 0.1
        assert abs(sy + oy - expected[1]) <= 0.1

    @pytest.mark.parametrize("motion", [Motion.slip(2.0), Motion.rotate(3.0), Motion.spin(0.05)])
    def test_housing_invariant(self, motion):
        sc = Scenario(seed=5, motion=motion, num_frames=6)
        frames, _ = generate_sequence(sc)
        out = build_masks(sc.roi, sc.width, sc.height).outside
        for f in frames[1:]:
            assert np.array_equal(f.data[out], frames[0].data[out])

    def test_housing_level(self):
        sc = Scenario()
        img = render_frame(sc, 0).data
        assert img[0, 0] == pytest.approx(0.05, abs=1e-12)
        # the ring highlight sits just outside the lens
        assert img[int(sc.roi.cy), int(sc.roi.cx + sc.roi.radius + 6)] > 0.1

    def test_drift_exact(self):
        sc = Scenario(seed=2, num_frames=5, illumination_drift=0.02)
        r = Renderer(sc)
        means = [r.render(t).data[r.lens].mean() for t in range(5)]
        np.testing.assert_allclose(np.diff(means), 0.02, atol=1e-12)

    def test_drift_leaves_housing_alone(self):
        sc = Scenario(seed=2, num_frames=5, illumination_drift=0.02)
        r = Renderer(sc)
        assert np.array_equal(r.render(4).data[~r.lens], r.render(0).data[~r.lens])

    def test_spin_pose_rotates_about_centre(self):
        r = Renderer(Scenario(motion=Motion.spin(0.1), num_frames=4))
        theta, dx, dy = r.pose(3)
        assert theta == pytest.approx(0.3) and dx == 0 and dy == 0

    @settings(max_examples=10, deadline=None)
    @given(seed=st.integers(0, 2**32 - 1), vy=st.floats(-4, 4))
    def test_deterministic_across_instances(self, seed, vy):
        sc = Scenario(seed=seed, width=64, height=64, motion=Motion.slip(vy), num_frames=3, noise_sigma=0.01)
        a, _ = generate_sequence(sc)
        b, _ = generate_sequence(sc)
        assert all(np.array_equal(x.data, y.data) for x, y in zip(a, b))

    @settings(max_examples=10, deadline=None)
    @given(vy=st.floats(-6, 6), drift=st.floats(-0.05, 0.05), noise=st.floats(0, 0.2))
    def test_intensity_range(self, vy, drift, noise):
        sc = Scenario(width=64, height=64, motion=Motion.slip(vy), num_frames=4, illumination_drift=drift, noise_sigma=noise)
        for f in generate_sequence(sc)[0]:
            assert 0.0 <= f.data.min() and f.data.max() <= 1.0


class TestTruth:
    def test_static(self):
        _, truth = generate_sequence(Scenario(num_frames=10, width=64, height=64))
        assert truth.velocities == [(0.0, 0.0)] * 10
        assert truth.labels == [SlipState.STABLE] * 10

    def test_slip(self):
        _, truth = generate_sequence(Scenario(motion=Motion.slip(1.5), num_frames=5, width=64, height=64))
        assert truth.velocities == [(0.0, 0.0)] + [(0.0, 1.5)] * 4
        assert truth.labels[1:] == [SlipState.SLIPPING] * 4

    def test_rotate_and_spin_labels(self):
        _, rot = generate_sequence(Scenario(motion=Motion.rotate(2.0), num_frames=3, width=64, height=64))
        _, spin = generate_sequence(Scenario(motion=Motion.spin(0.05), num_frames=3, width=64, height=64))
        assert rot.labels == [SlipState.STABLE, SlipState.ROTATING, SlipState.ROTATING]
        assert spin.labels == [SlipState.STABLE] * 3 and spin.velocities == [(0.0, 0.0)] * 3

    def test_mixed_flip(self):
        sc = Scenario(motion=Mixed(((0, Motion.static()), (30, Motion.slip(2.0)))), num_frames=40, width=64, height=64)
        _, truth = generate_sequence(sc)
        assert truth.labels[29] is SlipState.STABLE and truth.labels[30] is SlipState.SLIPPING
        assert set(truth.labels[30:]) == {SlipState.SLIPPING}

    def test_labels_use_scenario_thresholds(self):
        sc = Scenario(motion=Motion.slip(1.5), num_frames=3, width=64, height=64, tau_y=2.0)
        assert generate_sequence(sc)[1].labels == [SlipState.STABLE] * 3

    def test_mixed_starts_increasing(self):
        with pytest.raises(ParameterError):
            Mixed(((5, Motion.slip(1)), (5, Motion.static())))

    def test_num_frames_minimum(self):
        with pytest.raises(ParameterError):
            Scenario(num_frames=1)
