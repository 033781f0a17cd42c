import numpy as np
import pytest

from percolab.gaussian import (BoxPartition, CellMask, FFTSampler, FieldSample, InvalidParameter, Kernel,
                               arm_radii, bargmann_fock_covariance, box_component, excursion_set,
                               field_crossing_event, field_one_arm, field_two_arm, kernel_self_convolution,
                               lr_crossing, make_bargmann_fock_kernel, moving_average_sample,
                               orthogonal_decomposition_check, resample_boxes, smooth_cutoff,
                               tail_l2_sq, tb_dual_crossing, truncate_kernel, truncation_error_sq,
                               white_noise_grid)

K25 = make_bargmann_fock_kernel(2, 0.25, 4.0)


def test_kernel_normalisation():
    # q(0) = sqrt(2/pi) and ||q||^2 = K(0) = 1
    assert K25.values[K25.h, K25.h] == pytest.approx(np.sqrt(2 / np.pi))
    assert K25.l2_norm_sq() == pytest.approx(1.0, abs=1e-6)
    assert K25.symmetric_under_permutation


def test_self_convolution_matches_covariance():
    k = make_bargmann_fock_kernel(2, 0.1, 5.0)
    K = kernel_self_convolution(k)
    off = K.offsets()
    near = np.sqrt((off ** 2).sum(-1)) <= 3
    assert np.abs(K.values - bargmann_fock_covariance(off))[near].max() < 1e-6
    assert K.at((0, 0)) == pytest.approx(1.0, abs=1e-6)


def test_kernel_validation():
    with pytest.raises(InvalidParameter):
        Kernel(2, 0.5, 1.0, np.zeros((5, 5)))
    with pytest.raises(InvalidParameter):
        Kernel(2, 0.5, 1.0, np.arange(25.0).reshape(5, 5))
    with pytest.raises(InvalidParameter):
        make_bargmann_fock_kernel(2, 0.25, 2.0)


def test_kernel_csv_roundtrip(tmp_path):
    k = truncate_kernel(K25, 1.0)
    k.to_csv(tmp_path / "k.csv")
    k2 = Kernel.from_csv(tmp_path / "k.csv")
    assert k2.mesh == k.mesh and np.allclose(k2.values, k.values)


def test_cutoff_shape():
    t = np.array([0.0, 0.5, 0.75, 1.0, 2.0])
    c = smooth_cutoff(t)
    assert c[0] == c[1] == 1 and c[3] == c[4] == 0 and 0 < c[2] < 1
    assert smooth_cutoff(0.75) == pytest.approx(0.5)


def test_truncation_error_decreases():
    errs = [truncation_error_sq(K25, r) for r in (1, 2, 3, 4)]
    assert all(a > b for a, b in zip(errs, errs[1:]))
    # the cutoff keeps q on Lambda_{r/2}, so the error is at most the tail beyond r/2
    for r in (1, 2, 3):
        assert truncation_error_sq(K25, r) <= tail_l2_sq(K25, r / 2) + 1e-15
    assert truncate_kernel(K25, 3.0).h == 12


def test_fft_and_direct_agree():
    k = truncate_kernel(K25, 3.0)
    noise = white_noise_grid(((-6, -6), (6, 6)), 0.25, np.random.default_rng(1))
    a = moving_average_sample(k, noise, "direct")
    b = moving_average_sample(k, noise, "fft")
    c = FFTSampler(k, noise.shape)(noise)
    assert np.abs(a.values - b.values).max() < 1e-10
    assert np.abs(a.values - c.values).max() < 1e-10 and a.lo == c.lo


def test_box_components_sum_to_field():
    k = truncate_kernel(K25, 1.0)
    noise = white_noise_grid(((-4, -4), (4, 4)), 0.25, np.random.default_rng(2))
    P = BoxPartition(1.0, 0.25)
    total = sum(box_component(noise, b, k, P).values for b in P.boxes(noise))
    assert np.abs(total - moving_average_sample(k, noise).values).max() < 1e-10


def test_resample_only_touches_listed_boxes():
    noise = white_noise_grid(((-2, -2), (2, 2)), 0.25, np.random.default_rng(3))
    P = BoxPartition(1.0, 0.25)
    box = P.boxes(noise)[4]
    out = resample_boxes(noise, [box], np.random.default_rng(4), P)
    changed = out.weights != noise.weights
    sl = P.cell_slices(noise, box)
    assert changed[sl].all() and changed.sum() == changed[sl].size


def test_noise_coarsening_keeps_variance():
    noise = white_noise_grid(("cells", (0, 0), (200, 200)), 0.1, np.random.default_rng(5))
    c = noise.coarsen(2)
    assert c.mesh == pytest.approx(0.2) and c.shape == (100, 100)
    assert c.weights.var() == pytest.approx(0.04, rel=0.05)
    with pytest.raises(InvalidParameter):
        white_noise_grid(("cells", (1, 0), (3, 4)), 0.1, np.random.default_rng(0)).coarsen(2)


def test_field_variance_near_one():
    k = truncate_kernel(K25, 3.0)
    noise = white_noise_grid(((-30, -30), (30, 30)), 0.25, np.random.default_rng(6))
    f = moving_average_sample(k, noise)
    assert f.values.var() == pytest.approx(k.l2_norm_sq(), rel=0.1)


def test_orthogonal_decomposition_converges():
    k = truncate_kernel(K25, 1.0)
    P = BoxPartition(1.0, 0.25)
    errs = [orthogonal_decomposition_check(k, P, n, stride=2)["error"] for n in (1, 4, 10, 16)]
    assert all(a >= b - 1e-12 for a, b in zip(errs, errs[1:]))
    assert errs[-1] < 1e-10
    first = orthogonal_decomposition_check(k, P, 1)
    assert np.allclose(first["first_column"], first["constant_component"])


def test_crossing_duality_on_random_masks():
    # set 4-connected crossing and unset 8-connected blocking path exclude each other
    rng = np.random.default_rng(7)
    for _ in range(300):
        bits = rng.random((9, 8)) < 0.5
        assert lr_crossing(bits) != tb_dual_crossing(bits)


def test_excursion_events_on_constant_fields():
    vals = np.ones((17, 17))
    up = excursion_set(FieldSample((-8, -8), vals, 0.25))
    down = excursion_set(FieldSample((-8, -8), -vals, 0.25))
    assert field_one_arm(up, 0.5, 2.0) and not field_one_arm(down, 0.5, 2.0)
    assert field_crossing_event(up, 1, 2.0) and not field_crossing_event(down, 1, 2.0)
    assert not field_two_arm(up, 0.5, 2.0)
    assert excursion_set(FieldSample((-8, -8), -vals, 0.25), ell=1.0).bits.all()


def test_arm_radii():
    w = np.zeros((9, 9), bool)
    w[4, 4:7] = True
    assert arm_radii(w, 0) == (2, -1)
    assert arm_radii(~w, 0) == (-1, 2)


def test_mask_window_bounds():
    m = CellMask((0, 0), np.ones((4, 4), bool), 0.25)
    from percolab.lattice import InvalidQuery
    with pytest.raises(InvalidQuery):
        m.window((-1, 0), (2, 2))
