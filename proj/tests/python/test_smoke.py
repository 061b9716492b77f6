import pathlib

import numpy as np
import pytest

import athv_py as athv

DATA_DIR = pathlib.Path(__file__).resolve().parent.parent / "data"


def test_fft_round_trip_and_energy():
    rng = np.random.default_rng(0)
    x = rng.standard_normal((3, 2, 16, 8))
    k = athv.fft2c(x)
    assert k.shape == x.shape
    np.testing.assert_allclose(athv.ifft2c(k), x, atol=1e-12)
    assert np.sum(k**2) == pytest.approx(np.sum(x**2), rel=1e-12)


def test_fft_matches_numpy_centered_orthonormal():
    rng = np.random.default_rng(1)
    x = rng.standard_normal((2, 8, 8))
    z = x[0] + 1j * x[1]
    ref = np.fft.fftshift(np.fft.fft2(np.fft.ifftshift(z), norm="ortho"))
    k = athv.fft2c(x)
    np.testing.assert_allclose(k[0] + 1j * k[1], ref, atol=1e-12)


def test_root_sum_squares():
    x = np.zeros((2, 2, 1, 2))
    x[0, 0, 0, 0] = 3.0
    x[1, 1, 0, 0] = 4.0
    np.testing.assert_allclose(athv.root_sum_squares(x), [[5.0, 0.0]])


def test_mask_counts():
    m = athv.make_mask(64, 320, accel=4, center_fraction=0.08, kind="random", seed=1)
    assert m.sampled_columns() == 80
    assert m.center[3] == 26
    assert m.pattern.shape == (64, 320)
    g = athv.make_mask(256, 256, accel=20, center_fraction=0.04, kind="gaussian", seed=3)
    assert g.sampled() == 3277


def test_apply_mask_zeroes_unsampled_columns():
    m = athv.make_mask(8, 8, accel=2, center_fraction=0.25, seed=2)
    k = np.ones((1, 2, 8, 8))
    out = athv.apply_mask(k, m)
    np.testing.assert_array_equal(out[0, 0], m.pattern.astype(float))


def test_coil_maps_are_normalized():
    s = athv.make_coil_maps(4, 32, 32)
    energy = np.sum(s**2, axis=(0, 1))
    np.testing.assert_allclose(energy, 1.0, atol=1e-6)


def test_acquisition_and_metrics():
    x = athv.make_phantom(32, 5, seed=4)
    assert x.shape == (32, 32)
    assert 0.0 <= x.min() and x.max() <= 1.0
    s = athv.make_coil_maps(2, 32, 32)
    k = athv.simulate_acquisition(x, s)
    recon = athv.root_sum_squares(athv.ifft2c(k))
    assert athv.nrmse(x, recon) < 1e-6
    assert athv.ssim(x, x) == pytest.approx(1.0)
    assert athv.psnr(x, recon) > 100
    with pytest.raises(athv.AthvError):
        athv.nrmse(x, x[:16])


def test_priority_scores_from_study():
    text = (DATA_DIR / "ranking_study.csv").read_text()
    scores = dict(athv.priority_scores(text))
    assert round(scores["unet"], 2) == 0.26
    assert round(scores["wnet"], 2) == 0.51
    assert round(scores["e2e-varnet"], 2) == 0.84
    assert round(scores["atthybrid-varnet"], 2) == 0.89


def test_model_build_reconstruct_save_load(tmp_path):
    cfg = (
        "arch = atthybrid-varnet\ncoils = 2\ncascades = 1\nunet_base = 4\nunet_depth = 1\n"
        "cascade_base = 4\ncascade_depth = 1\nsens_base = 4\nsens_depth = 1\n"
    )
    model = athv.Model.build(cfg, seed=3)
    assert model.arch == "atthybrid-varnet"
    assert model.parameter_count() > 0
    x = athv.make_phantom(32, 3, seed=1)
    k = athv.simulate_acquisition(x, athv.make_coil_maps(2, 32, 32))
    m = athv.make_mask(32, 32, accel=2, center_fraction=0.125, seed=5)
    inter, final = model.reconstruct(athv.apply_mask(k, m), m)
    assert inter.shape == final.shape == (32, 32)
    # Zero-initialized refinement leaves the intermediate image unchanged.
    np.testing.assert_array_equal(inter, final)
    path = tmp_path / "model.athv"
    model.save(path)
    again = athv.Model.load(path)
    np.testing.assert_array_equal(again.reconstruct(athv.apply_mask(k, m), m)[1], final)


def test_train_is_deterministic(tmp_path):
    n_train = athv.generate_dataset(tmp_path / "data", count=4, size=32, coils=2, n_ellipses=3, train_ratio=0.5, seed=2)
    assert n_train == 2

    def run(out):
        return athv.train(
            f"data_dir = {tmp_path / 'data'}\nout_dir = {tmp_path / out}\narch = e2e-varnet\ncoils = 2\n"
            "cascades = 1\ncascade_base = 4\ncascade_depth = 1\nsens_base = 4\nsens_depth = 1\n"
            "epochs = 2\nbatch_size = 1\ncenter_fraction = 0.125\nseed = 7\n"
        )

    a, b = run("a"), run("b")
    assert len(a) == 4
    assert a == b
    assert (tmp_path / "a" / "metrics.csv").read_text() == (tmp_path / "b" / "metrics.csv").read_text()


def test_cli_in_process():
    code, out, err = athv.run_cli(
        ["rank-score", "--file", str(DATA_DIR / "ranking_study.csv"), "--models", "unet,atthybrid-varnet"]
    )
    assert code == 0, err
    assert "atthybrid-varnet,0.89" in out
    code, out, err = athv.run_cli(["make-mask", "--bogus"])
    assert code == 2
    assert err.startswith("error: usage: ")
