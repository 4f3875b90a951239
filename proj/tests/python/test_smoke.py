import json
import os
from pathlib import Path

import numpy as np
import pytest

import pnpdm

CONFIGS = Path(os.environ.get("PNPDM_CONFIG_DIR", Path(__file__).resolve().parents[2] / "configs"))


def test_version():
    assert isinstance(pnpdm.__version__, str) and pnpdm.__version__


def test_schedules():
    assert pnpdm.sigma_vp(1.0) == pytest.approx(152.1669702839464719, rel=1e-12)
    assert pnpdm.sigma_vp_inverse(pnpdm.sigma_vp(0.3)) == pytest.approx(0.3, rel=1e-12)
    coupling = pnpdm.CouplingSchedule(10.0, 0.3, 0.9)
    assert coupling.rho(0) == 10.0
    assert coupling.rho(1000) == 0.3
    sched = pnpdm.DiffusionSchedule("ve", steps=50)
    sigmas = np.asarray(sched.sigmas())
    assert sigmas.shape == (51,)
    assert sigmas[0] == pytest.approx(80.0)
    assert sigmas[-1] == 0.0
    assert np.all(np.diff(sigmas) < 0)


def test_gaussian_denoiser():
    prior = pnpdm.GaussianPrior.isotropic(np.zeros(3), 2.0)
    z = np.array([1.0, -2.0, 0.5])
    np.testing.assert_allclose(prior.denoise(z, 1.0), z * 2.0 / 3.0, rtol=1e-14)


def test_forward_models():
    rng = np.random.default_rng(0)
    x = rng.standard_normal(12)
    y = pnpdm.fpr_forward(x, (3, 4), 2)
    padded = np.zeros((6, 8))
    padded[:3, :4] = x.reshape(3, 4)
    np.testing.assert_allclose(y, np.abs(np.fft.fft2(padded, norm="ortho")).ravel(), atol=1e-12)
    np.testing.assert_allclose(pnpdm.block_downsample(np.arange(8.0), (2, 4), 2), [2.5, 4.5])


def test_exact_likelihood_sample_mean():
    a = np.array([[2.0]])
    draws = [pnpdm.exact_likelihood_sample(a, [6.0], 1.0, [1.0], 1.0, seed=s)[0] for s in range(4000)]
    # Target N(2.6, 0.2).
    assert abs(np.mean(draws) - 2.6) < 4 * np.sqrt(0.2 / 4000)


def test_gaussian_posterior_oracle():
    mean, cov = pnpdm.gaussian_posterior(np.zeros(1), np.eye(1), np.eye(1), 1.0, np.array([2.0]))
    assert mean[0] == pytest.approx(1.0)
    assert cov[0, 0] == pytest.approx(0.5)


def test_npy_interop(tmp_path):
    m = np.arange(6.0).reshape(2, 3) / 7.0
    ours = tmp_path / "ours.npy"
    pnpdm.write_array(ours, m)
    np.testing.assert_array_equal(np.load(ours), m)
    theirs = tmp_path / "theirs.npy"
    np.save(theirs, m.astype(np.float32))
    np.testing.assert_array_equal(pnpdm.read_array(theirs), m.astype(np.float32).astype(np.float64))
    np.save(tmp_path / "np.npy", m)
    assert ours.read_bytes() == (tmp_path / "np.npy").read_bytes()


def test_coverage_stats():
    samples = np.array([[1.0, 5.0], [2.0, 5.0], [3.0, 5.0]])
    report = pnpdm.coverage_stats(samples, np.array([2.0, 4.0]))
    assert report.sample_count == 3
    assert report.outlier_fraction == 0.5


def test_validate_config():
    digest = pnpdm.validate_config(CONFIGS / "gaussian_cs.cfg")
    assert len(digest) == 64
    with pytest.raises(pnpdm.ConfigError):
        pnpdm.validate_config(CONFIGS / "gaussian_cs.cfg", ["sampler.thin=0"])
    with pytest.raises(ValueError):
        pnpdm.validate_config(CONFIGS / "gaussian_cs.cfg", ["nosuch.key=1"])


def test_small_run(tmp_path):
    report = pnpdm.run(CONFIGS / "gaussian_cs.cfg", tmp_path, ["sampler.iterations=30", "sampler.burn_in=20",
                                                              "sampler.thin=5"])
    assert report.sample_count == 4
    samples = np.load(tmp_path / "samples_chain0.npy")
    assert samples.shape == (2, 32)
    manifest = json.loads((tmp_path / "manifest.json").read_text())
    assert manifest["seed"] == 0
    np.testing.assert_allclose(np.load(tmp_path / "mean.npy"), report.mean)
