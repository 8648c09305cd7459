import json

import numpy as np
import pytest

import mzkernel as mz


def demo():
    model = mz.harmonic_chain(2, boundary=mz.Boundary.fixed)
    basis = mz.basis_from_matrix(np.array([[1.0], [0.0]]))
    return model, basis


def test_analytic_case_exact_and_krylov():
    model, basis = demo()
    t = np.array(mz.uniform_grid(0.1, 201))
    spectrum = mz.compute_spectrum(model, basis)
    ev = mz.KrylovKernelEvaluator(mz.block_lanczos(model, basis, order=1))
    theta_ref = 0.5 * np.cos(np.sqrt(2.0) * t)
    beta_ref = np.sin(np.sqrt(2.0) * t) / np.sqrt(2.0)
    for theta, beta in [
        (mz.theta_exact(spectrum, t), mz.beta_exact(spectrum, t)),
        (mz.theta_krylov(ev, t), mz.beta_krylov(ev, t)),
    ]:
        assert theta.shape == (201, 1, 1)
        assert np.max(np.abs(theta[:, 0, 0] - theta_ref)) <= 1e-12
        assert np.max(np.abs(beta[:, 0, 0] - beta_ref)) <= 1e-12


def test_full_order_krylov_matches_exact_on_network():
    model = mz.spring_network(mz.lattice_geometry(12, 4, mass_max=2.0), cutoff=2.0)
    basis = mz.rtb_basis(model, mz.uniform_blocks(12, 4))
    assert basis.size == 18
    t = mz.uniform_grid(0.1, 21)
    exact = mz.theta_exact(mz.compute_spectrum(model, basis), t)
    fac = mz.block_lanczos(model, basis, order=100)
    assert fac.exhausted
    krylov = mz.theta_krylov(mz.KrylovKernelEvaluator(fac), t)
    assert np.linalg.norm(krylov - exact) <= 1e-8 * np.linalg.norm(exact)


def test_kernel_matches_numpy_projected_oracle():
    model = mz.spring_network(mz.lattice_geometry(8, 2), cutoff=2.0)
    basis = mz.rtb_basis(model, mz.uniform_blocks(8, 4))
    a = model.dense_A()
    phi = basis.phi
    q = np.eye(a.shape[0]) - phi @ phi.T
    lam, u = np.linalg.eigh(q @ a @ q)
    keep = lam > 1e-8 * lam.max()
    c = phi.T @ a @ u[:, keep]
    t = 0.7
    ref = (c / lam[keep]) @ np.diag(np.cos(np.sqrt(lam[keep]) * t)) @ c.T
    got = mz.theta_exact(mz.compute_spectrum(model, basis), [t])[0]
    assert np.allclose(got, ref, rtol=1e-9, atol=1e-12 * np.abs(ref).max())


def test_noise_and_fdt():
    model, basis = demo()
    ev = mz.KrylovKernelEvaluator(mz.block_lanczos(model, basis, order=1))
    t = mz.uniform_grid(0.1, 11)
    r = mz.sample_noise(ev, t, samples=50, seed=3)
    assert r.shape == (50, 11, 1)
    assert np.array_equal(r, mz.sample_noise(ev, t, samples=50, seed=3))
    report = mz.fdt_check(ev, t, samples=5000, seed=42, lags=[0.0, 0.05])
    assert report["verdict"] == "PASS"


def test_matrix_identity_and_errors():
    rng = np.random.default_rng(0)
    x = rng.standard_normal((10, 10))
    a = x @ x.T + 10 * np.eye(10)
    phi, _ = np.linalg.qr(rng.standard_normal((10, 3)))
    assert mz.matrix_identity_residual(a, phi) <= 1e-8
    with pytest.raises(mz.Error) as info:
        mz.rtb_basis(mz.harmonic_chain(2), [[0], [1]], mz.RtbMode.one_d)
    assert info.value.code in ("size", "empty_basis")


def test_run_command(tmp_path):
    config = tmp_path / "demo.json"
    config.write_text(json.dumps({"grid": {"t_max": 0.1, "n_points": 11}}))
    out = tmp_path / "out"
    assert mz.run_command("kernel", config, out) == 0
    data = np.loadtxt(out / "theta_exact.csv", delimiter=",", skiprows=1)
    assert data.shape == (11, 2)
    assert json.loads((out / "run.json").read_text())["command"] == "kernel"
