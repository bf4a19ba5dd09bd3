import math

import numpy as np
import pytest

from rkhslab import (BOUND_NAMES, FAIL_MULT, KAPPA, KAPPA_SQ,
                     ExplicitEigenvalues, PolynomialDecay, SamplingDensity,
                     SobolevDecay, SpectralKernelModel, assemble_design,
                     bound, choose_m, draw_nodes, exact_wce_discretization,
                     exact_wce_recovery, fail_prob, get_basis, max_m_under,
                     mc_sup_quadratic, mc_sup_singular, model_bound_inputs,
                     nodes_from_points, power_iteration_norm,
                     recovery_error_matrix, wce_nullspace_component)
from rkhslab.densities import trial_rng


def fourier_poly():
    return SpectralKernelModel(get_basis("fourier"), PolynomialDecay(1.0))


def cosine_sob():
    return SpectralKernelModel(get_basis("cosine"), SobolevDecay(1.0))


def test_constants():
    assert KAPPA == pytest.approx((1 + math.sqrt(5)) / 2, rel=1e-15)
    assert KAPPA_SQ == pytest.approx((3 + math.sqrt(5)) / 2, rel=1e-15)
    assert FAIL_MULT == pytest.approx(2.0 ** 0.75 + 1.0, rel=1e-15)


def test_fail_prob():
    assert fail_prob(1000, 2.0) == pytest.approx(0.001, rel=1e-12)
    assert fail_prob(100, 3.0, mult=2.0) == pytest.approx(2e-4, rel=1e-12)


def test_choose_m_arithmetic():
    assert choose_m(1000, 2.0) == 5
    for n, r in ((50, 2.0), (797, 3.5), (16384, 2.0)):
        assert choose_m(n, r) == int(n / (14.0 * r * math.log(n)))
    with pytest.raises(ValueError):
        choose_m(2, 2.0)


def test_max_m_under_budgets():
    model = cosine_sob()
    assert max_m_under(model, 2000, 2.0, c=7.0, density_kind="plain") == 10
    assert max_m_under(model, 2000, 2.0, c=10.0, density_kind="plain") == 8
    # with the mixture density the budget counts 2(m-1)
    m_mix = max_m_under(model, 2000, 2.0, c=7.0,
                        density_kind="spectral-mix")
    budget = 2000 / (7.0 * 2.0 * math.log(2000))
    assert 2.0 * (m_mix - 1) <= budget < 2.0 * m_mix


def test_pinned_bound_values():
    rep = bound("recovery-tail-sup", n=1000, r=2.0, sigma_m_sq=0.01,
                tail_weighted_sup=0.5)
    assert rep.value == pytest.approx(0.7233895242536699, rel=1e-12)
    inputs = model_bound_inputs(fourier_poly(), 1000, 2.0, 5)
    assert bound("recovery-tail-sum", **inputs).value == pytest.approx(
        0.6404108306283516, rel=1e-12)


def test_bound_reports_are_auditable():
    model = cosine_sob()
    density = SamplingDensity(model, "plain")
    inputs = model_bound_inputs(model, 500, 2.0, 4, density=density)
    for name in BOUND_NAMES:
        if name == "deviation-threshold":
            rep = bound(name, n=500, r=2.0, m_sq=2.0, lambda_op_norm=1.0)
        else:
            rep = bound(name, **inputs)
        assert rep.name == name
        assert rep.value > 0.0
        assert rep.inputs["n"] == 500
        assert isinstance(rep.constants, dict)


def test_baseline_scan_beats_class_envelope():
    # sigma_l^2 = l^(-2) lies below the p=2 majorant tr/l for every l
    for n in (256, 1024, 10000):
        inputs = model_bound_inputs(fourier_poly(), n, 2.0,
                                    max(2, choose_m(n, 2.0)))
        scan = bound("baseline-scan", **inputs)
        p2 = bound("baseline-p2", **inputs)
        assert scan.value <= p2.value + 1e-12
        assert scan.notes["argmin"] >= 1


def test_unknown_bound_name():
    with pytest.raises(ValueError):
        bound("no-such-bound", n=10, r=2.0)


def wce_setup(n=40, m=4, seed=1):
    model = fourier_poly()
    density = SamplingDensity(model, "spectral-mix", m=m)
    nodes = draw_nodes(density, n, seed=seed)
    return model, density, nodes


def test_recovery_dense_vs_secular():
    model, density, nodes = wce_setup(n=30, m=4)
    dense = exact_wce_recovery(model, density, nodes, 4, trunc=550)
    secular = exact_wce_recovery(model, density, nodes, 4, trunc=700)
    em = recovery_error_matrix(model, density, nodes, 4, trunc=700)
    top = float(np.linalg.svd(em.matrix, compute_uv=False)[0])
    assert secular.value_sq == pytest.approx(top * top, rel=1e-10)
    # value grows with truncation, residual shrinks
    assert secular.value_sq >= dense.value_sq - 1e-12
    assert secular.residual <= dense.residual
    assert secular.upper_sq >= secular.value_sq


def test_recovery_value_bounded_by_single_function():
    # the first excluded eigenfunction gives a lower bound on the sup
    model, density, nodes = wce_setup(n=50, m=5)
    wce = exact_wce_recovery(model, density, nodes, 5, trunc=400)
    em = recovery_error_matrix(model, density, nodes, 5, trunc=400)
    e = np.zeros(em.matrix.shape[1])
    e[4] = 1.0  # unit coefficient on eta_m, H-norm 1
    val = float(np.linalg.norm(em.matrix @ e) ** 2)
    assert wce.value_sq >= val - 1e-12


def test_recovery_mc_power_iteration_oracle():
    model, density, nodes = wce_setup(n=45, m=4, seed=3)
    wce = exact_wce_recovery(model, density, nodes, 4, trunc=300)
    em = recovery_error_matrix(model, density, nodes, 4, trunc=300)
    raw, refined = mc_sup_singular(em.matrix, 10_000, trial_rng(77))
    assert raw <= math.sqrt(wce.value_sq) + 1e-10
    assert refined >= 0.99 * math.sqrt(wce.value_sq)


def test_discretization_identity_on_equispaced_fourier():
    # truncation below the aliasing limit makes the deviation exactly zero
    model = fourier_poly()
    x = np.arange(16) / 16.0
    val = exact_wce_discretization(model, x, trunc=7)
    assert val.value <= 1e-13
    assert val.trunc_dim == 7


def test_discretization_mc_oracle():
    rng = trial_rng(123)
    lam = np.sort(rng.random(24))[::-1]
    model = SpectralKernelModel(get_basis("cosine"),
                                ExplicitEigenvalues(lam.tolist()))
    x = rng.random(30)
    out = exact_wce_discretization(model, x)
    assert out.residual == 0.0  # finite rank, fully covered
    sig = model.singular_values(np.arange(1, 25))
    G = model.basis.eval_block(np.arange(1, 25), x) * sig[None, :]
    Y = np.diag(sig ** 2) - G.conj().T @ G / x.size
    raw, refined = mc_sup_quadratic(Y, 10_000, trial_rng(99))
    assert raw <= out.value + 1e-10
    assert refined == pytest.approx(out.value, rel=0.01)


def test_discretization_weighted_matches_manual():
    model = cosine_sob()
    density = SamplingDensity(model, "kernel-diag")
    nodes = draw_nodes(density, 60, seed=8)
    w = 1.0 / nodes.density_values
    out = exact_wce_discretization(model, nodes, weights=w, trunc=64)
    sig = model.singular_values(np.arange(1, 65))
    G = model.basis.eval_block(np.arange(1, 65), nodes.x) * sig[None, :]
    Gw = G * np.sqrt(w)[:, None]
    Y = np.diag(sig ** 2) - Gw.conj().T @ Gw / 60
    eigs = np.linalg.eigvalsh(0.5 * (Y + Y.conj().T))
    assert out.value == pytest.approx(max(abs(eigs[0]), abs(eigs[-1])),
                                      rel=1e-12)


def test_discretization_lanczos_agrees_with_dense():
    model = cosine_sob()
    rng = trial_rng(55)
    x = rng.random(200)
    # trunc above the dense cutoff takes the iterative path
    out = exact_wce_discretization(model, x, trunc=1100)
    sig = model.singular_values(np.arange(1, 1101))
    G = model.basis.eval_block(np.arange(1, 1101), x) * sig[None, :]
    Y = np.diag(sig ** 2) - G.conj().T @ G / x.size
    eigs = np.linalg.eigvalsh(0.5 * (Y + Y.conj().T))
    assert out.value == pytest.approx(max(abs(eigs[0]), abs(eigs[-1])),
                                      rel=1e-8)


def test_nullspace_identity_gram():
    model = SpectralKernelModel(get_basis("fourier"), PolynomialDecay(1.0),
                                atom_mass=0.4)
    density = SamplingDensity(model, "plain")
    nodes = nodes_from_points(density, np.arange(20) / 20.0)
    ds = assemble_design(model, density, nodes, 5)
    rep = wce_nullspace_component(0.4, nodes, ds)
    assert rep.component == pytest.approx(0.4 / 20, rel=1e-10)
    assert rep.envelope == pytest.approx(2 * 0.4 / 20, rel=1e-12)
    assert rep.within_envelope is True


def test_power_iteration_norm():
    rng = trial_rng(7)
    A = rng.standard_normal((18, 12))
    exact = float(np.linalg.svd(A, compute_uv=False)[0])
    assert power_iteration_norm(A, rng=trial_rng(8)) == pytest.approx(
        exact, rel=1e-7)


def test_wce_residual_is_conservative():
    model, density, nodes = wce_setup(n=35, m=4, seed=5)
    small = exact_wce_recovery(model, density, nodes, 4, trunc=80)
    big = exact_wce_recovery(model, density, nodes, 4, trunc=2000)
    # the small truncation's upper estimate must cover the larger value
    assert small.upper_sq >= big.value_sq - 1e-12


def test_deviation_threshold_bound_name():
    rep = bound("deviation-threshold", n=1000, r=2.0, m_sq=1.3,
                lambda_op_norm=0.5)
    direct = max(8 * 2.0 * math.log(1000) / 1000 * 1.3 * KAPPA_SQ, 0.5)
    assert rep.value == pytest.approx(direct, rel=1e-12)
