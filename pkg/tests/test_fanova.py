import math

import numpy as np
import pytest

from conftest import THETA_EXP
from kanova import subsets as ss
from kanova.decomposition import DecomposedKernel, ProductKernel, ProjectorSpec
from kanova.errors import DegenerateError, InvalidArgumentError
from kanova.fanova import (
    GridFunction,
    QuadFormCoeffs,
    fanova_effect,
    grid_inner,
    nystrom_spectrum,
    project_grid,
    quadform_coeffs,
    reconstruct_check,
    sobol_indices,
    sobol_moment,
    sobol_path_samples,
)
from kanova.kernels import AnovaFactor1D, Kernel1D, centre_kernel1d
from kanova.quadrature import ProductMeasure, tensor_rule

M2 = ProductMeasure.uniform(2, 16)
M3 = ProductMeasure.uniform(3, 12)


def fn(f, m=M2):
    return GridFunction(f, m)


SMOOTH = {
    "sincos": lambda p: np.sin(np.pi * p[:, 0]) * np.cos(np.pi * p[:, 1]),
    "poly": lambda p: p[:, 0] ** 2 + p[:, 0] * p[:, 1] - 0.3 * p[:, 1] ** 3,
    "exp": lambda p: np.exp(p[:, 0] - 2 * p[:, 1]) + p[:, 0],
}


def test_additive_main_effect(rng):
    f = fn(lambda p: p[:, 0] + p[:, 1])
    x = rng.uniform(size=(10, 2))
    np.testing.assert_allclose(fanova_effect(f, 1)(x), x[:, 0] - 0.5, atol=1e-10)
    np.testing.assert_allclose(fanova_effect(f, 3)(x), 0.0, atol=1e-12)


def test_constant_function(rng):
    f = fn(lambda p: np.full(p.shape[0], 2.5))
    x = rng.uniform(size=(5, 2))
    np.testing.assert_allclose(fanova_effect(f, 0)(x), 2.5)
    for u in (1, 2, 3):
        np.testing.assert_allclose(fanova_effect(f, u)(x), 0.0, atol=1e-14)


def test_effect_depends_only_on_subset(rng):
    f = GridFunction(lambda p: np.exp(p[:, 0] * p[:, 2]) + p[:, 1] ** 2, M3)
    e = fanova_effect(f, ss.from_labels([1, 3]))
    x = rng.uniform(size=(4, 3))
    x2 = x.copy()
    x2[:, 1] = rng.uniform(size=4)
    np.testing.assert_allclose(e(x), e(x2), atol=1e-14)


@pytest.mark.parametrize("name", SMOOTH)
def test_annihilation_of_effects(name):
    f = fn(SMOOTH[name])
    rules = M2.rules()
    for u in (1, 2, 3):
        e = fanova_effect(f, u)
        for j in ss.members(u):
            other = 1 - j
            for fixed in (0.13, 0.77):
                pts = np.empty((len(rules[j]), 2))
                pts[:, j] = rules[j].nodes
                pts[:, other] = fixed
                assert abs(rules[j].weights @ e(pts)) < 1e-6


@pytest.mark.parametrize("name", SMOOTH)
def test_orthogonality_and_parseval(name):
    f = fn(SMOOTH[name])
    g = tensor_rule(M2, 3)
    vals = {u: fanova_effect(f, u)(g.nodes) for u in range(4)}
    for u in range(4):
        for v in range(u + 1, 4):
            assert abs(g.weights @ (vals[u] * vals[v])) < 1e-6
    total = g.weights @ f(g.nodes) ** 2
    assert abs(total - sum(g.weights @ vals[u] ** 2 for u in range(4))) < 1e-6


def test_parseval_d3():
    f = GridFunction(lambda p: np.exp(p[:, 0] * p[:, 1]) * np.sin(2 * p[:, 2]) + p[:, 1], M3)
    g = tensor_rule(M3, 7)
    norms = sum(g.weights @ fanova_effect(f, u)(g.nodes) ** 2 for u in range(8))
    assert abs(norms - g.weights @ f(g.nodes) ** 2) < 1e-6


def test_projector_idempotence(rng):
    f = fn(SMOOTH["sincos"])
    x = rng.uniform(size=(6, 2))
    for u in (1, 2, 3):
        eu = fanova_effect(f, u).as_grid_function()
        np.testing.assert_allclose(fanova_effect(eu, u)(x), eu(x), atol=1e-6)
        for v in range(4):
            if v != u:
                np.testing.assert_allclose(fanova_effect(eu, v)(x), 0.0, atol=1e-6)


@pytest.mark.parametrize(
    "f, tol",
    [
        (lambda p: p[:, 0] * p[:, 1], 1e-8),
        (lambda p: np.zeros(p.shape[0]), 0.0),
        (lambda p: np.sin(np.pi * p[:, 0]) * np.cos(np.pi * p[:, 1]), 1e-6),
    ],
)
def test_reconstruction(f, tol):
    assert reconstruct_check(fn(f)) <= tol


def test_reconstruction_limits_dimension():
    with pytest.raises(InvalidArgumentError):
        reconstruct_check(GridFunction(lambda p: p[:, 0], ProductMeasure.uniform(5, 2)))


def test_sobol_additive():
    s = sobol_indices(fn(lambda p: p[:, 0] + p[:, 1])).values
    assert s[1] == pytest.approx(0.5, abs=1e-12)
    assert s[2] == pytest.approx(0.5, abs=1e-12)
    assert abs(s[3]) < 1e-12


def test_sobol_product():
    # variances 1/48, 1/48, 1/144 out of 7/144
    s = sobol_indices(fn(lambda p: p[:, 0] * p[:, 1]))
    np.testing.assert_allclose([s.values[1], s.values[2], s.values[3]], [3 / 7, 3 / 7, 1 / 7], atol=1e-12)
    assert s.total_variance == pytest.approx(7 / 144, abs=1e-14)


def test_sobol_one_dimension():
    s = sobol_indices(GridFunction(lambda p: np.exp(p[:, 0]), ProductMeasure.uniform(1, 20)))
    assert s.values == {1: pytest.approx(1.0, abs=1e-12)}


def test_sobol_indices_sum_to_one():
    s = sobol_indices(GridFunction(lambda p: np.exp(p[:, 0] * p[:, 1]) + np.sin(p[:, 2]) * p[:, 0], M3))
    assert abs(sum(s.values.values()) - 1.0) < 1e-6
    assert all(-1e-12 <= v <= 1 + 1e-9 for v in s.values.values())
    assert s.to_records()[0]["subset"] == [1]


def test_sobol_truncated_order():
    m = ProductMeasure.uniform(6, 3)
    s = sobol_indices(GridFunction(lambda p: p.sum(axis=1) + p[:, 0] * p[:, 5], m), max_order=2)
    assert max(ss.card(u) for u in s.values) == 2
    with pytest.raises(InvalidArgumentError):
        sobol_indices(GridFunction(lambda p: p[:, 0], m))


def test_sobol_degenerate():
    with pytest.raises(DegenerateError):
        sobol_indices(fn(lambda p: np.ones(p.shape[0])))


# -- grid projectors -----------------------------------------------------------


def test_project_grid_matches_effects():
    f = fn(SMOOTH["poly"])
    g = tensor_rule(M2, 3)
    vals = f(g.nodes).reshape(16, 16)
    w = [r.weights for r in M2.rules()]
    for u in range(4):
        np.testing.assert_allclose(project_grid(vals, w, u).ravel(), fanova_effect(f, u)(g.nodes), atol=1e-12)
    assert grid_inner(vals, np.ones_like(vals), w) == pytest.approx(g.weights @ vals.ravel(), abs=1e-14)


# -- spectra ---------------------------------------------------------------------


def brownian_spectrum(order=200, **kw):
    pk = ProductKernel.isotropic(Kernel1D.brownian(), 1, order)
    return nystrom_spectrum(pk, ProductMeasure.uniform(1, order), **kw)


def test_brownian_spectrum():
    lam = brownian_spectrum().eigenvalues[:5]
    ref = [(2 / ((2 * i - 1) * math.pi)) ** 2 for i in range(1, 6)]
    np.testing.assert_allclose(lam, ref, atol=1e-3)


def test_constant_kernel_spectrum():
    pk = ProductKernel.isotropic(Kernel1D.brownian(), 1, 30)
    const = DecomposedKernel(pk, ProjectorSpec.simple(0))
    s = nystrom_spectrum(const, ProductMeasure.uniform(1, 30))
    assert s.eigenvalues[0] == pytest.approx(1 / 3, abs=1e-10)
    np.testing.assert_allclose(s.eigenvalues[1:], 0.0, atol=1e-10)


def test_gaussian_trace_identity():
    pk = ProductKernel.isotropic(Kernel1D.gaussian(1.0), 1, 40)
    s = nystrom_spectrum(pk, ProductMeasure.uniform(1, 40))
    assert abs(s.eigenvalues.sum() - 1.0) < 0.01
    assert abs(s.eigenvalues.sum() - s.trace) < 0.01 * s.trace


def test_eigenfunctions_orthonormal():
    s = brownian_spectrum(60, K=20)
    G = (s.eigenfunctions * s.weights[:, None]).T @ s.eigenfunctions
    np.testing.assert_allclose(G, np.eye(20), atol=1e-8)
    assert np.all(np.diff(s.eigenvalues) <= 0) and np.all(s.eigenvalues >= 0)


def test_spectrum_truncation():
    s = brownian_spectrum(60)
    with pytest.raises(InvalidArgumentError):
        brownian_spectrum(10, K=11)
    t = s.truncate(coverage=0.9)
    assert t.trace_coverage >= 0.9 and s.truncate(t.K - 1).trace_coverage < 0.9
    assert s.truncate(5).K == 5


def test_quadform_one_dimension():
    s = brownian_spectrum(100, K=40, centred=True)
    q = quadform_coeffs(s, 1)
    np.testing.assert_allclose(q.g, np.diag(s.eigenvalues), atol=1e-10)


def test_quadform_rejects_empty_and_uncentred():
    with pytest.raises(InvalidArgumentError):
        quadform_coeffs(brownian_spectrum(20, centred=True), 0)
    with pytest.raises(InvalidArgumentError):
        quadform_coeffs(brownian_spectrum(20), 1)


def anova2():
    f = AnovaFactor1D(centre_kernel1d(Kernel1D.gaussian(0.5)))
    return ProductKernel((f, f), ProductMeasure.uniform(2, 12))


def test_quadform_completeness_anova():
    s = nystrom_spectrum(anova2(), ProductMeasure.uniform(2, 12), centred=True)
    traces = [np.trace(quadform_coeffs(s, u).g) for u in (1, 2, 3)]
    assert abs(sum(traces) - s.eigenvalues.sum()) < 1e-6
    for u in (1, 2, 3):
        lam = np.linalg.eigvalsh(quadform_coeffs(s, u).g)
        assert lam[0] >= -1e-8


# -- Sobol' moments ----------------------------------------------------------------


def test_moments_one_dimension():
    s = brownian_spectrum(200, K=100, centred=True)
    m = sobol_moment(quadform_coeffs(s, 1))
    assert abs(m.mean - 1.0) < 1e-3 and abs(m.second_moment - 1.0) < 1e-3


def test_moments_of_two_term_form_by_monte_carlo():
    # independent check of the integral formulas on a tiny explicit form
    lam = np.array([0.6, 0.3, 0.1])
    g = np.array([[0.5, 0.1, 0.0], [0.1, 0.2, 0.05], [0.0, 0.05, 0.05]])
    m = sobol_moment(QuadFormCoeffs(g, 1, lam))
    eps = np.random.default_rng(0).standard_normal((400_000, 3))
    S = np.einsum("ni,ij,nj->n", eps, g, eps) / (eps**2 @ lam)
    assert abs(m.mean - S.mean()) < 4 * S.std() / math.sqrt(S.size)
    assert abs(m.second_moment - (S**2).mean()) < 4 * (S**2).std() / math.sqrt(S.size)


def test_moment_variance_nonnegative():
    pk = ProductKernel.isotropic(Kernel1D.gaussian(THETA_EXP), 2, 12)
    s = nystrom_spectrum(pk, ProductMeasure.uniform(2, 12), K=60, centred=True)
    for u in (1, 2, 3):
        m = sobol_moment(quadform_coeffs(s, u))
        assert m.variance >= -1e-9
        assert 0 <= m.mean <= 1


def test_moments_degenerate():
    with pytest.raises(DegenerateError):
        sobol_moment(QuadFormCoeffs(np.zeros((2, 2)), 1, np.zeros(2)))


# -- path samples -------------------------------------------------------------------


def test_path_samples_one_dimension():
    pk = ProductKernel.isotropic(Kernel1D.brownian(), 1, 50)
    ps = sobol_path_samples(pk, ProductMeasure.uniform(1, 50), None, 20, seed=0)
    np.testing.assert_allclose(ps.values[1], 1.0, atol=1e-9)
    assert ps.skipped == 0


def test_path_samples_sum_to_one_and_exchangeable():
    pk = anova2()
    ps = sobol_path_samples(pk, ProductMeasure.uniform(2, 12), None, 2000, seed=4)
    total = ps.values[1] + ps.values[2] + ps.values[3]
    np.testing.assert_allclose(total, 1.0, atol=1e-6)
    assert all(np.all((v >= 0) & (v <= 1 + 1e-9)) for v in ps.values.values())
    diff = ps.values[1] - ps.values[2]
    assert abs(diff.mean()) <= 4 * diff.std() / math.sqrt(diff.size)


def test_path_samples_skip_degenerate():
    pk = ProductKernel.isotropic(Kernel1D.brownian(), 1, 10)
    const = DecomposedKernel(pk, ProjectorSpec.simple(0))
    ps = sobol_path_samples(const, ProductMeasure.uniform(1, 10), [1], 5, seed=0)
    assert ps.skipped == 5 and ps.values[1].size == 0


def test_path_samples_reject_empty_subset():
    pk = ProductKernel.isotropic(Kernel1D.brownian(), 1, 10)
    with pytest.raises(InvalidArgumentError):
        sobol_path_samples(pk, ProductMeasure.uniform(1, 10), [0], 2, seed=0)
