import itertools
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from conftest import THETA_EXP, gl_oracle
from kanova import subsets as ss
from kanova.decomposition import (
    FAMILY_NAMES,
    SPARSE_SUBSETS,
    DecomposedKernel,
    ProductKernel,
    ProjectorSpec,
    check_spd,
    family_kernel,
    kanova_term_generic,
    kanova_term_product,
    parse_projector,
    standard_family,
    additive_components,
)
from kanova.errors import EvaluationError, InvalidArgumentError, PreconditionError, ResourceLimitError
from kanova.kernels import AnovaFactor1D, Kernel1D, centre_kernel1d
from kanova.quadrature import ProductMeasure


def enumerate_terms(pk, pairs, x, y):
    return sum(kanova_term_product(pk, u, v, x, y) for u, v in pairs)


def diag_pairs(subsets):
    return [(u, u) for u in subsets]


def gaussian(d, theta=1.0):
    return ProductKernel.isotropic(Kernel1D.gaussian(theta), d)


# -- subsets -------------------------------------------------------------------


def test_subset_helpers():
    u = ss.from_labels([1, 3])
    assert u == 0b101
    assert ss.to_labels(u) == [1, 3]
    assert ss.card(u) == 2
    assert sorted(ss.subsets_of(u)) == [0, 1, 4, 5]
    assert ss.fmt(0) == "{}" and ss.fmt(u) == "{1,3}"
    with pytest.raises(InvalidArgumentError):
        ss.from_labels([0])
    with pytest.raises(InvalidArgumentError):
        ss.check(8, 3)


# -- terms -----------------------------------------------------------------------


def test_brownian_terms():
    pk = ProductKernel.isotropic(Kernel1D.brownian(), 1)
    x, y = np.array([[0.5]]), np.array([[0.5]])
    assert kanova_term_product(pk, 0, 0, x, y)[0] == pytest.approx(1 / 3, abs=1e-15)
    assert kanova_term_product(pk, 0, 1, x, y)[0] == pytest.approx(1 / 24, abs=1e-15)
    assert kanova_term_product(pk, 1, 0, x, y)[0] == pytest.approx(1 / 24, abs=1e-15)
    assert kanova_term_product(pk, 1, 1, x, y)[0] == pytest.approx(1 / 12, abs=1e-15)


def test_brownian_generic_path():
    pk = ProductKernel.isotropic(Kernel1D.brownian(), 1)
    val = kanova_term_generic(pk, 1, 1, [0.5], [0.5], pk.measures)
    assert abs(val[0] - 1 / 12) < 1e-6


def test_generic_matches_product_d2(gauss2, rng):
    x, y = rng.uniform(size=(2, 20, 2))
    for u, v in [(0, 0), (1, 2), (3, 1), (3, 3), (2, 0)]:
        np.testing.assert_allclose(
            kanova_term_generic(gauss2, u, v, x, y, gauss2.measures),
            kanova_term_product(gauss2, u, v, x, y),
            atol=1e-6,
        )


def test_generic_empty_term_is_constant(rng):
    k = lambda x, y: np.exp(-np.sum(np.abs(x - y), axis=-1)) * (1 + x[..., 0] * y[..., 0])
    m = ProductMeasure.uniform(2, 12)
    x, y = rng.uniform(size=(2, 4, 2))
    vals = kanova_term_generic(k, 0, 0, x, y, m)
    np.testing.assert_allclose(vals, vals[0], rtol=0, atol=1e-14)


def test_generic_rejects_high_dimension():
    pk = gaussian(4)
    with pytest.raises(ResourceLimitError, match="kanova_term_product"):
        kanova_term_generic(pk, 0, 0, np.zeros(4), np.zeros(4), pk.measures)


def test_term_domain_check(gauss2):
    with pytest.raises(InvalidArgumentError):
        kanova_term_product(gauss2, 1, 1, [[0.5, 1.2]], [[0.5, 0.5]])


def test_term_depends_only_on_active_coordinates(rng):
    pk = gaussian(4, 0.6)
    u, v = ss.from_labels([1, 2]), ss.from_labels([2, 4])
    x, y = rng.uniform(size=(2, 4))
    x2, y2 = x.copy(), y.copy()
    x2[[2, 3]] = rng.uniform(size=2)  # outside u
    y2[[0, 2]] = rng.uniform(size=2)  # outside v
    assert kanova_term_product(pk, u, v, x, y) == pytest.approx(kanova_term_product(pk, u, v, x2, y2), abs=1e-14)


@settings(max_examples=40, deadline=None)
@given(u=st.integers(0, 7), v=st.integers(0, 7), seed=st.integers(0, 10_000))
def test_annihilation(u, v, seed):
    pk = ProductKernel((Kernel1D.gaussian(0.7), Kernel1D.matern(1, 0.4), Kernel1D.exponential(1.3)))
    r = np.random.default_rng(seed)
    x, y = r.uniform(size=(2, 3))
    for i in ss.members(u):
        def along_x(t):
            xs = np.tile(x, (t.size, 1))
            xs[:, i] = t
            return kanova_term_product(pk, u, v, xs, y)
        assert abs(gl_oracle(along_x, breaks=(y[i],))) < 1e-8
    for j in ss.members(v):
        def along_y(t):
            ys = np.tile(y, (t.size, 1))
            ys[:, j] = t
            return kanova_term_product(pk, u, v, x, ys)
        assert abs(gl_oracle(along_y, breaks=(x[j],))) < 1e-8


@pytest.mark.parametrize("d", [1, 2, 3])
def test_full_reconstruction_by_enumeration(d, rng):
    pk = ProductKernel(tuple([Kernel1D.gaussian(0.5), Kernel1D.brownian(), Kernel1D.matern(2, 0.3)][:d]))
    x, y = rng.uniform(size=(2, 30, d))
    pairs = itertools.product(ss.all_subsets(d), repeat=2)
    np.testing.assert_allclose(enumerate_terms(pk, pairs, x, y), pk(x, y), rtol=0, atol=1e-10)


def test_reconstruction_per_dimension_identity_d30(rng):
    pk = ProductKernel.isotropic(Kernel1D.gaussian(THETA_EXP), 30)
    x, y = rng.uniform(size=(2, 100, 30))
    pc = pk.pieces(x, y)
    np.testing.assert_allclose(pc.k0 + pc.ex + pc.ey + pc.calE, pc.k, rtol=0, atol=1e-10)
    np.testing.assert_allclose(np.prod(pc.k0 + pc.ex + pc.ey + pc.calE, axis=-1), pk(x, y), rtol=0, atol=1e-10)


def test_symmetric_terms(gauss2, rng):
    x, y = rng.uniform(size=(2, 10, 2))
    for u, v in itertools.product(range(4), repeat=2):
        np.testing.assert_allclose(kanova_term_product(gauss2, u, v, x, y), kanova_term_product(gauss2, v, u, y, x), atol=1e-15)


# -- ANOVA kernels ---------------------------------------------------------------


def anova_kernel(d):
    facs = [AnovaFactor1D(centre_kernel1d(k)) for k in (Kernel1D.gaussian(0.5), Kernel1D.brownian(), Kernel1D.matern(1, 0.7))]
    return ProductKernel(tuple(facs[:d]))


def test_anova_kernel_terms(rng):
    pk = anova_kernel(3)
    x, y = rng.uniform(size=(2, 25, 3))
    k0 = np.stack([f.centred(x[:, i], y[:, i]) for i, f in enumerate(pk.factors)], axis=-1)
    for u, v in itertools.product(range(8), repeat=2):
        t = kanova_term_product(pk, u, v, x, y)
        if u != v:
            assert np.all(t == 0.0)
        else:
            ref = np.prod(k0[:, list(ss.members(u))], axis=-1)
            np.testing.assert_allclose(t, ref, rtol=0, atol=1e-12)


# -- additive / ortho-additive components ---------------------------------------


@pytest.mark.parametrize("d", [2, 5, 30])
def test_additive_partition(d, rng):
    pk = gaussian(d, 1.0 if d < 30 else THETA_EXP)
    x, y = rng.uniform(size=(2, 100, d))
    c = additive_components(pk, x, y)
    np.testing.assert_allclose(c.pi_A + c.TO_TA + c.TA_TO + c.pi_O, pk(x, y), rtol=0, atol=1e-10)


def test_additive_fixed_pair():
    pk = gaussian(2)
    x, y = np.array([0.2, 0.8]), np.array([0.6, 0.4])
    assert sum(additive_components(pk, x, y)) == pytest.approx(float(pk(x, y)), abs=1e-10)


def test_additive_one_dimension(rng):
    pk = gaussian(1, 0.4)
    x, y = rng.uniform(size=(2, 10, 1))
    c = additive_components(pk, x, y)
    np.testing.assert_allclose(c.pi_A, pk(x, y), atol=1e-12)
    for part in (c.pi_O, c.TO_TA, c.TA_TO):
        np.testing.assert_allclose(part, 0.0, atol=1e-12)


def test_additive_against_enumeration(rng):
    pk = gaussian(3)
    A = [0, 1, 2, 4]
    O = [u for u in range(8) if u not in A]
    x, y = rng.uniform(size=(2, 20, 3))
    c = additive_components(pk, x, y)
    np.testing.assert_allclose(c.pi_A, enumerate_terms(pk, itertools.product(A, A), x, y), atol=1e-8)
    np.testing.assert_allclose(c.TO_TA, enumerate_terms(pk, itertools.product(O, A), x, y), atol=1e-8)
    np.testing.assert_allclose(c.pi_O, enumerate_terms(pk, itertools.product(O, O), x, y), atol=1e-8)


def test_additive_needs_positive_factors():
    pk = ProductKernel.isotropic(Kernel1D.brownian(), 2)  # min(0, y) = 0
    with pytest.raises(PreconditionError):
        additive_components(pk, [0.5, 0.5], [0.5, 0.5])
    with pytest.raises(PreconditionError):
        family_kernel(pk, "k_A")


# -- projected kernels -----------------------------------------------------------

FAMILY_TERMS = {
    "k_full": lambda d: itertools.product(range(2**d), repeat=2),
    "k_anova": lambda d: diag_pairs(range(2**d)),
    "k_A*": lambda d: diag_pairs(u for u in range(2**d) if ss.card(u) <= 1),
    "k_inter": lambda d: diag_pairs(u for u in range(2**d) if ss.card(u) <= 2),
    "k_A": lambda d: itertools.product([u for u in range(2**d) if ss.card(u) <= 1], repeat=2),
    "k_A*+O": lambda d: itertools.chain(
        itertools.product([u for u in range(2**d) if ss.card(u) >= 2], repeat=2),
        diag_pairs(u for u in range(2**d) if ss.card(u) <= 1),
    ),
    "k_A+O*": lambda d: itertools.chain(
        itertools.product([u for u in range(2**d) if ss.card(u) <= 1], repeat=2),
        diag_pairs(u for u in range(2**d) if ss.card(u) >= 2),
    ),
    "k_sparse": lambda d: diag_pairs(SPARSE_SUBSETS),
}


@pytest.mark.parametrize("name", FAMILY_NAMES)
def test_family_against_enumeration(name, rng):
    d = 5 if name == "k_sparse" else 4
    pk = gaussian(d, THETA_EXP)
    x, y = rng.uniform(size=(2, 20, d))
    got = family_kernel(pk, name)(x, y)
    np.testing.assert_allclose(got, enumerate_terms(pk, FAMILY_TERMS[name](d), x, y), rtol=0, atol=1e-8)


def test_a_plus_o_star_identity(rng):
    pk = gaussian(4, THETA_EXP)
    fam = standard_family(pk)
    x, y = rng.uniform(size=(2, 30, 4))
    np.testing.assert_allclose(fam["k_A+O*"](x, y), fam["k_anova"](x, y) - fam["k_A*"](x, y) + fam["k_A"](x, y), atol=1e-12)


def test_anova_fast_path_equals_star_enumeration(rng):
    pk = gaussian(4, 0.8)
    x, y = rng.uniform(size=(2, 30, 4))
    fast = DecomposedKernel(pk, ProjectorSpec.star())
    explicit = DecomposedKernel(pk, ProjectorSpec.star(range(16)))
    assert fast.strategy == "symmetric_function_fast_path"
    assert explicit.strategy in ("term_sum", "symmetric_function_fast_path")
    np.testing.assert_allclose(fast(x, y), enumerate_terms(pk, diag_pairs(range(16)), x, y), atol=1e-10)
    np.testing.assert_allclose(explicit(x, y), fast(x, y), atol=1e-10)


def test_full_projector_of_all_subsets_is_kernel(gauss2, rng):
    x, y = rng.uniform(size=(2, 10, 2))
    np.testing.assert_allclose(DecomposedKernel(gauss2, ProjectorSpec.full())(x, y), gauss2(x, y), atol=1e-12)


def test_projector_modes_match_enumeration(rng):
    pk = gaussian(3, 0.6)
    x, y = rng.uniform(size=(2, 15, 3))
    U = [0, 1, 6]
    alpha = {0: 0.5, 2: -1.5, 7: 2.0}
    cases = [
        (ProjectorSpec.simple(6), [(6, 6)]),
        (ProjectorSpec.full(U), list(itertools.product(U, U))),
        (ProjectorSpec.star(U), diag_pairs(U)),
        (ProjectorSpec.star(max_card=1), diag_pairs(u for u in range(8) if ss.card(u) <= 1)),
    ]
    for spec, pairs in cases:
        np.testing.assert_allclose(DecomposedKernel(pk, spec)(x, y), enumerate_terms(pk, pairs, x, y), atol=1e-12)
    weighted = DecomposedKernel(pk, ProjectorSpec.weighted(alpha))(x, y)
    ref = sum(alpha[u] * alpha[v] * kanova_term_product(pk, u, v, x, y) for u in alpha for v in alpha)
    np.testing.assert_allclose(weighted, ref, atol=1e-12)
    custom = DecomposedKernel(pk, ProjectorSpec.custom({(1, 2): 0.5, (2, 1): 0.5, (0, 0): 1.0}))
    ref = 0.5 * kanova_term_product(pk, 1, 2, x, y) + 0.5 * kanova_term_product(pk, 2, 1, x, y) + kanova_term_product(pk, 0, 0, x, y)
    np.testing.assert_allclose(custom(x, y), ref, atol=1e-12)
    assert not custom.psd_checked


@pytest.mark.parametrize(
    "spec",
    [
        ProjectorSpec.simple(3),
        ProjectorSpec.full([0, 1, 4]),
        ProjectorSpec.star([1, 6, 7]),
        ProjectorSpec.weighted({0: 1.0, 3: 0.3}),
        ProjectorSpec.named("k_A+O*"),
        ProjectorSpec.named("k_inter"),
        ProjectorSpec.custom({(1, 2): 0.2, (2, 1): 0.2}),
    ],
    ids=str,
)
def test_decomposed_kernels_symmetric(spec, rng):
    dk = DecomposedKernel(gaussian(3, 0.7), spec)
    x, y = rng.uniform(size=(2, 100, 3))
    np.testing.assert_allclose(dk(x, y), dk(y, x), rtol=0, atol=1e-12)


def test_projector_validation():
    with pytest.raises(InvalidArgumentError):
        ProjectorSpec.full([])
    with pytest.raises(InvalidArgumentError):
        ProjectorSpec.custom({(1, 2): 0.5})
    with pytest.raises(InvalidArgumentError):
        ProjectorSpec.custom({(1, 2): 0.5, (2, 1): 0.4})
    with pytest.raises(InvalidArgumentError):
        ProjectorSpec.weighted({1: math.inf})
    with pytest.raises(InvalidArgumentError):
        ProjectorSpec.named("k_nope")
    with pytest.raises(InvalidArgumentError):
        DecomposedKernel(gaussian(2), ProjectorSpec.simple(ss.from_labels([3])))


def test_sparse_needs_five_dimensions():
    with pytest.raises(InvalidArgumentError):
        family_kernel(gaussian(4), "k_sparse")
    assert "k_sparse" not in standard_family(gaussian(4))
    assert set(standard_family(gaussian(5))) == set(FAMILY_NAMES)


def test_full_kernel_unit_diagonal(gauss8, rng):
    x = rng.uniform(size=(10, 8))
    np.testing.assert_allclose(family_kernel(gauss8, "k_full")(x, x), 1.0, atol=1e-14)


@pytest.mark.parametrize(
    "text, expected",
    [
        ("simple:[1,3]", ProjectorSpec.simple(0b101)),
        ("simple:{1,3}", ProjectorSpec.simple(0b101)),
        ("full:[[],[1],[2]]", ProjectorSpec.full([0, 1, 2])),
        ("full:all", ProjectorSpec.full()),
        ("star:[[1],[2,3]]", ProjectorSpec.star([1, 6])),
        ("star:card<=2", ProjectorSpec.star(max_card=2)),
        ("weighted:[[[],1.0],[[1],0.5]]", ProjectorSpec.weighted({0: 1.0, 1: 0.5})),
        ("custom:[[[1],[2],0.5],[[2],[1],0.5]]", ProjectorSpec.custom({(1, 2): 0.5, (2, 1): 0.5})),
        ("family:k_inter", ProjectorSpec.named("k_inter")),
    ],
)
def test_parse_projector(text, expected):
    assert parse_projector(text) == expected


@pytest.mark.parametrize("text", ["simple", "full:[1,2]", "star:[[0]]", "bogus:[[1]]", "full:[[1]", "family:k_x"])
def test_parse_projector_rejects(text):
    with pytest.raises(InvalidArgumentError):
        parse_projector(text)


# -- s.p.d. checks ---------------------------------------------------------------


def test_check_spd_full_d8(gauss8):
    rep = check_spd(family_kernel(gauss8, "k_full"), 200, 8, seed=0, tol=1e-8)
    assert rep.passed and rep.n == 200


def test_check_spd_sparse_d8(gauss8):
    assert check_spd(family_kernel(gauss8, "k_sparse"), 200, 8, seed=1).passed


def test_check_spd_constant_kernel():
    pk = ProductKernel.isotropic(Kernel1D.brownian(), 1)
    const = DecomposedKernel(pk, ProjectorSpec.simple(0))
    rep = check_spd(const, 10, 1, seed=0)
    assert abs(rep.min_eigenvalue) < 1e-12 and rep.passed


def test_check_spd_detects_indefinite_and_nonfinite():
    assert not check_spd(lambda x, y: -np.ones(np.broadcast_shapes(x.shape, y.shape)[:-1]), 5, 1).passed
    with pytest.raises(EvaluationError):
        check_spd(lambda x, y: np.full(np.broadcast_shapes(x.shape, y.shape)[:-1], np.nan), 5, 1)
    with pytest.raises(InvalidArgumentError):
        check_spd(lambda x, y: x[..., 0] * y[..., 0], 1, 1)
