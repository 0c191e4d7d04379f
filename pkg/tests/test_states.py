import numpy as np
import pytest

from entangle.states import (
    StateSpec,
    WernerParam,
    bound_entangled_33,
    haar_random_pure,
    haar_random_pures,
    haar_random_unitary,
    isotropic,
    max_entangled,
    phi_projector,
    ppt_check,
    product_basis,
    random_density,
    random_separable,
    sym_projectors,
    twirl_by_sampling,
    twirl_isotropic,
    twirl_werner,
    werner,
)
from entangle.tensor_core import DensityOperator, HilbertFactorization, ptranspose_array


def test_max_entangled_vector():
    for d in (2, 3, 5):
        rho, v = max_entangled(d)
        assert np.isclose(np.linalg.norm(v), 1, atol=1e-12)
        assert np.allclose(v.reshape(d, d), np.eye(d) / np.sqrt(d))
        assert np.isclose(rho.trace, 1)
    with pytest.raises(ValueError):
        max_entangled(1)


def test_werner_definition():
    for d in (2, 3):
        ps, pa = sym_projectors(d)
        for mu in (0.0, 0.3, 0.5, 1.0):
            w = werner(WernerParam(mu, d)).matrix
            assert np.isclose(np.trace(w), 1, atol=1e-12)
            assert np.isclose(np.trace(w @ pa).real, mu, atol=1e-12)
    with pytest.raises(ValueError):
        WernerParam(1.2, 2)
    with pytest.raises(ValueError):
        WernerParam(0.5, 1)


def test_werner_phi_overlap(frozen):
    ref = frozen["werner_phi_overlap"]
    for key, (mu, d) in {"mu1_d2": (1.0, 2), "mu0.7_d2": (0.7, 2), "mu1_d3": (1.0, 3)}.items():
        val = np.trace(werner(WernerParam(mu, d)).matrix @ phi_projector(d)).real
        assert abs(val - ref[key]) < 1e-12


def test_werner_uu_invariant(rng):
    w = werner(WernerParam(0.8, 3)).matrix
    for _ in range(20):
        u = haar_random_unitary(3, rng)
        k = np.kron(u, u)
        assert np.max(np.abs(k @ w @ k.conj().T - w)) < 1e-12


@pytest.mark.parametrize("mu", [0.0, 0.3, 0.7, 1.0])
def test_twirl_fixes_werner(mu):
    for d in (2, 3):
        w = werner(WernerParam(mu, d))
        assert np.max(np.abs(twirl_werner(w).matrix - w.matrix)) < 1e-12


def test_twirl_of_phi_is_symmetric_werner():
    for d in (2, 3):
        out = twirl_werner(max_entangled(d)[0])
        assert np.allclose(out.matrix, werner(WernerParam(0.0, d)).matrix, atol=1e-12)


def test_twirl_idempotent_and_trace(rng):
    for d in (2, 3):
        for _ in range(10):
            m = random_density(d * d, rng) * 2.3
            once = twirl_werner(m)
            assert np.max(np.abs(twirl_werner(once) - once)) < 1e-10
            assert abs(np.trace(once) - np.trace(m)) < 1e-12
            assert np.linalg.eigvalsh(once)[0] > -1e-12
            iso = twirl_isotropic(m)
            assert abs(np.trace(iso) - np.trace(m)) < 1e-12
            assert np.linalg.eigvalsh(iso)[0] > -1e-12


def test_twirl_commutes_with_uu(rng):
    out = twirl_werner(random_density(9, rng))
    for _ in range(50):
        u = haar_random_unitary(3, rng)
        k = np.kron(u, u)
        assert np.linalg.norm(k @ out - out @ k) <= 1e-8


def test_twirl_matches_sampled_integral(rng):
    m = random_density(4, rng)
    for conj, exact in ((False, twirl_werner(m)), (True, twirl_isotropic(m))):
        approx = twirl_by_sampling(m, 10_000, rng, conjugate=conj)
        assert np.max(np.abs(approx - exact)) < 2e-2


def test_isotropic_twirl_is_conjugated_werner_twirl(rng):
    for d in (2, 3):
        m = random_density(d * d, rng)
        via = ptranspose_array(twirl_werner(ptranspose_array(m, (d, d), [1])), (d, d), [1])
        assert np.max(np.abs(via - twirl_isotropic(m))) < 1e-12


def test_isotropic_twirl_properties(rng):
    for d in (2, 3):
        phi = phi_projector(d)
        for _ in range(10):
            m = random_density(d * d, rng)
            assert abs(np.trace(twirl_isotropic(m) @ phi) - np.trace(m @ phi)) < 1e-12
        assert np.allclose(twirl_isotropic(phi), phi, atol=1e-12)
        eye = np.eye(d * d) / d ** 2
        assert np.allclose(twirl_isotropic(eye), eye, atol=1e-12)
        iso = isotropic(0.7, d).matrix
        assert np.allclose(twirl_isotropic(iso), iso, atol=1e-12)


def test_twirl_rejects_bad_shape():
    with pytest.raises(ValueError):
        twirl_werner(np.eye(6))


def test_ppt_examples():
    ok, _ = ppt_check(product_basis(2))
    assert ok
    ok, lmin = ppt_check(max_entangled(2)[0])
    assert not ok and np.isclose(lmin, -0.5)


def test_ppt_werner_boundary():
    for d in (2, 3):
        for mu in np.round(np.arange(0, 1.0001, 0.05), 10):
            ok, _ = ppt_check(werner(WernerParam(mu, d)))
            assert ok == (mu <= 0.5)


def test_bound_entangled_family_is_ppt(frozen):
    from entangle.activation.families import choi_witness

    for alpha in (3.0, 3.5, 4.0):
        s = bound_entangled_33(alpha)
        assert ppt_check(s)[0]
        assert abs(np.trace(choi_witness() @ s.matrix).real - frozen["choi_witness_on_sigma"][str(alpha)]) < 1e-12


def test_random_separable_is_ppt(rng):
    for _ in range(20):
        s = random_separable(3, 3, 4, rng)
        assert np.isclose(np.trace(s), 1)
        assert ppt_check(DensityOperator(s, HilbertFactorization.bipartite(3)))[0]


def test_haar_norms_and_determinism():
    v = haar_random_pures(3, 1000, 5)
    assert np.max(np.abs(np.linalg.norm(v, axis=1) - 1)) < 1e-12
    assert np.array_equal(haar_random_pures(3, 10, 9), haar_random_pures(3, 10, 9))
    assert np.array_equal(haar_random_pure(4, 2), haar_random_pure(4, 2))


def test_haar_mean_projector():
    v = haar_random_pures(2, 100_000, 0)
    mean = np.einsum("ni,nj->ij", v, v.conj()) / v.shape[0]
    assert np.max(np.abs(mean - np.eye(2) / 2)) < 5e-3


def test_haar_rotation_invariance():
    # statistics of |<0|U psi>|^2 match those of |<0|psi>|^2 (both Beta(1, d-1))
    d = 3
    rng = np.random.default_rng(4)
    u = haar_random_unitary(d, rng)
    v = haar_random_pures(d, 50_000, rng)
    a = np.abs(v[:, 0]) ** 2
    b = np.abs((v @ u.T)[:, 0]) ** 2
    for m in (a, b):
        assert abs(m.mean() - 1 / d) < 5e-3
        assert abs((m ** 2).mean() - 2 / (d * (d + 1))) < 5e-3


def test_haar_unitary():
    u = haar_random_unitary(4, 3)
    assert np.allclose(u.conj().T @ u, np.eye(4), atol=1e-12)


def test_state_spec_roundtrip():
    s = StateSpec.parse("kind=werner,d=3,mu=0.8")
    assert s.kind == "werner" and str(s) == "kind=werner,d=3,mu=0.8"
    rho = s.build()
    assert rho.factorization.dims == (3, 3)
    assert np.isclose(StateSpec.parse("kind=product,d=3").build().matrix[4, 4], 1)
    iso = StateSpec.parse("kind=isotropic,d=2,f=0.9").build().matrix
    assert abs(np.trace(iso @ phi_projector(2)).real - 0.9) < 1e-12


@pytest.mark.parametrize("text", ["werner,mu=0.5", "kind=nope", "kind=werner,d=2", "kind=file", "kind=werner,mu=2"])
def test_state_spec_errors(text):
    with pytest.raises((ValueError, KeyError)):
        StateSpec.parse(text).build()


def test_state_spec_file(tmp_path):
    from entangle.tensor_core import save_matrix

    path = tmp_path / "w.json"
    save_matrix(path, werner(WernerParam(0.9, 2)))
    rho = StateSpec.parse(f"kind=file,path={path}").build()
    assert np.allclose(rho.matrix, werner(WernerParam(0.9, 2)).matrix)
