import json

import numpy as np
import pytest

from entangle.filters import (
    FilterAnnihilationError,
    LocalFilterPair,
    SeesawConfig,
    SeparableMapSpec,
    apply_filter,
    e_d_seesaw,
    f_d_from_e,
    fidelity_with_phid,
    filter_fidelity,
    random_filter_pair,
    single_term_dominance_check,
)
from entangle.states import (
    WernerParam,
    max_entangled,
    phi_projector,
    product_basis,
    random_density,
    schmidt_state,
    werner,
)
from entangle.tensor_core import DensityOperator, HilbertFactorization

FAST = SeesawConfig(restarts=16)


def test_identity_filter_is_noop(rng):
    m = random_density(9, rng)
    out, tr = apply_filter(m, LocalFilterPair(np.eye(3), np.eye(3), 3))
    assert np.allclose(out.matrix, m)
    assert np.isclose(tr, 1)


def test_singlet_restriction_is_phi2_up_to_local_unitary():
    w = werner(WernerParam(1.0, 3))
    proj = np.array([[0, 1, 0], [0, 0, 1]], dtype=complex)  # |1>,|2> -> |0>,|1>
    out, _ = apply_filter(w, LocalFilterPair(proj, proj, 2))
    flip = np.array([[0, 1], [-1, 0]])  # i sigma_y maps the singlet onto phi_2
    k = np.kron(np.eye(2), flip)
    rotated = k @ out.matrix @ k.conj().T
    assert np.allclose(rotated / np.trace(rotated), phi_projector(2), atol=1e-12)
    out2, _ = apply_filter(w, LocalFilterPair(proj, flip @ proj, 2))
    assert np.isclose(fidelity_with_phid(out2, 2), 1, atol=1e-12)


@pytest.mark.parametrize("k", [12, 6, 4])
def test_procrustean_filter(k, frozen):
    theta = np.pi / k
    rho, _ = schmidt_state(theta)
    a = np.diag([np.tan(theta), 1.0])
    out, tr = apply_filter(rho, LocalFilterPair(a, np.eye(2), 2))
    fid, prob = frozen["procrustean"][str(k)]
    assert abs(fidelity_with_phid(out, 2) - fid) < 1e-12
    assert abs(tr - prob) < 1e-12


def test_apply_filter_errors():
    rho = product_basis(2, 1)
    with pytest.raises(FilterAnnihilationError):
        apply_filter(rho, LocalFilterPair(np.diag([1.0, 0]), np.eye(2), 2))
    with pytest.raises(ValueError):
        apply_filter(rho, LocalFilterPair(np.eye(3), np.eye(3), 3))
    with pytest.raises(ValueError):
        LocalFilterPair(np.zeros((2, 2)), np.eye(2), 2)
    with pytest.raises(ValueError):
        SeparableMapSpec(())


def test_fidelity_examples():
    for d in (2, 3, 4):
        assert np.isclose(fidelity_with_phid(max_entangled(d)[0], d), 1)
        assert np.isclose(fidelity_with_phid(product_basis(d, 1), d), 1 / d)
        assert np.isclose(fidelity_with_phid(np.eye(d * d) / d ** 2, d), 1 / d ** 2)
    with pytest.raises(ValueError):
        fidelity_with_phid(np.eye(4) / 4, 3)


def test_f_d_from_e():
    assert f_d_from_e(1, 2) == 1
    for d in (2, 3, 5):
        assert np.isclose(f_d_from_e(1 / d, d), 2 / (d + 1))
    assert np.isclose(f_d_from_e(0.75, 2), 2.5 / 3)
    es = np.linspace(0.5, 1, 11)
    assert np.all(np.diff([f_d_from_e(e, 2) for e in es]) > 0)
    for bad in (0.3, 1.1):
        with pytest.raises(ValueError):
            f_d_from_e(bad, 2)


def test_dominance_single_and_random(rng):
    rho = random_density(4, rng)
    assert single_term_dominance_check(rho, SeparableMapSpec((random_filter_pair(rng, 2, 2),)), 2)
    for _ in range(200):
        rho = random_density(4, rng)
        spec = SeparableMapSpec(tuple(random_filter_pair(rng, 2, 2) for _ in range(3)))
        assert single_term_dominance_check(rho, spec, 2)


def test_dominance_equal_ratios(rng):
    rho = random_density(4, rng)
    f = random_filter_pair(rng, 2, 2)
    spec = SeparableMapSpec((f, LocalFilterPair(2 * f.a, f.b, 2)))
    one, _ = apply_filter(rho, f)
    both, _ = apply_filter(rho, spec)
    assert abs(fidelity_with_phid(one, 2) - fidelity_with_phid(both, 2)) < 1e-10
    assert single_term_dominance_check(rho, spec, 2)


def test_seesaw_examples():
    assert abs(e_d_seesaw(max_entangled(2)[0], 2, FAST).e_lower - 1) < 1e-6
    assert abs(e_d_seesaw(product_basis(3, 1), 3, FAST).e_lower - 1 / 3) < 1e-6
    assert abs(e_d_seesaw(schmidt_state(np.pi / 6)[0], 2, FAST).e_lower - 1) < 1e-4


def test_seesaw_result_contract(rng):
    rho = DensityOperator(random_density(9, rng), HilbertFactorization.bipartite(3))
    res = e_d_seesaw(rho, 2, FAST)
    assert 0.5 - 1e-9 <= res.e_lower <= 1 + 1e-9
    assert abs(filter_fidelity(rho, res.best_filter) - res.e_lower) < 1e-8
    assert 0 < res.success_probability <= 1 + 1e-12
    assert np.isclose(np.linalg.norm(res.best_filter.a, 2), 1)
    assert np.all(np.diff(res.objective_trace) >= -1e-12)
    assert res.e_lower == max(res.restart_values) or res.best_restart == -1
    blob = json.loads(json.dumps(res.to_dict()))
    assert blob["best_filter"]["a"]["rows"] == 2


def test_seesaw_deterministic_and_threads(rng):
    rho = random_density(16, rng)
    a = e_d_seesaw(rho, 2, SeesawConfig(restarts=8, seed=3))
    b = e_d_seesaw(rho, 2, SeesawConfig(restarts=8, seed=3))
    c = e_d_seesaw(rho, 2, SeesawConfig(restarts=8, seed=3, threads=4))
    assert a.e_lower == b.e_lower == c.e_lower
    assert a.restart_values == c.restart_values


def test_seesaw_rectangular_parties(rng):
    rho = DensityOperator(random_density(6, rng), HilbertFactorization.bipartite(2, 3))
    res = e_d_seesaw(rho, 2, FAST)
    assert res.best_filter.a.shape == (2, 2) and res.best_filter.b.shape == (2, 3)
    assert abs(filter_fidelity(rho, res.best_filter) - res.e_lower) < 1e-8


def test_seesaw_initial_filter_used():
    rho, _ = schmidt_state(np.pi / 12)
    init = LocalFilterPair(np.diag([np.tan(np.pi / 12), 1.0]), np.eye(2), 2)
    res = e_d_seesaw(rho, 2, SeesawConfig(restarts=1, max_iterations=1), initial_filters=[init])
    assert res.restart_values[0] > 1 - 1e-9 and res.e_lower > 1 - 1e-9


def test_seesaw_rejects_zero():
    with pytest.raises(ValueError):
        e_d_seesaw(np.zeros((4, 4)), 2)
    with pytest.raises(ValueError):
        SeesawConfig(restarts=-1)


def test_seesaw_scaling_quick(rng):
    rho = random_density(9, rng)
    base = e_d_seesaw(rho, 2, FAST).e_lower
    assert abs(e_d_seesaw(3.7 * rho, 2, FAST).e_lower - base) < 1e-9
