import math

import numpy as np
import pytest

from ioncavity.tomography import (BASES, CountTable, InsufficientDataError,
                                  background_fidelity_limit, bootstrap,
                                  born_probabilities, fidelity_at, fit_theta,
                                  linear_inversion, measurement_set, metrics,
                                  reconstruct, simulate_counts, target_state,
                                  validate_state)


def random_state(rng, rank=4):
    g = rng.normal(size=(4, rank)) + 1j * rng.normal(size=(4, rank))
    rho = g @ g.T.conj()
    return rho / np.trace(rho).real


@pytest.fixture(scope="module")
def psi91_table():
    psi = target_state(0.91)
    return simulate_counts(np.outer(psi, psi.conj()), 1_000_000)


def test_projector_completeness():
    ms = measurement_set()
    assert len(ms) == 36
    for b in range(9):
        total = sum(p.matrix for p in ms[4 * b:4 * b + 4])
        assert np.allclose(total, np.eye(4), atol=1e-12)


def test_zz_projectors_are_rank_one_product_states():
    ms = measurement_set()
    zz = [p for p in ms if p.photon_basis == "Z" and p.ion_basis == "Z"]
    for p in zz:
        vals = np.linalg.eigvalsh(p.matrix)
        assert vals[-1] == pytest.approx(1.0, abs=1e-12)
        assert np.sum(vals > 1e-12) == 1


def test_born_rule_bell_state_zz():
    psi = target_state(0.0)
    rho = np.outer(psi, psi.conj())
    p = born_probabilities(rho)[CountTable.basis_index("Z", "Z")]
    assert np.allclose(p, [0.5, 0.0, 0.0, 0.5], atol=1e-12)


def test_born_probabilities_normalized():
    rng = np.random.default_rng(3)
    for _ in range(20):
        p = born_probabilities(random_state(rng))
        assert np.allclose(p.sum(axis=1), 1.0, atol=1e-12)
        assert np.all(p > -1e-12)


def test_linear_inversion_exact_on_exact_frequencies():
    rng = np.random.default_rng(5)
    for _ in range(20):
        rho = random_state(rng)
        est = linear_inversion(born_probabilities(rho))
        assert np.allclose(est, rho, atol=1e-10)


def test_reconstruct_round_trip_high_statistics(psi91_table):
    rec = reconstruct(psi91_table)
    validate_state(rec.rho, tol=1e-8)
    psi = target_state(0.91)
    assert fidelity_at(rec.rho, 0.91) > 0.999
    met = metrics(rec.rho)
    assert met.theta == pytest.approx(0.91, abs=1e-3)


def test_reconstruct_maximally_mixed():
    table = simulate_counts(np.eye(4) / 4, 10_000)
    rec = reconstruct(table)
    assert np.abs(rec.rho - np.eye(4) / 4).max() < 1e-3


def test_reconstruction_always_physical():
    # heavy Poisson noise on few counts must still give a physical state
    rng = np.random.default_rng(11)
    for _ in range(25):
        counts = rng.poisson(6.0, size=(9, 4)).astype(float)
        counts[counts.sum(axis=1) == 0, 0] = 1.0
        rec = reconstruct(CountTable(counts=counts))
        validate_state(rec.rho, tol=1e-8)


def test_likelihood_monotone():
    rng = np.random.default_rng(2)
    rho = 0.9 * np.outer(target_state(0.3), target_state(0.3).conj()) \
        + 0.1 * np.eye(4) / 4
    table = simulate_counts(rho, 500, rng=rng)
    # rerun the iteration manually, tracking the likelihood
    from ioncavity import tomography as tg
    freqs = table.frequencies()
    seed = tg._project_to_physical(tg.linear_inversion(freqs))
    seed = 0.999 * seed + 0.001 * np.eye(4) / 4
    lls = []
    state = seed
    for _ in range(200):
        probs = np.clip(born_probabilities(state), 1e-300, None)
        lls.append(tg._log_likelihood(table.counts, probs))
        coef = (freqs / probs).reshape(-1)
        r_op = np.einsum("k,kij->ij", coef, tg._PROJ_STACK)
        cand = r_op @ state @ r_op
        cand /= np.trace(cand).real
        cand_ll = tg._log_likelihood(
            table.counts, np.clip(born_probabilities(cand), 1e-300, None))
        if cand_ll >= lls[-1]:
            state = cand
    rec = reconstruct(table)
    assert rec.log_likelihood >= lls[0] - 1e-9
    assert all(b >= a - 1e-9 for a, b in zip(lls, lls[1:]))


def test_empty_basis_rejected():
    counts = np.ones((9, 4))
    counts[4] = 0.0
    with pytest.raises(InsufficientDataError):
        reconstruct(CountTable(counts=counts))


def test_round_trip_tv_distance_shrinks_with_shots():
    rho = 0.93 * np.outer(target_state(0.91), target_state(0.91).conj()) \
        + 0.07 * np.eye(4) / 4
    rng = np.random.default_rng(17)
    tvs = []
    for shots in (1_000, 10_000, 1_000_000):
        table = simulate_counts(rho, shots, rng=rng)
        rec = reconstruct(table)
        tv = 0.5 * np.abs(born_probabilities(rec.rho)
                          - born_probabilities(rho)).sum(axis=1).max()
        tvs.append(tv)
    assert tvs[2] < tvs[1] < tvs[0]


def test_metrics_pure_target():
    rho = np.outer(target_state(0.91), target_state(0.91).conj())
    met = metrics(rho)
    assert met.fidelity == pytest.approx(1.0, abs=1e-9)
    assert met.purity == pytest.approx(1.0, abs=1e-12)


def test_metrics_maximally_mixed():
    met = metrics(np.eye(4) / 4)
    assert met.fidelity == pytest.approx(0.25, abs=1e-9)
    assert met.purity == pytest.approx(0.25, abs=1e-12)


def test_fidelity_bounded_by_root_purity():
    rng = np.random.default_rng(23)
    for _ in range(1000):
        rho = random_state(rng, rank=int(rng.integers(1, 5)))
        met = metrics(rho)
        assert met.fidelity <= math.sqrt(met.purity) + 1e-9
        assert 0.25 <= met.purity <= 1.0 + 1e-12


def test_fit_theta_matches_closed_form():
    rng = np.random.default_rng(29)
    for _ in range(50):
        rho = random_state(rng)
        best = fit_theta(rho)
        closed = (-np.angle(rho[0, 3])) % (2 * math.pi)
        f_best = fidelity_at(rho, best)
        f_closed = fidelity_at(rho, closed)
        assert f_best == pytest.approx(f_closed, abs=1e-9)


def test_metrics_with_fixed_theta():
    rho = np.outer(target_state(1.2), target_state(1.2).conj())
    met = metrics(rho, theta=0.0)
    assert met.fidelity == pytest.approx(
        abs(np.vdot(target_state(0.0), target_state(1.2)))**2, abs=1e-12)


def test_bootstrap_determinism_and_scaling():
    rho = 0.95 * np.outer(target_state(0.91), target_state(0.91).conj()) \
        + 0.05 * np.eye(4) / 4
    rng = np.random.default_rng(7)
    table = simulate_counts(rho, 2310, rng=rng)
    bs1 = bootstrap(table, m=60, seed=5)
    bs2 = bootstrap(table, m=60, seed=5)
    assert bs1.fidelity_err == bs2.fidelity_err  # bit identical
    # 100x the counts shrink the error by about 10x
    big = CountTable(counts=table.counts * 100)
    bs_big = bootstrap(big, m=60, seed=5)
    ratio = bs1.fidelity_err / bs_big.fidelity_err
    assert 7 <= ratio <= 13


def test_bootstrap_minimal_m():
    table = simulate_counts(np.eye(4) / 4, 500,
                            rng=np.random.default_rng(1))
    bs = bootstrap(table, m=2, seed=3)
    assert bs.low_confidence
    assert np.isfinite(bs.fidelity_err)
    with pytest.raises(ValueError):
        bootstrap(table, m=1)


def test_background_fidelity_limit():
    # zero background and pure background ends
    assert background_fidelity_limit(0.5, 0.0, 60e-6) == pytest.approx(1.0)
    assert background_fidelity_limit(0.0, 20.0, 60e-6) == pytest.approx(0.25)
    # paper's ceiling at the effective in-pulse window
    f = background_fidelity_limit(0.462, 20.0, 80e-6)
    assert f == pytest.approx(0.9974, abs=1e-3)
    # mixture weight algebra: F = 1 - 3 w / 4
    w = (20.0 * 80e-6) / (0.462 + 20.0 * 80e-6)
    assert f == pytest.approx(1 - 0.75 * w, abs=1e-12)


def test_count_table_validation():
    with pytest.raises(ValueError):
        CountTable(counts=np.ones((4, 9)))
    with pytest.raises(ValueError):
        CountTable(counts=-np.ones((9, 4)))
