import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from numpy.testing import assert_allclose

from dmdembed.dmd import (
    CepThreshold,
    DmdConfig,
    DmdDecomposition,
    FixedRank,
    conjugate_groups,
    fit_dmd,
    fit_tdmd,
    mode_frequency,
    reconstruct,
    resolve_rank,
    vandermonde,
)
from dmdembed.errors import EmptySpectrumError
from dmdembed.hankel import SignalMatrix, build_hankel, materialize_hankel


def rotation_signal(period=24.0, t_steps=48):
    t = np.arange(t_steps)
    return np.vstack([np.cos(2 * np.pi * t / period), np.sin(2 * np.pi * t / period)])


def view_of(values, tau=1):
    return build_hankel(SignalMatrix.from_values(np.asarray(values, float)), tau=tau)


def test_fit_dmd_rotation_recovery():
    view = view_of(rotation_signal())
    dec = fit_dmd(view, DmdConfig(rank_policy=FixedRank(2)))
    expected = np.exp(1j * 2 * np.pi / 24)
    assert_allclose(sorted(dec.eigenvalues, key=lambda z: -z.imag),
                    [expected, np.conj(expected)], atol=1e-8)
    assert np.max(np.abs(np.abs(dec.eigenvalues) - 1.0)) <= 1e-6
    # amplitudes reconstruct the first snapshot exactly
    first = reconstruct(dec, 1)[:, 0]
    assert_allclose(first, view.source.values[:, 0], atol=1e-8)


def test_fit_dmd_constant_signal():
    values = np.outer([1.0, 3.0], np.ones(10))
    dec = fit_dmd(view_of(values), DmdConfig(rank_policy=FixedRank(1)))
    assert_allclose(dec.eigenvalues, [1.0], atol=1e-8)
    mode = dec.modes[:, 0]
    direction = np.array([1.0, 3.0]) / np.linalg.norm([1.0, 3.0])
    assert_allclose(np.abs(mode), direction, atol=1e-8)


def test_fit_dmd_decay_truncated_window():
    values = np.outer([1.0, 2.0], 0.9 ** np.arange(30))
    dec = fit_dmd(view_of(values), DmdConfig(rank_policy=FixedRank(1), fit_window="truncated"))
    assert_allclose(dec.eigenvalues, [0.9], atol=1e-6)
    assert dec.fit_span == 29


def test_fit_dmd_unit_norm_modes_and_conjugate_amplitudes():
    rng = np.random.default_rng(8)
    t = np.arange(60)
    values = np.vstack([
        np.cos(2 * np.pi * t / 12 + 0.4) * rng.uniform(0.5, 1.5),
        np.sin(2 * np.pi * t / 12) * rng.uniform(0.5, 1.5),
        np.cos(2 * np.pi * t / 12 + 1.0),
    ])
    dec = fit_dmd(view_of(values), DmdConfig(rank_policy=FixedRank(2)))
    assert_allclose(np.linalg.norm(dec.modes, axis=0), np.ones(2), atol=1e-10)
    groups = conjugate_groups(dec.eigenvalues)
    assert [len(g) for g in groups] == [2]
    i, j = groups[0]
    assert abs(dec.amplitudes[i] - np.conj(dec.amplitudes[j])) <= 1e-8 * abs(dec.amplitudes[i])


def test_fit_dmd_first_snapshot_amplitudes():
    view = view_of(rotation_signal())
    dec = fit_dmd(view, DmdConfig(rank_policy=FixedRank(2), amplitude_method="first_snapshot"))
    assert_allclose(reconstruct(dec, 1)[:, 0], view.source.values[:, 0], atol=1e-8)


def test_resolve_rank_examples():
    assert resolve_rank(np.array([3.0, 1.0]), CepThreshold(0.90)) == 1  # 9/10 >= 0.9
    assert resolve_rank(np.array([1.0, 1.0, 1.0, 1.0]), CepThreshold(0.75)) == 3
    sigma = np.array([5.0, 3.0, 2.0, 1.0, 1e-14, 1e-15])
    assert resolve_rank(sigma, FixedRank(10)) == 4
    with pytest.raises(EmptySpectrumError):
        resolve_rank(np.array([0.0, 0.0]), FixedRank(1))
    with pytest.raises(ValueError):
        resolve_rank(np.array([1.0]), FixedRank(0))
    with pytest.raises(ValueError):
        resolve_rank(np.array([1.0]), CepThreshold(1.5))


@given(st.integers(0, 10_000), st.floats(0.05, 1.0), st.floats(0.05, 1.0))
@settings(max_examples=40, deadline=None)
def test_resolve_rank_nondecreasing_in_fraction(seed, f1, f2):
    rng = np.random.default_rng(seed)
    sigma = np.sort(rng.uniform(0.1, 5.0, size=6))[::-1]
    lo, hi = sorted([f1, f2])
    assert resolve_rank(sigma, CepThreshold(lo)) <= resolve_rank(sigma, CepThreshold(hi))


def test_vandermonde_examples():
    vm = vandermonde(np.array([1.0, -1.0]), 4)
    assert_allclose(vm.entries, [[1, 1, 1, 1], [1, -1, 1, -1]])
    vm_i = vandermonde(np.array([1j]), 4)
    assert_allclose(vm_i.entries[0], [1, 1j, -1, -1j])
    lam = np.exp(1j * 2 * np.pi / 24)
    vm24 = vandermonde(np.array([lam]), 25)
    assert_allclose(vm24.entries[0, 12], -1.0, atol=1e-12)
    assert_allclose(vm24.entries[0, 24], 1.0, atol=1e-12)
    with pytest.raises(ValueError):
        vandermonde(np.array([1.0]), 0)


@given(st.integers(0, 10_000), st.integers(2, 40))
@settings(max_examples=30, deadline=None)
def test_vandermonde_recurrence_and_ones_column(seed, length):
    rng = np.random.default_rng(seed)
    lam = rng.normal(size=3) + 1j * rng.normal(size=3)
    vm = vandermonde(lam, length)
    assert_allclose(vm.entries[:, 0], np.ones(3))
    expected = vm.entries[:, :-1] * lam[:, None]
    scale = np.maximum(np.abs(vm.entries[:, 1:]), 1e-300)
    assert np.max(np.abs(vm.entries[:, 1:] - expected) / scale) <= 1e-10


def test_reconstruct_examples():
    values = rotation_signal()
    dec = fit_dmd(view_of(values), DmdConfig(rank_policy=FixedRank(2)))
    rec = reconstruct(dec, 48)
    assert np.linalg.norm(rec - values) <= 1e-6 * np.linalg.norm(values)
    # imaginary residue of the complex product is negligible for real fits
    vm = vandermonde(dec.eigenvalues, 48).entries
    full = dec.modes @ (dec.amplitudes[:, None] * vm)
    assert np.linalg.norm(full.imag) <= 1e-6 * np.linalg.norm(full.real)

    const = fit_dmd(view_of(np.outer([2.0, 1.0], np.ones(8))), DmdConfig(rank_policy=FixedRank(1)))
    rec_c = reconstruct(const, 5)
    for j in range(1, 5):
        assert_allclose(rec_c[:, j], rec_c[:, 0], atol=1e-10)


def mode_generated_signal(rng, eigenvalues, n_nodes, t_steps):
    """Real signal with full dynamical rank: random conjugate-consistent
    complex modes applied to the eigenvalue power table."""
    lams = np.asarray(eigenvalues, dtype=complex)
    modes = rng.normal(size=(n_nodes, lams.size)) + 1j * rng.normal(size=(n_nodes, lams.size))
    for k, lam in enumerate(lams):
        if abs(lam.imag) < 1e-12:
            modes[:, k] = modes[:, k].real
        elif k > 0 and abs(lams[k - 1] - np.conj(lam)) < 1e-12:
            modes[:, k] = np.conj(modes[:, k - 1])
    powers = vandermonde(lams, t_steps).entries
    return (modes @ powers).real


def test_reconstruct_random_low_rank():
    rng = np.random.default_rng(33)
    lam = np.exp(1j * 2 * np.pi / 9)
    values = mode_generated_signal(rng, [lam, np.conj(lam), 1.0], n_nodes=5, t_steps=63)
    dec = fit_dmd(view_of(values), DmdConfig(rank_policy=FixedRank(3)))
    rec = reconstruct(dec, 63)
    assert np.linalg.norm(rec - values) <= 1e-6 * np.linalg.norm(values)


def test_rank_monotonicity_on_training_error():
    rng = np.random.default_rng(12)
    lams = []
    for p in (6.0, 12.0, 24.0):
        lam = np.exp(1j * 2 * np.pi / p)
        lams += [lam, np.conj(lam)]
    values = mode_generated_signal(rng, lams, n_nodes=8, t_steps=48)
    errors = []
    for r in (2, 4, 6):
        dec = fit_dmd(view_of(values), DmdConfig(rank_policy=FixedRank(r)))
        errors.append(np.linalg.norm(reconstruct(dec, 48) - values))
    assert errors[0] >= errors[1] - 1e-9
    assert errors[1] >= errors[2] - 1e-9


def test_mode_frequency():
    daily = mode_frequency(np.exp(1j * 2 * np.pi / 72), step_seconds=900.0)
    assert daily.period_steps == pytest.approx(72.0)
    assert daily.period_seconds == pytest.approx(72.0 * 900.0)
    flat = mode_frequency(1.0, step_seconds=900.0)
    assert flat.period_steps is None and flat.growth_rate == 0.0
    decay = mode_frequency(0.5, step_seconds=1.0)
    assert decay.growth_rate == pytest.approx(math.log(0.5))
    assert decay.period_steps is None
    with pytest.raises(ValueError):
        mode_frequency(0.0, step_seconds=1.0)


def test_tdmd_noiseless_matches_exact():
    view = view_of(rotation_signal())
    exact = fit_dmd(view, DmdConfig(rank_policy=FixedRank(2)))
    total = fit_tdmd(view, DmdConfig(rank_policy=FixedRank(2)))
    assert_allclose(np.sort_complex(total.eigenvalues), np.sort_complex(exact.eigenvalues),
                    atol=1e-8)
    assert total.solver == "total"


def test_tdmd_constant_signal():
    values = np.outer([1.0, 3.0], np.ones(12))
    dec = fit_tdmd(view_of(values), DmdConfig(rank_policy=FixedRank(1)))
    assert_allclose(dec.eigenvalues, [1.0], atol=1e-8)


def test_tdmd_reduces_modulus_bias_under_noise():
    # Monte-Carlo comparison: the debiased solver's |eigenvalue| bias must
    # not exceed the exact solver's on a noisy unit-modulus rotation.
    period, t_steps, sigma = 24.0, 192, 0.05
    base = rotation_signal(period, t_steps)
    biases_exact, biases_total = [], []
    for seed in range(20):
        rng = np.random.default_rng(seed)
        noisy = base + sigma * rng.normal(size=base.shape)
        view = view_of(noisy)
        cfg = DmdConfig(rank_policy=FixedRank(2))
        eig_exact = fit_dmd(view, cfg).eigenvalues
        eig_total = fit_tdmd(view, cfg).eigenvalues
        biases_exact.append(np.mean(np.abs(np.abs(eig_exact) - 1.0)))
        biases_total.append(np.mean(np.abs(np.abs(eig_total) - 1.0)))
    assert np.mean(biases_total) <= np.mean(biases_exact)


@given(st.integers(0, 10_000), st.integers(1, 2), st.booleans())
@settings(max_examples=20, deadline=None)
def test_shift_consistency_recovers_generating_eigenvalues(seed, n_pairs, add_real):
    # noiseless signal generated by r modes with distinct eigenvalues:
    # a rank-r fit recovers the eigenvalue multiset
    rng = np.random.default_rng(seed)
    lams = []
    for _ in range(n_pairs):
        modulus = rng.uniform(0.9, 1.0)
        angle = rng.uniform(0.2, np.pi - 0.2)
        lams += [modulus * np.exp(1j * angle), modulus * np.exp(-1j * angle)]
    if add_real:
        lams.append(rng.uniform(0.9, 1.0))
    lams = np.array(lams)
    r = lams.size
    n_nodes = 2 * r
    t_steps = 40
    modes = rng.normal(size=(n_nodes, r)) + 1j * rng.normal(size=(n_nodes, r))
    # conjugate-consistent spatial modes so the signal is real
    for k in range(0, 2 * n_pairs, 2):
        modes[:, k + 1] = np.conj(modes[:, k])
    if add_real:
        modes[:, -1] = modes[:, -1].real
    powers = vandermonde(lams, t_steps).entries
    values = (modes @ powers).real
    dec = fit_dmd(view_of(values), DmdConfig(rank_policy=FixedRank(r), fit_window="truncated"))
    got = np.sort_complex(dec.eigenvalues)
    want = np.sort_complex(lams)
    assert np.max(np.abs(got - want)) <= 1e-6


def test_deep_tau_truncated_window_drops_wrapped_columns():
    values = np.outer([1.0, 2.0], 0.9 ** np.arange(40))
    view = view_of(values, tau=5)
    dec = fit_dmd(view, DmdConfig(rank_policy=FixedRank(1), fit_window="truncated"))
    assert dec.fit_span == 35
    assert_allclose(dec.eigenvalues, [0.9], atol=1e-6)


def test_serialization_round_trip():
    dec = fit_dmd(view_of(rotation_signal()), DmdConfig(rank_policy=FixedRank(2)))
    text = dec.to_json()
    back = DmdDecomposition.from_json(text)
    assert np.array_equal(back.eigenvalues, dec.eigenvalues)
    assert np.array_equal(back.amplitudes, dec.amplitudes)
    assert np.array_equal(back.modes, dec.modes)
    assert back.rank == dec.rank
    assert back.tau == dec.tau
    assert back.fit_span == dec.fit_span
    assert back.sampling_seconds == dec.sampling_seconds
    assert back.solver == dec.solver


def test_fit_dmd_zero_signal_raises():
    with pytest.raises(EmptySpectrumError):
        fit_dmd(view_of(np.zeros((2, 8))), DmdConfig(rank_policy=FixedRank(1)))


def test_dmdconfig_validation():
    with pytest.raises(ValueError):
        DmdConfig(solver="banjo")
    with pytest.raises(ValueError):
        DmdConfig(amplitude_method="guess")
    with pytest.raises(ValueError):
        DmdConfig(fit_window="open")


def test_fit_dmd_modes_match_lifted_space():
    values = rotation_signal()
    view = build_hankel(SignalMatrix.from_values(values), tau=3)
    dec = fit_dmd(view, DmdConfig(rank_policy=FixedRank(2)))
    assert dec.modes.shape == (6, 2)
    h = materialize_hankel(values, 3)
    rec = reconstruct(dec, 48)
    assert np.linalg.norm(rec - h) <= 1e-6 * np.linalg.norm(h)
