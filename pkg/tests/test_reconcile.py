from itertools import combinations

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from risplkg.codes import BCHCode, BlockCode, get_code, gf2_rank, hamming74
from risplkg.errors import DomainError
from risplkg.reconcile import (
    ToeplitzSeed,
    Transcript,
    confirmation_seed,
    leakage_budget,
    privacy_amplify,
    reconcile_block,
    reconcile_keys,
    syndrome,
)

H74 = hamming74()
BCH = get_code("bch127_64")
bits = st.integers(0, 2 ** 32 - 1)


def rand_bits(rng, n):
    return rng.integers(0, 2, n, dtype=np.uint8)


# codes

def test_bch_parameters():
    assert (BCH.n, BCH.k, BCH.t) == (127, 64, 10)
    assert gf2_rank(BCH.parity_check) == 63


def test_codewords_have_zero_syndrome():
    assert not syndrome(H74.codewords(), H74).any()
    g = BCH.generator_matrix()
    assert g.shape == (64, 127)
    assert not BCH.syndrome(g).any()


def test_hamming_single_error_syndrome_is_column():
    for word in H74.codewords():
        for pos in range(7):
            e = word.copy()
            e[pos] ^= 1
            assert np.array_equal(syndrome(e, H74), H74.parity_check[:, pos])


@settings(max_examples=50)
@given(bits)
def test_syndrome_linear(seed):
    rng = np.random.default_rng(seed)
    x, y = rand_bits(rng, 127), rand_bits(rng, 127)
    assert np.array_equal(syndrome(x ^ y, BCH), syndrome(x, BCH) ^ syndrome(y, BCH))


def test_syndrome_length_mismatch():
    with pytest.raises(DomainError):
        syndrome(np.zeros(8, np.uint8), H74)


def test_block_code_rejects_rank_deficient():
    with pytest.raises(DomainError):
        BlockCode(4, 2, 0, [[1, 1, 0, 0], [1, 1, 0, 0]])
    with pytest.raises(DomainError):
        BlockCode(4, 2, 0, np.ones((3, 4)))


def test_get_code_names():
    assert get_code("hamming74").n == 7
    # tabulated primitive BCH code (63, 36, t=5)
    assert get_code("bch63_t5").k == 36
    with pytest.raises(DomainError):
        get_code("ldpc")


def test_bch_generator_divides_x_n_minus_1():
    from risplkg.codes import _poly_mod_gf2

    assert _poly_mod_gf2((1 << 127) | 1, BCH.generator) == 0


# reconciliation

def test_zero_error_returns_unchanged():
    b = rand_bits(np.random.default_rng(0), 127)
    fixed, ok = reconcile_block(b, syndrome(b, BCH), BCH)
    assert ok and np.array_equal(fixed, b)


def test_hamming_exhaustive_single_flips():
    good = 0
    for word in H74.codewords():
        for pos in range(-1, 7):
            b = word.copy()
            if pos >= 0:
                b[pos] ^= 1
            fixed, ok = reconcile_block(b, syndrome(word, H74), H74)
            good += ok and np.array_equal(fixed, word)
    assert good == 128


def test_hamming_double_flips_never_recover():
    a = np.array([1, 0, 1, 1, 0, 0, 1], np.uint8)
    for i, j in combinations(range(7), 2):
        b = a.copy()
        b[[i, j]] ^= 1
        fixed, ok = reconcile_block(b, syndrome(a, H74), H74)
        assert not (ok and np.array_equal(fixed, a))


def test_bch_random_errors_within_radius():
    rng = np.random.default_rng(11)
    for _ in range(1000):
        a = rand_bits(rng, 127)
        e = np.zeros(127, np.uint8)
        e[rng.choice(127, rng.integers(0, 11), replace=False)] = 1
        fixed, ok = reconcile_block(a ^ e, syndrome(a, BCH), BCH)
        assert ok and np.array_equal(fixed, a)


def test_bch_beyond_radius_never_claims_wrong_weight():
    rng = np.random.default_rng(12)
    for _ in range(200):
        a = rand_bits(rng, 127)
        e = np.zeros(127, np.uint8)
        e[rng.choice(127, 20, replace=False)] = 1
        fixed, ok = reconcile_block(a ^ e, syndrome(a, BCH), BCH)
        if ok:
            # a bounded-distance decoder may land on another codeword, never more than t away
            assert np.count_nonzero(fixed ^ (a ^ e)) <= 10
            assert np.array_equal(syndrome(fixed, BCH), syndrome(a, BCH))


def test_small_bch_exhaustive_weight_two():
    code = BCHCode(4, 2)  # BCH(15, 7)
    assert (code.n, code.k) == (15, 7)
    a = np.zeros(15, np.uint8)
    for w in (1, 2):
        for pos in combinations(range(15), w):
            b = a.copy()
            b[list(pos)] = 1
            fixed, ok = reconcile_block(b, code.syndrome(a), code)
            assert ok and not fixed.any()


def test_reconcile_block_shape_errors():
    with pytest.raises(DomainError):
        reconcile_block(np.zeros(6, np.uint8), np.zeros(3, np.uint8), H74)


# privacy amplification

def test_pa_zero_seed():
    seed = ToeplitzSeed(np.zeros(20, np.uint8), np.zeros(8, np.uint8))
    assert not privacy_amplify(rand_bits(np.random.default_rng(0), 20), seed).any()


def test_pa_identity_prefix():
    row = np.zeros(20, np.uint8)
    row[0] = 1
    col = np.zeros(8, np.uint8)
    col[0] = 1
    x = rand_bits(np.random.default_rng(1), 20)
    assert np.array_equal(privacy_amplify(x, ToeplitzSeed(row, col)), x[:8])


@settings(max_examples=40)
@given(bits, st.integers(1, 300), st.integers(0, 300))
def test_pa_matches_matrix_and_is_linear(seed, n, mm):
    m = max(1, min(mm, n))
    rng = np.random.default_rng(seed)
    s = ToeplitzSeed.random(n, m, rng)
    x, y = rand_bits(rng, n), rand_bits(rng, n)
    t = s.matrix().astype(int)
    assert np.array_equal(privacy_amplify(x, s), (t @ x) % 2)
    assert np.array_equal(privacy_amplify(x ^ y, s), privacy_amplify(x, s) ^ privacy_amplify(y, s))


def test_pa_large_input_uses_fft_path():
    rng = np.random.default_rng(5)
    s = ToeplitzSeed.random(3000, 1500, rng)
    x = rand_bits(rng, 3000)
    assert np.array_equal(privacy_amplify(x, s), (s.matrix().astype(int) @ x) % 2)


def test_pa_errors():
    s = ToeplitzSeed.random(10, 4, np.random.default_rng(0))
    with pytest.raises(DomainError):
        privacy_amplify(np.zeros(9, np.uint8), s)
    with pytest.raises(DomainError):
        privacy_amplify(np.zeros(10, np.uint8), s, m=11)
    with pytest.raises(DomainError):
        ToeplitzSeed.random(4, 5, np.random.default_rng(0))
    with pytest.raises(DomainError):
        ToeplitzSeed(np.array([1, 0]), np.array([0]))


def test_toeplitz_structure():
    s = ToeplitzSeed.random(9, 5, np.random.default_rng(3))
    t = s.matrix()
    assert np.array_equal(t[0], s.first_row) and np.array_equal(t[:, 0], s.first_col)
    assert all(t[i, j] == t[i + 1, j + 1] for i in range(4) for j in range(8))


# leakage

@pytest.mark.parametrize("args,m", [((70, H74, 10, 8), 32), ((70, H74, 10, 100), 0),
                                    ((127, BCH, 1, 0), 64)])
def test_leakage_budget(args, m):
    assert leakage_budget(*args) == m


def test_leakage_budget_requires_whole_blocks():
    with pytest.raises(DomainError):
        leakage_budget(71, H74, 10, 0)


def test_transcript_leakage_equals_published_bits():
    rng = np.random.default_rng(6)
    a = rand_bits(rng, 127 * 30 + 5)
    b = a ^ (rng.random(a.size) < 0.06).astype(np.uint8)
    tr = Transcript()
    res = reconcile_keys(a, b, BCH, tr, confirm_bits=32)
    assert res.n_blocks == 30
    assert tr.bits_of_kind("syndrome") == 30 * 63
    assert tr.bits_of_kind("confirmation") == 32 * (30 - res.decode_failures)
    assert tr.leaked_bits() == 30 * 63 + 32 * (30 - res.decode_failures)
    assert np.array_equal(res.key_a, res.key_b)
    assert res.key_a.size == 127 * res.n_accepted


def test_confirmation_seed_is_fixed_public():
    a, b = confirmation_seed(127, 32), confirmation_seed(127, 32)
    assert np.array_equal(a.first_row, b.first_row) and np.array_equal(a.first_col, b.first_col)


def test_reconcile_keys_rejects_length_mismatch():
    with pytest.raises(DomainError):
        reconcile_keys(np.zeros(10, np.uint8), np.zeros(9, np.uint8), H74, Transcript())


def test_hamming_mode_confirmation_catches_miscorrection():
    # two flips in one block decode to a wrong codeword; the confirmation hash must reject it
    rng = np.random.default_rng(9)
    a = rand_bits(rng, 7 * 200)
    b = a.copy()
    for blk in range(0, 200, 2):
        b[blk * 7 + np.array([0, 3])] ^= 1
    res = reconcile_keys(a, b, H74, Transcript(), confirm_bits=7)
    assert np.array_equal(res.key_a, res.key_b)
    assert res.n_accepted == 100
