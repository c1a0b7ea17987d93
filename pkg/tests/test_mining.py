import math
import random

import pytest

from chainflow.errors import MiningExhausted
from chainflow.hashing import HashAlgo, ZERO_DIGEST, leading_zero_bits
from chainflow.ledger import (
    BlockHeader,
    ZERO_ID,
    hash_header,
    mine,
    mine_result,
    mining_budget,
)

HEADER = BlockHeader(1, b"\x05" * 32, 1000, 0, ZERO_DIGEST, ZERO_ID)


def test_difficulty_zero_accepts_first_candidate():
    nonce, attempts = mine_result(HEADER, 0, 123, HashAlgo.SHA256)
    assert attempts == 1
    assert nonce == random.Random(123).getrandbits(64)


def test_mined_nonce_satisfies_prefix_condition():
    for difficulty in (4, 8):
        nonce = mine(HEADER, difficulty, 7, HashAlgo.SHA256)
        solved = BlockHeader(
            HEADER.index, HEADER.prev_hash, HEADER.timestamp, nonce,
            HEADER.payload_hash, HEADER.proposer,
        )
        assert leading_zero_bits(hash_header(solved, HashAlgo.SHA256)) >= difficulty


def test_deterministic_under_seed():
    assert mine(HEADER, 6, 42, HashAlgo.SHA256) == mine(HEADER, 6, 42, HashAlgo.SHA256)
    assert mine(HEADER, 6, 42, HashAlgo.SHA256) != mine(HEADER, 6, 43, HashAlgo.SHA256)


def test_attempts_follow_geometric_distribution():
    """Monte Carlo check at difficulty 6: mean attempts within 3 sigma of 64."""
    difficulty, runs = 6, 400
    p = 2.0 ** -difficulty
    expected = 1 / p
    sigma_mean = math.sqrt((1 - p) / p**2 / runs)
    total = 0
    for seed in range(runs):
        header = BlockHeader(seed, b"\x05" * 32, 1000, 0, ZERO_DIGEST, ZERO_ID)
        _, attempts = mine_result(header, difficulty, seed, HashAlgo.SHA256)
        total += attempts
    mean = total / runs
    assert abs(mean - expected) <= 3 * sigma_mean


def test_exhausted_when_budget_too_small():
    with pytest.raises(MiningExhausted):
        mine(HEADER, 16, 1, HashAlgo.SHA256, budget=3)


def test_default_budget_formula():
    assert mining_budget(0) == 256
    assert mining_budget(8) == 2**16


def test_difficulty_cap():
    from chainflow.errors import PoWInvalid

    with pytest.raises(PoWInvalid):
        mine(HEADER, 33, 1, HashAlgo.SHA256)
