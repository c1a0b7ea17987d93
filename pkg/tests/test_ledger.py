import math
import random

import pytest

from chainflow.errors import (
    BlockInvalid,
    ChainFileError,
    LinkMismatch,
    PoWInvalid,
    QuorumNotMet,
    SchemaViolation,
)
from chainflow.events import RawMaterialShipment
from chainflow.hashing import HashAlgo
from chainflow.identity import Role, generate_identity
from chainflow.ledger import (
    Block,
    Chain,
    VoteBase,
    VoteQuorum,
    append_block,
    build_block,
    decode_block,
    hash_header,
    make_transaction,
    verify_chain,
)
from chainflow.rng import substream_seed

from conftest import make_chain


def test_quorum_required_is_exact_ceiling():
    for population in range(1, 201):
        required = VoteQuorum(VoteBase.ALL_OBSERVED, population).required
        assert required == math.ceil(0.51 * population)
    assert VoteQuorum(VoteBase.ALL_OBSERVED, 4).required == 3
    assert VoteQuorum(VoteBase.ALL_OBSERVED, 100).required == 51
    assert VoteQuorum(VoteBase.ALL_OBSERVED, 200).required == 102


def test_untampered_chain_verifies(small_chain):
    report = verify_chain(small_chain)
    assert report.ok
    assert all(r.ok for r in report.results)
    assert len(report.results) == 6


def test_payload_flip_fails_block_and_all_after(voters, supplier):
    chain = make_chain(voters, supplier, length=5)
    records = [b.encode() for b in chain.blocks]
    # flip one byte inside block 2's first transaction payload (its barcode)
    target = bytearray(records[2])
    offset = bytes(target).index(b"RAW-0001") + 4
    target[offset] ^= 0x01
    blocks = list(chain.blocks)
    blocks[2] = decode_block(bytes(target))
    tampered = Chain(tuple(blocks), chain.algo, chain.difficulty)
    report = verify_chain(tampered)
    assert [r.ok for r in report.results] == [True, True, False, False, False, False]
    assert report.results[2].cause in (
        "payload_hash_mismatch", "bad_transaction_signature", "bad_event",
    )
    assert report.results[3].cause == "predecessor_invalid"


def test_timestamp_regression_reported(voters, supplier):
    chain = make_chain(voters, supplier, length=2)
    ident, material = supplier
    event = RawMaterialShipment("PO-X", "CO", "B", 500, "RAW-X")
    tx = make_transaction(event, ident, material)
    # legitimately mined and endorsed, but with a clock running backwards
    block = build_block(chain, [tx], voters[0][0].id, timestamp=1,
                        mine_seed=99, voters=voters)
    blocks = chain.blocks + (block,)
    report = verify_chain(Chain(blocks, chain.algo, chain.difficulty))
    assert not report.ok
    assert report.first_failure().index == 3
    assert report.first_failure().cause == "timestamp_regression"


def test_append_valid_block_extends(voters, supplier, small_chain):
    ident, material = supplier
    event = RawMaterialShipment("PO-NEW", "CO", "B", 99000, "RAW-NEW")
    tx = make_transaction(event, ident, material)
    block = build_block(small_chain, [tx], voters[0][0].id, 99000, 5, voters)
    longer = append_block(
        small_chain, block, VoteQuorum(VoteBase.ALL_OBSERVED, len(voters))
    )
    assert longer.height == small_chain.height + 1
    assert small_chain.height == 6  # original view unchanged


def test_append_quorum_not_met_50_of_100(voters, supplier, small_chain):
    ident, material = supplier
    event = RawMaterialShipment("PO-Q", "CO", "B", 99000, "RAW-Q")
    tx = make_transaction(event, ident, material)
    block = build_block(small_chain, [tx], voters[0][0].id, 99000, 6, voters)
    # 5 distinct valid votes cannot satisfy a population of 100 (needs 51)
    with pytest.raises(QuorumNotMet):
        append_block(small_chain, block, VoteQuorum(VoteBase.ALL_OBSERVED, 100))


def test_append_wrong_prev_hash(voters, supplier, small_chain):
    ident, material = supplier
    event = RawMaterialShipment("PO-L", "CO", "B", 99000, "RAW-L")
    tx = make_transaction(event, ident, material)
    # build against a shorter prefix so the link points at the wrong head
    stale = Chain(small_chain.blocks[:3], small_chain.algo, small_chain.difficulty)
    block = build_block(stale, [tx], voters[0][0].id, 99000, 7, voters)
    with pytest.raises(LinkMismatch):
        append_block(small_chain, block, VoteQuorum(VoteBase.ALL_OBSERVED, 5))


def test_append_pow_invalid(voters, supplier):
    # difficulty-0 chain used to mine, then appended at difficulty 16
    chain = make_chain(voters, supplier, length=1, difficulty=0)
    hard = Chain(chain.blocks[:1], chain.algo, 16)
    block = chain.blocks[1]
    with pytest.raises(PoWInvalid):
        append_block(hard, block, VoteQuorum(VoteBase.ALL_OBSERVED, 5))


def test_append_rejects_empty_block(voters, small_chain):
    block = build_block(small_chain, [], voters[0][0].id, 99000, 8, voters)
    with pytest.raises(BlockInvalid) as exc:
        append_block(small_chain, block, VoteQuorum(VoteBase.ALL_OBSERVED, 5))
    assert exc.value.cause == "empty_block"


def test_registered_only_ignores_unregistered_votes(voters, supplier, small_chain):
    ident, material = supplier
    event = RawMaterialShipment("PO-R", "CO", "B", 99000, "RAW-R")
    tx = make_transaction(event, ident, material)
    strangers = [generate_identity(Role.ATTACKER, 5000 + i) for i in range(5)]
    block = build_block(small_chain, [tx], voters[0][0].id, 99000, 9, strangers)
    registry = {i.id: i for i, _ in voters}
    with pytest.raises(QuorumNotMet):
        append_block(
            small_chain, block,
            VoteQuorum(VoteBase.REGISTERED_ONLY, 5), registry=registry,
        )
    # the same endorsements satisfy the observed base
    appended = append_block(
        small_chain, block, VoteQuorum(VoteBase.ALL_OBSERVED, 5), registry=registry
    )
    assert appended.height == small_chain.height + 1


def test_random_single_byte_mutations_all_flagged(voters, supplier):
    """Any single-byte change in any block record fails verification at or
    before the mutated block (decode failure counts as detection there)."""
    chain = make_chain(voters, supplier, length=5)
    records = [b.encode() for b in chain.blocks]
    rng = random.Random(4242)
    for _ in range(150):
        index = rng.randrange(len(records))
        data = bytearray(records[index])
        offset = rng.randrange(len(data))
        old = data[offset]
        data[offset] = rng.choice([b for b in range(256) if b != old])
        try:
            mutated_block = decode_block(bytes(data))
        except (ChainFileError, SchemaViolation, ValueError, OverflowError):
            continue  # structural break detected while decoding record `index`
        blocks = list(chain.blocks)
        blocks[index] = mutated_block
        report = verify_chain(Chain(tuple(blocks), chain.algo, chain.difficulty))
        failure = report.first_failure()
        assert failure is not None, f"mutation at block {index} offset {offset} missed"
        assert failure.index <= index


def test_no_false_alarms_on_untampered(voters, supplier):
    chain = make_chain(voters, supplier, length=5)
    assert verify_chain(chain).ok


def test_verification_report_jsonable(small_chain):
    data = verify_chain(small_chain).to_jsonable()
    assert data["valid"] is True
    assert data["blocks"] == 6
    assert "first_failure" not in data
