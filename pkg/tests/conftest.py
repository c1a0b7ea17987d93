import pytest

from chainflow.events import RawMaterialShipment
from chainflow.hashing import HashAlgo
from chainflow.identity import Role, generate_identity
from chainflow.ledger import (
    Chain,
    VoteBase,
    VoteQuorum,
    append_block,
    build_block,
    build_genesis,
    make_transaction,
)
from chainflow.rng import substream_seed

SCENARIO_DIR = "scenarios"


@pytest.fixture(scope="session")
def voters():
    """Five node identities used as the standing voter set."""
    return [generate_identity(Role.NODE, 9000 + i, label=f"node-{i}") for i in range(5)]


@pytest.fixture(scope="session")
def supplier():
    return generate_identity(Role.SUPPLIER, 777, label="acme")


def make_chain(voters, supplier, length=5, difficulty=4, algo=HashAlgo.SHA256, seed=31):
    """A verifiable chain of `length` raw-shipment blocks after the genesis."""
    genesis = build_genesis(algo, difficulty, 0, substream_seed(seed, "g"), voters)
    chain = Chain((genesis,), algo, difficulty)
    quorum = VoteQuorum(VoteBase.ALL_OBSERVED, len(voters))
    ident, material = supplier
    for k in range(length):
        event = RawMaterialShipment(
            order_number=f"PO-{k}",
            certificate_of_origin=f"CO-{k}",
            batch_data=f"BATCH-{k}",
            shipment_date=(k + 1) * 1000,
            barcode=f"RAW-{k:04d}",
        )
        tx = make_transaction(event, ident, material)
        block = build_block(
            chain, [tx], voters[0][0].id, (k + 1) * 1000,
            substream_seed(seed, "m", k), voters,
        )
        chain = append_block(chain, block, quorum)
    return chain


@pytest.fixture()
def small_chain(voters, supplier):
    return make_chain(voters, supplier, length=5)
