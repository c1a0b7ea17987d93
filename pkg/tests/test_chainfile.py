import pytest

from chainflow.chainfile import chain_from_bytes, chain_to_bytes, read_chain, write_chain
from chainflow.errors import ChainFileError
from chainflow.ledger import VoteBase, verify_chain


def _registered(voters, supplier):
    return [i for i, _ in voters] + [supplier[0]]


def test_round_trip(tmp_path, voters, supplier, small_chain):
    path = tmp_path / "chain.cfs"
    write_chain(path, small_chain, _registered(voters, supplier), VoteBase.REGISTERED_ONLY)
    loaded = read_chain(path)
    assert loaded.chain.blocks == small_chain.blocks
    assert loaded.vote_base is VoteBase.REGISTERED_ONLY
    assert set(loaded.registered) == {i.id for i, _ in voters} | {supplier[0].id}
    assert verify_chain(
        loaded.chain, registry=loaded.registered, vote_base=loaded.vote_base
    ).ok


def test_magic_enforced(voters, supplier, small_chain):
    data = chain_to_bytes(small_chain, _registered(voters, supplier), VoteBase.ALL_OBSERVED)
    with pytest.raises(ChainFileError, match="magic"):
        chain_from_bytes(b"XXXX" + data[4:])


def test_truncated_file(voters, supplier, small_chain):
    data = chain_to_bytes(small_chain, _registered(voters, supplier), VoteBase.ALL_OBSERVED)
    with pytest.raises(ChainFileError, match="unexpected end of record"):
        chain_from_bytes(data[:-10])


def test_context_checksum_detects_header_tamper(voters, supplier, small_chain):
    data = bytearray(
        chain_to_bytes(small_chain, _registered(voters, supplier), VoteBase.ALL_OBSERVED)
    )
    data[20] ^= 0x01  # inside the context record
    with pytest.raises(ChainFileError, match="checksum"):
        chain_from_bytes(bytes(data))


def test_missing_file(tmp_path):
    with pytest.raises(ChainFileError, match="cannot read"):
        read_chain(tmp_path / "absent.cfs")
