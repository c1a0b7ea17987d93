"""Append-only chain file (magic "CFS1").

Layout: magic, then length-prefixed records. Record 0 is the verification
context (algo, difficulty, vote base, registered identity snapshot) followed
by a SHA-256 checksum over everything before it, so a flipped byte anywhere
in the context is detectable. Records 1..n are canonical block encodings.
"""

from __future__ import annotations

import hashlib
from dataclasses import dataclass
from pathlib import Path

from . import codec
from .errors import ChainFileError, ChecksumMismatch, RecordDecodeError
from .hashing import HashAlgo
from .identity import Identity, ROLE_FROM_TAG, ROLE_TAGS
from .ledger import Block, Chain, VoteBase, decode_block

MAGIC = b"CFS1"
_FORMAT_VERSION = 1

_ALGO_TAGS = {HashAlgo.SHA256: 0, HashAlgo.SHA256D: 1, HashAlgo.SCRYPT: 2}
_ALGO_FROM_TAG = {v: k for k, v in _ALGO_TAGS.items()}
_BASE_TAGS = {VoteBase.REGISTERED_ONLY: 0, VoteBase.ALL_OBSERVED: 1}
_BASE_FROM_TAG = {v: k for k, v in _BASE_TAGS.items()}


@dataclass(frozen=True)
class LoadedChain:
    chain: Chain
    registered: dict[bytes, Identity]
    vote_base: VoteBase


def _context_payload(chain: Chain, registered: list[Identity], vote_base: VoteBase) -> bytes:
    out = codec.enc_u8(_FORMAT_VERSION)
    out += codec.enc_u8(_ALGO_TAGS[chain.algo])
    out += codec.enc_u32(chain.difficulty)
    out += codec.enc_u8(_BASE_TAGS[vote_base])
    entries = sorted(registered, key=lambda i: i.id)
    out += codec.enc_u32(len(entries))
    for ident in entries:
        out += codec.enc_bytes(ident.id)
        out += codec.enc_bytes(ident.public_key)
        out += codec.enc_bytes(ident.seal_public_key)
        out += codec.enc_u8(ROLE_TAGS[ident.role])
        out += codec.enc_str(ident.label)
    return out


def chain_to_bytes(chain: Chain, registered: list[Identity], vote_base: VoteBase) -> bytes:
    context = _context_payload(chain, registered, vote_base)
    checksum = hashlib.sha256(MAGIC + context).digest()
    record0 = context + checksum
    out = MAGIC + codec.enc_u32(len(record0)) + record0
    for block in chain.blocks:
        encoded = block.encode()
        out += codec.enc_u32(len(encoded)) + encoded
    return out


def write_chain(
    path: str | Path,
    chain: Chain,
    registered: list[Identity],
    vote_base: VoteBase,
) -> None:
    Path(path).write_bytes(chain_to_bytes(chain, registered, vote_base))


def chain_from_bytes(data: bytes) -> LoadedChain:
    r = codec.Reader(data)
    if r.remaining() < len(MAGIC) or data[:4] != MAGIC:
        raise ChainFileError("not a chain file: bad magic")
    r._take(4)  # consume magic
    record0 = r.bytes_()
    if len(record0) < 32:
        raise ChainFileError("context record too short")
    context, checksum = record0[:-32], record0[-32:]
    if hashlib.sha256(MAGIC + context).digest() != checksum:
        raise ChecksumMismatch("context checksum mismatch")
    cr = codec.Reader(context)
    version = cr.u8()
    if version != _FORMAT_VERSION:
        raise ChainFileError(f"unsupported chain file version {version}")
    algo_tag = cr.u8()
    if algo_tag not in _ALGO_FROM_TAG:
        raise ChainFileError(f"unknown hash algo tag {algo_tag}")
    algo = _ALGO_FROM_TAG[algo_tag]
    difficulty = cr.u32()
    base_tag = cr.u8()
    if base_tag not in _BASE_FROM_TAG:
        raise ChainFileError(f"unknown vote base tag {base_tag}")
    vote_base = _BASE_FROM_TAG[base_tag]
    registered: dict[bytes, Identity] = {}
    for _ in range(cr.u32()):
        ident_id = cr.bytes_()
        public_key = cr.bytes_()
        seal_public_key = cr.bytes_()
        role_tag = cr.u8()
        if role_tag not in ROLE_FROM_TAG:
            raise ChainFileError(f"unknown role tag {role_tag}")
        label = cr.str_()
        registered[ident_id] = Identity(
            ident_id, public_key, seal_public_key, ROLE_FROM_TAG[role_tag], label
        )
    cr.expect_end()

    blocks: list[Block] = []
    while r.remaining() > 0:
        record = r.bytes_()  # framing overrun here means a truncated file
        try:
            blocks.append(decode_block(record))
        except Exception as exc:  # strict decode errors surface per record
            raise RecordDecodeError(len(blocks), str(exc)) from exc
    chain = Chain(tuple(blocks), algo, difficulty)
    return LoadedChain(chain, registered, vote_base)


def read_chain(path: str | Path) -> LoadedChain:
    try:
        data = Path(path).read_bytes()
    except OSError as exc:
        raise ChainFileError(f"cannot read chain file: {exc}") from exc
    return chain_from_bytes(data)
