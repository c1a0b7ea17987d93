"""Hash-chained block store: canonical encoding, proof-of-work mining,
quorum-gated append, and full-chain verification.

Every byte of a block's canonical encoding is pinned by something checkable:
header bytes by the endorsement signatures (votes sign the header hash),
transaction bytes by the header's payload hash and the author signatures,
vote bytes by id derivation plus signature validity. Decoding is strict, so
re-encoding a decoded block always reproduces the exact input bytes.
"""

from __future__ import annotations

import random
from dataclasses import dataclass
from typing import Iterable, Mapping

from . import codec
from .errors import (
    BlockInvalid,
    LinkMismatch,
    MiningExhausted,
    PoWInvalid,
    QuorumNotMet,
    SchemaViolation,
)
from .events import SupplyChainEvent, decode_event, encode_event, validate_event
from .hashing import (
    DIGEST_SIZE,
    ZERO_DIGEST,
    HashAlgo,
    digest,
    leading_zero_bits,
)
from .identity import Identity, IdentityRegistry, PrivateMaterial, Role, derive_id, sign, verify

import enum

ID_SIZE = 16
ZERO_ID = b"\x00" * ID_SIZE
MAX_DIFFICULTY = 32


# ---------------------------------------------------------------------------
# Transactions and votes
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class SignedTransaction:
    """Event payload signed by its author. The author's verification key is
    embedded so persisted chains verify without out-of-band key material."""

    event: SupplyChainEvent
    author: bytes
    author_public_key: bytes
    signature: bytes

    def payload_bytes(self) -> bytes:
        return encode_event(self.event)

    def encode(self) -> bytes:
        return (
            codec.enc_bytes(self.payload_bytes())
            + codec.enc_bytes(self.author)
            + codec.enc_bytes(self.author_public_key)
            + codec.enc_bytes(self.signature)
        )

    @classmethod
    def decode(cls, r: codec.Reader) -> "SignedTransaction":
        payload = r.bytes_()
        payload_reader = codec.Reader(payload)
        event = decode_event(payload_reader)
        payload_reader.expect_end()
        return cls(event, r.bytes_(), r.bytes_(), r.bytes_())


def make_transaction(
    event: SupplyChainEvent, author: Identity, material: PrivateMaterial
) -> SignedTransaction:
    validate_event(event)
    payload = encode_event(event)
    return SignedTransaction(
        event, author.id, author.public_key, sign(payload, material.sign_key_bytes)
    )


@dataclass(frozen=True)
class Vote:
    """Endorsement of a block: a signature over its header hash."""

    voter: bytes
    public_key: bytes
    signature: bytes

    def encode(self) -> bytes:
        return (
            codec.enc_bytes(self.voter)
            + codec.enc_bytes(self.public_key)
            + codec.enc_bytes(self.signature)
        )

    @classmethod
    def decode(cls, r: codec.Reader) -> "Vote":
        return cls(r.bytes_(), r.bytes_(), r.bytes_())


def make_vote(header_hash: bytes, voter: Identity, material: PrivateMaterial) -> Vote:
    return Vote(voter.id, voter.public_key, sign(header_hash, material.sign_key_bytes))


# ---------------------------------------------------------------------------
# Headers, blocks, chains
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class BlockHeader:
    index: int
    prev_hash: bytes
    timestamp: int          # simulated milliseconds
    nonce: int
    payload_hash: bytes
    proposer: bytes

    def encode(self) -> bytes:
        return (
            codec.enc_u64(self.index)
            + codec.enc_bytes(self.prev_hash)
            + codec.enc_u64(self.timestamp)
            + codec.enc_u64(self.nonce)
            + codec.enc_bytes(self.payload_hash)
            + codec.enc_bytes(self.proposer)
        )

    @classmethod
    def decode(cls, r: codec.Reader) -> "BlockHeader":
        return cls(r.u64(), r.bytes_(), r.u64(), r.u64(), r.bytes_(), r.bytes_())


def hash_header(header: BlockHeader, algo: HashAlgo) -> bytes:
    return digest(header.encode(), algo)


def tx_section_bytes(transactions: tuple[SignedTransaction, ...]) -> bytes:
    out = codec.enc_u32(len(transactions))
    for tx in transactions:
        out += tx.encode()
    return out


def payload_digest(transactions: tuple[SignedTransaction, ...], algo: HashAlgo) -> bytes:
    """Digest over the canonical transaction section; all-zero sentinel for
    an empty payload (only the genesis block carries one)."""
    if not transactions:
        return ZERO_DIGEST
    return digest(tx_section_bytes(transactions), algo)


@dataclass(frozen=True)
class Block:
    header: BlockHeader
    transactions: tuple[SignedTransaction, ...]
    votes: tuple[Vote, ...]

    @staticmethod
    def normalize_votes(votes: Iterable[Vote]) -> tuple[Vote, ...]:
        return tuple(sorted(votes, key=lambda v: v.voter))

    def encode(self) -> bytes:
        out = self.header.encode() + tx_section_bytes(self.transactions)
        out += codec.enc_u32(len(self.votes))
        for vote in self.votes:
            out += vote.encode()
        return out

    @classmethod
    def decode(cls, r: codec.Reader) -> "Block":
        header = BlockHeader.decode(r)
        transactions = tuple(SignedTransaction.decode(r) for _ in range(r.u32()))
        votes = tuple(Vote.decode(r) for _ in range(r.u32()))
        return cls(header, transactions, votes)


def decode_block(data: bytes) -> Block:
    r = codec.Reader(data)
    block = Block.decode(r)
    r.expect_end()
    return block


@dataclass(frozen=True)
class Chain:
    """Immutable chain view; append operations return a new view."""

    blocks: tuple[Block, ...]
    algo: HashAlgo
    difficulty: int

    @property
    def head(self) -> Block:
        return self.blocks[-1]

    @property
    def height(self) -> int:
        return len(self.blocks)

    def head_hash(self) -> bytes:
        return hash_header(self.head.header, self.algo)


# ---------------------------------------------------------------------------
# Mining
# ---------------------------------------------------------------------------

def mining_budget(difficulty: int) -> int:
    return 2 ** (difficulty + 8)


def mine_result(
    header: BlockHeader,
    difficulty: int,
    rng_seed: int,
    algo: HashAlgo,
    budget: int | None = None,
) -> tuple[int, int]:
    """Search for a qualifying nonce; returns (nonce, attempts).

    Candidates are independent draws from the seeded stream, so the attempt
    count is geometric with success probability 2**-difficulty.
    """
    if difficulty < 0 or difficulty > MAX_DIFFICULTY:
        raise PoWInvalid(f"difficulty must be in 0..{MAX_DIFFICULTY}")
    rng = random.Random(rng_seed)
    limit = mining_budget(difficulty) if budget is None else budget
    for attempt in range(1, limit + 1):
        nonce = rng.getrandbits(64)
        candidate = BlockHeader(
            header.index, header.prev_hash, header.timestamp, nonce,
            header.payload_hash, header.proposer,
        )
        if leading_zero_bits(hash_header(candidate, algo)) >= difficulty:
            return nonce, attempt
    raise MiningExhausted(f"no nonce found within {limit} attempts")


def mine(
    header: BlockHeader,
    difficulty: int,
    rng_seed: int,
    algo: HashAlgo = HashAlgo.SHA256,
    budget: int | None = None,
) -> int:
    return mine_result(header, difficulty, rng_seed, algo, budget)[0]


# ---------------------------------------------------------------------------
# Vote quorum
# ---------------------------------------------------------------------------

class VoteBase(enum.Enum):
    REGISTERED_ONLY = "registered_only"
    ALL_OBSERVED = "all_observed"


@dataclass(frozen=True)
class VoteQuorum:
    """At-least-51% acceptance rule over a node population."""

    base: VoteBase
    population: int

    THRESHOLD_NUM = 51
    THRESHOLD_DEN = 100

    @property
    def required(self) -> int:
        # ceil(0.51 * population) in exact integer arithmetic
        return -(-self.THRESHOLD_NUM * self.population // self.THRESHOLD_DEN)

    def __post_init__(self):
        if self.population < 1:
            raise ValueError("population must be >= 1")


def _registered_map(registry) -> dict[bytes, Identity]:
    if registry is None:
        return {}
    if isinstance(registry, IdentityRegistry):
        return {i.id: i for i in registry.identities()}
    if isinstance(registry, Mapping):
        return dict(registry)
    return {i.id: i for i in registry}


def _is_node(identity: Identity) -> bool:
    return identity.role in (Role.NODE, Role.ATTACKER)


def countable_votes(
    block: Block,
    header_hash: bytes,
    base: VoteBase,
    registered: dict[bytes, Identity],
    algo: HashAlgo,
) -> int:
    """Distinct cryptographically valid votes that the base counts."""
    counted: set[bytes] = set()
    for vote in block.votes:
        if vote.voter in counted:
            continue
        if base is VoteBase.REGISTERED_ONLY:
            entry = registered.get(vote.voter)
            if entry is None or not _is_node(entry):
                continue
        if derive_id(vote.public_key, algo) != vote.voter:
            continue
        if not verify(header_hash, vote.signature, vote.public_key):
            continue
        counted.add(vote.voter)
    return len(counted)


def observed_population(block: Block, registered: dict[bytes, Identity]) -> int:
    """All-observed vote population: registered node identities plus any
    distinct voters present on the block itself."""
    observed = {i for i, ident in registered.items() if _is_node(ident)}
    observed.update(v.voter for v in block.votes)
    return len(observed)


# ---------------------------------------------------------------------------
# Validation and verification
# ---------------------------------------------------------------------------

CAUSE_BAD_GENESIS = "bad_genesis"
CAUSE_LINK_MISMATCH = "link_mismatch"
CAUSE_POW_INVALID = "pow_invalid"
CAUSE_TIMESTAMP_REGRESSION = "timestamp_regression"
CAUSE_PAYLOAD_MISMATCH = "payload_hash_mismatch"
CAUSE_EMPTY_BLOCK = "empty_block"
CAUSE_BAD_AUTHOR = "bad_author_id"
CAUSE_BAD_TX_SIGNATURE = "bad_transaction_signature"
CAUSE_BAD_EVENT = "bad_event"
CAUSE_NON_CANONICAL_VOTES = "non_canonical_votes"
CAUSE_DUPLICATE_VOTE = "duplicate_vote"
CAUSE_BAD_VOTE = "bad_vote"
CAUSE_QUORUM_NOT_MET = "quorum_not_met"
CAUSE_PREDECESSOR_INVALID = "predecessor_invalid"


def structural_cause(
    block: Block,
    algo: HashAlgo,
    difficulty: int,
    prev: Block | None,
) -> str | None:
    """First structural or cryptographic defect of a block, or None.

    Quorum is checked separately because it depends on the vote base.
    """
    header = block.header
    if prev is None:
        if header.index != 0 or header.prev_hash != ZERO_DIGEST:
            return CAUSE_BAD_GENESIS
    else:
        if header.index != prev.header.index + 1:
            return CAUSE_LINK_MISMATCH
        if header.prev_hash != hash_header(prev.header, algo):
            return CAUSE_LINK_MISMATCH
        if header.timestamp < prev.header.timestamp:
            return CAUSE_TIMESTAMP_REGRESSION
    if leading_zero_bits(hash_header(header, algo)) < difficulty:
        return CAUSE_POW_INVALID
    if prev is not None and not block.transactions:
        return CAUSE_EMPTY_BLOCK
    if header.payload_hash != payload_digest(block.transactions, algo):
        return CAUSE_PAYLOAD_MISMATCH
    for tx in block.transactions:
        if derive_id(tx.author_public_key, algo) != tx.author:
            return CAUSE_BAD_AUTHOR
        try:
            validate_event(tx.event)
        except SchemaViolation:
            return CAUSE_BAD_EVENT
        if not verify(tx.payload_bytes(), tx.signature, tx.author_public_key):
            return CAUSE_BAD_TX_SIGNATURE
    header_hash = hash_header(header, algo)
    seen: set[bytes] = set()
    prev_voter = None
    for vote in block.votes:
        if prev_voter is not None and vote.voter < prev_voter:
            return CAUSE_NON_CANONICAL_VOTES
        prev_voter = vote.voter
        if vote.voter in seen:
            return CAUSE_DUPLICATE_VOTE
        seen.add(vote.voter)
        if derive_id(vote.public_key, algo) != vote.voter:
            return CAUSE_BAD_VOTE
        if not verify(header_hash, vote.signature, vote.public_key):
            return CAUSE_BAD_VOTE
    return None


@dataclass(frozen=True)
class BlockResult:
    index: int
    ok: bool
    cause: str | None = None


@dataclass(frozen=True)
class VerificationReport:
    results: tuple[BlockResult, ...]

    @property
    def ok(self) -> bool:
        return all(r.ok for r in self.results)

    def first_failure(self) -> BlockResult | None:
        for r in self.results:
            if not r.ok:
                return r
        return None

    def to_jsonable(self) -> dict:
        out: dict = {"valid": self.ok, "blocks": len(self.results)}
        failure = self.first_failure()
        if failure is not None:
            out["first_failure"] = {"index": failure.index, "cause": failure.cause}
        out["results"] = [
            {"index": r.index, "ok": r.ok, **({"cause": r.cause} if r.cause else {})}
            for r in self.results
        ]
        return out


def verify_chain(
    chain: Chain,
    *,
    registry=None,
    vote_base: VoteBase = VoteBase.ALL_OBSERVED,
) -> VerificationReport:
    """Full-chain verification with per-block pass/fail and first cause.

    A block after the first failing one is reported failed as well: once a
    link breaks nothing later is anchored to the genesis block.
    """
    registered = _registered_map(registry)
    results: list[BlockResult] = []
    prev: Block | None = None
    broken = False
    for i, block in enumerate(chain.blocks):
        if broken:
            results.append(BlockResult(i, False, CAUSE_PREDECESSOR_INVALID))
            continue
        cause = structural_cause(block, chain.algo, chain.difficulty, prev)
        if cause is None:
            header_hash = hash_header(block.header, chain.algo)
            if vote_base is VoteBase.REGISTERED_ONLY:
                population = sum(1 for ident in registered.values() if _is_node(ident))
            else:
                population = observed_population(block, registered)
            if population < 1:
                cause = CAUSE_QUORUM_NOT_MET
            else:
                quorum = VoteQuorum(vote_base, population)
                valid = countable_votes(
                    block, header_hash, vote_base, registered, chain.algo
                )
                if valid < quorum.required:
                    cause = CAUSE_QUORUM_NOT_MET
        if cause is None:
            results.append(BlockResult(i, True))
            prev = block
        else:
            results.append(BlockResult(i, False, cause))
            broken = True
    return VerificationReport(tuple(results))


def append_block(
    chain: Chain,
    block: Block,
    quorum: VoteQuorum,
    registry=None,
) -> Chain:
    """Append iff the block verifies against the head and meets quorum."""
    registered = _registered_map(registry)
    head = chain.head
    header_hash = hash_header(block.header, chain.algo)
    if (
        block.header.index != head.header.index + 1
        or block.header.prev_hash != hash_header(head.header, chain.algo)
    ):
        raise LinkMismatch(
            f"block {block.header.index} does not reference the current head"
        )
    if leading_zero_bits(header_hash) < chain.difficulty:
        raise PoWInvalid(
            f"header hash has < {chain.difficulty} leading zero bits"
        )
    cause = structural_cause(block, chain.algo, chain.difficulty, head)
    if cause is not None:
        raise BlockInvalid(cause)
    valid = countable_votes(block, header_hash, quorum.base, registered, chain.algo)
    if valid < quorum.required:
        raise QuorumNotMet(
            f"need {quorum.required} of {quorum.population} distinct valid votes,"
            f" have {valid}"
        )
    return Chain(chain.blocks + (block,), chain.algo, chain.difficulty)


# ---------------------------------------------------------------------------
# Chain construction helpers (shared by the simulator and the tests)
# ---------------------------------------------------------------------------

def build_genesis(
    algo: HashAlgo,
    difficulty: int,
    timestamp: int,
    mine_seed: int,
    voters: Iterable[tuple[Identity, PrivateMaterial]] = (),
) -> Block:
    """Genesis: all-zero prev hash, empty-payload sentinel, endorsed by the
    initial node population so its bytes are tamper-evident."""
    header = BlockHeader(0, ZERO_DIGEST, timestamp, 0, ZERO_DIGEST, ZERO_ID)
    nonce = mine(header, difficulty, mine_seed, algo)
    header = BlockHeader(0, ZERO_DIGEST, timestamp, nonce, ZERO_DIGEST, ZERO_ID)
    header_hash = hash_header(header, algo)
    votes = Block.normalize_votes(
        make_vote(header_hash, ident, mat) for ident, mat in voters
    )
    return Block(header, (), votes)


def build_block(
    chain: Chain,
    transactions: Iterable[SignedTransaction],
    proposer: bytes,
    timestamp: int,
    mine_seed: int,
    voters: Iterable[tuple[Identity, PrivateMaterial]] = (),
) -> Block:
    """Mine and endorse a block extending `chain`'s head."""
    txs = tuple(transactions)
    header = BlockHeader(
        index=chain.height,
        prev_hash=chain.head_hash(),
        timestamp=timestamp,
        nonce=0,
        payload_hash=payload_digest(txs, chain.algo),
        proposer=proposer,
    )
    nonce = mine(header, chain.difficulty, mine_seed, chain.algo)
    header = BlockHeader(
        header.index, header.prev_hash, header.timestamp, nonce,
        header.payload_hash, header.proposer,
    )
    header_hash = hash_header(header, chain.algo)
    votes = Block.normalize_votes(
        make_vote(header_hash, ident, mat) for ident, mat in voters
    )
    return Block(header, txs, votes)
