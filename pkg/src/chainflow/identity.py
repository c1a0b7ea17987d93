"""Keypairs, signatures, sealed payloads, and the identity registry.

Signing uses Ed25519 (deterministic signatures, which the reproducibility
guarantees rely on). Sealing is a hybrid envelope: ephemeral X25519 exchange,
HKDF-SHA256, then ChaCha20-Poly1305. Key material here is simulation-grade:
private keys are derived from scenario seeds and may be exported as hex,
which is insecure by design and documented as such.
"""

from __future__ import annotations

import enum
import random
from dataclasses import dataclass, field

from cryptography.exceptions import InvalidSignature, InvalidTag
from cryptography.hazmat.primitives import hashes
from cryptography.hazmat.primitives.asymmetric import ed25519, x25519
from cryptography.hazmat.primitives.ciphers.aead import ChaCha20Poly1305
from cryptography.hazmat.primitives.kdf.hkdf import HKDF
from cryptography.hazmat.primitives.serialization import (
    Encoding,
    PrivateFormat,
    PublicFormat,
    NoEncryption,
)

from . import codec
from .errors import BadCredential, DecryptFailure, DuplicateIdentity, MalformedKey
from .hashing import HashAlgo, digest

ID_SIZE = 16
_SEAL_INFO = b"chainflow-seal-v1"
_SEAL_NONCE = b"\x00" * 12  # fresh key per envelope, so a fixed nonce is safe


class Role(enum.Enum):
    SUPPLIER = "supplier"
    PRODUCER = "producer"
    WAREHOUSE = "warehouse"
    RETAILER = "retailer"
    CUSTOMER = "customer"
    NODE = "node"
    ATTACKER = "attacker"


ROLE_TAGS = {role: i for i, role in enumerate(Role)}
ROLE_FROM_TAG = {i: role for role, i in ROLE_TAGS.items()}


def derive_id(sign_public_key: bytes, algo: HashAlgo = HashAlgo.SHA256) -> bytes:
    """Identity id: first 16 bytes of the configured hash of the public key."""
    return digest(sign_public_key, algo)[:ID_SIZE]


@dataclass(frozen=True)
class Identity:
    id: bytes
    public_key: bytes            # Ed25519 verification key
    seal_public_key: bytes       # X25519 key for sealed payloads
    role: Role
    label: str = ""

    def registration_bytes(self) -> bytes:
        """Canonical bytes that a registration credential signs."""
        return (
            codec.enc_bytes(self.id)
            + codec.enc_bytes(self.public_key)
            + codec.enc_bytes(self.seal_public_key)
            + codec.enc_u8(ROLE_TAGS[self.role])
            + codec.enc_str(self.label)
        )


@dataclass(frozen=True)
class PrivateMaterial:
    """Private half of an identity. Held by the simulation, never on-chain."""

    sign_key_bytes: bytes
    seal_key_bytes: bytes

    def sign_key(self) -> ed25519.Ed25519PrivateKey:
        return ed25519.Ed25519PrivateKey.from_private_bytes(self.sign_key_bytes)

    def seal_key(self) -> x25519.X25519PrivateKey:
        return x25519.X25519PrivateKey.from_private_bytes(self.seal_key_bytes)


def generate_identity(
    role: Role,
    rng_seed: int,
    *,
    algo: HashAlgo = HashAlgo.SHA256,
    label: str = "",
) -> tuple[Identity, PrivateMaterial]:
    """Deterministically derive an identity and its private keys from a seed."""
    rng = random.Random(rng_seed)
    material = PrivateMaterial(rng.randbytes(32), rng.randbytes(32))
    return identity_from_material(material, role, algo=algo, label=label), material


def identity_from_material(
    material: PrivateMaterial,
    role: Role,
    *,
    algo: HashAlgo = HashAlgo.SHA256,
    label: str = "",
) -> Identity:
    try:
        sign_pub = material.sign_key().public_key().public_bytes(
            Encoding.Raw, PublicFormat.Raw
        )
        seal_pub = material.seal_key().public_key().public_bytes(
            Encoding.Raw, PublicFormat.Raw
        )
    except ValueError as exc:
        raise MalformedKey(str(exc)) from exc
    return Identity(derive_id(sign_pub, algo), sign_pub, seal_pub, role, label)


def sign(payload: bytes, private_key_bytes: bytes) -> bytes:
    try:
        key = ed25519.Ed25519PrivateKey.from_private_bytes(private_key_bytes)
    except ValueError as exc:
        raise MalformedKey(str(exc)) from exc
    return key.sign(payload)


def verify(payload: bytes, signature: bytes, public_key_bytes: bytes) -> bool:
    try:
        key = ed25519.Ed25519PublicKey.from_public_bytes(public_key_bytes)
    except ValueError as exc:
        raise MalformedKey(str(exc)) from exc
    try:
        key.verify(signature, payload)
        return True
    except InvalidSignature:
        return False


@dataclass(frozen=True)
class SealedValue:
    """Hybrid public-key envelope; only the recipient's seal key opens it."""

    recipient: bytes             # identity id
    ephemeral_public_key: bytes
    ciphertext: bytes

    def encode(self) -> bytes:
        return (
            codec.enc_bytes(self.recipient)
            + codec.enc_bytes(self.ephemeral_public_key)
            + codec.enc_bytes(self.ciphertext)
        )

    @classmethod
    def decode(cls, reader: codec.Reader) -> "SealedValue":
        return cls(reader.bytes_(), reader.bytes_(), reader.bytes_())


def _envelope_key(shared_secret: bytes) -> bytes:
    return HKDF(
        algorithm=hashes.SHA256(), length=32, salt=None, info=_SEAL_INFO
    ).derive(shared_secret)


def seal(
    plaintext: bytes,
    recipient: Identity,
    rng: random.Random,
) -> SealedValue:
    """Encrypt for `recipient`. The ephemeral key comes from `rng` so sealed
    chain content stays byte-reproducible under a fixed scenario seed."""
    ephemeral = x25519.X25519PrivateKey.from_private_bytes(rng.randbytes(32))
    try:
        peer = x25519.X25519PublicKey.from_public_bytes(recipient.seal_public_key)
    except ValueError as exc:
        raise MalformedKey(str(exc)) from exc
    key = _envelope_key(ephemeral.exchange(peer))
    ciphertext = ChaCha20Poly1305(key).encrypt(_SEAL_NONCE, plaintext, None)
    ephemeral_pub = ephemeral.public_key().public_bytes(Encoding.Raw, PublicFormat.Raw)
    return SealedValue(recipient.id, ephemeral_pub, ciphertext)


def unseal(sealed: SealedValue, seal_private_key_bytes: bytes) -> bytes:
    try:
        key_priv = x25519.X25519PrivateKey.from_private_bytes(seal_private_key_bytes)
        peer = x25519.X25519PublicKey.from_public_bytes(sealed.ephemeral_public_key)
    except ValueError as exc:
        raise MalformedKey(str(exc)) from exc
    key = _envelope_key(key_priv.exchange(peer))
    try:
        return ChaCha20Poly1305(key).decrypt(_SEAL_NONCE, sealed.ciphertext, None)
    except InvalidTag as exc:
        raise DecryptFailure("sealed payload does not open with this key") from exc


class RegistryMode(enum.Enum):
    CENTRALIZED = "centralized"
    USER_CENTRIC = "user_centric"


@dataclass(frozen=True)
class RegistryEntry:
    identity: Identity
    credential: bytes


@dataclass
class IdentityRegistry:
    """Issuance registry. Centralized entries carry an issuer signature;
    user-centric entries are self-attested."""

    mode: RegistryMode
    issuer: Identity | None = None
    entries: dict[bytes, RegistryEntry] = field(default_factory=dict)
    _labels: dict[str, bytes] = field(default_factory=dict)

    def __post_init__(self):
        if self.mode is RegistryMode.CENTRALIZED and self.issuer is None:
            raise BadCredential("centralized registry requires an issuer identity")

    def register(self, identity: Identity, credential: bytes) -> None:
        """Add an entry iff the credential verifies for this registry's mode."""
        if self.mode is RegistryMode.CENTRALIZED:
            signer_key = self.issuer.public_key
        else:
            signer_key = identity.public_key
        if not verify(identity.registration_bytes(), credential, signer_key):
            raise BadCredential(
                f"credential does not verify under {self.mode.value} mode"
            )
        if identity.id in self.entries:
            raise DuplicateIdentity(f"id {identity.id.hex()} already registered")
        if identity.label and identity.label in self._labels:
            raise DuplicateIdentity(f"label {identity.label!r} already registered")
        self.entries[identity.id] = RegistryEntry(identity, credential)
        if identity.label:
            self._labels[identity.label] = identity.id

    def get(self, identity_id: bytes) -> Identity | None:
        entry = self.entries.get(identity_id)
        return entry.identity if entry else None

    def by_label(self, label: str) -> Identity | None:
        identity_id = self._labels.get(label)
        return self.get(identity_id) if identity_id else None

    def is_registered(self, identity_id: bytes) -> bool:
        return identity_id in self.entries

    def node_population(self) -> int:
        """Registered identities that take part in block voting."""
        return sum(
            1 for e in self.entries.values() if e.identity.role in (Role.NODE, Role.ATTACKER)
        )

    def identities(self) -> list[Identity]:
        return [entry.identity for entry in self.entries.values()]


def make_credential(identity: Identity, signer_private_key: bytes) -> bytes:
    """Sign a registration. Self-signed in user-centric mode, issuer-signed
    in centralized mode."""
    return sign(identity.registration_bytes(), signer_private_key)
