"""Pluggable hash algorithms for the ledger.

SHA-256 and its double application are always available. Scrypt is optional:
availability is probed when an algorithm is configured, never mid-run.
"""

from __future__ import annotations

import enum
import hashlib

from .errors import UnsupportedAlgo

DIGEST_SIZE = 32
ZERO_DIGEST = b"\x00" * DIGEST_SIZE

# Desk-scale scrypt parameters; fixed so digests are reproducible everywhere.
_SCRYPT_N = 1024
_SCRYPT_R = 8
_SCRYPT_P = 1


class HashAlgo(enum.Enum):
    SHA256 = "sha256"
    SHA256D = "sha256d"
    SCRYPT = "scrypt"


def scrypt_available() -> bool:
    return hasattr(hashlib, "scrypt")


def require_available(algo: HashAlgo) -> HashAlgo:
    """Validate availability at configuration time. Returns the algo."""
    if algo is HashAlgo.SCRYPT and not scrypt_available():
        raise UnsupportedAlgo("scrypt is not provided by this Python build")
    return algo


def digest(data: bytes, algo: HashAlgo) -> bytes:
    """32-byte digest of `data` under `algo`."""
    if algo is HashAlgo.SHA256:
        return hashlib.sha256(data).digest()
    if algo is HashAlgo.SHA256D:
        return hashlib.sha256(hashlib.sha256(data).digest()).digest()
    if algo is HashAlgo.SCRYPT:
        if not scrypt_available():
            raise UnsupportedAlgo("scrypt is not provided by this Python build")
        return hashlib.scrypt(
            data, salt=b"", n=_SCRYPT_N, r=_SCRYPT_R, p=_SCRYPT_P, dklen=DIGEST_SIZE
        )
    raise UnsupportedAlgo(f"unknown hash algorithm: {algo!r}")


def leading_zero_bits(data: bytes) -> int:
    """Number of leading zero bits, the proof-of-work measure."""
    bits = 0
    for byte in data:
        if byte == 0:
            bits += 8
            continue
        bits += 8 - byte.bit_length()
        break
    return bits


def render_hex(data: bytes) -> str:
    if len(data) != DIGEST_SIZE:
        raise ValueError(f"digest must be {DIGEST_SIZE} bytes, got {len(data)}")
    return data.hex()


def parse_hex(text: str) -> bytes:
    raw = bytes.fromhex(text)
    if len(raw) != DIGEST_SIZE:
        raise ValueError(f"digest must be {DIGEST_SIZE} bytes, got {len(raw)}")
    return raw
