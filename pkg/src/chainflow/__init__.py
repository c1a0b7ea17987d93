"""Deterministic blockchain supply-chain ledger and attack simulator."""

__version__ = "0.1.0"

from .hashing import HashAlgo
from .identity import Identity, IdentityRegistry, RegistryMode, Role
from .ledger import Block, BlockHeader, Chain, VoteBase, VoteQuorum

__all__ = [
    "Block",
    "BlockHeader",
    "Chain",
    "HashAlgo",
    "Identity",
    "IdentityRegistry",
    "RegistryMode",
    "Role",
    "VoteBase",
    "VoteQuorum",
    "__version__",
]
