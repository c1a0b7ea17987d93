"""Exception types shared across the package."""


class ChainflowError(Exception):
    """Base class for all chainflow errors."""


class UnsupportedAlgo(ChainflowError):
    """Requested hash algorithm is not available in this build."""


class MiningExhausted(ChainflowError):
    """No qualifying nonce found within the attempt budget."""


class LinkMismatch(ChainflowError):
    """Block's prev_hash does not match the current head."""


class PoWInvalid(ChainflowError):
    """Header hash does not meet the difficulty target."""


class QuorumNotMet(ChainflowError):
    """Distinct valid endorsements fall short of the 51% requirement."""


class BlockInvalid(ChainflowError):
    """Block failed structural or cryptographic validation."""

    def __init__(self, cause: str, message: str = ""):
        super().__init__(message or cause)
        self.cause = cause


class MalformedKey(ChainflowError):
    """Key bytes cannot be parsed as a valid key."""


class BadCredential(ChainflowError):
    """Registration credential does not verify for the registry mode."""


class DuplicateIdentity(ChainflowError):
    """Identity id or label already present in the registry."""


class DecryptFailure(ChainflowError):
    """Sealed payload cannot be opened with the supplied key."""


class RoleMismatch(ChainflowError):
    """Actor role is not allowed to emit this event variant."""


class SchemaViolation(ChainflowError):
    """Event or scenario payload violates its schema."""


class OutOfOrderEvent(ChainflowError):
    """Event variant is not allowed at the order's current stage."""


class DuplicateContract(ChainflowError):
    """A contract with this id is already deployed."""


class IncompleteOrder(ChainflowError):
    """Order definition is missing fields a builtin contract needs."""


class InsufficientInventory(ChainflowError):
    """Inventory delta would drive a stock level below zero."""


class TopologyUnsatisfiable(ChainflowError):
    """No connected topology exists for the requested (count, degree)."""


class ChainFileError(ChainflowError):
    """Chain file is malformed or truncated at the framing level."""


class ChecksumMismatch(ChainFileError):
    """Context record bytes do not match their recorded checksum."""


class RecordDecodeError(ChainFileError):
    """A length-consistent block record holds undecodable content."""

    def __init__(self, record_index: int, message: str):
        super().__init__(f"block record {record_index}: {message}")
        self.record_index = record_index
