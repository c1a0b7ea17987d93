"""Five-party flow operations: role-gated event construction, stage
sequencing, application-level honesty checks, and barcode provenance.
"""

from __future__ import annotations

from dataclasses import dataclass

from .contracts import (
    LedgerState,
    REQUIRED_STAGE,
    stage_event_admissible,
)
from .errors import OutOfOrderEvent, RoleMismatch, SchemaViolation
from .events import (
    ContractDeployment,
    EVENT_TYPE_BY_NAME,
    Payment,
    ProductionRecord,
    RawMaterialShipment,
    STAGE_SEQUENCE,
    SupplyChainEvent,
    VARIANT_NAMES,
    event_to_jsonable,
    validate_event,
    variant_name,
)
from .identity import Identity, PrivateMaterial, Role
from .ledger import Chain, SignedTransaction, make_transaction

# Which role may author each stage event. Payments are authored by the payer
# and deployments by any registered identity.
ROLE_FOR_VARIANT: dict[str, Role] = {
    "raw_material_shipment": Role.SUPPLIER,
    "producer_receipt": Role.PRODUCER,
    "production_record": Role.PRODUCER,
    "warehouse_shipment": Role.PRODUCER,
    "warehouse_receipt": Role.WAREHOUSE,
    "retail_shipment": Role.WAREHOUSE,
    "retail_receipt": Role.RETAILER,
}

_PAYER_ROLES = (Role.PRODUCER, Role.WAREHOUSE, Role.RETAILER)


def build_event(
    actor: Identity,
    material: PrivateMaterial,
    variant: str,
    fields: dict,
) -> SignedTransaction:
    """Construct, validate, and sign a supply-chain event for `actor`."""
    event_type = EVENT_TYPE_BY_NAME.get(variant)
    if event_type is None:
        raise SchemaViolation(f"unknown event variant {variant!r}")
    required_role = ROLE_FOR_VARIANT.get(variant)
    if required_role is not None and actor.role is not required_role:
        raise RoleMismatch(
            f"{actor.role.value} may not emit {variant} (needs {required_role.value})"
        )
    if variant == "payment":
        if actor.role not in _PAYER_ROLES:
            raise RoleMismatch(f"{actor.role.value} may not emit payments")
        if fields.get("from_party") != actor.label:
            raise RoleMismatch("payment author must be the paying party")
    try:
        event = event_type(**fields)
    except TypeError as exc:
        raise SchemaViolation(f"bad fields for {variant}: {exc}") from exc
    validate_event(event)
    return make_transaction(event, actor, material)


# Next admissible stage event per stage, derived from the required-stage map.
_NEXT_VARIANT_FOR_STAGE = {
    required: VARIANT_NAMES[cls] for cls, required in REQUIRED_STAGE.items()
}


def stage_machine(order_state) -> tuple[str, ...]:
    """Event variants the order admits next; empty when frozen or complete."""
    if order_state.frozen:
        return ()
    next_variant = _NEXT_VARIANT_FOR_STAGE.get(order_state.stage)
    if next_variant is None:
        return ()
    return (next_variant,)


def ensure_in_order(state: LedgerState, event: SupplyChainEvent) -> None:
    reason = stage_event_admissible(state, event)
    if reason is not None:
        raise OutOfOrderEvent(
            f"{variant_name(event)} not admissible for {event.order_number}: {reason}"
        )


def application_cause(
    state: LedgerState,
    tx: SignedTransaction,
    registered: dict[bytes, Identity],
) -> str | None:
    """Honest-node judgment of a transaction against agreed state.

    Returns None when the event is well-formed, authored by a registered
    identity of the right role, and admissible at the order's current stage.
    This is what honest validators run before endorsing a block, and what the
    integrity metric re-runs on accepted blocks.
    """
    author = registered.get(tx.author)
    if author is None:
        return "unregistered_author"
    event = tx.event
    try:
        validate_event(event)
    except SchemaViolation:
        return "schema_violation"
    name = variant_name(event)
    required_role = ROLE_FOR_VARIANT.get(name)
    if required_role is not None and author.role is not required_role:
        return "role_mismatch"
    if isinstance(event, Payment):
        if author.role not in _PAYER_ROLES or author.label != event.from_party:
            return "role_mismatch"
        for record in state.payments:
            if (
                not record.settled
                and record.order_number == event.order_number
                and record.stage == event.stage
                and record.from_party == event.from_party
                and record.to_party == event.to_party
                and record.amount == event.amount
            ):
                return None
        return "unmatched_payment"
    if isinstance(event, ContractDeployment):
        if event.rule.id in state.contracts:
            return "duplicate_contract"
        return None
    reason = stage_event_admissible(state, event)
    if reason is not None:
        return reason
    return None


# ---------------------------------------------------------------------------
# Provenance
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class ProvenanceTrail:
    """Chronological lineage of a barcode, supplier-first."""

    barcode: str
    entries: tuple[tuple[int, SupplyChainEvent], ...]

    def __len__(self) -> int:
        return len(self.entries)

    def to_jsonable(self, unsealer=None) -> dict:
        return {
            "barcode": self.barcode,
            "events": [
                {"block_index": idx, **event_to_jsonable(event, unsealer)}
                for idx, event in self.entries
            ],
        }


def _carried_barcodes(event: SupplyChainEvent) -> tuple[str, ...]:
    if isinstance(event, RawMaterialShipment):
        return (event.barcode,)
    if isinstance(event, ProductionRecord):
        return (event.barcode,)
    if hasattr(event, "barcode"):
        return (event.barcode,)
    if hasattr(event, "packaging_barcode"):
        return (event.packaging_barcode,)
    return ()


def trace(chain: Chain, barcode: str) -> ProvenanceTrail:
    """Every event in the barcode's lineage, batch-linked predecessors
    included, ordered supplier-first. Unknown barcodes give an empty trail.

    The lineage is the full recorded flow of every order the barcode appears
    in, plus the raw-material shipments referenced by those orders'
    production records (which is how a product traces back to a lot that
    arrived under a different order).
    """
    stage_events: list[tuple[int, SupplyChainEvent]] = []
    for i, block in enumerate(chain.blocks):
        for tx in block.transactions:
            if isinstance(tx.event, STAGE_SEQUENCE):
                stage_events.append((i, tx.event))

    owning_orders = {
        event.order_number
        for _, event in stage_events
        if barcode in _carried_barcodes(event)
    }
    if not owning_orders:
        return ProvenanceTrail(barcode, ())

    included: dict[int, SupplyChainEvent] = {}
    consumed: set[str] = set()
    for idx, event in stage_events:
        if event.order_number in owning_orders:
            included[idx] = event
            if isinstance(event, ProductionRecord):
                consumed.add(event.consumed_batch)
    # Batch-linked predecessors: raw lots consumed by the included production
    # runs, wherever they were shipped.
    for idx, event in stage_events:
        if isinstance(event, RawMaterialShipment) and event.barcode in consumed:
            included[idx] = event

    ordered = tuple(sorted(included.items(), key=lambda pair: pair[0]))
    return ProvenanceTrail(barcode, ordered)
