"""Supply-chain domain data: orders, the event tagged union, contract rule
payloads, and actions, each with its canonical binary codec.

Every event carries the order_number linking it to exactly one order; it is
encoded first, then the variant fields in declared order. Free-text fields
that may travel confidentially (certificate of origin, batch data, product
received data) accept either a plain string or a SealedValue.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, fields as dc_fields

from . import codec
from .errors import SchemaViolation
from .identity import SealedValue

Sealable = "str | SealedValue"


@dataclass(frozen=True)
class Order:
    order_number: str
    buyer: str                  # producing party ordering raw material
    seller: str                 # raw-material supplier
    sku: str
    spec: str
    quantity: int
    quality_requirement: str
    price: int
    invoice_number: str = ""
    warehouse: str = ""
    retailer: str = ""

    def __post_init__(self):
        if self.quantity <= 0:
            raise SchemaViolation(f"order {self.order_number}: quantity must be > 0")
        if self.price < 0:
            raise SchemaViolation(f"order {self.order_number}: price must be >= 0")
        if not self.order_number:
            raise SchemaViolation("order_number must be non-empty")

    def encode(self) -> bytes:
        return (
            codec.enc_str(self.order_number)
            + codec.enc_str(self.buyer)
            + codec.enc_str(self.seller)
            + codec.enc_str(self.sku)
            + codec.enc_str(self.spec)
            + codec.enc_u64(self.quantity)
            + codec.enc_str(self.quality_requirement)
            + codec.enc_i64(self.price)
            + codec.enc_str(self.invoice_number)
            + codec.enc_str(self.warehouse)
            + codec.enc_str(self.retailer)
        )

    @classmethod
    def decode(cls, r: codec.Reader) -> "Order":
        return cls(
            order_number=r.str_(), buyer=r.str_(), seller=r.str_(), sku=r.str_(),
            spec=r.str_(), quantity=r.u64(), quality_requirement=r.str_(),
            price=r.i64(), invoice_number=r.str_(), warehouse=r.str_(),
            retailer=r.str_(),
        )


# ---------------------------------------------------------------------------
# Actions emitted by contract evaluation
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class Pay:
    from_party: str
    to_party: str
    amount: int


@dataclass(frozen=True)
class UpdateInventory:
    location: str
    sku: str
    delta: int


@dataclass(frozen=True)
class RaiseDispute:
    reason: str


@dataclass(frozen=True)
class Advance:
    stage: str


Action = Pay | UpdateInventory | RaiseDispute | Advance

_ACTION_TAGS = {Pay: 0, UpdateInventory: 1, RaiseDispute: 2, Advance: 3}


def encode_action(action: Action) -> bytes:
    out = codec.enc_u8(_ACTION_TAGS[type(action)])
    if isinstance(action, Pay):
        return out + codec.enc_str(action.from_party) + codec.enc_str(action.to_party) \
            + codec.enc_i64(action.amount)
    if isinstance(action, UpdateInventory):
        return out + codec.enc_str(action.location) + codec.enc_str(action.sku) \
            + codec.enc_i64(action.delta)
    if isinstance(action, RaiseDispute):
        return out + codec.enc_str(action.reason)
    return out + codec.enc_str(action.stage)


def decode_action(r: codec.Reader) -> Action:
    tag = r.u8()
    if tag == 0:
        return Pay(r.str_(), r.str_(), r.i64())
    if tag == 1:
        return UpdateInventory(r.str_(), r.str_(), r.i64())
    if tag == 2:
        return RaiseDispute(r.str_())
    if tag == 3:
        return Advance(r.str_())
    raise SchemaViolation(f"unknown action tag {tag}")


# ---------------------------------------------------------------------------
# Contract rule payloads (engine lives in contracts.py)
# ---------------------------------------------------------------------------

class BuiltinKind(enum.Enum):
    RECEIPT_CHECK = 0
    WAREHOUSE_MATCH = 1
    RETAIL_RECEIPT = 2


@dataclass(frozen=True)
class BuiltinRule:
    id: str
    kind: BuiltinKind
    order: Order


class ConditionOp(enum.Enum):
    EQ = 0
    NE = 1
    LT = 2
    LE = 3
    GT = 4
    GE = 5


@dataclass(frozen=True)
class Condition:
    field: str
    op: ConditionOp
    value: str | int

    def encode(self) -> bytes:
        out = codec.enc_str(self.field) + codec.enc_u8(self.op.value)
        if isinstance(self.value, str):
            return out + codec.enc_u8(0) + codec.enc_str(self.value)
        return out + codec.enc_u8(1) + codec.enc_i64(self.value)

    @classmethod
    def decode(cls, r: codec.Reader) -> "Condition":
        field = r.str_()
        try:
            op = ConditionOp(r.u8())
        except ValueError as exc:
            raise SchemaViolation(str(exc)) from exc
        kind = r.u8()
        if kind == 0:
            return cls(field, op, r.str_())
        if kind == 1:
            return cls(field, op, r.i64())
        raise SchemaViolation(f"unknown condition value tag {kind}")


@dataclass(frozen=True)
class DeclarativeRule:
    """Scenario-expressible rule: variant filter plus a conjunction of field
    comparisons; fires its static action list."""

    id: str
    event_variant: str | None
    conditions: tuple[Condition, ...]
    actions: tuple[Action, ...]


ContractRule = BuiltinRule | DeclarativeRule


def encode_rule(rule: ContractRule) -> bytes:
    if isinstance(rule, BuiltinRule):
        return codec.enc_u8(rule.kind.value) + codec.enc_str(rule.id) + rule.order.encode()
    out = codec.enc_u8(3) + codec.enc_str(rule.id)
    out += codec.enc_str(rule.event_variant or "")
    out += codec.enc_u32(len(rule.conditions))
    for cond in rule.conditions:
        out += cond.encode()
    out += codec.enc_u32(len(rule.actions))
    for action in rule.actions:
        out += encode_action(action)
    return out


def decode_rule(r: codec.Reader) -> ContractRule:
    tag = r.u8()
    if tag in (0, 1, 2):
        return BuiltinRule(r.str_(), BuiltinKind(tag), Order.decode(r))
    if tag != 3:
        raise SchemaViolation(f"unknown rule tag {tag}")
    rule_id = r.str_()
    variant = r.str_() or None
    conditions = tuple(Condition.decode(r) for _ in range(r.u32()))
    actions = tuple(decode_action(r) for _ in range(r.u32()))
    return DeclarativeRule(rule_id, variant, conditions, actions)


# ---------------------------------------------------------------------------
# Event variants
# ---------------------------------------------------------------------------

def _dec_bool(r: codec.Reader) -> bool:
    # strict: any byte but 0/1 is non-canonical and must not decode
    tag = r.u8()
    if tag > 1:
        raise SchemaViolation(f"non-canonical boolean byte {tag}")
    return tag == 1


def _enc_sealable(value) -> bytes:
    if isinstance(value, SealedValue):
        return codec.enc_u8(1) + value.encode()
    return codec.enc_u8(0) + codec.enc_str(value)


def _dec_sealable(r: codec.Reader):
    tag = r.u8()
    if tag == 0:
        return r.str_()
    if tag == 1:
        return SealedValue.decode(r)
    raise SchemaViolation(f"unknown sealable tag {tag}")


@dataclass(frozen=True)
class RawMaterialShipment:
    order_number: str
    certificate_of_origin: str | SealedValue
    batch_data: str | SealedValue
    shipment_date: int
    barcode: str


@dataclass(frozen=True)
class ProducerReceipt:
    order_number: str
    received_quantity: int
    quality_pass: bool
    spec_observed: str


@dataclass(frozen=True)
class ProductionRecord:
    order_number: str
    production_number: str
    barcode: str
    consumed_batch: str   # barcode of the raw-material lot this run consumed


@dataclass(frozen=True)
class WarehouseShipment:
    order_number: str
    shipment_number: str
    barcode: str


@dataclass(frozen=True)
class WarehouseReceipt:
    order_number: str
    supplier: str
    invoice_number: str
    shipment_number: str
    quantity: int
    quality_pass: bool


@dataclass(frozen=True)
class RetailShipment:
    order_number: str
    product_received_data: str | SealedValue
    shipment_date: int
    packaging_barcode: str


@dataclass(frozen=True)
class RetailReceipt:
    order_number: str
    receive_date: int
    customer_id: str


@dataclass(frozen=True)
class Payment:
    order_number: str
    from_party: str
    to_party: str
    amount: int
    stage: str


@dataclass(frozen=True)
class ContractDeployment:
    order_number: str
    rule: ContractRule


SupplyChainEvent = (
    RawMaterialShipment | ProducerReceipt | ProductionRecord | WarehouseShipment
    | WarehouseReceipt | RetailShipment | RetailReceipt | Payment | ContractDeployment
)

EVENT_TAGS: dict[type, int] = {
    RawMaterialShipment: 0,
    ProducerReceipt: 1,
    ProductionRecord: 2,
    WarehouseShipment: 3,
    WarehouseReceipt: 4,
    RetailShipment: 5,
    RetailReceipt: 6,
    Payment: 7,
    ContractDeployment: 8,
}

VARIANT_NAMES: dict[type, str] = {
    RawMaterialShipment: "raw_material_shipment",
    ProducerReceipt: "producer_receipt",
    ProductionRecord: "production_record",
    WarehouseShipment: "warehouse_shipment",
    WarehouseReceipt: "warehouse_receipt",
    RetailShipment: "retail_shipment",
    RetailReceipt: "retail_receipt",
    Payment: "payment",
    ContractDeployment: "contract_deployment",
}

EVENT_TYPE_BY_NAME = {name: cls for cls, name in VARIANT_NAMES.items()}

# The seven stage events, in flow order. Payments and deployments sit outside
# the stage machine.
STAGE_SEQUENCE: tuple[type, ...] = (
    RawMaterialShipment, ProducerReceipt, ProductionRecord, WarehouseShipment,
    WarehouseReceipt, RetailShipment, RetailReceipt,
)


def variant_name(event: SupplyChainEvent) -> str:
    return VARIANT_NAMES[type(event)]


def encode_event(event: SupplyChainEvent) -> bytes:
    out = codec.enc_u8(EVENT_TAGS[type(event)]) + codec.enc_str(event.order_number)
    if isinstance(event, RawMaterialShipment):
        return out + _enc_sealable(event.certificate_of_origin) \
            + _enc_sealable(event.batch_data) + codec.enc_u64(event.shipment_date) \
            + codec.enc_str(event.barcode)
    if isinstance(event, ProducerReceipt):
        return out + codec.enc_u64(event.received_quantity) \
            + codec.enc_u8(1 if event.quality_pass else 0) \
            + codec.enc_str(event.spec_observed)
    if isinstance(event, ProductionRecord):
        return out + codec.enc_str(event.production_number) \
            + codec.enc_str(event.barcode) + codec.enc_str(event.consumed_batch)
    if isinstance(event, WarehouseShipment):
        return out + codec.enc_str(event.shipment_number) + codec.enc_str(event.barcode)
    if isinstance(event, WarehouseReceipt):
        return out + codec.enc_str(event.supplier) + codec.enc_str(event.invoice_number) \
            + codec.enc_str(event.shipment_number) + codec.enc_u64(event.quantity) \
            + codec.enc_u8(1 if event.quality_pass else 0)
    if isinstance(event, RetailShipment):
        return out + _enc_sealable(event.product_received_data) \
            + codec.enc_u64(event.shipment_date) + codec.enc_str(event.packaging_barcode)
    if isinstance(event, RetailReceipt):
        return out + codec.enc_u64(event.receive_date) + codec.enc_str(event.customer_id)
    if isinstance(event, Payment):
        return out + codec.enc_str(event.from_party) + codec.enc_str(event.to_party) \
            + codec.enc_i64(event.amount) + codec.enc_str(event.stage)
    if isinstance(event, ContractDeployment):
        return out + encode_rule(event.rule)
    raise SchemaViolation(f"unknown event type {type(event).__name__}")


def decode_event(r: codec.Reader) -> SupplyChainEvent:
    tag = r.u8()
    order_number = r.str_()
    if tag == 0:
        return RawMaterialShipment(order_number, _dec_sealable(r), _dec_sealable(r),
                                   r.u64(), r.str_())
    if tag == 1:
        return ProducerReceipt(order_number, r.u64(), _dec_bool(r), r.str_())
    if tag == 2:
        return ProductionRecord(order_number, r.str_(), r.str_(), r.str_())
    if tag == 3:
        return WarehouseShipment(order_number, r.str_(), r.str_())
    if tag == 4:
        return WarehouseReceipt(order_number, r.str_(), r.str_(), r.str_(), r.u64(),
                                _dec_bool(r))
    if tag == 5:
        return RetailShipment(order_number, _dec_sealable(r), r.u64(), r.str_())
    if tag == 6:
        return RetailReceipt(order_number, r.u64(), r.str_())
    if tag == 7:
        return Payment(order_number, r.str_(), r.str_(), r.i64(), r.str_())
    if tag == 8:
        return ContractDeployment(order_number, decode_rule(r))
    raise SchemaViolation(f"unknown event tag {tag}")


_BARCODE_FIELDS = {
    RawMaterialShipment: ("barcode",),
    ProductionRecord: ("barcode", "consumed_batch"),
    WarehouseShipment: ("barcode",),
    RetailShipment: ("packaging_barcode",),
}


def validate_event(event: SupplyChainEvent) -> None:
    """Schema checks shared by event construction and honest validation."""
    if not event.order_number:
        raise SchemaViolation("order_number must be non-empty")
    for field_name in _BARCODE_FIELDS.get(type(event), ()):
        value = getattr(event, field_name)
        if not isinstance(value, str) or not value:
            raise SchemaViolation(f"{field_name} must be a non-empty plain string")
    if isinstance(event, ProducerReceipt) and event.received_quantity <= 0:
        raise SchemaViolation("received_quantity must be > 0")
    if isinstance(event, WarehouseReceipt) and event.quantity <= 0:
        raise SchemaViolation("quantity must be > 0")
    if isinstance(event, Payment):
        if event.amount <= 0:
            raise SchemaViolation("payment amount must be > 0")
        if not event.from_party or not event.to_party:
            raise SchemaViolation("payment parties must be non-empty")
    if isinstance(event, ContractDeployment) and not event.rule.id:
        raise SchemaViolation("contract rule id must be non-empty")


def event_to_jsonable(event: SupplyChainEvent, unsealer=None) -> dict:
    """JSON view of an event. Sealed fields are redacted unless `unsealer`
    (callable SealedValue -> str | None) recovers the plaintext."""
    out: dict = {"variant": variant_name(event)}
    if isinstance(event, ContractDeployment):
        out["order_number"] = event.order_number
        out["rule_id"] = event.rule.id
        return out
    for f in dc_fields(event):
        value = getattr(event, f.name)
        if isinstance(value, SealedValue):
            plain = unsealer(value) if unsealer else None
            if plain is not None:
                out[f.name] = plain
            else:
                out[f.name] = {"sealed_for": value.recipient.hex()}
        else:
            out[f.name] = value
    return out
