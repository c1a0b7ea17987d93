"""Smart-contract rule engine and the materialized ledger state.

Rules are immutable data deployed on-chain; evaluation is pure. The ledger
state (orders, inventory, payments, disputes) is derived by folding accepted
blocks from the genesis block, and re-folding a persisted chain reproduces
it exactly. Builtin deployments embed their full order, which is what makes
the fold self-contained.
"""

from __future__ import annotations

import copy
import json
from dataclasses import dataclass, field, replace

from .errors import DuplicateContract, IncompleteOrder
from .events import (
    Action,
    Advance,
    BuiltinKind,
    BuiltinRule,
    Condition,
    ConditionOp,
    ContractDeployment,
    ContractRule,
    DeclarativeRule,
    Order,
    Pay,
    Payment,
    ProducerReceipt,
    ProductionRecord,
    RaiseDispute,
    RawMaterialShipment,
    RetailReceipt,
    RetailShipment,
    SupplyChainEvent,
    UpdateInventory,
    VARIANT_NAMES,
    WarehouseReceipt,
    WarehouseShipment,
    variant_name,
)
from .ledger import Block, Chain

# Order lifecycle stages, in flow order.
STAGES = (
    "created",
    "raw_shipped",
    "producer_received",
    "produced",
    "warehouse_shipped",
    "warehouse_received",
    "retail_shipped",
    "retail_received",
)

# Stage an order must be in for each stage event to be admissible.
REQUIRED_STAGE = {
    RawMaterialShipment: "created",
    ProducerReceipt: "raw_shipped",
    ProductionRecord: "producer_received",
    WarehouseShipment: "produced",
    WarehouseReceipt: "warehouse_shipped",
    RetailShipment: "warehouse_received",
    RetailReceipt: "retail_shipped",
}

# Shipping events advance the stage on acceptance; receipt events advance
# only through a contract's Advance action.
AUTO_ADVANCE = {
    RawMaterialShipment: "raw_shipped",
    ProductionRecord: "produced",
    WarehouseShipment: "warehouse_shipped",
    RetailShipment: "retail_shipped",
}


@dataclass
class OrderState:
    order: Order
    stage: str = "created"
    frozen: bool = False
    dispute_reason: str | None = None
    shipment_number: str | None = None


@dataclass
class PaymentRecord:
    order_number: str
    stage: str
    from_party: str
    to_party: str
    amount: int
    block_index: int
    settled: bool = False

    def key(self) -> tuple[str, str]:
        return (self.order_number, self.stage)


@dataclass
class DeployedRule:
    rule: ContractRule
    deployed_in: int


@dataclass
class LedgerState:
    """Materialized view of the chain; see fold_chain."""

    orders: dict[str, OrderState] = field(default_factory=dict)
    inventory: dict[str, dict[str, int]] = field(default_factory=dict)
    payments: list[PaymentRecord] = field(default_factory=list)
    contracts: dict[str, DeployedRule] = field(default_factory=dict)
    disputes: list[dict] = field(default_factory=list)
    anomalies: list[dict] = field(default_factory=list)

    def clone(self) -> "LedgerState":
        return copy.deepcopy(self)

    def inventory_level(self, location: str, sku: str) -> int:
        return self.inventory.get(location, {}).get(sku, 0)

    def payment_keys(self) -> set[tuple[str, str]]:
        return {p.key() for p in self.payments}

    def get_rule(self, rule_id: str) -> ContractRule | None:
        deployed = self.contracts.get(rule_id)
        return deployed.rule if deployed else None

    def to_jsonable(self) -> dict:
        return {
            "orders": {
                num: {
                    "stage": st.stage,
                    "frozen": st.frozen,
                    "dispute_reason": st.dispute_reason,
                    "shipment_number": st.shipment_number,
                }
                for num, st in sorted(self.orders.items())
            },
            "inventory": {
                loc: dict(sorted(skus.items()))
                for loc, skus in sorted(self.inventory.items())
            },
            "payments": [
                {
                    "order_number": p.order_number,
                    "stage": p.stage,
                    "from": p.from_party,
                    "to": p.to_party,
                    "amount": p.amount,
                    "block_index": p.block_index,
                    "settled": p.settled,
                }
                for p in self.payments
            ],
            "contracts": {
                rule_id: d.deployed_in for rule_id, d in sorted(self.contracts.items())
            },
            "disputes": self.disputes,
            "anomalies": self.anomalies,
        }

    def canonical_bytes(self) -> bytes:
        return json.dumps(
            self.to_jsonable(), sort_keys=True, separators=(",", ":")
        ).encode()


# ---------------------------------------------------------------------------
# Builtin rule constructors
# ---------------------------------------------------------------------------

def _require(order: Order, *fields_: str) -> None:
    missing = [f for f in fields_ if not getattr(order, f)]
    if missing:
        raise IncompleteOrder(
            f"order {order.order_number or '?'} missing: {', '.join(missing)}"
        )


def builtin_receipt_check(order: Order) -> BuiltinRule:
    """Producer-side check of a raw-material receipt against the order;
    pays the supplier when quantity, quality, and spec all match."""
    _require(order, "order_number", "buyer", "seller", "sku", "spec")
    return BuiltinRule(f"receipt-check:{order.order_number}", BuiltinKind.RECEIPT_CHECK, order)


def builtin_warehouse_match(order: Order) -> BuiltinRule:
    """Warehouse-side match of supplier, order, invoice, and shipment; updates
    warehouse inventory and pays the producing party when it all checks out."""
    _require(order, "order_number", "buyer", "seller", "sku", "invoice_number", "warehouse")
    return BuiltinRule(
        f"warehouse-match:{order.order_number}", BuiltinKind.WAREHOUSE_MATCH, order
    )


def builtin_retail_receipt(order: Order) -> BuiltinRule:
    """Retail-side receipt check; pays the warehouse and moves inventory."""
    _require(order, "order_number", "sku", "warehouse", "retailer")
    return BuiltinRule(
        f"retail-receipt:{order.order_number}", BuiltinKind.RETAIL_RECEIPT, order
    )


# ---------------------------------------------------------------------------
# Evaluation
# ---------------------------------------------------------------------------

def _eval_receipt_check(order: Order, event: ProducerReceipt) -> list[Action]:
    if event.received_quantity != order.quantity:
        return [RaiseDispute("quantity mismatch")]
    if not event.quality_pass:
        return [RaiseDispute("quality failure")]
    if event.spec_observed != order.spec:
        return [RaiseDispute("spec mismatch")]
    return [Pay(order.buyer, order.seller, order.price), Advance("producer_received")]


def _eval_warehouse_match(
    order: Order, event: WarehouseReceipt, state: LedgerState
) -> list[Action]:
    if event.supplier != order.seller:
        return [RaiseDispute("supplier mismatch")]
    if event.invoice_number != order.invoice_number:
        return [RaiseDispute("invoice mismatch")]
    recorded = state.orders.get(order.order_number)
    expected_shipment = recorded.shipment_number if recorded else None
    if expected_shipment is None or event.shipment_number != expected_shipment:
        return [RaiseDispute("shipment mismatch")]
    if event.quantity != order.quantity:
        return [RaiseDispute("quantity mismatch")]
    if not event.quality_pass:
        return [RaiseDispute("quality failure")]
    return [
        UpdateInventory(order.warehouse, order.sku, order.quantity),
        Pay(order.warehouse, order.buyer, order.price),
        Advance("warehouse_received"),
    ]


def _eval_retail_receipt(
    order: Order, event: RetailReceipt, state: LedgerState
) -> list[Action]:
    recorded = state.orders.get(order.order_number)
    if recorded is None or recorded.stage != "retail_shipped":
        return [RaiseDispute("no retail shipment on record")]
    return [
        UpdateInventory(order.warehouse, order.sku, -order.quantity),
        UpdateInventory(order.retailer, order.sku, order.quantity),
        Pay(order.retailer, order.warehouse, order.price),
        Advance("retail_received"),
    ]


_CONDITION_CHECKS = {
    ConditionOp.EQ: lambda a, b: a == b,
    ConditionOp.NE: lambda a, b: a != b,
    ConditionOp.LT: lambda a, b: a < b,
    ConditionOp.LE: lambda a, b: a <= b,
    ConditionOp.GT: lambda a, b: a > b,
    ConditionOp.GE: lambda a, b: a >= b,
}


def _eval_declarative(rule: DeclarativeRule, event: SupplyChainEvent) -> list[Action]:
    if rule.event_variant and variant_name(event) != rule.event_variant:
        return []
    for cond in rule.conditions:
        if not hasattr(event, cond.field):
            return []
        actual = getattr(event, cond.field)
        if type(actual) is not type(cond.value):
            return []
        if not _CONDITION_CHECKS[cond.op](actual, cond.value):
            return []
    return list(rule.actions)


def evaluate(
    rule: ContractRule, event: SupplyChainEvent, state: LedgerState
) -> list[Action]:
    """Pure rule evaluation; an empty list means the rule did not trigger."""
    if isinstance(rule, DeclarativeRule):
        return _eval_declarative(rule, event)
    order = rule.order
    if event.order_number != order.order_number:
        return []
    if rule.kind is BuiltinKind.RECEIPT_CHECK and isinstance(event, ProducerReceipt):
        return _eval_receipt_check(order, event)
    if rule.kind is BuiltinKind.WAREHOUSE_MATCH and isinstance(event, WarehouseReceipt):
        return _eval_warehouse_match(order, event, state)
    if rule.kind is BuiltinKind.RETAIL_RECEIPT and isinstance(event, RetailReceipt):
        return _eval_retail_receipt(order, event, state)
    return []


# ---------------------------------------------------------------------------
# Action application
# ---------------------------------------------------------------------------

def apply_actions(
    state: LedgerState,
    actions: list[Action],
    event: SupplyChainEvent,
    block_index: int,
) -> LedgerState:
    """Apply contract actions for `event`; returns a new state.

    A dispute (explicit, or converted from an inventory underflow) freezes
    the order and aborts the remaining actions, so a failed transfer never
    half-applies. Pay is exactly-once per (order, stage).
    """
    new = state.clone()
    stage_key = variant_name(event)
    order_number = event.order_number
    for action in actions:
        if isinstance(action, UpdateInventory):
            level = new.inventory_level(action.location, action.sku)
            if level + action.delta < 0:
                action = RaiseDispute("insufficient inventory")
            else:
                new.inventory.setdefault(action.location, {})[action.sku] = (
                    level + action.delta
                )
                continue
        if isinstance(action, RaiseDispute):
            order_state = new.orders.get(order_number)
            if order_state is not None:
                order_state.frozen = True
                order_state.dispute_reason = action.reason
            new.disputes.append(
                {
                    "order_number": order_number,
                    "stage_event": stage_key,
                    "reason": action.reason,
                    "block_index": block_index,
                }
            )
            break
        if isinstance(action, Pay):
            if action.amount <= 0:
                new.anomalies.append(
                    {"block_index": block_index, "kind": "non_positive_pay"}
                )
                continue
            key = (order_number, stage_key)
            if key in new.payment_keys():
                new.anomalies.append(
                    {
                        "block_index": block_index,
                        "kind": "duplicate_pay_suppressed",
                        "order_number": order_number,
                        "stage": stage_key,
                    }
                )
                continue
            new.payments.append(
                PaymentRecord(
                    order_number, stage_key, action.from_party, action.to_party,
                    action.amount, block_index,
                )
            )
            continue
        if isinstance(action, Advance):
            order_state = new.orders.get(order_number)
            if order_state is not None and not order_state.frozen:
                order_state.stage = action.stage
    return new


# ---------------------------------------------------------------------------
# Folding accepted blocks into state
# ---------------------------------------------------------------------------

def _register_order(state: LedgerState, order: Order) -> None:
    if order.order_number not in state.orders:
        state.orders[order.order_number] = OrderState(order)


def stage_event_admissible(state: LedgerState, event: SupplyChainEvent) -> str | None:
    """None if the stage machine admits `event`, else a reason string."""
    required = REQUIRED_STAGE.get(type(event))
    if required is None:
        return None  # not a stage event
    order_state = state.orders.get(event.order_number)
    if order_state is None:
        return "unknown_order"
    if order_state.frozen:
        return "order_frozen"
    if order_state.stage != required:
        return f"stage_violation:{order_state.stage}"
    return None


def apply_event(state: LedgerState, event: SupplyChainEvent, block_index: int) -> LedgerState:
    """Fold one accepted event into state. Application-invalid events are
    recorded as anomalies and otherwise skipped, so folding is total."""
    new = state.clone()
    if isinstance(event, ContractDeployment):
        rule = event.rule
        if rule.id in new.contracts:
            new.anomalies.append(
                {"block_index": block_index, "kind": "duplicate_contract", "rule_id": rule.id}
            )
            return new
        new.contracts[rule.id] = DeployedRule(rule, block_index)
        if isinstance(rule, BuiltinRule):
            _register_order(new, rule.order)
        return new

    if isinstance(event, Payment):
        for record in new.payments:
            if (
                not record.settled
                and record.order_number == event.order_number
                and record.stage == event.stage
                and record.from_party == event.from_party
                and record.to_party == event.to_party
                and record.amount == event.amount
            ):
                record.settled = True
                return new
        new.anomalies.append(
            {
                "block_index": block_index,
                "kind": "unmatched_payment",
                "order_number": event.order_number,
                "stage": event.stage,
            }
        )
        return new

    reason = stage_event_admissible(new, event)
    if reason is not None:
        new.anomalies.append(
            {
                "block_index": block_index,
                "kind": reason,
                "variant": variant_name(event),
                "order_number": event.order_number,
            }
        )
        return new

    order_state = new.orders[event.order_number]
    if isinstance(event, WarehouseShipment):
        order_state.shipment_number = event.shipment_number
    advance_to = AUTO_ADVANCE.get(type(event))
    if advance_to is not None:
        order_state.stage = advance_to

    # Evaluate deployed rules in a deterministic order and apply their actions.
    for rule_id in sorted(new.contracts):
        actions = evaluate(new.contracts[rule_id].rule, event, new)
        if actions:
            new = apply_actions(new, actions, event, block_index)
    return new


def apply_block(state: LedgerState, block: Block, block_index: int) -> LedgerState:
    for tx in block.transactions:
        state = apply_event(state, tx.event, block_index)
    return state


def fold_chain(chain: Chain) -> LedgerState:
    """Derive the ledger state by folding every block from the genesis."""
    state = LedgerState()
    for i, block in enumerate(chain.blocks):
        if i == 0:
            continue
        state = apply_block(state, block, i)
    return state


def check_duplicate_deploy(state: LedgerState, rule: ContractRule) -> None:
    if rule.id in state.contracts:
        raise DuplicateContract(f"rule {rule.id!r} is already deployed")


def deployment_event(rule: ContractRule) -> ContractDeployment:
    order_number = rule.order.order_number if isinstance(rule, BuiltinRule) else rule.id
    return ContractDeployment(order_number, rule)
