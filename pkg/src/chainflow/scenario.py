"""Scenario files: schema, validation, and typed configuration.

A scenario fully determines a run: seed (mandatory, no implicit entropy),
topology, registry mode, vote base, hash algo, difficulty, actors, orders,
the scheduled event script, and any attack profiles. See
docs/scenario-schema.md for the documented schema.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

import jsonschema

from .errors import SchemaViolation
from .events import (
    Action,
    Advance,
    Condition,
    ConditionOp,
    DeclarativeRule,
    EVENT_TYPE_BY_NAME,
    Order,
    Pay,
    RaiseDispute,
    UpdateInventory,
)
from .hashing import HashAlgo, require_available
from .identity import RegistryMode, Role
from .ledger import VoteBase

_ROLE_NAMES = {r.value for r in Role}
_EVENT_NAMES = set(EVENT_TYPE_BY_NAME) - {"contract_deployment"}

_CONDITION_OPS = {
    "eq": ConditionOp.EQ, "ne": ConditionOp.NE, "lt": ConditionOp.LT,
    "le": ConditionOp.LE, "gt": ConditionOp.GT, "ge": ConditionOp.GE,
}

SCENARIO_SCHEMA: dict = {
    "type": "object",
    "required": ["name", "seed", "steps", "nodes", "actors"],
    "additionalProperties": False,
    "properties": {
        "name": {"type": "string", "minLength": 1},
        "seed": {"type": "integer"},
        "steps": {"type": "integer", "minimum": 1},
        "hash_algo": {"enum": ["sha256", "sha256d", "scrypt"]},
        "difficulty": {"type": "integer", "minimum": 0, "maximum": 32},
        "registry_mode": {"enum": ["centralized", "user_centric"]},
        "vote_base": {"enum": ["registered_only", "all_observed"]},
        "availability_threshold": {"type": "number", "minimum": 0, "maximum": 1},
        "genesis_timestamp": {"type": "integer", "minimum": 0},
        "nodes": {
            "type": "object",
            "required": ["count", "degree"],
            "additionalProperties": False,
            "properties": {
                "count": {"type": "integer", "minimum": 1},
                "degree": {"type": "integer", "minimum": 0},
            },
        },
        "actors": {
            "type": "array",
            "items": {
                "type": "object",
                "required": ["name", "role"],
                "additionalProperties": False,
                "properties": {
                    "name": {"type": "string", "minLength": 1},
                    "role": {"enum": sorted(_ROLE_NAMES)},
                    "sign_key_hex": {"type": "string", "pattern": "^[0-9a-f]{64}$"},
                    "seal_key_hex": {"type": "string", "pattern": "^[0-9a-f]{64}$"},
                },
            },
        },
        "orders": {
            "type": "array",
            "items": {
                "type": "object",
                "required": [
                    "order_number", "buyer", "seller", "sku", "spec",
                    "quantity", "quality_requirement", "price",
                ],
                "additionalProperties": False,
                "properties": {
                    "order_number": {"type": "string", "minLength": 1},
                    "buyer": {"type": "string"},
                    "seller": {"type": "string"},
                    "sku": {"type": "string"},
                    "spec": {"type": "string"},
                    "quantity": {"type": "integer", "minimum": 1},
                    "quality_requirement": {"type": "string"},
                    "price": {"type": "integer", "minimum": 0},
                    "invoice_number": {"type": "string"},
                    "warehouse": {"type": "string"},
                    "retailer": {"type": "string"},
                },
            },
        },
        "deploy_builtins": {"type": "boolean"},
        "custom_rules": {
            "type": "array",
            "items": {
                "type": "object",
                "required": ["id", "author", "actions"],
                "additionalProperties": False,
                "properties": {
                    "id": {"type": "string", "minLength": 1},
                    "author": {"type": "string"},
                    "event": {"enum": sorted(_EVENT_NAMES)},
                    "when": {
                        "type": "array",
                        "items": {
                            "type": "object",
                            "required": ["field", "op", "value"],
                            "additionalProperties": False,
                            "properties": {
                                "field": {"type": "string"},
                                "op": {"enum": sorted(_CONDITION_OPS)},
                                "value": {"type": ["string", "integer"]},
                            },
                        },
                    },
                    "actions": {"type": "array", "minItems": 1},
                },
            },
        },
        "events": {
            "type": "array",
            "items": {
                "type": "object",
                "required": ["step", "actor", "type", "fields"],
                "additionalProperties": False,
                "properties": {
                    "step": {"type": "integer", "minimum": 0},
                    "actor": {"type": "string"},
                    "type": {"enum": sorted(_EVENT_NAMES)},
                    "fields": {"type": "object"},
                },
            },
        },
        "node_status": {
            "type": "array",
            "items": {
                "type": "object",
                "required": ["step", "node", "up"],
                "additionalProperties": False,
                "properties": {
                    "step": {"type": "integer", "minimum": 0},
                    "node": {"type": "string"},
                    "up": {"type": "boolean"},
                },
            },
        },
        "attacks": {
            "type": "array",
            "items": {
                "type": "object",
                "required": ["type", "start_step"],
                "properties": {
                    "type": {"enum": ["sybil", "eclipse", "majority"]},
                    "start_step": {"type": "integer", "minimum": 0},
                    "seed": {"type": "integer"},
                    "fake_identity_count": {"type": "integer", "minimum": 1},
                    "victim": {"type": "string"},
                    "adversarial_neighbor_fraction": {
                        "type": "number", "minimum": 0, "maximum": 1,
                    },
                    "controlled_fraction": {
                        "type": "number", "minimum": 0, "maximum": 1,
                    },
                    "duration_steps": {"type": "integer", "minimum": 1},
                    "power_rate_per_node_step": {"type": "number", "minimum": 0},
                    "attempt_rewrites": {"type": "boolean"},
                },
            },
        },
        "eclipse_mitigation": {"type": "boolean"},
        "leak_private_keys": {"type": "array", "items": {"type": "string"}},
        "output_dir": {"type": "string"},
    },
}


@dataclass(frozen=True)
class ActorSpec:
    name: str
    role: Role
    sign_key_hex: str | None = None
    seal_key_hex: str | None = None


@dataclass(frozen=True)
class ScheduledEvent:
    step: int
    actor: str
    variant: str
    fields: dict


@dataclass(frozen=True)
class NodeStatusChange:
    step: int
    node: str
    up: bool


@dataclass(frozen=True)
class SybilAttack:
    fake_identity_count: int
    start_step: int
    seed: int = 0


@dataclass(frozen=True)
class EclipseAttack:
    victim: str
    adversarial_neighbor_fraction: float
    start_step: int
    seed: int = 0


@dataclass(frozen=True)
class MajorityAttack:
    controlled_fraction: float
    duration_steps: int
    power_rate_per_node_step: float
    start_step: int
    seed: int = 0
    attempt_rewrites: bool = True


AttackProfile = SybilAttack | EclipseAttack | MajorityAttack


@dataclass(frozen=True)
class CustomRuleSpec:
    author: str
    rule: DeclarativeRule


@dataclass
class ScenarioConfig:
    name: str
    seed: int
    steps: int
    hash_algo: HashAlgo
    difficulty: int
    registry_mode: RegistryMode
    vote_base: VoteBase
    availability_threshold: float
    genesis_timestamp: int
    node_count: int
    node_degree: int
    actors: list[ActorSpec]
    orders: list[Order]
    deploy_builtins: bool
    custom_rules: list[CustomRuleSpec]
    events: list[ScheduledEvent]
    node_status: list[NodeStatusChange]
    attacks: list[AttackProfile]
    eclipse_mitigation: bool
    leak_private_keys: list[str]
    output_dir: str | None = None

    def node_names(self) -> list[str]:
        return [f"node-{i}" for i in range(self.node_count)]


def _parse_action(raw: dict, where: str) -> Action:
    kind = raw.get("do")
    try:
        if kind == "pay":
            return Pay(raw["from"], raw["to"], int(raw["amount"]))
        if kind == "update_inventory":
            return UpdateInventory(raw["location"], raw["sku"], int(raw["delta"]))
        if kind == "raise_dispute":
            return RaiseDispute(raw["reason"])
        if kind == "advance":
            return Advance(raw["stage"])
    except KeyError as exc:
        raise SchemaViolation(f"{where}: action missing field {exc}") from exc
    raise SchemaViolation(f"{where}: unknown action kind {kind!r}")


def _parse_attack(raw: dict) -> AttackProfile:
    kind = raw["type"]
    start = raw["start_step"]
    seed = raw.get("seed", 0)
    if kind == "sybil":
        if "fake_identity_count" not in raw:
            raise SchemaViolation("sybil attack requires fake_identity_count")
        return SybilAttack(raw["fake_identity_count"], start, seed)
    if kind == "eclipse":
        if "victim" not in raw or "adversarial_neighbor_fraction" not in raw:
            raise SchemaViolation(
                "eclipse attack requires victim and adversarial_neighbor_fraction"
            )
        return EclipseAttack(
            raw["victim"], raw["adversarial_neighbor_fraction"], start, seed
        )
    if "controlled_fraction" not in raw:
        raise SchemaViolation("majority attack requires controlled_fraction")
    return MajorityAttack(
        controlled_fraction=raw["controlled_fraction"],
        duration_steps=raw.get("duration_steps", 1),
        power_rate_per_node_step=raw.get("power_rate_per_node_step", 1.0),
        start_step=start,
        seed=seed,
        attempt_rewrites=raw.get("attempt_rewrites", True),
    )


def scenario_from_dict(data: dict) -> ScenarioConfig:
    try:
        jsonschema.validate(data, SCENARIO_SCHEMA)
    except jsonschema.ValidationError as exc:
        path = "/".join(str(p) for p in exc.absolute_path) or "<root>"
        raise SchemaViolation(f"scenario schema: {path}: {exc.message}") from exc

    algo = require_available(HashAlgo(data.get("hash_algo", "sha256")))
    actors = [
        ActorSpec(a["name"], Role(a["role"]), a.get("sign_key_hex"), a.get("seal_key_hex"))
        for a in data.get("actors", [])
    ]
    actor_names = [a.name for a in actors]
    if len(set(actor_names)) != len(actor_names):
        raise SchemaViolation("actor names must be unique")
    known = set(actor_names)

    orders = []
    for raw in data.get("orders", []):
        order = Order(**raw)
        for party_field in ("buyer", "seller", "warehouse", "retailer"):
            party = getattr(order, party_field)
            if party and party not in known:
                raise SchemaViolation(
                    f"order {order.order_number}: {party_field} {party!r} is not a defined actor"
                )
        orders.append(order)
    order_numbers = [o.order_number for o in orders]
    if len(set(order_numbers)) != len(order_numbers):
        raise SchemaViolation("order numbers must be unique")

    steps = data["steps"]
    events = []
    for raw in data.get("events", []):
        if raw["actor"] not in known:
            raise SchemaViolation(f"event actor {raw['actor']!r} is not a defined actor")
        if raw["step"] >= steps:
            raise SchemaViolation(
                f"event at step {raw['step']} is beyond the {steps}-step horizon"
            )
        events.append(ScheduledEvent(raw["step"], raw["actor"], raw["type"], raw["fields"]))

    custom_rules = []
    for raw in data.get("custom_rules", []):
        if raw["author"] not in known:
            raise SchemaViolation(f"rule author {raw['author']!r} is not a defined actor")
        where = f"custom rule {raw['id']}"
        conditions = tuple(
            Condition(c["field"], _CONDITION_OPS[c["op"]], c["value"])
            for c in raw.get("when", [])
        )
        actions = tuple(_parse_action(a, where) for a in raw["actions"])
        custom_rules.append(
            CustomRuleSpec(
                raw["author"],
                DeclarativeRule(raw["id"], raw.get("event"), conditions, actions),
            )
        )

    node_names = {f"node-{i}" for i in range(data["nodes"]["count"])}
    node_status = []
    for raw in data.get("node_status", []):
        if raw["node"] not in node_names:
            raise SchemaViolation(f"node_status references unknown node {raw['node']!r}")
        node_status.append(NodeStatusChange(raw["step"], raw["node"], raw["up"]))

    attacks = [_parse_attack(raw) for raw in data.get("attacks", [])]
    for attack in attacks:
        if isinstance(attack, EclipseAttack) and attack.victim not in node_names:
            raise SchemaViolation(f"eclipse victim {attack.victim!r} is not a node")
        if attack.start_step >= steps:
            raise SchemaViolation("attack start_step is beyond the horizon")

    for leak in data.get("leak_private_keys", []):
        if leak not in known:
            raise SchemaViolation(f"leak_private_keys references unknown actor {leak!r}")

    return ScenarioConfig(
        name=data["name"],
        seed=data["seed"],
        steps=steps,
        hash_algo=algo,
        difficulty=data.get("difficulty", 8),
        registry_mode=RegistryMode(data.get("registry_mode", "centralized")),
        vote_base=VoteBase(data.get("vote_base", "registered_only")),
        availability_threshold=data.get("availability_threshold", 0.5),
        genesis_timestamp=data.get("genesis_timestamp", 0),
        node_count=data["nodes"]["count"],
        node_degree=data["nodes"]["degree"],
        actors=actors,
        orders=orders,
        deploy_builtins=data.get("deploy_builtins", True),
        custom_rules=custom_rules,
        events=events,
        node_status=node_status,
        attacks=attacks,
        eclipse_mitigation=data.get("eclipse_mitigation", False),
        leak_private_keys=data.get("leak_private_keys", []),
        output_dir=data.get("output_dir"),
    )


def load_scenario(path: str | Path) -> ScenarioConfig:
    text = Path(path).read_text(encoding="utf-8")
    data = json.loads(text)  # json.JSONDecodeError carries line/column
    if not isinstance(data, dict):
        raise SchemaViolation("scenario root must be a JSON object")
    return scenario_from_dict(data)
