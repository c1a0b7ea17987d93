"""Deterministic discrete-event P2P simulation.

One step processes: status changes, attack activations, attack actions,
then the step's queued submissions (contract deployments, scheduled
supply-chain events, payments triggered the step before). Each submission
becomes a mined block, floods the overlay with unit per-hop delay, collects
endorsements from the nodes it reached, and is appended iff the 51% quorum
over the configured vote base is met. All randomness flows from the master
seed through named substreams, so adding one attack never perturbs another
component's draws.
"""

from __future__ import annotations

import statistics
import sys
from dataclasses import dataclass, field, replace as dc_replace

from .contracts import (
    LedgerState,
    apply_block,
    builtin_receipt_check,
    builtin_retail_receipt,
    builtin_warehouse_match,
    deployment_event,
)
from .errors import (
    RoleMismatch,
    SchemaViolation,
    TopologyUnsatisfiable,
)
from .events import (
    Payment,
    RawMaterialShipment,
    SupplyChainEvent,
    variant_name,
)
from .hashing import require_available
from .identity import (
    Identity,
    IdentityRegistry,
    PrivateMaterial,
    RegistryMode,
    Role,
    SealedValue,
    generate_identity,
    identity_from_material,
    make_credential,
    seal,
    unseal,
)
from .errors import BadCredential, DecryptFailure
from .ledger import (
    Block,
    BlockHeader,
    Chain,
    SignedTransaction,
    Vote,
    VoteBase,
    VoteQuorum,
    _registered_map,
    build_genesis,
    countable_votes,
    hash_header,
    make_transaction,
    make_vote,
    mine,
    payload_digest,
    structural_cause,
)
from .rng import substream, substream_seed
from .scenario import (
    EclipseAttack,
    MajorityAttack,
    ScenarioConfig,
    SybilAttack,
)
from .supply_chain import application_cause, build_event

from dataclasses import fields as dc_fields


class Honesty:
    HONEST = "honest"
    ADVERSARIAL = "adversarial"


@dataclass
class SimNode:
    """A network participant holding a full replica of its accepted chain."""

    name: str
    identity: Identity
    material: PrivateMaterial
    honesty: str = Honesty.HONEST
    up: bool = True
    withholding: bool = False       # eclipse attackers do not relay honest blocks
    neighbors: set[str] = field(default_factory=set)
    replica: list[bytes] = field(default_factory=list)  # header hashes
    registered: bool = True

    def head(self) -> bytes | None:
        return self.replica[-1] if self.replica else None


# ---------------------------------------------------------------------------
# Topology
# ---------------------------------------------------------------------------

def build_topology(node_count: int, degree: int, seed: int) -> dict[int, tuple[int, ...]]:
    """Connected, seeded-random, roughly degree-regular graph.

    A ring guarantees connectivity; seeded chords raise the average degree
    to the target. Deterministic for a given (count, degree, seed).
    """
    if node_count < 1:
        raise TopologyUnsatisfiable("need at least one node")
    if degree >= node_count:
        raise TopologyUnsatisfiable(f"degree {degree} impossible with {node_count} nodes")
    if node_count == 1:
        return {0: ()}
    if node_count == 2:
        if degree < 1:
            raise TopologyUnsatisfiable("two nodes need degree >= 1 to be connected")
        return {0: (1,), 1: (0,)}
    if degree < 2:
        raise TopologyUnsatisfiable(
            f"a connected graph on {node_count} nodes needs degree >= 2"
        )
    edges: set[tuple[int, int]] = set()
    for i in range(node_count):
        j = (i + 1) % node_count
        edges.add((min(i, j), max(i, j)))
    target = round(node_count * degree / 2)
    rng = substream(seed, "edges")
    attempts = 0
    max_edges = node_count * (node_count - 1) // 2
    while len(edges) < min(target, max_edges) and attempts < 200 * target:
        attempts += 1
        a = rng.randrange(node_count)
        b = rng.randrange(node_count)
        if a == b:
            continue
        edges.add((min(a, b), max(a, b)))
    adjacency: dict[int, set[int]] = {i: set() for i in range(node_count)}
    for a, b in edges:
        adjacency[a].add(b)
        adjacency[b].add(a)
    return {i: tuple(sorted(adjacency[i])) for i in range(node_count)}


def broadcast(
    topology: dict[str, set[str]],
    origin: str,
    up: dict[str, bool],
    withholding: set[str] = frozenset(),
) -> list[tuple[str, int]]:
    """Flood from `origin` with unit per-hop delay.

    Every reachable up node receives exactly once; down nodes neither receive
    nor relay; withholding nodes receive but do not relay.
    """
    if not up.get(origin, False):
        return []
    deliveries = [(origin, 0)]
    seen = {origin}
    frontier = [origin]
    hop = 0
    while frontier:
        hop += 1
        next_frontier = []
        for name in frontier:
            if name != origin and name in withholding:
                continue
            for neighbor in sorted(topology.get(name, ())):
                if neighbor in seen or not up.get(neighbor, False):
                    continue
                seen.add(neighbor)
                deliveries.append((neighbor, hop))
                next_frontier.append(neighbor)
        frontier = next_frontier
    return deliveries


def collect_votes(
    block: Block,
    algo,
    voters: list[tuple[Identity, PrivateMaterial, bool]],
    quorum: VoteQuorum,
    registry=None,
) -> tuple[bool, tuple[Vote, ...]]:
    """Gather endorsements from approving voters and apply the quorum rule."""
    header_hash = hash_header(block.header, algo)
    votes = Block.normalize_votes(
        make_vote(header_hash, ident, mat) for ident, mat, approves in voters if approves
    )
    voted_block = Block(block.header, block.transactions, votes)
    registered = _registered_map(registry)
    valid = countable_votes(voted_block, header_hash, quorum.base, registered, algo)
    return valid >= quorum.required, votes


def controlled_node_count(profile: MajorityAttack, node_population: int) -> int:
    return round(profile.controlled_fraction * node_population)


def attack_cost(
    profile: MajorityAttack, steps_active: int, *, controlled_nodes: int
) -> float:
    """Energy cost: steps x controlled nodes x per-node-step power rate.
    Strictly increasing in duration for a fixed node count and rate."""
    return steps_active * controlled_nodes * profile.power_rate_per_node_step


# ---------------------------------------------------------------------------
# The simulation world
# ---------------------------------------------------------------------------

@dataclass
class Submission:
    actor: str
    variant: str
    fields: dict
    prebuilt: SignedTransaction | None = None


@dataclass
class RunResult:
    report: dict
    chain: Chain
    registered: list[Identity]
    vote_base: VoteBase
    actor_keys: dict[str, dict[str, str]]


class _World:
    def __init__(self, cfg: ScenarioConfig, seed: int):
        self.cfg = cfg
        self.seed = seed
        self.algo = require_available(cfg.hash_algo)
        self.log: list[dict] = []
        self.blocks_accepted = 0
        self.blocks_rejected = 0
        self.fork_count = 0
        self.integrity_violations = 0
        self.confidentiality_breaches = 0
        self.rewrites_attempted = 0
        self.rewrites_accepted = 0
        self.sybil_admitted = 0
        self.attack_cost = 0.0
        self.submission_counter = 0
        self.entry_cursor = 0
        self.block_map: dict[bytes, Block] = {}
        self.pending: dict[int, list[Submission]] = {}
        self.observers: list[tuple[Identity, PrivateMaterial]] = []  # transient sybils
        self.eclipse_attackers: list[str] = []
        self.majority_controlled: list[str] = []
        self.active_majority: MajorityAttack | None = None
        self.pre_attack_height: int | None = None
        self._setup()

    # -- setup ------------------------------------------------------------

    def _setup(self) -> None:
        cfg, seed = self.cfg, self.seed
        issuer, issuer_mat = generate_identity(
            Role.NODE, substream_seed(seed, "issuer"), algo=self.algo, label="registrar"
        )
        self.issuer, self.issuer_mat = issuer, issuer_mat
        if cfg.registry_mode is RegistryMode.CENTRALIZED:
            self.registry = IdentityRegistry(RegistryMode.CENTRALIZED, issuer=issuer)
        else:
            self.registry = IdentityRegistry(RegistryMode.USER_CENTRIC)

        self.actors: dict[str, tuple[Identity, PrivateMaterial]] = {}
        for spec in cfg.actors:
            if spec.sign_key_hex:
                material = PrivateMaterial(
                    bytes.fromhex(spec.sign_key_hex),
                    bytes.fromhex(spec.seal_key_hex or spec.sign_key_hex),
                )
                identity = identity_from_material(
                    material, Role(spec.role), algo=self.algo, label=spec.name
                )
            else:
                identity, material = generate_identity(
                    Role(spec.role),
                    substream_seed(seed, "actor", spec.name),
                    algo=self.algo,
                    label=spec.name,
                )
            self._register(identity, material)
            self.actors[spec.name] = (identity, material)

        self.nodes: dict[str, SimNode] = {}
        for i, name in enumerate(cfg.node_names()):
            identity, material = generate_identity(
                Role.NODE, substream_seed(seed, "node", name), algo=self.algo, label=name
            )
            self._register(identity, material)
            self.nodes[name] = SimNode(name, identity, material)

        adjacency = build_topology(
            cfg.node_count, cfg.node_degree, substream_seed(seed, "topology")
        )
        for i, name in enumerate(cfg.node_names()):
            self.nodes[name].neighbors = {f"node-{j}" for j in adjacency[i]}

        self.skew = {
            name: substream(seed, "skew", name).randrange(0, 250)
            for name in cfg.node_names()
        }

        node_pairs = [(n.identity, n.material) for n in self.nodes.values()]
        genesis = build_genesis(
            self.algo, cfg.difficulty, cfg.genesis_timestamp,
            substream_seed(seed, "mine", "genesis"), node_pairs,
        )
        self.chain = Chain((genesis,), self.algo, cfg.difficulty)
        genesis_hash = hash_header(genesis.header, self.algo)
        self.block_map[genesis_hash] = genesis
        for node in self.nodes.values():
            node.replica.append(genesis_hash)
        self.state = LedgerState()

        self.leaked: dict[bytes, PrivateMaterial] = {}
        for label in cfg.leak_private_keys:
            identity, material = self.actors[label]
            self.leaked[identity.id] = material

        self.honest_deliveries = {name: 0 for name in cfg.node_names()}
        self.wasted_work = {name: 0 for name in cfg.node_names()}
        self.available_steps = {name: 0 for name in cfg.node_names()}

        # Step-0 queue: builtin deployments per order, then custom rules.
        if cfg.deploy_builtins:
            for order in cfg.orders:
                for rule, author in (
                    (builtin_receipt_check(order), order.buyer),
                    (builtin_warehouse_match(order), order.warehouse or order.buyer),
                    (builtin_retail_receipt(order), order.retailer or order.buyer),
                ):
                    event = deployment_event(rule)
                    self._enqueue(0, Submission(author, "contract_deployment",
                                                {}, self._sign_as(author, event)))
        for spec in cfg.custom_rules:
            event = deployment_event(spec.rule)
            self._enqueue(0, Submission(spec.author, "contract_deployment",
                                        {}, self._sign_as(spec.author, event)))
        for ev in cfg.events:
            self._enqueue(ev.step, Submission(ev.actor, ev.variant, ev.fields))

    def _register(self, identity: Identity, material: PrivateMaterial) -> None:
        if self.cfg.registry_mode is RegistryMode.CENTRALIZED:
            credential = make_credential(identity, self.issuer_mat.sign_key_bytes)
        else:
            credential = make_credential(identity, material.sign_key_bytes)
        self.registry.register(identity, credential)

    def _sign_as(self, actor_label: str, event: SupplyChainEvent) -> SignedTransaction:
        identity, material = self.actors[actor_label]
        return make_transaction(event, identity, material)

    def _enqueue(self, step: int, submission: Submission) -> None:
        self.pending.setdefault(step, []).append(submission)

    # -- helpers ----------------------------------------------------------

    def _registered_map(self) -> dict[bytes, Identity]:
        return {i.id: i for i in self.registry.identities()}

    def _topology(self) -> dict[str, set[str]]:
        return {name: set(node.neighbors) for name, node in self.nodes.items()}

    def _up_map(self) -> dict[str, bool]:
        return {name: node.up for name, node in self.nodes.items()}

    def _withholding(self) -> set[str]:
        return {name for name, node in self.nodes.items() if node.withholding}

    def _population(self) -> int:
        if self.cfg.vote_base is VoteBase.REGISTERED_ONLY:
            return self.registry.node_population()
        overlay = sum(1 for n in self.nodes.values())
        return overlay + len(self.observers)

    def _clock(self, name: str, step: int) -> int:
        return step * 1000 + self.skew.get(name, 0)

    def _median_timestamp(self, reached: list[str], step: int) -> int:
        clocks = [self._clock(name, step) for name in sorted(reached)]
        if not clocks:
            clocks = [step * 1000]
        ts = statistics.median_low(clocks)
        return max(ts, self.chain.head.header.timestamp)

    def _pick_entry_node(self) -> SimNode | None:
        names = list(self.nodes)
        canonical_head = self.chain.head_hash()
        for offset in range(len(names)):
            name = names[(self.entry_cursor + offset) % len(names)]
            node = self.nodes[name]
            if not node.up or node.honesty != Honesty.HONEST:
                continue
            if node.head() != canonical_head:
                continue
            has_honest_peer = any(
                self.nodes[p].up and self.nodes[p].honesty == Honesty.HONEST
                for p in node.neighbors
            )
            if len(self.nodes) == 1 or has_honest_peer:
                self.entry_cursor = (self.entry_cursor + offset + 1) % len(names)
                return node
        return None

    # -- block pipeline ---------------------------------------------------

    def _propose(
        self,
        step: int,
        tx: SignedTransaction,
        proposer: SimNode | None,
        adversarial_yes: list[tuple[Identity, PrivateMaterial]],
        mine_label: tuple,
        reach_all: bool = False,
        honest_origin: bool = True,
    ) -> bool:
        """Mine, broadcast, vote on, and maybe append one block."""
        registered = self._registered_map()
        if proposer is not None and not reach_all:
            deliveries = broadcast(
                self._topology(), proposer.name, self._up_map(), self._withholding()
            )
        else:
            deliveries = [(name, 0) for name, node in self.nodes.items() if node.up]
        reached = [name for name, _ in deliveries]

        timestamp = self._median_timestamp(reached, step)
        txs = (tx,)
        header = BlockHeader(
            index=self.chain.height,
            prev_hash=self.chain.head_hash(),
            timestamp=timestamp,
            nonce=0,
            payload_hash=payload_digest(txs, self.algo),
            proposer=proposer.identity.id if proposer else adversarial_yes[0][0].id,
        )
        nonce = mine(header, self.cfg.difficulty, substream_seed(self.seed, *mine_label),
                     self.algo)
        header = dc_replace(header, nonce=nonce)
        header_hash = hash_header(header, self.algo)

        cause = application_cause(self.state, tx, registered)
        voters: list[tuple[Identity, PrivateMaterial, bool]] = []
        for name in reached:
            node = self.nodes[name]
            if node.honesty == Honesty.HONEST:
                approves = cause is None and node.head() == header.prev_hash
                voters.append((node.identity, node.material, approves))
            elif name in self.majority_controlled and self.active_majority:
                # controlled bloc endorses everything while the attack runs
                voters.append((node.identity, node.material, True))
            else:
                voters.append((node.identity, node.material, False))
        for identity, material in adversarial_yes:
            voters.append((identity, material, True))

        quorum = VoteQuorum(self.cfg.vote_base, max(1, self._population()))
        block_unvoted = Block(header, txs, ())
        accepted, votes = collect_votes(
            block_unvoted, self.algo, voters, quorum, self.registry
        )
        block = Block(header, txs, votes)
        self.block_map[header_hash] = block

        if not accepted:
            self.blocks_rejected += 1
            self.log.append({
                "step": step, "kind": "block_rejected",
                "variant": variant_name(tx.event),
                "reason": "quorum_not_met",
            })
            return False

        index = self.chain.height
        self.chain = Chain(self.chain.blocks + (block,), self.algo, self.cfg.difficulty)
        self.blocks_accepted += 1
        disputes_before = len(self.state.disputes)
        payments_before = len(self.state.payments)
        self.state = apply_block(self.state, block, index)
        for record in self.state.payments[payments_before:]:
            payment = Payment(record.order_number, record.from_party,
                              record.to_party, record.amount, record.stage)
            if step + 1 < self.cfg.steps and record.from_party in self.actors:
                self._enqueue(step + 1, Submission(record.from_party, "payment", {},
                                                   self._sign_as(record.from_party, payment)))
        for dispute in self.state.disputes[disputes_before:]:
            self.log.append({"step": step, "kind": "dispute_raised",
                             "order_number": dispute["order_number"],
                             "reason": dispute["reason"]})

        for name in reached:
            node = self.nodes[name]
            node.replica.append(header_hash)
            if honest_origin and name in self.honest_deliveries:
                self.honest_deliveries[name] += 1
        self.log.append({
            "step": step, "kind": "block_accepted", "index": index,
            "hash": header_hash.hex(), "variant": variant_name(tx.event),
            "votes": len(votes),
        })
        if cause is not None:
            self.integrity_violations += 1
            self.log.append({"step": step, "kind": "integrity_violation",
                             "index": index, "cause": cause})
        self._scan_confidentiality(step, block)
        return True

    def _adversaries_present(self) -> list[tuple[Identity, PrivateMaterial]]:
        present = list(self.observers)
        for name in self.eclipse_attackers:
            node = self.nodes[name]
            present.append((node.identity, node.material))
        if self.active_majority:
            for name in self.majority_controlled:
                node = self.nodes[name]
                present.append((node.identity, node.material))
        return present

    def _scan_confidentiality(self, step: int, block: Block) -> None:
        adversaries = self._adversaries_present()
        if not adversaries:
            return
        for tx in block.transactions:
            for f in dc_fields(tx.event):
                value = getattr(tx.event, f.name)
                if not isinstance(value, SealedValue):
                    continue
                # the probe: an adversary's own key never opens it
                try:
                    unseal(value, adversaries[0][1].seal_key_bytes)
                    opened = True
                except DecryptFailure:
                    opened = False
                if not opened and value.recipient in self.leaked:
                    try:
                        unseal(value, self.leaked[value.recipient].seal_key_bytes)
                        opened = True
                    except DecryptFailure:
                        opened = False
                if opened:
                    self.confidentiality_breaches += 1
                    self.log.append({"step": step, "kind": "confidentiality_breach",
                                     "recipient": value.recipient.hex()})

    # -- scheduled submissions ---------------------------------------------

    def _process_submission(self, step: int, submission: Submission) -> None:
        if submission.prebuilt is not None:
            tx = submission.prebuilt
        else:
            try:
                fields = self._realize_fields(step, submission)
                identity, material = self.actors[submission.actor]
                tx = build_event(identity, material, submission.variant, fields)
            except (RoleMismatch, SchemaViolation, KeyError) as exc:
                self.log.append({"step": step, "kind": "invalid_submission",
                                 "actor": submission.actor,
                                 "variant": submission.variant, "error": str(exc)})
                return
        proposer = self._pick_entry_node()
        if proposer is None:
            self.log.append({"step": step, "kind": "invalid_submission",
                             "actor": submission.actor,
                             "variant": submission.variant,
                             "error": "no eligible entry node"})
            return
        self.submission_counter += 1
        self._propose(step, tx, proposer, [], ("mine", self.submission_counter))

    def _realize_fields(self, step: int, submission: Submission) -> dict:
        """Resolve sealed-field markers into envelopes."""
        fields = {}
        for key, value in submission.fields.items():
            if isinstance(value, dict) and "sealed_for" in value:
                recipient_label = value["sealed_for"]
                if recipient_label not in self.actors:
                    raise SchemaViolation(f"unknown seal recipient {recipient_label!r}")
                recipient, _ = self.actors[recipient_label]
                rng = substream(self.seed, "seal", step, submission.actor, key)
                fields[key] = seal(value["plaintext"].encode(), recipient, rng)
            else:
                fields[key] = value
        return fields

    # -- attacks ------------------------------------------------------------

    def _run_sybil(self, step: int, profile: SybilAttack) -> None:
        fakes: list[tuple[Identity, PrivateMaterial]] = []
        for k in range(profile.fake_identity_count):
            identity, material = generate_identity(
                Role.ATTACKER,
                substream_seed(self.seed, "attack", "sybil", profile.seed, k),
                algo=self.algo, label=f"sybil-{k}",
            )
            if self.cfg.registry_mode is RegistryMode.CENTRALIZED:
                # admission requires an issuer-endorsed registration
                try:
                    self.registry.register(
                        identity, make_credential(identity, material.sign_key_bytes)
                    )
                except BadCredential:
                    continue
            fakes.append((identity, material))
        self.sybil_admitted += len(fakes)
        if not fakes:
            return
        self.log.append({"step": step, "kind": "sybil_admitted", "count": len(fakes)})
        self.observers = fakes
        forged = RawMaterialShipment(
            order_number="FORGED-SYBIL",
            certificate_of_origin="forged",
            batch_data="forged",
            shipment_date=step * 1000,
            barcode="FORGED-SYBIL",
        )
        tx = make_transaction(forged, fakes[0][0], fakes[0][1])
        self._propose(step, tx, None, fakes,
                      ("attack", "sybil", profile.seed, step),
                      reach_all=True, honest_origin=False)
        self.observers = []  # transient identities leave the overlay

    def _run_eclipse_start(self, step: int, profile: EclipseAttack) -> None:
        victim = self.nodes[profile.victim]
        k = round(profile.adversarial_neighbor_fraction * len(victim.neighbors))
        if k == 0:
            return
        if self.cfg.eclipse_mitigation:
            # authorized-peers rule: unregistered neighbors are refused
            print(
                f"eclipse adjacency rejected at step {step}: "
                f"victim {profile.victim} accepts only registered peers",
                file=sys.stderr,
            )
            return
        removed = sorted(victim.neighbors)[:k]
        for name in removed:
            victim.neighbors.discard(name)
            self.nodes[name].neighbors.discard(victim.name)
        for j in range(k):
            name = f"eclipse-att-{j}"
            identity, material = generate_identity(
                Role.ATTACKER,
                substream_seed(self.seed, "attack", "eclipse", profile.seed, j),
                algo=self.algo, label=name,
            )
            attacker = SimNode(
                name, identity, material, honesty=Honesty.ADVERSARIAL,
                withholding=True, registered=False,
            )
            attacker.neighbors = {victim.name}
            attacker.replica = list(victim.replica)
            victim.neighbors.add(name)
            self.nodes[name] = attacker
            self.eclipse_attackers.append(name)
        self.log.append({"step": step, "kind": "eclipse_rewired",
                         "victim": victim.name, "attached": k})

    def _run_eclipse_step(self, step: int, profile: EclipseAttack) -> None:
        if not self.eclipse_attackers or self.cfg.eclipse_mitigation:
            return
        victim = self.nodes[profile.victim]
        if not victim.up:
            return
        attackers = [self.nodes[n] for n in self.eclipse_attackers]
        parent_hash = victim.head()
        parent = self.block_map[parent_hash]
        forged_event = RawMaterialShipment(
            order_number=f"FORGED-ECL-{step}",
            certificate_of_origin="forged",
            batch_data="forged",
            shipment_date=step * 1000,
            barcode=f"FORGED-ECL-{step}",
        )
        leader = attackers[0]
        tx = make_transaction(forged_event, leader.identity, leader.material)
        txs = (tx,)
        header = BlockHeader(
            index=parent.header.index + 1,
            prev_hash=parent_hash,
            timestamp=max(step * 1000, parent.header.timestamp),
            nonce=0,
            payload_hash=payload_digest(txs, self.algo),
            proposer=leader.identity.id,
        )
        nonce = mine(header, self.cfg.difficulty,
                     substream_seed(self.seed, "attack", "eclipse-forge", step), self.algo)
        header = dc_replace(header, nonce=nonce)
        header_hash = hash_header(header, self.algo)
        votes = Block.normalize_votes(
            make_vote(header_hash, a.identity, a.material) for a in attackers
        )
        forged = Block(header, txs, votes)
        self.block_map[header_hash] = forged
        if header.prev_hash != self.chain.head_hash():
            self.fork_count += 1
            self.log.append({"step": step, "kind": "fork_observed",
                             "parent": header.prev_hash.hex()})
        # victim validates the fed fork: the attacker votes cannot meet the
        # victim's quorum, so the work is wasted
        self.wasted_work[victim.name] += 1
        registered = self._registered_map()
        quorum = VoteQuorum(self.cfg.vote_base, max(1, self._population()))
        valid = countable_votes(forged, header_hash, quorum.base, registered, self.algo)
        if valid >= quorum.required:
            victim.replica.append(header_hash)

    def _run_majority_start(self, step: int, profile: MajorityAttack) -> None:
        count = controlled_node_count(profile, self.cfg.node_count)
        controlled = list(self.cfg.node_names())[:count]
        for name in controlled:
            self.nodes[name].honesty = Honesty.ADVERSARIAL
        self.majority_controlled = controlled
        self.active_majority = profile
        self.pre_attack_height = self.chain.height
        self.log.append({"step": step, "kind": "majority_control", "controlled": count})

    def _run_majority_stop(self, step: int, profile: MajorityAttack) -> None:
        for name in self.majority_controlled:
            self.nodes[name].honesty = Honesty.HONEST
        self.log.append({"step": step, "kind": "majority_release",
                         "controlled": len(self.majority_controlled)})
        self.majority_controlled = []
        self.active_majority = None

    def _run_majority_step(self, step: int, profile: MajorityAttack) -> None:
        controlled = [self.nodes[n] for n in self.majority_controlled]
        if not controlled:
            return
        self.attack_cost += attack_cost(profile, 1, controlled_nodes=len(controlled))
        leader = controlled[0]
        fault_event = RawMaterialShipment(
            order_number=f"FORGED-MAJ-{step}",
            certificate_of_origin="forged",
            batch_data="forged",
            shipment_date=step * 1000,
            barcode=f"FORGED-MAJ-{step}",
        )
        tx = make_transaction(fault_event, leader.identity, leader.material)
        self._propose(step, tx, leader, [],
                      ("attack", "majority", profile.seed, step),
                      honest_origin=False)
        if profile.attempt_rewrites and self.pre_attack_height and self.pre_attack_height > 1:
            self._attempt_rewrite(step, profile)

    def _attempt_rewrite(self, step: int, profile: MajorityAttack) -> None:
        """Try to alter a pre-attack transaction. Fails: the bloc cannot
        re-sign other participants' payloads."""
        rng = substream(self.seed, "attack", "rewrite", profile.seed, step)
        target = rng.randrange(1, self.pre_attack_height)
        original = self.chain.blocks[target]
        if not original.transactions:
            return
        self.rewrites_attempted += 1
        tx = original.transactions[0]
        tampered_event = dc_replace(tx.event, order_number=tx.event.order_number + "-X")
        tampered_tx = SignedTransaction(
            tampered_event, tx.author, tx.author_public_key, tx.signature
        )
        txs = (tampered_tx,) + original.transactions[1:]
        header = dc_replace(
            original.header, payload_hash=payload_digest(txs, self.algo), nonce=0
        )
        nonce = mine(header, self.cfg.difficulty,
                     substream_seed(self.seed, "attack", "rewrite-mine", step), self.algo)
        header = dc_replace(header, nonce=nonce)
        header_hash = hash_header(header, self.algo)
        votes = Block.normalize_votes(
            make_vote(header_hash, self.nodes[n].identity, self.nodes[n].material)
            for n in self.majority_controlled
        )
        tampered = Block(header, txs, votes)
        prev = self.chain.blocks[target - 1]
        cause = structural_cause(tampered, self.algo, self.cfg.difficulty, prev)
        if cause is None:
            # cannot happen without the author's private key; counted honestly
            self.rewrites_accepted += 1
            outcome = "accepted"
        else:
            outcome = "rejected"
        self.log.append({"step": step, "kind": "rewrite_attempt",
                         "target_index": target, "outcome": outcome, "cause": cause})

    # -- main loop -----------------------------------------------------------

    def run(self) -> RunResult:
        cfg = self.cfg
        status_by_step: dict[int, list] = {}
        for change in cfg.node_status:
            status_by_step.setdefault(change.step, []).append(change)

        for step in range(cfg.steps):
            for change in status_by_step.get(step, []):
                node = self.nodes[change.node]
                was_up = node.up
                node.up = change.up
                self.log.append({"step": step, "kind": "node_status",
                                 "node": change.node, "up": change.up})
                if change.up and not was_up:
                    self._resync(node)

            for attack in cfg.attacks:
                if isinstance(attack, MajorityAttack):
                    if step == attack.start_step:
                        self._run_majority_start(step, attack)
                    if (
                        self.active_majority is attack
                        and step == attack.start_step + attack.duration_steps
                    ):
                        self._run_majority_stop(step, attack)
                elif isinstance(attack, EclipseAttack):
                    if step == attack.start_step:
                        self._run_eclipse_start(step, attack)

            for attack in cfg.attacks:
                if isinstance(attack, SybilAttack) and step == attack.start_step:
                    self._run_sybil(step, attack)
                elif isinstance(attack, EclipseAttack) and step >= attack.start_step:
                    self._run_eclipse_step(step, attack)
                elif (
                    isinstance(attack, MajorityAttack)
                    and self.active_majority is attack
                ):
                    self._run_majority_step(step, attack)

            for submission in self.pending.get(step, []):
                self._process_submission(step, submission)

            canonical_head = self.chain.head_hash()
            for name in cfg.node_names():
                node = self.nodes[name]
                if node.up and node.head() == canonical_head:
                    self.available_steps[name] += 1

        return self._finish()

    def _resync(self, node: SimNode) -> None:
        canonical = [hash_header(b.header, self.algo) for b in self.chain.blocks]
        for peer_name in sorted(node.neighbors):
            peer = self.nodes.get(peer_name)
            if peer and peer.up and peer.honesty == Honesty.HONEST \
                    and peer.head() == canonical[-1]:
                node.replica = list(canonical)
                return

    def _finish(self) -> RunResult:
        cfg = self.cfg
        state_json = self.state.to_jsonable()
        availability = {
            name: self.available_steps[name] / cfg.steps for name in cfg.node_names()
        }
        report = {
            "format": 1,
            "scenario": cfg.name,
            "seed": self.seed,
            "steps": cfg.steps,
            "blocks_accepted": self.blocks_accepted,
            "blocks_rejected": self.blocks_rejected,
            "fork_count": self.fork_count,
            "integrity_violations": self.integrity_violations,
            "confidentiality_breaches": self.confidentiality_breaches,
            "rewrites": {
                "attempted": self.rewrites_attempted,
                "accepted": self.rewrites_accepted,
            },
            "sybil_identities_admitted": self.sybil_admitted,
            "attack_cost": self.attack_cost,
            "availability": availability,
            "honest_deliveries": dict(self.honest_deliveries),
            "wasted_work": dict(self.wasted_work),
            "chain_length": self.chain.height,
            "final_head": self.chain.head_hash().hex(),
            "payments": state_json["payments"],
            "disputes": state_json["disputes"],
            "anomalies": state_json["anomalies"],
            "orders": state_json["orders"],
            "inventory": state_json["inventory"],
            "event_log": self.log,
        }
        registered = self.registry.identities()
        actor_keys = {
            label: {
                "id": identity.id.hex(),
                "sign_private_key_hex": material.sign_key_bytes.hex(),
                "seal_private_key_hex": material.seal_key_bytes.hex(),
            }
            for label, (identity, material) in self.actors.items()
        }
        return RunResult(report, self.chain, registered, cfg.vote_base, actor_keys)


def run(scenario: ScenarioConfig, seed: int | None = None) -> RunResult:
    """Execute one deterministic simulation run."""
    return _World(scenario, scenario.seed if seed is None else seed).run()
