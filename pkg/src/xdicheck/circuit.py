"""Circuits of primitive instances: composition, deadlock search, and
deadlock-formula derivation.

A netlist wires primitive instances together over named channels. The
product transition system moves both endpoint machines at once on a
connected wire and one machine alone on an external wire. Deadlock
search walks the reachable product set; the formula side abstracts the
same question into per-channel blocked/idle booleans, couples storages
through fullness variables, and emits the result as SMT-LIB.
"""

from __future__ import annotations

from collections import deque
from dataclasses import dataclass
from functools import cached_property
from typing import Iterator, Mapping, NamedTuple

from .formulas import (
    And,
    BlockedAtom,
    Formula,
    IdleAtom,
    Iff,
    Not,
    Or,
    VarAtom,
    first_model,
    map_atoms,
    satisfying_models,
    smt_term,
)
from .labeling import compute_block_idle
from .library import STORAGE_FULLNESS, builtin_library, get_primitive
from .machine import INPUT, OUTPUT, REQUEST, ACK, XdiMachine
from .sexpr import Node, read_forms

__all__ = [
    "NetlistError",
    "ExplorationLimitError",
    "Endpoint",
    "Channel",
    "Netlist",
    "ProductState",
    "Edge",
    "ProductSystem",
    "DeadlockFinding",
    "Constraint",
    "DeadlockInstance",
    "PRODUCT_LIMIT",
    "parse_netlist",
    "compose",
    "find_deadlock",
    "analyze_deadlock",
    "settled_states",
    "fullness_invariant",
    "derive_deadlock_formula",
    "emit_smt",
]

PRODUCT_LIMIT = 10**6


class NetlistError(ValueError):
    """A structurally invalid netlist."""


class ExplorationLimitError(RuntimeError):
    """Raised when the reachable product set exceeds the configured bound."""


class Endpoint(NamedTuple):
    instance: str
    handshake: str

    def __str__(self) -> str:
        return f"{self.instance}.{self.handshake}"


@dataclass(frozen=True)
class Channel:
    name: str
    end_a: Endpoint
    end_b: Endpoint


@dataclass(frozen=True)
class Netlist:
    """Instances, channels, and which external handshakes are stable."""

    name: str
    instances: tuple[tuple[str, str], ...]
    channels: tuple[Channel, ...]
    stable: frozenset[Endpoint]

    @cached_property
    def instance_map(self) -> dict[str, str]:
        return dict(self.instances)

    @cached_property
    def endpoint_channel(self) -> dict[Endpoint, Channel]:
        table: dict[Endpoint, Channel] = {}
        for channel in self.channels:
            table[channel.end_a] = channel
            table[channel.end_b] = channel
        return table

    @cached_property
    def external_endpoints(self) -> tuple[Endpoint, ...]:
        """Unconnected handshakes, in instance declaration order."""

        found = []
        for instance, primitive in self.instances:
            machine = get_primitive(primitive).machine
            for handshake in sorted(machine.handshakes):
                point = Endpoint(instance, handshake)
                if point not in self.endpoint_channel:
                    found.append(point)
        return tuple(found)

    def machine_of(self, instance: str) -> XdiMachine:
        return get_primitive(self.instance_map[instance]).machine


def _expect_list(node: Node, what: str) -> tuple[Node, ...]:
    if not node.is_list:
        raise node.error(f"expected {what}")
    return node.value


def _expect_name(node: Node, what: str) -> str:
    if not node.is_symbol:
        raise node.error(f"expected {what}")
    return str(node.value)


def _parse_endpoint(node: Node) -> Endpoint:
    items = _expect_list(node, "endpoint (instance handshake)")
    if len(items) != 2:
        raise node.error("endpoint must be (instance handshake)")
    return Endpoint(_expect_name(items[0], "instance id"), _expect_name(items[1], "handshake"))


def parse_netlist(text: str) -> Netlist:
    """Parse and validate a circuit description."""

    forms = read_forms(text)
    if len(forms) != 1:
        raise NetlistError("expected exactly one (circuit ...) form")
    items = _expect_list(forms[0], "(circuit ...) form")
    if not items or str(items[0].value) != "circuit" or len(items) < 2:
        raise forms[0].error("expected (circuit name entries...)")
    name = _expect_name(items[1], "circuit name")

    known_primitives = {spec.name for spec in builtin_library()}
    instances: list[tuple[str, str]] = []
    channels: list[Channel] = []
    stable: list[Endpoint] = []
    for node in items[2:]:
        entry = _expect_list(node, "circuit entry")
        head = _expect_name(entry[0], "entry keyword") if entry else ""
        if head == "instance":
            if len(entry) != 3:
                raise node.error("instance entry must be (instance id primitive)")
            instances.append(
                (_expect_name(entry[1], "instance id"), _expect_name(entry[2], "primitive"))
            )
        elif head == "channel":
            if len(entry) != 4:
                raise node.error("channel entry must be (channel id endpoint endpoint)")
            channels.append(
                Channel(
                    _expect_name(entry[1], "channel id"),
                    _parse_endpoint(entry[2]),
                    _parse_endpoint(entry[3]),
                )
            )
        elif head == "stable":
            if len(entry) != 2:
                raise node.error("stable entry must be (stable endpoint)")
            stable.append(_parse_endpoint(entry[1]))
        else:
            raise node.error(f"unknown circuit entry {head!r}")

    netlist = Netlist(name, tuple(instances), tuple(channels), frozenset(stable))
    _validate_netlist(netlist, known_primitives)
    return netlist


def _validate_netlist(netlist: Netlist, known_primitives: set[str]) -> None:
    seen_instances: set[str] = set()
    for instance, primitive in netlist.instances:
        if instance in seen_instances:
            raise NetlistError(f"duplicate instance id {instance!r}")
        seen_instances.add(instance)
        if primitive not in known_primitives:
            raise NetlistError(f"unknown primitive {primitive!r} for instance {instance!r}")

    machines = {inst: netlist.machine_of(inst) for inst in seen_instances}

    def check_endpoint(point: Endpoint, where: str) -> None:
        if point.instance not in seen_instances:
            raise NetlistError(f"{where} references undeclared instance {point.instance!r}")
        if point.handshake not in machines[point.instance].handshakes:
            raise NetlistError(
                f"{where} references unknown handshake {point}"
            )

    used: set[Endpoint] = set()
    channel_names: set[str] = set()
    for channel in netlist.channels:
        where = f"channel {channel.name}"
        if channel.name in channel_names:
            raise NetlistError(f"duplicate channel id {channel.name!r}")
        channel_names.add(channel.name)
        if channel.end_a.instance == channel.end_b.instance:
            raise NetlistError(f"{where} connects instance {channel.end_a.instance!r} to itself")
        for point in (channel.end_a, channel.end_b):
            check_endpoint(point, where)
            if point in used:
                raise NetlistError(f"endpoint {point} appears in more than one channel")
            used.add(point)
        for phase in (REQUEST, ACK):
            dir_a = machines[channel.end_a.instance].wire_direction(
                channel.end_a.handshake, phase
            )
            dir_b = machines[channel.end_b.instance].wire_direction(
                channel.end_b.handshake, phase
            )
            if dir_a is None or dir_b is None:
                side = channel.end_a if dir_a is None else channel.end_b
                raise NetlistError(f"{where}: {side} has no {phase} wire")
            if dir_a == dir_b:
                raise NetlistError(
                    f"{where}: direction clash on phase {phase},"
                    f" both endpoints are {dir_a}"
                )

    for point in netlist.stable:
        check_endpoint(point, "stable annotation")
        if point in used:
            raise NetlistError(f"stable annotation on connected endpoint {point}")


# --- Product composition -----------------------------------------------------

ProductState = tuple  # of per-instance state ids, in declaration order


class Edge(NamedTuple):
    label: str
    movers: frozenset
    target: ProductState


@dataclass(frozen=True)
class ProductSystem:
    """Reachable product transition system of a netlist."""

    netlist: Netlist
    order: tuple[str, ...]
    machines: tuple[XdiMachine, ...]
    init: ProductState
    states: tuple[ProductState, ...]
    adjacency: Mapping[ProductState, tuple[Edge, ...]]
    parents: Mapping[ProductState, tuple[ProductState, str] | None]

    def path_to(self, state: ProductState) -> tuple[str, ...]:
        """Event labels along the breadth-first path from the initial state."""

        labels: list[str] = []
        cursor = state
        while True:
            parent = self.parents[cursor]
            if parent is None:
                return tuple(reversed(labels))
            cursor, label = parent
            labels.append(label)


def _successors(
    netlist: Netlist,
    order: tuple[str, ...],
    machines: tuple[XdiMachine, ...],
    index_of: Mapping[str, int],
    state: ProductState,
) -> list[Edge]:
    edges: list[Edge] = []
    for idx, instance in enumerate(order):
        machine = machines[idx]
        for wire, target in machine.entry(state[idx]).transitions:
            point = Endpoint(instance, wire.handshake)
            channel = netlist.endpoint_channel.get(point)
            if wire.direction == OUTPUT:
                if channel is None:
                    successor = state[:idx] + (target,) + state[idx + 1 :]
                    edges.append(
                        Edge(f"{point}.{wire.phase}", frozenset((instance,)), successor)
                    )
                    continue
                other = channel.end_b if channel.end_a == point else channel.end_a
                jdx = index_of[other.instance]
                partner = machines[jdx]
                for pwire, ptarget in partner.entry(state[jdx]).transitions:
                    if (
                        pwire.handshake == other.handshake
                        and pwire.phase == wire.phase
                        and pwire.direction == INPUT
                    ):
                        nxt = list(state)
                        nxt[idx] = target
                        nxt[jdx] = ptarget
                        edges.append(
                            Edge(
                                f"{channel.name}.{wire.phase}",
                                frozenset((instance, other.instance)),
                                tuple(nxt),
                            )
                        )
            else:
                # Input wires: connected ones are driven from the output
                # side; external ones fire freely unless marked stable.
                if channel is None and point not in netlist.stable:
                    successor = state[:idx] + (target,) + state[idx + 1 :]
                    edges.append(
                        Edge(f"{point}.{wire.phase}", frozenset((instance,)), successor)
                    )
    return edges


def compose(netlist: Netlist, max_states: int = PRODUCT_LIMIT) -> ProductSystem:
    """Explore the reachable product set breadth first.

    Raises ExplorationLimitError past max_states. The state order, edge
    order, and parent links are deterministic.
    """

    order = tuple(instance for instance, _ in netlist.instances)
    machines = tuple(netlist.machine_of(instance) for instance in order)
    index_of = {instance: idx for idx, instance in enumerate(order)}
    init: ProductState = tuple(machine.init_state for machine in machines)

    parents: dict[ProductState, tuple[ProductState, str] | None] = {init: None}
    adjacency: dict[ProductState, tuple[Edge, ...]] = {}
    states: list[ProductState] = []
    queue = deque([init])
    while queue:
        state = queue.popleft()
        states.append(state)
        edges = tuple(_successors(netlist, order, machines, index_of, state))
        adjacency[state] = edges
        for edge in edges:
            if edge.target not in parents:
                if len(parents) >= max_states:
                    raise ExplorationLimitError(
                        f"product of {netlist.name} exceeds {max_states} states"
                    )
                parents[edge.target] = (state, edge.label)
                queue.append(edge.target)
    return ProductSystem(
        netlist, order, machines, init, tuple(states), adjacency, parents
    )


# --- Deadlock search ---------------------------------------------------------


@dataclass(frozen=True)
class DeadlockFinding:
    """A reachable product state with at least one stuck instance."""

    state: ProductState
    path: tuple[str, ...]
    instances: tuple[str, ...]


def _can_move(system: ProductSystem, instance: str) -> frozenset:
    """States from which the instance can still take part in some event."""

    moving = [
        state
        for state in system.states
        if any(instance in edge.movers for edge in system.adjacency[state])
    ]
    backward: dict[ProductState, list[ProductState]] = {}
    for state in system.states:
        for edge in system.adjacency[state]:
            backward.setdefault(edge.target, []).append(state)
    reached = set(moving)
    queue = deque(moving)
    while queue:
        state = queue.popleft()
        for prior in backward.get(state, ()):
            if prior not in reached:
                reached.add(prior)
                queue.append(prior)
    return frozenset(reached)


def _stuck_profile(machine: XdiMachine) -> dict[str, bool]:
    """Per state: parked mid-handshake or obliged to move.

    True when the state is transient or some handshake sits at blocking
    parity. A state that is neither is a quiescent resting point, which
    never counts as deadlocked no matter how permanent it is.
    """

    label_maps = [
        compute_block_idle(machine, handshake)
        for handshake in sorted(machine.handshakes)
    ]
    return {
        entry.name: entry.is_transient
        or any(labels.labels[entry.name] for labels in label_maps)
        for entry in machine.states
    }


def analyze_deadlock(system: ProductSystem) -> DeadlockFinding | None:
    """First deadlocked state in breadth-first order, if any.

    An instance is deadlocked when no reachable continuation ever moves
    it again and its local state is transient or blocking on some
    handshake: it is parked where the protocol still owes progress.
    """

    if not system.order:
        return None
    profiles = [_stuck_profile(machine) for machine in system.machines]
    movable = {instance: _can_move(system, instance) for instance in system.order}
    for state in system.states:
        flagged = tuple(
            instance
            for idx, instance in enumerate(system.order)
            if profiles[idx][state[idx]] and state not in movable[instance]
        )
        if flagged:
            return DeadlockFinding(state, system.path_to(state), flagged)
    return None


def find_deadlock(
    netlist: Netlist, max_states: int = PRODUCT_LIMIT
) -> tuple[ProductState, tuple[str, ...]] | None:
    """Search the product space; returns (state, event path) or None."""

    finding = analyze_deadlock(compose(netlist, max_states))
    if finding is None:
        return None
    return finding.state, finding.path


# --- Fullness projection -----------------------------------------------------


def settled_states(machine: XdiMachine) -> frozenset[str]:
    """States where every handshake of the machine is at idling parity."""

    label_maps = [
        compute_block_idle(machine, handshake)
        for handshake in sorted(machine.handshakes)
    ]
    return frozenset(
        entry.name
        for entry in machine.states
        if all(not labels.labels[entry.name] for labels in label_maps)
    )


def _storage_indices(system: ProductSystem) -> tuple[int, ...]:
    return tuple(
        idx
        for idx, (_, primitive) in enumerate(system.netlist.instances)
        if primitive == "storage"
    )


def fullness_invariant(system: ProductSystem) -> Formula | None:
    """Constrain storage fullness variables by projecting the product set.

    Snapshots are taken at product states where every storage is settled
    (all its handshakes at even parity), the points where fullness is
    well defined. Returns None when there is nothing to constrain: no
    storages, no settled snapshot, or all fullness profiles realized.
    """

    indices = _storage_indices(system)
    if not indices:
        return None
    settled = {idx: settled_states(system.machines[idx]) for idx in indices}
    profiles = sorted(
        {
            tuple(STORAGE_FULLNESS[state[idx]] for idx in indices)
            for state in system.states
            if all(state[idx] in settled[idx] for idx in indices)
        }
    )
    if not profiles or len(profiles) == 2 ** len(indices):
        return None
    names = [f"full_{system.order[idx]}" for idx in indices]

    def profile_term(profile: tuple[bool, ...]) -> Formula:
        literals = [
            VarAtom(name) if value else Not(VarAtom(name))
            for name, value in zip(names, profile)
        ]
        term = literals[0]
        for literal in literals[1:]:
            term = And(term, literal)
        return term

    invariant = profile_term(profiles[0])
    for profile in profiles[1:]:
        invariant = Or(invariant, profile_term(profile))
    return invariant


# --- Deadlock formula --------------------------------------------------------


@dataclass(frozen=True)
class Constraint:
    label: str
    formula: Formula


@dataclass(frozen=True)
class DeadlockInstance:
    """Boolean deadlock query: variables, labeled constraints, target channel."""

    variables: tuple[str, ...]
    constraints: tuple[Constraint, ...]
    target: str

    def formulas(self) -> tuple[Formula, ...]:
        return tuple(constraint.formula for constraint in self.constraints)

    def models(self) -> Iterator[dict[str, bool]]:
        return satisfying_models(self.formulas(), self.variables)

    def first_model(self) -> dict[str, bool] | None:
        return first_model(self.formulas(), self.variables)


def _variable_base(netlist: Netlist, point: Endpoint) -> str:
    channel = netlist.endpoint_channel.get(point)
    if channel is not None:
        return channel.name
    return f"{point.instance}_{point.handshake}"


def derive_deadlock_formula(netlist: Netlist, target: str) -> DeadlockInstance:
    """Build the blocked/idle constraint system asking Dead(target).

    Constraints comprise, in order: each instance's condition set over
    its channel variables (storages contribute fullness couplings,
    sources and sinks their liveness facts), one fact per live or stable
    external handshake, the storage fullness invariant projected from
    the reachable product set, and the target assertion
    Dead(ch) = blocked(ch) and not idle(ch).
    """

    if target not in {channel.name for channel in netlist.channels}:
        raise NetlistError(f"no channel named {target!r}")

    bases: list[str] = [channel.name for channel in netlist.channels]
    bases.extend(_variable_base(netlist, point) for point in netlist.external_endpoints)

    constraints: list[Constraint] = []
    storages: list[str] = []
    for instance, primitive in netlist.instances:
        spec = get_primitive(primitive)
        base = {
            handshake: _variable_base(netlist, Endpoint(instance, handshake))
            for handshake in spec.machine.handshakes
        }
        blk = {h: VarAtom(f"blk_{b}") for h, b in base.items()}
        idl = {h: VarAtom(f"idl_{b}") for h, b in base.items()}
        if primitive == "storage":
            storages.append(instance)
            full = VarAtom(f"full_{instance}")
            constraints.append(
                Constraint(
                    f"{instance}: blocked(in) <-> full & blocked(out)",
                    Iff(blk["in"], And(full, blk["out"])),
                )
            )
            constraints.append(
                Constraint(
                    f"{instance}: idle(out) <-> !full & idle(in)",
                    Iff(idl["out"], And(Not(full), idl["in"])),
                )
            )
        elif primitive == "source":
            constraints.append(Constraint(f"{instance}: !idle(out)", Not(idl["out"])))
        elif primitive == "sink":
            constraints.append(Constraint(f"{instance}: !blocked(in)", Not(blk["in"])))
        else:
            for condition in spec.conditions:
                instantiated = map_atoms(
                    condition.formula,
                    lambda atom: (
                        blk[atom.handshake]
                        if isinstance(atom, BlockedAtom)
                        else idl[atom.handshake]
                    ),
                )
                constraints.append(
                    Constraint(f"{instance}: {condition.text}", instantiated)
                )

    for point in netlist.external_endpoints:
        machine = netlist.machine_of(point.instance)
        base = _variable_base(netlist, point)
        requester = machine.wire_direction(point.handshake, REQUEST) == OUTPUT
        if point in netlist.stable:
            if not requester:
                constraints.append(
                    Constraint(
                        f"external {point}: stable",
                        And(VarAtom(f"idl_{base}"), Not(VarAtom(f"blk_{base}"))),
                    )
                )
        elif requester:
            constraints.append(
                Constraint(f"external {point}: live", Not(VarAtom(f"blk_{base}")))
            )

    invariant = fullness_invariant(compose(netlist))
    if invariant is not None:
        constraints.append(Constraint("storage fullness invariant", invariant))

    constraints.append(
        Constraint(
            f"target: Dead({target})",
            And(VarAtom(f"blk_{target}"), Not(VarAtom(f"idl_{target}"))),
        )
    )

    variables = (
        tuple(f"blk_{base}" for base in sorted(bases))
        + tuple(f"idl_{base}" for base in sorted(bases))
        + tuple(f"full_{instance}" for instance in sorted(storages))
    )
    return DeadlockInstance(variables, tuple(constraints), target)


def emit_smt(instance: DeadlockInstance) -> str:
    """Render the instance as SMT-LIB 2 text, byte-deterministically."""

    lines = ["(set-logic QF_UF)"]
    lines.extend(f"(declare-const {name} Bool)" for name in instance.variables)
    for constraint in instance.constraints:
        lines.append(f"; {constraint.label}")
        lines.append(f"(assert {smt_term(constraint.formula)})")
    lines.append("(check-sat)")
    return "\n".join(lines) + "\n"
