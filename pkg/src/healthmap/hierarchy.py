"""Hierarchical roll-up: resource map summaries travel up a tree of nodes
as checksummed wire messages and feed the parent node's health map through
a per-child virtual "downlink" diagnostic resource.

Message format (little-endian):

    magic "RMS1" | version u16 | nodeId u32 | entryCount u16 |
    entryCount x 7-byte entry | crc32 u32 over all preceding bytes

The simulator is single-threaded discrete-event; the wire format is the
contract a networked deployment would reuse.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional

from . import compiler
from .codec import crc32
from .errors import (
    CrcMismatchError,
    MalformedMessageError,
    ScenarioError,
    TooManyEntriesError,
    UnknownDetectorError,
    UnknownNodeError,
)
from .faultmgr import DetectionReport, parse_report_line, report_detection
from .model import HealthMap, ModuleStatus, Persistence, Severity
from .resourcemap import RM_ENTRY_SIZE, ResourceMap, RmEntry, init_resource_map

RMS_MAGIC = b"RMS1"
RMS_VERSION = 1
_RMS_HEAD = struct.Struct("<4sHIH")


def encode_summary(node_id: int, rm: ResourceMap) -> bytes:
    """Serialize a resource map for uplink; decode(encode(x)) == x."""
    entries = rm.encode()
    count = len(entries) // RM_ENTRY_SIZE
    if count > 0xFFFF:
        raise TooManyEntriesError(f"{count} entries exceed the u16 count")
    head = _RMS_HEAD.pack(RMS_MAGIC, RMS_VERSION, node_id, count)
    body = head + entries
    return body + struct.pack("<I", crc32(body))


def decode_summary(data: bytes) -> tuple[int, list[RmEntry]]:
    if len(data) < _RMS_HEAD.size + 4:
        raise MalformedMessageError("message shorter than minimum")
    magic, version, node_id, count = _RMS_HEAD.unpack_from(data, 0)
    if magic != RMS_MAGIC:
        raise MalformedMessageError(f"bad magic {magic!r}")
    if version != RMS_VERSION:
        raise MalformedMessageError(f"unsupported version {version}")
    expected = _RMS_HEAD.size + RM_ENTRY_SIZE * count + 4
    if len(data) != expected:
        raise MalformedMessageError(
            f"message length {len(data)}, expected {expected}")
    (stored,) = struct.unpack_from("<I", data, expected - 4)
    if crc32(data[:expected - 4]) != stored:
        raise CrcMismatchError("summary message checksum mismatch")
    entries = [RmEntry.decode(data, _RMS_HEAD.size + RM_ENTRY_SIZE * i)
               for i in range(count)]
    return node_id, entries


@dataclass
class ChildMapping:
    """Routes (child node, child module) pairs onto parent modules and
    names the downlink diagnostic resource representing each child node.

    File format, one association per line:

        child <nodeId> <childModuleId> -> <parentModuleId>
        downlink <nodeId> <diagResourceId>
    """

    routes: dict[tuple[int, int], int] = field(default_factory=dict)
    downlinks: dict[int, int] = field(default_factory=dict)

    def knows_node(self, node_id: int) -> bool:
        return (node_id in self.downlinks
                or any(nid == node_id for nid, _ in self.routes))

    @classmethod
    def parse(cls, text: str) -> "ChildMapping":
        mapping = cls()
        for lineno, raw in enumerate(text.splitlines(), 1):
            line = raw.strip()
            if not line or line.startswith("#"):
                continue
            parts = line.split()
            if parts[0] == "child" and len(parts) == 5 and parts[3] == "->":
                key = (int(parts[1]), int(parts[2]))
                if key in mapping.routes:
                    raise ScenarioError(
                        f"mapping line {lineno}: duplicate route for "
                        f"{key}")
                mapping.routes[key] = int(parts[4])
            elif parts[0] == "downlink" and len(parts) == 3:
                mapping.downlinks[int(parts[1])] = int(parts[2])
            else:
                raise ScenarioError(
                    f"mapping line {lineno}: bad syntax {line!r}")
        return mapping


def ingest_summary(parent_hm: HealthMap, parent_rm: ResourceMap,
                   message: bytes, mapping: ChildMapping,
                   timestamp: int) -> int:
    """Fold a child summary into the parent node's state.

    Every faulty entry routed to a parent module P is recorded as a fault
    at P (detected by the child's downlink instrument; the classification
    is the low byte of the child module id) and applied to the parent
    resource map as an own fault at P's level. Returns the number of
    faulty entries skipped because they were unmapped.
    """
    node_id, entries = decode_summary(message)
    if not mapping.knows_node(node_id):
        raise UnknownNodeError(f"summary from unmapped node {node_id}")
    detector_id = mapping.downlinks.get(node_id)
    skipped = 0
    for entry in entries:
        if entry.severity == Severity.ZERO:
            continue
        parent_module = mapping.routes.get((node_id, entry.module_id))
        if parent_module is None:
            skipped += 1
            continue
        if detector_id is None or detector_id not in parent_hm.diag_resources:
            raise UnknownDetectorError(
                f"no downlink diag resource for node {node_id}")
        classification = entry.module_id & 0xFF
        persistence = Persistence(max(entry.persistence,
                                      Persistence.TRANSIENT))
        fault = None
        for candidate in parent_hm.modules[parent_module].faults:
            if candidate.classification == classification:
                fault = candidate
        if fault is None:
            fault = parent_hm.add_fault(parent_module, entry.severity,
                                        persistence, classification)
        else:
            fault.severity = Severity(max(fault.severity, entry.severity))
            fault.persistence = Persistence(max(fault.persistence,
                                                persistence))
        latest = fault.detections[-1] if fault.detections else None
        if (latest is not None and latest.detector.id == detector_id
                and latest.timestamp == timestamp):
            latest.counter += 1
        else:
            parent_hm.add_detection(fault, detector_id, timestamp,
                                    payload=entry.module_id)
        parent_rm.update_single_fault(parent_module, fault.severity,
                                      fault.persistence,
                                      ModuleStatus.OWN_FAULT)
    return skipped


# --------------------------------------------------------------------------
# scenario simulation


@dataclass
class NodeSpec:
    node_id: int
    hm_path: Path
    map_path: Optional[Path]
    period_us: int
    parent_id: Optional[int]


@dataclass
class ScheduledDetection:
    time_us: int
    node_id: int
    report: DetectionReport
    seq: int


@dataclass
class Scenario:
    """Node tree, timed detection events and the simulated duration.

    File format:

        duration <µs>
        node <id> hm=<xml> map=<file|none> period=<µs> parent=<id|none>
        at <µs> node <id> detect <detectorId> sev=<SEV> class=<n>
    """

    nodes: dict[int, NodeSpec] = field(default_factory=dict)
    events: list[ScheduledDetection] = field(default_factory=list)
    duration_us: int = 0

    @classmethod
    def parse(cls, text: str, base_dir: Path) -> "Scenario":
        scenario = cls()
        for lineno, raw in enumerate(text.splitlines(), 1):
            line = raw.strip()
            if not line or line.startswith("#"):
                continue
            parts = line.split()
            try:
                if parts[0] == "duration" and len(parts) == 2:
                    scenario.duration_us = int(parts[1])
                elif parts[0] == "node":
                    scenario._parse_node(parts, base_dir)
                elif parts[0] == "at":
                    scenario._parse_event(parts, line)
                else:
                    raise ScenarioError(f"bad directive {parts[0]!r}")
            except ScenarioError as exc:
                raise ScenarioError(f"scenario line {lineno}: {exc}") \
                    from None
        scenario._validate()
        return scenario

    def _parse_node(self, parts: list[str], base_dir: Path) -> None:
        if len(parts) != 6:
            raise ScenarioError("node line needs id, hm=, map=, period=, "
                                "parent=")
        node_id = int(parts[1])
        if node_id in self.nodes:
            raise ScenarioError(f"duplicate node id {node_id}")
        kv = {}
        for part in parts[2:]:
            key, _, value = part.partition("=")
            kv[key] = value
        for key in ("hm", "map", "period", "parent"):
            if key not in kv:
                raise ScenarioError(f"node line missing {key}=")
        self.nodes[node_id] = NodeSpec(
            node_id=node_id,
            hm_path=base_dir / kv["hm"],
            map_path=None if kv["map"] == "none" else base_dir / kv["map"],
            period_us=int(kv["period"]),
            parent_id=None if kv["parent"] == "none" else int(kv["parent"]),
        )

    def _parse_event(self, parts: list[str], line: str) -> None:
        if len(parts) < 5 or parts[2] != "node":
            raise ScenarioError(f"bad event line {line!r}")
        report = parse_report_line(" ".join(parts[4:]),
                                   default_timestamp=int(parts[1]))
        self.events.append(ScheduledDetection(
            time_us=int(parts[1]),
            node_id=int(parts[3]),
            report=report,
            seq=len(self.events),
        ))

    def _validate(self) -> None:
        if self.duration_us <= 0:
            raise ScenarioError("scenario needs a positive duration")
        for spec in self.nodes.values():
            if spec.parent_id is not None:
                if spec.parent_id not in self.nodes:
                    raise ScenarioError(
                        f"node {spec.node_id} references unknown parent "
                        f"{spec.parent_id}")
            # tree must be acyclic
            seen = {spec.node_id}
            cur = spec.parent_id
            while cur is not None:
                if cur in seen:
                    raise ScenarioError(
                        f"node tree cycle through node {cur}")
                seen.add(cur)
                cur = self.nodes[cur].parent_id
        for event in self.events:
            if event.node_id not in self.nodes:
                raise ScenarioError(
                    f"event references unknown node {event.node_id}")


@dataclass
class _LiveNode:
    spec: NodeSpec
    hm: HealthMap
    sidecar: compiler.Sidecar
    rm: ResourceMap
    mapping: Optional[ChildMapping]


@dataclass
class SimulationResult:
    message_log: list[str]
    rm_log: list[str]
    final_rms: dict[int, ResourceMap]
    nodes: dict[int, "_LiveNode"]

    def message_text(self) -> str:
        return "\n".join(self.message_log) + "\n"

    def rm_text(self) -> str:
        return "\n".join(self.rm_log) + "\n"


def simulate(scenario: Scenario) -> SimulationResult:
    """Discrete-event run: detections apply at their timestamps, each node
    emits a summary every period, parents ingest in timestamp order.
    Deterministic: ties break on (time, node id, event kind, sequence).
    """
    nodes: dict[int, _LiveNode] = {}
    for node_id, spec in sorted(scenario.nodes.items()):
        description = compiler.parse_description(
            spec.hm_path.read_text())
        hm, sidecar = compiler.build_map(description)
        mapping = None
        if spec.map_path is not None:
            mapping = ChildMapping.parse(spec.map_path.read_text())
        nodes[node_id] = _LiveNode(spec=spec, hm=hm, sidecar=sidecar,
                                   rm=init_resource_map(hm), mapping=mapping)

    # event tuples: (time, node_id, kind, seq, payload); detections (kind 0)
    # apply before emissions (kind 1) at the same instant
    events: list[tuple] = []
    for det in scenario.events:
        events.append((det.time_us, det.node_id, 0, det.seq, det.report))
    for node_id, spec in scenario.nodes.items():
        k = 1
        while k * spec.period_us <= scenario.duration_us:
            events.append((k * spec.period_us, node_id, 1, k, None))
            k += 1
    events.sort(key=lambda e: e[:4])

    message_log: list[str] = []
    rm_log: list[str] = []
    for time_us, node_id, kind, _seq, payload in events:
        node = nodes[node_id]
        if kind == 0:
            report_detection(node.hm, payload, rm=node.rm)
            continue
        rm_log.append(f"at {time_us} node {node_id} rm "
                      f"{node.rm.encode().hex()}")
        parent_id = node.spec.parent_id
        if parent_id is None:
            continue
        message = encode_summary(node_id, node.rm)
        message_log.append(f"at {time_us} node {node_id} -> {parent_id} "
                           f"{message.hex()}")
        parent = nodes[parent_id]
        if parent.mapping is None:
            raise ScenarioError(
                f"node {parent_id} receives summaries but has no mapping")
        ingest_summary(parent.hm, parent.rm, message, parent.mapping,
                       time_us)

    return SimulationResult(
        message_log=message_log,
        rm_log=rm_log,
        final_rms={nid: node.rm for nid, node in nodes.items()},
        nodes=nodes,
    )
