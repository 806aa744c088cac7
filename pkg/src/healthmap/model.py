"""In-memory health map: hardware modules, diagnostic resources,
dependencies, faults and fault detections, plus the structural rules
connecting them.

All entity lists keep insertion order; the binary codec relies on that
order when laying out linked records.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from enum import IntEnum
from typing import Iterator, Optional

from .errors import (
    DuplicateIdError,
    SelfDependencyError,
    UnknownDetectorError,
    UnknownModuleError,
    UnknownParentError,
    ZeroSeverityError,
)

U32_MAX = 0xFFFFFFFF

# FaultDetection.flags bit 0: the detection represents several merged events.
FLAG_MERGED = 0x01


class Severity(IntEnum):
    """Fault impact level, totally ordered. ZERO means no fault."""

    ZERO = 0
    LOW = 1
    MEDIUM = 2
    HIGH = 3


class Persistence(IntEnum):
    """Fault recurrence class, totally ordered."""

    ZERO = 0
    TRANSIENT = 1
    INTERMITTENT = 2
    PERMANENT = 3


class ModuleStatus(IntEnum):
    AVAILABLE = 0
    OWN_FAULT = 1
    PROPAGATED_FAULT = 2
    MAINTENANCE = 3

    @property
    def label(self) -> str:
        return self.name.replace("_", " ")


@dataclass(eq=False)
class Module:
    id: int
    parent: Optional["Module"] = None
    criticality: Severity = Severity.ZERO
    diag_resources: list["DiagResource"] = field(default_factory=list)
    dependencies: list["Dependency"] = field(default_factory=list)
    faults: list["Fault"] = field(default_factory=list)
    # byte offset of this record in the image it was deserialized from
    shm_offset: Optional[int] = None


@dataclass(eq=False)
class DiagResource:
    id: int
    owner: Module
    kind: int = 0
    shm_offset: Optional[int] = None


@dataclass(eq=False)
class Dependency:
    provider: Module
    dependent: Module
    severity: Severity
    shm_offset: Optional[int] = None


@dataclass(eq=False)
class Fault:
    owner: Module
    severity: Severity
    persistence: Persistence
    classification: int
    detections: list["FaultDetection"] = field(default_factory=list)
    shm_offset: Optional[int] = None
    seq: int = 0


@dataclass(eq=False)
class FaultDetection:
    detector: DiagResource
    timestamp: int
    counter: int = 1
    payload: int = 0
    flags: int = 0
    shm_offset: Optional[int] = None
    seq: int = 0


@dataclass(frozen=True)
class Violation:
    kind: str
    entity_id: Optional[int]
    detail: str

    def __str__(self) -> str:
        return f"{self.kind}({self.entity_id}): {self.detail}"


class HealthMap:
    """Mutable graph of modules, diagnostic resources, dependencies and
    fault history. Single-writer: mutate from one logical thread at a time.
    """

    def __init__(self) -> None:
        self.modules: dict[int, Module] = {}
        self.diag_resources: dict[int, DiagResource] = {}
        self.dependencies: list[Dependency] = []
        self.faults: list[Fault] = []
        self.detections: list[FaultDetection] = []
        self._seq = 0

    # -- construction --------------------------------------------------

    def next_seq(self) -> int:
        self._seq += 1
        return self._seq

    def add_module(
        self,
        module_id: int,
        parent_id: Optional[int] = None,
        criticality: Severity = Severity.ZERO,
    ) -> Module:
        if module_id in self.modules:
            raise DuplicateIdError(f"module id {module_id} already present")
        parent = None
        if parent_id is not None:
            parent = self.modules.get(parent_id)
            if parent is None:
                raise UnknownParentError(f"parent module {parent_id} not found")
        module = Module(id=module_id, parent=parent,
                        criticality=Severity(criticality))
        self.modules[module_id] = module
        return module

    def add_diag_resource(self, res_id: int, owner_id: int, kind: int = 0) -> DiagResource:
        if res_id in self.diag_resources:
            raise DuplicateIdError(f"diag resource id {res_id} already present")
        owner = self._module(owner_id)
        res = DiagResource(id=res_id, owner=owner, kind=kind)
        self.diag_resources[res_id] = res
        owner.diag_resources.append(res)
        return res

    def add_dependency(self, provider_id: int, dependent_id: int,
                       severity: Severity) -> Dependency:
        provider = self._module(provider_id)
        dependent = self._module(dependent_id)
        if provider is dependent:
            raise SelfDependencyError(
                f"module {provider_id} cannot depend on itself")
        dep = Dependency(provider=provider, dependent=dependent,
                         severity=Severity(severity))
        provider.dependencies.append(dep)
        self.dependencies.append(dep)
        return dep

    def add_fault(self, module_id: int, severity: Severity,
                  persistence: Persistence, classification: int) -> Fault:
        owner = self._module(module_id)
        if Severity(severity) == Severity.ZERO:
            raise ZeroSeverityError("fault severity must be above ZERO")
        fault = Fault(owner=owner, severity=Severity(severity),
                      persistence=Persistence(persistence),
                      classification=classification, seq=self.next_seq())
        owner.faults.append(fault)
        self.faults.append(fault)
        return fault

    def add_detection(self, fault: Fault, detector_id: int, timestamp: int,
                      payload: int = 0, counter: int = 1,
                      flags: int = 0) -> FaultDetection:
        detector = self.diag_resources.get(detector_id)
        if detector is None:
            raise UnknownDetectorError(f"diag resource {detector_id} not found")
        det = FaultDetection(detector=detector, timestamp=timestamp,
                             counter=counter, payload=payload, flags=flags,
                             seq=self.next_seq())
        fault.detections.append(det)
        self.detections.append(det)
        return det

    def add_fault_with_detection(
        self,
        module_id: int,
        severity: Severity,
        persistence: Persistence,
        classification: int,
        detector_id: int,
        timestamp: int,
        payload: int = 0,
    ) -> Fault:
        if detector_id not in self.diag_resources:
            raise UnknownDetectorError(f"diag resource {detector_id} not found")
        fault = self.add_fault(module_id, severity, persistence, classification)
        self.add_detection(fault, detector_id, timestamp, payload)
        return fault

    def _module(self, module_id: int) -> Module:
        module = self.modules.get(module_id)
        if module is None:
            raise UnknownModuleError(f"module {module_id} not found")
        return module

    # -- queries --------------------------------------------------------

    def children_of(self, module: Module) -> Iterator[Module]:
        for m in self.modules.values():
            if m.parent is module:
                yield m

    def subtree_ids(self, module_id: int) -> list[int]:
        """The module and all its descendants, in insertion order."""
        root = self._module(module_id)
        selected = {root.id}
        # insertion order guarantees parents precede children for maps built
        # through add_module; deserialized maps keep the serialized order,
        # so iterate until no growth to stay correct for any forest.
        grew = True
        while grew:
            grew = False
            for m in self.modules.values():
                if m.id not in selected and m.parent is not None \
                        and m.parent.id in selected:
                    selected.add(m.id)
                    grew = True
        return [mid for mid in self.modules if mid in selected]

    # -- validation ------------------------------------------------------

    def validate_structure(self) -> list[Violation]:
        """Check every structural invariant; returns violations, never raises."""
        out: list[Violation] = []
        for mid, m in self.modules.items():
            if m.id != mid:
                out.append(Violation("IdMismatch", mid, "key differs from module id"))
            # parent chain must terminate without revisiting
            seen = {m.id}
            cur = m.parent
            while cur is not None:
                if cur.id in seen:
                    out.append(Violation("ParentCycle", m.id,
                                         f"cycle through module {cur.id}"))
                    break
                if self.modules.get(cur.id) is not cur:
                    out.append(Violation("DanglingParent", m.id,
                                         f"parent {cur.id} not in map"))
                    break
                seen.add(cur.id)
                cur = cur.parent
        for rid, res in self.diag_resources.items():
            if self.modules.get(res.owner.id) is not res.owner:
                out.append(Violation("DanglingOwner", rid,
                                     f"owner {res.owner.id} not in map"))
        for dep in self.dependencies:
            if dep.provider is dep.dependent:
                out.append(Violation("SelfDependency", dep.provider.id,
                                     "module depends on itself"))
            for end in (dep.provider, dep.dependent):
                if self.modules.get(end.id) is not end:
                    out.append(Violation("DanglingDependency", end.id,
                                         "dependency endpoint not in map"))
        for fault in self.faults:
            if self.modules.get(fault.owner.id) is not fault.owner:
                out.append(Violation("DanglingFaultOwner", fault.owner.id,
                                     "fault owner not in map"))
            if fault.severity == Severity.ZERO:
                out.append(Violation("ZeroSeverity", fault.owner.id,
                                     "fault with ZERO severity"))
            if fault.persistence == Persistence.ZERO:
                out.append(Violation("ZeroPersistence", fault.owner.id,
                                     "fault with ZERO persistence"))
            for det in fault.detections:
                if det.counter < 1:
                    out.append(Violation("BadCounter", fault.owner.id,
                                         "detection counter below 1"))
                if self.diag_resources.get(det.detector.id) is not det.detector:
                    out.append(Violation("DanglingDetector", det.detector.id,
                                         "detection references unknown detector"))
        return out

    # -- structural snapshot ----------------------------------------------

    def snapshot(self):
        """Canonical nested-tuple view used for structural equality."""
        det_index = {id(d): i for i, d in enumerate(self.detections)}
        fault_index = {id(f): i for i, f in enumerate(self.faults)}
        dep_index = {id(d): i for i, d in enumerate(self.dependencies)}
        modules = tuple(
            (
                m.id,
                m.parent.id if m.parent else None,
                int(m.criticality),
                tuple(r.id for r in m.diag_resources),
                tuple(dep_index[id(d)] for d in m.dependencies),
                tuple(fault_index[id(f)] for f in m.faults),
            )
            for m in self.modules.values()
        )
        resources = tuple(
            (r.id, r.owner.id, r.kind) for r in self.diag_resources.values()
        )
        deps = tuple(
            (d.provider.id, d.dependent.id, int(d.severity))
            for d in self.dependencies
        )
        faults = tuple(
            (
                f.owner.id,
                int(f.severity),
                int(f.persistence),
                f.classification,
                tuple(det_index[id(d)] for d in f.detections),
            )
            for f in self.faults
        )
        detections = tuple(
            (d.detector.id, d.timestamp, d.counter, d.payload, d.flags)
            for d in self.detections
        )
        return (modules, resources, deps, faults, detections)

    def equivalent(self, other: "HealthMap") -> bool:
        return self.snapshot() == other.snapshot()
