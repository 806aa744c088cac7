"""Per-module health summary and the propagation procedures that fill it.

Each module gets one 7-byte entry (id u32, worst severity u8, worst
persistence u8, status u8). Severity propagates from child to parent capped
by the child's criticality (min), persistence propagates uncapped, and
dependency edges forward a fault to the dependent module capped by the
dependency severity, a single hop only.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass
from typing import Iterable, Optional

from .errors import MissingSymbolError, UnknownModuleError
from .model import HealthMap, ModuleStatus, Persistence, Severity

RM_ENTRY = struct.Struct("<IBBB")
RM_ENTRY_SIZE = RM_ENTRY.size  # 7


@dataclass
class RmEntry:
    module_id: int
    severity: Severity = Severity.ZERO
    persistence: Persistence = Persistence.ZERO
    status: ModuleStatus = ModuleStatus.AVAILABLE

    def encode(self) -> bytes:
        return RM_ENTRY.pack(self.module_id, int(self.severity),
                             int(self.persistence), int(self.status))

    @classmethod
    def decode(cls, data: bytes, offset: int = 0) -> "RmEntry":
        mid, sev, pers, status = RM_ENTRY.unpack_from(data, offset)
        return cls(mid, Severity(sev), Persistence(pers),
                   ModuleStatus(status))


class ResourceMap:
    """Snapshot summary over one health map; one entry per module."""

    def __init__(self, hm: HealthMap) -> None:
        self._hm = hm
        self.entries: dict[int, RmEntry] = {
            mid: RmEntry(mid) for mid in hm.modules
        }
        self._maintenance: set[int] = set()

    @property
    def health_map(self) -> HealthMap:
        return self._hm

    def entry(self, module_id: int) -> RmEntry:
        e = self.entries.get(module_id)
        if e is None:
            raise UnknownModuleError(f"module {module_id} has no entry")
        return e

    # -- update procedures ------------------------------------------------

    def update_single_fault(self, module_id: int, severity: Severity,
                            persistence: Persistence, status: ModuleStatus,
                            _follow_deps: bool = True) -> None:
        """Fold one fault's (severity, persistence, status) into the entry
        and propagate upward. Worst values are kept (max); OWN_FAULT is
        never downgraded to PROPAGATED_FAULT and MAINTENANCE is never
        overwritten here.
        """
        e = self.entry(module_id)
        if severity > e.severity:
            e.severity = Severity(severity)
        if persistence > e.persistence:
            e.persistence = Persistence(persistence)
        if severity > Severity.ZERO and e.status != ModuleStatus.MAINTENANCE:
            if status == ModuleStatus.OWN_FAULT:
                e.status = ModuleStatus.OWN_FAULT
            elif (status == ModuleStatus.PROPAGATED_FAULT
                    and e.status != ModuleStatus.OWN_FAULT):
                e.status = ModuleStatus.PROPAGATED_FAULT
        # Forward the *incoming* values, not the stored maxima: the entry's
        # maxima may include contributions whose dependency hop was already
        # spent, and forwarding those across a fresh dependency edge would
        # over-propagate.
        self.propagate_fault(module_id, severity, persistence, _follow_deps)

    def propagate_fault(self, module_id: int, severity: Severity,
                        persistence: Persistence,
                        _follow_deps: bool = True) -> None:
        """Recursive child-to-parent propagation with criticality capping,
        plus single-hop dependency propagation.
        """
        if severity == Severity.ZERO:
            return
        module = self._hm.modules[module_id]
        if module.criticality != Severity.ZERO and module.parent is not None:
            self.update_single_fault(
                module.parent.id,
                Severity(min(severity, module.criticality)),
                persistence,
                ModuleStatus.PROPAGATED_FAULT,
                _follow_deps,
            )
        if _follow_deps:
            for dep in module.dependencies:
                capped = Severity(min(severity, dep.severity))
                if capped != Severity.ZERO:
                    self.update_single_fault(
                        dep.dependent.id, capped, persistence,
                        ModuleStatus.PROPAGATED_FAULT, _follow_deps=False)

    # -- maintenance -------------------------------------------------------

    def set_maintenance(self, module_id: int, on: bool) -> None:
        """Mark or clear maintenance for a module and all its descendants.

        Clearing recomputes each affected status from the fault data.
        """
        subtree = self._hm.subtree_ids(module_id)
        if on:
            for mid in subtree:
                self._maintenance.add(mid)
                self.entries[mid].status = ModuleStatus.MAINTENANCE
        else:
            for mid in subtree:
                self._maintenance.discard(mid)
                e = self.entries[mid]
                if self._hm.modules[mid].faults:
                    e.status = ModuleStatus.OWN_FAULT
                elif e.severity > Severity.ZERO:
                    e.status = ModuleStatus.PROPAGATED_FAULT
                else:
                    e.status = ModuleStatus.AVAILABLE

    @property
    def maintenance(self) -> frozenset[int]:
        return frozenset(self._maintenance)

    # -- encoding -----------------------------------------------------------

    def encode(self) -> bytes:
        """7 bytes per module, in module insertion order."""
        return b"".join(self.entries[mid].encode() for mid in self._hm.modules)


def init_resource_map(hm: HealthMap,
                      maintenance: Iterable[int] = ()) -> ResourceMap:
    """Populate a fresh resource map by scanning every module's faults and
    propagating; the result is independent of iteration order.
    """
    rm = ResourceMap(hm)
    for mid in maintenance:
        rm.set_maintenance(mid, True)
    for module in hm.modules.values():
        if not module.faults:
            continue
        severity = max(f.severity for f in module.faults)
        persistence = max(f.persistence for f in module.faults)
        rm.update_single_fault(module.id, severity, persistence,
                               ModuleStatus.OWN_FAULT)
    return rm


def render_table(rm: ResourceMap, sidecar) -> str:
    """Four-column text table, rows sorted by dotted module name."""
    rows = []
    for mid, e in rm.entries.items():
        name = sidecar.name_for_id(mid)
        if name is None:
            raise MissingSymbolError(f"no symbol for module id {mid}")
        rows.append((name, e.severity.name, e.persistence.name,
                     e.status.label))
    rows.sort(key=lambda r: r[0])
    header = ("Module name", "Worst severity", "Worst persistence", "Status")
    widths = [max(len(r[i]) for r in [header] + rows) for i in range(3)]
    lines = []
    for row in [header] + rows:
        cells = [row[i].ljust(widths[i]) for i in range(3)] + [row[3]]
        lines.append("  ".join(cells).rstrip())
    return "\n".join(lines)
