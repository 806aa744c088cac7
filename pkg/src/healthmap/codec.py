"""Bit-exact serializer/deserializer for the relocatable health map image.

Layout (all little-endian, no padding):

    header (32 B) | module records | diag resource records |
    dependency records | fault records | detection records

Cross-record links are absolute byte offsets from the start of the image;
offset 0 (inside the header) encodes a null link. Modules, diag resources
and dependencies form the constant part written once at compile time.
Faults and detections form the dynamic part: updates append records at the
end of the image and patch only list-tail link words and detection
counter/flag words in place, so non-volatile rewrites stay minimal. After
appends the dynamic region may interleave fault and detection records;
readers follow the linked lists and trust the header counts, never section
contiguity.

Record layouts:

    Module (25 B):       id u32 | parentOff u32 | firstDiagOff u32 |
                         firstDepOff u32 | firstFaultOff u32 |
                         criticality u8 | nextModuleOff u32
    DiagResource (13 B): id u32 | ownerModuleOff u32 | nextOff u32 | kind u8
    Dependency (9 B):    dependentModuleOff u32 | nextOff u32 | severity u8
    Fault (12 B):        nextOff u32 | firstDetectionOff u32 | severity u8 |
                         persistence u8 | classification u8 | reserved u8
    Detection (25 B):    nextOff u32 | detectorOff u32 | timestamp u64 |
                         counter u32 | payload u32 | flags u8

Header (32 B): magic "SHM1" | version u16 | flags u16 | totalLength u32 |
M u16 | R u16 | D u16 | F u16 | FD u32 | bodyCrc u32 (over
[32, totalLength)) | headerCrc u32 (over [0, 28)).
"""

from __future__ import annotations

import struct
import zlib
from dataclasses import dataclass, field
from typing import Iterable, Optional, Sequence

from .errors import (
    AppendError,
    BadLinkError,
    BadMagicError,
    BadVersionError,
    BodyCrcMismatchError,
    HeaderCrcMismatchError,
    LengthMismatchError,
    LinkCycleError,
    OffsetMisalignedError,
    OffsetOutOfBoundsError,
    RecordCountError,
    StructureInvalidError,
    UnknownFaultError,
)
from .model import (
    Dependency,
    DiagResource,
    Fault,
    FaultDetection,
    HealthMap,
    Module,
    Persistence,
    Severity,
)

MAGIC = b"SHM1"
VERSION = 1

HEADER = struct.Struct("<4sHHIHHHHIII")
MODULE_REC = struct.Struct("<IIIIIBI")
DIAG_REC = struct.Struct("<IIIB")
DEP_REC = struct.Struct("<IIB")
FAULT_REC = struct.Struct("<IIBBBB")
DET_REC = struct.Struct("<IIQIIB")

HEADER_SIZE = HEADER.size          # 32
MODULE_SIZE = MODULE_REC.size      # 25
DIAG_SIZE = DIAG_REC.size          # 13
DEP_SIZE = DEP_REC.size            # 9
FAULT_SIZE = FAULT_REC.size        # 12
DET_SIZE = DET_REC.size            # 25

FILE_EXTENSION = ".shm"


def crc32(data: bytes) -> int:
    """Reflected CRC-32 (poly 0xEDB88320, init/final-xor 0xFFFFFFFF)."""
    return zlib.crc32(data) & 0xFFFFFFFF


def image_length(m: int, r: int, d: int, f: int, fd: int) -> int:
    return (HEADER_SIZE + MODULE_SIZE * m + DIAG_SIZE * r + DEP_SIZE * d
            + FAULT_SIZE * f + DET_SIZE * fd)


# --------------------------------------------------------------------------
# serialize


def _assign_offsets(hm: HealthMap) -> dict[int, int]:
    """Map id(entity) -> byte offset, canonical section layout."""
    off: dict[int, int] = {}
    pos = HEADER_SIZE
    for m in hm.modules.values():
        off[id(m)] = pos
        pos += MODULE_SIZE
    for r in hm.diag_resources.values():
        off[id(r)] = pos
        pos += DIAG_SIZE
    for d in hm.dependencies:
        off[id(d)] = pos
        pos += DEP_SIZE
    for f in hm.faults:
        off[id(f)] = pos
        pos += FAULT_SIZE
    for det in hm.detections:
        off[id(det)] = pos
        pos += DET_SIZE
    return off


def _link(off: dict[int, int], entity) -> int:
    return 0 if entity is None else off[id(entity)]


def _next_in(items: list, i: int):
    return items[i + 1] if i + 1 < len(items) else None


def _encode_module(m: Module, hm_modules: list[Module], idx: int,
                   off: dict[int, int]) -> bytes:
    return MODULE_REC.pack(
        m.id,
        _link(off, m.parent),
        _link(off, m.diag_resources[0] if m.diag_resources else None),
        _link(off, m.dependencies[0] if m.dependencies else None),
        _link(off, m.faults[0] if m.faults else None),
        int(m.criticality),
        _link(off, _next_in(hm_modules, idx)),
    )


def _encode_fault(f: Fault, next_fault: Optional[Fault],
                  off: dict[int, int]) -> bytes:
    return FAULT_REC.pack(
        _link(off, next_fault),
        _link(off, f.detections[0] if f.detections else None),
        int(f.severity),
        int(f.persistence),
        f.classification & 0xFF,
        0,
    )


def _encode_detection(d: FaultDetection, next_det: Optional[FaultDetection],
                      off: dict[int, int]) -> bytes:
    return DET_REC.pack(
        _link(off, next_det),
        off[id(d.detector)],
        d.timestamp,
        d.counter,
        d.payload,
        d.flags & 0xFF,
    )


def _check_counts(hm: HealthMap) -> tuple[int, int, int, int, int]:
    m, r = len(hm.modules), len(hm.diag_resources)
    d, f, fd = len(hm.dependencies), len(hm.faults), len(hm.detections)
    if max(m, r, d, f) > 0xFFFF or fd > 0xFFFFFFFF:
        raise StructureInvalidError(
            [f"entity counts exceed header field ranges "
             f"(M={m} R={r} D={d} F={f} FD={fd})"])
    return m, r, d, f, fd


def serialize(hm: HealthMap) -> bytes:
    """Produce the contiguous relocatable byte image of the map."""
    violations = hm.validate_structure()
    if violations:
        raise StructureInvalidError(violations)
    m, r, d, f, fd = _check_counts(hm)
    total = image_length(m, r, d, f, fd)
    off = _assign_offsets(hm)

    body = bytearray()
    modules = list(hm.modules.values())
    for i, mod in enumerate(modules):
        body += _encode_module(mod, modules, i, off)
    resources = list(hm.diag_resources.values())
    for res in resources:
        owner_list = res.owner.diag_resources
        i = owner_list.index(res)
        body += DIAG_REC.pack(res.id, off[id(res.owner)],
                              _link(off, _next_in(owner_list, i)),
                              res.kind & 0xFF)
    for dep in hm.dependencies:
        owner_list = dep.provider.dependencies
        i = owner_list.index(dep)
        body += DEP_REC.pack(off[id(dep.dependent)],
                             _link(off, _next_in(owner_list, i)),
                             int(dep.severity))
    for fault in hm.faults:
        owner_list = fault.owner.faults
        i = owner_list.index(fault)
        body += _encode_fault(fault, _next_in(owner_list, i), off)
    det_owner = {id(det): fault for fault in hm.faults
                 for det in fault.detections}
    for det in hm.detections:
        owner_list = det_owner[id(det)].detections
        i = owner_list.index(det)
        body += _encode_detection(det, _next_in(owner_list, i), off)

    assert HEADER_SIZE + len(body) == total
    header = _pack_header(total, m, r, d, f, fd, crc32(bytes(body)))
    return bytes(header + body)


def _pack_header(total, m, r, d, f, fd, body_crc) -> bytearray:
    head = bytearray(HEADER.pack(MAGIC, VERSION, 0, total, m, r, d, f, fd,
                                 body_crc, 0))
    head[28:32] = struct.pack("<I", crc32(bytes(head[:28])))
    return head


# --------------------------------------------------------------------------
# deserialize


@dataclass
class _Raw:
    offset: int
    fields: tuple


class _Reader:
    """Parses and cross-checks one image; hostile input tolerated."""

    def __init__(self, data: bytes) -> None:
        self.data = bytes(data)
        self.total = len(self.data)

    def run(self) -> HealthMap:
        m, r, d, f, fd = self._check_header()
        self.mod_base = HEADER_SIZE
        self.diag_base = self.mod_base + MODULE_SIZE * m
        self.dep_base = self.diag_base + DIAG_SIZE * r
        self.dyn_base = self.dep_base + DEP_SIZE * d
        self.counts = (m, r, d, f, fd)

        mod_offsets = self._walk_modules(m)
        raw_modules = {o: _Raw(o, MODULE_REC.unpack_from(self.data, o))
                       for o in mod_offsets}

        hm = HealthMap()
        by_off: dict[int, Module] = {}
        for o in mod_offsets:
            fields = raw_modules[o].fields
            mod = Module(id=fields[0], criticality=self._severity(fields[5]),
                         shm_offset=o)
            if mod.id in hm.modules:
                raise BadLinkError(f"duplicate module id {mod.id}")
            hm.modules[mod.id] = mod
            by_off[o] = mod
        # wire parents
        for o in mod_offsets:
            parent_off = raw_modules[o].fields[1]
            if parent_off:
                by_off[o].parent = by_off[self._require_module(parent_off)]

        self._read_diags(hm, by_off, raw_modules, r)
        self._read_deps(hm, by_off, raw_modules, d)
        self._read_dynamic(hm, by_off, raw_modules, f, fd)
        return hm

    # -- header ----------------------------------------------------------

    def _check_header(self):
        if self.total < HEADER_SIZE:
            raise LengthMismatchError(
                f"image shorter than header ({self.total} bytes)")
        (magic, version, _flags, total, m, r, d, f, fd, body_crc,
         header_crc) = HEADER.unpack_from(self.data, 0)
        if magic != MAGIC:
            raise BadMagicError(f"bad magic {magic!r}")
        if version != VERSION:
            raise BadVersionError(f"unsupported version {version}")
        if crc32(self.data[:28]) != header_crc:
            raise HeaderCrcMismatchError("header checksum mismatch")
        if total != self.total:
            raise LengthMismatchError(
                f"header claims {total} bytes, image has {self.total}")
        if total != image_length(m, r, d, f, fd):
            raise LengthMismatchError(
                "total length inconsistent with entity counts")
        if crc32(self.data[HEADER_SIZE:]) != body_crc:
            raise BodyCrcMismatchError("body checksum mismatch")
        return m, r, d, f, fd

    # -- link plumbing -----------------------------------------------------

    def _severity(self, value: int) -> Severity:
        try:
            return Severity(value)
        except ValueError:
            raise BadLinkError(f"invalid severity value {value}") from None

    def _section_offset(self, off: int, base: int, size: int, count: int,
                        what: str) -> int:
        end = base + size * count
        if not (base <= off < end) or off + size > self.total:
            raise OffsetOutOfBoundsError(
                f"{what} offset {off} outside section [{base}, {end})")
        if (off - base) % size:
            raise OffsetMisalignedError(
                f"{what} offset {off} not on a {size}-byte record boundary")
        return off

    def _require_module(self, off: int) -> int:
        m = self.counts[0]
        return self._section_offset(off, self.mod_base, MODULE_SIZE, m,
                                    "module")

    def _walk_modules(self, m: int) -> list[int]:
        offsets: list[int] = []
        seen: set[int] = set()
        cur = self.mod_base if m else 0
        while cur:
            self._require_module(cur)
            if cur in seen:
                raise LinkCycleError(f"module list revisits offset {cur}")
            seen.add(cur)
            offsets.append(cur)
            cur = MODULE_REC.unpack_from(self.data, cur)[6]
        if len(offsets) != m:
            raise RecordCountError(
                f"module list has {len(offsets)} records, header says {m}")
        return offsets

    def _walk_list(self, head: int, base: int, size: int, count: int,
                   seen: set[int], what: str, next_index: int,
                   rec: struct.Struct) -> list[int]:
        offsets = []
        cur = head
        while cur:
            self._section_offset(cur, base, size, count, what)
            if cur in seen:
                raise LinkCycleError(f"{what} list revisits offset {cur}")
            seen.add(cur)
            offsets.append(cur)
            cur = rec.unpack_from(self.data, cur)[next_index]
        return offsets

    def _read_diags(self, hm, by_off, raw_modules, r):
        seen: set[int] = set()
        parsed: list[tuple[int, DiagResource]] = []
        for mod_off, raw in raw_modules.items():
            head = raw.fields[2]
            for o in self._walk_list(head, self.diag_base, DIAG_SIZE, r,
                                     seen, "diag resource", 2, DIAG_REC):
                rid, owner_off, _nxt, kind = DIAG_REC.unpack_from(self.data, o)
                if owner_off != mod_off:
                    raise BadLinkError(
                        f"diag resource at {o} owner link mismatch")
                res = DiagResource(id=rid, owner=by_off[mod_off], kind=kind,
                                   shm_offset=o)
                if rid in hm.diag_resources:
                    raise BadLinkError(f"duplicate diag resource id {rid}")
                by_off[mod_off].diag_resources.append(res)
                parsed.append((o, res))
        if len(parsed) != r:
            raise RecordCountError(
                f"walked {len(parsed)} diag resources, header says {r}")
        for _o, res in sorted(parsed, key=lambda p: p[0]):
            hm.diag_resources[res.id] = res

    def _read_deps(self, hm, by_off, raw_modules, d):
        seen: set[int] = set()
        parsed: list[tuple[int, Dependency]] = []
        for mod_off, raw in raw_modules.items():
            head = raw.fields[3]
            for o in self._walk_list(head, self.dep_base, DEP_SIZE, d,
                                     seen, "dependency", 1, DEP_REC):
                dep_off, _nxt, sev = DEP_REC.unpack_from(self.data, o)
                dependent = by_off[self._require_module(dep_off)]
                provider = by_off[mod_off]
                if dependent is provider:
                    raise BadLinkError(f"self-dependency at offset {o}")
                dep = Dependency(provider=provider, dependent=dependent,
                                 severity=self._severity(sev), shm_offset=o)
                provider.dependencies.append(dep)
                parsed.append((o, dep))
        if len(parsed) != d:
            raise RecordCountError(
                f"walked {len(parsed)} dependencies, header says {d}")
        hm.dependencies = [dep for _o, dep in sorted(parsed,
                                                     key=lambda p: p[0])]

    def _dynamic_record(self, off: int, size: int,
                        claimed: dict[int, int], what: str) -> None:
        if off < self.dyn_base or off + size > self.total:
            raise OffsetOutOfBoundsError(
                f"{what} offset {off} outside dynamic region")
        for other, osize in claimed.items():
            if off < other + osize and other < off + size:
                raise BadLinkError(
                    f"{what} at {off} overlaps record at {other}")
        claimed[off] = size

    def _read_dynamic(self, hm, by_off, raw_modules, f, fd):
        claimed: dict[int, int] = {}
        seen_f: set[int] = set()
        faults: list[tuple[int, Fault]] = []
        dets: list[tuple[int, FaultDetection, Fault]] = []
        diag_by_off = {res.shm_offset: res
                       for res in hm.diag_resources.values()}
        for mod_off, raw in raw_modules.items():
            cur = raw.fields[4]
            while cur:
                if cur in seen_f:
                    raise LinkCycleError(f"fault list revisits offset {cur}")
                seen_f.add(cur)
                self._dynamic_record(cur, FAULT_SIZE, claimed, "fault")
                nxt, first_det, sev, pers, cls, _resv = FAULT_REC.unpack_from(
                    self.data, cur)
                try:
                    persistence = Persistence(pers)
                except ValueError:
                    raise BadLinkError(
                        f"invalid persistence value {pers}") from None
                fault = Fault(owner=by_off[mod_off],
                              severity=self._severity(sev),
                              persistence=persistence,
                              classification=cls, shm_offset=cur)
                by_off[mod_off].faults.append(fault)
                faults.append((cur, fault))
                # walk this fault's detections
                dcur = first_det
                seen_d: set[int] = set()
                while dcur:
                    if dcur in seen_d:
                        raise LinkCycleError(
                            f"detection list revisits offset {dcur}")
                    seen_d.add(dcur)
                    self._dynamic_record(dcur, DET_SIZE, claimed, "detection")
                    (dnxt, det_off, ts, counter, payload,
                     flags) = DET_REC.unpack_from(self.data, dcur)
                    detector = diag_by_off.get(det_off)
                    if detector is None:
                        raise BadLinkError(
                            f"detection at {dcur} references non-detector "
                            f"offset {det_off}")
                    det = FaultDetection(detector=detector, timestamp=ts,
                                         counter=counter, payload=payload,
                                         flags=flags, shm_offset=dcur)
                    fault.detections.append(det)
                    dets.append((dcur, det, fault))
                    dcur = dnxt
                cur = nxt
        if len(faults) != f:
            raise RecordCountError(
                f"walked {len(faults)} faults, header says {f}")
        if len(dets) != fd:
            raise RecordCountError(
                f"walked {len(dets)} detections, header says {fd}")
        hm.faults = [fl for _o, fl in sorted(faults, key=lambda p: p[0])]
        hm.detections = [d for _o, d, _f in sorted(dets, key=lambda p: p[0])]
        for i, fl in enumerate(hm.faults):
            fl.seq = i + 1
        for i, d in enumerate(hm.detections):
            d.seq = len(hm.faults) + i + 1
        hm._seq = len(hm.faults) + len(hm.detections)


def deserialize(data: bytes) -> HealthMap:
    """Parse and fully validate an image; raises ShmError subclasses."""
    return _Reader(data).run()


def validate_image(data: bytes) -> HealthMap:
    """Deserialize and additionally run the structural validator."""
    hm = deserialize(data)
    violations = hm.validate_structure()
    if violations:
        raise StructureInvalidError(violations)
    return hm


# --------------------------------------------------------------------------
# append-only update


@dataclass
class NewDetection:
    detector_id: int
    timestamp: int
    payload: int = 0
    counter: int = 1
    flags: int = 0


@dataclass
class NewFault:
    module_id: int
    severity: Severity
    persistence: Persistence
    classification: int
    detections: list[NewDetection] = field(default_factory=list)


def append_changes(image: bytes, hm: HealthMap) -> bytes:
    """Write back a map that was deserialized from `image` and then grown.

    Only fault/detection additions plus in-place counter/flag/severity/
    persistence adjustments are representable; modules, diag resources and
    dependencies must be untouched. Old record bytes change only where
    list tails were spliced or detection counters/flags (or fault
    severity/persistence after reclassification) moved.
    """
    old_total = len(image)
    for m in hm.modules.values():
        if m.shm_offset is None:
            raise AppendError("cannot append new modules to an image")
    for r in hm.diag_resources.values():
        if r.shm_offset is None:
            raise AppendError("cannot append new diag resources to an image")
    for d in hm.dependencies:
        if d.shm_offset is None:
            raise AppendError("cannot append new dependencies to an image")

    new_records = sorted(
        [f for f in hm.faults if f.shm_offset is None]
        + [d for d in hm.detections if d.shm_offset is None],
        key=lambda rec: rec.seq)
    pos = old_total
    for rec in new_records:
        rec.shm_offset = pos
        pos += FAULT_SIZE if isinstance(rec, Fault) else DET_SIZE
    total = pos

    off = {}
    for group in (hm.modules.values(), hm.diag_resources.values(),
                  hm.dependencies, hm.faults, hm.detections):
        for entity in group:
            off[id(entity)] = entity.shm_offset

    buf = bytearray(image) + bytearray(total - old_total)
    modules = list(hm.modules.values())
    for i, mod in enumerate(modules):
        buf[mod.shm_offset:mod.shm_offset + MODULE_SIZE] = \
            _encode_module(mod, modules, i, off)
    for fault in hm.faults:
        owner_list = fault.owner.faults
        i = owner_list.index(fault)
        buf[fault.shm_offset:fault.shm_offset + FAULT_SIZE] = \
            _encode_fault(fault, _next_in(owner_list, i), off)
    for fault in hm.faults:
        for i, det in enumerate(fault.detections):
            buf[det.shm_offset:det.shm_offset + DET_SIZE] = \
                _encode_detection(det, _next_in(fault.detections, i), off)

    m, r, d, f, fd = _check_counts(hm)
    assert total == image_length(m, r, d, f, fd)
    buf[:HEADER_SIZE] = _pack_header(total, m, r, d, f, fd,
                                     crc32(bytes(buf[HEADER_SIZE:])))
    return bytes(buf)


def append_fault_data(image: bytes,
                      new_faults: Iterable[NewFault] = (),
                      new_detections: Sequence[tuple[tuple[int, int],
                                                     NewDetection]] = ()
                      ) -> bytes:
    """Append fault records/detections to an existing image.

    `new_faults` carry their own detections; `new_detections` attach to an
    existing fault addressed by (module id, classification). The image is
    fully validated first; appending nothing returns the image unchanged.
    """
    hm = deserialize(image)
    for nf in new_faults:
        fault = hm.add_fault(nf.module_id, nf.severity, nf.persistence,
                             nf.classification)
        for nd in nf.detections:
            hm.add_detection(fault, nd.detector_id, nd.timestamp,
                             payload=nd.payload, counter=nd.counter,
                             flags=nd.flags)
    for (module_id, classification), nd in new_detections:
        module = hm.modules.get(module_id)
        if module is None:
            raise UnknownFaultError(f"module {module_id} not found")
        target = None
        for fault in module.faults:
            if fault.classification == classification:
                target = fault
        if target is None:
            raise UnknownFaultError(
                f"no fault with classification {classification} "
                f"on module {module_id}")
        hm.add_detection(target, nd.detector_id, nd.timestamp,
                         payload=nd.payload, counter=nd.counter,
                         flags=nd.flags)
    return append_changes(image, hm)
