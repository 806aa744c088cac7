"""Shared test helpers: randomized map construction and independent
oracles (bitwise CRC32, exhaustive propagation-path enumeration)."""

from __future__ import annotations

import random

from healthmap import HealthMap, ModuleStatus, Persistence, Severity


def crc32_reference(data: bytes) -> int:
    """Bitwise reflected CRC-32, independent of zlib."""
    crc = 0xFFFFFFFF
    for byte in data:
        crc ^= byte
        for _ in range(8):
            crc = (crc >> 1) ^ (0xEDB88320 if crc & 1 else 0)
    return crc ^ 0xFFFFFFFF


def random_health_map(rng: random.Random, max_modules: int = 12,
                      max_faults: int = 8,
                      with_faults: bool = True) -> HealthMap:
    """A structurally valid random map (forest + resources + fault data)."""
    hm = HealthMap()
    n = rng.randint(1, max_modules)
    ids = rng.sample(range(1, 100_000), n)
    for i, mid in enumerate(ids):
        parent = rng.choice(ids[:i]) if i and rng.random() < 0.9 else None
        hm.add_module(mid, parent, Severity(rng.randint(0, 3)))

    detectors = []
    next_rid = 1
    for mid in ids:
        for _ in range(rng.randint(0, 2)):
            rid = 500_000 + next_rid
            next_rid += 1
            hm.add_diag_resource(rid, mid, rng.randint(0, 255))
            detectors.append(rid)
    if with_faults and not detectors:
        hm.add_diag_resource(500_000, ids[0], 0)
        detectors.append(500_000)

    if n >= 2:
        for _ in range(rng.randint(0, n)):
            provider, dependent = rng.sample(ids, 2)
            hm.add_dependency(provider, dependent,
                              Severity(rng.randint(1, 3)))

    if with_faults:
        for _ in range(rng.randint(0, max_faults)):
            fault = hm.add_fault(rng.choice(ids),
                                 Severity(rng.randint(1, 3)),
                                 Persistence(rng.randint(1, 3)),
                                 rng.randint(0, 255))
            for _ in range(rng.randint(1, 3)):
                hm.add_detection(fault, rng.choice(detectors),
                                 rng.randint(0, 10**9),
                                 payload=rng.getrandbits(32),
                                 counter=rng.randint(1, 5),
                                 flags=rng.getrandbits(1))
    return hm


def oracle_resource_map(hm: HealthMap, maintenance=()):
    """Brute-force summary: enumerate every propagation path explicitly.

    Valid paths climb parent edges (requiring nonzero criticality at each
    stepped-from module, severity capped by it) and may take at most one
    dependency edge (severity capped by the dependency); persistence rides
    along uncapped. Returns {module_id: (severity, persistence, status)}.
    """
    sev = {mid: Severity.ZERO for mid in hm.modules}
    pers = {mid: Persistence.ZERO for mid in hm.modules}

    def contribute(mid, s, p):
        sev[mid] = Severity(max(sev[mid], s))
        pers[mid] = Persistence(max(pers[mid], p))

    for module in hm.modules.values():
        if not module.faults:
            continue
        s0 = Severity(max(f.severity for f in module.faults))
        p0 = Persistence(max(f.persistence for f in module.faults))
        contribute(module.id, s0, p0)
        stack = [(module, s0, False)]
        while stack:
            m, s, dep_used = stack.pop()
            if m.criticality != Severity.ZERO and m.parent is not None:
                capped = Severity(min(s, m.criticality))
                contribute(m.parent.id, capped, p0)
                stack.append((m.parent, capped, dep_used))
            if not dep_used:
                for dep in m.dependencies:
                    capped = Severity(min(s, dep.severity))
                    if capped != Severity.ZERO:
                        contribute(dep.dependent.id, capped, p0)
                        stack.append((dep.dependent, capped, True))

    maintained = set()
    for mid in maintenance:
        maintained.update(hm.subtree_ids(mid))

    result = {}
    for mid, module in hm.modules.items():
        if mid in maintained:
            status = ModuleStatus.MAINTENANCE
        elif module.faults:
            status = ModuleStatus.OWN_FAULT
        elif sev[mid] > Severity.ZERO:
            status = ModuleStatus.PROPAGATED_FAULT
        else:
            status = ModuleStatus.AVAILABLE
        result[mid] = (sev[mid], pers[mid], status)
    return result


def rm_state(rm):
    return {mid: (e.severity, e.persistence, e.status)
            for mid, e in rm.entries.items()}
