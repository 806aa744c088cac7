#!/usr/bin/env python3
"""Library-level walk through the same flow as cli_tour.sh: build a map
from XML, feed detections through the fault manager, render the resource
map, compute affinity masks and round-trip the binary image."""

from pathlib import Path

from healthmap import (
    DetectionReport,
    Severity,
    TaskRequirement,
    compile_xml,
    compute_affinity,
    deserialize,
    estimate,
    format_masks,
    init_resource_map,
    render_table,
    report_detection,
    serialize,
)

DATA = Path(__file__).parent / "data"


def main() -> None:
    image, sidecar = compile_xml((DATA / "cpu.xml").read_text())
    print(f"compiled image: {len(image)} bytes")

    hm = deserialize(image)
    fpu_instrument = 12  # CPU.C0.FPU's instrument (see cpu.xml)
    fault, created = report_detection(
        hm, DetectionReport(fpu_instrument, Severity.HIGH,
                            classification=1, timestamp=1000))
    print(f"{'created' if created else 'updated'} fault on module "
          f"{sidecar.name_for_id(fault.owner.id)}: "
          f"{fault.severity.name}/{fault.persistence.name}")

    rm = init_resource_map(hm, maintenance=[sidecar.id_for_name("CPU.C3")])
    print()
    print(render_table(rm, sidecar))

    print()
    masks = compute_affinity(rm, sidecar, [
        TaskRequirement("fpu_task", ["FPU"]),
        TaskRequirement("any_core"),
    ])
    print(format_masks(masks))

    updated = serialize(hm)
    assert deserialize(updated).equivalent(hm)
    print()
    print(f"round-tripped updated image: {len(updated)} bytes")
    print()
    print(estimate(8).render())


if __name__ == "__main__":
    main()
