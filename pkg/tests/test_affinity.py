import random

import pytest

from healthmap import (
    DetectionReport,
    Persistence,
    Severity,
    TaskRequirement,
    compute_affinity,
    format_masks,
    init_resource_map,
    parse_task_file,
    report_detection,
)
from healthmap.errors import NoCoreIdsError, ScenarioError, UnknownSubmoduleError

from conftest import CPU_C3, FPU_C0_INSTRUMENT


def faulty_rm(table1_map, maintenance=(CPU_C3,)):
    report_detection(table1_map,
                     DetectionReport(FPU_C0_INSTRUMENT, Severity.HIGH, 1, 0))
    return init_resource_map(table1_map, maintenance=maintenance)


def test_fpu_task_excludes_faulty_and_maintenance_cores(table1_map,
                                                        table1_sidecar):
    rm = faulty_rm(table1_map)
    masks = compute_affinity(rm, table1_sidecar, [
        TaskRequirement("fpu_task", ["FPU"]),
    ])
    # core 0 has a broken FPU, core 3 is in maintenance -> 0b0110
    assert masks[0].mask == 0b0110
    assert masks[0].width == 4


def test_task_without_needs_only_checks_core_row(table1_map, table1_sidecar):
    rm = faulty_rm(table1_map)
    masks = compute_affinity(rm, table1_sidecar, [
        TaskRequirement("any"),
    ])
    # core 0 carries only a propagated LOW fault; with zero tolerance it
    # is excluded too
    assert masks[0].mask == 0b0110


def test_vacuous_thresholds_admit_faulty_core(table1_map, table1_sidecar):
    rm = faulty_rm(table1_map)
    masks = compute_affinity(rm, table1_sidecar, [
        TaskRequirement("tolerant", ["FPU"],
                        Severity.HIGH, Persistence.PERMANENT),
    ])
    # maintenance is still excluded regardless of thresholds
    assert masks[0].mask == 0b0111


def test_fault_free_map_gives_all_ones(table1_map, table1_sidecar):
    rm = init_resource_map(table1_map)
    masks = compute_affinity(rm, table1_sidecar, [
        TaskRequirement("a"),
        TaskRequirement("b", ["FPU"]),
    ])
    assert [m.mask for m in masks] == [0b1111, 0b1111]


def test_unknown_submodule_rejected(table1_map, table1_sidecar):
    rm = init_resource_map(table1_map)
    with pytest.raises(UnknownSubmoduleError):
        compute_affinity(rm, table1_sidecar,
                         [TaskRequirement("x", ["GPU"])])


def test_map_without_core_ids_rejected():
    from healthmap import HealthMap, Sidecar
    hm = HealthMap()
    hm.add_module(1)
    sidecar = Sidecar()
    sidecar.add(1, "SOC")
    with pytest.raises(NoCoreIdsError):
        compute_affinity(init_resource_map(hm), sidecar,
                         [TaskRequirement("t")])


def test_threshold_subset_monotonicity(table1_map, table1_sidecar):
    rng = random.Random(12)
    for t in range(40):
        report_detection(table1_map, DetectionReport(
            random.Random(t).choice([1, 10, 20, 30, 40, 12, 22, 32, 42]),
            Severity(rng.randint(1, 3)), rng.randint(0, 3),
            t * 2_000_000))
    rm = init_resource_map(table1_map)
    for _ in range(100):
        sev = Severity(rng.randint(0, 3))
        pers = Persistence(rng.randint(0, 3))
        loose = compute_affinity(rm, table1_sidecar, [
            TaskRequirement("loose", ["FPU"], sev, pers)])[0].mask
        tight_sev = Severity(rng.randint(0, sev))
        tight_pers = Persistence(rng.randint(0, pers))
        tight = compute_affinity(rm, table1_sidecar, [
            TaskRequirement("tight", ["FPU"], tight_sev, tight_pers)])[0].mask
        # tightening tolerances can only clear bits
        assert tight & loose == tight


def test_parse_task_file():
    tasks = parse_task_file(
        "# comment\n"
        "task fpu_task needs=FPU maxSev=LOW maxPers=TRANSIENT\n"
        "\n"
        "task any\n")
    assert tasks == [
        TaskRequirement("fpu_task", ["FPU"], Severity.LOW,
                        Persistence.TRANSIENT),
        TaskRequirement("any"),
    ]


def test_parse_task_file_bad_lines():
    with pytest.raises(ScenarioError):
        parse_task_file("job thing\n")
    with pytest.raises(ScenarioError):
        parse_task_file("task x maxSev=EXTREME\n")


def test_format_masks(table1_map, table1_sidecar):
    rm = faulty_rm(table1_map)
    masks = compute_affinity(rm, table1_sidecar, [
        TaskRequirement("fpu_task", ["FPU"]),
        TaskRequirement("any"),
    ])
    assert format_masks(masks) == "fpu_task 0x6\nany 0x6"
