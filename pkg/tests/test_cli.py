import pytest

from healthmap.cli import main

from conftest import DATA_DIR

TABLE1_RM = """\
Module name  Worst severity  Worst persistence  Status
CPU          LOW             TRANSIENT          PROPAGATED FAULT
CPU.C0       LOW             TRANSIENT          PROPAGATED FAULT
CPU.C0.FPU   HIGH            TRANSIENT          OWN FAULT
CPU.C1       ZERO            ZERO               AVAILABLE
CPU.C1.FPU   ZERO            ZERO               AVAILABLE
CPU.C2       ZERO            ZERO               AVAILABLE
CPU.C2.FPU   ZERO            ZERO               AVAILABLE
CPU.C3       ZERO            ZERO               MAINTENANCE
CPU.C3.FPU   ZERO            ZERO               MAINTENANCE
"""


@pytest.fixture
def compiled(tmp_path):
    shm = tmp_path / "table1.shm"
    sym = tmp_path / "table1.sym"
    rc = main(["compile", str(DATA_DIR / "table1.xml"),
               "-o", str(shm), "--sym", str(sym)])
    assert rc == 0
    return shm, sym


def test_compile_validate_round_trip(compiled, capsys):
    shm, _sym = compiled
    assert main(["validate", str(shm)]) == 0
    out = capsys.readouterr().out
    assert "valid (9 modules, 0 faults, 0 detections)" in out


def test_inject_then_rm_prints_reference_table(compiled, capsys):
    shm, sym = compiled
    assert main(["inject", str(shm), "--detector", "12", "--sev", "HIGH",
                 "--class", "1", "--t", "1000"]) == 0
    capsys.readouterr()
    assert main(["rm", str(shm), "--sym", str(sym),
                 "--maintenance", "CPU.C3"]) == 0
    assert capsys.readouterr().out == TABLE1_RM


def test_inject_is_append_only(compiled):
    shm, _sym = compiled
    before = shm.read_bytes()
    main(["inject", str(shm), "--detector", "12", "--sev", "HIGH",
          "--class", "1", "--t", "1000"])
    after = shm.read_bytes()
    assert len(after) == len(before) + 37
    assert after[32:len(before) - 4].startswith(before[32:36])


def test_affinity_masks(compiled, tmp_path, capsys):
    shm, sym = compiled
    main(["inject", str(shm), "--detector", "12", "--sev", "HIGH",
          "--class", "1", "--t", "0"])
    tasks = tmp_path / "tasks.txt"
    tasks.write_text("task fpu_task needs=FPU\n"
                     "task any maxSev=HIGH maxPers=PERMANENT\n")
    capsys.readouterr()
    assert main(["affinity", str(shm), "--tasks", str(tasks),
                 "--sym", str(sym), "--maintenance", "CPU.C3"]) == 0
    assert capsys.readouterr().out == "fpu_task 0x6\nany 0x7\n"


def test_dump_lists_modules_and_faults(compiled, capsys):
    shm, sym = compiled
    main(["inject", str(shm), "--detector", "12", "--sev", "LOW",
          "--class", "3", "--t", "42", "--payload", "0xbeef"])
    capsys.readouterr()
    assert main(["dump", str(shm), "--sym", str(sym)]) == 0
    out = capsys.readouterr().out
    assert "module 12 name=CPU.C0.FPU parent=10 crit=LOW" in out
    assert "fault class=3 sev=LOW pers=TRANSIENT" in out
    assert "detection detector=12 t=42 count=1 payload=0xbeef" in out


def test_prune_merges_duplicates(compiled, capsys):
    shm, _sym = compiled
    for t in (0, 100, 200):
        main(["inject", str(shm), "--detector", "12", "--sev", "LOW",
              "--class", "1", "--t", str(t)])
    size_before = len(shm.read_bytes())
    capsys.readouterr()
    assert main(["prune", str(shm)]) == 0
    out = capsys.readouterr().out
    assert "merged 0 records" in out  # merge window already collapsed them
    assert main(["validate", str(shm)]) == 0
    assert len(shm.read_bytes()) == size_before


def test_estimate_output(capsys):
    assert main(["estimate", "--cores", "8"]) == 0
    out = capsys.readouterr().out
    assert "Total 82418" in out
    assert "RM 138 x 7 = 966 bytes" in out


def test_simulate_writes_logs(tmp_path, table1_xml):
    (tmp_path / "child.xml").write_text(table1_xml)
    (tmp_path / "parent.xml").write_text(
        '<healthmap version="1">'
        '<module id="1" name="BOARD" criticality="ZERO">'
        '<module id="2" name="NODE1" criticality="LOW">'
        '<instrument id="5" kind="7"/></module></module></healthmap>')
    (tmp_path / "parent.map").write_text("downlink 1 5\nchild 1 12 -> 2\n")
    (tmp_path / "run.scn").write_text(
        "duration 10000\n"
        "node 0 hm=parent.xml map=parent.map period=10000 parent=none\n"
        "node 1 hm=child.xml map=none period=5000 parent=0\n"
        "at 1000 node 1 detect 12 sev=HIGH class=1\n")
    out_dir = tmp_path / "out"
    assert main(["simulate", str(tmp_path / "run.scn"),
                 "--out", str(out_dir)]) == 0
    messages = (out_dir / "messages.log").read_text()
    assert messages.count("\n") == 2
    assert "node 1 -> 0" in messages
    assert (out_dir / "rm.log").read_text().count("\n") == 3


def test_corrupt_image_exits_1(tmp_path, capsys):
    bad = tmp_path / "bad.shm"
    bad.write_bytes(b"\x00" * 64)
    assert main(["validate", str(bad)]) == 1
    assert "error:" in capsys.readouterr().err


def test_missing_file_exits_1(tmp_path, capsys):
    assert main(["validate", str(tmp_path / "nope.shm")]) == 1
    assert "error:" in capsys.readouterr().err


def test_usage_error_exits_2():
    with pytest.raises(SystemExit) as exc:
        main(["inject"])  # missing required arguments
    assert exc.value.code == 2


def test_unknown_maintenance_name_exits_1(compiled, capsys):
    shm, sym = compiled
    assert main(["rm", str(shm), "--sym", str(sym),
                 "--maintenance", "GPU"]) == 1
    assert "unknown module name" in capsys.readouterr().err
