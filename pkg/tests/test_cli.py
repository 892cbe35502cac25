import csv
import json

import numpy as np
import pytest

from bitprobe import formats
from bitprobe.adversary import planted_cycles_scheme
from bitprobe.cli import main, parse_set, UsageError
from bitprobe.core import query
from bitprobe.report import FIELDS
from bitprobe.schemes import build, store
from bitprobe.twoprobe import planted_unsat_scheme


@pytest.fixture
def run(capsys):
    def _run(*argv):
        code = main([str(a) for a in argv])
        out = capsys.readouterr()
        return code, out.out, out.err
    return _run


class TestParseSet:
    def test_values(self):
        assert parse_set("3,7,19") == [3, 7, 19]
        assert parse_set(" ") == []

    @pytest.mark.parametrize("text", ["1,1", "a,b", "1,,2"])
    def test_rejected(self, text):
        with pytest.raises(UsageError):
            parse_set(text)


class TestGen:
    def test_two_probe_header(self, run, tmp_path):
        path = tmp_path / "two.bps"
        code, out, _ = run("gen", "--kind", "two", "--m", 200, "--n", 2, "--seed", 1, "-o", path)
        assert code == 0
        header = formats.read_header(path.read_bytes(), formats.SCHEME_MAGIC)
        assert header.total_bits == 3 * header.s and header.seed == 1
        assert f"total_bits={header.total_bits}" in out

    def test_fallback_flag(self, run, tmp_path):
        path = tmp_path / "fb.bps"
        assert run("gen", "--kind", "two", "--m", 200, "--n", 2, "--fallback", "-o", path)[0] == 0
        assert formats.load_scheme(path.read_bytes()).params.kind.label == "charvec"

    def test_usage_errors(self, run, tmp_path):
        out = tmp_path / "x.bps"
        assert run("gen", "--kind", "bogus", "--m", 10, "--n", 1, "-o", out)[0] == 2
        assert run("gen", "--kind", "nonadaptive", "--m", 80, "--n", 2, "-o", out)[0] == 2
        assert run("gen", "--kind", "two", "--m", 10, "--n", 20, "-o", out)[0] == 2
        assert run()[0] == 2

    def test_construction_failure(self, run, tmp_path):
        code, _, err = run("gen", "--kind", "adaptive", "--m", 80, "--n", 2, "--t", 5, "-o", tmp_path / "a.bps")
        assert code == 3 and "construction failed" in err

    def test_same_seed_same_file(self, run, tmp_path):
        a, b = tmp_path / "a.bps", tmp_path / "b.bps"
        for p in (a, b):
            run("gen", "--kind", "three", "--m", 60, "--n", 2, "--seed", 5, "--s-override", 24, "-o", p)
        assert a.read_bytes() == b.read_bytes()


class TestStoreQuery:
    def test_round_trip_matches_library(self, run, tmp_path):
        sch, mem = tmp_path / "s.bps", tmp_path / "m.bpm"
        assert run("gen", "--kind", "nonadaptive", "--m", 80, "--n", 2, "--t", 5, "--seed", 9,
                   "--s-override", 30, "-o", sch)[0] == 0
        assert run("store", "-s", sch, "--set", "3,7", "-o", mem)[0] == 0
        lib_scheme = build("nonadaptive", 80, 2, 5, 9, s_override=30)
        lib_mem = store(lib_scheme, [3, 7])
        file_mem, _ = formats.load_memory(mem.read_bytes())
        assert file_mem == lib_mem
        for u in (3, 7, 8, 79):
            code, out, _ = run("query", "-s", sch, "-d", mem, "-u", u)
            res = query(lib_scheme, lib_mem, u)
            lines = out.splitlines()
            assert code == 0
            assert lines[0] == ("Yes" if res.answer else "No")
            assert lines[1] == "trace: " + " ".join(f"{a}={b}" for a, b in res.trace)

    def test_duplicates_rejected(self, run, tmp_path):
        sch = tmp_path / "c.bps"
        run("gen", "--kind", "charvec", "--m", 10, "--n", 3, "-o", sch)
        assert run("store", "-s", sch, "--set", "1,1", "-o", tmp_path / "m.bpm")[0] == 2
        assert run("store", "-s", sch, "--set", "1,2,3,4", "-o", tmp_path / "m.bpm")[0] == 2

    def test_memory_for_other_scheme(self, run, tmp_path):
        a, b, mem = tmp_path / "a.bps", tmp_path / "b.bps", tmp_path / "m.bpm"
        run("gen", "--kind", "charvec", "--m", 10, "--n", 3, "-o", a)
        run("gen", "--kind", "charvec", "--m", 12, "--n", 3, "-o", b)
        run("store", "-s", a, "--set", "1", "-o", mem)
        assert run("query", "-s", b, "-d", mem, "-u", 1)[0] == 2
        assert run("query", "-s", a, "-d", mem, "-u", 10)[0] == 2

    def test_missing_or_corrupt_file(self, run, tmp_path):
        bad = tmp_path / "bad.bps"
        bad.write_bytes(b"nope")
        assert run("verify", "-s", tmp_path / "missing.bps")[0] == 2
        assert run("verify", "-s", bad)[0] == 2

    def test_store_failure_exit_code(self, run, tmp_path):
        scheme, S = planted_unsat_scheme()
        path = tmp_path / "unsat.bps"
        path.write_bytes(formats.dump_scheme(scheme))
        code, _, err = run("store", "-s", path, "--set", ",".join(map(str, S)), "-o", tmp_path / "m.bpm")
        assert code == 1 and "Unsatisfiable" in err


class TestVerify:
    def test_sampled(self, run, tmp_path):
        sch = tmp_path / "t.bps"
        run("gen", "--kind", "two", "--m", 200, "--n", 2, "--seed", 1, "-o", sch)
        assert run("verify", "-s", sch, "--samples", 100)[0] == 0

    def test_exhaustive_small(self, run, tmp_path):
        sch = tmp_path / "t.bps"
        run("gen", "--kind", "three", "--m", 60, "--n", 2, "--seed", 5, "--s-override", 24, "-o", sch)
        code, out, _ = run("verify", "-s", sch, "--exhaustive")
        assert code == 0 and "1831" in out

    def test_failure_exit_code(self, run, tmp_path):
        scheme, _ = planted_unsat_scheme()
        path = tmp_path / "unsat.bps"
        path.write_bytes(formats.dump_scheme(scheme))
        assert run("verify", "-s", path, "--exhaustive")[0] == 1

    @pytest.mark.slow
    def test_charvec_exhaustive(self, run, tmp_path):
        sch = tmp_path / "c.bps"
        assert run("gen", "--kind", "charvec", "--m", 100, "--n", 5, "-o", sch)[0] == 0
        assert run("verify", "-s", sch, "--exhaustive")[0] == 0


class TestAttack:
    def test_planted_pair_found(self, run, tmp_path):
        scheme, _ = planted_cycles_scheme([2, 3], extra=2)
        path = tmp_path / "p.bps"
        path.write_bytes(formats.dump_scheme(scheme))
        code, out, _ = run("attack", "-s", path, "--n", 6)
        assert code == 1
        report = json.loads(out.split("--- json ---", 1)[1])
        assert report["validation"] == "exhaustive"
        assert not set(report["S"]) & set(report["T"])
        assert {f["bit"] for f in report["forced"]} == {0, 1}
        assert all(f["cell"] == 0 for f in report["forced"])

    def test_charvec_survives(self, run, tmp_path):
        sch = tmp_path / "c.bps"
        run("gen", "--kind", "charvec", "--m", 30, "--n", 4, "-o", sch)
        assert run("attack", "-s", sch)[0] == 0


class TestBench:
    GRID = {"kinds": ["charvec", "two", "nonadaptive"], "m": [80, 120], "n": [2], "t": [5],
            "seeds": [0], "samples": 20, "fallback": False, "s_override": None}

    def _bench(self, run, tmp_path, name, *extra):
        grid = tmp_path / "grid.json"
        grid.write_text(json.dumps(self.GRID))
        out = tmp_path / name
        code, _, err = run("bench", "--grid", grid, "-o", out, "--no-timing", *extra)
        assert code == 0, err
        return out

    def test_deterministic_csv_and_png(self, run, tmp_path):
        a = self._bench(run, tmp_path, "a.csv")
        b = self._bench(run, tmp_path, "b.csv", "--jobs", "2")
        assert a.read_text() == b.read_text()
        assert a.with_suffix(".png").stat().st_size > 0
        rows = list(csv.reader(a.open()))
        assert rows[0] == FIELDS
        assert len(rows) == 1 + 3 * 2
        kinds = [r[0] for r in rows[1:]]
        assert kinds.count("two") == 2 and kinds.count("nonadaptive") == 2
        for r in rows[1:]:
            rec = dict(zip(FIELDS, r))
            assert int(rec["total_bits"]) / int(rec["m"]) == pytest.approx(float(rec["ratio"]), rel=1e-5)
            assert rec["build_seconds"] == ""

    def test_bad_grid(self, run, tmp_path):
        grid = tmp_path / "g.json"
        grid.write_text(json.dumps({"kinds": ["two"], "m": [100], "n": [2], "colour": 1}))
        assert run("bench", "--grid", grid)[0] == 2
        grid.write_text("{not json")
        assert run("bench", "--grid", grid)[0] == 2
