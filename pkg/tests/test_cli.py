"""Command-line contract: exit codes, file formats, determinism."""

import json

from orthomate import parse_rectangle, verify_latin, verify_orthogonal
from orthomate.cli import main


def read(path):
    with open(path) as fh:
        return fh.read()


def strip_wall_time(csv_text):
    lines = csv_text.strip().splitlines()
    out = []
    for line in lines:
        if line.startswith("#") or line.startswith("trial"):
            out.append(line)
        else:
            out.append(line.rsplit(",", 1)[0])
    return "\n".join(out)


class TestGen:
    def test_writes_valid_rectangle(self, tmp_path):
        out = tmp_path / "J.txt"
        assert main(["gen", "--n", "8", "--m", "4", "--seed", "1",
                     "--out", str(out)]) == 0
        rect = parse_rectangle(read(out))
        assert rect.shape.n == 8 and rect.shape.m == 4
        assert verify_latin(rect).ok

    def test_m_exceeds_n_is_usage_error(self, tmp_path):
        assert main(["gen", "--n", "8", "--m", "9",
                     "--out", str(tmp_path / "x.txt")]) == 1

    def test_m_zero_is_usage_error(self, tmp_path):
        assert main(["gen", "--n", "8", "--m", "0",
                     "--out", str(tmp_path / "x.txt")]) == 1

    def test_byte_determinism(self, tmp_path):
        a, b = tmp_path / "a.txt", tmp_path / "b.txt"
        for p in (a, b):
            assert main(["gen", "--n", "9", "--m", "5", "--seed", "7",
                         "--out", str(p)]) == 0
        assert read(a) == read(b)


class TestMate:
    def test_guided_single_row(self, tmp_path):
        jp, lp = tmp_path / "J.txt", tmp_path / "L.txt"
        main(["gen", "--n", "6", "--m", "1", "--seed", "0", "--out", str(jp)])
        assert main(["mate", "--in", str(jp), "--out", str(lp)]) == 0
        J = parse_rectangle(read(jp))
        L = parse_rectangle(read(lp))
        assert verify_orthogonal(L, J).ok

    def test_backtrack_order2_exhausted(self, tmp_path, capsys):
        jp = tmp_path / "J.txt"
        jp.write_text("0 1\n1 0\n")
        code = main(["mate", "--in", str(jp), "--algorithm", "backtrack"])
        assert code == 2
        blob = json.loads(capsys.readouterr().out)
        assert blob["outcome"] == "exhausted"

    def test_hall_quarter_regime(self, tmp_path):
        jp, lp = tmp_path / "J.txt", tmp_path / "L.txt"
        main(["gen", "--n", "16", "--m", "4", "--seed", "3", "--out", str(jp)])
        assert main(["mate", "--in", str(jp), "--algorithm", "hall",
                     "--out", str(lp)]) == 0
        assert verify_orthogonal(parse_rectangle(read(lp)),
                                 parse_rectangle(read(jp))).ok

    def test_missing_input_io_error(self, tmp_path):
        assert main(["mate", "--in", str(tmp_path / "nope.txt")]) == 1

    def test_trajectory_csv(self, tmp_path):
        jp, dg = tmp_path / "J.txt", tmp_path / "traj.csv"
        main(["gen", "--n", "8", "--m", "4", "--seed", "2", "--out", str(jp)])
        main(["mate", "--in", str(jp), "--seed", "4", "--out",
              str(tmp_path / "L.txt"), "--diag", str(dg)])
        text = read(dg)
        assert text.startswith("# orthomate-trajectory-v1")

    def test_guided_failure_report(self, tmp_path, capsys):
        jp = tmp_path / "J.txt"
        jp.write_text("0 1\n1 0\n")
        code = main(["mate", "--in", str(jp), "--algorithm", "guided"])
        assert code == 2
        blob = json.loads(capsys.readouterr().out)
        assert blob["outcome"] == "gamma_exit"
        assert blob["violations"]

    def test_config_file(self, tmp_path):
        jp, lp = tmp_path / "J.txt", tmp_path / "L.txt"
        cfgp = tmp_path / "cfg.json"
        cfgp.write_text(json.dumps({"eta_max": 8.0, "eta_policy": "doubling"}))
        main(["gen", "--n", "12", "--m", "3", "--seed", "1", "--out", str(jp)])
        assert main(["mate", "--in", str(jp), "--config", str(cfgp),
                     "--out", str(lp)]) == 0

    def test_exact_mode(self, tmp_path):
        jp, lp = tmp_path / "J.txt", tmp_path / "L.txt"
        main(["gen", "--n", "8", "--m", "2", "--seed", "3", "--out", str(jp)])
        assert main(["mate", "--in", str(jp), "--exact", "--seed", "1",
                     "--out", str(lp)]) == 0
        assert verify_orthogonal(parse_rectangle(read(lp)),
                                 parse_rectangle(read(jp))).ok


class TestVerify:
    def test_valid_pair(self, tmp_path):
        jp, lp = tmp_path / "J.txt", tmp_path / "L.txt"
        main(["gen", "--n", "12", "--m", "3", "--seed", "5", "--out", str(jp)])
        main(["mate", "--in", str(jp), "--algorithm", "hall", "--seed", "1",
              "--out", str(lp)])
        assert main(["verify", "--j", str(jp), "--l", str(lp)]) == 0

    def test_self_pair_fails(self, tmp_path, capsys):
        jp = tmp_path / "J.txt"
        jp.write_text("0 1 2\n1 2 0\n2 0 1\n")
        assert main(["verify", "--j", str(jp), "--l", str(jp)]) == 2
        assert "occurs" in capsys.readouterr().out

    def test_shape_mismatch(self, tmp_path, capsys):
        jp, lp = tmp_path / "J.txt", tmp_path / "L.txt"
        jp.write_text("0 1 2\n1 2 0\n")
        lp.write_text("0 1\n1 0\n")
        assert main(["verify", "--j", str(jp), "--l", str(lp)]) == 2
        assert "ShapeMismatch" in capsys.readouterr().out

    def test_unparsable_is_io_error(self, tmp_path):
        jp = tmp_path / "J.txt"
        jp.write_text("0 x\n")
        assert main(["verify", "--j", str(jp), "--l", str(jp)]) == 1


class TestTrials:
    def test_csv_determinism(self, tmp_path, capsys):
        a, b = tmp_path / "a.csv", tmp_path / "b.csv"
        args = ["trials", "--n", "12", "--epsilon", "0.75", "--count", "6",
                "--seed", "3"]
        assert main(args + ["--out", str(a)]) == 0
        assert main(args + ["--out", str(b)]) == 0
        assert strip_wall_time(read(a)) == strip_wall_time(read(b))
        assert "success fraction" in capsys.readouterr().out

    def test_parallel_matches_serial(self, tmp_path):
        a, b = tmp_path / "a.csv", tmp_path / "b.csv"
        args = ["trials", "--n", "10", "--epsilon", "0.7", "--count", "4",
                "--seed", "1"]
        assert main(args + ["--jobs", "1", "--out", str(a)]) == 0
        assert main(args + ["--jobs", "2", "--out", str(b)]) == 0
        assert strip_wall_time(read(a)) == strip_wall_time(read(b))

    def test_count_zero_usage_error(self, tmp_path):
        assert main(["trials", "--n", "8", "--count", "0",
                     "--out", str(tmp_path / "x.csv")]) == 1

    def test_schema_header(self, tmp_path):
        out = tmp_path / "t.csv"
        main(["trials", "--n", "8", "--epsilon", "0.75", "--count", "2",
              "--seed", "0", "--out", str(out)])
        lines = read(out).splitlines()
        assert lines[0] == "# orthomate-trials-v1"
        assert lines[1].startswith("trial,seed,n,m,epsilon,algorithm,outcome")

    def test_hall_algorithm(self, tmp_path, capsys):
        out = tmp_path / "t.csv"
        assert main(["trials", "--n", "16", "--epsilon", "0.75", "--count",
                     "5", "--algorithm", "hall", "--out", str(out)]) == 0
        assert "1.0000" in capsys.readouterr().out

    def test_guided_quarter_regime_fraction(self, tmp_path, capsys):
        out = tmp_path / "t.csv"
        assert main(["trials", "--n", "16", "--epsilon", "0.75", "--count",
                     "20", "--seed", "0", "--out", str(out)]) == 0
        assert "1.0000" in capsys.readouterr().out


class TestDiag:
    def test_writes_csv_and_summary(self, tmp_path, capsys):
        out = tmp_path / "traj.csv"
        assert main(["diag", "--n", "12", "--epsilon", "0.5", "--seed", "2",
                     "--out", str(out)]) == 0
        blob = json.loads(capsys.readouterr().out)
        assert blob["n"] == 12
        assert read(out).startswith("# orthomate-trajectory-v1")


class TestUsage:
    def test_unknown_command(self):
        assert main(["frobnicate"]) == 1

    def test_no_command(self):
        assert main([]) == 1
