"""Tests for the command-line harness: simulate, estimate, study, summarize."""

import csv
import json

import numpy as np
import pytest

from copuladr import cli
from copuladr.cli import RESULT_COLUMNS, main, parse_study_config


def read_rows(path):
    with open(path, newline="") as fh:
        return list(csv.DictReader(fh))


def write_config(path, **kv):
    path.write_text("".join(f"{k} = {v}\n" for k, v in kv.items()))
    return str(path)


class TestSimulate:
    def test_shape_contract(self, tmp_path, capsys):
        out = tmp_path / "d.csv"
        rc = main(["simulate", "--n", "150", "--p", "5", "--d", "1", "--alpha", "0.5",
                   "--copula", "gaussian", "--seed", "1", "--out", str(out)])
        assert rc == 0
        lines = out.read_text().splitlines()
        assert len(lines) == 151
        header = lines[0].split(",")
        assert header == ["x1", "x2", "x3", "x4", "x5", "y1", "y2", "u1", "u2"]

    def test_byte_identical_reruns(self, tmp_path):
        a, b = tmp_path / "a.csv", tmp_path / "b.csv"
        args = ["simulate", "--n", "100", "--p", "5", "--d", "2", "--alpha", "1.5",
                "--copula", "clayton", "--seed", "7"]
        assert main(args + ["--out", str(a)]) == 0
        assert main(args + ["--out", str(b)]) == 0
        assert a.read_bytes() == b.read_bytes()

    def test_invalid_dimensions_usage_error(self, tmp_path, capsys):
        rc = main(["simulate", "--n", "50", "--p", "2", "--d", "3", "--alpha", "0.5",
                   "--out", str(tmp_path / "x.csv")])
        assert rc == 1

    def test_round_trip_exact(self, tmp_path):
        from copuladr.data import read_dataset_csv, write_dataset_csv

        out = tmp_path / "d.csv"
        main(["simulate", "--n", "60", "--p", "5", "--d", "1", "--alpha", "0.2",
              "--seed", "3", "--out", str(out)])
        ds = read_dataset_csv(out)
        again = tmp_path / "e.csv"
        write_dataset_csv(again, ds)
        assert out.read_bytes() == again.read_bytes()


@pytest.fixture(scope="module")
def dataset_file(tmp_path_factory):
    path = tmp_path_factory.mktemp("est") / "data.csv"
    assert main(["simulate", "--n", "400", "--p", "5", "--d", "1", "--alpha", "1.5",
                 "--seed", "11", "--out", str(path)]) == 0
    return path


class TestEstimate:
    def test_report_error_in_range(self, dataset_file, capsys):
        rc = main(["estimate", "--data", str(dataset_file), "--method", "opga",
                   "--measure", "spearman", "--margins", "known", "--json"])
        assert rc == 0
        record = json.loads(capsys.readouterr().out)
        assert record["failed"] is False
        assert 0.0 <= record["error"] <= 1.0
        assert len(record["basis"]) == 5

    def test_iteration_counts(self, dataset_file, capsys):
        rc = main(["estimate", "--data", str(dataset_file), "--method", "opg1", "--json"])
        assert rc == 0
        r1 = json.loads(capsys.readouterr().out)
        rc = main(["estimate", "--data", str(dataset_file), "--method", "opga", "--json"])
        assert rc == 0
        ra = json.loads(capsys.readouterr().out)
        assert r1["iterations"] == 1
        assert ra["iterations"] > 1

    def test_known_margins_need_stored_uniforms(self, tmp_path, dataset_file):
        rows = open(dataset_file).read().splitlines()
        header = rows[0].split(",")[:-2]
        stripped = tmp_path / "nou.csv"
        with open(stripped, "w") as fh:
            fh.write(",".join(header) + "\n")
            for line in rows[1:]:
                fh.write(",".join(line.split(",")[:-2]) + "\n")
        rc = main(["estimate", "--data", str(stripped), "--margins", "known"])
        assert rc == 2

    def test_human_report(self, dataset_file, capsys):
        rc = main(["estimate", "--data", str(dataset_file), "--method", "opga"])
        assert rc == 0
        text = capsys.readouterr().out
        assert "eigenvalues:" in text
        assert "error=" in text

    def test_missing_file_is_data_error(self, tmp_path):
        assert main(["estimate", "--data", str(tmp_path / "absent.csv")]) == 2


class TestStudy:
    def test_row_cardinality(self, tmp_path):
        out = tmp_path / "res.csv"
        cfg = write_config(
            tmp_path / "s.cfg", n="150,400", p=5, d=1, alpha=1.5,
            method="opg1,opga", replications=3, master_seed=5, out=out,
        )
        assert main(["study", "--config", cfg]) == 0
        rows = read_rows(out)
        assert len(rows) == 12  # 2 scenarios x 2 methods x 3 replicates
        assert tuple(rows[0].keys()) == RESULT_COLUMNS

    def test_rerun_adds_no_rows_and_is_deterministic(self, tmp_path, capsys):
        out = tmp_path / "res.csv"
        cfg = write_config(
            tmp_path / "s.cfg", n="150", method="opg1,opga",
            replications=3, master_seed=5, out=out,
        )
        assert main(["study", "--config", cfg]) == 0
        first = out.read_text()
        assert main(["study", "--config", cfg]) == 0
        assert "(0 new)" in capsys.readouterr().out
        second = out.read_text()

        def strip_runtime(text):
            rows = [r.split(",") for r in text.splitlines()]
            idx = RESULT_COLUMNS.index("runtime_seconds")
            return [r[:idx] + r[idx + 1:] for r in rows]

        assert strip_runtime(first) == strip_runtime(second)

    def test_resume_after_interruption(self, tmp_path):
        out = tmp_path / "res.csv"
        kw = dict(n="150", method="opg1,opga", replications=4, master_seed=9, out=out)
        cfg = write_config(tmp_path / "s.cfg", **kw)
        assert main(["study", "--config", cfg]) == 0
        full = out.read_text().splitlines()
        # simulate an interruption: keep the header, 3 complete rows, and a torn line
        with open(out, "w") as fh:
            fh.write("\n".join(full[:4]) + "\n150,5,1,1.5,gauss")
        assert main(["study", "--config", cfg]) == 0
        resumed = out.read_text().splitlines()
        idx = RESULT_COLUMNS.index("runtime_seconds")

        def strip(lines):
            return [",".join(r.split(",")[:idx] + r.split(",")[idx + 1:]) for r in lines]

        assert strip(resumed) == strip(full)

    def test_serial_matches_parallel(self, tmp_path):
        kw = dict(n="150", method="opg1", replications=4, master_seed=3)
        out1, out2 = tmp_path / "r1.csv", tmp_path / "r2.csv"
        cfg1 = write_config(tmp_path / "c1.cfg", out=out1, **kw)
        cfg2 = write_config(tmp_path / "c2.cfg", out=out2, **kw)
        assert main(["study", "--config", cfg1, "--workers", "1"]) == 0
        assert main(["study", "--config", cfg2, "--workers", "2"]) == 0
        idx = RESULT_COLUMNS.index("runtime_seconds")

        def strip(path):
            return [
                ",".join(r.split(",")[:idx] + r.split(",")[idx + 1:])
                for r in path.read_text().splitlines()
            ]

        assert strip(out1) == strip(out2)

    def test_smoke_grid_error_decreases_with_n(self, tmp_path):
        out = tmp_path / "smoke.csv"
        cfg = write_config(
            tmp_path / "smoke.cfg", n="150,400", p=5, d=1, alpha=1.5,
            copula="gaussian", measure="spearman", margins="known",
            method="opg1,opga", replications=10, master_seed=21, out=out,
        )
        assert main(["study", "--config", cfg]) == 0
        rows = read_rows(out)
        by_n = {}
        for r in rows:
            if r["method"] == "opga":
                by_n.setdefault(r["n"], []).append(float(r["error"]))
        assert np.mean(by_n["400"]) < np.mean(by_n["150"])

    def test_bad_config_key_usage_error(self, tmp_path):
        cfg = write_config(tmp_path / "bad.cfg", bandwidth="0.5", out=tmp_path / "o.csv")
        assert main(["study", "--config", cfg]) == 1

    def test_missing_out_usage_error(self, tmp_path):
        cfg = write_config(tmp_path / "bad.cfg", n="150")
        assert main(["study", "--config", cfg]) == 1

    def test_missing_config_data_error(self, tmp_path):
        assert main(["study", "--config", str(tmp_path / "absent.cfg")]) == 2

    def test_config_parsing(self, tmp_path):
        cfg_path = tmp_path / "c.cfg"
        cfg_path.write_text(
            "# comment line\n"
            "n = 150, 400\n"
            "alpha = 0.2,1.5\n"
            "method = opga\n"
            "trim_q = 0.1\n"
            "h0 = 0.6\n"
            "out = res.csv\n"
        )
        cfg = parse_study_config(str(cfg_path))
        assert cfg.n == [150, 400]
        assert cfg.alpha == [0.2, 1.5]
        assert cfg.trim_q == 0.1
        assert cfg.h0 == 0.6
        assert cfg.replications == 100


def write_results(path, rows):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(RESULT_COLUMNS)
        for r in rows:
            w.writerow(r)


def fake_row(n="150", method="opga", replicate="0", error="0.5", runtime="0.1"):
    return [n, "5", "1", "1.5", "gaussian", "spearman", "known", method,
            replicate, "123", error, runtime, "3", "0.3", ""]


class TestSummarize:
    def test_grouping_contract(self, tmp_path, capsys):
        res = tmp_path / "r.csv"
        write_results(res, [
            fake_row(n="150", method="opg1", replicate="0", error="0.4"),
            fake_row(n="150", method="opg1", replicate="1", error="0.6"),
            fake_row(n="150", method="opga", replicate="0", error="0.2"),
            fake_row(n="400", method="opga", replicate="0", error="0.1"),
        ])
        assert main(["summarize", "--results", str(res), "--group-by", "n,method"]) == 0
        out = capsys.readouterr().out.splitlines()
        assert out[0] == "n,method,count,failures,mean_error,se_error,mean_runtime"
        assert len(out) == 4  # three groups
        cells = out[1].split(",")
        assert cells[:2] == ["150", "opg1"]
        assert float(cells[4]) == pytest.approx(0.5)
        assert float(cells[5]) == pytest.approx(np.std([0.4, 0.6], ddof=1) / np.sqrt(2))

    def test_all_failed_group(self, tmp_path, capsys):
        res = tmp_path / "r.csv"
        write_results(res, [
            fake_row(replicate="0", error="NA"),
            fake_row(replicate="1", error="NA"),
        ])
        assert main(["summarize", "--results", str(res), "--group-by", "n"]) == 0
        out = capsys.readouterr().out.splitlines()
        cells = out[1].split(",")
        assert cells[out[0].split(",").index("mean_error")] == "NA"
        assert cells[out[0].split(",").index("failures")] == "2"

    def test_loglog_columns(self, tmp_path, capsys):
        res = tmp_path / "r.csv"
        write_results(res, [
            fake_row(n="400", error="0.4"),
            fake_row(n="1000", replicate="1", error="0.2"),
        ])
        assert main(["summarize", "--results", str(res), "--group-by", "n", "--loglog"]) == 0
        out = capsys.readouterr().out.splitlines()
        header = out[0].split(",")
        assert header[-2:] == ["ln_n", "ln_mean_error"]
        first = out[1].split(",")
        assert float(first[header.index("ln_n")]) == pytest.approx(np.log(400))
        assert float(first[header.index("ln_mean_error")]) == pytest.approx(np.log(0.4))

    def test_unknown_group_key(self, tmp_path):
        res = tmp_path / "r.csv"
        write_results(res, [fake_row()])
        assert main(["summarize", "--results", str(res), "--group-by", "bananas"]) == 1

    def test_loglog_requires_n(self, tmp_path):
        res = tmp_path / "r.csv"
        write_results(res, [fake_row()])
        assert main(["summarize", "--results", str(res), "--group-by", "method", "--loglog"]) == 1

    def test_summary_matches_independent_recomputation(self, tmp_path, capsys):
        rng = np.random.default_rng(0)
        rows = [fake_row(replicate=str(i), error=repr(float(e)))
                for i, e in enumerate(rng.random(20))]
        res = tmp_path / "r.csv"
        write_results(res, rows)
        assert main(["summarize", "--results", str(res), "--group-by", "n"]) == 0
        out = capsys.readouterr().out.splitlines()
        cells = dict(zip(out[0].split(","), out[1].split(",")))
        errors = [float(r[10]) for r in rows]
        assert float(cells["mean_error"]) == pytest.approx(np.mean(errors), abs=1e-12)
        assert int(cells["count"]) == 20

    def test_output_file(self, tmp_path):
        res = tmp_path / "r.csv"
        write_results(res, [fake_row()])
        dest = tmp_path / "summary.csv"
        assert main(["summarize", "--results", str(res), "--group-by", "n",
                     "--out", str(dest)]) == 0
        assert dest.exists() and dest.read_text().startswith("n,count")


class TestUsageErrors:
    def test_unknown_subcommand(self):
        assert main(["frobnicate"]) == 1

    def test_bad_flag_value(self, tmp_path):
        assert main(["simulate", "--n", "abc", "--p", "5", "--d", "1",
                     "--alpha", "0.5", "--out", str(tmp_path / "x.csv")]) == 1
