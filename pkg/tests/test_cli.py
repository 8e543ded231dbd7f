import hashlib
import json

import pytest

from skgkgc import cli
from skgkgc.kg import compute_stats, load_data_dir
from skgkgc.summarize import split_sentences
from skgkgc.trainer import TrainingDiverged

SIX_SENTENCES = (
    "The river water flows past the old mill. Cats sleep all afternoon. "
    "Cold river water flows under the stone bridge. Taxes are due in April. "
    "The river water flows into the grey sea. Violins need fresh strings."
)


def run(capsys, *argv):
    code = cli.main([str(a) for a in argv])
    out, err = capsys.readouterr()
    return code, out, err


def write_config(path, **kw):
    path.write_text(json.dumps({"epochs": 2, "dim": 8, "batch_size": 4, **kw}))
    return path


@pytest.fixture
def chip_dir(tmp_path):
    d = tmp_path / "chip"
    d.mkdir()
    (d / "train.tsv").write_text(
        "04692908\t_derivationally_related_form\t01259005\n00387897\t_derivationally_related_form\t01259005\n"
    )
    (d / "dev.tsv").write_text("")
    (d / "test.tsv").write_text("")
    (d / "entity2text.txt").write_text(
        "04692908\tchip, a mark left after a small piece has been chopped or broken off of something\n"
        "00387897\tsnick, a small cut\n01259005\tnick, cut a nick into\n"
    )
    (d / "relation2text.txt").write_text("_derivationally_related_form\tderivationally related form\n")
    return d


class TestStats:
    def test_toy(self, capsys, data_dir, tmp_path):
        code, out, _ = run(capsys, "stats", "--data-dir", data_dir, "--out", tmp_path / "s.json")
        assert code == 0
        assert "share (h,r) 50.0%" in out
        got = json.loads((tmp_path / "s.json").read_text())
        want = compute_stats(load_data_dir(data_dir)).as_dict()
        assert {k: got[k] for k in want} == want
        assert "r_head" in got and "r_tail" in got

    def test_missing_dir(self, capsys, tmp_path):
        code, _, err = run(capsys, "stats", "--data-dir", tmp_path / "nope")
        assert code == 1 and "nope" in err

    def test_empty_dir(self, capsys, tmp_path):
        (tmp_path / "empty").mkdir()
        code, _, err = run(capsys, "stats", "--data-dir", tmp_path / "empty")
        assert code == 1 and "train.tsv" in err


class TestExpand:
    def test_chip_snick(self, capsys, chip_dir, tmp_path):
        code, _, _ = run(capsys, "expand", "--data-dir", chip_dir, "--out", tmp_path / "x.jsonl")
        assert code == 0
        rows = [json.loads(line) for line in (tmp_path / "x.jsonl").read_text().splitlines()]
        sets = [r for r in rows if len(r["members"]) > 1]
        assert len(sets) == 1
        assert sets[0]["known_text"] == (
            "chip, a mark left after a small piece has been chopped or broken off of something "
            "[PSEP] snick, a small cut [SEP] derivationally related form"
        )
        assert set(sets[0]) == {"direction", "known_text", "target", "relation", "members"}

    def test_line_count_without_sharing(self, capsys, tmp_path):
        d = tmp_path / "d"
        d.mkdir()
        (d / "train.tsv").write_text("a\tr\tb\nc\tr\td\ne\ts\tf\n")
        for name in ("dev.tsv", "test.tsv", "entity2text.txt", "relation2text.txt"):
            (d / name).write_text("")
        run(capsys, "expand", "--data-dir", d, "--out", tmp_path / "x.jsonl")
        assert len((tmp_path / "x.jsonl").read_text().splitlines()) == 6

    def test_byte_identical_rerun(self, capsys, tmp_path):
        run(capsys, "synth", "--out", tmp_path / "syn", "--set-structured")
        digests = []
        for i in range(2):
            out = tmp_path / f"x{i}.jsonl"
            assert run(capsys, "expand", "--data-dir", tmp_path / "syn", "--out", out)[0] == 0
            digests.append(hashlib.sha256(out.read_bytes()).hexdigest())
        assert digests[0] == digests[1]


class TestTrainEval:
    def test_train_then_eval(self, capsys, data_dir, tmp_path):
        cfg = write_config(tmp_path / "run.json")
        code, _, err = run(capsys, "train", "--config", cfg, "--data-dir", data_dir, "--out", tmp_path / "run")
        assert code == 0, err
        run_dir = tmp_path / "run"
        resolved = json.loads((run_dir / "config.json").read_text())
        assert resolved["epochs"] == 2 and resolved["dim"] == 8
        logs = [json.loads(x) for x in (run_dir / "train_log.jsonl").read_text().splitlines()]
        assert [r["epoch"] for r in logs] == [1, 2]
        assert all(r["config_hash"] == resolved["config_hash"] for r in logs)
        weights = [json.loads(x) for x in (run_dir / "weights.jsonl").read_text().splitlines()]
        assert set(weights[0]) >= {"epoch", "w_hp", "w_rp", "w_tp", "a_hp", "a_rp", "a_tp"}

        code, _, err = run(capsys, "eval", "--checkpoint", run_dir / "best", "--data-dir", data_dir,
                           "--out", tmp_path / "report.json")
        assert code == 0, err
        report = json.loads((tmp_path / "report.json").read_text())
        assert set(report["average"]) == {"mrr", "hit@1", "hit@3", "hit@10"}
        assert report["config_hash"] == resolved["config_hash"]

    def test_flags_override(self, capsys, data_dir, tmp_path):
        code, _, _ = run(capsys, "train", "--data-dir", data_dir, "--out", tmp_path / "r", "--epochs", 1,
                         "--seed", 4, "--no-balancing", "--threads", 1)
        assert code == 0
        resolved = json.loads((tmp_path / "r" / "config.json").read_text())
        assert (resolved["epochs"], resolved["seed"], resolved["balancing"]) == (1, 4, False)

    def test_eval_vocabulary_mismatch(self, capsys, data_dir, tmp_path):
        run(capsys, "train", "--config", write_config(tmp_path / "c.json", epochs=1), "--data-dir", data_dir,
            "--out", tmp_path / "run")
        run(capsys, "synth", "--out", tmp_path / "syn")
        code, _, err = run(capsys, "eval", "--checkpoint", tmp_path / "run" / "checkpoint", "--data-dir",
                           tmp_path / "syn")
        assert code == 2 and "vocabulary" in err

    def test_unknown_keys_enumerated(self, capsys, data_dir, tmp_path):
        cfg = tmp_path / "bad.json"
        cfg.write_text(json.dumps({"epochs": "many", "lerning_rate": 0.1, "colour": 1}))
        code, _, err = run(capsys, "train", "--config", cfg, "--data-dir", data_dir, "--out", tmp_path / "o")
        assert code == 1
        for bad in ("'colour'", "'lerning_rate'", "'epochs'"):
            assert bad in err

    def test_missing_output(self, capsys, data_dir):
        code, _, err = run(capsys, "train", "--data-dir", data_dir)
        assert code == 1 and "output_dir" in err

    def test_numeric_failure_exit_code(self, capsys, data_dir, tmp_path, monkeypatch):
        def boom(*a, **k):
            raise TrainingDiverged("loss became nan")

        monkeypatch.setattr(cli, "train", boom)
        code, _, err = run(capsys, "train", "--data-dir", data_dir, "--out", tmp_path / "o")
        assert code == 3 and "nan" in err

    def test_corrupt_checkpoint_is_data_error(self, capsys, data_dir, tmp_path):
        (tmp_path / "ck").mkdir()
        code, _, _ = run(capsys, "eval", "--checkpoint", tmp_path / "ck", "--data-dir", data_dir)
        assert code == 2


class TestSummarize:
    def test_six_sentences_to_three(self, capsys, tmp_path):
        f = tmp_path / "t.txt"
        f.write_text(SIX_SENTENCES)
        code, out, _ = run(capsys, "summarize", "--file", f)
        assert code == 0
        assert len(split_sentences(out.strip())) == 3

    def test_top_n(self, capsys):
        code, out, _ = run(capsys, "summarize", "--text", SIX_SENTENCES, "--top-n", 2)
        assert code == 0 and len(split_sentences(out.strip())) == 2

    def test_needs_one_source(self, capsys):
        assert run(capsys, "summarize")[0] == 1


def test_bad_subcommand(capsys):
    assert run(capsys, "frobnicate")[0] == 1
    assert run(capsys)[0] == 1


def test_synth_round_trip(capsys, tmp_path, synthetic_graph):
    assert run(capsys, "synth", "--out", tmp_path / "s")[0] == 0
    g = load_data_dir(tmp_path / "s")
    assert compute_stats(g) == compute_stats(synthetic_graph)
