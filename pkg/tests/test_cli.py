import json


from gencp import NGramLM, parse_report
from gencp.cli import main


class TestSolveCommand:
    def test_demo_run_prints_sentences(self, fixtures_dir, capsys):
        code = main([
            "solve", "--task", "demo-60", "--lm", f"table:{fixtures_dir / 'demo60.tbl'}",
            "--k", "10", "--max-solutions", "4", "--backtrack-to", "2",
        ])
        assert code == 0
        out = capsys.readouterr().out
        lines = [line for line in out.splitlines() if line]
        assert len(lines) == 4
        for line in lines:
            sentence, _, ppl = line.partition("\t")
            assert sentence.startswith("The ")
            assert len(sentence) == 60
            assert ppl.startswith("ppl=")

    def test_task_file(self, fixtures_dir, capsys):
        code = main([
            "solve", "--task", str(fixtures_dir / "two_words.json"),
            "--lm", f"table:{fixtures_dir / 'bs_miss.tbl'}", "--all",
        ])
        assert code == 0
        out = capsys.readouterr().out
        assert out.splitlines()[0].split("\t")[0] == "My cat."

    def test_seed_words_override(self, fixtures_dir, tmp_path, capsys):
        table = tmp_path / "seeded.tbl"
        table.write_text("We go\t.\t1.0\n", encoding="utf-8")
        task = tmp_path / "task.json"
        task.write_text(json.dumps({
            "constraints": [{"type": "word_count_range", "lo": 2, "hi": 2}],
            "seed": ["The"],
            "k": 2,
        }), encoding="utf-8")
        code = main([
            "solve", "--task", str(task), "--lm", f"table:{table}",
            "--seed-words", "We,go",
        ])
        assert code == 0
        assert capsys.readouterr().out.splitlines()[0].split("\t")[0] == "We go."


class TestBeamCommand:
    def test_beam_run(self, fixtures_dir, capsys):
        code = main([
            "beam", "--task", str(fixtures_dir / "two_words.json"),
            "--lm", f"table:{fixtures_dir / 'bs_k_shift.tbl'}", "--k", "5",
        ])
        assert code == 0
        captured = capsys.readouterr()
        assert captured.out.splitlines()[0].split("\t")[0] == "it was."
        assert "satisfaction" in captured.err


class TestBenchCommand:
    def test_csv_report_to_file(self, fixtures_dir, tmp_path, capsys):
        out_path = tmp_path / "report.csv"
        code = main([
            "bench", "--task", str(fixtures_dir / "two_words.json"),
            "--lm", f"table:{fixtures_dir / 'bs_miss.tbl'}",
            "--k", "2,3", "--method", "gencp,bs-all", "--max-variables", "6",
            "--out", str(out_path),
        ])
        assert code == 0
        rows = parse_report(out_path, "csv")
        assert len(rows) == 4
        assert {r.method for r in rows} == {"gencp", "bs-all"}

    def test_stdout_json(self, fixtures_dir, capsys):
        code = main([
            "bench", "--task", str(fixtures_dir / "two_words.json"),
            "--lm", f"table:{fixtures_dir / 'bs_miss.tbl'}",
            "--k", "2", "--method", "oracle", "--max-variables", "6",
            "--format", "json",
        ])
        assert code == 0
        payload = json.loads(capsys.readouterr().out)
        assert payload[0]["method"] == "oracle"
        assert payload[0]["n_solutions"] == 1

    def test_bad_k_list_is_usage_error(self, fixtures_dir, capsys):
        code = main([
            "bench", "--task", "demo-60", "--lm", "table:x",
            "--k", "five", "--method", "gencp",
        ])
        assert code == 1


class TestOracleCommand:
    def test_lists_solutions(self, fixtures_dir, capsys):
        code = main([
            "oracle", "--task", str(fixtures_dir / "two_words.json"),
            "--lm", f"table:{fixtures_dir / 'bs_miss.tbl'}", "--max-variables", "4",
        ])
        assert code == 0
        assert capsys.readouterr().out.splitlines() == ["My cat."]


class TestTrainNgramCommand:
    def test_trains_and_saves(self, tmp_path, capsys):
        corpus = tmp_path / "corpus.txt"
        corpus.write_text("the cat sat on the mat . the dog ran .", encoding="utf-8")
        out = tmp_path / "model.json"
        code = main([
            "train-ngram", "--corpus", str(corpus), "--order", "2", "--out", str(out),
        ])
        assert code == 0
        model = NGramLM.load(out)
        assert "cat" in model.vocabulary

    def test_missing_corpus_is_error(self, tmp_path):
        code = main([
            "train-ngram", "--corpus", str(tmp_path / "nope.txt"), "--order", "1",
            "--out", str(tmp_path / "m.json"),
        ])
        assert code == 1


class TestExitCodes:
    def test_unknown_flag_is_usage_error(self, capsys):
        code = main(["solve", "--task", "demo-60", "--lm", "table:x", "--frobnicate"])
        assert code == 1
        assert "usage" in capsys.readouterr().err.lower()

    def test_unknown_task_is_usage_error(self, fixtures_dir, capsys):
        code = main(["solve", "--task", "sent-99", "--lm", f"table:{fixtures_dir / 'demo60.tbl'}"])
        assert code == 1

    def test_missing_subcommand_is_usage_error(self):
        assert main([]) == 1

    def test_unreachable_backend_is_backend_failure(self, fixtures_dir, capsys):
        code = main([
            "solve", "--task", str(fixtures_dir / "two_words.json"),
            "--lm", "remote:http://127.0.0.1:9/completion",
        ])
        assert code == 2
        assert "backend failure" in capsys.readouterr().err

    def test_bad_lm_spec_is_usage_error(self, fixtures_dir):
        code = main([
            "solve", "--task", str(fixtures_dir / "two_words.json"), "--lm", "nonsense",
        ])
        assert code == 1
