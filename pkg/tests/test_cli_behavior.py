import json
from pathlib import Path

import pytest

from el_mimic import __version__, cli
from el_mimic.cli import build_parser, render_scores, write_output


def _exit_code(argv: list[str]) -> int | str | None:
    with pytest.raises(SystemExit) as exc_info:
        cli.main(["--no-dotenv", *argv])
    return exc_info.value.code


def _statements(tmp_path: Path) -> tuple[Path, Path]:
    predictions = tmp_path / "pred.txt"
    answers = tmp_path / "answers.txt"
    predictions.write_text("C1 < C2\nC15 < C3\n", encoding="utf-8")
    answers.write_text("C1 < C2\nC51 < C3\n", encoding="utf-8")
    return predictions, answers


def test_write_output_writes_to_stdout_for_none_and_dash(
    capsys: pytest.CaptureFixture[str],
) -> None:
    write_output("hello", None)
    write_output("world", "-")

    captured = capsys.readouterr()
    assert captured.out == "hello\nworld\n"


def test_write_output_writes_to_file(tmp_path: Path) -> None:
    output_file = tmp_path / "out" / "scores.txt"

    write_output("hello", str(output_file))

    assert output_file.read_text(encoding="utf-8") == "hello\n"


def test_build_parser_contains_key_arguments() -> None:
    parser = build_parser()
    args = parser.parse_args(["run", "--config", "exp.ini", "--seed", "3", "--threads", "2"])

    assert (args.command, args.config, args.seed, args.threads) == ("run", "exp.ini", 3, 2)
    assert parser.parse_args(["inspect", "ckpt", "kb.txt"]).step == 1
    assert parser.parse_args(["eval", "p.txt", "a.txt"]).format == "text"


def test_render_scores_text_marks_empty_distances() -> None:
    scores = {
        "character": {"distances": [0, 2], "precision": 0.5, "recall": 0.5, "f1": 0.5},
        "atomic": {"distances": [], "precision": 0.0, "recall": 0.0, "f1": 0.0},
    }

    lines = render_scores(scores, "text").splitlines()

    assert lines[0].split() == ["metric", "mean", "min", "max", "P", "R", "F1"]
    assert lines[1].split() == ["character", "1.000", "0", "2", "0.500", "0.500", "0.500"]
    assert lines[2].split()[1:4] == ["-", "-", "-"]


def test_cli_version_flag_prints_version_and_exits_zero(
    capsys: pytest.CaptureFixture[str],
) -> None:
    assert _exit_code(["--version"]) == 0
    assert capsys.readouterr().out.strip() == __version__


def test_cli_requires_a_command() -> None:
    assert _exit_code([]) == 2


def test_cli_eval_prints_json(tmp_path: Path, capsys: pytest.CaptureFixture[str]) -> None:
    predictions, answers = _statements(tmp_path)

    assert _exit_code(["eval", str(predictions), str(answers), "--format", "json"]) == 0

    scores = json.loads(capsys.readouterr().out)
    assert sorted(scores) == ["atomic", "character", "predicate"]
    assert scores["predicate"]["distances"] == [0, 15]
    assert scores["character"]["precision"] == 0.5


def test_cli_eval_writes_text_file(tmp_path: Path) -> None:
    predictions, answers = _statements(tmp_path)
    output = tmp_path / "scores.txt"

    assert _exit_code(["eval", str(predictions), str(answers), "--output", str(output)]) == 0

    assert output.read_text(encoding="utf-8").splitlines()[3].startswith("predicate")


def test_cli_eval_bad_statement_exits_one(
    tmp_path: Path, caplog: pytest.LogCaptureFixture
) -> None:
    predictions, answers = _statements(tmp_path)
    predictions.write_text("C1 <\n", encoding="utf-8")

    assert _exit_code(["eval", str(predictions), str(answers)]) == 1
    assert "pred.txt:1" in caplog.text


def test_cli_missing_config_exits_one(tmp_path: Path, caplog: pytest.LogCaptureFixture) -> None:
    assert _exit_code(["run", "--config", str(tmp_path / "absent.ini")]) == 1
    assert "cannot read config" in caplog.text


def test_cli_bad_environment_exits_one(monkeypatch: pytest.MonkeyPatch, tmp_path: Path) -> None:
    monkeypatch.setenv("EL_MIMIC_THREADS", "none")

    assert _exit_code(["generate", "--out", str(tmp_path)]) == 1


def test_cli_failed_stage_exits_two(
    monkeypatch: pytest.MonkeyPatch, tmp_path: Path, caplog: pytest.LogCaptureFixture
) -> None:
    monkeypatch.delenv("EL_MIMIC_THREADS", raising=False)
    (tmp_path / "empty").mkdir()

    code = _exit_code(["run", "--kbs", str(tmp_path / "empty"), "--out", str(tmp_path / "runs")])

    assert code == 2
    assert "stage 'kbs' failed" in caplog.text


def test_cli_interrupt_exits_130(monkeypatch: pytest.MonkeyPatch, tmp_path: Path) -> None:
    def interrupted(*_args: object, **_kwargs: object) -> None:
        raise KeyboardInterrupt

    monkeypatch.delenv("EL_MIMIC_THREADS", raising=False)
    monkeypatch.setattr("el_mimic.pipeline.run_experiment", interrupted)

    assert _exit_code(["run", "--out", str(tmp_path)]) == 130


def test_cli_generate_writes_kbs(
    monkeypatch: pytest.MonkeyPatch, tmp_path: Path, capsys: pytest.CaptureFixture[str]
) -> None:
    monkeypatch.delenv("EL_MIMIC_SEED", raising=False)
    monkeypatch.delenv("EL_MIMIC_THREADS", raising=False)
    out = tmp_path / "kbs"

    assert _exit_code(["generate", "--count", "2", "--out", str(out)]) == 0

    assert capsys.readouterr().out.strip() == f"wrote 2 KB file(s) to {out}"
    assert sorted(p.name for p in out.iterdir()) == ["kb-0000.txt", "kb-0001.txt", "manifest.json"]
