"""The command-line interface, driven in-process."""
from __future__ import annotations

import pytest

from colorcq.cli import main

from .conftest import MOVIE_TEXT


@pytest.fixture()
def movie_file(tmp_path):
    p = tmp_path / "movie.facts"
    p.write_text(MOVIE_TEXT)
    return str(p)


def _enum_lines(out: str) -> list[str]:
    lines = out.strip().splitlines()
    assert lines[-1] == "EOE"
    return lines[:-1]


def test_build_stats_query_round_trip(movie_file, tmp_path, capsys):
    idx_path = str(tmp_path / "movie.ccqx")
    assert main(["build", "--db", movie_file, "--out", idx_path]) == 0
    out = capsys.readouterr().out
    assert f"index written to {idx_path}" in out
    assert "num_colors: 4" in out
    assert "color_db_size: 10" in out

    assert main(["stats", "--index", idx_path]) == 0
    out = capsys.readouterr().out
    assert "db_size: 8" in out
    assert "adom_size: 6" in out
    assert "k_sigma: 1.25" in out

    assert main(["query", "Ans(x,y) <- P(x,y).", "--index", idx_path]) == 0
    out = capsys.readouterr().out
    assert set(_enum_lines(out)) == {"(PS,LM)", "(PS,MM)"}


def test_query_tasks(movie_file, capsys):
    assert main(["query", "Ans(x,y) <- P(x,y).", "--db", movie_file,
                 "--task", "count"]) == 0
    assert capsys.readouterr().out.strip() == "2"

    assert main(["query", "Ans() <- P(x,y), M(y,z).", "--db", movie_file]) == 0
    assert capsys.readouterr().out.strip() == "yes"

    assert main(["query", "Ans() <- S(x,y), M(y,z).", "--db", movie_file]) == 0
    assert capsys.readouterr().out.strip() == "no"

    assert main(["query", "Ans() <- P(x,y).", "--db", movie_file,
                 "--task", "enum"]) == 0
    assert _enum_lines(capsys.readouterr().out) == ["()"]


def test_task_bool_on_non_boolean_is_exit_3(movie_file, capsys):
    rc = main(["query", "Ans(x) <- P(x,y).", "--db", movie_file, "--task", "bool"])
    assert rc == 3
    assert "requires a Boolean query" in capsys.readouterr().err


def test_rejected_query_is_exit_2(movie_file, capsys):
    rc = main(["query", "Ans() <- P(x,y), P(y,z), P(z,x).", "--db", movie_file])
    assert rc == 2
    err = capsys.readouterr().err
    assert err.startswith("rejected:")
    assert "cycle" in err


def test_error_paths_are_exit_1(movie_file, tmp_path, capsys):
    rc = main(["query", "Ans(x,y) <- T(x,y).", "--db", movie_file])
    assert rc == 1
    assert capsys.readouterr().err.startswith("error:")

    rc = main(["stats", "--db", str(tmp_path / "missing.facts")])
    assert rc == 1
    assert capsys.readouterr().err.startswith("error:")

    junk = tmp_path / "junk.ccqx"
    junk.write_bytes(b"JUNKJUNKJUNKJUNK")
    rc = main(["stats", "--index", str(junk)])
    assert rc == 1
    assert "magic" in capsys.readouterr().err


def test_gen_cycle(tmp_path, capsys):
    out = str(tmp_path / "cyc.facts")
    assert main(["gen", "cycle", "5", "--out", out]) == 0
    assert "5 facts written" in capsys.readouterr().out
    with open(out) as f:
        assert f.read() == "R(1,2)\nR(2,3)\nR(3,4)\nR(4,5)\nR(5,1)\n"

    assert main(["gen", "cycle", "2", "--out", out]) == 1
    assert "n >= 3" in capsys.readouterr().err


def test_gen_random(tmp_path, capsys):
    a, b, c = (str(tmp_path / name) for name in ("a", "b", "c"))
    assert main(["gen", "random", "6", "10", "--seed", "3", "--out", a]) == 0
    assert main(["gen", "random", "6", "10", "--seed", "3", "--out", b]) == 0
    assert main(["gen", "random", "6", "10", "--seed", "4", "--out", c]) == 0
    capsys.readouterr()
    fa, fb, fc = (open(p).read() for p in (a, b, c))
    assert fa == fb
    assert fa != fc
    assert len(fa.strip().splitlines()) == 10

    assert main(["gen", "random", "3", "99"]) == 1
    assert "n*n" in capsys.readouterr().err

    assert main(["gen", "random", "3", "2", "--seed", "1"]) == 0
    lines = capsys.readouterr().out.strip().splitlines()
    assert len(lines) == 2 and all(ln.startswith("R(") for ln in lines)


def test_count_matches_enum_line_count(tmp_path, capsys):
    facts = str(tmp_path / "r.facts")
    assert main(["gen", "random", "5", "12", "--seed", "7", "--out", facts]) == 0
    capsys.readouterr()
    for text in (
        "Ans(x,y) <- R(x,y).",
        "Ans(x) <- R(x,y).",
        "Ans(x,y,z) <- R(x,y), R(y,z).",
        "Ans(x) <- R(x,y), R(y,z).",
    ):
        assert main(["query", text, "--db", facts, "--task", "count"]) == 0
        count = int(capsys.readouterr().out.strip())
        assert main(["query", text, "--db", facts, "--task", "enum"]) == 0
        assert len(_enum_lines(capsys.readouterr().out)) == count


def test_query_limit(tmp_path, capsys):
    facts = str(tmp_path / "cyc.facts")
    assert main(["gen", "cycle", "30", "--out", facts]) == 0
    capsys.readouterr()
    assert main(["query", "Ans(x,y) <- R(x,y).", "--db", facts, "--limit", "3"]) == 0
    assert len(_enum_lines(capsys.readouterr().out)) == 3


def test_explain_flag(movie_file, capsys):
    assert main(["query", "Ans(x,y) <- P(x,y).", "--db", movie_file, "--explain",
                 "--task", "count"]) == 0
    out = capsys.readouterr().out
    assert "root: x" in out
    assert "color query:" in out
    assert out.strip().endswith("2")


def test_oracle_subcommand(movie_file, capsys):
    assert main(["oracle", "Ans(x,y) <- P(x,y).", "--db", movie_file,
                 "--task", "count"]) == 0
    assert capsys.readouterr().out.strip() == "2"

    assert main(["oracle", "Ans() <- P(x,y), M(y,z).", "--db", movie_file]) == 0
    assert capsys.readouterr().out.strip() == "yes"

    assert main(["oracle", "Ans(x,y) <- P(x,y).", "--db", movie_file]) == 0
    assert set(_enum_lines(capsys.readouterr().out)) == {"(PS,LM)", "(PS,MM)"}


def test_bench_smoke(movie_file, tmp_path, capsys):
    queries = tmp_path / "queries.txt"
    queries.write_text(
        "# delay benchmarks\n"
        "Ans(x,y) <- P(x,y).\n"
        "\n"
        "Ans() <- P(x,y), M(y,z).\n"
    )
    assert main(["bench", "--db", movie_file, "--queries", str(queries),
                 "--compare-kernels"]) == 0
    out = capsys.readouterr().out
    assert "prep_ms" in out
    assert "Ans(x,y) <- P(x,y)." in out
    assert "refinement kernel comparison:" in out
    assert "numpy" in out


def test_version_flag(capsys):
    with pytest.raises(SystemExit) as exc:
        main(["--version"])
    assert exc.value.code == 0
    assert capsys.readouterr().out.startswith("colorcq ")
