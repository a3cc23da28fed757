"""Command line behavior of bandplot."""

from bandplot.cli import main

HEADER = "mu,t,series,mean,p01,p10,p90,p99"


def stats_file(tmp_path):
    lines = [HEADER]
    for t in range(6):
        v = 10.0 - t
        lines.append(f"0.85,{t},infected,{v},{v - 1},{v - 0.5},{v + 0.5},{v + 1}")
    path = tmp_path / "stats.csv"
    path.write_text("\n".join(lines) + "\n")
    return path


def test_renders_png(tmp_path, capsys):
    out = tmp_path / "fig.png"
    code = main(["--stats", str(stats_file(tmp_path)), "--out", str(out)])
    assert code == 0
    assert out.exists()
    assert str(out) in capsys.readouterr().out


def test_selection_flags(tmp_path):
    out = tmp_path / "fig.png"
    code = main([
        "--stats", str(stats_file(tmp_path)), "--out", str(out),
        "--mu", "0.85", "--series", "infected", "--levels", "98",
    ])
    assert code == 0


def test_schema_mismatch_exits_2(tmp_path, capsys):
    bad = tmp_path / "bad.csv"
    bad.write_text("mu,t,series,mean\n")
    code = main(["--stats", str(bad), "--out", str(tmp_path / "f.png")])
    assert code == 2
    assert "p01" in capsys.readouterr().err


def test_unknown_mu_exits_2(tmp_path):
    code = main([
        "--stats", str(stats_file(tmp_path)),
        "--out", str(tmp_path / "f.png"), "--mu", "0.2",
    ])
    assert code == 2


def test_unwritable_output_exits_3(tmp_path):
    code = main([
        "--stats", str(stats_file(tmp_path)),
        "--out", "/nonexistent-dir/fig.png",
    ])
    assert code == 3


def test_missing_required_flag_exits_2(capsys):
    assert main(["--out", "f.png"]) == 2
    capsys.readouterr()


def test_help_exits_0(capsys):
    assert main(["--help"]) == 0
    capsys.readouterr()
