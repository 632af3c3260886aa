import csv

import pytest

from loopbench.cli import build_parser, main
from loopbench.config import ENV_VARS


def run_cli(capsys, argv, expect=0):
    code = main(argv)
    captured = capsys.readouterr()
    assert code == expect, captured.err or captured.out
    return captured


def test_no_verb_is_usage_error():
    with pytest.raises(SystemExit) as exc:
        main([])
    assert exc.value.code == 2


def test_help_epilog_lists_env_vars():
    epilog = build_parser().epilog
    for name, _ in ENV_VARS:
        assert name in epilog
    assert len(ENV_VARS) == 11


def test_run_clean(capsys):
    out = run_cli(capsys, ["run", "--route", "straight_01"]).out
    assert "straight_01 full-pursuit clean |" in out
    assert "outcome=success" in out
    assert "ds=100.00" in out
    assert "delay_ticks=0" in out


def test_run_preset_setting(capsys):
    out = run_cli(capsys, ["run", "--route", "straight_01", "--setting",
                           "latency_500ms"]).out
    assert "latency_500ms" in out
    assert "delay_ticks=10" in out


def test_run_custom_knobs(capsys):
    out = run_cli(capsys, ["run", "--route", "straight_01",
                           "--mask-ratio", "0.5", "--gps-std", "5"]).out
    assert "straight_01 full-pursuit custom |" in out


def test_run_failures_still_exit_zero(capsys):
    # driving badly is a result, not a tool error
    out = run_cli(capsys, ["run", "--route", "cross_01", "--policy",
                           "blind-follower"]).out
    assert "outcome=failed" in out
    assert "collision" in out


def test_run_unknown_route(capsys):
    captured = run_cli(capsys, ["run", "--route", "warp_9"], expect=2)
    assert "unknown route" in captured.err


def test_run_unknown_setting(capsys):
    captured = run_cli(capsys, ["run", "--route", "straight_01",
                                "--setting", "fog_0.5"], expect=2)
    assert "unknown setting label" in captured.err


def test_run_env_precedence(capsys, monkeypatch):
    # flag asks for a tiny mask; env overrides to a heavy one and wins
    monkeypatch.setenv("PARTIAL_OBS_RATIO", "0.8")
    monkeypatch.setenv("ROBUSTNESS_SEED", "5")
    out = run_cli(capsys, ["run", "--route", "cross_01",
                           "--mask-ratio", "0.01", "--seed", "0"]).out
    monkeypatch.delenv("PARTIAL_OBS_RATIO")
    monkeypatch.delenv("ROBUSTNESS_SEED")
    out_flag = run_cli(capsys, ["run", "--route", "cross_01",
                                "--mask-ratio", "0.8", "--seed", "5"]).out
    assert out == out_flag


def test_robustness_disable_gates_setting(capsys, monkeypatch):
    monkeypatch.setenv("ROBUSTNESS_ENABLE", "0")
    captured = run_cli(capsys, ["run", "--route", "straight_01",
                                "--setting", "occlusion_0.8"])
    assert "reduced setting" in captured.err
    clean = run_cli(capsys, ["run", "--route", "straight_01"]).out
    # identical result line apart from the label
    tail = captured.out.split("|", 1)[1]
    assert tail == clean.split("|", 1)[1]


def test_run_record_written(capsys, tmp_path):
    rec = tmp_path / "r.jsonl"
    out = run_cli(capsys, ["run", "--route", "straight_01", "--out",
                           str(rec)]).out
    assert rec.exists()
    assert f"record: {rec}" in out


def test_run_config_file_layer(capsys, tmp_path):
    cfg = tmp_path / "cfg.yaml"
    cfg.write_text("latency_ms: 500\n", encoding="utf-8")
    out = run_cli(capsys, ["run", "--route", "straight_01", "--config",
                           str(cfg)]).out
    assert "delay_ticks=10" in out


def test_sweep_report_verbs(capsys, tmp_path):
    out = run_cli(capsys, [
        "sweep", "--policies", "blind-follower", "--settings",
        "gps_5m,latency_100ms", "--out", str(tmp_path), "--sweep-id", "s",
    ]).out
    assert "[blind-follower] clean:" in out
    assert f"report: {tmp_path / 's' / 'report.csv'}" in out

    with open(tmp_path / "s" / "report.csv", newline="") as fh:
        rows = list(csv.DictReader(fh))
    labels = [(r["policy"], r["setting"]) for r in rows]
    assert ("blind-follower", "clean") in labels
    assert ("blind-follower", "gps_5m") in labels
    assert ("blind-follower", "avg_all") in labels

    # regenerate the report elsewhere from the records alone
    out2 = run_cli(capsys, ["report", "--from", str(tmp_path / "s"),
                            "--out", str(tmp_path / "regen")]).out
    assert (tmp_path / "regen" / "report.csv").exists()
    assert (tmp_path / "regen" / "report.csv").read_bytes() == \
        (tmp_path / "s" / "report.csv").read_bytes()
    assert "report.csv" in out2


def test_sweep_rejects_unknowns(capsys):
    captured = run_cli(capsys, ["sweep", "--policies", "ghost"], expect=2)
    assert "unknown policies" in captured.err
    captured = run_cli(capsys, ["sweep", "--settings", "fog"], expect=2)
    assert "unknown setting" in captured.err
    captured = run_cli(capsys, ["sweep", "--preset", "paper", "--settings",
                                "gps_5m"], expect=2)
    assert "mutually exclusive" in captured.err


def test_report_missing_dir(capsys, tmp_path):
    captured = run_cli(capsys, ["report", "--from",
                                str(tmp_path / "void")], expect=2)
    assert "no run records" in captured.err


def test_verify_all_pass(capsys):
    out = run_cli(capsys, ["verify"]).out
    lines = [l for l in out.splitlines() if l]
    assert len(lines) == 9
    assert all(l.startswith("PASS ") for l in lines)


def test_verify_subset_and_list(capsys):
    out = run_cli(capsys, ["verify", "--check", "ticks-conversion"]).out
    assert out.startswith("PASS ticks-conversion")
    listed = run_cli(capsys, ["verify", "--list"]).out.split()
    assert "mask-exactness" in listed


def test_verify_inject_fault_fails(capsys):
    captured = run_cli(capsys, ["verify", "--inject-fault",
                                "fifo-shift"], expect=1)
    assert "FAIL fifo-shift: injected fault" in captured.out


def test_verify_unknown_check(capsys):
    captured = run_cli(capsys, ["verify", "--check", "vibes"], expect=2)
    assert "unknown checks" in captured.err
