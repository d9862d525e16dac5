import hashlib
import json
import signal
import subprocess
import sys
import time

import pytest

from conftest import make_fixture
from ledgernet import __version__, cli
from ledgernet.ingestion import list_chunk_files

ENV_VARS = ("LEDGERNET_ENDPOINT", "LEDGERNET_API_KEY", "LEDGERNET_RATE_LIMIT",
            "LEDGERNET_RETRY_CAP", "LEDGERNET_BACKOFF_BASE")

VOLATILE_KEYS = ("generated_at", "timings_seconds")


@pytest.fixture(autouse=True)
def clean_environment(monkeypatch):
    for name in ENV_VARS:
        monkeypatch.delenv(name, raising=False)


@pytest.fixture()
def fixture_dir(tmp_path):
    return make_fixture(tmp_path / "fx")


def run_cli(*argv):
    return cli.main([str(a) for a in argv])


def download(fixture, out, *extra):
    return run_cli("download", "--chain", "ethereum", "--fixture", fixture,
                   "--from-block", 0, "--to-block", 9, "--chunk-size", 3,
                   "--output-dir", out, *extra)


def read_json(path):
    with open(path, "r", encoding="utf-8") as fh:
        return json.load(fh)


def stripped(doc):
    """Drops wall-clock keys at any depth so reruns can be compared."""
    if isinstance(doc, dict):
        return {k: stripped(v) for k, v in doc.items() if k not in VOLATILE_KEYS}
    if isinstance(doc, list):
        return [stripped(v) for v in doc]
    return doc


def chunk_bytes(out):
    return {p.name: p.read_bytes() for p in list_chunk_files(out / "chunks")}


class TestDownload:
    def test_writes_chunks_checkpoint_and_summary(self, fixture_dir, tmp_path,
                                                  capsys):
        out = tmp_path / "out"
        assert download(fixture_dir, out) == 0
        assert sorted(chunk_bytes(out)) == ["chunk_0_2.ndjson", "chunk_3_5.ndjson",
                                            "chunk_6_8.ndjson", "chunk_9_9.ndjson"]
        doc = read_json(out / "download_summary.json")
        assert doc["tool"] == "ledgernet"
        assert doc["tool_version"] == __version__
        assert doc["block_range"] == {"first": 0, "last": 9}
        assert doc["chunks_total"] == 4
        assert doc["chunks_done"] == 4
        assert doc["blocks_fetched"] == 10
        assert doc["transactions_written"] == 20
        assert doc["interrupted"] is False
        assert doc["config"]["chain"] == "ethereum"
        assert "downloaded 10 blocks" in capsys.readouterr().out

    def test_rerun_is_a_no_op(self, fixture_dir, tmp_path, capsys):
        out = tmp_path / "out"
        download(fixture_dir, out)
        before = chunk_bytes(out)
        capsys.readouterr()
        assert download(fixture_dir, out) == 0
        assert "nothing to do: all 4 chunks" in capsys.readouterr().out
        assert chunk_bytes(out) == before
        doc = read_json(out / "download_summary.json")
        assert doc["chunks_completed_this_run"] == 0
        assert doc["chunks_done"] == 4

    def test_force_discards_previous_run(self, fixture_dir, tmp_path, capsys):
        out = tmp_path / "out"
        download(fixture_dir, out)
        pristine = chunk_bytes(out)
        (out / "chunks" / "chunk_0_2.ndjson").write_text("garbage\n")
        assert download(fixture_dir, out, "--force") == 0
        assert "discarded previous checkpoint" in capsys.readouterr().out
        assert chunk_bytes(out) == pristine

    def test_time_interval_selector(self, fixture_dir, tmp_path, capsys):
        out = tmp_path / "out"
        code = run_cli("download", "--chain", "ethereum",
                       "--fixture", fixture_dir,
                       "--from-time", 250, "--to-time", 650,
                       "--chunk-size", 2, "--output-dir", out)
        assert code == 0
        assert "covers blocks 3..6" in capsys.readouterr().out
        doc = read_json(out / "download_summary.json")
        assert doc["block_range"] == {"first": 3, "last": 6}
        assert sorted(chunk_bytes(out)) == ["chunk_3_4.ndjson", "chunk_5_6.ndjson"]

    def test_interval_after_tip_fails(self, fixture_dir, tmp_path, capsys):
        code = run_cli("download", "--chain", "ethereum",
                       "--fixture", fixture_dir,
                       "--from-time", 950, "--to-time", 999,
                       "--output-dir", tmp_path / "out")
        assert code == 2
        assert "error:" in capsys.readouterr().err

    @pytest.mark.parametrize("argv", [
        ["download", "--chain", "ethereum", "--fixture", "FX"],
        ["download", "--chain", "ethereum", "--fixture", "FX",
         "--from-block", "0", "--to-block", "9",
         "--from-time", "0", "--to-time", "9"],
        ["download", "--chain", "ethereum", "--fixture", "FX",
         "--from-block", "0"],
        ["download", "--chain", "ethereum", "--fixture", "FX",
         "--from-block", "9", "--to-block", "2"],
        ["download", "--chain", "ethereum", "--fixture", "FX",
         "--from-block", "0", "--to-block", "9", "--chunk-size", "0"],
        ["download", "--chain", "ethereum", "--fixture", "FX",
         "--from-block", "0", "--to-block", "9", "--workers", "0"],
        ["download", "--chain", "ethereum",
         "--from-block", "0", "--to-block", "9"],
    ])
    def test_usage_errors(self, fixture_dir, tmp_path, capsys, argv):
        argv = [str(fixture_dir) if a == "FX" else a for a in argv]
        argv += ["--output-dir", str(tmp_path / "out")]
        assert cli.main(argv) == 1
        assert "usage error:" in capsys.readouterr().err

    def test_api_key_is_redacted_in_echo(self, fixture_dir, tmp_path,
                                         monkeypatch):
        monkeypatch.setenv("LEDGERNET_API_KEY", "hunter2")
        out = tmp_path / "out"
        download(fixture_dir, out)
        text = (out / "download_summary.json").read_text()
        assert "hunter2" not in text
        assert read_json(out / "download_summary.json")["config"]["api_key"] == \
            "REDACTED"

    def test_flag_beats_env_beats_config_file(self, fixture_dir, tmp_path,
                                              monkeypatch):
        config_path = tmp_path / "settings.json"
        config_path.write_text('{"rate_limit": 5}\n')

        out1 = tmp_path / "o1"
        download(fixture_dir, out1, "--config", config_path)
        assert read_json(out1 / "download_summary.json")["config"]["rate_limit"] == 5

        monkeypatch.setenv("LEDGERNET_RATE_LIMIT", "3")
        out2 = tmp_path / "o2"
        download(fixture_dir, out2, "--config", config_path)
        assert read_json(out2 / "download_summary.json")["config"]["rate_limit"] == 3

        out3 = tmp_path / "o3"
        download(fixture_dir, out3, "--config", config_path, "--rate-limit", 7)
        assert read_json(out3 / "download_summary.json")["config"]["rate_limit"] == 7

    def test_bad_env_value_is_usage_error(self, fixture_dir, tmp_path,
                                          monkeypatch, capsys):
        monkeypatch.setenv("LEDGERNET_RATE_LIMIT", "fast")
        assert download(fixture_dir, tmp_path / "out") == 1
        assert "LEDGERNET_RATE_LIMIT" in capsys.readouterr().err


class TestBuild:
    def test_both_formats(self, fixture_dir, tmp_path, capsys):
        out = tmp_path / "out"
        download(fixture_dir, out)
        code = run_cli("build", "--output-dir", out, "--format", "both")
        assert code == 0
        assert "built ethereum graph" in capsys.readouterr().out
        doc = read_json(out / "graph.json")
        assert doc["chain"] == "ethereum"
        assert len(doc["vertices"]) == 6
        pajek = (out / "graph.pajek").read_text()
        assert pajek.startswith("*Vertices 6\n")

    def test_chain_comes_from_checkpoint(self, fixture_dir, tmp_path):
        out = tmp_path / "out"
        download(fixture_dir, out)
        assert run_cli("build", "--output-dir", out) == 0
        assert read_json(out / "graph.json")["chain"] == "ethereum"

    def test_without_checkpoint_chain_is_required(self, fixture_dir, tmp_path,
                                                  capsys):
        out = tmp_path / "out"
        download(fixture_dir, out)
        bare = tmp_path / "bare"
        bare.mkdir()
        code = run_cli("build", "--output-dir", bare, "--chunks", out / "chunks")
        assert code == 1
        assert "usage error:" in capsys.readouterr().err
        code = run_cli("build", "--output-dir", bare, "--chunks", out / "chunks",
                       "--chain", "ethereum")
        assert code == 0
        assert (bare / "graph.json").exists()

    def test_partial_download_warns_but_builds(self, fixture_dir, tmp_path,
                                               capsys):
        from ledgernet.ingestion import Checkpoint

        out = tmp_path / "out"
        download(fixture_dir, out)
        checkpoint = Checkpoint.load(out / "checkpoint.json")
        checkpoint.done.discard(9)
        checkpoint.save(out / "checkpoint.json")
        (out / "chunks" / "chunk_9_9.ndjson").unlink()
        assert run_cli("build", "--output-dir", out) == 0
        assert "partial graph" in capsys.readouterr().err
        assert (out / "graph.json").exists()

    def test_existing_graph_is_kept(self, fixture_dir, tmp_path, capsys):
        out = tmp_path / "out"
        download(fixture_dir, out)
        run_cli("build", "--output-dir", out)
        before = (out / "graph.json").read_bytes()
        capsys.readouterr()
        assert run_cli("build", "--output-dir", out) == 0
        assert "keeping existing" in capsys.readouterr().out
        assert (out / "graph.json").read_bytes() == before


@pytest.fixture()
def built(fixture_dir, tmp_path):
    out = tmp_path / "out"
    download(fixture_dir, out)
    run_cli("build", "--output-dir", out, "--format", "both")
    return out


class TestAnalyze:
    def test_metrics_document(self, built, capsys):
        assert run_cli("analyze", "--graph", built / "graph.json") == 0
        assert "analyzed" in capsys.readouterr().out
        doc = read_json(built / "metrics.json")
        digest = hashlib.sha256((built / "graph.json").read_bytes()).hexdigest()
        assert doc["graph_sha256"] == digest
        assert doc["node_count"] == 6
        assert doc["edge_count"] >= 1
        assert doc["components"]["count"] >= 1
        assert 0.0 <= doc["graph_acc"] <= 1.0
        assert doc["main_component_aspl"] >= 1.0
        assert doc["aspl_method"] == "exact"
        assert set(doc["timings_seconds"]) == {"degrees", "components",
                                               "clustering", "aspl"}

    def test_pajek_input_is_inferred(self, built):
        output = built / "metrics_pajek.json"
        code = run_cli("analyze", "--graph", built / "graph.pajek",
                       "--output", output)
        assert code == 0
        json_doc = stripped(read_json(built / "metrics.json")) \
            if (built / "metrics.json").exists() else None
        doc = read_json(output)
        assert doc["node_count"] == 6

    def test_missing_graph_exits_2(self, tmp_path, capsys):
        missing = tmp_path / "nope.json"
        assert run_cli("analyze", "--graph", missing) == 2
        assert str(missing) in capsys.readouterr().err

    def test_corrupt_graph_exits_2(self, tmp_path, capsys):
        bad = tmp_path / "graph.json"
        bad.write_text('{"vertices": [1], "edges": []}\n')
        assert run_cli("analyze", "--graph", bad) == 2
        assert "error:" in capsys.readouterr().err

    def test_existing_output_is_kept(self, built, capsys):
        run_cli("analyze", "--graph", built / "graph.json")
        before = (built / "metrics.json").read_bytes()
        capsys.readouterr()
        assert run_cli("analyze", "--graph", built / "graph.json") == 0
        assert "keeping existing" in capsys.readouterr().out
        assert (built / "metrics.json").read_bytes() == before

    def test_force_rewrites_stably(self, built):
        run_cli("analyze", "--graph", built / "graph.json")
        first = stripped(read_json(built / "metrics.json"))
        run_cli("analyze", "--graph", built / "graph.json", "--force")
        second = stripped(read_json(built / "metrics.json"))
        assert first == second

    def test_sampled_aspl_is_recorded(self, built):
        output = built / "metrics_sampled.json"
        code = run_cli("analyze", "--graph", built / "graph.json",
                       "--sample-sources", 2, "--seed", 5, "--output", output)
        assert code == 0
        doc = read_json(output)
        assert doc["aspl_method"] == "sampled"
        assert doc["aspl_sample_sources"] == 2
        assert doc["config"]["seed"] == 5


class TestCompare:
    def test_comparison_document(self, built):
        assert run_cli("compare", "--graph", built / "graph.json",
                       "--seed", 42) == 0
        doc = read_json(built / "comparison.json")
        baseline = doc["baseline"]
        assert baseline["model"] == "erdos-renyi-gnm"
        assert baseline["seed"] == 42
        assert baseline["sample_seeds"] == [42]
        graph_doc = read_json(built / "graph.json")
        assert baseline["n"] == len(graph_doc["vertices"])
        assert baseline["m"] == len(graph_doc["edges"])
        verdict = doc["verdict"]
        assert isinstance(verdict["is_small_world"], bool)
        assert verdict["acc_threshold"] == 2.0
        assert verdict["aspl_threshold"] == 1.5

    def test_rerun_with_force_is_stable(self, built):
        run_cli("compare", "--graph", built / "graph.json", "--seed", 42)
        first = stripped(read_json(built / "comparison.json"))
        run_cli("compare", "--graph", built / "graph.json", "--seed", 42,
                "--force")
        assert stripped(read_json(built / "comparison.json")) == first

    def test_multiple_samples(self, built):
        output = built / "comparison3.json"
        code = run_cli("compare", "--graph", built / "graph.json",
                       "--seed", 7, "--samples", 3, "--output", output)
        assert code == 0
        doc = read_json(output)
        assert doc["baseline"]["sample_seeds"] == [7, 8, 9]
        assert len(doc["baseline"]["reports"]) == 3
        stats = doc["verdict"]["baseline_acc_stats"]
        assert stats["min"] <= stats["mean"] <= stats["max"]

    def test_bad_samples_is_usage_error(self, built, capsys):
        assert run_cli("compare", "--graph", built / "graph.json",
                       "--samples", 0) == 1
        assert "usage error:" in capsys.readouterr().err

    def test_custom_thresholds_echoed(self, built):
        output = built / "comparison_custom.json"
        run_cli("compare", "--graph", built / "graph.json",
                "--acc-threshold", 10, "--aspl-threshold", 1.1,
                "--output", output)
        verdict = read_json(output)["verdict"]
        assert verdict["acc_threshold"] == 10.0
        assert verdict["aspl_threshold"] == 1.1


class TestReport:
    def test_summarizes_pipeline_artifacts(self, built, capsys):
        run_cli("analyze", "--graph", built / "graph.json")
        run_cli("compare", "--graph", built / "graph.json")
        capsys.readouterr()
        assert run_cli("report", "--dir", built) == 0
        out = capsys.readouterr().out
        assert "download: ethereum blocks 0..9, 4/4 chunks (complete)" in out
        assert "graph:" in out
        assert "metrics: 6 nodes" in out
        assert "comparison:" in out

    def test_empty_directory(self, tmp_path, capsys):
        assert run_cli("report", "--dir", tmp_path) == 0
        assert "no pipeline artifacts found" in capsys.readouterr().out


class TestEntryPoints:
    def test_no_command_prints_usage(self, capsys):
        assert cli.main([]) == 1
        assert "usage:" in capsys.readouterr().err

    def test_help_exits_zero(self, capsys):
        assert cli.main(["--help"]) == 0
        assert "download" in capsys.readouterr().out

    def test_version(self, capsys):
        assert cli.main(["--version"]) == 0
        assert __version__ in capsys.readouterr().out

    def test_module_entry_point(self):
        result = subprocess.run([sys.executable, "-m", "ledgernet", "--help"],
                                capture_output=True, text=True, timeout=60)
        assert result.returncode == 0
        assert "usage:" in result.stdout


class TestInterrupt:
    def test_sigint_checkpoints_and_resume_matches(self, fixture_dir, tmp_path):
        reference = tmp_path / "reference"
        download(fixture_dir, reference, "--chunk-size", 1)

        out = tmp_path / "out"
        argv = [sys.executable, "-m", "ledgernet", "download",
                "--chain", "ethereum", "--fixture", str(fixture_dir),
                "--from-block", "0", "--to-block", "9", "--chunk-size", "1",
                "--workers", "1", "--rate-limit", "2",
                "--output-dir", str(out)]
        proc = subprocess.Popen(argv, stdout=subprocess.PIPE,
                                stderr=subprocess.PIPE, text=True)
        checkpoint_path = out / "checkpoint.json"
        deadline = time.monotonic() + 30
        done = 0
        while time.monotonic() < deadline:
            if checkpoint_path.exists():
                try:
                    done = len(json.loads(checkpoint_path.read_text())["done"])
                except (ValueError, KeyError):
                    done = 0
                if done >= 3:
                    break
            time.sleep(0.02)
        assert 3 <= done < 10, "never reached mid-download state"
        proc.send_signal(signal.SIGINT)
        stdout, stderr = proc.communicate(timeout=30)
        assert proc.returncode == 130, stderr
        assert "interrupt received" in stderr
        assert "rerun the same command to resume" in stderr

        saved = json.loads(checkpoint_path.read_text())
        partial = chunk_bytes(out)
        assert sorted(partial) == sorted(
            f"chunk_{first}_{first}.ndjson" for first in saved["done"])
        summary = read_json(out / "download_summary.json")
        assert summary["interrupted"] is True
        assert summary["chunks_done"] < 10

        assert download(fixture_dir, out, "--chunk-size", 1) == 0
        assert chunk_bytes(out) == chunk_bytes(reference)
        assert read_json(out / "download_summary.json")["chunks_done"] == 10
