import numpy as np
import pytest

from evframe import SensorGeometry, generate_synthetic_events, read_frame_pgm, save_events
from evframe.cli import main


def run_cli(*argv):
    return main(list(argv))


@pytest.fixture
def small_csv(tmp_path):
    geom = SensorGeometry(64, 48)
    events = generate_synthetic_events(geom, 30_000, "uniform_noise", rate_hz=300_000, seed=5)
    path = tmp_path / "events.csv"
    save_events(path, events)
    return path


class TestSynth:
    def test_writes_events(self, tmp_path, capsys):
        out = tmp_path / "out.csv"
        assert run_cli("synth", "--pattern", "moving_dot", "--duration-us", "20000",
                       "--rate", "100000", "--seed", "3", "--width", "64", "--height", "48",
                       str(out)) == 0
        assert out.exists()
        assert "wrote" in capsys.readouterr().out

    def test_deterministic(self, tmp_path):
        a, b = tmp_path / "a.csv", tmp_path / "b.csv"
        args = ["synth", "--pattern", "uniform_noise", "--duration-us", "10000",
                "--rate", "200000", "--seed", "9", "--width", "64", "--height", "48"]
        run_cli(*args, str(a))
        run_cli(*args, str(b))
        assert a.read_bytes() == b.read_bytes()


class TestConvert:
    def test_happy_path(self, small_csv, tmp_path, capsys):
        out = tmp_path / "frames"
        code = run_cli("convert", "--repr", "event-frame", "--tau-us", "10000",
                       "--width", "64", "--height", "48", "--flush",
                       str(small_csv), str(out))
        assert code == 0
        frames = sorted(out.glob("frame_*.pgm"))
        assert [f.name for f in frames] == [f"frame_{i:06d}.pgm" for i in range(len(frames))]
        assert len(frames) >= 3
        stats = dict(line.split("=") for line in (out / "stats.txt").read_text().splitlines())
        assert stats["frames_emitted"] == str(len(frames))
        assert stats["events_dropped"] == "0"
        with open(frames[0], "rb") as fh:
            img = read_frame_pgm(fh)
        assert (img.width, img.height) == (64, 48)

    def test_banks_do_not_change_output(self, small_csv, tmp_path):
        outs = []
        for banks in ("1", "8"):
            out = tmp_path / f"banks{banks}"
            assert run_cli("convert", "--repr", "event-frame", "--banks", banks,
                           "--width", "64", "--height", "48", "--flush",
                           str(small_csv), str(out)) == 0
            outs.append(sorted(out.glob("frame_*.pgm")))
        assert [p.name for p in outs[0]] == [p.name for p in outs[1]]
        for a, b in zip(*outs):
            assert a.read_bytes() == b.read_bytes()

    def test_count_trigger(self, small_csv, tmp_path):
        out = tmp_path / "frames"
        assert run_cli("convert", "--repr", "binary", "--count", "5000",
                       "--width", "64", "--height", "48", str(small_csv), str(out)) == 0
        assert len(list(out.glob("frame_*.pgm"))) == 1  # 9k events, z=5000, no flush

    def test_rolling_trigger(self, small_csv, tmp_path):
        out = tmp_path / "frames"
        assert run_cli("convert", "--rolling", "8000,4000,1000",
                       "--width", "64", "--height", "48", str(small_csv), str(out)) == 0
        assert len(list(out.glob("frame_*.pgm"))) >= 20

    def test_missing_input_is_data_error(self, tmp_path):
        assert run_cli("convert", str(tmp_path / "nope.csv"), str(tmp_path / "o")) == 2

    def test_malformed_input_is_data_error(self, tmp_path):
        bad = tmp_path / "bad.csv"
        bad.write_text("1,2\nnot,a,number,here\n")
        assert run_cli("convert", str(bad), str(tmp_path / "o")) == 2

    def test_out_of_range_coordinate_is_data_error(self, tmp_path):
        bad = tmp_path / "bad.csv"
        bad.write_text("5,1280,10,1\n")
        assert run_cli("convert", str(bad), str(tmp_path / "o")) == 2

    def test_bad_flag_is_usage_error(self, small_csv, tmp_path):
        assert run_cli("convert", "--repr", "sepia", str(small_csv), str(tmp_path / "o")) == 1

    def test_conflicting_triggers_rejected(self, small_csv, tmp_path):
        assert run_cli("convert", "--count", "5", "--rolling", "8000,4000,1000",
                       str(small_csv), str(tmp_path / "o")) == 1

    def test_bad_rolling_spec_is_config_error(self, small_csv, tmp_path):
        assert run_cli("convert", "--rolling", "8000,3000,2000",
                       "--width", "64", "--height", "48",
                       str(small_csv), str(tmp_path / "o")) == 1


class TestEstimate:
    def test_exp_decay_zcu104(self, capsys):
        assert run_cli("estimate", "--repr", "exp-decay", "--platform", "zcu104") == 0
        out = capsys.readouterr().out
        assert "total: 226.0 blocks" in out
        assert "zcu104: feasible, margin 86.0 blocks" in out

    def test_event_frame_eight_banks(self, capsys):
        assert run_cli("estimate", "--repr", "event-frame", "--banks", "8") == 0
        assert "total: 61.0 blocks" in capsys.readouterr().out

    def test_binary_fits_zybo(self, capsys):
        assert run_cli("estimate", "--repr", "binary", "--platform", "zybo-z7-20") == 0
        assert "zybo-z7-20: feasible" in capsys.readouterr().out

    def test_kv_format(self, capsys):
        assert run_cli("estimate", "--repr", "event-frequency", "--format", "kv") == 0
        lines = capsys.readouterr().out.splitlines()
        kv = dict(line.split("=", 1) for line in lines)
        assert kv["cell_bits"] == "5"
        assert kv["total_blocks"] == "142.0"
        assert kv["platform.kv260.feasible"] == "true"
        assert kv["platform.zybo-z7-20.feasible"] == "false"

    def test_rolling_subwindows(self, capsys):
        assert run_cli("estimate", "--repr", "event-frame", "--rolling-subwindows", "8",
                       "--format", "kv") == 0
        kv = dict(line.split("=", 1)
                  for line in capsys.readouterr().out.splitlines())
        assert kv["cell_bits"] == "5" and kv["total_blocks"] == "142.0"

    def test_unknown_platform(self, capsys):
        assert run_cli("estimate", "--repr", "binary", "--platform", "quantum9") == 1

    def test_platforms_file(self, tmp_path, capsys):
        profile = tmp_path / "boards.txt"
        profile.write_text("name = tiny\nbram_blocks = 20\n")
        assert run_cli("estimate", "--repr", "binary", "--platform", "tiny",
                       "--platforms-file", str(profile)) == 0
        assert "tiny: infeasible" in capsys.readouterr().out


class TestCompare:
    def test_behavioral_matches(self, small_csv, capsys):
        code = run_cli("compare", "--repr", "event-frame", "--width", "64", "--height", "48",
                       "--flush", str(small_csv))
        assert code == 0
        assert "identical" in capsys.readouterr().out

    def test_synthetic_frequency_regression(self, capsys):
        code = run_cli("compare", "--repr", "event-frequency", "--synthetic", "moving_dot",
                       "--seed", "7", "--duration-us", "30000", "--rate", "200000",
                       "--width", "64", "--height", "48", "--flush")
        assert code == 0

    @pytest.mark.parametrize("extra", [
        [],
        ["--count", "500"],
        ["--rolling", "8000,4000,1000"],
        ["--banks", "4"],
    ])
    def test_all_modes_match(self, small_csv, extra, capsys):
        assert run_cli("compare", "--repr", "binary", "--width", "64", "--height", "48",
                       "--flush", *extra, str(small_csv)) == 0

    def test_hardware_timed_drops_mismatch(self, tmp_path, capsys):
        # overload stream: drops guaranteed, so lossy output differs
        geom = SensorGeometry()
        rng = np.random.default_rng(0)
        n = 40_000
        t = np.sort(np.concatenate([[5_000], rng.integers(10_000, 19_216, n)]))
        import numpy.lib.recfunctions  # noqa: F401
        from evframe import EVENT_DTYPE

        arr = np.empty(len(t), EVENT_DTYPE)
        arr["t"] = t
        arr["x"] = rng.integers(0, geom.width, len(t))
        arr["y"] = rng.integers(0, geom.height, len(t))
        arr["p"] = 1
        path = tmp_path / "burst.csv"
        save_events(path, arr)
        code = run_cli("compare", "--repr", "event-frame", "--hardware-timed", "--flush",
                       str(path))
        assert code == 3
        assert "mismatch" in capsys.readouterr().out

    def test_requires_input_or_synthetic(self):
        assert run_cli("compare", "--repr", "binary") == 1


class TestModuleEntry:
    def test_python_dash_m(self, small_csv, tmp_path):
        import subprocess
        import sys

        out = tmp_path / "frames"
        proc = subprocess.run(
            [sys.executable, "-m", "evframe", "convert", "--width", "64", "--height", "48",
             "--flush", str(small_csv), str(out)],
            capture_output=True, text=True,
        )
        assert proc.returncode == 0, proc.stderr
        assert (out / "stats.txt").exists()
