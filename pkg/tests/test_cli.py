import json

import pytest

from iotprint.cli import main
from iotprint.fingerprint import load_profile
from iotprint.packet_model import format_mac
from iotprint.pcap_io import write_capture
from iotprint.synth import ARCHETYPES, generate_trace


@pytest.fixture()
def outlet_pcap(tmp_path):
    arch = ARCHETYPES["outlet"]
    frames, _ = generate_trace(arch, 600, seed=41)
    path = tmp_path / "outlet.pcap"
    write_capture(path, frames)
    return arch, path


def _make_profiles(tmp_path, names, packets=450, seed=50):
    paths = []
    for i, name in enumerate(names):
        arch = ARCHETYPES[name]
        frames, _ = generate_trace(arch, packets, seed=seed + i)
        pcap = tmp_path / f"{name}.pcap"
        write_capture(pcap, frames)
        out = tmp_path / f"{name}.profile.json"
        code = main(
            [
                "profile",
                "--pcap", str(pcap),
                "--mac", format_mac(arch.mac),
                "--label", name,
                "--category", arch.category,
                "--out", str(out),
            ]
        )
        assert code == 0
        paths.append(str(out))
    return paths


def test_synth_archetype_writes_pcap_and_labels(tmp_path, capsys):
    code = main(
        ["synth", "--archetype", "outlet", "--packets", "120", "--seed", "5", "--out-dir", str(tmp_path)]
    )
    assert code == 0
    assert (tmp_path / "outlet.pcap").exists()
    doc = json.loads((tmp_path / "outlet.labels.json").read_text())
    assert doc["schema"].startswith("trace-labels/")
    assert len(doc["labels"]) == 120
    assert "outlet.pcap" in capsys.readouterr().out


def test_synth_corpus_writes_all_instances(tmp_path, capsys):
    code = main(["synth", "--corpus", "--seed", "3", "--out-dir", str(tmp_path)])
    assert code == 0
    stems = sorted(p.name for p in tmp_path.glob("*.pcap"))
    assert "outlet-a.pcap" in stems and "outlet-b.pcap" in stems
    assert len(stems) == 7
    assert all((tmp_path / s).with_suffix(".labels.json").name for s in stems)
    assert len(list(tmp_path.glob("*.labels.json"))) == 7


def test_extract_writes_csv(outlet_pcap, tmp_path):
    arch, pcap = outlet_pcap
    out = tmp_path / "features.csv"
    code = main(["extract", "--pcap", str(pcap), "--mac", format_mac(arch.mac), "--out", str(out)])
    assert code == 0
    lines = out.read_text().strip().split("\n")
    assert lines[0].startswith("# schema:")
    assert len(lines) == 2 + 600


def test_profile_and_sessions(outlet_pcap, tmp_path, capsys):
    arch, pcap = outlet_pcap
    out = tmp_path / "p.json"
    code = main(
        [
            "profile",
            "--pcap", str(pcap),
            "--mac", format_mac(arch.mac),
            "--label", "outlet",
            "--category", "power",
            "--out", str(out),
        ]
    )
    assert code == 0
    assert len(load_profile(out).fingerprints) == 120

    code = main(["sessions", "--pcap", str(pcap)])
    assert code == 0
    output = capsys.readouterr().out
    assert "Packets/Session" in output


def test_profile_requires_selector(outlet_pcap, tmp_path, capsys):
    _, pcap = outlet_pcap
    code = main(
        ["profile", "--pcap", str(pcap), "--label", "x", "--category", "y", "--out", str(tmp_path / "p")]
    )
    assert code == 2
    assert "error: config:" in capsys.readouterr().err


def test_ecdf_prints_table(outlet_pcap, capsys):
    _, pcap = outlet_pcap
    code = main(["ecdf", "window", str(pcap)])
    assert code == 0
    out = capsys.readouterr().out
    assert "tcp_window_size" in out
    assert "probability" in out


def test_train_identify_round_trip(tmp_path, capsys):
    profiles = _make_profiles(tmp_path, ["outlet", "camera-streamer", "hub-conduit"])
    model_path = tmp_path / "outlet.model.json"
    code = main(
        ["train", "--profiles", *profiles, "--positive", "outlet", "--out", str(model_path)]
    )
    assert code == 0
    capsys.readouterr()

    arch = ARCHETYPES["outlet"]
    frames, _ = generate_trace(arch, 200, seed=90)
    target = tmp_path / "target.pcap"
    write_capture(target, frames)
    code = main(["identify", str(model_path), "--pcap", str(target), "--mac", format_mac(arch.mac)])
    assert code == 0
    doc = json.loads(capsys.readouterr().out)
    assert doc["verdict"] == "outlet"
    assert doc["fingerprints"] == 40
    assert doc["positives_per_model"]["outlet"] > 20

    # a different device should not be claimed by the outlet model
    cam = ARCHETYPES["camera-streamer"]
    frames, _ = generate_trace(cam, 200, seed=91)
    other = tmp_path / "cam.pcap"
    write_capture(other, frames)
    code = main(["identify", str(model_path), "--pcap", str(other), "--mac", format_mac(cam.mac)])
    assert code == 0
    doc = json.loads(capsys.readouterr().out)
    assert doc["verdict"] == "unknown"


def test_identify_with_multiple_models_reports_positive_set(tmp_path, capsys):
    profiles = _make_profiles(tmp_path, ["outlet", "camera-streamer", "hub-conduit"])
    model_paths = []
    for positive in ("outlet", "camera-streamer"):
        model = tmp_path / f"{positive}.model.json"
        assert main(["train", "--profiles", *profiles, "--positive", positive, "--out", str(model)]) == 0
        model_paths.append(str(model))
    capsys.readouterr()

    cam = ARCHETYPES["camera-streamer"]
    frames, _ = generate_trace(cam, 150, seed=93)
    target = tmp_path / "target.pcap"
    write_capture(target, frames)
    code = main(["identify", *model_paths, "--pcap", str(target), "--mac", format_mac(cam.mac)])
    assert code == 0
    doc = json.loads(capsys.readouterr().out)
    assert doc["verdict"] == "camera-streamer"
    assert set(doc["positives_per_model"]) == {"outlet", "camera-streamer"}
    assert ["camera-streamer"] in doc["per_fingerprint"]


def test_identify_insufficient_traffic(tmp_path, capsys):
    arch = ARCHETYPES["outlet"]
    frames, _ = generate_trace(arch, 3, seed=92)
    pcap = tmp_path / "tiny.pcap"
    write_capture(pcap, frames)
    model = tmp_path / "m.json"
    profiles = _make_profiles(tmp_path, ["outlet", "hub-conduit"], packets=300, seed=70)
    assert main(["train", "--profiles", *profiles, "--positive", "outlet", "--out", str(model)]) == 0
    code = main(["identify", str(model), "--pcap", str(pcap)])
    assert code == 3
    assert "insufficient traffic" in capsys.readouterr().err


def test_evaluate_defaults_and_determinism(tmp_path, capsys):
    profiles = _make_profiles(tmp_path, ["outlet", "camera-streamer", "hub-conduit"])
    out_a = tmp_path / "report-a.json"
    out_b = tmp_path / "report-b.json"
    for out in (out_a, out_b):
        code = main(["evaluate", "--profiles", *profiles, "--seed", "6", "--out", str(out)])
        assert code == 0
    assert out_a.read_bytes() == out_b.read_bytes()
    doc = json.loads(out_a.read_text())
    assert doc["folds"] == 5
    assert doc["classifier"] == "boosted"
    assert doc["variant"] == "20-features"
    stdout = capsys.readouterr().out
    assert "mean_tpr" in stdout


def test_unknown_flag_rejected(capsys):
    code = main(["sessions", "--pcap", "x.pcap", "--bogus"])
    assert code == 2
    assert "error: config:" in capsys.readouterr().err


def test_missing_pcap_is_data_error(capsys):
    code = main(["sessions", "--pcap", "/nonexistent/file.pcap"])
    assert code == 3
    assert "error: data:" in capsys.readouterr().err


def test_bad_magic_is_data_error(tmp_path, capsys):
    path = tmp_path / "garbage.pcap"
    path.write_bytes(b"not a capture at all")
    code = main(["sessions", "--pcap", str(path)])
    assert code == 3
    assert "error: data:" in capsys.readouterr().err


def test_unknown_variant_rejected(tmp_path, capsys):
    code = main(["evaluate", "--profiles", "p.json", "--variant", "7"])
    assert code == 2
