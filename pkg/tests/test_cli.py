import csv

import numpy as np
import pytest

import oracles
from sfrhand import GaussKernel, JointSetUVD, decode_plane, encode_heatmap, io
from sfrhand.cli import main
from sfrhand.metrics import uvd_to_xyz


@pytest.fixture(scope="module")
def corpus(tmp_path_factory):
    out = tmp_path_factory.mktemp("corpus")
    assert main(["generate", "--out", str(out), "--count", "10", "--joints", "6", "--size-n", "32",
                 "--blob-radius", "4", "--seed", "3"]) == 0
    return out


def args(corpus, *rest):
    return [str(corpus / "frames.sfrd"), str(corpus / "annotations.csv"), "--size-n", "32", *rest]


def read_report(path):
    with open(path) as fh:
        return list(csv.DictReader(fh))


def test_generate_writes_all_files(corpus):
    for name in ("frames.sfrd", "annotations.csv", "geometry.csv", "manifest.json"):
        assert (corpus / name).exists()
    ids, frames = io.read_frames(corpus / "frames.sfrd")
    assert len(frames) == 10 and frames[0].resolution == 32


def test_encode_writes_ten_bundles(corpus, tmp_path, capsys):
    assert main(["encode", *args(corpus, "--out", str(tmp_path / "b"))]) == 0
    bundle = io.read_bundle(tmp_path / "b")
    assert sorted(bundle, key=int) == [str(i) for i in range(10)]
    assert bundle["0"]["heatmap"].shape == (6, 32, 32)
    assert "encoded 10 frames" in capsys.readouterr().out


def test_encode_malformed_row(corpus, tmp_path, capsys):
    text = (corpus / "annotations.csv").read_text().splitlines()
    text[4] = "0,3,0.5,oops,0.5"
    (tmp_path / "bad.csv").write_text("\n".join(text) + "\n")
    rc = main(["encode", str(corpus / "frames.sfrd"), str(tmp_path / "bad.csv"), "--size-n", "32",
               "--out", str(tmp_path / "b")])
    assert rc != 0
    assert "bad.csv:5" in capsys.readouterr().err


def test_encode_empty_input(tmp_path, capsys):
    (tmp_path / "f.sfrd").write_text("")
    (tmp_path / "a.csv").write_text("frame_id,joint_id,u,v,d\n")
    assert main(["encode", str(tmp_path / "f.sfrd"), str(tmp_path / "a.csv"), "--out", str(tmp_path / "b")]) != 0
    assert "no frames" in capsys.readouterr().err
    (tmp_path / "f.sfrd").write_text("SFRD1 4 0\n")
    assert main(["encode", str(tmp_path / "f.sfrd"), str(tmp_path / "a.csv"), "--out", str(tmp_path / "b")]) != 0
    assert "no frames" in capsys.readouterr().err


def test_encode_skips_out_of_hull_frame(corpus, tmp_path, capsys):
    ann = io.read_annotations(corpus / "annotations.csv")
    j = ann["2"].joints.copy()
    j[1, 0] = 0.0
    ann["2"] = JointSetUVD(j)
    io.write_annotations(tmp_path / "a.csv", ann)
    rc = main(["encode", str(corpus / "frames.sfrd"), str(tmp_path / "a.csv"), "--size-n", "32",
               "--out", str(tmp_path / "b")])
    assert rc == 1
    assert "frame 2: skipped (joint 1" in capsys.readouterr().err
    assert "2" not in io.read_bundle(tmp_path / "b")


def test_roundtrip_interior_corpus_passes(corpus, tmp_path, capsys):
    assert main(["roundtrip", *args(corpus, "--report", str(tmp_path / "r.csv"))]) == 0
    rows = read_report(tmp_path / "r.csv")
    assert len(rows) == 60 and {r["status"] for r in rows} == {"pass"}
    assert "-> PASS" in capsys.readouterr().out


def test_roundtrip_tol_zero_fails(corpus, tmp_path):
    assert main(["roundtrip", *args(corpus, "--tol", "0", "--report", str(tmp_path / "r.csv"))]) == 1
    assert {r["status"] for r in read_report(tmp_path / "r.csv")} == {"fail"}


def test_roundtrip_flags_border_joint(tmp_path):
    io.write_frames(tmp_path / "f.sfrd", [np.full((32, 32), 0.5)])
    io.write_annotations(tmp_path / "a.csv", {"0": [[0.5, 0.5, 0.45], [1.5 / 32, 0.5, 0.55]]})
    rc = main(["roundtrip", str(tmp_path / "f.sfrd"), str(tmp_path / "a.csv"), "--size-n", "32",
               "--report", str(tmp_path / "r.csv")])
    statuses = [r["status"] for r in read_report(tmp_path / "r.csv")]
    assert statuses == ["pass", "boundary"]
    assert rc == 0
    # flagging matters: the smoothed border heatmap misses the tolerance
    p = (1.5 / 32, 0.5)
    assert abs(decode_plane(encode_heatmap(p, 32, GaussKernel(7)))[0] - p[0]) > 1e-6


def test_roundtrip_from_bundle(corpus, tmp_path):
    main(["encode", *args(corpus, "--out", str(tmp_path / "b"))])
    assert main(["roundtrip", *args(corpus, "--bundle", str(tmp_path / "b"), "--tol", "1e-5")]) == 0


def test_decode_matches_annotations(corpus, tmp_path):
    main(["encode", *args(corpus, "--out", str(tmp_path / "b"))])
    assert main(["decode", str(corpus / "frames.sfrd"), str(tmp_path / "b"), "--size-n", "32",
                 "--out", str(tmp_path / "p.csv")]) == 0
    pred, gt = io.read_annotations(tmp_path / "p.csv"), io.read_annotations(corpus / "annotations.csv")
    for fid in gt:
        np.testing.assert_allclose(pred[fid].joints, gt[fid].joints, atol=1e-5)


def test_gradcheck(capsys):
    assert main(["gradcheck", "--instances", "3"]) == 0
    first = capsys.readouterr().out
    assert "PASS" in first and "FAIL" not in first
    main(["gradcheck", "--instances", "3"])
    assert capsys.readouterr().out == first
    assert main(["gradcheck", "--instances", "0"]) != 0
    assert "instances" in capsys.readouterr().err


def test_fit_full_mode(corpus, tmp_path, capsys):
    out = tmp_path / "fit"
    rc = main(["fit", *args(corpus, "--frame-id", "1", "--grad-tol", "1e-9", "--out", str(out), "--figure")])
    assert rc == 0
    msg = capsys.readouterr().out
    err = float(msg.split("max_coordinate_error=")[1])
    assert err < 1e-3
    for name in ("trace.csv", "decoded.csv", "trace.png", "joint0.png", "bundle/manifest.csv"):
        assert (out / name).exists()
    decoded = io.read_annotations(out / "decoded.csv")["1"]
    gt = io.read_annotations(corpus / "annotations.csv")["1"]
    assert np.max(np.abs(decoded.joints - gt.joints)) < 1e-3


def test_fit_trace_deterministic(corpus, tmp_path):
    for name in ("a", "b"):
        main(["fit", *args(corpus, "--max-iters", "20", "--seed", "7", "--out", str(tmp_path / name))])
    assert (tmp_path / "a" / "trace.csv").read_bytes() == (tmp_path / "b" / "trace.csv").read_bytes()


def test_fit_unknown_mode_is_usage_error(corpus, tmp_path):
    with pytest.raises(SystemExit) as exc:
        main(["fit", *args(corpus, "--mode", "bogus", "--out", str(tmp_path / "f"))])
    assert exc.value.code == 2


def test_eval_identical_predictions(corpus, tmp_path):
    fig = tmp_path / "curve.png"
    assert main(["eval", str(corpus / "annotations.csv"), str(corpus / "annotations.csv"),
                 str(corpus / "geometry.csv"), "--out", str(tmp_path / "m.csv"), "--figure", str(fig)]) == 0
    per_joint, overall, t, f = io.read_metrics(tmp_path / "m.csv")
    assert overall == 0.0 and not per_joint.any()
    assert f[0] == 0.0 and np.all(f[1:] == 1.0)
    assert fig.exists() and (tmp_path / "curve_per_joint.png").exists()


def test_eval_perturbed_matches_oracle(corpus, tmp_path):
    gt = io.read_annotations(corpus / "annotations.csv")
    geo = io.read_geometry(corpus / "geometry.csv")
    rng = np.random.default_rng(0)
    pred = {k: JointSetUVD(np.clip(v.joints + rng.normal(0, 0.02, v.joints.shape), 0, 1)) for k, v in gt.items()}
    io.write_annotations(tmp_path / "p.csv", pred)
    assert main(["eval", str(tmp_path / "p.csv"), str(corpus / "annotations.csv"), str(corpus / "geometry.csv"),
                 "--out", str(tmp_path / "m.csv"), "--thresholds", "0:40:2"]) == 0
    per_joint, overall, t, f = io.read_metrics(tmp_path / "m.csv")
    P, G = [], []
    for k in gt:
        intr, cube, crop = geo[k]
        P.append(uvd_to_xyz(pred[k], cube, intr, crop).tolist())
        G.append(uvd_to_xyz(gt[k], cube, intr, crop).tolist())
    exp_j, exp = oracles.mean_error(P, G)
    np.testing.assert_allclose(per_joint, exp_j, atol=1e-9)
    assert abs(overall - exp) < 1e-9
    assert t.tolist() == list(np.arange(0, 41, 2.0))
    np.testing.assert_allclose(f, oracles.threshold_fractions(P, G, t), atol=1e-12)


def test_eval_joint_count_mismatch(corpus, tmp_path, capsys):
    gt = io.read_annotations(corpus / "annotations.csv")
    io.write_annotations(tmp_path / "p.csv", {k: JointSetUVD(v.joints[:4]) for k, v in gt.items()})
    assert main(["eval", str(tmp_path / "p.csv"), str(corpus / "annotations.csv"), str(corpus / "geometry.csv"),
                 "--out", str(tmp_path / "m.csv")]) != 0
    err = capsys.readouterr().err
    assert "4 joints" in err and "6" in err
