import numpy as np
import pytest

from combofit import SimScenario, SurfaceGrid, ValidationError, sample_plate
from combofit.io import (PLATE_HEADER, ingest_plate, read_json,
                         read_samples_csv, read_surface_csv, read_truth_csv,
                         samples_header, write_json, write_plate_csv,
                         write_samples_csv, write_surface_csv, write_truth_csv)

PLATE_2X2 = """drug1_conc,drug2_conc,replicate,viability
1.0,0.0,1,0.55
0.0,0.0,1,1.02
0.0,2.5,1,0.81
1.0,2.5,1,0.33
"""


# ---------------------------------------------------------------------------
# Plate CSV


def test_ingest_small_hand_written_plate(tmp_path):
    path = tmp_path / "plate.csv"
    path.write_text(PLATE_2X2)
    data = ingest_plate(path)
    np.testing.assert_array_equal(data.conc1, [0.0, 1.0])
    np.testing.assert_array_equal(data.conc2, [0.0, 2.5])
    assert data.n_rep == 1
    assert data.viability[0, 0, 0] == 1.02
    assert data.viability[1, 0, 0] == 0.55
    assert data.viability[0, 1, 0] == 0.81
    assert data.viability[1, 1, 0] == 0.33


def test_plate_round_trip_is_bit_exact(tmp_path, small_plate):
    path = tmp_path / "plate.csv"
    write_plate_csv(path, small_plate)
    back = ingest_plate(path, drug_names=("a", "b"))
    np.testing.assert_array_equal(back.conc1, small_plate.conc1)
    np.testing.assert_array_equal(back.conc2, small_plate.conc2)
    np.testing.assert_array_equal(back.viability, small_plate.viability)
    assert back.drug_names == ("a", "b")


def test_plate_write_is_deterministic(tmp_path, small_plate):
    p1, p2 = tmp_path / "a.csv", tmp_path / "b.csv"
    write_plate_csv(p1, small_plate)
    write_plate_csv(p2, small_plate)
    assert p1.read_bytes() == p2.read_bytes()


def test_ingest_accepts_crlf(tmp_path):
    path = tmp_path / "plate.csv"
    path.write_bytes(PLATE_2X2.replace("\n", "\r\n").encode())
    data = ingest_plate(path)
    assert data.viability[1, 1, 0] == 0.33


def test_ingest_reports_missing_replicate(tmp_path):
    lines = PLATE_2X2.splitlines()
    extra = ["1.0,2.5,2,0.30", "0.0,0.0,2,0.99", "0.0,2.5,2,0.78"]
    path = tmp_path / "plate.csv"
    path.write_text("\n".join(lines + extra) + "\n")
    with pytest.raises(ValidationError) as err:
        ingest_plate(path)
    message = str(err.value)
    assert "(1, 0)" in message
    assert "replicate 2" in message


def test_ingest_error_paths(tmp_path):
    path = tmp_path / "plate.csv"

    def expect(text, fragment):
        path.write_text(text)
        with pytest.raises(ValidationError) as err:
            ingest_plate(path)
        assert fragment in str(err.value)

    expect("", "empty file")
    expect("x,y,z,w\n1,2,3,4\n", "header must be")
    expect(",".join(PLATE_HEADER) + "\n", "no data rows")
    expect(",".join(PLATE_HEADER) + "\n0.0,0.0,1\n", "expected 4 fields")
    expect(",".join(PLATE_HEADER) + "\n0.0,oops,1,0.5\n", "non-numeric")
    expect(",".join(PLATE_HEADER) + "\n0.0,0.0,first,0.5\n", "integer")
    expect(",".join(PLATE_HEADER) + "\n0.0,0.0,0,0.5\n", "start at 1")
    expect(",".join(PLATE_HEADER) + "\n0.0,0.0,1,inf\n", "non-finite")
    expect(PLATE_2X2 + "1.0,2.5,1,0.34\n", "duplicate")
    expect(",".join(PLATE_HEADER) + "\n1.0,2.0,1,0.5\n2.0,2.0,1,0.4\n"
           "1.0,4.0,1,0.3\n2.0,4.0,1,0.2\n", "zero dose")
    with pytest.raises(ValidationError) as err:
        ingest_plate(tmp_path / "not_there.csv")
    assert "cannot read" in str(err.value)


# ---------------------------------------------------------------------------
# Surface CSV


def test_surface_round_trip_is_bit_exact(tmp_path):
    rng = np.random.default_rng(31)
    surface = SurfaceGrid(values=rng.standard_normal((4, 6)),
                          axis1=np.linspace(-6.0, 5.0, 4),
                          axis2=np.linspace(-5.5, 5.5, 6))
    path = tmp_path / "surface.csv"
    write_surface_csv(path, surface)
    back = read_surface_csv(path, label="p")
    np.testing.assert_array_equal(back.values, surface.values)
    np.testing.assert_array_equal(back.axis1, surface.axis1)
    np.testing.assert_array_equal(back.axis2, surface.axis2)
    assert back.label == "p"


def test_surface_error_paths(tmp_path):
    path = tmp_path / "surface.csv"
    path.write_text("wrong,0.0\n1.0,0.5\n")
    with pytest.raises(ValidationError) as err:
        read_surface_csv(path)
    assert "corner" in str(err.value)
    path.write_text("log10_conc1\\log10_conc2,0.0,1.0\n0.0,0.5\n")
    with pytest.raises(ValidationError) as err:
        read_surface_csv(path)
    assert "ragged" in str(err.value)


# ---------------------------------------------------------------------------
# Truth CSV


def test_truth_round_trip_is_bit_exact(tmp_path):
    _, truths = sample_plate(SimScenario(3, seed=2))
    path = tmp_path / "truth.csv"
    write_truth_csv(path, truths)
    back = read_truth_csv(path)
    for name in ("p0", "delta", "p"):
        np.testing.assert_array_equal(back[name].values, truths[name].values)
        np.testing.assert_array_equal(back[name].axis1, truths[name].axis1)
        np.testing.assert_array_equal(back[name].axis2, truths[name].axis2)


def test_truth_detects_incomplete_grid(tmp_path):
    _, truths = sample_plate(SimScenario(1, seed=2))
    path = tmp_path / "truth.csv"
    write_truth_csv(path, truths)
    lines = path.read_text().splitlines()
    del lines[5]
    path.write_text("\n".join(lines) + "\n")
    with pytest.raises(ValidationError) as err:
        read_truth_csv(path)
    assert "incomplete" in str(err.value)


# ---------------------------------------------------------------------------
# Posterior samples CSV


def test_samples_round_trip_is_bit_exact(tmp_path, small_chain):
    path = tmp_path / "samples.csv"
    write_samples_csv(path, small_chain)
    back = read_samples_csv(path)
    assert len(back) == len(small_chain)
    for (chain_index, state), original in zip(back, small_chain.states):
        assert chain_index == 0
        for name in ("m1", "m2", "lambda1", "lambda2", "b1", "b2",
                     "gamma0", "gamma1", "gamma2", "sigma2_eps"):
            assert getattr(state, name) == getattr(original, name)
        assert state.sigma2_phi == original.sigma2_phi
        np.testing.assert_array_equal(state.C, original.C)


def test_samples_header_layout():
    header = samples_header(2, 3)
    assert header[:2] == ["chain", "sample"]
    assert header[-6:] == ["C_0_0", "C_0_1", "C_0_2", "C_1_0", "C_1_1", "C_1_2"]


def test_samples_error_paths(tmp_path, small_chain):
    path = tmp_path / "samples.csv"
    write_samples_csv(path, small_chain)
    lines = path.read_text().splitlines()

    bad = tmp_path / "bad.csv"
    bad.write_text("\n".join([lines[0].replace("m1", "mm1")] + lines[1:]) + "\n")
    with pytest.raises(ValidationError):
        read_samples_csv(bad)
    bad.write_text("\n".join([lines[0], lines[1] + ",0.0"]) + "\n")
    with pytest.raises(ValidationError) as err:
        read_samples_csv(bad)
    assert "ragged" in str(err.value)
    bad.write_text(lines[0] + "\n")
    with pytest.raises(ValidationError) as err:
        read_samples_csv(bad)
    assert "no samples" in str(err.value)
    bad.write_text("chain,sample,m1\n0,0,0.1\n")
    with pytest.raises(ValidationError):
        read_samples_csv(bad)


# ---------------------------------------------------------------------------
# JSON


def test_json_round_trip(tmp_path):
    payload = {"a": 1, "b": [0.5, 1.5], "c": {"d": "text"},
               "np_scalar": np.float64(0.25), "np_array": np.arange(3)}
    path = tmp_path / "out.json"
    write_json(path, payload)
    text = path.read_text()
    assert text.endswith("}\n")
    assert "  \"a\": 1" in text
    back = read_json(path)
    assert back == {"a": 1, "b": [0.5, 1.5], "c": {"d": "text"},
                    "np_scalar": 0.25, "np_array": [0, 1, 2]}


def test_json_error_paths(tmp_path):
    path = tmp_path / "bad.json"
    path.write_text("{not json")
    with pytest.raises(ValidationError) as err:
        read_json(path)
    assert "invalid JSON" in str(err.value)
    with pytest.raises(ValidationError):
        read_json(tmp_path / "missing.json")
    with pytest.raises(TypeError):
        write_json(tmp_path / "x.json", {"bad": object()})
