import numpy as np
import pytest

from spca import matrix_io
from spca.core import SelfPacedConfig, fit_spca
from spca.errors import DataFormatError


def test_matrix_reads_back_bit_exactly(tmp_path, rng):
    M = rng.standard_normal((4, 7)) * 10.0 ** rng.integers(-12, 12, size=(4, 7))
    matrix_io.write_matrix(tmp_path / "m.csv", M)
    np.testing.assert_array_equal(matrix_io.read_matrix(tmp_path / "m.csv"), M)


def test_matrix_file_layout(tmp_path):
    matrix_io.write_matrix(tmp_path / "m.csv", [[1.0, 0.5], [0.1, -2.0]])
    assert (tmp_path / "m.csv").read_text() == "2,2\n1,0.5\n0.10000000000000001,-2\n"


@pytest.mark.parametrize(
    "text, message",
    [
        ("", "missing matrix header"),
        ("2\n1\n2\n", "expected matrix header"),
        ("0,2\n", "must be positive"),
        ("2,2\n1,2\n", "expected 2 matrix rows"),
        ("2,2\n1,2\n3\n", "expected 2 values"),
        ("1,2\n1,x\n", "is not a number"),
        ("1,1\n1\n2\n", "unexpected data"),
    ],
)
def test_malformed_matrices(tmp_path, text, message):
    (tmp_path / "m.csv").write_text(text)
    with pytest.raises(DataFormatError, match=message):
        matrix_io.read_matrix(tmp_path / "m.csv")


def test_model_round_trip_with_extra_headers(tmp_path, rng):
    U, _ = np.linalg.qr(rng.standard_normal((5, 2)))
    w = rng.uniform(size=8)
    matrix_io.write_model(tmp_path / "model.txt", U, w, 1.0, 0.1, 15.0, method="l2p", outer_iters=10)
    lines = (tmp_path / "model.txt").read_text().splitlines()
    assert lines[:6] == ["method=l2p", "outer_iters=10", "k=2", "p=1", "eta=0.10000000000000001", "c=15"]

    model = matrix_io.read_model(tmp_path / "model.txt")
    np.testing.assert_array_equal(model.U, U)
    np.testing.assert_array_equal(model.weights, w)
    assert (model.k, model.p, model.eta, model.c) == (2, 1.0, 0.1, 15.0)
    assert model.method == "l2p"
    assert model.headers == {"method": "l2p", "outer_iters": "10"}


def test_model_defaults_to_self_paced(tmp_path):
    matrix_io.write_model(tmp_path / "model.txt", np.eye(3)[:, :1], [1.0, 0.0], 2.0, 0.5, 1.0)
    assert matrix_io.read_model(tmp_path / "model.txt").method == "spca"


def test_model_with_unused_parameters(tmp_path):
    U = np.eye(3)[:, :1]
    matrix_io.write_model(tmp_path / "model.txt", U, [1.0, 1.0], None, None, None, method="pca")
    assert (tmp_path / "model.txt").read_text().splitlines()[1:5] == ["k=1", "p=", "eta=", "c="]
    model = matrix_io.read_model(tmp_path / "model.txt")
    assert (model.p, model.eta, model.c) == (None, None, None)


def test_model_without_weights_is_rejected(tmp_path):
    (tmp_path / "model.txt").write_text("k=1\np=1\neta=0.1\nc=15\n2,1\n1\n0\n")
    with pytest.raises(DataFormatError, match="weight line"):
        matrix_io.read_model(tmp_path / "model.txt")


def test_model_header_must_match_the_basis(tmp_path):
    (tmp_path / "model.txt").write_text("k=2\np=1\neta=0.1\nc=15\n2,1\n1\n0\n1,1\n")
    with pytest.raises(DataFormatError, match="k=2"):
        matrix_io.read_model(tmp_path / "model.txt")


def test_model_missing_header(tmp_path):
    (tmp_path / "model.txt").write_text("k=1\np=1\nc=15\n2,1\n1\n0\n1,1\n")
    with pytest.raises(DataFormatError, match="eta="):
        matrix_io.read_model(tmp_path / "model.txt")


def test_key_values_skip_comments(tmp_path):
    (tmp_path / "run.cfg").write_text("# sweep settings\n\nk = 3\neta=0.2  # slower pacing\n")
    assert matrix_io.read_key_values(tmp_path / "run.cfg") == {"k": "3", "eta": "0.2"}


def test_key_values_round_trip(tmp_path):
    values = {"dataset": "synthetic", "height": "4", "seed_split": "7"}
    matrix_io.write_key_values(tmp_path / "split.txt", values)
    assert matrix_io.read_key_values(tmp_path / "split.txt") == values


def test_key_values_reject_bare_lines(tmp_path):
    (tmp_path / "run.cfg").write_text("k=3\njust words\n")
    with pytest.raises(DataFormatError, match=":2:"):
        matrix_io.read_key_values(tmp_path / "run.cfg")


def test_history_round_trip(tmp_path, occluded_synthetic):
    X = occluded_synthetic().matrix
    _, _, history = fit_spca(X, SelfPacedConfig(k=2, outer_iters=3))
    matrix_io.write_history(tmp_path, history)
    restored = matrix_io.read_history(tmp_path)

    assert len(restored) == 3
    for before, after in zip(history, restored):
        assert after.iteration == before.iteration
        assert after.objective == before.objective
        assert after.trace == before.trace
        assert after.inner_iterations == before.inner_iterations
        assert after.fidelity.normalized
        assert after.fidelity.scale == before.fidelity.scale
        np.testing.assert_array_equal(after.weights, before.weights)
        np.testing.assert_array_equal(after.fidelity.ell, before.fidelity.ell)
        np.testing.assert_array_equal(after.raw_fidelity, before.raw_fidelity)


def test_history_without_raw_fidelities(tmp_path, occluded_synthetic):
    X = occluded_synthetic().matrix
    _, _, history = fit_spca(X, SelfPacedConfig(k=2, outer_iters=2))
    matrix_io.write_history(tmp_path, history)
    (tmp_path / matrix_io.RAW_FIDELITY_FILE).unlink()
    restored = matrix_io.read_history(tmp_path)
    np.testing.assert_array_equal(restored[1].raw_fidelity, history[1].fidelity.ell)


def test_history_csv_header(tmp_path, occluded_synthetic):
    X = occluded_synthetic().matrix
    _, _, history = fit_spca(X, SelfPacedConfig(k=2, outer_iters=1))
    matrix_io.write_history(tmp_path, history)
    header = (tmp_path / matrix_io.HISTORY_FILE).read_text().splitlines()[0].split(",")
    assert header[:4] == ["iter", "objective", "inner_iters", "w_0"]
    assert len(header) == 3 + X.shape[1]


def test_frozen_scale_history_round_trip(tmp_path, occluded_synthetic):
    X = occluded_synthetic().matrix
    _, _, history = fit_spca(X, SelfPacedConfig(k=2, outer_iters=3, normalization="first"))
    matrix_io.write_history(tmp_path, history)
    restored = matrix_io.read_history(tmp_path)
    assert [r.fidelity.normalized for r in restored] == [True, False, False]
    for before, after in zip(history, restored):
        assert after.fidelity.scale == before.fidelity.scale
