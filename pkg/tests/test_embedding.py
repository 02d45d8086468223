import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from numpy.testing import assert_allclose

from dmdembed.embedding import (
    build_embedding,
    export_embedding,
    import_embedding,
    select_representatives,
)
from dmdembed.errors import DataError
from dmdembed.forecaster import ForecastWindows, Window
from dmdembed.embedding import attach_covariates


def test_build_embedding_quarter_turn():
    emb = build_embedding(np.array([1j]), span=(0, 4), project_unit_circle=False)
    assert_allclose(emb.table, [[1, 0], [0, 1], [-1, 0], [0, -1]], atol=1e-15)
    assert emb.origin_step == 0


def test_build_embedding_constant_mode():
    emb = build_embedding(np.array([1.0 + 0j]), span=(0, 5), project_unit_circle=False)
    assert_allclose(emb.table, np.tile([1.0, 0.0], (5, 1)))


def test_projection_strips_modulus():
    lam = 0.9 * np.exp(1j * 2 * np.pi / 24)
    emb = build_embedding(np.array([lam]), span=(0, 24), project_unit_circle=True)
    assert_allclose(emb.table[12], [-1.0, 0.0], atol=1e-8)
    assert emb.unit_circle_projected


def test_row_zero_identity_and_unit_circle_norm():
    lams = np.array([np.exp(1j * 2 * np.pi / 72), np.exp(1j * 2 * np.pi / 504)])
    emb = build_embedding(lams, span=(0, 600), project_unit_circle=True)
    r = lams.size
    assert_allclose(emb.table[0], [1.0] * r + [0.0] * r, atol=1e-15)
    norms = emb.table[:, :r] ** 2 + emb.table[:, r:] ** 2
    assert np.max(np.abs(norms - 1.0)) <= 1e-10


def test_recurrence_consistency():
    lams = np.array([np.exp(1j * 0.37), np.exp(1j * 0.011)])
    emb = build_embedding(lams, span=(0, 300), project_unit_circle=True)
    r = lams.size
    z = emb.table[:, :r] + 1j * emb.table[:, r:]
    advanced = z[:-1] * lams[None, :]
    rel = np.abs(z[1:] - advanced) / np.maximum(np.abs(z[1:]), 1e-12)
    assert np.max(rel) <= 1e-8


@given(st.integers(2, 80))
@settings(max_examples=25, deadline=None)
def test_periodicity(p):
    lam = np.exp(1j * 2 * np.pi / p)
    emb = build_embedding(np.array([lam]), span=(0, 3 * p), project_unit_circle=False)
    assert np.max(np.abs(emb.table[p:] - emb.table[:-p])) <= 1e-8


def test_boundedness_under_projection():
    lams = np.array([1.3 * np.exp(1j * 0.5), 0.2 * np.exp(1j * 1.1)])
    emb = build_embedding(lams, span=(0, 500), project_unit_circle=True)
    assert np.max(np.abs(emb.table)) <= 1.0 + 1e-12


def test_extrapolation_consistency():
    lams = np.array([np.exp(1j * 2 * np.pi / 72), np.exp(1j * 2 * np.pi / 504)])
    length = 512
    first = build_embedding(lams, span=(0, length))
    second = build_embedding(lams, span=(length, 2 * length))
    joined = np.vstack([first.table, second.table])
    direct = build_embedding(lams, span=(0, 2 * length))
    assert np.max(np.abs(joined - direct.table)) <= 1e-8
    assert second.origin_step == length


def test_build_embedding_errors():
    with pytest.raises(ValueError):
        build_embedding(np.array([1.0 + 0j]), span=(3, 3))
    with pytest.raises(ValueError):
        build_embedding(np.array([0.0 + 0j]), span=(0, 2))
    with pytest.raises(ValueError):
        build_embedding(np.array([1.0 - 0.5j]), span=(0, 2))


def test_empty_embedding_allowed():
    emb = build_embedding(np.array([], dtype=complex), span=(0, 6))
    assert emb.table.shape == (6, 0)
    assert emb.n_modes == 0


def test_select_representatives():
    lam = 0.95 * np.exp(1j * 0.8)
    eigs = np.array([lam, np.conj(lam), 0.7, np.conj(0.7 + 0j)])
    reps = select_representatives(eigs)
    assert reps.size == 3
    assert np.all(reps.imag >= 0)
    assert np.sum(np.isreal(reps)) == 2


def window_fixture(n_windows=3, p=4, q=2, channels=1, anchor0=3):
    wins = []
    for k in range(n_windows):
        anchor = anchor0 + k
        wins.append(
            Window(
                inputs=np.full((p, channels), float(k)),
                target=np.zeros(q),
                future_covariates=np.zeros((q, 0)),
                node_index=0,
                anchor_step=anchor,
                target_mask=np.ones(q, bool),
            )
        )
    return ForecastWindows(split="train", windows=wins)


def test_attach_covariates_empty_embedding_keeps_windows():
    fw = window_fixture()
    emb = build_embedding(np.array([], dtype=complex), span=(0, 20))
    out = attach_covariates(fw, emb)
    assert out.attachment.base_channels == 1
    assert out.attachment.embedded_channels == 1
    for before, after in zip(fw.windows, out.windows):
        assert after.inputs.shape == before.inputs.shape
        assert after.future_covariates.shape == (2, 0)


def test_attach_covariates_constant_mode_channels():
    fw = window_fixture(n_windows=1, p=1, q=1, anchor0=0)
    emb = build_embedding(np.array([1.0 + 0j]), span=(0, 4))
    out = attach_covariates(fw, emb)
    win = out.windows[0]
    assert_allclose(win.inputs, [[0.0, 1.0, 0.0]])
    assert_allclose(win.future_covariates, [[1.0, 0.0]])


def test_attach_covariates_channel_contract():
    fw = window_fixture(n_windows=2, p=4, q=2)
    lams = np.array([np.exp(1j * 0.3), np.exp(1j * 0.05)])
    emb = build_embedding(lams, span=(0, 30))
    out = attach_covariates(fw, emb)
    assert out.attachment.embedded_channels == 1 + 2 * 2
    for win in out.windows:
        assert win.inputs.shape == (4, 5)
        assert win.future_covariates.shape == (2, 4)


def test_attach_covariates_reports_first_uncovered_step():
    fw = window_fixture(n_windows=1, p=2, q=2, anchor0=5)
    emb = build_embedding(np.array([1j]), span=(0, 6))  # covers 0..5, needs 6,7
    with pytest.raises(DataError, match="step 6"):
        attach_covariates(fw, emb)


def test_export_import_round_trip(tmp_path):
    emb = build_embedding(np.array([1j]), span=(0, 4), project_unit_circle=False)
    dest = tmp_path / "emb.csv"
    export_embedding(emb, dest)
    steps, table = import_embedding(dest)
    assert np.array_equal(steps, np.arange(4))
    assert np.array_equal(table, emb.table)  # bit-identical at 17 digits


def test_export_constant_mode_rows(tmp_path):
    emb = build_embedding(np.array([1.0 + 0j]), span=(0, 2))
    dest = tmp_path / "emb.csv"
    export_embedding(emb, dest)
    lines = dest.read_text().strip().splitlines()
    assert lines[0] == "step,re_1,im_1"
    assert lines[1] == "0,1,0"
    assert lines[2] == "1,1,0"


def test_import_rejects_foreign_file(tmp_path):
    bad = tmp_path / "x.csv"
    bad.write_text("a,b\n1,2\n")
    with pytest.raises(DataError):
        import_embedding(bad)
