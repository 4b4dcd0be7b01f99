import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from cowtopo.preprocess import (
    Modality,
    PreprocessConfig,
    normalize,
    preprocess_case,
    resample,
    resampled_shape,
    truncate,
)
from cowtopo.volume import LabelVolume, Spacing, ValidationError, Volume

TARGET = (0.6, 0.3525, 0.3525)


def vol(values, spacing=TARGET):
    return Volume(np.asarray(values, dtype=float).reshape(1, 1, -1), spacing)


def test_modality_members():
    assert {m.value for m in Modality} == {"cta", "mra"}
    assert Modality.parse("CTA") is Modality.CTA
    with pytest.raises(ValueError):
        Modality.parse("pet")


def test_default_config_constants():
    cfg = PreprocessConfig()
    assert cfg.cta_window == (-1000.0, 1800.0)
    assert cfg.mra_window == (0.0, 700.0)
    assert cfg.target_spacing.as_tuple() == TARGET


def test_config_validation():
    with pytest.raises(ValidationError):
        PreprocessConfig(cta_window=(5, 5))
    with pytest.raises(ValidationError):
        PreprocessConfig(target_spacing=(0, 1, 1))
    with pytest.raises(ValidationError):
        PreprocessConfig(label_order=1)


def test_truncate_windows():
    assert truncate(vol([2500]), "cta").data.ravel().tolist() == [1800]
    assert truncate(vol([-5]), "mra").data.ravel().tolist() == [0]
    assert truncate(vol([300]), "cta").data.ravel().tolist() == [300]


@settings(max_examples=50, deadline=None)
@given(st.lists(st.floats(-5000, 5000), min_size=2, max_size=20), st.sampled_from(["cta", "mra"]))
def test_truncate_idempotent_and_monotone(values, modality):
    v = vol(values)
    once = truncate(v, modality)
    assert np.array_equal(truncate(once, modality).data, once.data)
    order = np.argsort(values, kind="stable")
    assert np.all(np.diff(once.data.ravel()[order]) >= 0)


def test_resample_identity():
    rng = np.random.default_rng(0)
    v = Volume(rng.normal(size=(4, 5, 6)), TARGET)
    out = resample(v)
    assert out.shape == v.shape and np.array_equal(out.data, v.data)
    lbl = LabelVolume(rng.integers(0, 14, size=(4, 5, 6)), TARGET)
    assert np.array_equal(resample(lbl).data, lbl.data)


def test_resample_z_extent():
    v = Volume(np.zeros((100, 4, 4)), (1.2, 0.3525, 0.3525))
    out = resample(v)
    assert out.shape == (200, 4, 4)
    assert out.spacing == Spacing(*TARGET)


def test_resampled_shape_minimum_one():
    assert resampled_shape((1, 1, 1), Spacing(0.1, 0.1, 0.1), Spacing(0.6, 0.3525, 0.3525)) == (1, 1, 1)


def test_label_resampling_never_invents_ids():
    rng = np.random.default_rng(1)
    data = rng.choice([0, 3, 7, 12], size=(9, 11, 13))
    lbl = LabelVolume(data, (0.9, 0.5, 0.2))
    out = resample(lbl)
    assert isinstance(out, LabelVolume)
    assert set(np.unique(out.data)) <= set(np.unique(data))


def test_linear_resampling_stays_in_input_range():
    rng = np.random.default_rng(2)
    v = Volume(rng.uniform(-3, 7, size=(6, 7, 8)), (1.0, 0.7, 0.5))
    out = resample(v)
    assert out.data.min() >= v.data.min() - 1e-12 and out.data.max() <= v.data.max() + 1e-12


def test_resample_updates_affine_scale():
    v = Volume(np.zeros((10, 10, 10)), (1.2, 0.705, 0.705))
    out = resample(v)
    assert np.allclose(np.diag(out.affine)[:3], [0.3525, 0.3525, 0.6])


def test_normalize_endpoints():
    out = normalize(vol([-1000, 0, 1800]))
    assert out.data.ravel().tolist() == [0.0, pytest.approx(1000 / 2800), 1.0]


def test_normalize_constant_is_zero():
    assert not normalize(vol([500, 500, 500])).data.any()


def test_preprocess_case_output():
    rng = np.random.default_rng(3)
    v = Volume(rng.uniform(-2000, 3000, size=(10, 12, 14)), (1.0, 0.5, 0.5))
    out = preprocess_case(v, "cta")
    assert out.spacing.as_tuple() == pytest.approx(TARGET, abs=1e-6)
    assert out.data.min() == 0.0 and out.data.max() == 1.0


def test_constant_phantoms_both_modalities():
    a = preprocess_case(Volume(np.full((4, 4, 4), 123.0), (0.8, 0.4, 0.4)), "cta")
    b = preprocess_case(Volume(np.full((4, 4, 4), 123.0), (0.8, 0.4, 0.4)), "mra")
    assert not a.data.any() and not b.data.any()
    assert a.spacing == b.spacing and a.shape == b.shape


@settings(max_examples=25, deadline=None)
@given(st.integers(0, 10_000), st.sampled_from(["cta", "mra"]))
def test_preprocess_idempotent(seed, modality):
    rng = np.random.default_rng(seed)
    shape = tuple(rng.integers(2, 9, size=3))
    spacing = tuple(rng.uniform(0.2, 1.5, size=3))
    v = Volume(rng.uniform(-1500, 2500, size=shape), spacing)
    once = preprocess_case(v, modality)
    twice = preprocess_case(once, modality)
    assert twice.shape == once.shape
    assert np.array_equal(twice.data, once.data)
