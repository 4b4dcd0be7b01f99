import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from cowtopo.metrics import (
    b0_error,
    balanced_accuracy,
    cl_dice,
    cohort_summary,
    dice,
    evaluate_case,
    hd95,
    surface,
    volume_diagonal,
)
from cowtopo.refine import refine_volume
from cowtopo.volume import ClassMap, CowClass, LabelVolume, ValidationError
from oracles import brute_force_hd95, surface_by_neighbours
from phantoms import TARGET_SPACING, complete_cow, fetal_left_cow, split_pcom_pair


def cube(shape=(10, 10, 10), lo=2, hi=6):
    m = np.zeros(shape, bool)
    m[lo:hi, lo:hi, lo:hi] = True
    return m


def test_dice_known_values():
    a = cube()
    assert dice(a, a) == 1.0
    half = a.copy()
    half[2:4] = False
    assert dice(half, a) == pytest.approx(2 * 32 / 96)
    e = np.zeros((3, 3, 3), bool)
    assert dice(e, e) == 1.0
    assert dice(a, np.zeros_like(a)) == 0.0


def test_dice_half_overlap():
    a = np.zeros((1, 1, 4), bool)
    b = np.zeros((1, 1, 4), bool)
    a[..., :2] = True
    b[..., 1:3] = True
    assert dice(a, b) == 0.5


def test_shape_mismatch():
    with pytest.raises(ValidationError):
        dice(np.zeros((2, 2, 2)), np.zeros((2, 2, 3)))


def test_cldice_identical_and_empty():
    a = cube()
    assert cl_dice(a, a) == 1.0
    e = np.zeros_like(a)
    assert cl_dice(e, e) == 1.0
    assert cl_dice(a, e) == 0.0 and cl_dice(e, a) == 0.0


def test_cldice_disjoint_is_zero():
    a = np.zeros((20, 9, 9), bool)
    b = np.zeros_like(a)
    a[2:18, 2, 2] = True
    b[2:18, 6, 6] = True
    assert cl_dice(a, b) == 0.0


def test_cldice_decreases_with_gap():
    gt = np.zeros((60, 7, 7), bool)
    gt[5:55, 2:5, 2:5] = True
    scores = []
    for gap in (0, 2, 6, 12, 24):
        pred = gt.copy()
        pred[30 - gap // 2:30 - gap // 2 + gap] = False
        scores.append(cl_dice(pred, gt))
    assert scores[0] == 1.0
    assert all(a >= b for a, b in zip(scores, scores[1:]))
    assert scores[-1] < scores[1]


def test_b0_error_cases():
    one = cube()
    two = one.copy()
    two[8, 8, 8] = True
    assert b0_error(one, one) == 0
    assert b0_error(two, one) == 1
    assert b0_error(np.zeros_like(one), one) == 1


@settings(max_examples=40, deadline=None)
@given(st.integers(0, 2**32 - 1))
def test_b0_triangle_inequality(seed):
    rng = np.random.default_rng(seed)
    a, b, c = (rng.random((8, 8, 8)) < rng.uniform(0.05, 0.3) for _ in range(3))
    assert b0_error(a, c) <= b0_error(a, b) + b0_error(b, c)
    assert b0_error(a, b) == b0_error(b, a)


def test_surface_matches_oracle(rng):
    for _ in range(5):
        m = rng.random((9, 10, 11)) < 0.5
        assert np.array_equal(surface(m), surface_by_neighbours(m))


def test_hd95_parallel_lines():
    a = np.zeros((10, 10, 10), bool)
    b = np.zeros_like(a)
    a[1:9, 2, 5] = True
    b[1:9, 5, 5] = True
    value, defined = hd95(a, b, TARGET_SPACING)
    assert defined
    assert value == pytest.approx(3 * 0.3525, abs=1e-12)
    assert value == pytest.approx(1.0575, abs=1e-12)


def test_hd95_identical_is_zero():
    a = cube()
    assert hd95(a, a, TARGET_SPACING) == (0.0, True)


def test_hd95_matches_brute_force(rng):
    for _ in range(8):
        a = rng.random((10, 10, 10)) < rng.uniform(0.05, 0.5)
        b = rng.random((10, 10, 10)) < rng.uniform(0.05, 0.5)
        a[0, 0, 0] = b[9, 9, 9] = True
        sp = tuple(rng.uniform(0.2, 1.2, 3))
        assert abs(hd95(a, b, sp)[0] - brute_force_hd95(a, b, sp)) <= 1e-9


def test_hd95_empty_side_uses_penalty():
    a = cube()
    e = np.zeros_like(a)
    value, defined = hd95(a, e, TARGET_SPACING)
    assert not defined
    assert value == pytest.approx(volume_diagonal(a.shape, TARGET_SPACING))
    assert hd95(e, a, TARGET_SPACING, empty_penalty=50.0) == (50.0, False)
    assert hd95(e, e, TARGET_SPACING) == (0.0, True)


def test_balanced_accuracy():
    assert balanced_accuracy(["a", "b", "a", "a"], ["a", "b", "b", "a"]) == pytest.approx(0.75)
    assert balanced_accuracy(["x", "x"], ["x", "y"]) == 0.5
    assert balanced_accuracy(["1111"], ["1111"]) == 1.0
    with pytest.raises(ValueError):
        balanced_accuracy([], [])
    with pytest.raises(ValueError):
        balanced_accuracy(["a"], ["a", "b"])


def test_evaluate_identical_case():
    gt = complete_cow()
    m = evaluate_case(gt, gt)
    assert m.class_avg_dice == 1.0 and m.class_avg_b0 == 0.0 and m.class_avg_hd95 == 0.0
    assert m.cldice == 1.0
    assert m.graph_pred == m.graph_gt


def test_evaluate_split_class():
    pred, gt = split_pcom_pair()
    m = evaluate_case(pred, gt)
    assert m.per_class["L-Pcom"].b0_error == 1
    assert m.class_avg_b0 == pytest.approx(1 / 13)
    assert m.per_class["BA"].dice == 1.0
    assert m.class_avg_dice < 1.0


def test_classes_mode_present_vs_all13():
    gt = complete_cow()
    data = np.array(gt.data)
    data[data == int(CowClass.THIRD_A2)] = 0
    gt = gt.with_data(data)
    present = evaluate_case(gt, gt)
    assert present.class_avg_dice == 1.0
    assert sum(m.present_in_gt for m in present.per_class.values()) == 12
    wrong = np.array(data)
    wrong[2:4, 40:44, 2:6] = int(CowClass.THIRD_A2)       # false-positive class absent from gt
    p12 = evaluate_case(gt.with_data(wrong), gt)
    p13 = evaluate_case(gt.with_data(wrong), gt, classes_mode="all13")
    assert p12.class_avg_dice == 1.0
    assert p13.class_avg_dice == pytest.approx(12 / 13)
    with pytest.raises(ValueError):
        evaluate_case(gt, gt, classes_mode="some")


def test_metrics_invariant_under_class_id_permutation(rng):
    pred, gt = split_pcom_pair()
    perm = rng.permutation(np.arange(1, 14))
    lut = np.zeros(14, dtype=np.int16)
    lut[1:] = perm + 30
    cmap = ClassMap.from_dict({c.label: int(lut[int(c)]) for c in CowClass})
    p2 = LabelVolume(lut[pred.data], TARGET_SPACING, class_map=cmap)
    g2 = LabelVolume(lut[gt.data], TARGET_SPACING, class_map=cmap)
    assert evaluate_case(p2, g2).to_dict() == evaluate_case(pred, gt).to_dict()


def test_refinement_repairs_split_pcom():
    pred, gt = split_pcom_pair()
    before = evaluate_case(pred, gt)
    refined, _ = refine_volume(pred)
    after = evaluate_case(refined, gt)
    assert before.class_avg_b0 > 0 and after.class_avg_b0 == 0.0
    assert after.class_avg_dice >= before.class_avg_dice


def test_cohort_summary():
    gt = complete_cow()
    fetal = fetal_left_cow()
    cases = [evaluate_case(gt, gt), evaluate_case(fetal, gt), evaluate_case(fetal, fetal)]
    s = cohort_summary(cases)
    assert s["anterior_balanced_acc"] == 1.0
    # actual posterior codes: 1111, 1111, 1011; predicted 1111, 1011, 1011
    assert s["posterior_balanced_acc"] == pytest.approx((1 / 2 + 1) / 2)
    dices = [c.class_avg_dice for c in cases]
    assert s["class_avg_dice"]["mean"] == pytest.approx(np.mean(dices))
    assert s["class_avg_dice"]["sd"] == pytest.approx(np.std(dices, ddof=0))
    assert s["class_avg_dice"]["n"] == 3
    assert cohort_summary([])["cldice"] == {"mean": None, "sd": None, "n": 0}
