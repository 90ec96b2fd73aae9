# test_evaluation.py
import pytest

from errors import EmptyInput, LengthMismatch
from evaluation import (
    ConfusionMatrix,
    accuracy,
    classification_report,
    confusion,
    evaluate_predictions,
    f1,
    f1_detail,
    precision,
    precision_detail,
    recall,
    render_confusion,
)


def test_confusion_counts_with_fracture_positive():
    cm = confusion([1, 0, 1, 0, 0, 1], [1, 0, 0, 0, 1, 1])
    assert (cm.tp, cm.fp, cm.tn, cm.fn) == (2, 1, 2, 1)
    assert cm.total == 6


def test_metrics():
    cm = ConfusionMatrix(tp=8, fp=2, tn=85, fn=5)
    assert precision(cm) == pytest.approx(0.8)
    assert recall(cm) == pytest.approx(8 / 13)
    assert f1(cm) == pytest.approx(2 * 0.8 * (8 / 13) / (0.8 + 8 / 13))
    assert accuracy(cm) == pytest.approx(0.93)


def test_swapping_positive_class_keeps_accuracy():
    cm = ConfusionMatrix(tp=3, fp=1, tn=10, fn=2)
    other = cm.swapped()
    assert (other.tp, other.fp, other.tn, other.fn) == (10, 2, 3, 1)
    assert accuracy(other) == accuracy(cm)
    assert other.swapped() == cm


def test_zero_denominators_are_flagged_not_raised():
    cm = ConfusionMatrix(tp=0, fp=0, tn=5, fn=0)
    assert precision_detail(cm) == (0.0, True)
    assert f1_detail(cm) == (0.0, True)


@pytest.mark.parametrize("pred, labels, error", [([1, 0], [1], LengthMismatch), ([], [], EmptyInput)])
def test_confusion_errors(pred, labels, error):
    with pytest.raises(error):
        confusion(pred, labels)


def test_classification_report_accuracy_over_all_classes():
    report = classification_report({
        "fracture": ConfusionMatrix(tp=2, fp=0, tn=7, fn=1),
        "no_fracture": ConfusionMatrix(tp=7, fp=1, tn=2, fn=0),
    })
    assert report.total == 10
    assert report.accuracy == pytest.approx(0.9)
    assert [r.support for r in report.classes] == [3, 7]
    assert "accuracy" in report.text
    with pytest.raises(EmptyInput):
        classification_report({})


def test_evaluate_predictions_puts_fracture_first():
    report = evaluate_predictions([1, 0, 0, 0], [1, 0, 0, 1])
    assert [r.label for r in report.classes] == ["fracture", "no_fracture"]
    assert report.accuracy == pytest.approx(0.75)
    assert report.confusion == {"tp": 1, "fp": 0, "tn": 2, "fn": 1}
    assert report.confusion_text.splitlines()[1].split()[-2:] == ["1", "1"]


def test_render_confusion_layout():
    lines = render_confusion(ConfusionMatrix(tp=4, fp=3, tn=2, fn=1)).splitlines()
    assert lines[0].split() == ["pred", "fracture", "pred", "no_fracture"]
    assert lines[1].split() == ["actual", "fracture", "4", "1"]
    assert lines[2].split() == ["actual", "no_fracture", "3", "2"]


def test_one_class_test_set_reports_a_single_row():
    report = evaluate_predictions([0, 0, 0], [0, 0, 0])
    assert [r.label for r in report.classes] == ["no_fracture"]
    assert report.classes[0].support == 3
    assert report.accuracy == 1.0
    assert report.confusion == {"tp": 0, "fp": 0, "tn": 3, "fn": 0}
    assert "fracture" not in report.text.split()


def test_predicted_class_absent_from_labels_gets_no_row():
    report = evaluate_predictions([1, 0, 0], [0, 0, 0])
    assert [r.label for r in report.classes] == ["no_fracture"]
    assert report.accuracy == pytest.approx(2 / 3)
    assert report.confusion["fp"] == 1


def test_all_fracture_labels():
    report = evaluate_predictions([1, 1], [1, 1])
    assert [r.label for r in report.classes] == ["fracture"]
    assert report.classes[0].undefined == []
    assert report.accuracy == 1.0
