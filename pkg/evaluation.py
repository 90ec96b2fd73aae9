# evaluation.py - confusion matrix, precision/recall/F1 and classification reports
"""
Fracture (label 1) is the positive class in every report here. Some published
bolt-test reports call the majority no-fracture class "positive"; swapping the
designation swaps tp<->tn and fp<->fn and leaves accuracy unchanged.

Zero denominators yield 0.0 and are listed under `undefined` instead of
raising, so reports on tiny or one-class test sets still render.
"""
from typing import Dict, List, Mapping, Optional, Sequence, Tuple

import numpy as np
from pydantic import BaseModel, ConfigDict, Field

from errors import EmptyInput, LengthMismatch

FRACTURE = 1
NO_FRACTURE = 0
CLASS_NAMES = {FRACTURE: "fracture", NO_FRACTURE: "no_fracture"}


class ConfusionMatrix(BaseModel):
    model_config = ConfigDict(frozen=True)

    tp: int = Field(ge=0)
    fp: int = Field(ge=0)
    tn: int = Field(ge=0)
    fn: int = Field(ge=0)

    @property
    def total(self) -> int:
        return self.tp + self.fp + self.tn + self.fn

    def swapped(self) -> "ConfusionMatrix":
        """The same matrix seen with the other class as positive."""
        return ConfusionMatrix(tp=self.tn, fp=self.fn, tn=self.tp, fn=self.fp)


def confusion(predictions: Sequence, labels: Sequence, positive_class=FRACTURE) -> ConfusionMatrix:
    pred = np.asarray(predictions)
    true = np.asarray(labels)
    if len(pred) != len(true):
        raise LengthMismatch(f"{len(pred)} predictions for {len(true)} labels")
    if len(true) == 0:
        raise EmptyInput("Cannot build a confusion matrix from zero samples")
    pred_pos = pred == positive_class
    true_pos = true == positive_class
    return ConfusionMatrix(
        tp=int(np.sum(pred_pos & true_pos)),
        fp=int(np.sum(pred_pos & ~true_pos)),
        tn=int(np.sum(~pred_pos & ~true_pos)),
        fn=int(np.sum(~pred_pos & true_pos)),
    )


def _ratio(num: float, den: float) -> Tuple[float, bool]:
    if den == 0:
        return 0.0, True
    return num / den, False


def precision_detail(cm: ConfusionMatrix) -> Tuple[float, bool]:
    return _ratio(cm.tp, cm.tp + cm.fp)


def recall_detail(cm: ConfusionMatrix) -> Tuple[float, bool]:
    return _ratio(cm.tp, cm.tp + cm.fn)


def f1_detail(cm: ConfusionMatrix) -> Tuple[float, bool]:
    p, _ = precision_detail(cm)
    r, _ = recall_detail(cm)
    return _ratio(2 * p * r, p + r)


def accuracy_detail(cm: ConfusionMatrix) -> Tuple[float, bool]:
    return _ratio(cm.tp + cm.tn, cm.total)


def precision(cm: ConfusionMatrix) -> float:
    return precision_detail(cm)[0]


def recall(cm: ConfusionMatrix) -> float:
    return recall_detail(cm)[0]


def f1(cm: ConfusionMatrix) -> float:
    return f1_detail(cm)[0]


def accuracy(cm: ConfusionMatrix) -> float:
    return accuracy_detail(cm)[0]


class ClassRow(BaseModel):
    label: str
    precision: float
    recall: float
    f1: float
    support: int
    undefined: List[str] = []


class ClassificationReport(BaseModel):
    classes: List[ClassRow]
    accuracy: float
    total: int
    confusion: Optional[Dict[str, int]] = None
    text: str = ""
    confusion_text: str = ""


def _row(label: str, cm: ConfusionMatrix) -> ClassRow:
    undefined = []
    values = {}
    for name, fn in (("precision", precision_detail), ("recall", recall_detail), ("f1", f1_detail)):
        value, flagged = fn(cm)
        values[name] = value
        if flagged:
            undefined.append(name)
    return ClassRow(label=label, support=cm.tp + cm.fn, undefined=undefined, **values)


def render_report(report: ClassificationReport) -> str:
    width = max([len("accuracy")] + [len(r.label) for r in report.classes]) + 2
    lines = [f"{'':>{width}}{'precision':>11}{'recall':>9}{'f1-score':>10}{'support':>9}", ""]
    for r in report.classes:
        lines.append(f"{r.label:>{width}}{r.precision:>11.2f}{r.recall:>9.2f}{r.f1:>10.2f}{r.support:>9d}")
    lines.append("")
    lines.append(f"{'accuracy':>{width}}{'':>11}{'':>9}{report.accuracy:>10.2f}{report.total:>9d}")
    return "\n".join(lines)


def render_confusion(cm: ConfusionMatrix, positive: str = "fracture", negative: str = "no_fracture") -> str:
    """2x2 table, positive class first; rows are actual, columns predicted."""
    width = max(len(positive), len(negative), len("actual")) + 9
    head = f"{'':<{width}}{'pred ' + positive:>{width}}{'pred ' + negative:>{width}}"
    pos = f"{'actual ' + positive:<{width}}{cm.tp:>{width}}{cm.fn:>{width}}"
    neg = f"{'actual ' + negative:<{width}}{cm.fp:>{width}}{cm.tn:>{width}}"
    return "\n".join([head, pos, neg])


def classification_report(per_class: Mapping[str, ConfusionMatrix]) -> ClassificationReport:
    """
    One row per class (each cm taken with that class as positive) plus overall
    accuracy = correctly classified / samples.
    """
    if not per_class:
        raise EmptyInput("A classification report needs at least one class")
    rows = [_row(label, cm) for label, cm in per_class.items()]
    total = sum(r.support for r in rows)
    correct = sum(cm.tp for cm in per_class.values())
    acc, _ = _ratio(correct, total)
    report = ClassificationReport(classes=rows, accuracy=acc, total=total)
    report.text = render_report(report)
    return report


def evaluate_predictions(predictions: Sequence[int], labels: Sequence[int],
                         class_names: Mapping[int, str] = CLASS_NAMES) -> ClassificationReport:
    """
    Full report for binary fracture predictions: one row per class present
    in the labels, fracture first.
    """
    cm = confusion(predictions, labels, positive_class=FRACTURE)
    present = set(np.asarray(labels).tolist())
    per_class: Dict[str, ConfusionMatrix] = {}
    if FRACTURE in present:
        per_class[class_names.get(FRACTURE, "1")] = cm
    if present - {FRACTURE}:
        per_class[class_names.get(NO_FRACTURE, "0")] = cm.swapped()
    report = classification_report(per_class)
    report.confusion = cm.model_dump()
    report.confusion_text = render_confusion(cm, class_names.get(FRACTURE, "1"), class_names.get(NO_FRACTURE, "0"))
    return report
