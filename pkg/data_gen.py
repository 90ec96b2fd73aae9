# data_gen.py - regenerate the bundled bolt test fixture (data/bolt_tests.csv)
"""
The elongation column and the fracture pattern are the recorded tensile-test
results for ten ACME bolts. Loads and dimensional inspections were not
recorded with them, so they are synthesized here:

- dimensions: every part sits within one gauge graduation of nominal, so
  each reading lands on one of the two graduations either side of it;
  thread angles have the coarsest graduations
- the 90-degree re-measurement is an independent reading of the same kind
- a fractured bolt cannot be re-inspected: its row repeats the bolt's last
  inspection
- load: elongation × 2300 lbf/in ± 2%; a fracture row gets a breaking load
  of 205-215 lbf, above anything an intact bolt held
- a handful of cells are blanked afterwards so imputation has work to do

A Park-Miller generator is used instead of numpy so the file is byte-stable
across numpy releases. Run: python data_gen.py [output.csv]
"""
import sys
from typing import Dict

import pandas as pd

SEED = 42
STIFFNESS = 2300.0
BREAKING_LOAD = 205.0

# base column: (nominal, graduation, decimals)
DIMENSIONS = {
    "Overall_Length": (4.000, 0.001, 4),
    "Major_Diameter_1": (1.000, 0.001, 4),
    "Major_Diameter_2": (1.000, 0.001, 4),
    "Minor_Diameter_1": (0.750, 0.001, 4),
    "Pitch_Left_1": (0.250, 0.001, 4),
    "Pitch_Right_1": (0.250, 0.001, 4),
    "Angle_Left_1": (14.5, 1.0, 2),
    "Angle_Left_2": (14.5, 1.0, 2),
    "Angle_Left_3": (14.5, 1.0, 2),
    "Angle_Left_4": (14.5, 1.0, 2),
    "Angle_Right_1": (14.5, 2.0, 2),
    "Angle_Right_2": (14.5, 2.0, 2),
    "Angle_Right_3": (14.5, 1.5, 2),
    "Angle_Right_4": (14.5, 1.0, 2),
}

# recorded elongation per test (inches); "F" is a fracture
ELONGATION = {
    "Bolt_1": ["0.055", "F"],
    "Bolt_2": ["0.055", "0.04", "F"],
    "Bolt_3": ["0.052", "0.049", "0.044", "0.045", "0.043", "0.063", "0.064", "0.064", "0.068", "0.074", "0.08"],
    "Bolt_4": ["0.051", "0.046", "0.052", "0.049", "0.055", "0.062", "0.065", "0.07", "0.064", "0.76", "F"],
    "Bolt_5": ["0.047", "0.049", "0.047", "0.053", "0.059", "0.061", "0.062", "0.063", "0.066", "0.076", "0.081"],
    "Bolt_6": ["0.05", "0.051", "0.041", "0.055", "0.045", "0.06", "0.063", "0.069", "0.07", "0.74", "0.081"],
    "Bolt_7": ["0.05", "0.047", "0.051", "0.058", "0.054", "0.064", "0.067", "0.065", "0.068", "0.078", "0.083"],
    "Bolt_8": ["0.045", "0.045", "0.057", "0.041", "0.046", "0.064", "0.068", "0.064", "0.075", "0.079", "0.084"],
    "Bolt_9": ["0.055", "0.047", "0.04", "0.044", "0.053", "0.063", "0.067", "0.063", "0.066", "0.075", "0.083"],
    "Bolt_10": ["0.05", "0.052", "0.049", "0.047", "0.054", "0.054", "0.062", "0.072", "0.072", "0.078", "0.082"],
}

# two entries were logged with a slipped decimal point; loads follow the true elongation
TRUE_ELONGATION = {("Bolt_4", 10): 0.076, ("Bolt_6", 10): 0.074}

BLANKED = [
    ("Bolt_3", 4, "Pitch_Left_1"),
    ("Bolt_5", 7, "Angle_Left_2"),
    ("Bolt_7", 2, "Major_Diameter_1_90"),
    ("Bolt_9", 6, "Pitch_Left_1"),
    ("Bolt_10", 9, "Angle_Right_3_90"),
]


class ParkMiller:
    """Minimal standard LCG; exact in double precision."""

    MODULUS = 2147483647
    MULTIPLIER = 16807

    def __init__(self, seed: int):
        self.state = seed

    def uniform(self) -> float:
        self.state = (self.MULTIPLIER * self.state) % self.MODULUS
        return self.state / self.MODULUS


def _reading(rng: ParkMiller, nominal: float, graduation: float, decimals: int) -> str:
    half = graduation / 2.0
    value = nominal - half if rng.uniform() < 0.5 else nominal + half
    return f"{value:.{decimals}f}"


def inspect(rng: ParkMiller) -> Dict[str, str]:
    readings = {}
    for base, (nominal, graduation, decimals) in DIMENSIONS.items():
        readings[base] = _reading(rng, nominal, graduation, decimals)
        readings[base + "_90"] = _reading(rng, nominal, graduation, decimals)
    return readings


def generate(seed: int = SEED) -> pd.DataFrame:
    rng = ParkMiller(seed)
    rows = []
    for bolt_id, series in ELONGATION.items():
        last_inspection: Dict[str, str] = {}
        for test_num, elongation in enumerate(series, start=1):
            row = {"bolt_id": bolt_id, "test_num": str(test_num)}
            if elongation != "F":
                last_inspection = inspect(rng)
            u = rng.uniform()
            if elongation == "F":
                row["max_load"] = f"{BREAKING_LOAD + 10.0 * u:.1f}"
                row["max_position"] = "Failure"
                row["fracture"] = "true"
            else:
                true_position = TRUE_ELONGATION.get((bolt_id, test_num), float(elongation))
                row["max_load"] = f"{true_position * STIFFNESS * (1.0 + 0.02 * (2.0 * u - 1.0)):.1f}"
                row["max_position"] = elongation
                row["fracture"] = "false"
            row.update(last_inspection)
            rows.append(row)

    df = pd.DataFrame(rows)
    for bolt_id, test_num, column in BLANKED:
        df.loc[(df["bolt_id"] == bolt_id) & (df["test_num"] == str(test_num)), column] = ""
    return df


def to_csv_text(df: pd.DataFrame) -> str:
    return df.to_csv(index=False, lineterminator="\n")


if __name__ == "__main__":
    out = sys.argv[1] if len(sys.argv) > 1 else "data/bolt_tests.csv"
    frame = generate()
    with open(out, "w", encoding="utf-8", newline="") as fh:
        fh.write(to_csv_text(frame))
    print(f"✅ Wrote {len(frame)} rows to {out}")
