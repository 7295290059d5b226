#!/usr/bin/env python3
"""Regenerate the bundled synthetic survey fixture (200 rows x 40 columns).

The fixture mimics the raw survey file shape: 16 target columns, 20
descriptive columns spanning all 12 survey sections, and 4 columns the
default drop rules remove (an imputation flag, a replicate weight, a dollar
amount, and a phone count). A few cells are blank and one is "inf" so the
cleaning path is exercised end to end. Households are sampled from a latent
model with real structure (member ages drive the count targets, education
drives electronics and income) so the classifiers have something to learn.

Usage: python scripts/generate_fixture.py
"""

from pathlib import Path

import numpy as np

OUT = Path(__file__).resolve().parents[1] / "src/occupant_personas/data/synthetic_fixture.csv"
SEED = 715
N = 200

COLUMNS = [
    # targets
    "EQUIPMUSE", "TEMPHOME", "TEMPGONE", "TEMPNITE",
    "USEWWAC", "TEMPHOMEAC", "TEMPGONEAC", "TEMPNITEAC",
    "HHAGE", "EMPLOYHH", "EDUCATION", "NHSLDMEM",
    "NUMADULT", "NUMCHILD", "ATHOME", "MONEYPY",
    # descriptive, all 12 survey sections represented
    "YEARMADERANGE", "NCOMBATH",                      # A
    "DISHWASH", "DWASHUSE", "DWCYCLE",                # B
    "NUMLAPTOP", "ELPERIPH", "INTERNET", "INWIRELESS",  # C
    "HEATHOME", "PROTHERM",                           # D
    "AIRCOND",                                        # E
    "WHEATSIZ",                                       # F
    "LGTINNUM",                                       # G
    "UGASHERE",                                       # H
    "TOTSQFT_EN",                                     # I
    "SMARTMETER",                                     # J
    "AGEHHMEM2", "AGEHHMEM3",                         # K
    "SCALEB",                                         # L
    # dropped by the default rules
    "ZEDUCATION", "BRRWT1", "DOLLAREL", "NUMSMPHONE",
]


def sample_household(rng: np.random.Generator) -> dict:
    n_adult = int(rng.choice([1, 2, 3, 4], p=[0.30, 0.50, 0.15, 0.05]))
    n_child = int(rng.choice([0, 1, 2, 3], p=[0.50, 0.20, 0.20, 0.10]))
    hhage = int(rng.integers(25, 56)) if n_child else int(rng.integers(20, 93))
    if hhage >= 67:
        employ = int(rng.choice([0, 1, 2], p=[0.85, 0.10, 0.05]))
    else:
        employ = int(rng.choice([0, 1, 2], p=[0.20, 0.60, 0.20]))
    education = int(np.clip(round(rng.normal(3.0, 1.1)), 1, 5))
    income_score = education + 0.6 * n_adult + (employ == 1) * 1.2 + rng.normal(0, 0.9)
    moneypy = int(np.clip(round(income_score), 1, 8))

    member_ages = [hhage]
    for _ in range(n_adult - 1):
        member_ages.append(int(np.clip(hhage + rng.integers(-8, 9), 18, 95)))
    for _ in range(n_child):
        member_ages.append(int(rng.integers(0, 18)))
    agehhmem2 = member_ages[1] if len(member_ages) > 1 else -2
    agehhmem3 = member_ages[2] if len(member_ages) > 2 else -2

    heat = int(rng.random() < 0.95)
    if heat:
        equipmuse = int(rng.choice([1, 2, 3, 4, 5, 9],
                                   p=[0.40, 0.25, 0.20, 0.10, 0.04, 0.01]))
        protherm = 1 if equipmuse == 3 else int(rng.random() < 0.25)
        temphome = int(np.clip(round(rng.normal(70, 2.2)), 60, 86))
        tempgone = int(np.clip(temphome - rng.choice([0, 2, 3, 5, 8]), 50, 90))
        tempnite = int(np.clip(temphome - rng.choice([0, 1, 2, 4]), 50, 90))
    else:
        equipmuse, protherm = -2, -2
        temphome = tempgone = tempnite = -2

    aircond = int(rng.random() < 0.75)
    if aircond:
        usewwac = int(rng.choice([1, 2, 3, 4, 5, 9],
                                 p=[0.35, 0.25, 0.15, 0.20, 0.04, 0.01]))
        temphomeac = int(np.clip(round(rng.normal(73, 2.5)), 60, 90))
        tempgoneac = int(np.clip(temphomeac + rng.choice([0, 2, 4, 6]), 50, 90))
        tempniteac = int(np.clip(temphomeac - rng.choice([0, 1, 2, 3]), 50, 90))
    else:
        usewwac = -2
        temphomeac = tempgoneac = tempniteac = -2

    if employ == 1:
        athome = int(rng.choice([0, 1, 2], p=[0.5, 0.3, 0.2]))
    elif employ == 2:
        athome = int(rng.choice([2, 3, 4], p=[0.4, 0.4, 0.2]))
    else:
        athome = int(rng.choice([3, 4, 5], p=[0.2, 0.3, 0.5]))

    totsqft = int(np.clip(round(rng.normal(600 + 450 * (n_adult + n_child), 350)), 350, 5200))
    dishwash = int(rng.random() < 0.25 + 0.10 * education)
    numlaptop = int(np.clip(rng.poisson(0.55 * education), 0, 5))
    internet = 1 if numlaptop > 0 else int(rng.random() < 0.5)
    return {
        "EQUIPMUSE": equipmuse, "TEMPHOME": temphome, "TEMPGONE": tempgone,
        "TEMPNITE": tempnite, "USEWWAC": usewwac, "TEMPHOMEAC": temphomeac,
        "TEMPGONEAC": tempgoneac, "TEMPNITEAC": tempniteac, "HHAGE": hhage,
        "EMPLOYHH": employ, "EDUCATION": education,
        "NHSLDMEM": n_adult + n_child, "NUMADULT": n_adult, "NUMCHILD": n_child,
        "ATHOME": athome, "MONEYPY": moneypy,
        "YEARMADERANGE": int(rng.integers(1, 9)),
        "NCOMBATH": int(np.clip(1 + (n_adult + n_child > 2) + (rng.random() < 0.2), 1, 4)),
        "DISHWASH": dishwash,
        "DWASHUSE": int(rng.integers(1, 8)) if dishwash else -2,
        "DWCYCLE": int(rng.integers(1, 5)) if dishwash else -2,
        "NUMLAPTOP": numlaptop,
        "ELPERIPH": 1 if numlaptop > 0 else int(rng.random() < 0.3),
        "INTERNET": internet,
        "INWIRELESS": internet if rng.random() < 0.9 else 0,
        "HEATHOME": heat, "PROTHERM": protherm, "AIRCOND": aircond,
        "WHEATSIZ": int(rng.integers(1, 4)),
        "LGTINNUM": int(np.clip(round(5 + totsqft / 400 + rng.normal(0, 3)), 2, 40)),
        "UGASHERE": int(rng.random() < 0.6),
        "TOTSQFT_EN": totsqft,
        "SMARTMETER": int(rng.random() < 0.4),
        "AGEHHMEM2": agehhmem2, "AGEHHMEM3": agehhmem3,
        "SCALEB": int(rng.choice([0, 1, 2, 3], p=[0.7, 0.15, 0.1, 0.05])),
        "ZEDUCATION": int(rng.random() < 0.1),
        "BRRWT1": round(float(rng.uniform(800, 16000)), 2),
        "DOLLAREL": round(float(rng.normal(1400, 380)), 2),
        "NUMSMPHONE": int(np.clip(n_adult + rng.integers(-1, 2), 0, 6)),
    }


def main() -> None:
    rng = np.random.default_rng(SEED)
    rows = [sample_household(rng) for _ in range(N)]
    cells = [[str(row[c]) for c in COLUMNS] for row in rows]
    # malformed-value coverage: blanks become the missing sentinel, inf the cap
    for r, c in ((3, "DWASHUSE"), (17, "LGTINNUM"), (58, "SMARTMETER"),
                 (101, "TOTSQFT_EN"), (144, "SCALEB"), (190, "NCOMBATH")):
        cells[r][COLUMNS.index(c)] = ""
    cells[42][COLUMNS.index("LGTINNUM")] = "inf"
    lines = [",".join(COLUMNS)] + [",".join(row) for row in cells]
    OUT.write_text("\n".join(lines) + "\n", encoding="utf-8")
    print(f"wrote {OUT} ({N} rows, {len(COLUMNS)} columns)")


if __name__ == "__main__":
    main()
