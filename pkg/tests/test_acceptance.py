"""Acceptance gate: every criterion runs at its stated tolerance.

Criteria 4 and the EDUCATION-overlap half of 5 need the public 2015 survey
CSV (5686 rows). They look for it at $OCCUPANT_PERSONAS_RECS or in the fetch
cache and skip with an explanation when it is absent (this sandbox has no
route to the hosting server). Everything else runs offline.
"""

import math
import os
import time
from contextlib import contextmanager
from pathlib import Path

import numpy as np
import pytest

from occupant_personas import evaluation, ingest
from occupant_personas.cli import main as cli_main
from occupant_personas.config import default_cache_dir, packaged_data
from occupant_personas.evaluation import accuracy, best_scores, evaluate_suite, kfold, mae, r2
from occupant_personas.features import DropRules, TargetSpec, apply_drop_rules, top_correlates
from occupant_personas.learners import (
    Hyperparams,
    ModelKind,
    adaboost_round,
    fit,
    knn_predict,
    predict,
    samme_alpha,
)
from occupant_personas.learners.boost import WeakStump
from occupant_personas.persona import parse_card, render

REPORT_LINES: list[str] = []


@contextmanager
def criterion(num: str, title: str):
    try:
        yield
    except pytest.skip.Exception as exc:
        REPORT_LINES.append(f"criterion {num} ({title}): SKIP - {exc}")
        raise
    except BaseException:
        REPORT_LINES.append(f"criterion {num} ({title}): FAIL")
        raise
    else:
        REPORT_LINES.append(f"criterion {num} ({title}): PASS")


# --- criterion 1: metric oracles ------------------------------------------------


def _naive_accuracy(pred, actual):
    return sum(1 for p, a in zip(pred, actual) if p == a) / len(actual)


def _naive_mae(pred, actual):
    return sum(abs(a - p) for p, a in zip(pred, actual)) / len(actual)


def _naive_r2(pred, actual):
    mean = sum(actual) / len(actual)
    ss_res = sum((a - p) ** 2 for p, a in zip(pred, actual))
    ss_tot = sum((a - mean) ** 2 for a in actual)
    return 1.0 - ss_res / ss_tot


def test_criterion_1_metric_oracles():
    with criterion("1", "metric oracles"):
        start = time.time()
        rng = np.random.default_rng(101)
        checked = 0
        while checked < 1000:
            n = int(rng.integers(2, 120))
            pred = rng.integers(0, 90, n)
            actual = rng.integers(0, 90, n)
            if np.all(actual == actual[0]):
                continue
            checked += 1
            p, a = pred.tolist(), actual.tolist()
            assert abs(accuracy(pred, actual) - _naive_accuracy(p, a)) <= 1e-12
            assert abs(mae(pred, actual) - _naive_mae(p, a)) <= 1e-12
            assert abs(r2(pred, actual) - _naive_r2(p, a)) <= 1e-12
        actual = np.array([3.0, 1.0, 4.0, 1.0, 5.0, 9.0])
        assert r2(actual, actual) == 1.0
        assert r2(np.full(6, actual.mean()), actual) == 0.0
        elapsed = time.time() - start
        assert elapsed < 5.0, f"metric oracles took {elapsed:.2f}s, budget is 5s"


# --- criterion 2: classifier oracles ------------------------------------------------


def _blobs(seed, centers, n=50, d=2, spread=1.0):
    rng = np.random.default_rng(seed)
    xs, ys = [], []
    for label, center in enumerate(centers):
        mu = np.resize(np.asarray(center, dtype=float), d)
        xs.append(rng.normal(mu, spread, (n, d)))
        ys.append(np.full(n, label))
    return np.vstack(xs), np.concatenate(ys)


def _knn_oracle(stored_x, stored_y, query, k):
    dists = sorted(
        (math.sqrt(sum((q - s) ** 2 for q, s in zip(query, row))), i)
        for i, row in enumerate(stored_x)
    )[:k]
    votes = {}
    for _, i in dists:
        votes[stored_y[i]] = votes.get(stored_y[i], 0) + 1
    top = max(votes.values())
    return min(label for label, count in votes.items() if count == top)


def test_criterion_2_classifier_oracles():
    with criterion("2", "classifier oracles"):
        start = time.time()

        # KNN against an independent brute force, 200 random instances
        rng = np.random.default_rng(202)
        for _ in range(200):
            n = int(rng.integers(2, 80))
            d = int(rng.integers(1, 10))
            k = int(rng.integers(1, min(n, 7) + 1))
            sx = rng.normal(size=(n, d))
            sy = rng.integers(0, 5, size=n)
            q = rng.normal(size=d)
            assert knn_predict(sx, sy, q, k) == _knn_oracle(sx.tolist(), sy.tolist(), q.tolist(), k)

        # CART reaches training accuracy 1.0 on any consistent dataset
        X = np.unique(rng.integers(0, 7, size=(300, 5)).astype(float), axis=0)
        y = rng.integers(0, 5, size=X.shape[0])
        cart = fit(ModelKind.CART, X, y)
        assert (predict(cart, X) == y).all()

        # degenerate forest (1 tree, no bootstrap, all features) equals CART
        Xb, yb = _blobs(7, [(0, 0), (6, 0), (3, 6)], n=40)
        hp = Hyperparams(rfc_n_trees=1, rfc_bootstrap=False, rfc_features_per_split=2)
        forest = fit(ModelKind.RFC, Xb, yb, hp, seed=3)
        cart_b = fit(ModelKind.CART, Xb, yb, seed=3)
        Q = np.random.default_rng(8).normal(3, 4, (200, 2))
        assert np.array_equal(predict(forest, Q), predict(cart_b, Q))

        # LDA and the linear SVM separate well-separated blobs perfectly
        Xs, ys = _blobs(11, [(0, 0), (10, 10)], n=60)
        assert (predict(fit(ModelKind.LDA, Xs, ys), Xs) == ys).all()
        assert (predict(fit(ModelKind.SVM, Xs, ys, seed=1), Xs) == ys).all()

        # boosting round weight formula and stop condition
        assert samme_alpha(0.25, 2) == pytest.approx(math.log(3), abs=1e-12)
        weights = np.full(5, 0.2)
        with pytest.raises(WeakStump):
            adaboost_round(weights, np.array([True, True, True, False, False]), 2)

        elapsed = time.time() - start
        assert elapsed < 120.0, f"classifier oracles took {elapsed:.1f}s, budget is 2 min"


# --- criterion 3: protocol properties ------------------------------------------------


def test_criterion_3_protocol_properties(tmp_path):
    with criterion("3", "protocol properties"):
        # survey-scale split and folds
        data = ingest.Dataset(("ID",), np.arange(5686, dtype=np.float64).reshape(-1, 1))
        train, test = ingest.split(data, 0.8, seed=0)
        assert (train.n_rows, test.n_rows) == (4548, 1138)
        sizes = sorted(np.bincount(kfold(5686, 10, seed=1).assignments).tolist())
        assert sizes == [568] * 4 + [569] * 6

        # 200 random (n, k, seed) triples: disjoint, exhaustive, balanced
        rng = np.random.default_rng(303)
        for _ in range(200):
            n = int(rng.integers(2, 2000))
            k = int(rng.integers(2, min(n, 20) + 1))
            plan = kfold(n, k, int(rng.integers(0, 2**31 - 1)))
            counts = np.bincount(plan.assignments, minlength=k)
            assert counts.sum() == n
            assert counts.max() - counts.min() <= 1
            seen = np.concatenate([plan.fold_members(f) for f in range(k)])
            assert sorted(seen.tolist()) == list(range(n))

        # full re-run byte equality on the synthetic fixture (all 16 x 6 cells)
        def run(out: Path):
            assert cli_main(["prepare", "--fixture", "--out", str(out)]) == 0
            assert cli_main(["train", "--out", str(out), "--seed", "2015"]) == 0
            assert cli_main(["evaluate", "--out", str(out), "--seed", "2015"]) == 0

        a, b = tmp_path / "run_a", tmp_path / "run_b"
        run(a)
        run(b)
        for name in ("prepared.csv", "fold_detail.csv", "results.csv",
                     "results.json", "best_scores.csv", "best_scores.json"):
            assert (a / name).read_bytes() == (b / name).read_bytes(), name
        snaps_a = sorted((a / "snapshots").glob("*.json"))
        assert len(snaps_a) == 96
        for snap in snaps_a:
            assert snap.read_bytes() == (b / "snapshots" / snap.name).read_bytes(), snap.name


# --- criteria 4 and 5: reproduction on the public survey data ---------------------------


def _real_csv() -> Path | None:
    env = os.environ.get("OCCUPANT_PERSONAS_RECS")
    if env:
        path = Path(env)
        if path.exists():
            return path
    cached = default_cache_dir() / "recs2015_public_v4.csv"
    if cached.exists():
        return cached
    return None


_SKIP_REAL = (
    "public 2015 survey CSV not available offline; fetch it and set "
    "OCCUPANT_PERSONAS_RECS or re-run"
)


def _prepare_survey(path: Path):
    table = ingest.load_table(path)
    rules = ingest.CleaningRules()
    table, _ = ingest.encode_text_columns(table, rules)
    cleaned = ingest.clean(table, rules, source=str(path))
    return apply_drop_rules(cleaned, DropRules.from_json(packaged_data("drop_rules.json")))


@pytest.fixture(scope="module")
def real_prepared():
    path = _real_csv()
    if path is None:
        pytest.skip(_SKIP_REAL)
    table = ingest.load_table(path)
    assert table.n_rows == 5686
    return _prepare_survey(path)


@pytest.fixture(scope="module")
def real_results(real_prepared):
    spec = TargetSpec.from_json(packaged_data("codebook.json"))
    train, test = ingest.split(real_prepared, 0.8, seed=2015)
    start = time.time()
    table = evaluate_suite(
        train, test, spec, Hyperparams(), seed=2015, k=10,
        workers=min(4, os.cpu_count() or 1),
    )
    return table, time.time() - start


def test_criterion_4_survey_reproduction(request):
    with criterion("4", "survey reproduction"):
        table, elapsed = request.getfixturevalue("real_results")
        assert not table.failures, [f"{f.target}/{f.model.value}: {f.reason}" for f in table.failures]
        assert len(table.rows) == 96
        best = best_scores(table)

        def best_acc(target):
            return best.per_target[target]["accuracy"].value

        for target in ("NHSLDMEM", "NUMADULT", "NUMCHILD"):
            assert best_acc(target) >= 0.95, f"{target}: {best_acc(target):.4f}"
        assert best_acc("USEWWAC") >= 0.80, f"USEWWAC: {best_acc('USEWWAC'):.4f}"
        assert best_acc("EMPLOYHH") >= 0.60, f"EMPLOYHH: {best_acc('EMPLOYHH'):.4f}"
        assert best_acc("EQUIPMUSE") >= 0.55, f"EQUIPMUSE: {best_acc('EQUIPMUSE'):.4f}"
        assert best_acc("HHAGE") >= 0.55, f"HHAGE: {best_acc('HHAGE'):.4f}"
        assert best.averages["accuracy"] >= 0.50, f"average: {best.averages['accuracy']:.4f}"
        assert elapsed < 1800, f"full 16x6x10-fold run took {elapsed:.0f}s, budget is 30 min"


PAPER_EDUCATION_CORRELATES = {
    "NCOMBATH", "DISHWASH", "DWASHUSE", "DWCYCLE", "NUMLAPTOP",
    "ELPERIPH", "INTERNET", "INWIRELESS", "LGTINNUM", "MONEYPY",
}


def test_criterion_5a_education_overlap(request):
    with criterion("5a", "EDUCATION correlate overlap"):
        real_prepared = request.getfixturevalue("real_prepared")
        report = top_correlates(real_prepared, "EDUCATION", k=10)
        found = {code for code, _ in report.ranked}
        overlap = found & PAPER_EDUCATION_CORRELATES
        assert len(overlap) >= 5, f"overlap {sorted(overlap)} ({len(overlap)}/10)"


def test_criterion_5b_matrix_properties(prepared_fixture):
    with criterion("5b", "correlation matrix properties"):
        datasets = [prepared_fixture]
        real = _real_csv()
        if real is not None:
            datasets.append(_prepare_survey(real))
        for ds in datasets:
            for target in TargetSpec.from_json(packaged_data("codebook.json")).codes:
                report = top_correlates(ds, target, k=10)
                m = report.matrix
                assert np.max(np.abs(m - m.T)) <= 1e-12
                assert np.max(np.abs(np.diag(m) - 1.0)) <= 1e-12


# --- criterion 6: persona pipeline ------------------------------------------------------


def test_criterion_6_persona_pipeline(tmp_path):
    with criterion("6", "persona pipeline"):
        out = tmp_path / "persona_run"
        base = ["--model", "CART", "--k", "3", "--seed", "6"]
        assert cli_main(["prepare", "--fixture", "--out", str(out)]) == 0
        assert cli_main(["train", "--out", str(out), *base]) == 0
        assert cli_main(["evaluate", "--out", str(out), *base]) == 0
        assert cli_main([
            "persona", "--out", str(out), "--row-index", "0", "--use-model", "CART",
            "--seed", "6", "--k", "3", "--model", "CART",
            "--format", "structured-text", "--format", "markdown",
        ]) == 0

        card_text = (out / "personas" / "persona_row0.json").read_text()
        card = parse_card(card_text)
        labels = card.labels()
        assert len(labels) == 16
        assert all(labels.values())
        # narrative carries decoded labels only, never raw code assignments
        for target in labels:
            assert target not in card.narrative
        assert "=" not in card.narrative
        # structured-text round trip is lossless
        assert render(card, "structured-text") == card_text
        assert parse_card(render(card, "structured-text")) == card
