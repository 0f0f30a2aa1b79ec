"""Metric formulas against hand-counted fixtures and brute-force oracles."""

import random

import pytest

from patchscout.errors import EmptySetError, NoFixingCommitsError, SingleClassError
from patchscout.eval_metrics import (
    MetricsReport,
    ScoredCommit,
    accuracy,
    auc,
    confusion,
    cost_effort_at,
    evaluate,
    prf1,
)


def sc(id, score, label, loc=10):
    return ScoredCommit(id, score, label, loc)


# six commits, hand-counted at threshold 0.5:
# fixing with scores .9 .6 (tp=2), .4 (fn=1); non-fixing with .7 (fp=1), .3 .1 (tn=2)
SIX = [
    sc("c1", 0.9, 1), sc("c2", 0.6, 1), sc("c3", 0.4, 1),
    sc("c4", 0.7, 0), sc("c5", 0.3, 0), sc("c6", 0.1, 0),
]


class TestConfusion:
    def test_all_correct_confident(self):
        scored = [sc("a", 0.99, 1), sc("b", 0.01, 0)]
        assert confusion(scored, 0.5) == (1, 0, 1, 0)

    def test_threshold_zero_everything_fixing(self):
        tp, fp, tn, fn = confusion(SIX, 0.0)
        assert tn == 0 and fn == 0
        assert tp == 3 and fp == 3

    def test_six_commit_fixture(self):
        assert confusion(SIX, 0.5) == (2, 1, 2, 1)


class TestPrf1:
    def test_fixture_values(self):
        p, r, f1 = prf1((2, 1, 0, 2))
        assert p == pytest.approx(2 / 3)
        assert r == pytest.approx(1 / 2)
        assert f1 == pytest.approx(4 / 7)

    def test_perfect(self):
        assert prf1((5, 0, 5, 0)) == (1.0, 1.0, 1.0)

    def test_zero_over_zero_is_zero(self):
        assert prf1((0, 0, 4, 0)) == (0.0, 0.0, 0.0)

    def test_recall_consistency(self):
        rng = random.Random(2)
        for _ in range(50):
            tp, fp, tn, fn = (rng.randint(0, 20) for _ in range(4))
            _, r, _ = prf1((tp, fp, tn, fn))
            assert r == (tp / (tp + fn) if tp + fn else 0.0)


class TestAccuracy:
    def test_perfect_and_all_wrong(self):
        assert accuracy((3, 0, 3, 0)) == 1.0
        assert accuracy((0, 3, 0, 3)) == 0.0

    def test_six_commit_fixture(self):
        assert accuracy(confusion(SIX, 0.5)) == pytest.approx(4 / 6)

    def test_empty_rejected(self):
        with pytest.raises(EmptySetError):
            accuracy((0, 0, 0, 0))


class TestAuc:
    def test_perfectly_ordered(self):
        scored = [sc("a", 0.9, 1), sc("b", 0.8, 1), sc("c", 0.2, 0), sc("d", 0.1, 0)]
        assert auc(scored) == 1.0

    def test_all_ties(self):
        scored = [sc("a", 0.5, 1), sc("b", 0.5, 0), sc("c", 0.5, 1), sc("d", 0.5, 0)]
        assert auc(scored) == 0.5

    def test_five_commit_fixture_with_tie(self):
        scored = [sc("a", 0.9, 1), sc("b", 0.5, 1), sc("c", 0.5, 0),
                  sc("d", 0.3, 0), sc("e", 0.1, 0)]
        # pairs: a beats all 3; b beats d,e and ties c -> (3 + 2.5) / 6
        assert auc(scored) == pytest.approx(5.5 / 6)

    def test_single_class_rejected(self):
        with pytest.raises(SingleClassError):
            auc([sc("a", 0.9, 1)])

    def test_brute_force_equivalence(self):
        rng = random.Random(11)
        for _ in range(100):
            n = rng.randint(2, 200)
            scored = [sc(f"c{i}",
                         rng.choice([rng.random(), round(rng.random(), 1)]),
                         rng.randint(0, 1)) for i in range(n)]
            if not any(c.label for c in scored):
                scored[0] = sc("c0", scored[0].score, 1)
            if all(c.label for c in scored):
                scored[-1] = sc(f"c{n-1}", scored[-1].score, 0)
            pos = [c.score for c in scored if c.label == 1]
            neg = [c.score for c in scored if c.label == 0]
            wins = sum(1 for p in pos for q in neg if p > q)
            ties = sum(1 for p in pos for q in neg if p == q)
            expected = (wins + 0.5 * ties) / (len(pos) * len(neg))
            assert auc(scored) == expected


class TestCostEffort:
    FIXTURE = [sc("a", 0.9, 1, 50), sc("b", 0.8, 0, 30), sc("c", 0.7, 1, 20)]

    def test_full_budget_finds_everything(self):
        assert cost_effort_at(self.FIXTURE, 100) == 1.0

    def test_fixture_at_50(self):
        # total LOC 100, budget 50: only the first commit fits
        assert cost_effort_at(self.FIXTURE, 50) == 0.5

    def test_no_fixing_rejected(self):
        with pytest.raises(NoFixingCommitsError):
            cost_effort_at([sc("a", 0.5, 0)], 50)

    def test_ties_break_by_id(self):
        scored = [sc("b", 0.5, 0, 60), sc("a", 0.5, 1, 40)]
        # same score: "a" is reviewed first, fits in a 40% budget
        assert cost_effort_at(scored, 40) == 1.0

    def test_monotone_in_level(self):
        rng = random.Random(23)
        for _ in range(50):
            n = rng.randint(2, 40)
            scored = [sc(f"c{i}", rng.random(), rng.randint(0, 1),
                         rng.randint(0, 50)) for i in range(n)]
            if not any(c.label for c in scored):
                scored[0] = sc("c0", scored[0].score, 1, scored[0].changed_loc)
            values = [cost_effort_at(scored, level)
                      for level in (1, 5, 10, 25, 50, 75, 100)]
            assert values == sorted(values)

    def test_oracle_accumulation(self):
        rng = random.Random(29)
        for _ in range(100):
            n = rng.randint(1, 60)
            scored = [sc(f"c{i}", round(rng.random(), 2), rng.randint(0, 1),
                         rng.randint(0, 30)) for i in range(n)]
            if not any(c.label for c in scored):
                scored[0] = sc("c0", scored[0].score, 1, scored[0].changed_loc)
            level = rng.choice([1, 5, 10, 20, 50, 100])
            # independent oracle: explicit prefix walk
            order = sorted(scored, key=lambda c: (-c.score, c.id))
            budget = level * sum(c.changed_loc for c in scored) / 100.0
            seen = loc = 0
            for c in order:
                loc += c.changed_loc
                if loc > budget:
                    break
                seen += c.label
            expected = seen / sum(c.label for c in scored)
            assert cost_effort_at(scored, level) == expected


class TestScoreMonotoneInvariance:
    def test_strictly_increasing_transform(self):
        rng = random.Random(41)
        scored = [sc(f"c{i}", rng.random(), rng.randint(0, 1), rng.randint(1, 9))
                  for i in range(40)]
        scored[0] = sc("c0", scored[0].score, 1, 3)
        scored[1] = sc("c1", scored[1].score, 0, 3)

        def transform(c):
            return ScoredCommit(c.id, 0.1 + 0.8 * c.score ** 3, c.label, c.changed_loc)

        mapped = [transform(c) for c in scored]
        assert auc(scored) == auc(mapped)
        for level in (5, 20, 80):
            assert cost_effort_at(scored, level) == cost_effort_at(mapped, level)
        thr = 0.4
        assert confusion(scored, thr) == confusion(mapped, 0.1 + 0.8 * thr ** 3)


class TestEvaluate:
    def test_perfect_scores(self):
        scored = [sc("a", 1.0, 1), sc("b", 0.0, 0)]
        report = evaluate(scored, ce_levels=(5, 100))
        assert (report.precision, report.recall, report.f1) == (1, 1, 1)
        assert report.accuracy == 1.0
        assert report.auc == 1.0

    def test_single_class_auc_is_none(self):
        report = evaluate([sc("a", 0.9, 1), sc("b", 0.8, 1)])
        assert report.auc is None
        assert report.recall == 1.0

    def test_table_and_json(self):
        report = evaluate(SIX, ce_levels=(5, 10, 20))
        table = report.to_table()
        assert "precision" in table and "ce@5%" in table
        assert isinstance(report.to_json(), str)
        values = [report.ce_at[level] for level in sorted(report.ce_at)]
        assert values == sorted(values)
