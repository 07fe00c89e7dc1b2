import numpy as np
import pytest

from l2s_disco import bo, surrogate
from l2s_disco.bo import BoAborted, BoConfig, History, Record, run_bo, run_method, run_random_search
from l2s_disco.objectives import Contamination, Labs, SyntheticPlacement
from l2s_disco.space import InvalidStructureError, SpaceTooConstrainedError, key


def small_config(**kw):
    base = dict(budget=30, init_evals=10, seed=0, record_time=False)
    base.update(kw)
    return BoConfig(**base)


def test_config_invariants():
    with pytest.raises(ValueError):
        BoConfig(budget=10, init_evals=0)
    with pytest.raises(ValueError):
        BoConfig(budget=5, init_evals=10)


def test_budget_equal_to_init_is_random_search():
    h = run_bo(Labs(8), small_config(budget=10))
    assert len(h) == 10
    assert {r.phase for r in h.records} == {"init"}


@pytest.mark.parametrize("method", ["l2s-disco-ucb", "l2s-disco-ei", "rr-local-search", "sim-anneal", "random-search"])
def test_trace_monotone_and_no_duplicates(method):
    obj = Contamination(d=10, seed=1)  # minimization
    h = run_method(obj, method, small_config(budget=25))
    assert len(h) == 25
    assert np.all(np.diff(h.incumbent) <= 0)
    assert h.best_value == h.values.min()
    assert len({key(x) for x in h.structures}) == 25


def test_maximization_trace():
    h = run_bo(Labs(9), small_config())
    assert np.all(np.diff(h.incumbent) >= 0)
    assert h.incumbent == list(np.maximum.accumulate(h.values))


def test_bit_reproducible():
    obj = Labs(10)
    a = run_bo(obj, small_config(seed=4))
    b = run_bo(obj, small_config(seed=4))
    assert list(a.rows()) == list(b.rows())
    c = run_bo(obj, small_config(seed=5))
    assert list(a.rows()) != list(c.rows())


def test_proposal_is_afo_winner_and_training_size(monkeypatch):
    obj = Labs(10)
    sizes = []
    real_fit = surrogate.fit

    def counting_fit(X, y, *args, **kwargs):
        sizes.append(len(X))
        return real_fit(X, y, *args, **kwargs)

    monkeypatch.setattr(surrogate, "fit", counting_fit)
    events = []
    h = run_bo(obj, small_config(budget=24, init_evals=8), on_iteration=lambda t, s, o, x: events.append((t, o, x)))
    assert sizes == [8 + t - 1 for t in range(1, 17)]
    for t, outcome, x in events:
        evaluated = h.records[8 + t - 1].structure
        assert np.array_equal(x, evaluated)
        if key(outcome.best_structure) not in {key(r.structure) for r in h.records[: 8 + t - 1]}:
            assert np.array_equal(outcome.best_structure, evaluated)


def test_ucb_uses_bo_iteration_index():
    iters = []
    run_bo(Labs(8), small_config(budget=14), on_iteration=lambda t, s, o, x: iters.append((t, s.iteration)))
    assert iters == [(t, t) for t in range(1, 5)]


def test_duplicate_proposals_are_substituted(monkeypatch):
    # a solver that always proposes the same structure forces substitution every time
    obj = Labs(6)
    fixed = np.zeros(6, dtype=np.int64)
    real = bo._optimize

    def stubborn(state, objective, config, rng, ranker):
        out = real(state, objective, config, rng, ranker)
        out.best_structure = fixed.copy()
        return out

    monkeypatch.setattr(bo, "_optimize", stubborn)
    h = run_bo(obj, small_config(budget=40, init_evals=5))
    assert len({key(x) for x in h.structures}) == 40


def test_ranker_persists_across_iterations(monkeypatch):
    seen = []
    real = bo.l2s_disco_afo

    def spy(af, ranker, *args, **kwargs):
        before = ranker.theta.copy()
        out = real(af, ranker, *args, **kwargs)
        seen.append((id(ranker), before, ranker.theta.copy()))
        return out

    monkeypatch.setattr(bo, "l2s_disco_afo", spy)
    run_bo(Labs(9), small_config(budget=15))
    assert len(seen) == 5 and len({s[0] for s in seen}) == 1
    for (_, _, after), (_, before, _) in zip(seen, seen[1:]):
        assert np.array_equal(after, before)
    assert not np.array_equal(seen[0][1], seen[-1][2])


def test_random_search_determinism_and_budget_one():
    obj = Contamination(d=8, seed=0)
    a = run_random_search(obj, 15, seed=3, record_time=False)
    b = run_random_search(obj, 15, seed=3, record_time=False)
    assert list(a.rows()) == list(b.rows())
    assert len(run_random_search(obj, 1, seed=0)) == 1


def test_random_search_beats_median_on_synthetic():
    obj = SyntheticPlacement(d=10, counts=(2, 5, 3), seed=0)
    values = obj.evaluate_batch(np.asarray(list(obj.space.enumerate())))
    median = np.median(values)
    finals = [run_random_search(obj, 512, seed=s, record_time=False).best_value for s in range(20)]
    assert np.mean(finals) <= median


def test_exhausted_space_is_reported():
    obj = SyntheticPlacement(d=4, counts=(1, 2, 1), seed=0)  # 12 valid structures
    assert len(run_random_search(obj, 12, seed=0)) == 12
    with pytest.raises(SpaceTooConstrainedError, match="already been evaluated"):
        run_random_search(obj, 13, seed=0)


def test_objective_failure_preserves_history():
    class Flaky(Labs):
        def evaluate(self, x):
            self.calls = getattr(self, "calls", 0) + 1
            if self.calls == 13:
                raise RuntimeError("simulator crashed")
            return super().evaluate(x)

    with pytest.raises(BoAborted) as err:
        run_bo(Flaky(8), small_config(budget=20))
    assert len(err.value.history) == 12
    assert "evaluation 13" in str(err.value)


def test_invalid_structure_is_refused():
    obj = SyntheticPlacement(d=12, seed=0)
    h = History(obj.direction)
    with pytest.raises(InvalidStructureError):
        bo._evaluate(obj, np.zeros(12, dtype=int), h, 1, "bo", 0.0, False)


def test_unknown_method():
    with pytest.raises(ValueError, match="unknown method"):
        run_method(Labs(5), "smac", small_config())


def test_history_csv(tmp_path):
    h = History("minimize", seed=2)
    h.append(Record(1, "init", np.array([0, 1, 2]), 3.5, None))
    h.append(Record(2, "bo", np.array([2, 1, 0]), 1.25, 4.0))
    path = tmp_path / "h.csv"
    h.to_csv(path)
    assert path.read_text().splitlines() == [
        "seed,iteration,phase,structure,objective,incumbent,elapsed_ms",
        "2,1,init,0-1-2,3.5,3.5,",
        "2,2,bo,2-1-0,1.25,1.25,4.000",
    ]
