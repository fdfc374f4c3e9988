import io
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from rapid.envs import Episode, Transition
from rapid.scoring import (
    CountTable,
    ScoreWeights,
    coverage_rate,
    distinct_observations,
    episodic_score,
    global_score,
    local_score_continuous,
    local_score_discrete,
    update_counts,
)


def make_episode(obs_list, final=None):
    ts = [Transition(np.asarray(o), 0, 0.0, i == len(obs_list) - 1) for i, o in enumerate(obs_list)]
    return Episode(ts, 0, final_obs=None if final is None else np.asarray(final))


def int_obs(values):
    return [np.array([v], dtype=np.uint8) for v in values]


# ---------------------------------------------------------------------------
# local score, discrete


def test_local_discrete_simple_ratio():
    ep = make_episode(int_obs([0, 1, 2, 3, 4, 5, 6, 7, 0, 1]))  # 10 obs, 8 distinct
    assert local_score_discrete(ep) == 0.8


def test_local_discrete_no_revisit_is_one():
    ep = make_episode(int_obs(range(9)))
    assert local_score_discrete(ep) == 1.0


def test_chain_coverage_example():
    # eight-cell corridor, eight occupied slots, one revisit: 7/8
    positions = [0, 1, 2, 3, 4, 5, 6]
    ep = make_episode(int_obs(positions), final=np.array([5], dtype=np.uint8))
    assert local_score_discrete(ep) == 0.875
    assert coverage_rate(ep, 8) == 0.875
    assert distinct_observations(ep) == 7


def test_empty_episode_rejected():
    with pytest.raises(ValueError):
        local_score_discrete(make_episode([]))
    with pytest.raises(ValueError):
        local_score_continuous(make_episode([]))


# ---------------------------------------------------------------------------
# local score, continuous


def test_local_continuous_identical_states_zero():
    ep = make_episode([np.ones(4)] * 6)
    assert local_score_continuous(ep) == 0.0


def test_local_continuous_two_point_std():
    ep = make_episode([np.array([0.0]), np.array([2.0])])
    assert local_score_continuous(ep) == pytest.approx(1.0)


def test_local_continuous_matches_two_pass_oracle():
    rng = np.random.default_rng(3)
    obs = [rng.normal(size=4) for _ in range(50)]
    ep = make_episode(obs)
    mat = np.stack(obs)
    expected = 0.0
    for d in range(4):
        mean = sum(mat[:, d]) / len(mat)
        var = sum((x - mean) ** 2 for x in mat[:, d]) / len(mat)
        expected += math.sqrt(var)
    expected /= 4
    assert local_score_continuous(ep) == pytest.approx(expected, abs=1e-12)


def test_local_continuous_dimension_mismatch():
    ep = make_episode([np.zeros(3), np.zeros(4)])
    with pytest.raises(ValueError):
        local_score_continuous(ep)


# ---------------------------------------------------------------------------
# count table / global score


def test_update_counts_fresh_and_repeat():
    t = CountTable()
    ep = make_episode(int_obs([0, 1, 2, 3, 4]))
    update_counts(t, ep)
    assert all(t.get(np.array([v], dtype=np.uint8)) == 1 for v in range(5))
    update_counts(t, ep)
    assert all(t.get(np.array([v], dtype=np.uint8)) == 2 for v in range(5))
    assert t.total_insertions == 10


def test_counts_match_dictionary_tally():
    rng = np.random.default_rng(7)
    t = CountTable()
    tally = {}
    for _ in range(20):
        vals = rng.integers(0, 6, size=rng.integers(1, 12)).tolist()
        ep = make_episode(int_obs(vals))
        update_counts(t, ep)
        for v in vals:
            tally[v] = tally.get(v, 0) + 1
    for v, n in tally.items():
        assert t.get(np.array([v], dtype=np.uint8)) == n
    assert len(t) == len(tally)


def test_global_score_first_episode_all_distinct():
    t = CountTable()
    ep = make_episode(int_obs([0, 1, 2]))
    update_counts(t, ep)
    assert global_score(t, ep) == 1.0


def test_global_score_quarter_counts():
    t = CountTable()
    ep = make_episode(int_obs([0, 1]))
    for _ in range(4):
        update_counts(t, ep)
    assert global_score(t, ep) == pytest.approx(0.5)


def test_global_score_matches_direct_sum_oracle():
    rng = np.random.default_rng(11)
    t = CountTable()
    for _ in range(30):
        update_counts(t, make_episode(int_obs(rng.integers(0, 10, size=8).tolist())))
    vals = rng.integers(0, 10, size=12).tolist()
    ep = make_episode(int_obs(vals))
    update_counts(t, ep)
    tally = {}
    for key, n in t.counts.items():
        tally[key[0]] = n
    expected = sum(1.0 / math.sqrt(tally[v]) for v in vals) / len(vals)
    assert global_score(t, ep) == pytest.approx(expected, abs=1e-12)


def test_global_score_before_counting_is_contract_violation():
    t = CountTable()
    with pytest.raises(RuntimeError):
        global_score(t, make_episode(int_obs([1])))


def test_counts_never_decrease_and_global_shrinks():
    t = CountTable()
    ep = make_episode(int_obs([0, 1, 2, 3]))
    update_counts(t, ep)
    prev = global_score(t, ep)
    for _ in range(5):
        update_counts(t, ep)
        cur = global_score(t, ep)
        assert cur < prev
        prev = cur


def test_hash_equality_same_content_same_bucket():
    t = CountTable()
    t.increment(np.array([1, 2, 3], dtype=np.uint8))
    assert t.get(np.array([1, 2, 3], dtype=np.int64)) == 1
    assert t.get([1, 2, 3]) == 1


def test_count_table_rejects_bad_values():
    t = CountTable()
    with pytest.raises(TypeError):
        t.increment(np.array([0.5]))
    with pytest.raises(ValueError):
        t.increment(np.array([300]))


def test_count_table_dump():
    t = CountTable()
    t.increment(np.array([7], dtype=np.uint8))
    t.increment(np.array([7], dtype=np.uint8))
    buf = io.StringIO()
    t.dump(buf)
    assert buf.getvalue() == "07 2\n"


# ---------------------------------------------------------------------------
# weighted combination


def test_episodic_score_zero():
    assert episodic_score(0.0, 0.0, 0.0, ScoreWeights()) == 0.0


def test_episodic_score_defaults():
    assert episodic_score(1.0, 0.8, 0.5, ScoreWeights()) == pytest.approx(1.0805)


def test_episodic_score_ablated_weight_ignores_term():
    w = ScoreWeights(w_ext=1.0, w_local=0.0, w_global=0.001)
    a = episodic_score(0.3, 0.1, 0.5, w)
    b = episodic_score(0.3, 0.9, 0.5, w)
    assert a == b


def test_episodic_score_rejects_non_finite():
    with pytest.raises(ValueError):
        episodic_score(float("inf"), 0.0, 0.0, ScoreWeights())
    with pytest.raises(ValueError):
        ScoreWeights(w_ext=float("nan"))


# ---------------------------------------------------------------------------
# properties


obs_lists = st.lists(st.integers(0, 30), min_size=1, max_size=40)


@given(obs_lists)
def test_local_discrete_in_unit_interval(vals):
    s = local_score_discrete(make_episode(int_obs(vals)))
    assert 0.0 < s <= 1.0
    assert (s == 1.0) == (len(set(vals)) == len(vals))


@given(obs_lists, st.randoms(use_true_random=False))
def test_scores_are_permutation_invariant(vals, rnd):
    t = CountTable()
    ep = make_episode(int_obs(vals))
    update_counts(t, ep)
    shuffled = list(vals)
    rnd.shuffle(shuffled)
    ep2 = make_episode(int_obs(shuffled))
    assert local_score_discrete(ep) == local_score_discrete(ep2)
    assert global_score(t, ep) == pytest.approx(global_score(t, ep2), abs=1e-12)
    fvals = [np.array([v], dtype=float) for v in vals]
    fshuf = [np.array([v], dtype=float) for v in shuffled]
    assert local_score_continuous(make_episode(fvals)) == pytest.approx(
        local_score_continuous(make_episode(fshuf)), abs=1e-12
    )


@given(
    st.floats(-5, 5),
    st.floats(-5, 5),
    st.floats(-5, 5),
    st.floats(-2, 2),
    st.floats(-2, 2),
)
@settings(max_examples=60)
def test_episodic_score_linear_in_each_argument(e, l, g, a, b):
    w = ScoreWeights(1.0, 0.1, 0.001)
    s0 = episodic_score(e, l, g, w)
    assert episodic_score(e + a, l, g, w) == pytest.approx(s0 + w.w_ext * a, abs=1e-9)
    assert episodic_score(e, l + a, g, w) == pytest.approx(s0 + w.w_local * a, abs=1e-9)
    assert episodic_score(e, l, g + b, w) == pytest.approx(s0 + w.w_global * b, abs=1e-9)
