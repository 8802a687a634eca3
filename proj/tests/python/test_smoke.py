import math

import ktkit


def test_version():
    assert ktkit.__version__ == "0.1.0"


def test_plan_matches_reference_example():
    plan = ktkit.make_plan([2, 2, 3, 3, 4, 5, 6, 7, 7, 8], 5)
    assert plan["starts"] == [0, 0, 2, 2, 4, 5, 6, 7, 7, 9]
    assert plan["shift_index"] == [-1, -1, 1, 1, 3, 4, 5, 6, 6, 8]
    mask = plan["mask"]
    assert mask[0] == [1] * 10
    assert mask[2] == [0, 0, 1, 1, 1, 1, 1, 1, 1, 1]
    assert mask[9] == [1, 1, 1, 1, 0, 0, 0, 0, 0, 1]
    # No row may attend to itself or anything at or after its run start.
    for i, row in enumerate(mask):
        start = plan["starts"][i]
        for j in range(start, 10):
            assert row[j] == 1


def test_plan_window_clips_left_edge():
    plan = ktkit.make_plan([7, 7, 9, 9, 9, 7], 2)
    assert plan["shift_index"] == [-1, -1, 1, 1, 1, 4]
    mask = plan["mask"]
    assert mask[5] == [1, 1, 1, 0, 0, 1]


def test_roc_auc_reference_values():
    assert ktkit.roc_auc([0, 0, 1, 1], [0.1, 0.4, 0.35, 0.8]) == 0.75
    assert ktkit.roc_auc([0, 1], [0.2, 0.9]) == 1.0
    assert ktkit.roc_auc([0, 1], [0.5, 0.5]) == 0.5


def test_roc_auc_rejects_single_class():
    try:
        ktkit.roc_auc([1, 1], [0.2, 0.9])
    except ValueError:
        pass
    else:
        raise AssertionError("expected ValueError")


def test_synth_summary_deterministic():
    a = ktkit.synth_summary(users=6, seed=3)
    b = ktkit.synth_summary(users=6, seed=3)
    assert a == b
    c = ktkit.synth_summary(users=6, seed=4)
    assert a != c
    assert 0 < a["n_correct"] < a["n_events"]
    assert a["n_truth_rows"] <= a["n_events"]


def test_stream_features_shape_and_first_row():
    rows = ktkit.stream_features(users=4, seed=2, user_id=0)
    assert len(rows) >= 10
    widths = {len(r) for r in rows}
    assert widths == {40}
    # Before any history every count and ratio is zero.
    assert all(v == 0.0 for v in rows[0])
    assert all(math.isfinite(v) for row in rows for v in row)


def test_gradcheck_micro():
    err = ktkit.gradcheck_micro(seed=1)
    assert err <= 1e-5
