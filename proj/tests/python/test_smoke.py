import math

import pytest

import mcrn

TINY_RUN = """
[run]
seed = 7
epochs = 2
iterations = 2
[data]
input_dim = 8
query_fraction = 0.3
[data.source]
identities = 6
samples = 10
noise = 0.1
shift = 0
distortion = 0
[data.target]
identities = 6
samples = 10
noise = 0.1
shift = 0.2
distortion = 0.05
[encoder]
hidden = 12
feature_dim = 8
[cluster]
eps = 0.3
min_pts = 3
[memory]
k = 2
[loss]
scope = dscl
synthesis = soni
alpha = 0.1
[optim]
lr = 0.001
[batch]
p = 2
"""

RECORD_KEYS = {
    "epoch",
    "mean_loss",
    "map",
    "cmc1",
    "cmc5",
    "cmc10",
    "purity",
    "n_target_classes",
    "domain_distance",
}


def test_normalize():
    assert mcrn.l2_normalize([3.0, 4.0]) == pytest.approx([0.6, 0.8])
    unit = [1.0, 0.0, 0.0]
    assert mcrn.l2_normalize(unit) == unit


def test_cosine():
    assert mcrn.cosine_sim([1.0, 0.0], [0.0, 1.0]) == 0.0
    assert mcrn.cosine_sim([1.0, 0.0], [1.0, 0.0]) == 1.0


def test_dbscan_two_bundles():
    s = 1.0 / math.sqrt(1.0 + 0.01**2)
    bundle_a = [[s, s * 0.01], [s, -s * 0.01], [1.0, 0.0]]
    bundle_b = [[-s, s * 0.01], [-s, -s * 0.01], [-1.0, 0.0]]
    labels, n = mcrn.dbscan(bundle_a + bundle_b, eps=0.01, min_pts=2)
    assert n == 2
    assert labels[0] == labels[1] == labels[2]
    assert labels[3] == labels[4] == labels[5]
    assert labels[0] != labels[3]

    labels, n = mcrn.dbscan(bundle_a + [[0.0, 1.0]], eps=0.01, min_pts=2)
    assert n == 1
    assert labels[-1] == -1  # isolated point is noise


def test_hungarian():
    score = [[1.0, 5.0], [2.0, 1.0]]
    mapping = mcrn.hungarian_max(score)
    assert mapping == [1, 0]
    assert mcrn.assignment_score(score, mapping) == 7.0


def test_map_cmc_worked_example():
    q = [[1.0, 0.0]]
    gallery = [
        [0.9, math.sqrt(1 - 0.81)],
        [0.8, 0.6],
        [0.7, math.sqrt(1 - 0.49)],
    ]
    res = mcrn.map_cmc(q, [0], gallery, [0, 1, 0], max_rank=3)
    assert res["mean_ap"] == pytest.approx(5.0 / 6.0, abs=1e-12)
    assert res["evaluated"] == 1
    assert res["cmc"][0] == 1.0


def test_canonical_config_round_trip():
    canon = mcrn.canonical_config(TINY_RUN)
    assert mcrn.canonical_config(canon) == canon
    assert mcrn.config_hash(canon) == mcrn.config_hash(TINY_RUN)
    assert mcrn.config_hash(TINY_RUN) != mcrn.config_hash("")


def test_bad_config_raises():
    with pytest.raises(RuntimeError):
        mcrn.canonical_config("[run]\nbogus = 1\n")


def test_run_experiment_deterministic():
    first = mcrn.run_experiment(TINY_RUN)
    second = mcrn.run_experiment(TINY_RUN)
    assert first == second
    assert [r["epoch"] for r in first] == [1, 2]
    for record in first:
        assert set(record.keys()) == RECORD_KEYS
        assert 0.0 <= record["map"] <= 1.0
        assert 0.0 <= record["purity"] <= 1.0
        assert record["n_target_classes"] >= 1


def test_sweep_csv():
    csv = mcrn.sweep(TINY_RUN, "k", [1.0, 2.0])
    lines = csv.strip().split("\n")
    assert lines[0].startswith("param,value,epoch,")
    assert len(lines) == 3
    assert lines[1].startswith("k,1,")
    assert lines[2].startswith("k,2,")
