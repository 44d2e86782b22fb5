import numpy as np
import pytest

from bignn.core import Dataset, ParameterError, RngStream
from bignn.denoise import (DenoisedModel, predict_denoised, predict_denoised_batch, prediction_size,
                           pretrain)
from bignn.ensemble import FixedK, predict, predict_batch, train
from bignn.knn_index import build_index
from bignn.synthgen import sample, sim3_model


@pytest.fixture(scope="module")
def data():
    return sample(sim3_model(4), 1500, RngStream(0))


@pytest.fixture(scope="module")
def model(data):
    return train(data, 0.2, FixedK(15), RngStream(1))


def test_prediction_size():
    # 8000**0.6 = 219.71
    assert prediction_size(8000, 0.6) == 220
    assert prediction_size(100, 1.0) == 100
    for bad in (0.0, 1.1, -0.5):
        with pytest.raises(ParameterError):
            prediction_size(100, bad)


def test_identity_case(data, model):
    dm = pretrain(model, data, 1.0, 1, RngStream(2))
    assert dm.m == data.size and dm.I == 1
    # queries at training points: the 1-NN is the point itself
    X = data.X[:300]
    np.testing.assert_array_equal(predict_denoised_batch(dm, X), predict_batch(model, X))


def test_labels_come_from_model(data, model):
    dm = pretrain(model, data, 0.6, 5, RngStream(3))
    for ix in dm.subsamples:
        assert ix.size == prediction_size(data.size, 0.6)
        assert len(np.unique(ix.ids)) == ix.size
        np.testing.assert_array_equal(ix.y, predict_batch(model, data.X[ix.ids]))
        for j in range(0, ix.size, 37):
            assert ix.y[j] == predict(model, data.X[ix.ids[j]])


def test_constant_model_relabels_everything():
    gen = np.random.default_rng(0)
    ds = Dataset(gen.normal(size=(200, 2)), gen.integers(0, 2, 200))
    ones = Dataset(ds.X, np.ones(200))
    model = train(ones, 0.0, FixedK(1), RngStream(0))
    dm = pretrain(model, ds, 0.8, 3, RngStream(1))
    assert all(np.all(ix.y == 1) for ix in dm.subsamples)


def _fixed(labels):
    subs = [build_index(np.zeros((1, 1)), [v], ids=[j]) for j, v in enumerate(labels)]
    return DenoisedModel(subs, 1, 0.5)


@pytest.mark.parametrize("labels,expected", [((1, 1, 0), 1), ((1, 0), 0), ((0,), 0), ((1,), 1)])
def test_vote(labels, expected):
    assert predict_denoised(_fixed(labels), [0.0]) == expected


def test_query_cost_counter(data, model):
    dm = pretrain(model, data, 0.5, 7, RngStream(4))
    before = dm.n_queries
    predict_denoised_batch(dm, data.X[:40])
    assert dm.n_queries - before == 7 * 40
    assert all(ix.size <= dm.m for ix in dm.subsamples)


def test_reuse_partition_variant(data, model):
    dm = pretrain(model, data, 0.8, 3, RngStream(5), reuse_partition=True)
    groups = model.partition.groups()
    for ix in dm.subsamples:
        # each prediction subsample is a union of whole training subsamples
        members = [j for j, g in enumerate(groups) if np.isin(g, ix.ids).any()]
        assert sum(len(groups[j]) for j in members) == ix.size


def test_deterministic(data, model):
    a = pretrain(model, data, 0.5, 3, RngStream(6))
    b = pretrain(model, data, 0.5, 3, RngStream(6))
    for x, y in zip(a.subsamples, b.subsamples):
        np.testing.assert_array_equal(x.ids, y.ids)


def test_errors(data, model):
    with pytest.raises(ParameterError):
        pretrain(model, data, 0.0, 3, RngStream(0))
    with pytest.raises(ParameterError):
        pretrain(model, data, 0.5, 0, RngStream(0))
    dm = pretrain(model, data, 0.5, 1, RngStream(0))
    with pytest.raises(ParameterError):
        predict_denoised(dm, [0.0])
