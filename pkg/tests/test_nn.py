import numpy as np
import pytest

from conftest import random_dag
from oracles import dense_w, fd_gradient, rel_error
from dagconv import autograd as ag
from dagconv import thames
from dagconv.dag import Permutation, new_dag, permute_dag
from dagconv.errors import ShapeMismatch
from dagconv.gso import gso_set, sample_anchors
from dagconv.nn import (
    DCN,
    GCN,
    MLP,
    PDCN,
    FBGCNN,
    backward,
    causal_filterbank,
    dcn_forward,
    gcn_operator,
    layer_widths,
    loss_mse,
    pdcn_forward,
    simple_dcn,
    simple_dcn_forward,
)


def test_layer_widths():
    assert layer_widths(1, 32, 1, 2) == [(1, 32), (32, 1)]
    assert layer_widths(3, 8, 2, 3) == [(3, 8), (8, 8), (8, 2)]
    assert layer_widths(1, 32, 1, 1) == [(1, 1)]
    assert layer_widths(1, 32, 1, 0) == []


def test_published_parameter_counts():
    d = thames.thames_dag()
    assert DCN(gso_set(d)).parameter_count() == 1313
    assert DCN(gso_set(d, subset=list(range(15)))).parameter_count() == 993
    gene = new_dag(107, [])
    assert DCN(gso_set(gene)).parameter_count() == 6881
    assert PDCN(gso_set(d)).parameter_count() == 385
    assert MLP(20).parameter_count() == 97
    assert FBGCNN(d, filter_order=2).parameter_count() == 161
    assert GCN(d).parameter_count() == 97


def test_pdcn_count_ignores_graph_size():
    counts = {n: PDCN(gso_set(random_dag(np.random.default_rng(n), n, 0.2))).parameter_count() for n in (10, 50, 100)}
    assert len(set(counts.values())) == 1


def test_zero_layer_model_has_no_parameters(ex7):
    m = DCN(gso_set(ex7), layers=0)
    assert m.parameter_count() == 0
    x = np.ones((7, 1))
    np.testing.assert_allclose(m(x).value, x)


def naive_filterbank(mats, x, theta):
    return sum(np.einsum("nm,bmi,io->bno", s, x, theta[k]) for k, s in enumerate(mats))


@pytest.mark.parametrize("fi, fo", [(1, 4), (3, 3), (5, 2)])
def test_filterbank_paths_match_naive_sum(fi, fo):
    rng = np.random.default_rng(fi * 10 + fo)
    d = random_dag(rng, 9)
    g = gso_set(d, subset=[0, 2, 5, 8])
    x = rng.standard_normal((3, 9, fi))
    theta = rng.standard_normal((4, fi, fo))
    out = causal_filterbank(g, ag.Tensor(x), ag.Tensor(theta)).value
    np.testing.assert_allclose(out, naive_filterbank([m.dense() for m in g], x, theta), atol=1e-12)


def test_unbatched_and_batched_agree(ex7):
    m = DCN(gso_set(ex7), in_features=2, seed=1)
    x = np.random.default_rng(0).standard_normal((4, 7, 2))
    batched = m(x).value
    for b in range(4):
        np.testing.assert_allclose(m(x[b]).value, batched[b], atol=1e-12)


def test_input_shape_checks(ex7):
    m = DCN(gso_set(ex7))
    with pytest.raises(ShapeMismatch):
        m(np.ones((6, 1)))
    with pytest.raises(ShapeMismatch):
        m(np.ones((7, 2)))
    with pytest.raises(ShapeMismatch):
        m(np.ones(7))


def test_simple_dcn_matches_numpy_recursion(ex7):
    rng = np.random.default_rng(2)
    g = gso_set(ex7)
    taps = [rng.standard_normal(7) for _ in range(3)]
    x = rng.standard_normal(7)
    model = simple_dcn(g, taps)
    np.testing.assert_allclose(model(x[:, None]).value[:, 0], simple_dcn_forward(g, taps, x), atol=1e-12)
    with pytest.raises(ShapeMismatch):
        simple_dcn_forward(g, taps, np.ones(6))


def test_dcn_t_uses_transposed_operators(ex7):
    g, gt = gso_set(ex7), gso_set(ex7, transposed=True)
    m = DCN(g, seed=3)
    x = np.random.default_rng(3).standard_normal((2, 7, 1))
    swapped = dcn_forward(m, gt, x).value
    mt = DCN(gt, seed=3)
    np.testing.assert_allclose(swapped, mt(x).value)
    assert not np.allclose(swapped, m(x).value)
    with pytest.raises(ShapeMismatch):
        dcn_forward(m, gso_set(ex7, subset=[0, 1]), x)


def test_fbgcnn_first_order_is_per_node_map(ex7):
    m = FBGCNN(ex7, filter_order=1, seed=0)
    x = np.random.default_rng(4).standard_normal((1, 7, 1))
    mlp_like = np.maximum(x @ m.params["theta0.0"].value + m.params["bias0"].value, 0)
    expect = mlp_like @ m.params["theta1.0"].value + m.params["bias1"].value
    np.testing.assert_allclose(m(x).value, expect)
    with pytest.raises(ValueError):
        FBGCNN(ex7, filter_order=0)


def test_gcn_operator_symmetric_with_signed_weights():
    d = new_dag(3, [(1, 0, -2.0), (2, 1, 0.5)])
    op = gcn_operator(d).toarray()
    np.testing.assert_allclose(op, op.T)
    assert np.all(np.isfinite(op))
    np.testing.assert_allclose(np.diag(op), [1 / 2, 1 / 3, 1 / 2])


def test_state_dict_round_trip(ex7):
    m = PDCN(gso_set(ex7), seed=0)
    state = m.state_dict()
    other = PDCN(gso_set(ex7), seed=1)
    other.load_state_dict(state)
    x = np.ones((7, 1))
    np.testing.assert_allclose(other(x).value, m(x).value)
    state["mlp.w0"] = np.ones((2, 2))
    with pytest.raises(ShapeMismatch):
        other.load_state_dict(state)


def _builders(d, rng):
    k = sample_anchors(d.n, max(2, d.n // 2), rng)
    return {
        "dcn": lambda s: DCN(gso_set(d, subset=k), in_features=2, hidden=4, out_features=2, seed=s),
        "pdcn": lambda s: PDCN(gso_set(d, subset=k), in_features=2, hidden=4, out_features=2, seed=s),
        "fb_gcnn": lambda s: FBGCNN(d, filter_order=3, in_features=2, hidden=4, out_features=2, seed=s),
        "gcn": lambda s: GCN(d, in_features=2, hidden=4, out_features=2, seed=s),
        "mlp": lambda s: MLP(d.n, in_features=2, hidden=4, out_features=2, seed=s),
    }


def _kink_distance(monkeypatch, model, x) -> float:
    """Smallest |pre-activation| seen by any ReLU in a forward pass."""
    seen = []
    relu = ag.relu

    def spy(h):
        seen.append(np.min(np.abs(h.value)))
        return relu(h)

    monkeypatch.setitem(ag.ACTIVATIONS, "relu", spy)
    model(x)
    monkeypatch.setitem(ag.ACTIVATIONS, "relu", relu)
    return min(seen, default=np.inf)


@pytest.mark.parametrize("kind", ["dcn", "pdcn", "fb_gcnn", "gcn", "mlp"])
def test_gradients_match_finite_differences(kind, monkeypatch):
    checked, seed = 0, 100
    while checked < 5:
        rng = np.random.default_rng(seed)
        seed += 1
        d = random_dag(rng, 6)
        model = _builders(d, rng)[kind](seed)
        for p in model.params.values():  # nonzero biases exercise every path
            p.value = p.value + 0.1 * rng.standard_normal(p.shape)
        x = rng.standard_normal((3, 6, 2))
        y = rng.standard_normal((3, 6, 2))
        # central differences are only valid away from ReLU kinks
        if _kink_distance(monkeypatch, model, x) < 1e-3:
            continue
        checked += 1
        trial = seed
        grads = backward(model, loss_mse(model(x), y))
        for name, p in model.params.items():
            num = fd_gradient(lambda: float(loss_mse(model(x), y).value), p.value)
            assert rel_error(grads[name], num) < 1e-4, (kind, trial, name)


def _permuted_gsos(d, anchors, p, transposed=False):
    d2 = permute_dag(d, p)
    return gso_set(d, subset=anchors, transposed=transposed), gso_set(d2, subset=[p(k) for k in anchors], transposed=transposed)


@pytest.mark.parametrize("kind", ["dcn", "pdcn"])
def test_network_equivariance(kind):
    worst = 0.0
    for trial in range(25):
        rng = np.random.default_rng(trial)
        d = random_dag(rng, int(rng.integers(3, 12)))
        p = Permutation.random(d.n, rng)
        anchors = sample_anchors(d.n, int(rng.integers(1, d.n + 1)), rng)
        g, g2 = _permuted_gsos(d, anchors, p)
        x = rng.standard_normal((2, d.n, 3))
        if kind == "dcn":
            m = DCN(g, in_features=3, hidden=5, out_features=2, seed=trial)
            out, out2 = m(x).value, dcn_forward(m, g2, p.apply(x, axis=1)).value
        else:
            m = PDCN(g, in_features=3, hidden=5, out_features=2, seed=trial)
            out, out2 = m(x).value, pdcn_forward(m, g2, p.apply(x, axis=1)).value
        worst = max(worst, np.max(np.abs(out2 - p.apply(out, axis=1))))
    assert worst < 1e-9


def test_closure_oracle_used_for_counts(ex7):
    # one tap per anchor and feature pair: K=7 anchors, widths 1 -> 32 -> 1
    assert DCN(gso_set(ex7)).parameter_count() == 7 * 32 + 32 + 7 * 32 + 1
    assert dense_w(ex7).shape == (7, 7)
