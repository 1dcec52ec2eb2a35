"""Forward semantics of the tensor primitives and tape behaviour."""
import numpy as np
import pytest

from sememepred.ndcore import (
    NonFiniteError,
    ShapeError,
    Tape,
    TapeError,
    Tensor,
    add,
    concat,
    embedding_lookup,
    forward_op,
    gru_sequence,
    log,
    matmul,
    mul,
    op_kinds,
    set_checked,
    sigmoid,
    slice_axis,
    softmax,
    tanh,
    tmean,
    transpose,
    tsum,
)


@pytest.fixture(autouse=True)
def checked_mode():
    set_checked(True)
    yield
    set_checked(True)


def test_matmul_identity():
    a = Tensor(np.arange(12, dtype=float).reshape(3, 4))
    out = matmul(Tensor(np.eye(3)), a)
    np.testing.assert_array_equal(out.data, a.data)


def test_softmax_equal_logits():
    out = softmax(Tensor(np.zeros((1, 3))))
    np.testing.assert_allclose(out.data, [[1 / 3, 1 / 3, 1 / 3]], atol=1e-12)


def test_sigmoid_at_zero():
    assert sigmoid(Tensor(np.zeros((1, 1)))).item() == pytest.approx(0.5)


def test_softmax_rows_sum_to_one():
    rng = np.random.default_rng(0)
    for _ in range(100):
        x = Tensor(rng.normal(0, 5, size=(4, 7)))
        out = softmax(x).data
        assert np.all(out >= 0)
        np.testing.assert_allclose(out.sum(axis=-1), 1.0, atol=1e-9)


def test_matmul_shape_error_names_op_and_shapes():
    with pytest.raises(ShapeError, match=r"matmul.*\(2, 3\).*\(2, 3\)"):
        matmul(Tensor(np.zeros((2, 3))), Tensor(np.zeros((2, 3))))


def test_add_shape_error():
    with pytest.raises(ShapeError, match="add"):
        add(Tensor(np.zeros((2, 3))), Tensor(np.zeros((2, 4))))


def test_checked_mode_rejects_nonfinite_input():
    bad = Tensor(np.array([[np.nan, 1.0]]))
    with pytest.raises(NonFiniteError, match="tanh"):
        tanh(bad)
    set_checked(False)
    assert np.isnan(tanh(bad).data[0, 0])


def test_log_without_floor_flags_nonpositive_in_checked_mode():
    with pytest.raises(NonFiniteError):
        log(Tensor(np.array([[0.0, 1.0]])))


def test_log_floor_clamps():
    out = log(Tensor(np.array([[1e-20, 1.0]])), floor=1e-12)
    np.testing.assert_allclose(out.data[0, 0], np.log(1e-12))


def test_concat_and_slice_roundtrip():
    a = Tensor(np.arange(6, dtype=float).reshape(2, 3))
    b = Tensor(np.arange(4, dtype=float).reshape(2, 2))
    joined = concat([a, b], axis=1)
    assert joined.shape == (2, 5)
    back = slice_axis(joined, 1, 0, 3)
    np.testing.assert_array_equal(back.data, a.data)


def test_transpose_and_reductions():
    a = Tensor(np.array([[1.0, 2.0], [3.0, 4.0]]))
    np.testing.assert_array_equal(transpose(a).data, a.data.T)
    assert tsum(a).item() == 10.0
    assert tmean(a).item() == 2.5
    np.testing.assert_array_equal(tsum(a, axis=0).data, [4.0, 6.0])
    np.testing.assert_array_equal(tmean(a, axis=1).data, [1.5, 3.5])


def test_embedding_lookup_rows_and_bounds():
    table = Tensor(np.arange(12, dtype=float).reshape(4, 3))
    out = embedding_lookup(table, [2, 0, 2])
    np.testing.assert_array_equal(out.data, table.data[[2, 0, 2]])
    with pytest.raises(ValueError, match="out of range"):
        embedding_lookup(table, [4])


def test_gru_zero_weights_is_zero_fixed_point():
    # zero weights give 0.5 gates and a zero candidate, so states stay zero
    l, e, h = 4, 3, 5
    x = Tensor(np.random.default_rng(0).normal(size=(l, e)))
    zeros = lambda shape: Tensor(np.zeros(shape))
    states = gru_sequence(x, zeros((1, h)), zeros((e + h, 2 * h)),
                          zeros((2 * h,)), zeros((e + h, h)), zeros((h,)))
    np.testing.assert_array_equal(states.data, np.zeros((l, h)))


def test_gru_reverse_matches_forward_on_reversed_input():
    rng = np.random.default_rng(1)
    l, e, h = 6, 3, 4
    x = rng.normal(size=(l, e))
    args = [Tensor(rng.normal(size=s) * 0.3) for s in
            [(1, h), (e + h, 2 * h), (2 * h,), (e + h, h), (h,)]]
    fwd = gru_sequence(Tensor(x), *args)
    bwd = gru_sequence(Tensor(x[::-1].copy()), *args, reverse=True)
    np.testing.assert_allclose(fwd.data, bwd.data[::-1], atol=1e-12)


def test_forward_op_dispatch():
    out = forward_op("add", Tensor(np.ones((2, 2))), Tensor(np.ones((2, 2))))
    np.testing.assert_array_equal(out.data, 2 * np.ones((2, 2)))
    with pytest.raises(ValueError, match="unknown op kind"):
        forward_op("conv2d", Tensor(np.ones((1, 1))))
    assert "matmul" in op_kinds()


class TestTape:
    def test_records_only_when_grad_required(self):
        with Tape() as tape:
            mul(Tensor(np.ones((1, 1))), Tensor(np.ones((1, 1))))
            assert len(tape) == 0
            mul(Tensor(np.ones((1, 1)), requires_grad=True), Tensor(np.ones((1, 1))))
            assert len(tape) == 1

    def test_backward_twice_errors(self):
        x = Tensor(np.array([[2.0]]), requires_grad=True)
        with Tape() as tape:
            loss = mul(x, x)
            tape.backward(loss)
            with pytest.raises(TapeError, match="already"):
                tape.backward(loss)

    def test_backward_on_empty_tape_errors(self):
        with Tape() as tape:
            with pytest.raises(TapeError, match="empty"):
                tape.backward(Tensor(np.array([[1.0]])))

    def test_non_scalar_loss_errors(self):
        x = Tensor(np.ones((2, 2)), requires_grad=True)
        with Tape() as tape:
            out = mul(x, x)
            with pytest.raises(TapeError, match="scalar"):
                tape.backward(out)

    def test_clear_allows_reuse(self):
        x = Tensor(np.array([[3.0]]), requires_grad=True)
        with Tape() as tape:
            loss = mul(x, x)
            tape.backward(loss)
            tape.clear()
            loss = mul(x, x)
            tape.backward(loss)
        # two backward passes accumulated into the leaf
        np.testing.assert_allclose(x.grad, [[12.0]])

    def test_grads_accumulate_across_tapes(self):
        x = Tensor(np.array([[1.0]]), requires_grad=True)
        for _ in range(3):
            with Tape() as tape:
                loss = mul(x, Tensor(np.array([[2.0]])))
                tape.backward(loss)
        np.testing.assert_allclose(x.grad, [[6.0]])

    def test_replay_determinism(self):
        # identical seeds and inputs give bitwise-identical results
        def run():
            rng = np.random.default_rng(42)
            x = Tensor(rng.normal(size=(4, 4)), requires_grad=True)
            w = Tensor(rng.normal(size=(4, 3)), requires_grad=True)
            with Tape() as tape:
                loss = tsum(tanh(matmul(x, w)))
                tape.backward(loss)
            return loss.item(), x.grad.copy(), w.grad.copy()

        l1, gx1, gw1 = run()
        l2, gx2, gw2 = run()
        assert l1 == l2
        assert np.array_equal(gx1, gx2) and np.array_equal(gw1, gw2)
