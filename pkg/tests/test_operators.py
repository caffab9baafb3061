import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from noisemap.operators import (
    ForwardOperator,
    RawOperator,
    add_operator_noise,
    apply,
    fit_operator_mixture,
    realize,
    realize_data,
    select_frequencies,
    select_measurement,
    synth_operator,
    synth_smooth_operator,
)


def test_band_sizes_match_measured_setup():
    raw = RawOperator(np.zeros((3, 817, 1), dtype=complex))
    assert select_frequencies(raw, range(50, 814)).n_rows == 2292
    assert select_frequencies(raw, range(817)).n_rows == 2451


def test_stacking_is_channel_major():
    c, k = np.meshgrid(np.arange(2), np.arange(5), indexing="ij")
    entries = np.repeat((c * 10 + k)[:, :, None], 3, axis=2).astype(complex)
    op = select_frequencies(RawOperator(entries), [1, 2])
    expected = []
    for ch in range(2):
        for f in (1, 2):
            expected.append(ch * 10 + f)
    assert op.entries[:, 0].real.tolist() == expected
    assert op.freq_index_set == (1, 2)
    assert op.channels == 2


def test_band_errors():
    raw = RawOperator(np.ones((1, 4, 2), dtype=complex))
    with pytest.raises(IndexError):
        select_frequencies(raw, [2, 4])
    with pytest.raises(ValueError):
        select_frequencies(raw, [])


def test_selection_commutes_with_apply(rng):
    raw = synth_operator(3, 3, 10, 6)
    band = range(2, 7)
    x = rng.standard_normal(6)
    full = apply(select_frequencies(raw, range(10)), x)
    picked = select_measurement(full, 10, band, 3)
    np.testing.assert_array_equal(apply(select_frequencies(raw, band), x), picked)


def test_apply_small_cases(rng):
    op = ForwardOperator(np.array([[1, 0], [0, 1j]]), channels=1)
    np.testing.assert_array_equal(apply(op, [3.0, 4.0]), [3, 4j])
    assert not np.any(apply(op, np.zeros(2)))
    a = rng.standard_normal((6, 4)) + 1j * rng.standard_normal((6, 4))
    x = rng.standard_normal(4)
    loop = [sum(a[i, j] * x[j] for j in range(4)) for i in range(6)]
    np.testing.assert_allclose(apply(ForwardOperator(a), x), loop, rtol=1e-14)
    with pytest.raises(ValueError):
        apply(ForwardOperator(a), np.ones(3))


@settings(max_examples=30, deadline=None)
@given(st.integers(0, 2**31), st.floats(-3, 3), st.floats(-3, 3))
def test_apply_is_linear(seed, a, b):
    r = np.random.default_rng(seed)
    op = ForwardOperator(r.standard_normal((4, 5)) + 1j * r.standard_normal((4, 5)))
    x, z = r.standard_normal(5), r.standard_normal(5)
    lhs = apply(op, a * x + b * z)
    rhs = a * apply(op, x) + b * apply(op, z)
    assert np.linalg.norm(lhs - rhs) <= 1e-12 * max(1.0, np.linalg.norm(rhs))


def test_realize_layout():
    sys = realize(ForwardOperator(np.array([[2 + 3j]])))
    np.testing.assert_array_equal(sys.rows, [[2.0], [3.0]])
    np.testing.assert_array_equal(sys.row_norms_sq, [4.0, 9.0])


@settings(max_examples=30, deadline=None)
@given(st.integers(0, 2**31))
def test_realized_apply_and_adjoint(seed):
    r = np.random.default_rng(seed)
    op = ForwardOperator(r.standard_normal((5, 7)) + 1j * r.standard_normal((5, 7)))
    sys = realize(op)
    x, u = r.standard_normal(7), r.standard_normal(10)
    np.testing.assert_allclose(sys.rows @ x, realize_data(apply(op, x)), rtol=0, atol=1e-13)
    lhs, rhs = (sys.rows @ x) @ u, x @ (sys.rows.T @ u)
    assert abs(lhs - rhs) <= 1e-12 * max(1.0, abs(lhs))
    np.testing.assert_allclose(sys.row_norms_sq, (sys.rows ** 2).sum(axis=1), rtol=1e-12)


def test_operator_noise_is_entrywise_sum(rng):
    from noisemap.operators import operator_deviation

    a = ForwardOperator(rng.standard_normal((3, 4)) + 1j * rng.standard_normal((3, 4)))
    h = rng.standard_normal((3, 4)) + 1j * rng.standard_normal((3, 4))
    before = a.entries.copy()
    b = add_operator_noise(a, h)
    for i in range(3):
        for j in range(4):
            assert b.entries[i, j] == a.entries[i, j] + h[i, j]
    np.testing.assert_array_equal(a.entries, before)
    np.testing.assert_array_equal(add_operator_noise(a, np.zeros((3, 4))).entries, a.entries)
    zero = ForwardOperator(np.zeros((3, 4)))
    np.testing.assert_array_equal(add_operator_noise(zero, h).entries, h)
    with pytest.raises(ValueError):
        add_operator_noise(a, np.zeros((4, 3)))
    x = rng.standard_normal(4)
    assert not np.any(operator_deviation(a, a, x))
    np.testing.assert_allclose(operator_deviation(a, b, x), -(h @ x), atol=1e-13)
    np.testing.assert_allclose(operator_deviation(b, a, x), b.entries @ x - a.entries @ x, atol=1e-13)


def test_mixture_recovers_weights(rng):
    a1 = ForwardOperator(rng.standard_normal((6, 4)) + 1j * rng.standard_normal((6, 4)))
    a2 = ForwardOperator(rng.standard_normal((6, 4)) + 1j * rng.standard_normal((6, 4)))
    ref = ForwardOperator(0.3 * a1.entries + 0.7 * a2.entries)
    w, obj = fit_operator_mixture([a1, a2], ref)
    np.testing.assert_allclose(w, [0.3, 0.7], atol=1e-8)
    assert obj < 1e-14
    w, obj = fit_operator_mixture([a1], a1)
    np.testing.assert_allclose(w, [1.0], atol=1e-10)
    w, _ = fit_operator_mixture([a1], ForwardOperator(-a1.entries))
    assert w.tolist() == [0.0]
    with pytest.raises(ValueError):
        fit_operator_mixture([], a1)


def test_mixture_first_order_optimality(rng):
    cands = [ForwardOperator(rng.standard_normal((5, 3)) + 1j * rng.standard_normal((5, 3))) for _ in range(3)]
    ref = ForwardOperator(rng.standard_normal((5, 3)) + 1j * rng.standard_normal((5, 3)))
    w, obj = fit_operator_mixture(cands, ref)
    assert np.all(w >= 0)

    def residual(v):
        r = ref.entries - sum(vi * c.entries for vi, c in zip(v, cands))
        return float(np.vdot(r, r).real)

    assert residual(w) == pytest.approx(obj, rel=1e-12)
    for i in range(3):
        for sign in (1, -1):
            v = w.copy()
            v[i] += sign * 1e-3
            if v[i] >= 0:
                assert residual(v) >= obj - 1e-12


def test_synthetic_operators():
    a = synth_operator(5, 2, 3, 4)
    np.testing.assert_array_equal(a.entries, synth_operator(5, 2, 3, 4).entries)
    assert synth_operator(0, 3, 1, 1).entries.shape == (3, 1, 1)
    mags = np.abs(synth_operator(1, 3, 12, 4000, decay=1.0).entries).mean(axis=(0, 2))
    assert np.all(np.diff(mags) < 0)
    fine = synth_smooth_operator(2, 1, 4, (85, 75))
    coarse = synth_smooth_operator(2, 1, 4, (17, 15))
    # block-summing the fine discretisation approximates the coarse one
    summed = fine.entries.reshape(1, 4, 17, 5, 15, 5).sum(axis=(3, 5)).reshape(1, 4, -1)
    rel = np.linalg.norm(summed - coarse.entries) / np.linalg.norm(coarse.entries)
    assert 0 < rel < 0.05
