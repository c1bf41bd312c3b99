import numpy as np
import pytest

from kwspot.errors import InvalidStatsError, ShapeError
from kwspot.kernels import (
    AttentionParams,
    DenseParams,
    GruParams,
    attention_pool_and_classify,
    batchnorm_inference,
    conv2d,
    dense,
    gru_cell,
    gru_forward,
    scaled_dot_attention,
    sigmoid,
    softmax_rows,
)

F32 = np.float32


def conv2d_oracle(x, kernel, stride, bias):
    """Nested-loop cross-correlation with float32 accumulation."""
    kt, kf, c_in, c_out = kernel.shape
    st, sf = stride
    out_t = (x.shape[0] - kt) // st + 1
    out_f = (x.shape[1] - kf) // sf + 1
    out = np.zeros((out_t, out_f, c_out), dtype=F32)
    for ot in range(out_t):
        for of in range(out_f):
            for oc in range(c_out):
                acc = F32(0.0)
                for dt in range(kt):
                    for df in range(kf):
                        for ic in range(c_in):
                            acc = F32(acc + x[ot * st + dt, of * sf + df, ic] * kernel[dt, df, ic, oc])
                out[ot, of, oc] = acc + bias[oc]
    return out


def random_gru(rng, n, d) -> GruParams:
    u = lambda *s: rng.uniform(-0.5, 0.5, size=s).astype(F32)
    return GruParams(u(d, n), u(d, d), u(d), u(d, n), u(d, d), u(d), u(d, n), u(d, d), u(d))


def random_attention(rng, d) -> AttentionParams:
    u = lambda *s: rng.uniform(-0.5, 0.5, size=s).astype(F32)
    return AttentionParams(u(d, d), u(d), u(d, d), u(d), u(d, d), u(d))


class TestConv2d:
    def test_identity_kernel(self):
        rng = np.random.default_rng(0)
        x = rng.normal(size=(5, 4, 1)).astype(F32)
        kernel = np.ones((1, 1, 1, 1), dtype=F32)
        out = conv2d(x, kernel, (1, 1), np.zeros(1, dtype=F32))
        assert np.array_equal(out, x)

    def test_reference_front_end_shape(self):
        from conftest import build_network
        from kwspot.models import reference_config

        net = build_network(reference_config("CRNN-239k"))
        x = np.random.default_rng(1).normal(size=(100, 64)).astype(F32)
        steps = net.conv_timesteps(x)
        assert steps.shape == (10, 512)

    def test_strided_case_matches_oracle(self):
        rng = np.random.default_rng(2)
        x = rng.uniform(-0.3, 0.3, size=(6, 5, 2)).astype(F32)
        kernel = rng.uniform(-0.3, 0.3, size=(3, 3, 2, 4)).astype(F32)
        bias = rng.uniform(-0.3, 0.3, size=4).astype(F32)
        out = conv2d(x, kernel, (2, 1), bias)
        expected = conv2d_oracle(x, kernel, (2, 1), bias)
        assert out.shape == expected.shape == (2, 3, 4)
        np.testing.assert_allclose(out, expected, atol=1e-6)

    def test_random_shapes_match_oracle(self):
        rng = np.random.default_rng(3)
        for _ in range(100):
            t = int(rng.integers(1, 9))
            f = int(rng.integers(1, 9))
            c_in = int(rng.integers(1, 4))
            kt = int(rng.integers(1, t + 1))
            kf = int(rng.integers(1, f + 1))
            c_out = int(rng.integers(1, 4))
            st = int(rng.integers(1, 3))
            sf = int(rng.integers(1, 3))
            x = rng.uniform(-0.3, 0.3, size=(t, f, c_in)).astype(F32)
            kernel = rng.uniform(-0.3, 0.3, size=(kt, kf, c_in, c_out)).astype(F32)
            bias = rng.uniform(-0.3, 0.3, size=c_out).astype(F32)
            np.testing.assert_allclose(
                conv2d(x, kernel, (st, sf), bias),
                conv2d_oracle(x, kernel, (st, sf), bias),
                atol=1e-6,
            )

    def test_kernel_larger_than_input_rejected(self):
        with pytest.raises(ShapeError):
            conv2d(np.zeros((2, 2, 1), dtype=F32), np.zeros((3, 3, 1, 1), dtype=F32))

    def test_channel_mismatch_rejected(self):
        with pytest.raises(ShapeError):
            conv2d(np.zeros((4, 4, 2), dtype=F32), np.zeros((2, 2, 3, 1), dtype=F32))


class TestBatchNorm:
    def test_identity_stats(self):
        x = np.random.default_rng(0).normal(size=(3, 4)).astype(F32)
        out = batchnorm_inference(x, np.zeros(4, F32), np.ones(4, F32),
                                  np.ones(4, F32), np.zeros(4, F32), eps=0.0)
        np.testing.assert_allclose(out, x, atol=1e-7)

    def test_input_equal_to_mean_gives_beta(self):
        mean = np.array([1.0, -2.0, 0.5], dtype=F32)
        beta = np.array([3.0, 4.0, 5.0], dtype=F32)
        x = np.tile(mean, (6, 1))
        out = batchnorm_inference(x, mean, np.ones(3, F32), np.ones(3, F32), beta)
        np.testing.assert_allclose(out, np.tile(beta, (6, 1)), atol=1e-6)

    def test_random_stats_match_scalar_oracle(self):
        rng = np.random.default_rng(5)
        x = rng.normal(size=(4, 3, 5)).astype(F32)
        mean = rng.normal(size=5).astype(F32)
        var = rng.uniform(0.2, 2.0, size=5).astype(F32)
        gamma = rng.normal(size=5).astype(F32)
        beta = rng.normal(size=5).astype(F32)
        eps = 1e-5
        out = batchnorm_inference(x, mean, var, gamma, beta, eps)
        for i in range(4):
            for j in range(3):
                for c in range(5):
                    want = (x[i, j, c] - mean[c]) / np.sqrt(var[c] + eps) * gamma[c] + beta[c]
                    assert abs(out[i, j, c] - want) < 1e-6

    def test_negative_variance_rejected(self):
        with pytest.raises(InvalidStatsError):
            batchnorm_inference(np.zeros((2, 2), F32), np.zeros(2, F32),
                                np.array([1.0, -0.1], F32), np.ones(2, F32), np.zeros(2, F32))


class TestGru:
    def test_zero_params_keep_zero_state(self):
        params = GruParams(*(np.zeros(s, dtype=F32) for s in
                             [(3, 2), (3, 3), (3,)] * 3))
        states = gru_forward(params, np.random.default_rng(0).normal(size=(7, 2)).astype(F32))
        assert np.array_equal(states, np.zeros((7, 3), dtype=F32))

    def test_single_step_hand_computed(self):
        # d=1, n=1: z = sig(.5x + .25h + .1), r = sig(-.3x + .2h),
        # c = tanh(.7x + .4(r*h) - .2), h' = (1-z)h + zc  at x=1, h0=0.5
        params = GruParams(
            wz=np.array([[0.5]], F32), uz=np.array([[0.25]], F32), bz=np.array([0.1], F32),
            wr=np.array([[-0.3]], F32), ur=np.array([[0.2]], F32), br=np.array([0.0], F32),
            wh=np.array([[0.7]], F32), uh=np.array([[0.4]], F32), bh=np.array([-0.2], F32),
        )
        x, h = 1.0, 0.5
        z = 1 / (1 + np.exp(-(0.5 * x + 0.25 * h + 0.1)))
        r = 1 / (1 + np.exp(-(-0.3 * x + 0.2 * h)))
        c = np.tanh(0.7 * x + 0.4 * (r * h) - 0.2)
        expected = (1 - z) * h + z * c
        got = gru_cell(params, np.array([x], F32), np.array([h], F32))
        np.testing.assert_allclose(got, [expected], atol=1e-6)

    def test_state_threading_is_bitwise(self):
        rng = np.random.default_rng(9)
        params = random_gru(rng, 5, 4)
        xs = rng.normal(size=(13, 5)).astype(F32)
        full = gru_forward(params, xs)
        for j in (1, 4, 7, 12):
            first = gru_forward(params, xs[:j])
            rest = gru_forward(params, xs[j:], h0=first[-1])
            assert np.array_equal(np.concatenate([first, rest]), full)

    def test_width_mismatch_rejected(self):
        params = random_gru(np.random.default_rng(0), 4, 3)
        with pytest.raises(ShapeError):
            gru_forward(params, np.zeros((5, 6), dtype=F32))


class TestAttention:
    def test_single_timestep_passes_value_through(self):
        rng = np.random.default_rng(1)
        params = random_attention(rng, 4)
        seq = rng.normal(size=(1, 4)).astype(F32)
        out = scaled_dot_attention(params, seq)
        expected = seq @ params.wv.T + params.bv
        np.testing.assert_allclose(out, expected, atol=1e-6)

    def test_zero_query_map_averages_values(self):
        rng = np.random.default_rng(2)
        params = random_attention(rng, 3)
        params = AttentionParams(np.zeros((3, 3), F32), np.zeros(3, F32),
                                 params.wk, params.bk, params.wv, params.bv)
        seq = rng.normal(size=(6, 3)).astype(F32)
        out = scaled_dot_attention(params, seq)
        v = seq @ params.wv.T + params.bv
        np.testing.assert_allclose(out, np.tile(v.mean(axis=0), (6, 1)), atol=1e-6)

    def test_matches_loop_oracle(self):
        rng = np.random.default_rng(3)
        d, t = 2, 3
        params = random_attention(rng, d)
        seq = rng.normal(size=(t, d)).astype(F32)
        out = scaled_dot_attention(params, seq)

        q = np.zeros((t, d)); k = np.zeros((t, d)); v = np.zeros((t, d))
        for i in range(t):
            for a in range(d):
                q[i, a] = sum(params.wq[a, b] * seq[i, b] for b in range(d)) + params.bq[a]
                k[i, a] = sum(params.wk[a, b] * seq[i, b] for b in range(d)) + params.bk[a]
                v[i, a] = sum(params.wv[a, b] * seq[i, b] for b in range(d)) + params.bv[a]
        scores = np.zeros((t, t))
        for i in range(t):
            for j in range(t):
                scores[i, j] = sum(q[i, a] * k[j, a] for a in range(d)) / d
        expected = np.zeros((t, d))
        for i in range(t):
            e = np.exp(scores[i] - scores[i].max())
            w = e / e.sum()
            for a in range(d):
                expected[i, a] = sum(w[j] * v[j, a] for j in range(t))
        np.testing.assert_allclose(out, expected, atol=1e-6)

    def test_softmax_rows_sum_to_one(self):
        rng = np.random.default_rng(4)
        for _ in range(20):
            t, d = int(rng.integers(1, 9)), int(rng.integers(1, 6))
            params = random_attention(rng, d)
            seq = rng.normal(size=(t, d)).astype(F32)
            q = seq @ params.wq.T + params.bq
            k = seq @ params.wk.T + params.bk
            weights = softmax_rows(q @ k.T / F32(d))
            np.testing.assert_allclose(weights.sum(axis=1), 1.0, atol=1e-6)

    def test_sqrt_scale_flag(self):
        rng = np.random.default_rng(5)
        params = random_attention(rng, 4)
        seq = rng.normal(size=(5, 4)).astype(F32)
        by_dim = scaled_dot_attention(params, seq, scale="dim")
        by_sqrt = scaled_dot_attention(params, seq, scale="sqrt")
        assert not np.allclose(by_dim, by_sqrt)
        q = seq @ params.wq.T + params.bq
        k = seq @ params.wk.T + params.bk
        v = seq @ params.wv.T + params.bv
        np.testing.assert_allclose(by_sqrt, softmax_rows(q @ k.T / F32(2.0)) @ v, atol=1e-6)

    def test_width_mismatch_rejected(self):
        params = random_attention(np.random.default_rng(0), 4)
        with pytest.raises(ShapeError):
            scaled_dot_attention(params, np.zeros((3, 5), dtype=F32))


class TestPoolAndClassify:
    def test_opposite_rows_leave_only_bias_path(self):
        rng = np.random.default_rng(6)
        r = rng.normal(size=4).astype(F32)
        u = np.stack([r, -r])
        head = [DenseParams(rng.normal(size=(1, 4)).astype(F32),
                            np.array([0.7], F32), "sigmoid")]
        got = attention_pool_and_classify(u, head)
        np.testing.assert_allclose(got, sigmoid(np.float32(0.7)), atol=1e-6)

    def test_zero_head_gives_half(self):
        u = np.random.default_rng(7).normal(size=(5, 3)).astype(F32)
        head = [DenseParams(np.zeros((1, 3), F32), np.zeros(1, F32), "sigmoid")]
        assert attention_pool_and_classify(u, head) == 0.5

    def test_matches_explicit_oracle(self):
        rng = np.random.default_rng(8)
        u = rng.normal(size=(6, 4)).astype(F32)
        w1 = rng.normal(size=(3, 4)).astype(F32)
        b1 = rng.normal(size=3).astype(F32)
        w2 = rng.normal(size=(1, 3)).astype(F32)
        b2 = rng.normal(size=1).astype(F32)
        head = [DenseParams(w1, b1, "relu"), DenseParams(w2, b2, "sigmoid")]
        got = attention_pool_and_classify(u, head)
        pooled = u.sum(axis=0)
        hidden = np.maximum(w1 @ pooled + b1, 0)
        expected = 1 / (1 + np.exp(-(w2 @ hidden + b2)[0]))
        np.testing.assert_allclose(got, expected, atol=1e-6)

    def test_posterior_in_unit_interval(self):
        rng = np.random.default_rng(9)
        for _ in range(10):
            u = rng.normal(size=(4, 3)).astype(F32) * 10
            head = [DenseParams(rng.normal(size=(1, 3)).astype(F32),
                                rng.normal(size=1).astype(F32), "sigmoid")]
            assert 0.0 <= attention_pool_and_classify(u, head) <= 1.0


def test_kernels_are_pure_and_deterministic():
    rng = np.random.default_rng(10)
    x = rng.uniform(-0.3, 0.3, size=(6, 6, 2)).astype(F32)
    kernel = rng.uniform(-0.3, 0.3, size=(3, 3, 2, 3)).astype(F32)
    bias = rng.uniform(-0.3, 0.3, size=3).astype(F32)
    a = conv2d(x, kernel, (2, 2), bias)
    b = conv2d(x.copy(), kernel.copy(), (2, 2), bias.copy())
    assert np.array_equal(a, b)

    params = random_gru(rng, 4, 3)
    xs = rng.normal(size=(9, 4)).astype(F32)
    assert np.array_equal(gru_forward(params, xs), gru_forward(params, xs))

    att = random_attention(rng, 3)
    seq = rng.normal(size=(5, 3)).astype(F32)
    assert np.array_equal(scaled_dot_attention(att, seq), scaled_dot_attention(att, seq))


def test_dense_width_check():
    params = DenseParams(np.zeros((2, 3), F32), np.zeros(2, F32))
    with pytest.raises(ShapeError):
        dense(params, np.zeros(4, dtype=F32))
