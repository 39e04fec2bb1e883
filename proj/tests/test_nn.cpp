#include <doctest.h>

#include <cmath>

#include "gradcheck.hpp"
#include "oracles.hpp"
#include "retina/error.hpp"
#include "retina/nn.hpp"

using namespace retina;
using namespace retina::nn;

namespace {

LayerState conv_state(const ConvSpec&, const Tensor& weights, const Tensor& bias) {
    LayerState st;
    st.params = {weights, bias};
    st.grads = {Tensor::zeros(weights.shape()), Tensor::zeros(bias.shape())};
    return st;
}

LayerState dense_state(const DenseSpec&, const Tensor& weights, const Tensor& bias) {
    LayerState st;
    st.params = {weights, bias};
    st.grads = {Tensor::zeros(weights.shape()), Tensor::zeros(bias.shape())};
    return st;
}

}  // namespace

TEST_CASE("conv 1x1 identity kernel passes the plane through") {
    const ConvSpec spec{1, 1, 1, 1, 1, 1, 0};
    LayerState st = conv_state(spec, Tensor::from(Shape{1, 1, 1, 1}, {1.0}),
                               Tensor::zeros(Shape{1}));
    Rng rng(3);
    const Tensor in = Tensor::random_uniform(Shape{2, 1, 4, 4}, -1.0, 1.0, rng);
    const Tensor out = conv_forward(spec, st, in);
    CHECK(out.values() == in.values());
}

TEST_CASE("conv of ones: 3x3 input, 2x2 kernel, stride 1, no padding") {
    const ConvSpec spec{1, 1, 2, 2, 1, 1, 0};
    LayerState st = conv_state(spec, Tensor::full(Shape{1, 1, 2, 2}, 1.0),
                               Tensor::zeros(Shape{1}));
    const Tensor in = Tensor::full(Shape{1, 1, 3, 3}, 1.0);
    const Tensor out = conv_forward(spec, st, in);
    CHECK(out.shape() == Shape{1, 1, 2, 2});
    for (std::size_t i = 0; i < out.size(); ++i) CHECK(out[i] == 4.0);
}

TEST_CASE("conv on zero input broadcasts the bias") {
    const ConvSpec spec{2, 3, 3, 3, 1, 1, 1};
    Rng rng(8);
    LayerState st =
        conv_state(spec, Tensor::random_uniform(Shape{3, 2, 3, 3}, -1.0, 1.0, rng),
                   Tensor::from(Shape{3}, {0.5, -1.5, 2.0}));
    const Tensor out = conv_forward(spec, st, Tensor::zeros(Shape{1, 2, 5, 5}));
    for (std::size_t f = 0; f < 3; ++f)
        for (std::size_t y = 0; y < 5; ++y)
            for (std::size_t x = 0; x < 5; ++x)
                CHECK(out.at(0, f, y, x) == st.params[1][f]);
}

TEST_CASE("conv rejects mismatched channels and missing cache") {
    const ConvSpec spec{3, 4, 3, 3, 1, 1, 1};
    Rng rng(4);
    LayerState st =
        conv_state(spec, Tensor::random_uniform(Shape{4, 3, 3, 3}, -1.0, 1.0, rng),
                   Tensor::zeros(Shape{4}));
    CHECK_THROWS_AS(conv_forward(spec, st, Tensor::zeros(Shape{1, 2, 8, 8})), ShapeError);
    CHECK_THROWS_AS(conv_backward(spec, st, Tensor::zeros(Shape{1, 4, 8, 8})), UsageError);
}

TEST_CASE("conv matches the naive quadruple-loop evaluation") {
    Rng rng(11);
    for (int trial = 0; trial < 12; ++trial) {
        ConvSpec spec;
        spec.in_channels = 1 + rng.uniform_below(3);
        spec.out_channels = 1 + rng.uniform_below(3);
        spec.kernel_h = 1 + rng.uniform_below(3);
        spec.kernel_w = 1 + rng.uniform_below(3);
        spec.stride_h = 1 + rng.uniform_below(2);
        spec.stride_w = 1 + rng.uniform_below(2);
        spec.padding = rng.uniform_below(2);
        const std::size_t h = spec.kernel_h + rng.uniform_below(6);
        const std::size_t w = spec.kernel_w + rng.uniform_below(6);
        const std::size_t batch = 1 + rng.uniform_below(2);

        const Tensor weights = Tensor::random_uniform(
            Shape{spec.out_channels, spec.in_channels, spec.kernel_h, spec.kernel_w}, -1.0,
            1.0, rng);
        const Tensor bias =
            Tensor::random_uniform(Shape{spec.out_channels}, -1.0, 1.0, rng);
        const Tensor in = Tensor::random_uniform(Shape{batch, spec.in_channels, h, w},
                                                 -1.0, 1.0, rng);

        LayerState st = conv_state(spec, weights, bias);
        const Tensor fast = conv_forward(spec, st, in, Mode::infer);
        const Tensor naive = oracle::conv_naive(spec, in, weights, bias);
        REQUIRE(fast.shape() == naive.shape());
        for (std::size_t i = 0; i < fast.size(); ++i)
            CHECK(std::fabs(fast[i] - naive[i]) < 1e-12);
    }
}

TEST_CASE("conv gradients match finite differences") {
    Rng rng(21);
    gradcheck::Report wreport, breport, xreport;
    for (int trial = 0; trial < 10; ++trial) {
        const ConvSpec spec{2, 2, 3, 3, 1, 1, 1};
        Tensor weights = Tensor::random_uniform(Shape{2, 2, 3, 3}, -1.0, 1.0, rng);
        Tensor bias = Tensor::random_uniform(Shape{2}, -1.0, 1.0, rng);
        Tensor in = Tensor::random_uniform(Shape{1, 2, 5, 5}, -1.0, 1.0, rng);
        LayerState st = conv_state(spec, weights, bias);
        const Tensor probe_shape = conv_forward(spec, st, in, Mode::infer);
        const Tensor projection =
            Tensor::random_uniform(probe_shape.shape(), -1.0, 1.0, rng);

        const auto loss = [&]() {
            LayerState tmp = conv_state(spec, weights, bias);
            return gradcheck::dot(conv_forward(spec, tmp, in, Mode::infer), projection);
        };

        LayerState st2 = conv_state(spec, weights, bias);
        conv_forward(spec, st2, in, Mode::train);
        const Tensor dx = conv_backward(spec, st2, projection);

        gradcheck::check_tensor(wreport, weights, st2.grads[0], loss);
        gradcheck::check_tensor(breport, bias, st2.grads[1], loss);
        gradcheck::check_tensor(xreport, in, dx, loss);
    }
    CHECK(wreport.ok());
    CHECK(breport.ok());
    CHECK(xreport.ok());
    MESSAGE("conv max rel err: w=", wreport.max_rel_err, " b=", breport.max_rel_err,
            " x=", xreport.max_rel_err);
}

TEST_CASE("conv backward zero upstream and identity kernel") {
    const ConvSpec id{1, 1, 1, 1, 1, 1, 0};
    LayerState st = conv_state(id, Tensor::from(Shape{1, 1, 1, 1}, {1.0}),
                               Tensor::zeros(Shape{1}));
    Rng rng(31);
    const Tensor in = Tensor::random_uniform(Shape{1, 1, 3, 3}, -1.0, 1.0, rng);
    conv_forward(id, st, in, Mode::train);
    const Tensor up = Tensor::random_uniform(Shape{1, 1, 3, 3}, -1.0, 1.0, rng);
    const Tensor dx = conv_backward(id, st, up);
    CHECK(dx.values() == up.values());

    // gradients accumulate until an update clears them, so reset first
    for (Tensor& g : st.grads) g = Tensor::zeros(g.shape());
    conv_forward(id, st, in, Mode::train);
    const Tensor zero_dx = conv_backward(id, st, Tensor::zeros(Shape{1, 1, 3, 3}));
    for (std::size_t i = 0; i < zero_dx.size(); ++i) CHECK(zero_dx[i] == 0.0);
    for (const Tensor& g : st.grads)
        for (std::size_t i = 0; i < g.size(); ++i) CHECK(g[i] == 0.0);
}

TEST_CASE("relu clamps negatives and masks the backward pass") {
    const Tensor in = Tensor::from(Shape{3}, {-1.0, 0.0, 2.0});
    const Tensor out = relu(in);
    CHECK(out[0] == 0.0);
    CHECK(out[1] == 0.0);
    CHECK(out[2] == 2.0);

    Rng rng(6);
    Tensor pos = Tensor::random_uniform(Shape{4, 4}, 0.1, 2.0, rng);
    CHECK(relu(pos).values() == pos.values());

    const Tensor grad =
        relu_backward(Tensor::from(Shape{2}, {-1.0, 2.0}), Tensor::from(Shape{2}, {5.0, 5.0}));
    CHECK(grad[0] == 0.0);
    CHECK(grad[1] == 5.0);
}

TEST_CASE("max and average pooling on the worked 4x4 example") {
    const Tensor in = Tensor::from(Shape{1, 1, 4, 4}, {1, 2, 3, 4, 5, 6, 7, 8, 9, 10, 11, 12,
                                                       13, 14, 15, 16});
    PoolSpec spec{2, 2, 2, 2, PoolMode::max};
    const auto [mx, mc] = pool_forward(spec, in);
    CHECK(mx.values() == std::vector<double>{6, 8, 14, 16});

    spec.mode = PoolMode::average;
    const auto [avg, ac] = pool_forward(spec, in);
    CHECK(avg.values() == std::vector<double>{3.5, 5.5, 11.5, 13.5});
}

TEST_CASE("pooling of a constant plane is constant; oversized windows throw") {
    const Tensor in = Tensor::full(Shape{1, 2, 5, 5}, 0.7);
    for (PoolMode mode : {PoolMode::max, PoolMode::average}) {
        const PoolSpec spec{2, 2, 2, 2, mode};
        const auto [out, cache] = pool_forward(spec, in);
        CHECK(out.shape() == Shape{1, 2, 2, 2});  // overhang dropped
        for (std::size_t i = 0; i < out.size(); ++i) CHECK(out[i] == 0.7);
    }
    CHECK_THROWS_AS(pool_forward(PoolSpec{6, 6, 1, 1, PoolMode::max}, in), ShapeError);
}

TEST_CASE("pooling matches the naive window scan on random instances") {
    Rng rng(14);
    for (int trial = 0; trial < 100; ++trial) {
        PoolSpec spec;
        spec.f_x = 1 + rng.uniform_below(3);
        spec.f_y = 1 + rng.uniform_below(3);
        spec.s_x = 1 + rng.uniform_below(3);
        spec.s_y = 1 + rng.uniform_below(3);
        spec.mode = rng.next_double() < 0.5 ? PoolMode::max : PoolMode::average;
        const std::size_t h = spec.f_y + rng.uniform_below(8);
        const std::size_t w = spec.f_x + rng.uniform_below(8);
        const Tensor in = Tensor::random_uniform(Shape{1, 2, h, w}, -1.0, 1.0, rng);
        const auto [fast, cache] = pool_forward(spec, in);
        CHECK(fast.values() == oracle::pool_naive(spec, in).values());
    }
}

TEST_CASE("max pool backward routes to the argmax, first in scan order on ties") {
    // strictly increasing plane: the argmax is the bottom-right window cell
    const Tensor in = Tensor::from(Shape{1, 1, 4, 4}, {1, 2, 3, 4, 5, 6, 7, 8, 9, 10, 11, 12,
                                                       13, 14, 15, 16});
    const PoolSpec spec{2, 2, 2, 2, PoolMode::max};
    const auto [out, cache] = pool_forward(spec, in);
    const Tensor up = Tensor::from(Shape{1, 1, 2, 2}, {1, 2, 3, 4});
    const Tensor dx = pool_backward(spec, cache, up);
    CHECK(dx.values() == std::vector<double>{0, 0, 0, 0, 0, 1, 0, 2, 0, 0, 0, 0, 0, 3, 0, 4});

    // all-equal window: the first cell in row-major scan order wins
    const Tensor flat = Tensor::full(Shape{1, 1, 2, 2}, 1.0);
    const auto [fout, fcache] = pool_forward(spec, flat);
    const Tensor fdx = pool_backward(spec, fcache, Tensor::full(Shape{1, 1, 1, 1}, 1.0));
    CHECK(fdx.values() == std::vector<double>{1, 0, 0, 0});
}

TEST_CASE("average pool backward spreads the window share") {
    const PoolSpec spec{2, 2, 2, 2, PoolMode::average};
    const auto [out, cache] = pool_forward(spec, Tensor::zeros(Shape{1, 1, 2, 2}));
    const Tensor dx = pool_backward(spec, cache, Tensor::full(Shape{1, 1, 1, 1}, 1.0));
    for (std::size_t i = 0; i < dx.size(); ++i) CHECK(dx[i] == 0.25);

    CHECK_THROWS_AS(pool_backward(spec, cache, Tensor::zeros(Shape{1, 1, 3, 3})), UsageError);
}

TEST_CASE("pooling gradients match finite differences") {
    Rng rng(41);
    gradcheck::Report report;
    for (int trial = 0; trial < 10; ++trial) {
        PoolSpec spec;
        spec.f_x = 1 + rng.uniform_below(2);
        spec.f_y = 1 + rng.uniform_below(2);
        spec.s_x = spec.f_x;
        spec.s_y = spec.f_y;
        spec.mode = trial % 2 == 0 ? PoolMode::max : PoolMode::average;
        Tensor in = gradcheck::distinct_values(Shape{1, 2, 4, 4}, rng);
        const auto [out, cache] = pool_forward(spec, in);
        const Tensor projection = Tensor::random_uniform(out.shape(), -1.0, 1.0, rng);
        const Tensor dx = pool_backward(spec, cache, projection);
        const auto loss = [&]() {
            return gradcheck::dot(pool_forward(spec, in).first, projection);
        };
        gradcheck::check_tensor(report, in, dx, loss);
    }
    CHECK(report.ok());
    MESSAGE("pool max rel err: ", report.max_rel_err);
}

TEST_CASE("dense layer forward examples") {
    // identity weights, zero bias
    const DenseSpec id{2, 2};
    LayerState st = dense_state(id, Tensor::from(Shape{2, 2}, {1, 0, 0, 1}),
                                Tensor::zeros(Shape{2}));
    const Tensor in = Tensor::from(Shape{1, 2}, {3.0, -4.0});
    CHECK(dense_forward(id, st, in).values() == in.values());

    // W = [[1],[1]], b = [0.5], input [2,3] -> 5.5
    const DenseSpec spec{2, 1};
    LayerState st2 = dense_state(spec, Tensor::from(Shape{2, 1}, {1.0, 1.0}),
                                 Tensor::from(Shape{1}, {0.5}));
    const Tensor out = dense_forward(spec, st2, Tensor::from(Shape{1, 2}, {2.0, 3.0}));
    CHECK(out[0] == 5.5);

    // zero input broadcasts the bias
    const Tensor zout = dense_forward(spec, st2, Tensor::zeros(Shape{3, 2}));
    for (std::size_t i = 0; i < zout.size(); ++i) CHECK(zout[i] == 0.5);

    CHECK_THROWS_AS(dense_forward(spec, st2, Tensor::zeros(Shape{1, 3})), ShapeError);
}

TEST_CASE("dense gradients match finite differences; batch grads add up") {
    Rng rng(51);
    gradcheck::Report wreport, breport, xreport;
    for (int trial = 0; trial < 10; ++trial) {
        const DenseSpec spec{4, 3};
        Tensor weights = Tensor::random_uniform(Shape{4, 3}, -1.0, 1.0, rng);
        Tensor bias = Tensor::random_uniform(Shape{3}, -1.0, 1.0, rng);
        Tensor in = Tensor::random_uniform(Shape{2, 4}, -1.0, 1.0, rng);
        const Tensor projection = Tensor::random_uniform(Shape{2, 3}, -1.0, 1.0, rng);

        const auto loss = [&]() {
            LayerState tmp = dense_state(spec, weights, bias);
            return gradcheck::dot(dense_forward(spec, tmp, in, Mode::infer), projection);
        };

        LayerState st = dense_state(spec, weights, bias);
        dense_forward(spec, st, in, Mode::train);
        const Tensor dx = dense_backward(spec, st, projection);
        gradcheck::check_tensor(wreport, weights, st.grads[0], loss);
        gradcheck::check_tensor(breport, bias, st.grads[1], loss);
        gradcheck::check_tensor(xreport, in, dx, loss);

        // zero upstream leaves nothing behind
        dense_forward(spec, st, in, Mode::train);
        st.grads[0] = Tensor::zeros(st.grads[0].shape());
        st.grads[1] = Tensor::zeros(st.grads[1].shape());
        const Tensor zdx = dense_backward(spec, st, Tensor::zeros(Shape{2, 3}));
        for (std::size_t i = 0; i < zdx.size(); ++i) CHECK(zdx[i] == 0.0);
        for (const Tensor& g : st.grads)
            for (std::size_t i = 0; i < g.size(); ++i) CHECK(g[i] == 0.0);
    }
    CHECK(wreport.ok());
    CHECK(breport.ok());
    CHECK(xreport.ok());
}

TEST_CASE("dense batch gradient equals the sum of per-sample gradients") {
    Rng rng(61);
    const DenseSpec spec{3, 2};
    const Tensor weights = Tensor::random_uniform(Shape{3, 2}, -1.0, 1.0, rng);
    const Tensor bias = Tensor::random_uniform(Shape{2}, -1.0, 1.0, rng);
    const Tensor batch = Tensor::random_uniform(Shape{2, 3}, -1.0, 1.0, rng);
    const Tensor upstream = Tensor::random_uniform(Shape{2, 2}, -1.0, 1.0, rng);

    LayerState st = dense_state(spec, weights, bias);
    dense_forward(spec, st, batch, Mode::train);
    dense_backward(spec, st, upstream);

    Tensor dw_sum = Tensor::zeros(Shape{3, 2});
    Tensor db_sum = Tensor::zeros(Shape{2});
    for (std::size_t s = 0; s < 2; ++s) {
        LayerState single = dense_state(spec, weights, bias);
        const Tensor one_in =
            Tensor::from(Shape{1, 3}, {batch.at(s, 0), batch.at(s, 1), batch.at(s, 2)});
        const Tensor one_up = Tensor::from(Shape{1, 2}, {upstream.at(s, 0), upstream.at(s, 1)});
        dense_forward(spec, single, one_in, Mode::train);
        dense_backward(spec, single, one_up);
        dw_sum = add(dw_sum, single.grads[0]);
        db_sum = add(db_sum, single.grads[1]);
    }
    for (std::size_t i = 0; i < dw_sum.size(); ++i)
        CHECK(std::fabs(st.grads[0][i] - dw_sum[i]) < 1e-12);
    for (std::size_t i = 0; i < db_sum.size(); ++i)
        CHECK(std::fabs(st.grads[1][i] - db_sum[i]) < 1e-12);
}

TEST_CASE("dropout identity modes") {
    Rng rng(71);
    const Tensor in = Tensor::random_uniform(Shape{4, 8}, -1.0, 1.0, rng);

    const DropoutSpec zero{0.0};
    const auto [train_out, m1] = dropout_forward(zero, in, Mode::train, rng);
    CHECK(train_out.values() == in.values());

    const DropoutSpec half{0.5};
    const auto [infer_out, m2] = dropout_forward(half, in, Mode::infer, rng);
    CHECK(infer_out.values() == in.values());

    CHECK_THROWS_AS(dropout_forward(DropoutSpec{1.0}, in, Mode::train, rng), ValueError);
}

TEST_CASE("dropout zeroes the configured fraction and rescales survivors") {
    Rng rng(81);
    const Tensor in = Tensor::full(Shape{1, 1, 100, 100}, 1.0);
    const DropoutSpec spec{0.5};
    const auto [out, mask] = dropout_forward(spec, in, Mode::train, rng);
    std::size_t zeroed = 0;
    for (std::size_t i = 0; i < out.size(); ++i) {
        if (out[i] == 0.0) {
            ++zeroed;
        } else {
            CHECK(out[i] == 2.0);  // 1/(1-0.5)
        }
    }
    const double fraction = static_cast<double>(zeroed) / static_cast<double>(out.size());
    CHECK(std::fabs(fraction - 0.5) < 0.02);

    // backward masks with the same multiplier
    const Tensor up = Tensor::full(in.shape(), 1.0);
    const Tensor back = dropout_backward(mask, up);
    CHECK(back.values() == mask.values());
}

TEST_CASE("dropout train-mode expectation approaches the input") {
    Rng rng(91);
    const DropoutSpec spec{0.3};
    const Tensor in = Tensor::full(Shape{1, 64}, 1.0);
    Tensor mean = Tensor::zeros(in.shape());
    const int runs = 1000;
    for (int i = 0; i < runs; ++i) {
        const auto [out, mask] = dropout_forward(spec, in, Mode::train, rng);
        mean = add(mean, out);
    }
    mean = scale(mean, 1.0 / runs);
    double avg = 0.0;
    for (std::size_t i = 0; i < mean.size(); ++i) avg += mean[i];
    avg /= static_cast<double>(mean.size());
    CHECK(std::fabs(avg - 1.0) < 0.02);
}

TEST_CASE("softmax rows are stable probability distributions") {
    const Tensor uniform = softmax(Tensor::zeros(Shape{1, 5}));
    for (std::size_t c = 0; c < 5; ++c) CHECK(uniform[c] == doctest::Approx(0.2).epsilon(1e-12));

    // shift invariance
    Rng rng(101);
    const Tensor scores = Tensor::random_uniform(Shape{3, 5}, -2.0, 2.0, rng);
    Tensor shifted = scores;
    for (std::size_t b = 0; b < 3; ++b)
        for (std::size_t c = 0; c < 5; ++c) shifted.at(b, c) += 7.25;
    const Tensor p1 = softmax(scores);
    const Tensor p2 = softmax(shifted);
    for (std::size_t i = 0; i < p1.size(); ++i) CHECK(std::fabs(p1[i] - p2[i]) <= 1e-12);

    // extreme scores stay finite
    const Tensor hot = softmax(Tensor::from(Shape{1, 2}, {1000.0, 0.0}));
    CHECK(hot.all_finite());
    CHECK(hot[0] == doctest::Approx(1.0));
    CHECK(hot[1] == doctest::Approx(0.0));

    // rows sum to one, entries strictly inside (0,1) on bounded input
    for (std::size_t b = 0; b < 3; ++b) {
        double sum = 0.0;
        for (std::size_t c = 0; c < 5; ++c) {
            sum += p1.at(b, c);
            CHECK(p1.at(b, c) > 0.0);
            CHECK(p1.at(b, c) < 1.0);
        }
        CHECK(std::fabs(sum - 1.0) <= 1e-9);
    }
}

TEST_CASE("softmax backward matches finite differences") {
    Rng rng(111);
    gradcheck::Report report;
    for (int trial = 0; trial < 10; ++trial) {
        Tensor scores = Tensor::random_uniform(Shape{2, 4}, -1.0, 1.0, rng);
        const Tensor projection = Tensor::random_uniform(Shape{2, 4}, -1.0, 1.0, rng);
        const Tensor out = softmax(scores);
        const Tensor dx = softmax_backward(out, projection);
        const auto loss = [&]() { return gradcheck::dot(softmax(scores), projection); };
        gradcheck::check_tensor(report, scores, dx, loss);
    }
    CHECK(report.ok());
}

TEST_CASE("network_forward with a softmax-only stack is softmax") {
    NetworkSpec spec;
    spec.layers = {SoftmaxSpec{}};
    spec.class_count = 5;
    spec.input_channels = 5;  // flat score rows
    spec.input_height = 1;
    spec.input_width = 1;
    Rng rng(7);
    Network net(spec, rng);

    Rng data_rng(9);
    const Tensor scores = Tensor::random_uniform(Shape{3, 5}, -2.0, 2.0, data_rng);
    CHECK(net.forward(scores, Mode::infer).values() == softmax(scores).values());
}

TEST_CASE("network_forward equals manual layer chaining") {
    NetworkSpec spec;
    spec.class_count = 3;
    spec.input_channels = 2;
    spec.input_height = 6;
    spec.input_width = 6;
    spec.layers = {
        ConvSpec{2, 4, 3, 3, 1, 1, 1},
        ReluSpec{},
        PoolSpec{2, 2, 2, 2, PoolMode::max},
        FlattenSpec{},
        DenseSpec{4 * 3 * 3, 3},
        SoftmaxSpec{},
    };
    Rng init(5);
    Network net(spec, init);

    Rng data_rng(9);
    const Tensor in = Tensor::random_uniform(Shape{2, 2, 6, 6}, -1.0, 1.0, data_rng);
    const Tensor direct = net.forward(in, Mode::infer);

    // chain by hand through the same states
    auto& states = net.states();
    Tensor cur = conv_forward(std::get<ConvSpec>(spec.layers[0]), states[0], in, Mode::infer);
    cur = relu(cur);
    cur = pool_forward(std::get<PoolSpec>(spec.layers[2]), cur).first;
    cur = cur.reshaped(Shape{2, 36});
    cur = dense_forward(std::get<DenseSpec>(spec.layers[4]), states[4], cur, Mode::infer);
    cur = softmax(cur);

    CHECK(direct.values() == cur.values());
}

TEST_CASE("default architecture grades a zero image into a probability row") {
    Rng init(7);
    Network net(resolve_dropout(default_network_spec(), 0.1), init);
    const Tensor out = net.forward(Tensor::zeros(Shape{1, 3, 128, 128}), Mode::infer);
    CHECK(out.shape() == Shape{1, 5});
    double sum = 0.0;
    for (std::size_t c = 0; c < 5; ++c) sum += out.at(0, c);
    CHECK(std::fabs(sum - 1.0) <= 1e-9);
}

TEST_CASE("train-mode network forward is deterministic per seed") {
    NetworkSpec spec;
    spec.class_count = 2;
    spec.input_channels = 1;
    spec.input_height = 4;
    spec.input_width = 4;
    spec.layers = {FlattenSpec{}, DenseSpec{16, 8}, ReluSpec{}, DropoutSpec{0.4},
                   DenseSpec{8, 2}, SoftmaxSpec{}};

    const auto run = [&](std::uint64_t seed) {
        Rng init(seed);
        Network net(spec, init);
        Rng mode_rng(seed + 1);
        Rng data_rng(3);
        const Tensor in = Tensor::random_uniform(Shape{3, 1, 4, 4}, -1.0, 1.0, data_rng);
        return net.forward(in, Mode::train, &mode_rng).values();
    };
    CHECK(run(11) == run(11));
    CHECK(run(11) != run(12));
}

TEST_CASE("layer errors carry the layer index") {
    NetworkSpec spec;
    spec.class_count = 5;
    spec.input_channels = 3;
    spec.input_height = 8;
    spec.input_width = 8;
    spec.layers = {ConvSpec{4, 8, 3, 3, 1, 1, 1},  // wrong in_channels
                   FlattenSpec{}, DenseSpec{8 * 8 * 8, 5}, SoftmaxSpec{}};
    Rng init(3);
    try {
        Network net(spec, init);
        FAIL("expected a config error");
    } catch (const ConfigError& e) {
        CHECK(std::string(e.what()).find("layer 0") != std::string::npos);
    }
}

TEST_CASE("validate_network_spec rejects incompatible stacks") {
    NetworkSpec spec;
    spec.class_count = 5;
    spec.input_channels = 3;
    spec.input_height = 16;
    spec.input_width = 16;
    spec.layers = {FlattenSpec{}, DenseSpec{100, 5}, SoftmaxSpec{}};  // 768 != 100
    CHECK_THROWS_AS(validate_network_spec(spec), ConfigError);

    spec.layers = {FlattenSpec{}, DenseSpec{768, 4}, SoftmaxSpec{}};  // 4 != class_count
    CHECK_THROWS_AS(validate_network_spec(spec), ConfigError);

    spec.layers = {FlattenSpec{}, DenseSpec{768, 5}, SoftmaxSpec{}};
    CHECK_NOTHROW(validate_network_spec(spec));
}
