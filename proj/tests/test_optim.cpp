#include <doctest.h>

#include <cmath>

#include "gradcheck.hpp"
#include "retina/error.hpp"
#include "retina/optim.hpp"

using namespace retina;
using namespace retina::optim;

TEST_CASE("quadratic loss values and symmetry") {
    CHECK(quadratic_loss(1.0, 1.0) == 0.0);
    CHECK(quadratic_loss(0.7, 1.0) == doctest::Approx(0.045).epsilon(1e-12));

    Rng rng(3);
    for (int i = 0; i < 20; ++i) {
        const double a = rng.uniform(-5.0, 5.0);
        const double b = rng.uniform(-5.0, 5.0);
        CHECK(quadratic_loss(a, b) == quadratic_loss(b, a));
        CHECK(quadratic_loss(a, b) >= 0.0);
    }
}

TEST_CASE("quadratic loss derivative is exactly linear") {
    Rng rng(5);
    for (int i = 0; i < 20; ++i) {
        const double y = rng.uniform(-2.0, 2.0);
        const double t = rng.uniform(-2.0, 2.0);
        const double h = 1e-5;
        const double numeric = (quadratic_loss(y + h, t) - quadratic_loss(y - h, t)) / (2 * h);
        CHECK(std::fabs(numeric - (y - t)) < 1e-8);
    }
}

TEST_CASE("cross entropy on worked rows") {
    // probability 1 on the true class
    const Tensor hot = Tensor::from(Shape{1, 5}, {0.0, 0.0, 1.0, 0.0, 0.0});
    CHECK(cross_entropy(hot, {2}).value == 0.0);

    // uniform row costs ln 5
    const Tensor uniform = Tensor::full(Shape{1, 5}, 0.2);
    CHECK(cross_entropy(uniform, {0}).value == doctest::Approx(std::log(5.0)).epsilon(1e-12));

    CHECK_THROWS_AS(cross_entropy(uniform, {5}), ValueError);
    const Tensor junk = Tensor::full(Shape{1, 5}, 0.5);
    CHECK_THROWS_AS(cross_entropy(junk, {0}), UsageError);
}

TEST_CASE("cross entropy is the mean of per-sample values and stays non-negative") {
    Rng rng(7);
    for (int trial = 0; trial < 20; ++trial) {
        const Tensor probs = nn::softmax(Tensor::random_uniform(Shape{4, 5}, -3.0, 3.0, rng));
        std::vector<std::size_t> labels(4);
        for (auto& l : labels) l = rng.uniform_below(5);
        const LossValue loss = cross_entropy(probs, labels);
        CHECK(loss.value >= 0.0);
        double mean = 0.0;
        for (double v : loss.per_sample) {
            CHECK(v >= 0.0);
            mean += v;
        }
        CHECK(loss.value == doctest::Approx(mean / 4.0).epsilon(1e-12));
    }
}

TEST_CASE("softmax plus cross entropy gradient matches finite differences") {
    Rng rng(9);
    gradcheck::Report report;
    for (int trial = 0; trial < 10; ++trial) {
        Tensor scores = Tensor::random_uniform(Shape{3, 5}, -2.0, 2.0, rng);
        std::vector<std::size_t> labels(3);
        for (auto& l : labels) l = rng.uniform_below(5);

        const Tensor grad = cross_entropy_score_grad(nn::softmax(scores), labels);
        const auto loss = [&]() { return cross_entropy(nn::softmax(scores), labels).value; };
        gradcheck::check_tensor(report, scores, grad, loss);
    }
    CHECK(report.ok());
    MESSAGE("softmax+ce max rel err: ", report.max_rel_err);
}

TEST_CASE("sgd_step applies the update rule exactly") {
    // w = 0.5, alpha = 0.1, grad = 2.0 -> 0.3
    Tensor w = Tensor::from(Shape{1}, {0.5});
    Tensor g = Tensor::from(Shape{1}, {2.0});
    sgd_step(SGDConfig{0.1}, {&w}, {&g});
    const double expected = 0.5 - 0.1 * 2.0;
    CHECK(w[0] == expected);
    CHECK(g[0] == 0.0);  // gradients cleared

    // zero gradient leaves parameters untouched
    Rng rng(11);
    Tensor p = Tensor::random_uniform(Shape{3, 3}, -1.0, 1.0, rng);
    const Tensor before = p;
    Tensor zg = Tensor::zeros(Shape{3, 3});
    sgd_step(SGDConfig{0.25}, {&p}, {&zg});
    CHECK(p.values() == before.values());

    Tensor bad = Tensor::zeros(Shape{2});
    CHECK_THROWS_AS(sgd_step(SGDConfig{0.1}, {&p}, {&bad}), ShapeError);
}

TEST_CASE("sgd_step is bit-exact against the written-out rule") {
    Rng rng(13);
    Tensor p = Tensor::random_uniform(Shape{4, 4}, -1.0, 1.0, rng);
    Tensor g = Tensor::random_uniform(Shape{4, 4}, -1.0, 1.0, rng);
    const Tensor p0 = p;
    const Tensor g0 = g;
    const double alpha = 0.0137;
    sgd_step(SGDConfig{alpha}, {&p}, {&g});
    for (std::size_t i = 0; i < p.size(); ++i) {
        const double step = alpha * g0[i];
        CHECK(p[i] == p0[i] - step);
    }
}

TEST_CASE("two half-steps with a held gradient equal one full step") {
    Rng rng(15);
    const Tensor p0 = Tensor::random_uniform(Shape{5}, -1.0, 1.0, rng);
    const Tensor g0 = Tensor::random_uniform(Shape{5}, -1.0, 1.0, rng);
    const double alpha = 0.02;

    Tensor full = p0;
    Tensor fg = g0;
    sgd_step(SGDConfig{alpha}, {&full}, {&fg});

    Tensor halves = p0;
    for (int k = 0; k < 2; ++k) {
        Tensor hg = g0;
        sgd_step(SGDConfig{alpha / 2}, {&halves}, {&hg});
    }
    for (std::size_t i = 0; i < p0.size(); ++i)
        CHECK(halves[i] == doctest::Approx(full[i]).epsilon(1e-12));
}

namespace {

nn::NetworkSpec tiny_dense_net(std::size_t features, std::size_t classes) {
    nn::NetworkSpec spec;
    spec.class_count = classes;
    spec.input_channels = features;
    spec.input_height = 1;
    spec.input_width = 1;
    spec.layers = {nn::DenseSpec{features, classes}, nn::SoftmaxSpec{}};
    return spec;
}

}  // namespace

TEST_CASE("repeated train_step drives the loss down on a fixed batch") {
    Rng init(17);
    nn::Network net(tiny_dense_net(6, 5), init);

    Rng data_rng(19);
    const Tensor batch = Tensor::random_uniform(Shape{8, 6}, -1.0, 1.0, data_rng);
    std::vector<std::size_t> labels(8);
    for (auto& l : labels) l = data_rng.uniform_below(5);

    Rng step_rng(21);
    double prev = 1e300;
    int violations = 0;
    double first = 0.0, last = 0.0;
    for (int step = 0; step < 50; ++step) {
        const StepResult r = train_step(net, batch, labels, SGDConfig{0.01}, step_rng);
        if (step == 0) first = r.loss.value;
        if (r.loss.value > prev) ++violations;
        prev = r.loss.value;
        last = r.loss.value;
    }
    CHECK(violations <= 5);
    CHECK(last < first);
}

TEST_CASE("a zero learning rate changes nothing") {
    Rng init(23);
    nn::Network net(tiny_dense_net(4, 5), init);
    const std::vector<Tensor> before = net.parameter_snapshot();

    Rng data_rng(25);
    const Tensor batch = Tensor::random_uniform(Shape{4, 4}, -1.0, 1.0, data_rng);
    const std::vector<std::size_t> labels = {0, 1, 2, 3};

    Rng step_rng(27);
    const StepResult first = train_step(net, batch, labels, SGDConfig{0.0}, step_rng);
    const StepResult second = train_step(net, batch, labels, SGDConfig{0.0}, step_rng);
    CHECK(first.loss.value == second.loss.value);

    const std::vector<Tensor> after = net.parameter_snapshot();
    for (std::size_t i = 0; i < before.size(); ++i)
        CHECK(before[i].values() == after[i].values());
}

TEST_CASE("a linearly separable toy reaches full batch accuracy") {
    // two classes split by the sign of the first feature
    Rng init(29);
    nn::NetworkSpec spec = tiny_dense_net(2, 2);
    nn::Network net(spec, init);

    Rng data_rng(31);
    const std::size_t n = 16;
    Tensor batch = Tensor::zeros(Shape{n, 2});
    std::vector<std::size_t> labels(n);
    for (std::size_t i = 0; i < n; ++i) {
        const double sign = i % 2 == 0 ? 1.0 : -1.0;
        batch.at(i, 0) = sign * data_rng.uniform(0.5, 1.5);
        batch.at(i, 1) = data_rng.uniform(-1.0, 1.0);
        labels[i] = sign > 0 ? 1 : 0;
    }

    Rng step_rng(33);
    double accuracy = 0.0;
    for (int step = 0; step < 200 && accuracy < 1.0; ++step)
        accuracy = train_step(net, batch, labels, SGDConfig{0.5}, step_rng).accuracy;
    CHECK(accuracy == 1.0);
}
