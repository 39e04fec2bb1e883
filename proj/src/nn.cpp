#include "retina/nn.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <limits>

#include "retina/error.hpp"
#include "retina/parallel.hpp"

namespace retina::nn {

namespace {

// ---------------------------------------------------------------------------
// Small dense linear algebra on row-major buffers.
// ---------------------------------------------------------------------------

// C(MxN) += A(MxK) * B(KxN), blocked so the active B panel stays in cache.
// The inner loop is an axpy over contiguous C/B rows, which vectorizes
// without any reassociation; accumulation order over k is ascending, so the
// result does not depend on block sizes.
void gemm_acc(double* c, const double* a, const double* b, std::size_t m, std::size_t k,
              std::size_t n) {
    constexpr std::size_t kb_max = 256;
    constexpr std::size_t nb_max = 128;
    for (std::size_t n0 = 0; n0 < n; n0 += nb_max) {
        const std::size_t nb = std::min(nb_max, n - n0);
        for (std::size_t k0 = 0; k0 < k; k0 += kb_max) {
            const std::size_t kb = std::min(kb_max, k - k0);
            for (std::size_t i = 0; i < m; ++i) {
                double* crow = c + i * n + n0;
                const double* arow = a + i * k + k0;
                for (std::size_t p = 0; p < kb; ++p) {
                    const double av = arow[p];
                    if (av == 0.0) continue;
                    const double* brow = b + (k0 + p) * n + n0;
                    for (std::size_t j = 0; j < nb; ++j) crow[j] += av * brow[j];
                }
            }
        }
    }
}

void transpose(double* dst, const double* src, std::size_t rows, std::size_t cols) {
    for (std::size_t i = 0; i < rows; ++i)
        for (std::size_t j = 0; j < cols; ++j) dst[j * rows + i] = src[i * cols + j];
}

// ---------------------------------------------------------------------------
// im2col / col2im for one sample.
// ---------------------------------------------------------------------------

struct ConvDims {
    std::size_t in_c, in_h, in_w;
    std::size_t out_h, out_w;
    std::size_t k;  // in_c * kernel_h * kernel_w
    std::size_t n;  // out_h * out_w
};

ConvDims conv_dims(const ConvSpec& s, const Shape& input) {
    ConvDims d{};
    d.in_c = input[1];
    d.in_h = input[2];
    d.in_w = input[3];
    const std::size_t padded_h = d.in_h + 2 * s.padding;
    const std::size_t padded_w = d.in_w + 2 * s.padding;
    if (padded_h < s.kernel_h || padded_w < s.kernel_w)
        throw ShapeError("conv: kernel " + std::to_string(s.kernel_h) + "x" +
                         std::to_string(s.kernel_w) + " larger than padded input " +
                         std::to_string(padded_h) + "x" + std::to_string(padded_w));
    d.out_h = (padded_h - s.kernel_h) / s.stride_h + 1;
    d.out_w = (padded_w - s.kernel_w) / s.stride_w + 1;
    d.k = d.in_c * s.kernel_h * s.kernel_w;
    d.n = d.out_h * d.out_w;
    return d;
}

// Col is k x n: row (c,u,v), column (oh,ow) holds input[c][oh*sh+u-p][ow*sw+v-p].
void im2col(const ConvSpec& s, const ConvDims& d, const double* input, double* col) {
    const long pad = static_cast<long>(s.padding);
    for (std::size_t c = 0; c < d.in_c; ++c) {
        const double* plane = input + c * d.in_h * d.in_w;
        for (std::size_t u = 0; u < s.kernel_h; ++u) {
            for (std::size_t v = 0; v < s.kernel_w; ++v) {
                double* row = col + ((c * s.kernel_h + u) * s.kernel_w + v) * d.n;
                for (std::size_t oh = 0; oh < d.out_h; ++oh) {
                    const long ih = static_cast<long>(oh * s.stride_h + u) - pad;
                    double* dst = row + oh * d.out_w;
                    if (ih < 0 || ih >= static_cast<long>(d.in_h)) {
                        std::fill(dst, dst + d.out_w, 0.0);
                        continue;
                    }
                    const double* src = plane + static_cast<std::size_t>(ih) * d.in_w;
                    if (s.stride_w == 1) {
                        // contiguous run with zero fringes
                        const long iw0 = static_cast<long>(v) - pad;
                        long lead = iw0 < 0 ? -iw0 : 0;
                        long tail_start = static_cast<long>(d.in_w) - iw0;
                        if (tail_start < 0) tail_start = 0;
                        if (tail_start > static_cast<long>(d.out_w))
                            tail_start = static_cast<long>(d.out_w);
                        if (lead > tail_start) lead = tail_start;
                        std::fill(dst, dst + lead, 0.0);
                        if (tail_start > lead)
                            std::memcpy(dst + lead, src + iw0 + lead,
                                        static_cast<std::size_t>(tail_start - lead) *
                                            sizeof(double));
                        std::fill(dst + tail_start, dst + d.out_w, 0.0);
                    } else {
                        for (std::size_t ow = 0; ow < d.out_w; ++ow) {
                            const long iw = static_cast<long>(ow * s.stride_w + v) - pad;
                            dst[ow] = (iw < 0 || iw >= static_cast<long>(d.in_w))
                                          ? 0.0
                                          : src[static_cast<std::size_t>(iw)];
                        }
                    }
                }
            }
        }
    }
}

// Scatter-add of a k x n column matrix back onto the input plane.
void col2im(const ConvSpec& s, const ConvDims& d, const double* col, double* input) {
    const long pad = static_cast<long>(s.padding);
    for (std::size_t c = 0; c < d.in_c; ++c) {
        double* plane = input + c * d.in_h * d.in_w;
        for (std::size_t u = 0; u < s.kernel_h; ++u) {
            for (std::size_t v = 0; v < s.kernel_w; ++v) {
                const double* row = col + ((c * s.kernel_h + u) * s.kernel_w + v) * d.n;
                for (std::size_t oh = 0; oh < d.out_h; ++oh) {
                    const long ih = static_cast<long>(oh * s.stride_h + u) - pad;
                    if (ih < 0 || ih >= static_cast<long>(d.in_h)) continue;
                    double* dst = plane + static_cast<std::size_t>(ih) * d.in_w;
                    const double* src = row + oh * d.out_w;
                    for (std::size_t ow = 0; ow < d.out_w; ++ow) {
                        const long iw = static_cast<long>(ow * s.stride_w + v) - pad;
                        if (iw < 0 || iw >= static_cast<long>(d.in_w)) continue;
                        dst[static_cast<std::size_t>(iw)] += src[ow];
                    }
                }
            }
        }
    }
}

void require_rank(const Tensor& t, std::size_t rank, const char* who) {
    if (t.shape().rank() != rank)
        throw ShapeError(std::string(who) + ": expected rank " + std::to_string(rank) +
                         " input, got " + t.shape().str());
}

}  // namespace

std::string layer_name(const LayerSpec& spec) {
    struct Visitor {
        std::string operator()(const ConvSpec&) const { return "conv"; }
        std::string operator()(const ReluSpec&) const { return "relu"; }
        std::string operator()(const PoolSpec& p) const {
            return p.mode == PoolMode::max ? "maxpool" : "avgpool";
        }
        std::string operator()(const DenseSpec&) const { return "dense"; }
        std::string operator()(const DropoutSpec&) const { return "dropout"; }
        std::string operator()(const FlattenSpec&) const { return "flatten"; }
        std::string operator()(const SoftmaxSpec&) const { return "softmax"; }
    };
    return std::visit(Visitor{}, spec);
}

// ---------------------------------------------------------------------------
// Convolution
// ---------------------------------------------------------------------------

Tensor conv_forward(const ConvSpec& spec, LayerState& state, const Tensor& input, Mode mode) {
    require_rank(input, 4, "conv_forward");
    if (input.shape()[1] != spec.in_channels)
        throw ShapeError("conv_forward: input has " + std::to_string(input.shape()[1]) +
                         " channels, spec expects " + std::to_string(spec.in_channels));
    if (state.params.size() != 2)
        throw UsageError("conv_forward: layer state holds no weight/bias tensors");

    const ConvDims d = conv_dims(spec, input.shape());
    const std::size_t batch = input.shape()[0];
    const std::size_t m = spec.out_channels;
    Tensor out = Tensor::zeros(Shape{batch, m, d.out_h, d.out_w});

    const double* w = state.params[0].data();
    const double* bias = state.params[1].data();
    const double* in = input.data();
    double* y = out.data();
    const std::size_t in_stride = d.in_c * d.in_h * d.in_w;
    const std::size_t out_stride = m * d.n;

    parallel_for(batch, [&](std::size_t b0, std::size_t b1) {
        std::vector<double> col(d.k * d.n);
        for (std::size_t b = b0; b < b1; ++b) {
            im2col(spec, d, in + b * in_stride, col.data());
            double* yb = y + b * out_stride;
            for (std::size_t f = 0; f < m; ++f)
                std::fill(yb + f * d.n, yb + (f + 1) * d.n, bias[f]);
            gemm_acc(yb, w, col.data(), m, d.k, d.n);
        }
    });

    if (mode == Mode::train) state.cached_input = input;
    return out;
}

Tensor conv_backward(const ConvSpec& spec, LayerState& state, const Tensor& upstream) {
    if (!state.cached_input)
        throw UsageError("conv_backward: no cached forward input (run forward in train mode)");
    const Tensor& input = *state.cached_input;
    const ConvDims d = conv_dims(spec, input.shape());
    const std::size_t batch = input.shape()[0];
    const std::size_t m = spec.out_channels;
    const Shape expect{batch, m, d.out_h, d.out_w};
    if (!(upstream.shape() == expect))
        throw ShapeError("conv_backward: upstream shape " + upstream.shape().str() +
                         " does not match forward output " + expect.str());

    Tensor dx = Tensor::zeros(input.shape());
    const std::size_t wsize = m * d.k;

    // Per-sample partial weight/bias gradients, reduced in sample order so
    // the result is independent of the worker count.
    std::vector<double> dw_part(batch * wsize, 0.0);
    std::vector<double> db_part(batch * m, 0.0);

    // W transposed once: k x m.
    std::vector<double> wt(d.k * m);
    transpose(wt.data(), state.params[0].data(), m, d.k);

    const double* in = input.data();
    const double* up = upstream.data();
    double* dxp = dx.data();
    const std::size_t in_stride = d.in_c * d.in_h * d.in_w;
    const std::size_t out_stride = m * d.n;

    parallel_for(batch, [&](std::size_t b0, std::size_t b1) {
        std::vector<double> col(d.k * d.n);
        std::vector<double> colt(d.n * d.k);
        std::vector<double> dcol(d.k * d.n);
        for (std::size_t b = b0; b < b1; ++b) {
            const double* dyb = up + b * out_stride;
            im2col(spec, d, in + b * in_stride, col.data());
            transpose(colt.data(), col.data(), d.k, d.n);
            // dW_b = dY_b (m x n) * Col_b^T (n x k)
            gemm_acc(dw_part.data() + b * wsize, dyb, colt.data(), m, d.n, d.k);
            // db_b = row sums of dY_b
            double* dbb = db_part.data() + b * m;
            for (std::size_t f = 0; f < m; ++f) {
                double sum = 0.0;
                const double* row = dyb + f * d.n;
                for (std::size_t j = 0; j < d.n; ++j) sum += row[j];
                dbb[f] = sum;
            }
            // dCol = W^T (k x m) * dY_b (m x n), scattered back to dX.
            std::fill(dcol.begin(), dcol.end(), 0.0);
            gemm_acc(dcol.data(), wt.data(), dyb, d.k, m, d.n);
            col2im(spec, d, dcol.data(), dxp + b * in_stride);
        }
    });

    double* dw = state.grads[0].data();
    double* db = state.grads[1].data();
    for (std::size_t b = 0; b < batch; ++b) {
        const double* p = dw_part.data() + b * wsize;
        for (std::size_t i = 0; i < wsize; ++i) dw[i] += p[i];
        const double* q = db_part.data() + b * m;
        for (std::size_t f = 0; f < m; ++f) db[f] += q[f];
    }

    state.cached_input.reset();
    return dx;
}

// ---------------------------------------------------------------------------
// ReLU
// ---------------------------------------------------------------------------

Tensor relu(const Tensor& input) {
    std::vector<double> out(input.size());
    const double* p = input.data();
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = p[i] > 0.0 ? p[i] : 0.0;
    return Tensor::from(input.shape(), std::move(out));
}

Tensor relu_backward(const Tensor& cached_input, const Tensor& upstream) {
    if (!(cached_input.shape() == upstream.shape()))
        throw ShapeError("relu_backward: shape mismatch " + cached_input.shape().str() +
                         " vs " + upstream.shape().str());
    std::vector<double> out(upstream.size());
    const double* x = cached_input.data();
    const double* u = upstream.data();
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = x[i] > 0.0 ? u[i] : 0.0;
    return Tensor::from(upstream.shape(), std::move(out));
}

// ---------------------------------------------------------------------------
// Pooling
// ---------------------------------------------------------------------------

std::pair<Tensor, PoolCache> pool_forward(const PoolSpec& spec, const Tensor& input) {
    require_rank(input, 4, "pool_forward");
    const std::size_t batch = input.shape()[0], ch = input.shape()[1];
    const std::size_t h = input.shape()[2], w = input.shape()[3];
    if (h < spec.f_y || w < spec.f_x)
        throw ShapeError("pool_forward: window " + std::to_string(spec.f_x) + "x" +
                         std::to_string(spec.f_y) + " larger than input plane " +
                         std::to_string(w) + "x" + std::to_string(h));
    const std::size_t out_h = (h - spec.f_y) / spec.s_y + 1;
    const std::size_t out_w = (w - spec.f_x) / spec.s_x + 1;

    Tensor out = Tensor::zeros(Shape{batch, ch, out_h, out_w});
    PoolCache cache;
    cache.in_shape = input.shape();
    cache.out_shape = out.shape();
    if (spec.mode == PoolMode::max) cache.argmax.assign(out.size(), 0);

    const double* in = input.data();
    double* y = out.data();
    std::size_t* am = cache.argmax.data();
    const double inv_area = 1.0 / (static_cast<double>(spec.f_x) * static_cast<double>(spec.f_y));
    const std::size_t planes = batch * ch;

    parallel_for(planes, [&](std::size_t p0, std::size_t p1) {
        for (std::size_t p = p0; p < p1; ++p) {
            const double* plane = in + p * h * w;
            double* yp = y + p * out_h * out_w;
            for (std::size_t oy = 0; oy < out_h; ++oy) {
                for (std::size_t ox = 0; ox < out_w; ++ox) {
                    const std::size_t y0 = oy * spec.s_y;
                    const std::size_t x0 = ox * spec.s_x;
                    if (spec.mode == PoolMode::max) {
                        double best = -std::numeric_limits<double>::infinity();
                        std::size_t best_idx = y0 * w + x0;
                        for (std::size_t m = 0; m < spec.f_y; ++m) {
                            for (std::size_t n = 0; n < spec.f_x; ++n) {
                                const std::size_t idx = (y0 + m) * w + (x0 + n);
                                if (plane[idx] > best) {
                                    best = plane[idx];
                                    best_idx = idx;
                                }
                            }
                        }
                        yp[oy * out_w + ox] = best;
                        am[p * out_h * out_w + oy * out_w + ox] = p * h * w + best_idx;
                    } else {
                        double sum = 0.0;
                        for (std::size_t m = 0; m < spec.f_y; ++m)
                            for (std::size_t n = 0; n < spec.f_x; ++n)
                                sum += plane[(y0 + m) * w + (x0 + n)];
                        yp[oy * out_w + ox] = sum * inv_area;
                    }
                }
            }
        }
    });

    return {std::move(out), std::move(cache)};
}

Tensor pool_backward(const PoolSpec& spec, const PoolCache& cache, const Tensor& upstream) {
    if (!(upstream.shape() == cache.out_shape))
        throw UsageError("pool_backward: upstream shape " + upstream.shape().str() +
                         " does not match cached forward output " + cache.out_shape.str());
    if (spec.mode == PoolMode::max && cache.argmax.size() != upstream.size())
        throw UsageError("pool_backward: cache does not belong to this forward pass");

    Tensor dx = Tensor::zeros(cache.in_shape);
    double* g = dx.data();
    const double* u = upstream.data();

    if (spec.mode == PoolMode::max) {
        for (std::size_t i = 0; i < upstream.size(); ++i) g[cache.argmax[i]] += u[i];
        return dx;
    }

    const std::size_t h = cache.in_shape[2], w = cache.in_shape[3];
    const std::size_t out_h = cache.out_shape[2], out_w = cache.out_shape[3];
    const std::size_t planes = cache.in_shape[0] * cache.in_shape[1];
    const double inv_area = 1.0 / (static_cast<double>(spec.f_x) * static_cast<double>(spec.f_y));
    for (std::size_t p = 0; p < planes; ++p) {
        double* gp = g + p * h * w;
        const double* up = u + p * out_h * out_w;
        for (std::size_t oy = 0; oy < out_h; ++oy) {
            for (std::size_t ox = 0; ox < out_w; ++ox) {
                const double v = up[oy * out_w + ox] * inv_area;
                for (std::size_t m = 0; m < spec.f_y; ++m)
                    for (std::size_t n = 0; n < spec.f_x; ++n)
                        gp[(oy * spec.s_y + m) * w + (ox * spec.s_x + n)] += v;
            }
        }
    }
    return dx;
}

// ---------------------------------------------------------------------------
// Dense
// ---------------------------------------------------------------------------

Tensor dense_forward(const DenseSpec& spec, LayerState& state, const Tensor& input, Mode mode) {
    require_rank(input, 2, "dense_forward");
    if (input.shape()[1] != spec.in_features)
        throw ShapeError("dense_forward: input has " + std::to_string(input.shape()[1]) +
                         " features, spec expects " + std::to_string(spec.in_features));
    if (state.params.size() != 2)
        throw UsageError("dense_forward: layer state holds no weight/bias tensors");

    const std::size_t batch = input.shape()[0];
    Tensor out = Tensor::zeros(Shape{batch, spec.out_features});
    double* y = out.data();
    const double* bias = state.params[1].data();
    for (std::size_t b = 0; b < batch; ++b)
        std::memcpy(y + b * spec.out_features, bias, spec.out_features * sizeof(double));
    gemm_acc(y, input.data(), state.params[0].data(), batch, spec.in_features,
             spec.out_features);

    if (mode == Mode::train) state.cached_input = input;
    return out;
}

Tensor dense_backward(const DenseSpec& spec, LayerState& state, const Tensor& upstream) {
    if (!state.cached_input)
        throw UsageError("dense_backward: no cached forward input (run forward in train mode)");
    const Tensor& input = *state.cached_input;
    const std::size_t batch = input.shape()[0];
    const Shape expect{batch, spec.out_features};
    if (!(upstream.shape() == expect))
        throw ShapeError("dense_backward: upstream shape " + upstream.shape().str() +
                         " does not match forward output " + expect.str());

    // dW = X^T * dY
    std::vector<double> xt(spec.in_features * batch);
    transpose(xt.data(), input.data(), batch, spec.in_features);
    gemm_acc(state.grads[0].data(), xt.data(), upstream.data(), spec.in_features, batch,
             spec.out_features);

    // db = column sums of dY
    double* db = state.grads[1].data();
    const double* u = upstream.data();
    for (std::size_t b = 0; b < batch; ++b)
        for (std::size_t o = 0; o < spec.out_features; ++o) db[o] += u[b * spec.out_features + o];

    // dX = dY * W^T
    std::vector<double> wt(spec.out_features * spec.in_features);
    transpose(wt.data(), state.params[0].data(), spec.in_features, spec.out_features);
    Tensor dx = Tensor::zeros(input.shape());
    gemm_acc(dx.data(), upstream.data(), wt.data(), batch, spec.out_features, spec.in_features);

    state.cached_input.reset();
    return dx;
}

// ---------------------------------------------------------------------------
// Dropout
// ---------------------------------------------------------------------------

std::pair<Tensor, Tensor> dropout_forward(const DropoutSpec& spec, const Tensor& input,
                                          Mode mode, Rng& rng) {
    if (!spec.rate)
        throw UsageError("dropout_forward: unresolved dropout rate");
    const double rate = *spec.rate;
    if (rate < 0.0 || rate >= 1.0)
        throw ValueError("dropout: rate must lie in [0, 1), got " + std::to_string(rate));

    if (mode == Mode::infer || rate == 0.0)
        return {input, Tensor::full(input.shape(), 1.0)};

    const double keep_scale = 1.0 / (1.0 - rate);
    std::vector<double> mask(input.size());
    for (double& m : mask) m = rng.next_double() < rate ? 0.0 : keep_scale;
    Tensor mask_t = Tensor::from(input.shape(), std::move(mask));
    return {mul(input, mask_t), std::move(mask_t)};
}

Tensor dropout_backward(const Tensor& mask, const Tensor& upstream) {
    return mul(mask, upstream);
}

// ---------------------------------------------------------------------------
// Softmax
// ---------------------------------------------------------------------------

Tensor softmax(const Tensor& scores) {
    require_rank(scores, 2, "softmax");
    const std::size_t classes = scores.shape()[1];
    if (classes < 2) throw ShapeError("softmax: needs at least 2 classes");
    const std::size_t batch = scores.shape()[0];
    std::vector<double> out(scores.size());
    const double* p = scores.data();
    for (std::size_t b = 0; b < batch; ++b) {
        const double* row = p + b * classes;
        double mx = row[0];
        for (std::size_t c = 1; c < classes; ++c) mx = std::max(mx, row[c]);
        double sum = 0.0;
        for (std::size_t c = 0; c < classes; ++c) {
            const double e = std::exp(row[c] - mx);
            out[b * classes + c] = e;
            sum += e;
        }
        const double inv = 1.0 / sum;
        for (std::size_t c = 0; c < classes; ++c) out[b * classes + c] *= inv;
    }
    return Tensor::from(scores.shape(), std::move(out));
}

Tensor softmax_backward(const Tensor& softmax_output, const Tensor& upstream) {
    if (!(softmax_output.shape() == upstream.shape()))
        throw ShapeError("softmax_backward: shape mismatch");
    const std::size_t batch = softmax_output.shape()[0];
    const std::size_t classes = softmax_output.shape()[1];
    std::vector<double> out(softmax_output.size());
    const double* p = softmax_output.data();
    const double* u = upstream.data();
    for (std::size_t b = 0; b < batch; ++b) {
        const double* prow = p + b * classes;
        const double* urow = u + b * classes;
        double dot = 0.0;
        for (std::size_t c = 0; c < classes; ++c) dot += urow[c] * prow[c];
        for (std::size_t c = 0; c < classes; ++c)
            out[b * classes + c] = prow[c] * (urow[c] - dot);
    }
    return Tensor::from(softmax_output.shape(), std::move(out));
}

// ---------------------------------------------------------------------------
// Spec plumbing
// ---------------------------------------------------------------------------

NetworkSpec default_network_spec() {
    NetworkSpec spec;
    spec.class_count = 5;
    spec.input_channels = 3;
    spec.input_height = 128;
    spec.input_width = 128;
    spec.layers = {
        ConvSpec{3, 16, 3, 3, 1, 1, 1},
        ReluSpec{},
        PoolSpec{2, 2, 2, 2, PoolMode::max},
        ConvSpec{16, 32, 3, 3, 1, 1, 1},
        ReluSpec{},
        PoolSpec{2, 2, 2, 2, PoolMode::max},
        ConvSpec{32, 64, 3, 3, 1, 1, 1},
        ReluSpec{},
        PoolSpec{2, 2, 2, 2, PoolMode::max},
        FlattenSpec{},
        DenseSpec{64 * 16 * 16, 128},
        ReluSpec{},
        DropoutSpec{std::nullopt},
        DenseSpec{128, 5},
        SoftmaxSpec{},
    };
    return spec;
}

NetworkSpec resolve_dropout(NetworkSpec spec, double rate) {
    for (auto& layer : spec.layers) {
        if (auto* d = std::get_if<DropoutSpec>(&layer)) {
            if (!d->rate) d->rate = rate;
        }
    }
    return spec;
}

std::vector<Shape> validate_network_spec(const NetworkSpec& spec) {
    if (spec.layers.empty()) throw ConfigError("network: no layers");
    if (spec.class_count < 2) throw ConfigError("network: class_count must be >= 2");

    std::vector<Shape> shapes;
    // A 1x1 plane means the network takes flat feature rows directly.
    Shape cur = spec.input_height == 1 && spec.input_width == 1
                    ? Shape{1, spec.input_channels}
                    : Shape{1, spec.input_channels, spec.input_height, spec.input_width};
    cur.validate();

    for (std::size_t i = 0; i < spec.layers.size(); ++i) {
        const LayerSpec& layer = spec.layers[i];
        const std::string where =
            "network layer " + std::to_string(i) + " (" + layer_name(layer) + "): ";
        try {
            if (const auto* c = std::get_if<ConvSpec>(&layer)) {
                if (c->in_channels == 0 || c->out_channels == 0 || c->kernel_h == 0 ||
                    c->kernel_w == 0 || c->stride_h == 0 || c->stride_w == 0)
                    throw ConfigError("all conv extents and strides must be >= 1");
                if (cur.rank() != 4) throw ConfigError("needs an image input, got " + cur.str());
                if (cur[1] != c->in_channels)
                    throw ConfigError("input has " + std::to_string(cur[1]) +
                                      " channels, spec expects " +
                                      std::to_string(c->in_channels));
                const ConvDims d = conv_dims(*c, cur);
                cur = Shape{cur[0], c->out_channels, d.out_h, d.out_w};
            } else if (const auto* p = std::get_if<PoolSpec>(&layer)) {
                if (p->f_x == 0 || p->f_y == 0 || p->s_x == 0 || p->s_y == 0)
                    throw ConfigError("all pool extents and strides must be >= 1");
                if (cur.rank() != 4) throw ConfigError("needs an image input, got " + cur.str());
                if (cur[2] < p->f_y || cur[3] < p->f_x)
                    throw ConfigError("window " + std::to_string(p->f_x) + "x" +
                                      std::to_string(p->f_y) + " larger than plane " +
                                      std::to_string(cur[3]) + "x" + std::to_string(cur[2]));
                cur = Shape{cur[0], cur[1], (cur[2] - p->f_y) / p->s_y + 1,
                            (cur[3] - p->f_x) / p->s_x + 1};
            } else if (const auto* dn = std::get_if<DenseSpec>(&layer)) {
                if (dn->in_features == 0 || dn->out_features == 0)
                    throw ConfigError("dense extents must be >= 1");
                if (cur.rank() != 2)
                    throw ConfigError("needs a flat input, got " + cur.str() +
                                      " (insert flatten)");
                if (cur[1] != dn->in_features)
                    throw ConfigError("input has " + std::to_string(cur[1]) +
                                      " features, spec expects " +
                                      std::to_string(dn->in_features));
                cur = Shape{cur[0], dn->out_features};
            } else if (const auto* dr = std::get_if<DropoutSpec>(&layer)) {
                if (dr->rate && (*dr->rate < 0.0 || *dr->rate >= 1.0))
                    throw ConfigError("dropout rate must lie in [0, 1)");
            } else if (std::holds_alternative<FlattenSpec>(layer)) {
                cur = Shape{cur[0], cur.count() / cur[0]};
            } else if (std::holds_alternative<SoftmaxSpec>(layer)) {
                if (cur.rank() != 2 || cur[1] < 2)
                    throw ConfigError("needs a flat score input with >= 2 classes, got " +
                                      cur.str());
            }
            // relu keeps the shape
        } catch (const Error& e) {
            throw ConfigError(where + e.what());
        }
        shapes.push_back(cur);
    }

    if (shapes.back().rank() != 2 || shapes.back()[1] != spec.class_count)
        throw ConfigError("network: final layer produces " + shapes.back().str() +
                          ", expected " + std::to_string(spec.class_count) +
                          " class scores per sample");
    return shapes;
}

// ---------------------------------------------------------------------------
// Network
// ---------------------------------------------------------------------------

Network::Network(NetworkSpec spec, Rng& init_rng) : spec_(std::move(spec)) {
    validate_network_spec(spec_);
    states_.resize(spec_.layers.size());
    for (std::size_t i = 0; i < spec_.layers.size(); ++i) {
        LayerState& st = states_[i];
        if (const auto* c = std::get_if<ConvSpec>(&spec_.layers[i])) {
            const std::size_t fan_in = c->in_channels * c->kernel_h * c->kernel_w;
            const std::size_t fan_out = c->out_channels * c->kernel_h * c->kernel_w;
            const double bound = std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
            const Shape wshape{c->out_channels, c->in_channels, c->kernel_h, c->kernel_w};
            st.params.push_back(Tensor::random_uniform(wshape, -bound, bound, init_rng));
            st.params.push_back(Tensor::zeros(Shape{c->out_channels}));
        } else if (const auto* dn = std::get_if<DenseSpec>(&spec_.layers[i])) {
            const double bound =
                std::sqrt(6.0 / static_cast<double>(dn->in_features + dn->out_features));
            const Shape wshape{dn->in_features, dn->out_features};
            st.params.push_back(Tensor::random_uniform(wshape, -bound, bound, init_rng));
            st.params.push_back(Tensor::zeros(Shape{dn->out_features}));
        }
        for (const Tensor& p : st.params) st.grads.push_back(Tensor::zeros(p.shape()));
    }
}

Tensor Network::forward(const Tensor& batch, Mode mode, Rng* rng) {
    Tensor cur = batch;
    for (std::size_t i = 0; i < spec_.layers.size(); ++i) {
        LayerState& st = states_[i];
        const std::string where =
            "layer " + std::to_string(i) + " (" + layer_name(spec_.layers[i]) + "): ";
        try {
            if (const auto* c = std::get_if<ConvSpec>(&spec_.layers[i])) {
                cur = conv_forward(*c, st, cur, mode);
            } else if (std::holds_alternative<ReluSpec>(spec_.layers[i])) {
                Tensor next = relu(cur);
                if (mode == Mode::train) st.cached_input = std::move(cur);
                cur = std::move(next);
            } else if (const auto* p = std::get_if<PoolSpec>(&spec_.layers[i])) {
                auto [out, cache] = pool_forward(*p, cur);
                if (mode == Mode::train) st.pool_cache = std::move(cache);
                cur = std::move(out);
            } else if (const auto* dn = std::get_if<DenseSpec>(&spec_.layers[i])) {
                cur = dense_forward(*dn, st, cur, mode);
            } else if (const auto* dr = std::get_if<DropoutSpec>(&spec_.layers[i])) {
                if (mode == Mode::train && dr->rate.value_or(0.0) > 0.0 && rng == nullptr)
                    throw UsageError("train-mode dropout needs a generator");
                Rng dummy(0);
                auto [out, mask] =
                    dropout_forward(*dr, cur, mode, rng ? *rng : dummy);
                if (mode == Mode::train) st.dropout_mask = std::move(mask);
                cur = std::move(out);
            } else if (std::holds_alternative<FlattenSpec>(spec_.layers[i])) {
                const Shape in_shape = cur.shape();
                if (mode == Mode::train) st.cached_shape = in_shape;
                cur = cur.reshaped(Shape{in_shape[0], cur.size() / in_shape[0]});
            } else if (std::holds_alternative<SoftmaxSpec>(spec_.layers[i])) {
                cur = softmax(cur);
            }
        } catch (const Error& e) {
            if (std::string(e.what()).rfind("layer ", 0) == 0) throw;
            throw Error(e.category(), where + e.what());
        }
    }
    return cur;
}

Tensor Network::backward_from_scores(const Tensor& score_grad) {
    if (spec_.layers.empty() || !std::holds_alternative<SoftmaxSpec>(spec_.layers.back()))
        throw UsageError("backward_from_scores: final layer must be softmax");
    Tensor grad = score_grad;
    for (std::size_t n = spec_.layers.size() - 1; n-- > 0;) {
        LayerState& st = states_[n];
        const std::string where =
            "layer " + std::to_string(n) + " (" + layer_name(spec_.layers[n]) + "): ";
        try {
            if (const auto* c = std::get_if<ConvSpec>(&spec_.layers[n])) {
                grad = conv_backward(*c, st, grad);
            } else if (std::holds_alternative<ReluSpec>(spec_.layers[n])) {
                if (!st.cached_input) throw UsageError("no cached forward input");
                grad = relu_backward(*st.cached_input, grad);
                st.cached_input.reset();
            } else if (const auto* p = std::get_if<PoolSpec>(&spec_.layers[n])) {
                if (!st.pool_cache) throw UsageError("no cached forward pass");
                grad = pool_backward(*p, *st.pool_cache, grad);
                st.pool_cache.reset();
            } else if (const auto* dn = std::get_if<DenseSpec>(&spec_.layers[n])) {
                grad = dense_backward(*dn, st, grad);
            } else if (std::holds_alternative<DropoutSpec>(spec_.layers[n])) {
                if (!st.dropout_mask) throw UsageError("no cached forward mask");
                grad = dropout_backward(*st.dropout_mask, grad);
                st.dropout_mask.reset();
            } else if (std::holds_alternative<FlattenSpec>(spec_.layers[n])) {
                if (!st.cached_shape) throw UsageError("no cached forward shape");
                grad = grad.reshaped(*st.cached_shape);
                st.cached_shape.reset();
            }
        } catch (const Error& e) {
            if (std::string(e.what()).rfind("layer ", 0) == 0) throw;
            throw Error(e.category(), where + e.what());
        }
    }
    return grad;
}

std::vector<Tensor*> Network::parameters() {
    std::vector<Tensor*> out;
    for (auto& st : states_)
        for (auto& p : st.params) out.push_back(&p);
    return out;
}

std::vector<Tensor*> Network::gradients() {
    std::vector<Tensor*> out;
    for (auto& st : states_)
        for (auto& g : st.grads) out.push_back(&g);
    return out;
}

std::vector<Tensor> Network::parameter_snapshot() const {
    std::vector<Tensor> out;
    for (const auto& st : states_)
        for (const auto& p : st.params) out.push_back(p);
    return out;
}

void Network::restore_parameters(const std::vector<Tensor>& snapshot) {
    std::size_t i = 0;
    for (auto& st : states_) {
        for (auto& p : st.params) {
            if (i >= snapshot.size() || !(snapshot[i].shape() == p.shape()))
                throw UsageError("restore_parameters: snapshot does not match this network");
            p = snapshot[i++];
        }
    }
    if (i != snapshot.size())
        throw UsageError("restore_parameters: snapshot does not match this network");
}

}  // namespace retina::nn
