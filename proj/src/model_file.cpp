#include "retina/model_file.hpp"

#include <array>
#include <bit>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <vector>

#include "retina/error.hpp"

namespace retina::cli {

namespace {

constexpr char kMagic[8] = {'R', 'E', 'T', 'G', 'R', 'A', 'D', 'M'};
constexpr std::uint8_t kVersion = 1;

enum class Tag : std::uint8_t {
    conv = 1,
    relu = 2,
    pool = 3,
    dense = 4,
    dropout = 5,
    flatten = 6,
    softmax = 7,
};

std::uint32_t crc32(const std::uint8_t* data, std::size_t n) {
    static const auto table = [] {
        std::array<std::uint32_t, 256> t{};
        for (std::uint32_t i = 0; i < 256; ++i) {
            std::uint32_t c = i;
            for (int k = 0; k < 8; ++k) c = (c & 1) ? 0xEDB88320u ^ (c >> 1) : c >> 1;
            t[i] = c;
        }
        return t;
    }();
    std::uint32_t crc = 0xFFFFFFFFu;
    for (std::size_t i = 0; i < n; ++i) crc = table[(crc ^ data[i]) & 0xFF] ^ (crc >> 8);
    return crc ^ 0xFFFFFFFFu;
}

struct Writer {
    std::vector<std::uint8_t> bytes;

    void u8(std::uint8_t v) { bytes.push_back(v); }
    void u32(std::uint32_t v) {
        for (int i = 0; i < 4; ++i) bytes.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
    }
    void u64(std::uint64_t v) {
        for (int i = 0; i < 8; ++i) bytes.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
    }
    void f64(double v) { u64(std::bit_cast<std::uint64_t>(v)); }
};

struct Reader {
    const std::uint8_t* p;
    const std::uint8_t* end;
    const std::string& path;

    void need(std::size_t n) const {
        if (static_cast<std::size_t>(end - p) < n)
            throw IntegrityError(path + ": truncated model file");
    }
    std::uint8_t u8() {
        need(1);
        return *p++;
    }
    std::uint32_t u32() {
        need(4);
        std::uint32_t v = 0;
        for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(*p++) << (8 * i);
        return v;
    }
    std::uint64_t u64() {
        need(8);
        std::uint64_t v = 0;
        for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(*p++) << (8 * i);
        return v;
    }
    double f64() { return std::bit_cast<double>(u64()); }
};

void write_layer(Writer& w, const nn::LayerSpec& layer) {
    if (const auto* c = std::get_if<nn::ConvSpec>(&layer)) {
        w.u8(static_cast<std::uint8_t>(Tag::conv));
        w.u64(c->in_channels);
        w.u64(c->out_channels);
        w.u64(c->kernel_h);
        w.u64(c->kernel_w);
        w.u64(c->stride_h);
        w.u64(c->stride_w);
        w.u64(c->padding);
    } else if (std::holds_alternative<nn::ReluSpec>(layer)) {
        w.u8(static_cast<std::uint8_t>(Tag::relu));
    } else if (const auto* p = std::get_if<nn::PoolSpec>(&layer)) {
        w.u8(static_cast<std::uint8_t>(Tag::pool));
        w.u64(p->f_x);
        w.u64(p->f_y);
        w.u64(p->s_x);
        w.u64(p->s_y);
        w.u8(p->mode == nn::PoolMode::max ? 0 : 1);
    } else if (const auto* d = std::get_if<nn::DenseSpec>(&layer)) {
        w.u8(static_cast<std::uint8_t>(Tag::dense));
        w.u64(d->in_features);
        w.u64(d->out_features);
    } else if (const auto* dr = std::get_if<nn::DropoutSpec>(&layer)) {
        w.u8(static_cast<std::uint8_t>(Tag::dropout));
        w.f64(dr->rate.value_or(0.0));
    } else if (std::holds_alternative<nn::FlattenSpec>(layer)) {
        w.u8(static_cast<std::uint8_t>(Tag::flatten));
    } else {
        w.u8(static_cast<std::uint8_t>(Tag::softmax));
    }
}

nn::LayerSpec read_layer(Reader& r) {
    const auto tag = static_cast<Tag>(r.u8());
    switch (tag) {
        case Tag::conv: {
            nn::ConvSpec c;
            c.in_channels = r.u64();
            c.out_channels = r.u64();
            c.kernel_h = r.u64();
            c.kernel_w = r.u64();
            c.stride_h = r.u64();
            c.stride_w = r.u64();
            c.padding = r.u64();
            return c;
        }
        case Tag::relu:
            return nn::ReluSpec{};
        case Tag::pool: {
            nn::PoolSpec p;
            p.f_x = r.u64();
            p.f_y = r.u64();
            p.s_x = r.u64();
            p.s_y = r.u64();
            p.mode = r.u8() == 0 ? nn::PoolMode::max : nn::PoolMode::average;
            return p;
        }
        case Tag::dense: {
            nn::DenseSpec d;
            d.in_features = r.u64();
            d.out_features = r.u64();
            return d;
        }
        case Tag::dropout: {
            nn::DropoutSpec d;
            d.rate = r.f64();
            return d;
        }
        case Tag::flatten:
            return nn::FlattenSpec{};
        case Tag::softmax:
            return nn::SoftmaxSpec{};
    }
    throw IntegrityError(r.path + ": unknown layer tag");
}

}  // namespace

void save_model(const std::string& path, const nn::Network& net) {
    Writer w;
    for (char c : kMagic) w.u8(static_cast<std::uint8_t>(c));
    w.u8(kVersion);

    const nn::NetworkSpec& spec = net.spec();
    w.u32(static_cast<std::uint32_t>(spec.class_count));
    w.u64(spec.input_channels);
    w.u64(spec.input_height);
    w.u64(spec.input_width);
    w.u64(spec.layers.size());
    for (const auto& layer : spec.layers) write_layer(w, layer);

    std::size_t tensor_count = 0;
    for (const auto& st : net.states()) tensor_count += st.params.size();
    w.u64(tensor_count);
    for (const auto& st : net.states()) {
        for (const auto& p : st.params) {
            w.u64(p.shape().rank());
            for (std::size_t d : p.shape().dims) w.u64(d);
            for (double v : p.values()) w.f64(v);
        }
    }

    w.u32(crc32(w.bytes.data(), w.bytes.size()));

    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("cannot open " + path + " for writing");
    out.write(reinterpret_cast<const char*>(w.bytes.data()),
              static_cast<std::streamsize>(w.bytes.size()));
    if (!out) throw IoError("failed writing " + path);
}

nn::Network load_model(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open " + path);
    std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)),
                                    std::istreambuf_iterator<char>());

    if (bytes.size() < sizeof(kMagic) + 1 + 4)
        throw IntegrityError(path + ": too short to be a model file");
    if (std::memcmp(bytes.data(), kMagic, sizeof(kMagic)) != 0)
        throw IntegrityError(path + ": bad magic (not a model file)");

    const std::size_t body = bytes.size() - 4;
    std::uint32_t stored = 0;
    for (int i = 0; i < 4; ++i)
        stored |= static_cast<std::uint32_t>(bytes[body + static_cast<std::size_t>(i)])
                  << (8 * i);
    if (crc32(bytes.data(), body) != stored)
        throw IntegrityError(path + ": checksum mismatch, the file is corrupted");

    Reader r{bytes.data() + sizeof(kMagic), bytes.data() + body, path};
    const std::uint8_t version = r.u8();
    if (version != kVersion)
        throw IntegrityError(path + ": unsupported format version " +
                             std::to_string(version));

    nn::NetworkSpec spec;
    spec.class_count = r.u32();
    spec.input_channels = r.u64();
    spec.input_height = r.u64();
    spec.input_width = r.u64();
    const std::uint64_t layer_count = r.u64();
    if (layer_count > 1024) throw IntegrityError(path + ": implausible layer count");
    for (std::uint64_t i = 0; i < layer_count; ++i) spec.layers.push_back(read_layer(r));

    Rng init_rng(0);
    nn::Network net(spec, init_rng);

    const std::uint64_t tensor_count = r.u64();
    std::vector<Tensor> params;
    for (std::uint64_t t = 0; t < tensor_count; ++t) {
        const std::uint64_t rank = r.u64();
        if (rank == 0 || rank > 4) throw IntegrityError(path + ": bad tensor rank");
        Shape shape;
        for (std::uint64_t d = 0; d < rank; ++d)
            shape.dims.push_back(static_cast<std::size_t>(r.u64()));
        shape.validate();
        std::vector<double> values(shape.count());
        for (double& v : values) v = r.f64();
        params.push_back(Tensor::from(shape, std::move(values)));
    }
    try {
        net.restore_parameters(params);
    } catch (const Error&) {
        throw IntegrityError(path + ": parameter tensors do not match the layer stack");
    }
    return net;
}

}  // namespace retina::cli
