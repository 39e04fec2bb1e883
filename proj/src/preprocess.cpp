#include "retina/preprocess.hpp"

#include "retina/error.hpp"

namespace retina::morph {

Stage parse_stage(const std::string& name) {
    if (name == "resize") return Stage::resize;
    if (name == "normalize") return Stage::normalize;
    if (name == "erode") return Stage::erode;
    if (name == "dilate") return Stage::dilate;
    if (name == "open") return Stage::open;
    if (name == "close") return Stage::close;
    throw ConfigError("unknown preprocessing stage '" + name + "'");
}

std::string stage_name(Stage s) {
    switch (s) {
        case Stage::resize: return "resize";
        case Stage::normalize: return "normalize";
        case Stage::erode: return "erode";
        case Stage::dilate: return "dilate";
        case Stage::open: return "open";
        case Stage::close: return "close";
    }
    return "?";
}

void PreprocSpec::validate() const {
    if (target_w == 0 || target_h == 0)
        throw ConfigError("preprocess: target size must be >= 1x1");
    if (!(threshold > 0.0 && threshold < 1.0))
        throw ConfigError("preprocess: threshold must lie strictly inside (0, 1)");
    if (order.empty()) throw ConfigError("preprocess: stage order must not be empty");
    try {
        se.validate();
    } catch (const Error& e) {
        throw ConfigError(std::string("preprocess: ") + e.what());
    }
}

namespace {

GrayImage channelwise_morph(const GrayImage& img, const StructuringElement& se,
                            GrayMode mode) {
    GrayImage out(img.width, img.height, img.channels);
    const std::size_t plane = img.width * img.height;
    for (std::size_t c = 0; c < img.channels; ++c) {
        GrayImage channel(img.width, img.height, 1);
        std::copy(img.values.begin() + static_cast<long>(c * plane),
                  img.values.begin() + static_cast<long>((c + 1) * plane),
                  channel.values.begin());
        const GrayImage result = gray_morph(channel, se, mode);
        std::copy(result.values.begin(), result.values.end(),
                  out.values.begin() + static_cast<long>(c * plane));
    }
    return out;
}

}  // namespace

Tensor preprocess(const GrayImage& img, const PreprocSpec& spec) {
    spec.validate();
    GrayImage cur = img;
    for (std::size_t i = 0; i < spec.order.size(); ++i) {
        const Stage stage = spec.order[i];
        try {
            switch (stage) {
                case Stage::resize:
                    cur = resize(cur, spec.target_w, spec.target_h);
                    break;
                case Stage::normalize:
                    cur = normalize(cur);
                    break;
                case Stage::erode:
                    cur = channelwise_morph(cur, spec.se, GrayMode::erode);
                    break;
                case Stage::dilate:
                    cur = channelwise_morph(cur, spec.se, GrayMode::dilate);
                    break;
                case Stage::open:
                    cur = channelwise_morph(channelwise_morph(cur, spec.se, GrayMode::erode),
                                            spec.se, GrayMode::dilate);
                    break;
                case Stage::close:
                    cur = channelwise_morph(channelwise_morph(cur, spec.se, GrayMode::dilate),
                                            spec.se, GrayMode::erode);
                    break;
            }
        } catch (const Error& e) {
            throw Error(e.category(), "preprocess stage " + std::to_string(i) + " (" +
                                          stage_name(stage) + "): " + e.what());
        }
    }
    return Tensor::from(Shape{cur.channels, cur.height, cur.width}, cur.values);
}

}  // namespace retina::morph
