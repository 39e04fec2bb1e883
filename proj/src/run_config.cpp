#include "retina/run_config.hpp"

#include <algorithm>
#include <cctype>
#include <charconv>
#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>

#include "retina/error.hpp"

namespace fs = std::filesystem;

namespace retina::cli {

namespace {

std::string trim(const std::string& s) {
    std::size_t a = 0, b = s.size();
    while (a < b && std::isspace(static_cast<unsigned char>(s[a]))) ++a;
    while (b > a && std::isspace(static_cast<unsigned char>(s[b - 1]))) --b;
    return s.substr(a, b - a);
}

std::vector<std::string> split_ws(const std::string& s) {
    std::vector<std::string> out;
    std::istringstream in(s);
    std::string token;
    while (in >> token) out.push_back(token);
    return out;
}

std::size_t to_size(const std::string& s, const std::string& what) {
    std::size_t v = 0;
    const auto res = std::from_chars(s.data(), s.data() + s.size(), v);
    if (res.ec != std::errc{} || res.ptr != s.data() + s.size())
        throw ConfigError(what + ": expected a non-negative integer, got '" + s + "'");
    return v;
}

double to_double(const std::string& s, const std::string& what) {
    double v = 0.0;
    const auto res = std::from_chars(s.data(), s.data() + s.size(), v);
    if (res.ec != std::errc{} || res.ptr != s.data() + s.size())
        throw ConfigError(what + ": expected a number, got '" + s + "'");
    return v;
}

// "AxB" or "AxBxC"
std::vector<std::size_t> parse_dims(const std::string& s, const std::string& what) {
    std::vector<std::size_t> out;
    std::string cur;
    for (char c : s + "x") {
        if (c == 'x' || c == 'X') {
            out.push_back(to_size(cur, what));
            cur.clear();
        } else {
            cur.push_back(c);
        }
    }
    return out;
}

struct Term {
    std::string name;
    std::vector<std::string> args;
};

Term parse_term(const std::string& text) {
    const std::size_t open = text.find('(');
    Term t;
    if (open == std::string::npos) {
        t.name = text;
        return t;
    }
    if (text.back() != ')')
        throw ConfigError("net.layers: malformed term '" + text + "'");
    t.name = text.substr(0, open);
    const std::string inner = text.substr(open + 1, text.size() - open - 2);
    std::string cur;
    for (char c : inner + ",") {
        if (c == ',') {
            const std::string arg = trim(cur);
            if (!arg.empty()) t.args.push_back(arg);
            cur.clear();
        } else {
            cur.push_back(c);
        }
    }
    return t;
}

}  // namespace

std::vector<nn::LayerSpec> parse_layer_terms(const std::string& text, std::size_t in_channels,
                                             std::size_t in_height, std::size_t in_width) {
    std::vector<nn::LayerSpec> layers;
    bool flat = false;
    std::size_t c = in_channels, h = in_height, w = in_width, features = 0;

    for (const std::string& raw : split_ws(text)) {
        const Term term = parse_term(raw);
        const std::string where = "net.layers term '" + raw + "'";

        if (term.name == "conv") {
            if (flat) throw ConfigError(where + ": conv needs an image input");
            if (term.args.size() < 2)
                throw ConfigError(where + ": want conv(out_channels,KxK[,sN][,pN])");
            nn::ConvSpec spec;
            spec.in_channels = c;
            spec.out_channels = to_size(term.args[0], where);
            const auto k = parse_dims(term.args[1], where);
            if (k.size() != 2) throw ConfigError(where + ": kernel must be KxK");
            spec.kernel_h = k[0];
            spec.kernel_w = k[1];
            for (std::size_t i = 2; i < term.args.size(); ++i) {
                const std::string& a = term.args[i];
                if (a.size() > 1 && a[0] == 's') {
                    const auto sv = parse_dims(a.substr(1), where);
                    spec.stride_h = sv[0];
                    spec.stride_w = sv.size() > 1 ? sv[1] : sv[0];
                } else if (a.size() > 1 && a[0] == 'p') {
                    spec.padding = to_size(a.substr(1), where);
                } else {
                    throw ConfigError(where + ": unknown argument '" + a + "'");
                }
            }
            if (spec.out_channels == 0 || spec.kernel_h == 0 || spec.kernel_w == 0 ||
                spec.stride_h == 0 || spec.stride_w == 0)
                throw ConfigError(where + ": extents and strides must be >= 1");
            const std::size_t ph = h + 2 * spec.padding, pw = w + 2 * spec.padding;
            if (ph < spec.kernel_h || pw < spec.kernel_w)
                throw ConfigError(where + ": kernel larger than the padded input");
            c = spec.out_channels;
            h = (ph - spec.kernel_h) / spec.stride_h + 1;
            w = (pw - spec.kernel_w) / spec.stride_w + 1;
            layers.push_back(spec);
        } else if (term.name == "maxpool" || term.name == "avgpool") {
            if (flat) throw ConfigError(where + ": pooling needs an image input");
            if (term.args.empty())
                throw ConfigError(where + ": want " + term.name + "(FxF[,sN])");
            nn::PoolSpec spec;
            spec.mode = term.name == "maxpool" ? nn::PoolMode::max : nn::PoolMode::average;
            const auto f = parse_dims(term.args[0], where);
            if (f.size() != 2) throw ConfigError(where + ": window must be FxF");
            spec.f_x = f[0];
            spec.f_y = f[1];
            spec.s_x = spec.f_x;
            spec.s_y = spec.f_y;
            for (std::size_t i = 1; i < term.args.size(); ++i) {
                const std::string& a = term.args[i];
                if (a.size() > 1 && a[0] == 's') {
                    const auto sv = parse_dims(a.substr(1), where);
                    spec.s_x = sv[0];
                    spec.s_y = sv.size() > 1 ? sv[1] : sv[0];
                } else {
                    throw ConfigError(where + ": unknown argument '" + a + "'");
                }
            }
            if (spec.f_x == 0 || spec.f_y == 0 || spec.s_x == 0 || spec.s_y == 0)
                throw ConfigError(where + ": extents and strides must be >= 1");
            if (h < spec.f_y || w < spec.f_x)
                throw ConfigError(where + ": window larger than the input plane");
            h = (h - spec.f_y) / spec.s_y + 1;
            w = (w - spec.f_x) / spec.s_x + 1;
            layers.push_back(spec);
        } else if (term.name == "relu") {
            layers.push_back(nn::ReluSpec{});
        } else if (term.name == "flatten") {
            if (flat) throw ConfigError(where + ": input is already flat");
            features = c * h * w;
            flat = true;
            layers.push_back(nn::FlattenSpec{});
        } else if (term.name == "dense") {
            if (!flat) throw ConfigError(where + ": dense needs a flat input (insert flatten)");
            if (term.args.size() != 1) throw ConfigError(where + ": want dense(out_features)");
            nn::DenseSpec spec;
            spec.in_features = features;
            spec.out_features = to_size(term.args[0], where);
            if (spec.out_features == 0) throw ConfigError(where + ": out_features must be >= 1");
            features = spec.out_features;
            layers.push_back(spec);
        } else if (term.name == "dropout") {
            nn::DropoutSpec spec;
            if (!term.args.empty()) spec.rate = to_double(term.args[0], where);
            layers.push_back(spec);
        } else if (term.name == "softmax") {
            layers.push_back(nn::SoftmaxSpec{});
        } else {
            throw ConfigError(where + ": unknown layer '" + term.name + "'");
        }
    }
    return layers;
}

RunOptions parse_run_config(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open " + path);

    std::map<std::string, std::pair<std::string, std::size_t>> pairs;
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        const std::size_t hash = line.find('#');
        if (hash != std::string::npos) line.erase(hash);
        const std::string stripped = trim(line);
        if (stripped.empty()) continue;
        const std::size_t eq = stripped.find('=');
        if (eq == std::string::npos)
            throw ParseError(path + ": expected 'key = value'", lineno);
        const std::string key = trim(stripped.substr(0, eq));
        const std::string value = trim(stripped.substr(eq + 1));
        if (key.empty()) throw ParseError(path + ": empty key", lineno);
        if (pairs.count(key)) throw ParseError(path + ": duplicate key '" + key + "'", lineno);
        pairs[key] = {value, lineno};
    }

    static const std::vector<std::string> known = {
        "data.manifest",     "data.splits",          "data.exclusions",
        "net.input",         "net.classes",          "net.layers",
        "preproc.size",      "preproc.threshold",    "preproc.se",
        "preproc.order",     "train.learning_rate",  "train.batch_size",
        "train.max_epochs",  "train.dropout_rate",   "train.patience",
        "train.seed",        "search.learning_rates", "search.batch_sizes",
        "search.max_epochs", "search.dropout_rates", "search.budget",
        "search.strategy",   "out.dir",
    };
    for (const auto& [key, value] : pairs) {
        if (std::find(known.begin(), known.end(), key) == known.end())
            throw ParseError(path + ": unknown key '" + key + "'", value.second);
    }

    const auto get = [&](const std::string& key) -> std::optional<std::string> {
        auto it = pairs.find(key);
        if (it == pairs.end()) return std::nullopt;
        return it->second.first;
    };

    RunOptions opt;

    const auto manifest = get("data.manifest");
    if (!manifest) throw ConfigError(path + ": data.manifest is required");
    opt.manifest_path = *manifest;
    opt.splits_path = get("data.splits")
                          .value_or((fs::path(opt.manifest_path).parent_path() / "splits.csv")
                                        .string());
    if (const auto excl = get("data.exclusions")) opt.exclusions_path = *excl;

    // network
    std::size_t in_c = 3, in_h = 128, in_w = 128;
    if (const auto input = get("net.input")) {
        const auto dims = parse_dims(*input, "net.input");
        if (dims.size() != 3) throw ConfigError("net.input: want CxHxW");
        in_c = dims[0];
        in_h = dims[1];
        in_w = dims[2];
    }
    opt.network.input_channels = in_c;
    opt.network.input_height = in_h;
    opt.network.input_width = in_w;
    opt.network.class_count = get("net.classes") ? to_size(*get("net.classes"), "net.classes") : 5;
    if (const auto layers = get("net.layers")) {
        opt.network.layers = parse_layer_terms(*layers, in_c, in_h, in_w);
    } else {
        nn::NetworkSpec def = nn::default_network_spec();
        if (in_c != def.input_channels || in_h != def.input_height ||
            in_w != def.input_width || opt.network.class_count != def.class_count)
            throw ConfigError(
                "net.layers: the built-in stack expects 3x128x128 input and 5 classes; "
                "set net.layers explicitly for other geometries");
        opt.network.layers = def.layers;
    }

    // preprocessing
    if (const auto size = get("preproc.size")) {
        const auto dims = parse_dims(*size, "preproc.size");
        if (dims.size() != 2) throw ConfigError("preproc.size: want WxH");
        opt.preproc.target_w = dims[0];
        opt.preproc.target_h = dims[1];
    }
    if (const auto th = get("preproc.threshold"))
        opt.preproc.threshold = to_double(*th, "preproc.threshold");
    if (const auto se = get("preproc.se")) {
        const auto dims = parse_dims(*se, "preproc.se");
        if (dims.size() != 2 || dims[0] == 0 || dims[1] == 0)
            throw ConfigError("preproc.se: want WxH with extents >= 1");
        opt.preproc.se = morph::StructuringElement::box(dims[0], dims[1]);
    }
    if (const auto order = get("preproc.order")) {
        opt.preproc.order.clear();
        for (const auto& name : split_ws(*order))
            opt.preproc.order.push_back(morph::parse_stage(name));
    }
    opt.preproc.validate();

    // training
    if (const auto v = get("train.learning_rate"))
        opt.train_config.learning_rate = to_double(*v, "train.learning_rate");
    if (const auto v = get("train.batch_size"))
        opt.train_config.batch_size = to_size(*v, "train.batch_size");
    if (const auto v = get("train.max_epochs"))
        opt.train_config.max_epochs = to_size(*v, "train.max_epochs");
    if (const auto v = get("train.dropout_rate"))
        opt.train_config.dropout_rate = to_double(*v, "train.dropout_rate");
    if (const auto v = get("train.patience"))
        opt.train_config.early_stop_patience = to_size(*v, "train.patience");
    if (const auto v = get("train.seed"))
        opt.train_config.seed = to_size(*v, "train.seed");
    opt.train_config.validate();

    // search space (present iff any search.* key is)
    const bool has_search = std::any_of(pairs.begin(), pairs.end(), [](const auto& kv) {
        return kv.first.rfind("search.", 0) == 0;
    });
    if (has_search) {
        train::SearchSpace space;
        const auto lists = [&](const char* key, auto&& push) {
            if (const auto v = get(key))
                for (const auto& item : split_ws(*v)) push(item, key);
        };
        lists("search.learning_rates", [&](const std::string& s, const char* k) {
            space.learning_rates.push_back(to_double(s, k));
        });
        lists("search.batch_sizes", [&](const std::string& s, const char* k) {
            space.batch_sizes.push_back(to_size(s, k));
        });
        lists("search.max_epochs", [&](const std::string& s, const char* k) {
            space.max_epochs_options.push_back(to_size(s, k));
        });
        lists("search.dropout_rates", [&](const std::string& s, const char* k) {
            space.dropout_rates.push_back(to_double(s, k));
        });
        if (space.learning_rates.empty())
            space.learning_rates = {opt.train_config.learning_rate};
        if (space.batch_sizes.empty()) space.batch_sizes = {opt.train_config.batch_size};
        if (space.max_epochs_options.empty())
            space.max_epochs_options = {opt.train_config.max_epochs};
        if (space.dropout_rates.empty()) space.dropout_rates = {opt.train_config.dropout_rate};
        space.budget = space.learning_rates.size() * space.batch_sizes.size() *
                       space.max_epochs_options.size() * space.dropout_rates.size();
        if (const auto v = get("search.budget")) space.budget = to_size(*v, "search.budget");
        if (space.budget == 0) throw ConfigError("search.budget: must be >= 1");
        if (const auto v = get("search.strategy")) {
            if (*v == "grid") {
                space.strategy = train::SearchStrategy::grid;
            } else if (*v == "random") {
                space.strategy = train::SearchStrategy::random;
            } else {
                throw ConfigError("search.strategy: want grid or random, got '" + *v + "'");
            }
        }
        opt.search = std::move(space);
    }

    if (const auto v = get("out.dir")) opt.out_dir = *v;

    return opt;
}

}  // namespace retina::cli
