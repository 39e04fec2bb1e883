#include "retina/data.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <numeric>
#include <set>
#include <sstream>

#include "retina/error.hpp"
#include "retina/image_io.hpp"

namespace fs = std::filesystem;

namespace retina::data {

namespace {

const std::array<std::string, kGradeCount> kSeverityNames = {
    "none", "mild", "moderate", "severe", "proliferative"};

std::string lower(std::string s) {
    for (char& c : s) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
    return s;
}

std::vector<std::string> split_fields(const std::string& line) {
    std::vector<std::string> out;
    std::string cur;
    for (char c : line) {
        if (c == ',') {
            out.push_back(cur);
            cur.clear();
        } else {
            cur.push_back(c);
        }
    }
    out.push_back(cur);
    return out;
}

// Reads LF-terminated lines; a carriage return anywhere is a grammar error.
std::vector<std::string> read_lines(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open " + path);
    std::stringstream buffer;
    buffer << in.rdbuf();
    const std::string text = buffer.str();
    if (text.find('\r') != std::string::npos)
        throw ParseError(path + ": carriage returns are not part of the grammar");
    std::vector<std::string> lines;
    std::string cur;
    for (char c : text) {
        if (c == '\n') {
            lines.push_back(cur);
            cur.clear();
        } else {
            cur.push_back(c);
        }
    }
    if (!cur.empty()) lines.push_back(cur);
    return lines;
}

}  // namespace

const std::string& severity_name(std::size_t grade) {
    if (grade >= kGradeCount) throw ValueError("severity grade must lie in 0..4");
    return kSeverityNames[grade];
}

std::size_t parse_severity(const std::string& text) {
    if (text.size() == 1 && text[0] >= '0' && text[0] <= '4')
        return static_cast<std::size_t>(text[0] - '0');
    const std::string low = lower(text);
    for (std::size_t g = 0; g < kGradeCount; ++g)
        if (low == kSeverityNames[g]) return g;
    throw ValueError("unknown severity grade '" + text + "' (want 0..4 or a severity name)");
}

const std::string& split_name(Split s) {
    static const std::array<std::string, 4> names = {"train", "val", "test", "unassigned"};
    return names[static_cast<std::size_t>(s)];
}

Split parse_split(const std::string& text) {
    const std::string low = lower(text);
    if (low == "train") return Split::train;
    if (low == "val") return Split::val;
    if (low == "test") return Split::test;
    if (low == "unassigned") return Split::unassigned;
    throw ValueError("unknown split '" + text + "'");
}

const FundusSample* DatasetManifest::find(const std::string& id) const {
    for (const auto& s : samples)
        if (s.id == id) return &s;
    return nullptr;
}

std::vector<const FundusSample*> DatasetManifest::in_split(Split s) const {
    std::vector<const FundusSample*> out;
    for (const auto& sample : samples)
        if (!sample.excluded && sample.split == s) out.push_back(&sample);
    return out;
}

std::size_t DatasetManifest::assignable_count() const {
    std::size_t n = 0;
    for (const auto& s : samples) n += !s.excluded;
    return n;
}

DatasetManifest load_manifest(const std::string& path) {
    const auto lines = read_lines(path);
    if (lines.empty()) throw ParseError(path + ": empty manifest");
    if (lines[0] != "id,image_path,grade,excluded")
        throw ParseError(path + ": bad header '" + lines[0] + "'", 1);

    const fs::path base = fs::path(path).parent_path();
    DatasetManifest m;
    m.source_tag = fs::path(path).stem().string();
    std::set<std::string> seen;
    for (std::size_t i = 1; i < lines.size(); ++i) {
        if (lines[i].empty()) continue;
        const auto fields = split_fields(lines[i]);
        if (fields.size() != 4)
            throw ParseError(path + ": expected 4 fields, got " +
                                 std::to_string(fields.size()),
                             i + 1);
        FundusSample s;
        s.id = fields[0];
        if (s.id.empty()) throw ParseError(path + ": empty id", i + 1);
        if (!seen.insert(s.id).second)
            throw ParseError(path + ": duplicate id '" + s.id + "'", i + 1);
        if (fields[1].empty()) throw ParseError(path + ": missing image path", i + 1);
        s.image_path = (base / fields[1]).lexically_normal().string();
        try {
            s.grade = parse_severity(fields[2]);
        } catch (const Error& e) {
            throw ParseError(path + ": " + e.what(), i + 1);
        }
        if (fields[3] == "0") {
            s.excluded = false;
        } else if (fields[3] == "1") {
            s.excluded = true;
        } else {
            throw ParseError(path + ": excluded flag must be 0 or 1, got '" + fields[3] + "'",
                             i + 1);
        }
        m.samples.push_back(std::move(s));
    }
    return m;
}

void save_manifest(const DatasetManifest& m, const std::string& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("cannot open " + path + " for writing");
    const fs::path base = fs::path(path).parent_path();
    out << "id,image_path,grade,excluded\n";
    for (const auto& s : m.samples) {
        const fs::path rel = fs::path(s.image_path).lexically_proximate(base);
        out << s.id << "," << rel.generic_string() << "," << s.grade << ","
            << (s.excluded ? 1 : 0) << "\n";
    }
    if (!out) throw IoError("failed writing " + path);
}

void load_split_sidecar(DatasetManifest& m, const std::string& path) {
    const auto lines = read_lines(path);
    if (lines.empty()) throw ParseError(path + ": empty split file");
    if (lines[0] != "id,split") throw ParseError(path + ": bad header '" + lines[0] + "'", 1);
    for (std::size_t i = 1; i < lines.size(); ++i) {
        if (lines[i].empty()) continue;
        const auto fields = split_fields(lines[i]);
        if (fields.size() != 2) throw ParseError(path + ": expected 2 fields", i + 1);
        auto it = std::find_if(m.samples.begin(), m.samples.end(),
                               [&](const FundusSample& s) { return s.id == fields[0]; });
        if (it == m.samples.end())
            throw ParseError(path + ": id '" + fields[0] + "' not in the manifest", i + 1);
        Split sp;
        try {
            sp = parse_split(fields[1]);
        } catch (const Error& e) {
            throw ParseError(path + ": " + e.what(), i + 1);
        }
        if (it->excluded && sp != Split::unassigned)
            throw ParseError(path + ": excluded sample '" + fields[0] +
                                 "' cannot carry a split",
                             i + 1);
        it->split = sp;
    }
}

void save_split_sidecar(const DatasetManifest& m, const std::string& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("cannot open " + path + " for writing");
    out << "id,split\n";
    for (const auto& s : m.samples) {
        if (s.split == Split::unassigned) continue;
        out << s.id << "," << split_name(s.split) << "\n";
    }
    if (!out) throw IoError("failed writing " + path);
}

std::vector<std::string> load_exclusion_list(const std::string& path) {
    const auto lines = read_lines(path);
    std::vector<std::string> out;
    for (const auto& line : lines)
        if (!line.empty()) out.push_back(line);
    return out;
}

DatasetManifest apply_exclusions(const DatasetManifest& m, const std::vector<std::string>& ids,
                                 std::size_t* newly_excluded,
                                 std::vector<std::string>* unknown_ids) {
    DatasetManifest out = m;
    std::size_t newly = 0;
    for (const auto& id : ids) {
        auto it = std::find_if(out.samples.begin(), out.samples.end(),
                               [&](const FundusSample& s) { return s.id == id; });
        if (it == out.samples.end()) {
            if (unknown_ids) unknown_ids->push_back(id);
            continue;
        }
        if (!it->excluded) ++newly;
        it->excluded = true;
        it->split = Split::unassigned;
    }
    if (newly_excluded) *newly_excluded = newly;
    return out;
}

DatasetManifest stratified_split(const DatasetManifest& m, const SplitConfig& cfg) {
    if (!(cfg.train_fraction > 0.0 && cfg.train_fraction < 1.0))
        throw ConfigError("split: train fraction must lie strictly inside (0, 1)");

    DatasetManifest out = m;
    out.seed = cfg.seed;

    std::array<std::vector<std::size_t>, kGradeCount> by_grade;
    for (std::size_t i = 0; i < out.samples.size(); ++i) {
        if (out.samples[i].excluded) {
            out.samples[i].split = Split::unassigned;
            continue;
        }
        by_grade[out.samples[i].grade].push_back(i);
    }
    for (std::size_t g = 0; g < kGradeCount; ++g) {
        if (by_grade[g].size() < 2)
            throw ConfigError("split: grade " + std::to_string(g) + " (" + severity_name(g) +
                              ") has " + std::to_string(by_grade[g].size()) +
                              " non-excluded samples, need at least 2");
    }

    // Largest-remainder apportionment of the train share across grades:
    // every grade gets floor(n_g * f), the grades with the largest
    // fractional remainders absorb what rounding dropped.
    std::array<std::size_t, kGradeCount> take{};
    std::array<double, kGradeCount> remainder{};
    double exact_total = 0.0;
    std::size_t floored_total = 0;
    for (std::size_t g = 0; g < kGradeCount; ++g) {
        const double share = static_cast<double>(by_grade[g].size()) * cfg.train_fraction;
        take[g] = static_cast<std::size_t>(share);
        remainder[g] = share - static_cast<double>(take[g]);
        exact_total += share;
        floored_total += take[g];
    }
    std::size_t leftover = static_cast<std::size_t>(std::lround(exact_total)) > floored_total
                               ? static_cast<std::size_t>(std::lround(exact_total)) - floored_total
                               : 0;
    std::array<std::size_t, kGradeCount> grade_order = {0, 1, 2, 3, 4};
    std::stable_sort(grade_order.begin(), grade_order.end(),
                     [&](std::size_t a, std::size_t b) { return remainder[a] > remainder[b]; });
    for (std::size_t k = 0; k < kGradeCount && leftover > 0; ++k, --leftover)
        ++take[grade_order[k]];

    Rng rng(cfg.seed);
    for (std::size_t g = 0; g < kGradeCount; ++g) {
        auto& members = by_grade[g];
        shuffle(members, rng);
        // every grade keeps at least one validation sample
        std::size_t n_train = std::min(take[g], members.size() - 1);
        if (n_train == 0) n_train = 1;
        for (std::size_t k = 0; k < members.size(); ++k)
            out.samples[members[k]].split = k < n_train ? Split::train : Split::val;
    }
    return out;
}

morph::GrayImage synth_fundus(std::size_t grade, Rng& rng, std::size_t width,
                              std::size_t height, SynthStats* stats) {
    if (grade >= kGradeCount) throw ValueError("synth_fundus: grade must lie in 0..4");
    if (width < 64 || height < 64)
        throw ValueError("synth_fundus: minimum size is 64x64");

    morph::GrayImage img(width, height, 3);
    const double w = static_cast<double>(width);
    const double h = static_cast<double>(height);

    const auto put_disc = [&](double cx, double cy, double radius, double r, double g,
                              double b, double edge) {
        const long x0 = std::max(0L, static_cast<long>(std::floor(cx - radius - edge)));
        const long x1 = std::min(static_cast<long>(width) - 1,
                                 static_cast<long>(std::ceil(cx + radius + edge)));
        const long y0 = std::max(0L, static_cast<long>(std::floor(cy - radius - edge)));
        const long y1 = std::min(static_cast<long>(height) - 1,
                                 static_cast<long>(std::ceil(cy + radius + edge)));
        for (long y = y0; y <= y1; ++y) {
            for (long x = x0; x <= x1; ++x) {
                const double dx = static_cast<double>(x) - cx;
                const double dy = static_cast<double>(y) - cy;
                const double d = std::sqrt(dx * dx + dy * dy);
                double alpha = (radius + edge - d) / edge;
                if (alpha <= 0.0) continue;
                if (alpha > 1.0) alpha = 1.0;
                const std::size_t ux = static_cast<std::size_t>(x);
                const std::size_t uy = static_cast<std::size_t>(y);
                img.set(ux, uy, 0, img.get(ux, uy, 0) * (1 - alpha) + r * alpha);
                img.set(ux, uy, 1, img.get(ux, uy, 1) * (1 - alpha) + g * alpha);
                img.set(ux, uy, 2, img.get(ux, uy, 2) * (1 - alpha) + b * alpha);
            }
        }
    };

    // retina disc with slight per-image jitter
    const double cx = w / 2.0 + rng.uniform(-0.02, 0.02) * w;
    const double cy = h / 2.0 + rng.uniform(-0.02, 0.02) * h;
    const double retina_r = 0.44 * std::min(w, h) * (1.0 + rng.uniform(-0.03, 0.03));
    const double shade = rng.uniform(0.85, 1.0);
    put_disc(cx, cy, retina_r, 0.55 * shade, 0.22 * shade, 0.10 * shade, 1.5);

    // optic disc
    const double oa = rng.uniform(0.0, 6.283185307179586);
    const double od = 0.55 * retina_r;
    const double ox = cx + std::cos(oa) * od;
    const double oy = cy + std::sin(oa) * od;
    const double optic_r = 0.16 * retina_r;
    put_disc(ox, oy, optic_r, 0.95, 0.85, 0.55, 1.5);

    // lesions: none for grade 0, otherwise a total count uniform on [2g, 3g]
    std::size_t count = 0;
    if (grade > 0)
        count = 2 * grade + static_cast<std::size_t>(rng.uniform_below(grade + 1));

    SynthStats st;
    st.lesion_count = count;
    for (std::size_t i = 0; i < count; ++i) {
        const bool bright = rng.next_double() < 0.5;
        // uniform position inside 85% of the retina disc, away from the optic disc
        double lx = cx, ly = cy;
        for (int attempt = 0; attempt < 16; ++attempt) {
            const double rr = 0.85 * retina_r * std::sqrt(rng.next_double());
            const double th = rng.uniform(0.0, 6.283185307179586);
            lx = cx + rr * std::cos(th);
            ly = cy + rr * std::sin(th);
            const double ddx = lx - ox, ddy = ly - oy;
            if (std::sqrt(ddx * ddx + ddy * ddy) > optic_r * 1.3) break;
        }
        // lesion size grows with the grade so total lesion area separates
        // the classes even after pooling shrinks the planes
        const double lr =
            (2.0 + 0.8 * static_cast<double>(grade)) * (1.0 + rng.uniform(-0.15, 0.15));
        if (bright) {
            ++st.bright_lesions;
            put_disc(lx, ly, lr, 1.0, 0.95, 0.55, 1.0);
        } else {
            ++st.dark_lesions;
            put_disc(lx, ly, lr, 0.02, 0.0, 0.0, 1.0);
        }
    }
    if (stats) *stats = st;
    return img;
}

DatasetManifest generate_synthetic_dataset(std::size_t per_grade, std::uint64_t seed,
                                           const std::string& dir, std::size_t image_size) {
    if (per_grade < 2)
        throw ValueError("generate_synthetic_dataset: per_grade must be >= 2");
    if (image_size < 64)
        throw ValueError("generate_synthetic_dataset: image size must be >= 64");

    std::error_code ec;
    fs::create_directories(fs::path(dir) / "images", ec);
    if (ec) throw IoError("cannot create " + dir + "/images: " + ec.message());

    DatasetManifest m;
    m.source_tag = "synthetic";
    m.seed = seed;
    std::size_t index = 0;
    for (std::size_t g = 0; g < kGradeCount; ++g) {
        for (std::size_t k = 0; k < per_grade; ++k, ++index) {
            Rng rng(seed ^ static_cast<std::uint64_t>(index));
            const morph::GrayImage img = synth_fundus(g, rng, image_size, image_size);
            char name[64];
            std::snprintf(name, sizeof(name), "g%zu_%04zu.ppm", g, k);
            const fs::path rel = fs::path("images") / name;
            morph::write_ppm((fs::path(dir) / rel).string(), img);
            FundusSample s;
            s.id = std::string("synth_g") + std::to_string(g) + "_" + std::to_string(k);
            s.image_path = (fs::path(dir) / rel).lexically_normal().string();
            s.grade = g;
            m.samples.push_back(std::move(s));
        }
    }
    save_manifest(m, (fs::path(dir) / "manifest.csv").string());
    return m;
}

}  // namespace retina::data
