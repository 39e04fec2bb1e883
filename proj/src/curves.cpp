#include "retina/curves.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

#include "retina/error.hpp"

namespace retina::train {

std::string round_trip_decimal(double v) {
    char buf[64];
    const auto res = std::to_chars(buf, buf + sizeof(buf), v);
    return std::string(buf, res.ptr);
}

namespace {

double parse_double(const std::string& text, const std::string& path, std::size_t line) {
    double v = 0.0;
    const auto res = std::from_chars(text.data(), text.data() + text.size(), v);
    if (res.ec != std::errc{} || res.ptr != text.data() + text.size())
        throw ParseError(path + ": bad number '" + text + "'", line);
    return v;
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

constexpr const char* kCurveHeader =
    "epochs,training_loss,training_accuracy,validation_loss,validation_accuracy";

}  // namespace

void write_curve_csv(const RunReport& report, const std::string& path) {
    if (report.records.empty()) throw UsageError("emit_curves: no epoch records");
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("cannot open " + path + " for writing");
    out << kCurveHeader << "\n";
    for (const auto& r : report.records) {
        out << r.epoch << "," << round_trip_decimal(r.training_loss) << ","
            << round_trip_decimal(r.training_accuracy) << ","
            << round_trip_decimal(r.validation_loss) << ","
            << round_trip_decimal(r.validation_accuracy) << "\n";
    }
    if (!out) throw IoError("failed writing " + path);
}

std::vector<EpochRecord> read_curve_csv(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open " + path);
    std::vector<EpochRecord> records;
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (lineno == 1) {
            if (line != kCurveHeader)
                throw ParseError(path + ": bad header '" + line + "'", 1);
            continue;
        }
        if (line.empty()) continue;
        const auto fields = split_fields(line);
        if (fields.size() != 5) throw ParseError(path + ": expected 5 fields", lineno);
        EpochRecord r;
        r.epoch = static_cast<std::size_t>(parse_double(fields[0], path, lineno));
        r.training_loss = parse_double(fields[1], path, lineno);
        r.training_accuracy = parse_double(fields[2], path, lineno);
        r.validation_loss = parse_double(fields[3], path, lineno);
        r.validation_accuracy = parse_double(fields[4], path, lineno);
        records.push_back(r);
    }
    return records;
}

namespace {

struct Series {
    std::string label;
    std::string color;
    std::vector<double> values;
};

// One chart panel: axes, ticks, polylines, legend.
void render_panel(std::ostream& out, double x0, double y0, double width, double height,
                  const std::string& title, const std::vector<Series>& series,
                  std::size_t epochs) {
    double lo = 0.0, hi = 1.0;
    bool first = true;
    for (const auto& s : series) {
        for (double v : s.values) {
            if (first) {
                lo = hi = v;
                first = false;
            } else {
                lo = std::min(lo, v);
                hi = std::max(hi, v);
            }
        }
    }
    if (hi - lo < 1e-12) {
        hi += 0.5;
        lo -= 0.5;
    }
    const double margin = (hi - lo) * 0.08;
    hi += margin;
    lo -= margin;

    const double plot_x = x0 + 52.0, plot_y = y0 + 28.0;
    const double plot_w = width - 70.0, plot_h = height - 72.0;
    const double x_den = epochs > 1 ? static_cast<double>(epochs - 1) : 1.0;

    const auto sx = [&](std::size_t e) {
        return plot_x + plot_w * static_cast<double>(e) / x_den;
    };
    const auto sy = [&](double v) { return plot_y + plot_h * (hi - v) / (hi - lo); };
    const auto fmt = [](double v) {
        char buf[32];
        std::snprintf(buf, sizeof(buf), "%.3g", v);
        return std::string(buf);
    };

    out << "<text x=\"" << x0 + width / 2 << "\" y=\"" << y0 + 16
        << "\" text-anchor=\"middle\" font-size=\"14\" font-weight=\"bold\">" << title
        << "</text>\n";
    out << "<rect x=\"" << plot_x << "\" y=\"" << plot_y << "\" width=\"" << plot_w
        << "\" height=\"" << plot_h << "\" fill=\"none\" stroke=\"#444\"/>\n";

    for (int t = 0; t <= 4; ++t) {
        const double v = lo + (hi - lo) * t / 4.0;
        const double y = sy(v);
        out << "<line x1=\"" << plot_x - 4 << "\" y1=\"" << y << "\" x2=\"" << plot_x
            << "\" y2=\"" << y << "\" stroke=\"#444\"/>\n";
        out << "<text x=\"" << plot_x - 8 << "\" y=\"" << y + 4
            << "\" text-anchor=\"end\" font-size=\"10\">" << fmt(v) << "</text>\n";
    }
    const std::size_t x_ticks = std::min<std::size_t>(epochs, 6);
    for (std::size_t t = 0; t < x_ticks; ++t) {
        const std::size_t e =
            x_ticks > 1 ? t * (epochs - 1) / (x_ticks - 1) : 0;
        const double x = sx(e);
        out << "<line x1=\"" << x << "\" y1=\"" << plot_y + plot_h << "\" x2=\"" << x
            << "\" y2=\"" << plot_y + plot_h + 4 << "\" stroke=\"#444\"/>\n";
        out << "<text x=\"" << x << "\" y=\"" << plot_y + plot_h + 16
            << "\" text-anchor=\"middle\" font-size=\"10\">" << e << "</text>\n";
    }
    out << "<text x=\"" << plot_x + plot_w / 2 << "\" y=\"" << y0 + height - 24
        << "\" text-anchor=\"middle\" font-size=\"11\">epoch</text>\n";

    double legend_x = plot_x + 8;
    for (const auto& s : series) {
        if (s.values.size() == 1) {
            out << "<circle cx=\"" << sx(0) << "\" cy=\"" << sy(s.values[0])
                << "\" r=\"3\" fill=\"" << s.color << "\"/>\n";
        } else {
            out << "<polyline fill=\"none\" stroke=\"" << s.color
                << "\" stroke-width=\"1.5\" points=\"";
            for (std::size_t e = 0; e < s.values.size(); ++e) {
                if (e) out << " ";
                out << sx(e) << "," << sy(s.values[e]);
            }
            out << "\"/>\n";
        }
        out << "<rect x=\"" << legend_x << "\" y=\"" << y0 + height - 16
            << "\" width=\"10\" height=\"10\" fill=\"" << s.color << "\"/>\n";
        out << "<text x=\"" << legend_x + 14 << "\" y=\"" << y0 + height - 7
            << "\" font-size=\"11\">" << s.label << "</text>\n";
        legend_x += 110;
    }
}

}  // namespace

void write_curve_svg(const RunReport& report, const std::string& path) {
    if (report.records.empty()) throw UsageError("emit_curves: no epoch records");
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("cannot open " + path + " for writing");

    std::vector<double> ta, va, tl, vl;
    for (const auto& r : report.records) {
        ta.push_back(r.training_accuracy);
        va.push_back(r.validation_accuracy);
        tl.push_back(r.training_loss);
        vl.push_back(r.validation_loss);
    }
    const std::size_t epochs = report.records.size();

    out << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"920\" height=\"400\" "
           "viewBox=\"0 0 920 400\" font-family=\"sans-serif\">\n";
    out << "<rect width=\"920\" height=\"400\" fill=\"white\"/>\n";
    render_panel(out, 0, 10, 450, 370, "Accuracy",
                 {Series{"training", "#1f77b4", ta}, Series{"validation", "#d62728", va}},
                 epochs);
    render_panel(out, 460, 10, 450, 370, "Loss",
                 {Series{"training", "#1f77b4", tl}, Series{"validation", "#d62728", vl}},
                 epochs);
    out << "</svg>\n";
    if (!out) throw IoError("failed writing " + path);
}

void emit_curves(const RunReport& report, const std::string& csv_path,
                 const std::string& svg_path) {
    write_curve_csv(report, csv_path);
    write_curve_svg(report, svg_path);
}

}  // namespace retina::train
