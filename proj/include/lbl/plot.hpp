#pragma once

#include <cmath>
#include <fstream>
#include <functional>
#include <limits>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "lbl/linalg.hpp"

namespace lbl {

struct ResultRow {
    double scale = 0.0;
    double snr_db = 0.0;
    std::string model;
    std::optional<double> signal_r2_train, signal_r2_test;
    std::optional<double> noise_r2_train, noise_r2_test;
    std::optional<double> train_s, eval_s;
};

/// Parse the sweep results CSV; malformed rows are rejected with their line
/// number.
inline std::vector<ResultRow> parse_results_csv(std::istream& is) {
    std::vector<ResultRow> rows;
    std::string line;
    std::size_t lineno = 0;
    bool header_seen = false;
    while (std::getline(is, line)) {
        ++lineno;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;
        if (!header_seen) {
            header_seen = true;
            if (line.rfind("scale,", 0) != 0)
                throw std::invalid_argument("results csv line 1: missing header");
            continue;
        }
        std::vector<std::string> f;
        std::stringstream ss(line);
        std::string item;
        while (std::getline(ss, item, ',')) f.push_back(item);
        while (f.size() < 9) f.push_back("");
        if (f.size() != 9)
            throw std::invalid_argument("results csv line " + std::to_string(lineno) +
                                        ": expected 9 fields, got " + std::to_string(f.size()));
        try {
            ResultRow r;
            r.scale = std::stod(f[0]);
            r.snr_db = f[1] == "inf" ? std::numeric_limits<double>::infinity() : std::stod(f[1]);
            r.model = f[2];
            auto opt = [](const std::string& s) -> std::optional<double> {
                if (s.empty()) return std::nullopt;
                return std::stod(s);
            };
            r.signal_r2_train = opt(f[3]);
            r.signal_r2_test = opt(f[4]);
            r.noise_r2_train = opt(f[5]);
            r.noise_r2_test = opt(f[6]);
            r.train_s = opt(f[7]);
            r.eval_s = opt(f[8]);
            if (r.model.empty()) throw std::invalid_argument("empty model field");
            rows.push_back(r);
        } catch (const std::exception& e) {
            throw std::invalid_argument("results csv line " + std::to_string(lineno) + ": " +
                                        e.what());
        }
    }
    return rows;
}

/// Fixed linear axis mapping, recorded as data-* attributes on the SVG root:
///   px = px0 + (x - xmin) / (xmax - xmin) * pw
///   py = py0 + (1 - (y - ymin) / (ymax - ymin)) * ph
struct SvgAxes {
    double xmin = 0.0, xmax = 8.0;
    double ymin = -0.25, ymax = 1.05;
    double px0 = 60.0, py0 = 20.0, pw = 540.0, ph = 340.0;

    double px(double x) const { return px0 + (x - xmin) / (xmax - xmin) * pw; }
    double py(double y) const { return py0 + (1.0 - (y - ymin) / (ymax - ymin)) * ph; }
};

inline const std::vector<std::pair<std::string, std::string>>& plot_palette() {
    static const std::vector<std::pair<std::string, std::string>> palette = {
        {"vae", "#d62728"},   {"ar", "#ff7f0e"},    {"jepa", "#1f77b4"},
        {"vjepa", "#17becf"}, {"bjepa", "#9467bd"},
    };
    return palette;
}

/// Emit one panel as a self-contained SVG: one polyline per model through
/// the present values of the selected metric.
inline std::string render_svg_panel(const std::vector<ResultRow>& rows, const std::string& title,
                                    const std::function<std::optional<double>(const ResultRow&)>& metric) {
    check(!rows.empty(), "render_svg_panel: no data rows");
    SvgAxes ax;
    ax.xmin = rows.front().scale;
    ax.xmax = rows.front().scale;
    for (const auto& r : rows) {
        ax.xmin = std::min(ax.xmin, r.scale);
        ax.xmax = std::max(ax.xmax, r.scale);
    }
    if (ax.xmax == ax.xmin) ax.xmax = ax.xmin + 1.0;

    std::ostringstream os;
    os.precision(10);
    os << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"640\" height=\"420\""
       << " data-xmin=\"" << ax.xmin << "\" data-xmax=\"" << ax.xmax << "\""
       << " data-ymin=\"" << ax.ymin << "\" data-ymax=\"" << ax.ymax << "\""
       << " data-px0=\"" << ax.px0 << "\" data-py0=\"" << ax.py0 << "\""
       << " data-pw=\"" << ax.pw << "\" data-ph=\"" << ax.ph << "\">\n";
    os << "  <rect x=\"0\" y=\"0\" width=\"640\" height=\"420\" fill=\"white\"/>\n";
    os << "  <text x=\"320\" y=\"14\" text-anchor=\"middle\" font-size=\"13\">" << title
       << "</text>\n";

    // axes and ticks
    os << "  <line x1=\"" << ax.px0 << "\" y1=\"" << ax.py0 + ax.ph << "\" x2=\"" << ax.px0 + ax.pw
       << "\" y2=\"" << ax.py0 + ax.ph << "\" stroke=\"black\"/>\n";
    os << "  <line x1=\"" << ax.px0 << "\" y1=\"" << ax.py0 << "\" x2=\"" << ax.px0 << "\" y2=\""
       << ax.py0 + ax.ph << "\" stroke=\"black\"/>\n";
    for (double x = std::ceil(ax.xmin); x <= ax.xmax + 1e-9; x += 1.0) {
        os << "  <line x1=\"" << ax.px(x) << "\" y1=\"" << ax.py0 + ax.ph << "\" x2=\"" << ax.px(x)
           << "\" y2=\"" << ax.py0 + ax.ph + 5 << "\" stroke=\"black\"/>\n";
        os << "  <text x=\"" << ax.px(x) << "\" y=\"" << ax.py0 + ax.ph + 18
           << "\" text-anchor=\"middle\" font-size=\"11\">" << x << "</text>\n";
    }
    for (double y = -0.2; y <= 1.001; y += 0.2) {
        os << "  <line x1=\"" << ax.px0 - 5 << "\" y1=\"" << ax.py(y) << "\" x2=\"" << ax.px0
           << "\" y2=\"" << ax.py(y) << "\" stroke=\"black\"/>\n";
        std::ostringstream lbl;
        lbl.precision(2);
        lbl << y;
        os << "  <text x=\"" << ax.px0 - 8 << "\" y=\"" << ax.py(y) + 4
           << "\" text-anchor=\"end\" font-size=\"11\">" << lbl.str() << "</text>\n";
    }
    os << "  <text x=\"" << ax.px0 + ax.pw / 2 << "\" y=\"412\" text-anchor=\"middle\""
       << " font-size=\"12\">noise scale</text>\n";

    double ly = ax.py0 + 10;
    for (const auto& [model, color] : plot_palette()) {
        std::ostringstream pts;
        pts.precision(10);
        std::size_t n_pts = 0;
        for (const auto& r : rows) {
            if (r.model != model) continue;
            const auto v = metric(r);
            if (!v) continue;
            pts << (n_pts ? " " : "") << ax.px(r.scale) << "," << ax.py(*v);
            ++n_pts;
        }
        if (n_pts == 0) continue;
        os << "  <polyline data-model=\"" << model << "\" fill=\"none\" stroke=\"" << color
           << "\" stroke-width=\"1.6\" points=\"" << pts.str() << "\"/>\n";
        os << "  <text x=\"" << ax.px0 + ax.pw - 70 << "\" y=\"" << ly << "\" font-size=\"12\""
           << " fill=\"" << color << "\">" << model << "</text>\n";
        ly += 16;
    }
    os << "</svg>\n";
    return os.str();
}

/// Write the four standard panels; returns the emitted file names.
inline std::vector<std::string> write_plots(const std::vector<ResultRow>& rows,
                                            const std::string& out_dir) {
    check(!rows.empty(), "write_plots: empty results");
    struct Panel {
        const char* file;
        const char* title;
        std::function<std::optional<double>(const ResultRow&)> metric;
    };
    const std::vector<Panel> panels = {
        {"signal_r2_train.svg", "signal R2 (train)",
         [](const ResultRow& r) { return r.signal_r2_train; }},
        {"signal_r2_test.svg", "signal R2 (test)",
         [](const ResultRow& r) { return r.signal_r2_test; }},
        {"noise_r2_train.svg", "noise R2 (train)",
         [](const ResultRow& r) { return r.noise_r2_train; }},
        {"noise_r2_test.svg", "noise R2 (test)",
         [](const ResultRow& r) { return r.noise_r2_test; }},
    };
    std::vector<std::string> files;
    for (const auto& p : panels) {
        const std::string svg = render_svg_panel(rows, p.title, p.metric);
        const std::string path = out_dir + "/" + p.file;
        std::ofstream os(path);
        check(static_cast<bool>(os), "write_plots: cannot open " + path);
        os << svg;
        files.push_back(path);
    }
    return files;
}

}  // namespace lbl
