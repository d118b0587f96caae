#include <algorithm>
#include <limits>
#include <sstream>

#include "gen1s/analysis.hpp"

namespace gen1s {

namespace {

constexpr double kWidth = 640, kHeight = 480, kMargin = 48;
constexpr const char* kPalette[] = {"#1f77b4", "#ff7f0e", "#2ca02c", "#d62728",
                                    "#9467bd", "#8c564b", "#e377c2", "#7f7f7f"};

std::string escape(const std::string& s) {
    std::string out;
    for (char c : s) {
        switch (c) {
            case '<': out += "&lt;"; break;
            case '>': out += "&gt;"; break;
            case '&': out += "&amp;"; break;
            case '"': out += "&quot;"; break;
            default: out += c;
        }
    }
    return out;
}

struct Frame {
    double x0, x1, y0, y1;
    double px(double x) const { return kMargin + (x - x0) / (x1 - x0) * (kWidth - 2 * kMargin); }
    double py(double y) const { return kHeight - kMargin - (y - y0) / (y1 - y0) * (kHeight - 2 * kMargin); }
};

void open(std::ostringstream& out, const std::string& title) {
    out << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << kWidth << "\" height=\"" << kHeight << "\">\n"
        << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n"
        << "<text x=\"" << kWidth / 2 << "\" y=\"24\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"14\">"
        << escape(title) << "</text>\n"
        << "<rect x=\"" << kMargin << "\" y=\"" << kMargin << "\" width=\"" << kWidth - 2 * kMargin << "\" height=\""
        << kHeight - 2 * kMargin << "\" fill=\"none\" stroke=\"#444\"/>\n";
}

void legend(std::ostringstream& out, std::size_t i, const std::string& label) {
    out << "<text x=\"" << kWidth - kMargin - 4 << "\" y=\"" << kMargin + 16 + 14 * static_cast<double>(i)
        << "\" text-anchor=\"end\" font-family=\"sans-serif\" font-size=\"11\" fill=\"" << kPalette[i % 8] << "\">"
        << escape(label) << "</text>\n";
}

}  // namespace

std::string svg_scatter(const std::vector<ScatterSeries>& series, const std::string& title) {
    Frame f{std::numeric_limits<double>::infinity(), -std::numeric_limits<double>::infinity(),
            std::numeric_limits<double>::infinity(), -std::numeric_limits<double>::infinity()};
    for (const auto& s : series) {
        if (s.points.cols() == 0) continue;
        f.x0 = std::min(f.x0, s.points.row(0).minCoeff());
        f.x1 = std::max(f.x1, s.points.row(0).maxCoeff());
        f.y0 = std::min(f.y0, s.points.row(1).minCoeff());
        f.y1 = std::max(f.y1, s.points.row(1).maxCoeff());
    }
    if (!(f.x1 > f.x0)) f = {-1, 1, f.y0, f.y1};
    if (!(f.y1 > f.y0)) f = {f.x0, f.x1, -1, 1};

    std::ostringstream out;
    out.precision(6);
    open(out, title);
    for (std::size_t i = 0; i < series.size(); ++i) {
        for (Eigen::Index j = 0; j < series[i].points.cols(); ++j)
            out << "<circle cx=\"" << f.px(series[i].points(0, j)) << "\" cy=\"" << f.py(series[i].points(1, j))
                << "\" r=\"2\" fill=\"" << kPalette[i % 8] << "\" fill-opacity=\"0.6\"/>\n";
        legend(out, i, series[i].label);
    }
    out << "</svg>\n";
    return out.str();
}

std::string svg_histograms(const std::vector<std::pair<std::string, Histogram>>& hists, const std::string& title) {
    double x0 = std::numeric_limits<double>::infinity(), x1 = -x0, ymax = 0;
    for (const auto& [label, h] : hists) {
        x0 = std::min(x0, h.lo);
        x1 = std::max(x1, h.hi);
        const double total = static_cast<double>(std::max<std::size_t>(h.total(), 1));
        for (auto c : h.counts) ymax = std::max(ymax, static_cast<double>(c) / total);
    }
    if (!(x1 > x0)) x0 = 0, x1 = 1;
    if (ymax <= 0) ymax = 1;
    const Frame f{x0, x1, 0, ymax};

    std::ostringstream out;
    out.precision(6);
    open(out, title);
    for (std::size_t i = 0; i < hists.size(); ++i) {
        const Histogram& h = hists[i].second;
        const double total = static_cast<double>(std::max<std::size_t>(h.total(), 1));
        for (std::size_t b = 0; b < h.counts.size(); ++b) {
            const double lo = h.lo + static_cast<double>(b) * h.bin_width();
            const double top = f.py(static_cast<double>(h.counts[b]) / total);
            out << "<rect x=\"" << f.px(lo) << "\" y=\"" << top << "\" width=\"" << f.px(lo + h.bin_width()) - f.px(lo)
                << "\" height=\"" << f.py(0) - top << "\" fill=\"" << kPalette[i % 8] << "\" fill-opacity=\"0.45\"/>\n";
        }
        legend(out, i, hists[i].first);
    }
    out << "</svg>\n";
    return out.str();
}

}  // namespace gen1s
