#include "infuse/svg.hpp"

#include "infuse/text.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>
#include <sstream>

namespace infuse::svg {

namespace {

constexpr double kWidth = 640, kHeight = 420;
constexpr double kLeft = 60, kRight = 160, kTop = 40, kBottom = 50;
constexpr std::array<const char*, 8> kPalette = {"#1f77b4", "#d62728", "#2ca02c", "#ff7f0e",
                                                 "#9467bd", "#8c564b", "#e377c2", "#7f7f7f"};

std::string escape(const std::string& s) {
    std::string out;
    for (char c : s) {
        switch (c) {
        case '<': out += "&lt;"; break;
        case '>': out += "&gt;"; break;
        case '&': out += "&amp;"; break;
        default: out += c;
        }
    }
    return out;
}

std::string num(double v) { return text::fixed(v, 2); }

void header(std::ostringstream& out, const std::string& title) {
    out << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << kWidth << "\" height=\"" << kHeight
        << "\" font-family=\"sans-serif\" font-size=\"12\">\n"
        << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n"
        << "<text x=\"" << kWidth / 2 << "\" y=\"22\" text-anchor=\"middle\" font-size=\"15\">" << escape(title)
        << "</text>\n";
}

} // namespace

namespace {

std::string plot(const std::string& title, const std::string& x_label, const std::string& y_label,
                 const std::vector<Series>& series, bool lines) {
    double x0 = std::numeric_limits<double>::infinity(), x1 = -x0, y0 = x0, y1 = -x0;
    for (const auto& s : series) {
        for (auto [x, y] : s.points) {
            if (!std::isfinite(x) || !std::isfinite(y)) continue;
            x0 = std::min(x0, x), x1 = std::max(x1, x), y0 = std::min(y0, y), y1 = std::max(y1, y);
        }
    }
    if (!(x0 < x1)) x0 = 0, x1 = (std::isfinite(x1) && x1 > 0) ? x1 : 1;
    if (!(y0 < y1)) y0 = 0, y1 = (std::isfinite(y1) && y1 > 0) ? y1 : 1;
    const double pw = kWidth - kLeft - kRight, ph = kHeight - kTop - kBottom;
    auto px = [&](double x) { return kLeft + (x - x0) / (x1 - x0) * pw; };
    auto py = [&](double y) { return kTop + ph - (y - y0) / (y1 - y0) * ph; };

    std::ostringstream out;
    header(out, title);
    out << "<rect x=\"" << kLeft << "\" y=\"" << kTop << "\" width=\"" << pw << "\" height=\"" << ph
        << "\" fill=\"none\" stroke=\"black\"/>\n";
    for (int t = 0; t <= 4; ++t) {
        const double fx = x0 + (x1 - x0) * t / 4.0, fy = y0 + (y1 - y0) * t / 4.0;
        out << "<text x=\"" << num(px(fx)) << "\" y=\"" << kTop + ph + 16 << "\" text-anchor=\"middle\">"
            << text::fixed(fx, 3) << "</text>\n";
        out << "<text x=\"" << kLeft - 6 << "\" y=\"" << num(py(fy) + 4) << "\" text-anchor=\"end\">"
            << text::fixed(fy, 3) << "</text>\n";
    }
    out << "<text x=\"" << kLeft + pw / 2 << "\" y=\"" << kHeight - 12 << "\" text-anchor=\"middle\">"
        << escape(x_label) << "</text>\n";
    out << "<text x=\"16\" y=\"" << kTop + ph / 2 << "\" text-anchor=\"middle\" transform=\"rotate(-90 16 "
        << kTop + ph / 2 << ")\">" << escape(y_label) << "</text>\n";
    for (std::size_t i = 0; i < series.size(); ++i) {
        const char* color = kPalette[i % kPalette.size()];
        if (lines) {
            out << "<polyline fill=\"none\" stroke=\"" << color << "\" stroke-width=\"1.5\" points=\"";
            for (auto [x, y] : series[i].points) {
                if (std::isfinite(x) && std::isfinite(y)) out << num(px(x)) << "," << num(py(y)) << " ";
            }
            out << "\"/>\n";
        } else {
            out << "<g fill=\"" << color << "\" fill-opacity=\"0.5\">\n";
            for (auto [x, y] : series[i].points) {
                if (std::isfinite(x) && std::isfinite(y)) {
                    out << "<circle cx=\"" << num(px(x)) << "\" cy=\"" << num(py(y)) << "\" r=\"1.6\"/>\n";
                }
            }
            out << "</g>\n";
        }
        const double ly = kTop + 14 + 18.0 * static_cast<double>(i);
        out << "<line x1=\"" << kWidth - kRight + 10 << "\" y1=\"" << ly - 4 << "\" x2=\"" << kWidth - kRight + 30
            << "\" y2=\"" << ly - 4 << "\" stroke=\"" << color << "\" stroke-width=\"2\"/>\n";
        out << "<text x=\"" << kWidth - kRight + 36 << "\" y=\"" << ly << "\">" << escape(series[i].name) << "</text>\n";
    }
    out << "</svg>\n";
    return out.str();
}

} // namespace

std::string line_chart(const std::string& title, const std::string& x_label, const std::string& y_label,
                       const std::vector<Series>& series) {
    return plot(title, x_label, y_label, series, true);
}

std::string scatter_chart(const std::string& title, const std::string& x_label, const std::string& y_label,
                          const std::vector<Series>& series) {
    return plot(title, x_label, y_label, series, false);
}

std::string bar_chart(const std::string& title, const std::vector<std::pair<std::string, double>>& bars, double y_max) {
    const double pw = kWidth - kLeft - 20, ph = kHeight - kTop - kBottom - 30;
    std::ostringstream out;
    header(out, title);
    const double slot = bars.empty() ? pw : pw / static_cast<double>(bars.size());
    for (std::size_t i = 0; i < bars.size(); ++i) {
        const double v = std::clamp(bars[i].second / y_max, 0.0, 1.0);
        const double x = kLeft + slot * static_cast<double>(i) + slot * 0.15;
        const double h = v * ph;
        out << "<rect x=\"" << num(x) << "\" y=\"" << num(kTop + ph - h) << "\" width=\"" << num(slot * 0.7)
            << "\" height=\"" << num(h) << "\" fill=\"" << kPalette[0] << "\"/>\n";
        out << "<text x=\"" << num(x + slot * 0.35) << "\" y=\"" << num(kTop + ph - h - 4)
            << "\" text-anchor=\"middle\" font-size=\"10\">" << text::fixed(bars[i].second, 2) << "</text>\n";
        const double lx = x + slot * 0.35, ly = kTop + ph + 12;
        out << "<text x=\"" << num(lx) << "\" y=\"" << num(ly) << "\" text-anchor=\"end\" font-size=\"10\" transform=\"rotate(-40 "
            << num(lx) << " " << num(ly) << ")\">" << escape(bars[i].first) << "</text>\n";
    }
    out << "<line x1=\"" << kLeft << "\" y1=\"" << kTop + ph << "\" x2=\"" << kLeft + pw << "\" y2=\"" << kTop + ph
        << "\" stroke=\"black\"/>\n";
    out << "</svg>\n";
    return out.str();
}

} // namespace infuse::svg
