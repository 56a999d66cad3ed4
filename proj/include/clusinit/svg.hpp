#pragma once

#include <algorithm>
#include <cmath>
#include <sstream>
#include <string>
#include <vector>

namespace clusinit::svg {

struct Series {
    std::string name;
    std::vector<double> xs;
    std::vector<double> ys;
};

inline constexpr const char* kPalette[] = {"#1f77b4", "#ff7f0e", "#2ca02c", "#d62728", "#9467bd", "#8c564b", "#e377c2", "#7f7f7f"};

inline std::string escape(const std::string& s) {
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

inline std::string num(double v) {
    std::ostringstream s;
    s.precision(4);
    s << v;
    return s.str();
}

namespace detail {

constexpr double kW = 640, kH = 400, kLeft = 70, kRight = 20, kTop = 40, kBottom = 70;

inline void header(std::ostringstream& out, const std::string& title, const std::string& y_label) {
    out << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << kW << "\" height=\"" << kH << "\" font-family=\"sans-serif\" font-size=\"11\">\n"
        << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n"
        << "<text x=\"" << kW / 2 << "\" y=\"20\" text-anchor=\"middle\" font-size=\"14\">" << escape(title) << "</text>\n"
        << "<text transform=\"translate(15," << kH / 2 << ") rotate(-90)\" text-anchor=\"middle\">" << escape(y_label) << "</text>\n"
        << "<line x1=\"" << kLeft << "\" y1=\"" << kH - kBottom << "\" x2=\"" << kW - kRight << "\" y2=\"" << kH - kBottom << "\" stroke=\"black\"/>\n"
        << "<line x1=\"" << kLeft << "\" y1=\"" << kTop << "\" x2=\"" << kLeft << "\" y2=\"" << kH - kBottom << "\" stroke=\"black\"/>\n";
}

inline void y_ticks(std::ostringstream& out, double lo, double hi) {
    for (int t = 0; t <= 4; ++t) {
        const double v = lo + (hi - lo) * t / 4.0;
        const double y = kH - kBottom - (kH - kTop - kBottom) * t / 4.0;
        out << "<text x=\"" << kLeft - 5 << "\" y=\"" << y + 4 << "\" text-anchor=\"end\">" << num(v) << "</text>\n";
    }
}

inline double nice_max(double v) { return v > 0.0 && std::isfinite(v) ? v * 1.05 : 1.0; }

}  // namespace detail

/// Vertical bars, one per label.
inline std::string bar_chart(const std::string& title, const std::string& y_label, const std::vector<std::string>& labels,
                             const std::vector<double>& values) {
    using namespace detail;
    std::ostringstream out;
    header(out, title, y_label);
    double top = 0.0;
    for (double v : values)
        if (std::isfinite(v)) top = std::max(top, v);
    top = nice_max(top);
    y_ticks(out, 0.0, top);
    const double plot_w = kW - kLeft - kRight, plot_h = kH - kTop - kBottom;
    const double slot = labels.empty() ? plot_w : plot_w / static_cast<double>(labels.size());
    for (std::size_t i = 0; i < labels.size() && i < values.size(); ++i) {
        const double v = std::isfinite(values[i]) ? std::max(values[i], 0.0) : 0.0;
        const double h = plot_h * v / top;
        const double x = kLeft + slot * static_cast<double>(i) + slot * 0.15;
        out << "<rect x=\"" << x << "\" y=\"" << kH - kBottom - h << "\" width=\"" << slot * 0.7 << "\" height=\"" << h
            << "\" fill=\"" << kPalette[i % 8] << "\"><title>" << escape(labels[i]) << ": " << num(values[i]) << "</title></rect>\n";
        out << "<text transform=\"translate(" << x + slot * 0.35 << "," << kH - kBottom + 12 << ") rotate(30)\">" << escape(labels[i])
            << "</text>\n";
    }
    out << "</svg>\n";
    return out.str();
}

/// Polylines with markers; x and y axes scaled to the data.
inline std::string line_chart(const std::string& title, const std::string& x_label, const std::string& y_label,
                              const std::vector<Series>& series) {
    using namespace detail;
    std::ostringstream out;
    header(out, title, y_label);
    double x_lo = std::numeric_limits<double>::infinity(), x_hi = -x_lo, y_hi = 0.0;
    for (const auto& s : series) {
        for (double x : s.xs) x_lo = std::min(x_lo, x), x_hi = std::max(x_hi, x);
        for (double y : s.ys)
            if (std::isfinite(y)) y_hi = std::max(y_hi, y);
    }
    if (!(x_lo < x_hi)) x_lo = 0.0, x_hi = std::isfinite(x_hi) && x_hi > 0.0 ? x_hi : 1.0;
    y_hi = nice_max(y_hi);
    y_ticks(out, 0.0, y_hi);
    const double plot_w = kW - kLeft - kRight, plot_h = kH - kTop - kBottom;
    auto px = [&](double x) { return kLeft + plot_w * (x - x_lo) / (x_hi - x_lo); };
    auto py = [&](double y) { return kH - kBottom - plot_h * y / y_hi; };
    for (int t = 0; t <= 4; ++t) {
        const double v = x_lo + (x_hi - x_lo) * t / 4.0;
        out << "<text x=\"" << px(v) << "\" y=\"" << kH - kBottom + 15 << "\" text-anchor=\"middle\">" << num(v) << "</text>\n";
    }
    out << "<text x=\"" << kLeft + plot_w / 2 << "\" y=\"" << kH - 30 << "\" text-anchor=\"middle\">" << escape(x_label) << "</text>\n";
    for (std::size_t s = 0; s < series.size(); ++s) {
        const auto& ser = series[s];
        const char* color = kPalette[s % 8];
        out << "<polyline fill=\"none\" stroke=\"" << color << "\" stroke-width=\"2\" points=\"";
        for (std::size_t i = 0; i < ser.xs.size() && i < ser.ys.size(); ++i) out << px(ser.xs[i]) << ',' << py(ser.ys[i]) << ' ';
        out << "\"/>\n";
        for (std::size_t i = 0; i < ser.xs.size() && i < ser.ys.size(); ++i)
            out << "<circle cx=\"" << px(ser.xs[i]) << "\" cy=\"" << py(ser.ys[i]) << "\" r=\"3\" fill=\"" << color << "\"/>\n";
        out << "<text x=\"" << kLeft + 10 + 150 * static_cast<double>(s) << "\" y=\"" << kH - 10 << "\" fill=\"" << color << "\">"
            << escape(ser.name) << "</text>\n";
    }
    out << "</svg>\n";
    return out.str();
}

}  // namespace clusinit::svg
