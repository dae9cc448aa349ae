#include "fairdca/svg.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>

#include "fairdca/common.hpp"

namespace fairdca::svg {

namespace {

constexpr double kWidth = 760.0;
constexpr double kHeight = 480.0;
constexpr double kLeft = 78.0;
constexpr double kRight = 24.0;
constexpr double kTop = 46.0;
constexpr double kBottom = 58.0;

const char* kPalette[] = {"#1f77b4", "#d62728", "#2ca02c", "#9467bd",
                          "#ff7f0e", "#8c564b", "#17becf", "#7f7f7f"};
constexpr int kPaletteSize = 8;

std::string num(double v) { return format_sig(v, 6); }

struct Range {
    double lo = std::numeric_limits<double>::infinity();
    double hi = -std::numeric_limits<double>::infinity();

    void add(double v) {
        if (!std::isfinite(v)) return;
        lo = std::min(lo, v);
        hi = std::max(hi, v);
    }
    void pad() {
        if (!(lo <= hi)) {
            lo = 0.0;
            hi = 1.0;
        }
        if (lo == hi) {
            lo -= 0.5;
            hi += 0.5;
        }
        const double margin = 0.05 * (hi - lo);
        lo -= margin;
        hi += margin;
    }
};

// round tick spacing to 1/2/5 * 10^k
std::vector<double> ticks(const Range& r, int target = 6) {
    const double raw = (r.hi - r.lo) / target;
    const double mag = std::pow(10.0, std::floor(std::log10(raw)));
    double step = mag;
    for (const double m : {1.0, 2.0, 5.0, 10.0}) {
        if (m * mag >= raw) {
            step = m * mag;
            break;
        }
    }
    std::vector<double> out;
    for (double v = std::ceil(r.lo / step) * step; v <= r.hi + 1e-12 * step;
         v += step) {
        out.push_back(std::abs(v) < 1e-12 * step ? 0.0 : v);
    }
    return out;
}

class Canvas {
public:
    Canvas(const std::string& path, const std::string& title,
           const std::string& x_label, const std::string& y_label,
           Range xr, Range yr)
        : out_(path), xr_(xr), yr_(yr) {
        if (!out_) throw Error("svg: cannot open '" + path + "'");
        out_ << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << kWidth
             << "\" height=\"" << kHeight << "\" viewBox=\"0 0 " << kWidth
             << " " << kHeight << "\">\n";
        out_ << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
        text(kWidth / 2, 24, title, 16, "middle", true);
        text(kLeft + plot_width() / 2, kHeight - 14, x_label, 13, "middle");
        out_ << "<text x=\"20\" y=\"" << (kTop + plot_height() / 2)
             << "\" font-size=\"13\" text-anchor=\"middle\" "
                "font-family=\"sans-serif\" transform=\"rotate(-90 20 "
             << (kTop + plot_height() / 2) << ")\">" << escape(y_label)
             << "</text>\n";
        axes();
    }

    ~Canvas() { out_ << "</svg>\n"; }

    double px(double x) const {
        return kLeft + (x - xr_.lo) / (xr_.hi - xr_.lo) * plot_width();
    }
    double py(double y) const {
        return kTop + (yr_.hi - y) / (yr_.hi - yr_.lo) * plot_height();
    }

    void polyline(const std::vector<double>& xs, const std::vector<double>& ys,
                  const std::string& color, bool dashed) {
        out_ << "<polyline fill=\"none\" stroke=\"" << color
             << "\" stroke-width=\"1.8\"";
        if (dashed) out_ << " stroke-dasharray=\"6 4\"";
        out_ << " points=\"";
        for (std::size_t i = 0; i < xs.size(); ++i) {
            out_ << num(px(xs[i])) << "," << num(py(ys[i])) << " ";
        }
        out_ << "\"/>\n";
    }

    void circle(double x, double y, double radius, const std::string& color) {
        out_ << "<circle cx=\"" << num(px(x)) << "\" cy=\"" << num(py(y))
             << "\" r=\"" << radius << "\" fill=\"" << color << "\"/>\n";
    }

    void rect_raw(double x, double y, double w, double h,
                  const std::string& color) {
        out_ << "<rect x=\"" << num(x) << "\" y=\"" << num(y) << "\" width=\""
             << num(w) << "\" height=\"" << num(h) << "\" fill=\"" << color
             << "\"/>\n";
    }

    void vline(double x, const std::string& color, const std::string& label) {
        out_ << "<line x1=\"" << num(px(x)) << "\" y1=\"" << kTop << "\" x2=\""
             << num(px(x)) << "\" y2=\"" << (kTop + plot_height())
             << "\" stroke=\"" << color
             << "\" stroke-width=\"1.5\" stroke-dasharray=\"3 3\"/>\n";
        if (!label.empty()) {
            text(px(x) + 4, kTop + 14, label, 11, "start");
        }
    }

    void legend(const std::vector<std::pair<std::string, std::string>>& entries,
                const std::vector<bool>& dashed) {
        double y = kTop + 10.0;
        const double x = kLeft + plot_width() - 170.0;
        for (std::size_t i = 0; i < entries.size(); ++i) {
            out_ << "<line x1=\"" << x << "\" y1=\"" << y << "\" x2=\""
                 << (x + 26) << "\" y2=\"" << y << "\" stroke=\""
                 << entries[i].second << "\" stroke-width=\"2\"";
            if (i < dashed.size() && dashed[i]) {
                out_ << " stroke-dasharray=\"6 4\"";
            }
            out_ << "/>\n";
            text(x + 32, y + 4, entries[i].first, 12, "start");
            y += 18.0;
        }
    }

    void text(double x, double y, const std::string& content, int size,
              const std::string& anchor, bool bold = false) {
        out_ << "<text x=\"" << num(x) << "\" y=\"" << num(y)
             << "\" font-size=\"" << size << "\" text-anchor=\"" << anchor
             << "\" font-family=\"sans-serif\"";
        if (bold) out_ << " font-weight=\"bold\"";
        out_ << ">" << escape(content) << "</text>\n";
    }

    static double plot_width() { return kWidth - kLeft - kRight; }
    static double plot_height() { return kHeight - kTop - kBottom; }

private:
    static std::string escape(const std::string& s) {
        std::string out;
        for (const char c : s) {
            if (c == '&') out += "&amp;";
            else if (c == '<') out += "&lt;";
            else if (c == '>') out += "&gt;";
            else out.push_back(c);
        }
        return out;
    }

    void axes() {
        const double x0 = kLeft, y0 = kTop + plot_height();
        out_ << "<line x1=\"" << x0 << "\" y1=\"" << y0 << "\" x2=\""
             << (kLeft + plot_width()) << "\" y2=\"" << y0
             << "\" stroke=\"black\"/>\n";
        out_ << "<line x1=\"" << x0 << "\" y1=\"" << kTop << "\" x2=\"" << x0
             << "\" y2=\"" << y0 << "\" stroke=\"black\"/>\n";
        for (const double t : ticks(xr_)) {
            const double x = px(t);
            out_ << "<line x1=\"" << num(x) << "\" y1=\"" << y0 << "\" x2=\""
                 << num(x) << "\" y2=\"" << (y0 + 5) << "\" stroke=\"black\"/>\n";
            text(x, y0 + 20, format_sig(t, 4), 11, "middle");
        }
        for (const double t : ticks(yr_)) {
            const double y = py(t);
            out_ << "<line x1=\"" << (x0 - 5) << "\" y1=\"" << num(y)
                 << "\" x2=\"" << x0 << "\" y2=\"" << num(y)
                 << "\" stroke=\"black\"/>\n";
            out_ << "<line x1=\"" << x0 << "\" y1=\"" << num(y) << "\" x2=\""
                 << (kLeft + plot_width()) << "\" y2=\"" << num(y)
                 << "\" stroke=\"#e0e0e0\"/>\n";
            text(x0 - 8, y + 4, format_sig(t, 4), 11, "end");
        }
    }

    std::ofstream out_;
    Range xr_, yr_;
};

}  // namespace

void write_line_chart(const std::string& path, const std::string& title,
                      const std::string& x_label, const std::string& y_label,
                      const std::vector<Series>& series,
                      std::optional<double> vline) {
    Range xr, yr;
    for (const auto& s : series) {
        for (const double v : s.x) xr.add(v);
        for (const double v : s.y) yr.add(v);
    }
    if (vline) xr.add(*vline);
    xr.pad();
    yr.pad();
    Canvas canvas(path, title, x_label, y_label, xr, yr);
    std::vector<std::pair<std::string, std::string>> legend;
    std::vector<bool> dashed;
    for (std::size_t i = 0; i < series.size(); ++i) {
        const std::string color = kPalette[i % kPaletteSize];
        canvas.polyline(series[i].x, series[i].y, color, series[i].dashed);
        legend.emplace_back(series[i].label, color);
        dashed.push_back(series[i].dashed);
    }
    if (vline) canvas.vline(*vline, "#ff7f0e", "t* = " + format_sig(*vline, 4));
    canvas.legend(legend, dashed);
}

void write_bar_chart(const std::string& path, const std::string& title,
                     const std::string& y_label,
                     const std::vector<std::string>& categories,
                     const std::vector<std::string>& series_labels,
                     const std::vector<std::vector<double>>& values,
                     double baseline) {
    if (values.size() != series_labels.size()) {
        throw Error("write_bar_chart: series/label mismatch");
    }
    Range yr;
    yr.add(baseline);
    for (const auto& row : values) {
        if (row.size() != categories.size()) {
            throw Error("write_bar_chart: value/category mismatch");
        }
        for (const double v : row) yr.add(v);
    }
    yr.pad();
    Range xr;
    xr.lo = 0.0;
    xr.hi = static_cast<double>(categories.size());
    Canvas canvas(path, title, "", y_label, xr, yr);

    const double cluster = 1.0;
    const double inner = 0.8;
    const double bar =
        inner / std::max<std::size_t>(1, series_labels.size());
    std::vector<std::pair<std::string, std::string>> legend;
    for (std::size_t s = 0; s < series_labels.size(); ++s) {
        const std::string color = kPalette[s % kPaletteSize];
        legend.emplace_back(series_labels[s], color);
        for (std::size_t c = 0; c < categories.size(); ++c) {
            const double x0 = static_cast<double>(c) * cluster +
                              (cluster - inner) / 2.0 + bar * static_cast<double>(s);
            const double top = std::max(values[s][c], baseline);
            const double bottom = std::min(values[s][c], baseline);
            canvas.rect_raw(canvas.px(x0), canvas.py(top),
                            canvas.px(x0 + bar * 0.92) - canvas.px(x0),
                            canvas.py(bottom) - canvas.py(top), color);
        }
    }
    for (std::size_t c = 0; c < categories.size(); ++c) {
        canvas.text(canvas.px(static_cast<double>(c) + 0.5),
                    kTop + Canvas::plot_height() + 20, categories[c], 11,
                    "middle");
    }
    canvas.legend(legend, std::vector<bool>(series_labels.size(), false));
}

void write_scatter(const std::string& path, const std::string& title,
                   const std::string& x_label, const std::string& y_label,
                   const std::vector<Series>& series,
                   const std::vector<Marker>& markers) {
    Range xr, yr;
    for (const auto& s : series) {
        for (const double v : s.x) xr.add(v);
        for (const double v : s.y) yr.add(v);
    }
    for (const auto& m : markers) {
        xr.add(m.x);
        yr.add(m.y);
    }
    xr.pad();
    yr.pad();
    Canvas canvas(path, title, x_label, y_label, xr, yr);
    std::vector<std::pair<std::string, std::string>> legend;
    for (std::size_t i = 0; i < series.size(); ++i) {
        const std::string color = kPalette[i % kPaletteSize];
        legend.emplace_back(series[i].label, color);
        for (std::size_t k = 0; k < series[i].x.size(); ++k) {
            canvas.circle(series[i].x[k], series[i].y[k], 3.4, color);
        }
    }
    for (const auto& m : markers) {
        canvas.circle(m.x, m.y, 5.0, "#000000");
        canvas.text(canvas.px(m.x) + 8, canvas.py(m.y) - 6, m.label, 11, "start");
    }
    canvas.legend(legend, std::vector<bool>(series.size(), false));
}

}  // namespace fairdca::svg
