#include "duomic/report_svg.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

namespace duomic {

namespace {

constexpr int kW = 520, kH = 420;
constexpr int kLeft = 64, kRight = 24, kTop = 48, kBottom = 56;
const char* kPalette[] = {"#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b"};

std::string fmt(double v, const char* spec = "%.4g") {
    char buf[48];
    std::snprintf(buf, sizeof(buf), spec, v);
    return buf;
}

struct Canvas {
    std::ostringstream os;
    Canvas() {
        os << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << kW << "\" height=\"" << kH
           << "\" viewBox=\"0 0 " << kW << " " << kH << "\">\n"
           << "<rect width=\"" << kW << "\" height=\"" << kH << "\" fill=\"white\"/>\n";
    }
    void text(double x, double y, const std::string& s, int size = 13,
              const char* anchor = "start", const char* fill = "#222") {
        os << "<text x=\"" << x << "\" y=\"" << y << "\" font-family=\"sans-serif\" font-size=\""
           << size << "\" text-anchor=\"" << anchor << "\" fill=\"" << fill << "\">" << s
           << "</text>\n";
    }
    void line(double x1, double y1, double x2, double y2, const char* stroke = "#888",
              double width = 1.0, const char* dash = nullptr) {
        os << "<line x1=\"" << x1 << "\" y1=\"" << y1 << "\" x2=\"" << x2 << "\" y2=\"" << y2
           << "\" stroke=\"" << stroke << "\" stroke-width=\"" << width << "\"";
        if (dash) os << " stroke-dasharray=\"" << dash << "\"";
        os << "/>\n";
    }
    void rect(double x, double y, double w, double h, const std::string& fill,
              const char* stroke = "#555") {
        os << "<rect x=\"" << x << "\" y=\"" << y << "\" width=\"" << w << "\" height=\"" << h
           << "\" fill=\"" << fill << "\" stroke=\"" << stroke << "\"/>\n";
    }
    void polyline(const std::string& points, const char* stroke, double width = 1.8) {
        os << "<polyline fill=\"none\" stroke=\"" << stroke << "\" stroke-width=\"" << width
           << "\" points=\"" << points << "\"/>\n";
    }
    std::string finish() {
        os << "</svg>\n";
        return os.str();
    }
};

struct Axes {
    double x_min, x_max, y_min, y_max;
    double px(double x) const {
        return kLeft + (x - x_min) / (x_max - x_min) * (kW - kLeft - kRight);
    }
    double py(double y) const {
        return kH - kBottom - (y - y_min) / (y_max - y_min) * (kH - kTop - kBottom);
    }
};

void draw_axes(Canvas& c, const Axes& a, const std::string& title, const std::string& x_label,
               const std::string& y_label) {
    c.text(kW / 2.0, 24, title, 15, "middle");
    c.line(kLeft, kTop, kLeft, kH - kBottom, "#333");
    c.line(kLeft, kH - kBottom, kW - kRight, kH - kBottom, "#333");
    for (int i = 0; i <= 5; ++i) {
        const double fx = a.x_min + (a.x_max - a.x_min) * i / 5.0;
        const double fy = a.y_min + (a.y_max - a.y_min) * i / 5.0;
        c.line(a.px(fx), kH - kBottom, a.px(fx), kH - kBottom + 4, "#333");
        c.text(a.px(fx), kH - kBottom + 18, fmt(fx), 11, "middle");
        c.line(kLeft - 4, a.py(fy), kLeft, a.py(fy), "#333");
        c.text(kLeft - 8, a.py(fy) + 4, fmt(fy), 11, "end");
        c.line(kLeft, a.py(fy), kW - kRight, a.py(fy), "#eee");
    }
    c.text(kW / 2.0, kH - 16, x_label, 13, "middle");
    c.text(16, kH / 2.0, y_label, 13, "middle");
}

}  // namespace

std::string svg_curves(
    const std::vector<std::pair<std::string, std::vector<std::pair<double, double>>>>& series,
    const std::string& title, const std::string& x_label, const std::string& y_label,
    bool diagonal_reference) {
    Canvas c;
    Axes a{0, 1, 0, 1};
    // axis range from data when it leaves the unit square (history plots)
    for (const auto& [name, pts] : series)
        for (const auto& [x, y] : pts) {
            a.x_max = std::max(a.x_max, x);
            a.y_max = std::max(a.y_max, y);
        }
    draw_axes(c, a, title, x_label, y_label);
    if (diagonal_reference)
        c.line(a.px(0), a.py(0), a.px(1), a.py(1), "#bbb", 1.0, "4,4");
    int color = 0;
    for (const auto& [name, pts] : series) {
        std::string points;
        for (const auto& [x, y] : pts)
            points += fmt(a.px(x), "%.2f") + "," + fmt(a.py(y), "%.2f") + " ";
        const char* stroke = kPalette[color % 6];
        c.polyline(points, stroke);
        c.rect(kLeft + 12.0, kTop + 10.0 + 18.0 * color, 12, 3, stroke, "none");
        c.text(kLeft + 30, kTop + 16.0 + 18.0 * color, name, 12);
        ++color;
    }
    return c.finish();
}

std::string svg_roc(const std::vector<std::pair<std::string, const RocCurve*>>& curves,
                    const std::string& title) {
    std::vector<std::pair<std::string, std::vector<std::pair<double, double>>>> series;
    for (const auto& [name, curve] : curves) {
        if (!curve) continue;
        std::vector<std::pair<double, double>> pts;
        for (std::size_t i = 0; i < curve->fpr.size(); ++i)
            pts.emplace_back(curve->fpr[i], curve->tpr[i]);
        series.emplace_back(name + " (AUC " + fmt(curve->auc, "%.3f") + ")", std::move(pts));
    }
    return svg_curves(series, title, "false positive rate", "true positive rate", true);
}

std::string svg_pr(const std::vector<std::pair<std::string, const PrCurve*>>& curves,
                   const std::string& title) {
    std::vector<std::pair<std::string, std::vector<std::pair<double, double>>>> series;
    for (const auto& [name, curve] : curves) {
        if (!curve) continue;
        std::vector<std::pair<double, double>> pts;
        for (std::size_t i = 0; i < curve->recall.size(); ++i)
            pts.emplace_back(curve->recall[i], curve->precision[i]);
        series.emplace_back(name + " (AP " + fmt(curve->average_precision, "%.3f") + ")",
                            std::move(pts));
    }
    return svg_curves(series, title, "recall", "precision", false);
}

std::string svg_confusion(const ConfusionMatrix& cm, const std::vector<std::string>& classes,
                          const std::string& title) {
    Canvas c;
    c.text(kW / 2.0, 24, title, 15, "middle");
    const double grid = std::min((kW - kLeft - kRight) / double(cm.k),
                                 (kH - kTop - kBottom) / double(cm.k));
    std::int64_t peak = 1;
    for (auto v : cm.counts) peak = std::max(peak, v);
    for (std::size_t t = 0; t < cm.k; ++t) {
        for (std::size_t p = 0; p < cm.k; ++p) {
            const double x = kLeft + p * grid, y = kTop + t * grid;
            const double shade = double(cm.at(t, p)) / double(peak);
            const int blue = int(255 - 155 * shade);
            char fill[16];
            std::snprintf(fill, sizeof(fill), "#%02x%02xff", blue, blue);
            c.rect(x, y, grid, grid, fill);
            c.text(x + grid / 2, y + grid / 2 + 5, std::to_string(cm.at(t, p)), 14, "middle");
        }
        c.text(kLeft - 8, kTop + t * grid + grid / 2 + 4, classes[t], 12, "end");
        c.text(kLeft + t * grid + grid / 2, kTop + cm.k * grid + 16, classes[t], 12, "middle");
    }
    c.text(16, kTop + cm.k * grid / 2, "true", 12, "middle");
    c.text(kLeft + cm.k * grid / 2, kTop + cm.k * grid + 34, "predicted", 12, "middle");
    return c.finish();
}

std::string svg_bars(const std::vector<std::string>& labels, const std::vector<double>& values,
                     const std::string& title, double y_max) {
    Canvas c;
    Axes a{0, double(values.size()), 0, y_max};
    draw_axes(c, a, title, "", "");
    const double slot = (kW - kLeft - kRight) / double(values.size());
    for (std::size_t i = 0; i < values.size(); ++i) {
        const double x = kLeft + i * slot + slot * 0.15;
        const double y = a.py(values[i]);
        c.rect(x, y, slot * 0.7, kH - kBottom - y, kPalette[i % 6], "none");
        c.text(kLeft + i * slot + slot / 2, kH - kBottom + 18, labels[i], 11, "middle");
        c.text(kLeft + i * slot + slot / 2, y - 6, fmt(values[i], "%.3f"), 11, "middle");
    }
    return c.finish();
}

std::string svg_history(const TrainHistory& history, const std::string& title) {
    std::vector<std::pair<std::string, std::vector<std::pair<double, double>>>> series(4);
    series[0].first = "train loss";
    series[1].first = "val loss";
    series[2].first = "train acc";
    series[3].first = "val acc";
    for (std::size_t e = 0; e < history.train_loss.size(); ++e) {
        const double x = double(e + 1);
        series[0].second.emplace_back(x, history.train_loss[e]);
        series[1].second.emplace_back(x, history.val_loss[e]);
        series[2].second.emplace_back(x, history.train_acc[e]);
        series[3].second.emplace_back(x, history.val_acc[e]);
    }
    return svg_curves(series, title, "epoch", "loss / accuracy", false);
}

void write_text_file(const std::filesystem::path& path, const std::string& content) {
    std::ofstream out(path);
    if (!out) throw DataError("cannot write " + path.string());
    out << content;
}

}  // namespace duomic
