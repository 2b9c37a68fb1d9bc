#include "og/svg.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <sstream>
#include <string>

#include "og/outfit.hpp"

namespace og {
namespace {

std::string num(double v, const char* fmt = "%.2f") {
    char buf[64];
    std::snprintf(buf, sizeof buf, fmt, v);
    return buf;
}

void open_doc(std::ostringstream& s, int w, int h, const std::string& title) {
    s << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << w << "\" height=\"" << h
      << "\" viewBox=\"0 0 " << w << " " << h << "\">\n";
    s << "<rect width=\"" << w << "\" height=\"" << h << "\" fill=\"white\"/>\n";
    s << "<text x=\"" << w / 2 << "\" y=\"18\" text-anchor=\"middle\" font-family=\"monospace\" "
         "font-size=\"13\">"
      << title << "</text>\n";
}

void text_at(std::ostringstream& s, double x, double y, const std::string& t,
             const char* anchor = "middle", int size = 10) {
    s << "<text x=\"" << num(x) << "\" y=\"" << num(y) << "\" text-anchor=\"" << anchor
      << "\" font-family=\"monospace\" font-size=\"" << size << "\">" << t << "</text>\n";
}

void line(std::ostringstream& s, double x1, double y1, double x2, double y2,
          const char* stroke = "#444", const char* extra = "") {
    s << "<line x1=\"" << num(x1) << "\" y1=\"" << num(y1) << "\" x2=\"" << num(x2) << "\" y2=\""
      << num(y2) << "\" stroke=\"" << stroke << "\"" << extra << "/>\n";
}

void rect(std::ostringstream& s, double x, double y, double w, double h, const char* fill) {
    s << "<rect x=\"" << num(x) << "\" y=\"" << num(y) << "\" width=\"" << num(w)
      << "\" height=\"" << num(h) << "\" fill=\"" << fill << "\"/>\n";
}

}  // namespace

std::string reliability_svg(const CalibrationReport& report) {
    const int w = 420, h = 340;
    const double left = 50, right = w - 20.0, top = 40, bottom = h - 50.0;
    const double px = right - left, py = bottom - top;
    std::ostringstream s;
    open_doc(s, w, h, "reliability (T=" + num(report.temperature, "%.4g") + ")");
    // frame and ideal diagonal
    line(s, left, top, left, bottom);
    line(s, left, bottom, right, bottom);
    line(s, left, bottom, right, top, "#999", " stroke-dasharray=\"4 3\"");
    for (const ReliabilityBin& b : report.bins) {
        const double x0 = left + b.lo * px;
        const double bw = (b.hi - b.lo) * px;
        const double bh = b.accuracy * py;
        rect(s, x0 + 1, bottom - bh, std::max(bw - 2, 1.0), bh, "#4878a8");
        if (b.count > 0) {
            const double cx = left + b.avg_confidence * px;
            s << "<circle cx=\"" << num(cx) << "\" cy=\"" << num(bottom - b.accuracy * py)
              << "\" r=\"2.5\" fill=\"#c04040\"/>\n";
        }
    }
    for (int t = 0; t <= 4; ++t) {
        const double f = t / 4.0;
        text_at(s, left + f * px, bottom + 14, num(f, "%.2f"));
        text_at(s, left - 6, bottom - f * py + 3, num(f, "%.2f"), "end");
    }
    const char* ylab = report.mode == ConfidenceMode::positive_score ? "positive rate" : "accuracy";
    text_at(s, (left + right) / 2, h - 8.0,
            std::string("confidence  |  ") + ylab + "  |  ECE " + num(report.ece_before, "%.4g") +
                " -> " + num(report.ece_after, "%.4g") + "  n=" + std::to_string(report.sample_count));
    s << "</svg>\n";
    return s.str();
}

std::string score_histogram_svg(const CalibrationReport& report) {
    const int w = 420, h = 340;
    const double left = 50, right = w - 20.0, top = 40, bottom = h - 50.0;
    const double px = right - left, py = bottom - top;
    const std::size_t bins = std::max(report.pos_histogram.size(), report.neg_histogram.size());
    std::size_t peak = 1;
    for (std::size_t c : report.pos_histogram) peak = std::max(peak, c);
    for (std::size_t c : report.neg_histogram) peak = std::max(peak, c);
    std::ostringstream s;
    open_doc(s, w, h, "score distribution (T=" + num(report.temperature, "%.4g") + ")");
    line(s, left, top, left, bottom);
    line(s, left, bottom, right, bottom);
    for (std::size_t i = 0; i < bins; ++i) {
        const double cell = px / (double)bins;
        const double x0 = left + (double)i * cell;
        const std::size_t pos = i < report.pos_histogram.size() ? report.pos_histogram[i] : 0;
        const std::size_t neg = i < report.neg_histogram.size() ? report.neg_histogram[i] : 0;
        const double half = std::max(cell / 2 - 1, 1.0);
        rect(s, x0 + 1, bottom - py * (double)neg / (double)peak, half, py * (double)neg / (double)peak,
             "#c04040");
        rect(s, x0 + 1 + half, bottom - py * (double)pos / (double)peak, half,
             py * (double)pos / (double)peak, "#4878a8");
    }
    for (int t = 0; t <= 4; ++t) {
        const double f = t / 4.0;
        text_at(s, left + f * px, bottom + 14, num(100.0 * f, "%.0f"));
        text_at(s, left - 6, bottom - f * py + 3, num((double)peak * f, "%.0f"), "end");
    }
    text_at(s, (left + right) / 2, h - 8.0,
            "score  |  red=negative blue=positive  n=" + std::to_string(report.sample_count));
    s << "</svg>\n";
    return s.str();
}

std::string ifiv_bars_svg(const IfivReport& report) {
    const int w = 480;
    const double row_h = 18, left = 150, top = 34;
    const int h = (int)(top + row_h * (double)report.ranking.size() + 40);
    double span = 0.0;
    for (const IfivEntry& e : report.ranking) span = std::max(span, std::abs(e.value));
    if (span == 0.0) span = 1.0;
    const double px = (w - left - 20) / 2.0;
    const double mid = left + px;
    std::ostringstream s;
    open_doc(s, w, h, "influence by (part, feature), most blamed first");
    line(s, mid, top - 4, mid, top + row_h * (double)report.ranking.size() + 4);
    for (std::size_t i = 0; i < report.ranking.size(); ++i) {
        const IfivEntry& e = report.ranking[i];
        const double y = top + row_h * (double)i;
        const double bw = std::abs(e.value) / span * px;
        rect(s, e.value < 0 ? mid - bw : mid, y + 3, bw, row_h - 6,
             e.value < 0 ? "#c04040" : "#4878a8");
        text_at(s, left - 6, y + row_h - 5,
                std::string(part_name(e.part)) + "/" + std::string(feature_name(e.feature)), "end");
        text_at(s, e.value < 0 ? mid + 4 : mid - 4, y + row_h - 5, num(e.value, "%.4g"),
                e.value < 0 ? "start" : "end", 9);
    }
    const double foot = top + row_h * (double)report.ranking.size() + 20;
    text_at(s, mid, foot,
            "class " + std::to_string(report.target_class) + "  T=" + num(report.temperature, "%.4g") +
                "  logit/T=" + num(report.target_logit_over_t, "%.6g"));
    s << "</svg>\n";
    return s.str();
}

}  // namespace og
