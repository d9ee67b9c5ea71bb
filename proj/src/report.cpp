#include "roughdyadic/report.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <istream>
#include <map>
#include <ostream>
#include <sstream>

namespace roughdyadic {

namespace {

std::string num(double v, const char* f = "%.12g") {
    if (std::isnan(v)) return "";
    char buf[64];
    std::snprintf(buf, sizeof buf, f, v);
    return buf;
}

}  // namespace

void write_rows_csv(std::ostream& os, const std::vector<EstimateRow>& rows) {
    os << "lemma_id,anchor,m,n,q,estimate,stderr,slope,samples,note\n";
    for (const auto& r : rows) {
        os << r.lemma_id << ',' << r.anchor << ',';
        if (r.m >= 0) os << r.m;
        os << ',';
        if (r.n >= 0) os << r.n;
        os << ',' << num(r.q) << ',' << num(r.estimate) << ',' << num(r.se) << ','
           << num(r.slope) << ',' << r.samples << ',' << r.note << "\n";
    }
}

void write_verdicts_csv(std::ostream& os, const std::vector<LemmaReport>& reports) {
    os << "lemma_id,anchor,check,verdict,detail\n";
    for (const auto& rep : reports) {
        for (const auto& c : rep.checks)
            os << rep.lemma_id << ',' << rep.anchor << ',' << c.name << ','
               << verdict_name(c.verdict) << ',' << c.detail << "\n";
        os << rep.lemma_id << ',' << rep.anchor << ",OVERALL," << verdict_name(rep.verdict)
           << ",\n";
    }
}

std::vector<std::pair<std::string, std::string>> read_verdicts_csv(std::istream& is) {
    std::vector<std::pair<std::string, std::string>> out;
    std::string line;
    std::getline(is, line);  // header
    while (std::getline(is, line)) {
        std::istringstream ls(line);
        std::string lemma, anchor, check, verdict;
        std::getline(ls, lemma, ',');
        std::getline(ls, anchor, ',');
        std::getline(ls, check, ',');
        std::getline(ls, verdict, ',');
        if (check == "OVERALL") out.emplace_back(lemma, verdict);
    }
    return out;
}

void write_lemma_svg(std::ostream& os, const LemmaReport& report) {
    // Collect positive estimates grouped by note; x is the sweeping index.
    std::map<std::string, std::vector<std::pair<double, double>>> series;
    bool m_varies = false;
    int first_m = -2;
    for (const auto& r : report.rows) {
        if (first_m == -2) first_m = r.m;
        if (r.m != first_m) m_varies = true;
    }
    for (const auto& r : report.rows) {
        if (!(r.estimate > 0.0)) continue;
        const double x = m_varies ? r.m : r.n;
        series[r.note.empty() ? "estimate" : r.note].emplace_back(x, std::log2(r.estimate));
    }

    const int w = 640, h = 420, ml = 60, mb = 40, mt = 30, mr = 20;
    double xlo = 1e300, xhi = -1e300, ylo = 1e300, yhi = -1e300;
    for (const auto& [name, pts] : series)
        for (const auto& [x, y] : pts) {
            xlo = std::min(xlo, x);
            xhi = std::max(xhi, x);
            ylo = std::min(ylo, y);
            yhi = std::max(yhi, y);
        }
    if (series.empty()) {
        xlo = 0;
        xhi = 1;
        ylo = 0;
        yhi = 1;
    }
    if (xhi == xlo) xhi = xlo + 1;
    if (yhi == ylo) yhi = ylo + 1;
    auto px = [&](double x) { return ml + (x - xlo) / (xhi - xlo) * (w - ml - mr); };
    auto py = [&](double y) { return h - mb - (y - ylo) / (yhi - ylo) * (h - mb - mt); };

    static const char* colors[] = {"#1f77b4", "#d62728", "#2ca02c", "#9467bd",
                                   "#ff7f0e", "#8c564b"};
    os << "<svg xmlns='http://www.w3.org/2000/svg' width='" << w << "' height='" << h << "'>\n";
    os << "<!-- lemma " << report.lemma_id << " anchor " << report.anchor << " -->\n";
    os << "<rect width='100%' height='100%' fill='white'/>\n";
    os << "<text x='" << w / 2 << "' y='18' text-anchor='middle' font-size='14'>" << report.lemma_id
       << " [" << report.anchor << "] : log2 estimate vs " << (m_varies ? "m" : "n")
       << "</text>\n";
    os << "<line x1='" << ml << "' y1='" << h - mb << "' x2='" << w - mr << "' y2='" << h - mb
       << "' stroke='black'/>\n";
    os << "<line x1='" << ml << "' y1='" << mt << "' x2='" << ml << "' y2='" << h - mb
       << "' stroke='black'/>\n";
    for (int t = 0; t <= 4; ++t) {
        const double x = xlo + (xhi - xlo) * t / 4.0;
        const double y = ylo + (yhi - ylo) * t / 4.0;
        os << "<text x='" << px(x) << "' y='" << h - mb + 16 << "' text-anchor='middle' font-size='10'>"
           << num(x, "%.3g") << "</text>\n";
        os << "<text x='" << ml - 6 << "' y='" << py(y) + 3 << "' text-anchor='end' font-size='10'>"
           << num(y, "%.3g") << "</text>\n";
    }
    int ci = 0;
    int legend_y = mt + 8;
    for (auto& [name, pts] : series) {
        std::sort(pts.begin(), pts.end());
        const char* col = colors[ci % 6];
        os << "<!-- data " << name << ":";
        for (const auto& [x, y] : pts) os << ' ' << num(x, "%.6g") << ':' << num(y, "%.6g");
        os << " -->\n<polyline fill='none' stroke='" << col << "' points='";
        for (const auto& [x, y] : pts) os << px(x) << ',' << py(y) << ' ';
        os << "'/>\n";
        for (const auto& [x, y] : pts)
            os << "<circle cx='" << px(x) << "' cy='" << py(y) << "' r='2.5' fill='" << col
               << "'/>\n";
        // Least-squares guide line over the series' span.
        if (pts.size() >= 3) {
            std::vector<std::pair<double, double>> raw;
            for (const auto& [x, y] : pts) raw.emplace_back(x, std::exp2(y));
            const SlopeFit f = fit_slope(raw);
            os << "<line x1='" << px(pts.front().first) << "' y1='"
               << py(f.intercept + f.slope * pts.front().first) << "' x2='"
               << px(pts.back().first) << "' y2='"
               << py(f.intercept + f.slope * pts.back().first) << "' stroke='" << col
               << "' stroke-dasharray='4 3'/>\n";
        }
        os << "<text x='" << w - mr - 4 << "' y='" << legend_y << "' text-anchor='end' font-size='11' fill='"
           << col << "'>" << name << "</text>\n";
        legend_y += 14;
        ++ci;
    }
    os << "</svg>\n";
}

std::string build_identifier() {
    std::string s = "roughdyadic 0.1.0, ";
#if defined(__clang__)
    s += "clang " __clang_version__;
#elif defined(__GNUC__)
    s += "gcc " + std::to_string(__GNUC__) + "." + std::to_string(__GNUC_MINOR__);
#else
    s += "unknown compiler";
#endif
#ifdef NDEBUG
    s += ", release";
#else
    s += ", debug";
#endif
    return s;
}

}  // namespace roughdyadic
