#include "semsec/harness.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <map>
#include <sstream>

namespace semsec {

namespace {

constexpr double kWidth = 640, kHeight = 420;
constexpr double kLeft = 70, kRight = 30, kTop = 50, kBottom = 60;

std::string escape_xml(const std::string& s) {
  std::string out;
  for (char ch : s) {
    switch (ch) {
      case '&': out += "&amp;"; break;
      case '<': out += "&lt;"; break;
      case '>': out += "&gt;"; break;
      case '"': out += "&quot;"; break;
      default: out += ch;
    }
  }
  return out;
}

std::string fixed(double v, int digits) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.*f", digits, v);
  return buf;
}

// Roughly five round tick values covering [lo, hi].
std::vector<double> ticks(double lo, double hi) {
  const double span = hi - lo;
  const double raw = span / 5.0;
  const double mag = std::pow(10.0, std::floor(std::log10(raw)));
  double step = mag;
  for (double m : {1.0, 2.0, 5.0, 10.0}) {
    step = m * mag;
    if (step >= raw) break;
  }
  std::vector<double> out;
  for (double t = std::ceil(lo / step) * step; t <= hi + 1e-9 * span; t += step) out.push_back(t);
  return out;
}

int tick_digits(double step) { return step >= 1.0 ? 0 : static_cast<int>(std::ceil(-std::log10(step))); }

}  // namespace

std::string render_plot(const SweepResult& result, const std::string& title) {
  if (result.rows.empty()) throw ConfigError("nothing to plot: empty sweep result");

  // Average over seeds at each x.
  std::map<double, std::pair<double, double>> sums;
  std::map<double, int> counts;
  for (const auto& r : result.rows) {
    sums[r.x].first += r.psnr_leg_db;
    sums[r.x].second += r.psnr_eve_db;
    ++counts[r.x];
  }
  std::vector<double> xs, leg, eve;
  for (const auto& [x, s] : sums) {
    xs.push_back(x);
    leg.push_back(s.first / counts[x]);
    eve.push_back(s.second / counts[x]);
  }

  double x_lo = xs.front(), x_hi = xs.back();
  if (x_hi - x_lo < 1e-12) {
    x_lo -= 1.0;
    x_hi += 1.0;
  }
  double y_lo = std::min(*std::min_element(leg.begin(), leg.end()), *std::min_element(eve.begin(), eve.end()));
  double y_hi = std::max(*std::max_element(leg.begin(), leg.end()), *std::max_element(eve.begin(), eve.end()));
  const double pad = std::max(1.0, 0.1 * (y_hi - y_lo));
  y_lo = std::floor(y_lo - pad);
  y_hi = std::ceil(y_hi + pad);

  const double pw = kWidth - kLeft - kRight, ph = kHeight - kTop - kBottom;
  auto px = [&](double x) { return kLeft + (x - x_lo) / (x_hi - x_lo) * pw; };
  auto py = [&](double y) { return kTop + (y_hi - y) / (y_hi - y_lo) * ph; };

  std::ostringstream svg;
  svg << "<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n"
      << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << kWidth << "\" height=\"" << kHeight
      << "\" viewBox=\"0 0 " << kWidth << ' ' << kHeight << "\" font-family=\"sans-serif\" font-size=\"12\">\n"
      << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n"
      << "<text x=\"" << kWidth / 2 << "\" y=\"24\" text-anchor=\"middle\" font-size=\"15\">" << escape_xml(title)
      << "</text>\n";

  const auto xt = ticks(x_lo, x_hi), yt = ticks(y_lo, y_hi);
  const int xd = xt.size() > 1 ? tick_digits(xt[1] - xt[0]) : 2;
  for (double t : yt) {
    svg << "<line x1=\"" << fixed(kLeft, 1) << "\" y1=\"" << fixed(py(t), 1) << "\" x2=\"" << fixed(kLeft + pw, 1)
        << "\" y2=\"" << fixed(py(t), 1) << "\" stroke=\"#dddddd\"/>\n"
        << "<text x=\"" << fixed(kLeft - 8, 1) << "\" y=\"" << fixed(py(t) + 4, 1) << "\" text-anchor=\"end\">"
        << fixed(t, 0) << "</text>\n";
  }
  for (double t : xt) {
    svg << "<text x=\"" << fixed(px(t), 1) << "\" y=\"" << fixed(kTop + ph + 18, 1) << "\" text-anchor=\"middle\">"
        << fixed(t, xd) << "</text>\n";
  }
  svg << "<rect x=\"" << kLeft << "\" y=\"" << kTop << "\" width=\"" << pw << "\" height=\"" << ph
      << "\" fill=\"none\" stroke=\"black\"/>\n"
      << "<text x=\"" << kLeft + pw / 2 << "\" y=\"" << kHeight - 16 << "\" text-anchor=\"middle\">"
      << escape_xml(result.x_label) << "</text>\n"
      << "<text x=\"18\" y=\"" << kTop + ph / 2 << "\" text-anchor=\"middle\" transform=\"rotate(-90 18 "
      << kTop + ph / 2 << ")\">PSNR (dB)</text>\n";

  const struct {
    const std::vector<double>* ys;
    const char* color;
    const char* name;
  } series[] = {{&leg, "#1f77b4", "legitimate (Bob)"}, {&eve, "#d62728", "eavesdropper (Eve)"}};
  for (const auto& s : series) {
    svg << "<polyline fill=\"none\" stroke=\"" << s.color << "\" stroke-width=\"2\" points=\"";
    for (std::size_t i = 0; i < xs.size(); ++i) svg << (i ? " " : "") << fixed(px(xs[i]), 1) << ',' << fixed(py((*s.ys)[i]), 1);
    svg << "\"/>\n";
    for (std::size_t i = 0; i < xs.size(); ++i) {
      svg << "<circle cx=\"" << fixed(px(xs[i]), 1) << "\" cy=\"" << fixed(py((*s.ys)[i]), 1) << "\" r=\"3\" fill=\""
          << s.color << "\"/>\n";
    }
  }

  // Legend, top right inside the plot area.
  const double lx = kLeft + pw - 160, ly = kTop + 12;
  svg << "<g class=\"legend\">\n";
  for (std::size_t i = 0; i < 2; ++i) {
    const double y = ly + 18.0 * static_cast<double>(i);
    svg << "<line x1=\"" << lx << "\" y1=\"" << y << "\" x2=\"" << lx + 24 << "\" y2=\"" << y << "\" stroke=\""
        << series[i].color << "\" stroke-width=\"2\"/>\n"
        << "<text x=\"" << lx + 30 << "\" y=\"" << y + 4 << "\">" << series[i].name << "</text>\n";
  }
  svg << "</g>\n</svg>\n";
  return svg.str();
}

}  // namespace semsec
