#include <algorithm>
#include <cmath>
#include <cstdio>
#include <istream>
#include <map>
#include <sstream>

#include "app.hpp"

namespace rpl::app {

namespace {

std::vector<std::string> split_line(const std::string& line) {
  std::vector<std::string> out;
  std::string cell;
  std::stringstream ss(line);
  while (std::getline(ss, cell, ',')) out.push_back(cell);
  if (!line.empty() && line.back() == ',') out.emplace_back();
  return out;
}

std::string f(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.2f", v);
  return buf;
}

std::string tick_label(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.3g", v);
  return buf;
}

std::string escape(const std::string& s) {
  std::string o;
  for (char c : s) {
    if (c == '<') o += "&lt;";
    else if (c == '>') o += "&gt;";
    else if (c == '&') o += "&amp;";
    else o += c;
  }
  return o;
}

const char* kPalette[] = {"#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd", "#8c564b", "#e377c2", "#17becf"};

struct Series {
  std::string name;
  std::vector<std::pair<double, double>> pts;
  bool bars = false;
};

struct Axis {
  double lo = 0, hi = 1;
  bool log = false;
  double map(double v) const {
    const double a = log ? std::log10(v) : v;
    return (a - lo) / (hi - lo);
  }
};

Axis make_axis(const std::vector<double>& vals, bool log) {
  Axis a;
  a.log = log;
  if (vals.empty()) return a;
  double lo = 1e300, hi = -1e300;
  for (double v : vals) {
    const double t = log ? std::log10(v) : v;
    lo = std::min(lo, t);
    hi = std::max(hi, t);
  }
  if (hi == lo) {
    lo -= 0.5;
    hi += 0.5;
  } else {
    const double pad = 0.04 * (hi - lo);
    lo -= pad;
    hi += pad;
  }
  a.lo = lo;
  a.hi = hi;
  return a;
}

bool usable(double v, bool log) { return std::isfinite(v) && (!log || v > 0); }

double parse(const std::string& s) {
  if (s.empty()) return std::nan("");
  char* end = nullptr;
  const double v = std::strtod(s.c_str(), &end);
  return end == s.c_str() + s.size() ? v : std::nan("");
}

}  // namespace

int Table::column(const std::string& name) const {
  for (std::size_t i = 0; i < header.size(); ++i)
    if (header[i] == name) return static_cast<int>(i);
  return -1;
}

Table read_csv(std::istream& is) {
  Table t;
  std::string line;
  bool first = true;
  while (std::getline(is, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    if (first) {
      t.header = split_line(line);
      first = false;
    } else {
      t.rows.push_back(split_line(line));
    }
  }
  return t;
}

std::string render_svg(const Table& t, const PlotSpec& spec) {
  const bool empty = t.header.empty() && t.rows.empty();
  std::vector<std::string> ys{spec.y};
  ys.insert(ys.end(), spec.extra_y.begin(), spec.extra_y.end());
  int xi = -1, gi = -1;
  std::vector<int> yi;
  if (!empty) {
    xi = t.column(spec.x);
    if (xi < 0) throw ConfigError("plot: missing column '" + spec.x + "'");
    for (const auto& y : ys) {
      yi.push_back(t.column(y));
      if (yi.back() < 0) throw ConfigError("plot: missing column '" + y + "'");
    }
    if (!spec.group.empty()) {
      gi = t.column(spec.group);
      if (gi < 0) throw ConfigError("plot: missing column '" + spec.group + "'");
    }
  }

  std::vector<Series> series;
  std::map<std::string, std::size_t> by_group;
  for (const auto& row : t.rows) {
    const double x = xi >= 0 && static_cast<std::size_t>(xi) < row.size() ? parse(row[xi]) : std::nan("");
    if (!usable(x, spec.logx)) continue;
    for (std::size_t k = 0; k < yi.size(); ++k) {
      const auto c = static_cast<std::size_t>(yi[k]);
      const double y = c < row.size() ? parse(row[c]) : std::nan("");
      if (!usable(y, spec.logy)) continue;
      std::string name = ys[k];
      if (k == 0 && gi >= 0) name += " " + spec.group + "=" + (static_cast<std::size_t>(gi) < row.size() ? row[gi] : "");
      auto [it, fresh] = by_group.try_emplace(name, series.size());
      if (fresh) series.push_back({name, {}, spec.histogram && k == 0});
      series[it->second].pts.emplace_back(x, y);
    }
  }
  for (auto& s : series) std::stable_sort(s.pts.begin(), s.pts.end());

  std::vector<double> xs, yv;
  for (const auto& s : series)
    for (const auto& [x, y] : s.pts) {
      xs.push_back(x);
      yv.push_back(y);
    }
  if (spec.histogram && !spec.logy) yv.push_back(0.0);
  const Axis ax = make_axis(xs, spec.logx), ay = make_axis(yv, spec.logy);

  const double W = spec.width, H = spec.height, L = 70, R = 20, T = 40, B = 55;
  const double pw = W - L - R, ph = H - T - B;
  auto px = [&](double x) { return L + ax.map(x) * pw; };
  auto py = [&](double y) { return T + (1 - ay.map(y)) * ph; };

  std::ostringstream o;
  o << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << spec.width << "\" height=\"" << spec.height
    << "\" viewBox=\"0 0 " << spec.width << ' ' << spec.height << "\">\n";
  o << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  if (!spec.title.empty())
    o << "<text x=\"" << f(W / 2) << "\" y=\"22\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"15\">"
      << escape(spec.title) << "</text>\n";
  o << "<rect x=\"" << f(L) << "\" y=\"" << f(T) << "\" width=\"" << f(pw) << "\" height=\"" << f(ph)
    << "\" fill=\"none\" stroke=\"black\"/>\n";

  // Five ticks per axis, at decades on log axes when the span allows.
  auto ticks = [](const Axis& a) {
    std::vector<double> v;
    if (a.log && a.hi - a.lo >= 1) {
      for (double e = std::ceil(a.lo); e <= a.hi; e += 1) v.push_back(e);
    } else {
      for (int i = 0; i <= 4; ++i) v.push_back(a.lo + (a.hi - a.lo) * i / 4.0);
    }
    return v;
  };
  for (double tv : ticks(ax)) {
    const double X = L + (tv - ax.lo) / (ax.hi - ax.lo) * pw;
    o << "<line x1=\"" << f(X) << "\" y1=\"" << f(T + ph) << "\" x2=\"" << f(X) << "\" y2=\"" << f(T + ph + 5)
      << "\" stroke=\"black\"/>\n";
    o << "<text x=\"" << f(X) << "\" y=\"" << f(T + ph + 18)
      << "\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"11\">"
      << tick_label(ax.log ? std::pow(10.0, tv) : tv) << "</text>\n";
  }
  for (double tv : ticks(ay)) {
    const double Y = T + (1 - (tv - ay.lo) / (ay.hi - ay.lo)) * ph;
    o << "<line x1=\"" << f(L - 5) << "\" y1=\"" << f(Y) << "\" x2=\"" << f(L) << "\" y2=\"" << f(Y)
      << "\" stroke=\"black\"/>\n";
    o << "<text x=\"" << f(L - 8) << "\" y=\"" << f(Y + 4)
      << "\" text-anchor=\"end\" font-family=\"sans-serif\" font-size=\"11\">"
      << tick_label(ay.log ? std::pow(10.0, tv) : tv) << "</text>\n";
  }
  o << "<text x=\"" << f(L + pw / 2) << "\" y=\"" << f(H - 12)
    << "\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"13\">" << escape(spec.x)
    << (spec.logx ? " (log)" : "") << "</text>\n";
  o << "<text x=\"16\" y=\"" << f(T + ph / 2) << "\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"13\""
    << " transform=\"rotate(-90 16 " << f(T + ph / 2) << ")\">" << escape(spec.y) << (spec.logy ? " (log)" : "")
    << "</text>\n";

  for (std::size_t k = 0; k < series.size(); ++k) {
    const auto& s = series[k];
    const char* col = kPalette[k % 8];
    if (s.bars) {
      const double base = py(spec.logy ? std::pow(10.0, ay.lo) : 0.0);
      for (std::size_t i = 0; i < s.pts.size(); ++i) {
        const double x = s.pts[i].first;
        const double left = i > 0 ? 0.5 * (px(s.pts[i - 1].first) + px(x)) : px(x) - 0.5 * (s.pts.size() > 1 ? px(s.pts[1].first) - px(x) : 4);
        const double right = i + 1 < s.pts.size() ? 0.5 * (px(x) + px(s.pts[i + 1].first)) : 2 * px(x) - left;
        const double top = py(s.pts[i].second);
        o << "<rect x=\"" << f(left) << "\" y=\"" << f(std::min(top, base)) << "\" width=\"" << f(right - left)
          << "\" height=\"" << f(std::abs(base - top)) << "\" fill=\"" << col << "\" fill-opacity=\"0.45\"/>\n";
      }
    } else if (spec.scatter) {
      for (const auto& [x, y] : s.pts)
        o << "<circle cx=\"" << f(px(x)) << "\" cy=\"" << f(py(y)) << "\" r=\"2.5\" fill=\"" << col << "\"/>\n";
    } else {
      o << "<polyline fill=\"none\" stroke=\"" << col << "\" stroke-width=\"1.5\" points=\"";
      for (std::size_t i = 0; i < s.pts.size(); ++i) o << (i ? " " : "") << f(px(s.pts[i].first)) << ',' << f(py(s.pts[i].second));
      o << "\"/>\n";
    }
    o << "<rect x=\"" << f(L + pw - 170) << "\" y=\"" << f(T + 8 + 16 * k) << "\" width=\"10\" height=\"10\" fill=\""
      << col << "\"/>\n";
    o << "<text x=\"" << f(L + pw - 155) << "\" y=\"" << f(T + 17 + 16 * k)
      << "\" font-family=\"sans-serif\" font-size=\"11\">" << escape(s.name) << "</text>\n";
  }
  o << "</svg>\n";
  return o.str();
}

}  // namespace rpl::app
