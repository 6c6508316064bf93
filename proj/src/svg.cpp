#include "flowcast/svg.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <sstream>

#include "flowcast/errors.hpp"

namespace flowcast::svg {

namespace {

constexpr double kWidth = 720, kHeight = 420;
constexpr double kLeft = 70, kRight = 150, kTop = 40, kBottom = 55;

std::string num(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.2f", v);
  return buf;
}

std::string tick(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.4g", v);
  return buf;
}

std::string escape(const std::string& s) {
  std::string out;
  for (char c : s) {
    switch (c) {
      case '&': out += "&amp;"; break;
      case '<': out += "&lt;"; break;
      case '>': out += "&gt;"; break;
      case '"': out += "&quot;"; break;
      default: out += c;
    }
  }
  return out;
}

struct Range {
  double lo = std::numeric_limits<double>::infinity();
  double hi = -std::numeric_limits<double>::infinity();
  void add(double v) {
    if (!std::isfinite(v)) return;
    lo = std::min(lo, v);
    hi = std::max(hi, v);
  }
  bool valid() const { return lo <= hi; }
  void pad() {
    if (hi - lo < 1e-12) {
      lo -= 0.5;
      hi += 0.5;
    }
  }
};

class Frame {
 public:
  Frame(Range x, Range y) : x_(x), y_(y) {}
  double px(double v) const { return kLeft + (v - x_.lo) / (x_.hi - x_.lo) * (kWidth - kLeft - kRight); }
  double py(double v) const { return kHeight - kBottom - (v - y_.lo) / (y_.hi - y_.lo) * (kHeight - kTop - kBottom); }

  void axes(std::ostringstream& out, const Axes& a) const {
    const double x0 = kLeft, x1 = kWidth - kRight, y0 = kHeight - kBottom, y1 = kTop;
    out << "<line x1=\"" << num(x0) << "\" y1=\"" << num(y0) << "\" x2=\"" << num(x1) << "\" y2=\"" << num(y0)
        << "\" stroke=\"#333\"/>\n";
    out << "<line x1=\"" << num(x0) << "\" y1=\"" << num(y0) << "\" x2=\"" << num(x0) << "\" y2=\"" << num(y1)
        << "\" stroke=\"#333\"/>\n";
    for (int i = 0; i <= 4; ++i) {
      const double xv = x_.lo + (x_.hi - x_.lo) * i / 4.0;
      const double yv = y_.lo + (y_.hi - y_.lo) * i / 4.0;
      out << "<text x=\"" << num(px(xv)) << "\" y=\"" << num(y0 + 18) << "\" font-size=\"11\" text-anchor=\"middle\">"
          << tick(xv) << "</text>\n";
      out << "<text x=\"" << num(x0 - 6) << "\" y=\"" << num(py(yv) + 4) << "\" font-size=\"11\" text-anchor=\"end\">"
          << tick(yv) << "</text>\n";
    }
    out << "<text x=\"" << num((x0 + x1) / 2) << "\" y=\"" << num(kHeight - 12)
        << "\" font-size=\"13\" text-anchor=\"middle\">" << escape(a.x_label) << "</text>\n";
    out << "<text x=\"16\" y=\"" << num((y0 + y1) / 2) << "\" font-size=\"13\" text-anchor=\"middle\" transform=\"rotate(-90 16 "
        << num((y0 + y1) / 2) << ")\">" << escape(a.y_label) << "</text>\n";
  }

 private:
  Range x_, y_;
};

void open(std::ostringstream& out, const std::string& title, double w = kWidth, double h = kHeight) {
  out << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << num(w) << "\" height=\"" << num(h)
      << "\" viewBox=\"0 0 " << num(w) << ' ' << num(h) << "\" font-family=\"sans-serif\">\n";
  out << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  out << "<text x=\"" << num(w / 2) << "\" y=\"24\" font-size=\"15\" text-anchor=\"middle\">" << escape(title)
      << "</text>\n";
}

}  // namespace

std::string line_chart(const Axes& axes, const std::vector<Series>& series, const std::optional<Band>& band) {
  Range xr, yr;
  for (const auto& s : series) {
    if (s.xs.size() != s.ys.size()) throw StructuralError("series '" + s.name + "' has mismatched x and y");
    for (std::size_t i = 0; i < s.xs.size(); ++i)
      if (std::isfinite(s.xs[i]) && std::isfinite(s.ys[i])) {
        xr.add(s.xs[i]);
        yr.add(s.ys[i]);
      }
  }
  if (band) {
    if (band->lower.size() != band->xs.size() || band->upper.size() != band->xs.size()) {
      throw StructuralError("band arrays differ in length");
    }
    for (std::size_t i = 0; i < band->xs.size(); ++i) {
      xr.add(band->xs[i]);
      yr.add(band->lower[i]);
      yr.add(band->upper[i]);
    }
  }
  if (!xr.valid() || !yr.valid()) throw SizeError("line chart has no finite points");
  xr.pad();
  yr.pad();
  const Frame f(xr, yr);

  std::ostringstream out;
  open(out, axes.title);
  if (band && !band->xs.empty()) {
    out << "<polygon fill=\"" << band->color << "\" fill-opacity=\"0.2\" stroke=\"none\" points=\"";
    for (std::size_t i = 0; i < band->xs.size(); ++i) out << num(f.px(band->xs[i])) << ',' << num(f.py(band->upper[i])) << ' ';
    for (std::size_t i = band->xs.size(); i-- > 0;) out << num(f.px(band->xs[i])) << ',' << num(f.py(band->lower[i])) << ' ';
    out << "\"/>\n";
  }
  for (const auto& s : series) {
    out << "<polyline fill=\"none\" stroke=\"" << s.color << "\" stroke-width=\"1.5\""
        << (s.dashed ? " stroke-dasharray=\"5,3\"" : "") << " points=\"";
    for (std::size_t i = 0; i < s.xs.size(); ++i)
      if (std::isfinite(s.xs[i]) && std::isfinite(s.ys[i])) out << num(f.px(s.xs[i])) << ',' << num(f.py(s.ys[i])) << ' ';
    out << "\"/>\n";
  }
  f.axes(out, axes);
  double ly = kTop + 10;
  auto legend = [&](const std::string& name, const std::string& color, bool dashed, bool filled) {
    const double lx = kWidth - kRight + 12;
    if (filled) {
      out << "<rect x=\"" << num(lx) << "\" y=\"" << num(ly - 6) << "\" width=\"20\" height=\"10\" fill=\"" << color
          << "\" fill-opacity=\"0.2\"/>\n";
    } else {
      out << "<line x1=\"" << num(lx) << "\" y1=\"" << num(ly) << "\" x2=\"" << num(lx + 20) << "\" y2=\"" << num(ly)
          << "\" stroke=\"" << color << "\" stroke-width=\"2\"" << (dashed ? " stroke-dasharray=\"5,3\"" : "") << "/>\n";
    }
    out << "<text x=\"" << num(lx + 26) << "\" y=\"" << num(ly + 4) << "\" font-size=\"11\">" << escape(name) << "</text>\n";
    ly += 18;
  };
  for (const auto& s : series) legend(s.name, s.color, s.dashed, false);
  if (band) legend("interval", band->color, false, true);
  out << "</svg>\n";
  return out.str();
}

std::string heatmap(const std::string& title, const std::vector<std::string>& labels, const Tensor& m) {
  if (m.rank() != 2 || m.dim(0) != m.dim(1)) throw StructuralError("heatmap needs a square matrix");
  const std::size_t n = m.dim(0);
  if (n == 0) throw SizeError("heatmap of an empty matrix");
  if (labels.size() != n) throw StructuralError("heatmap labels do not match the matrix size");
  Range r;
  for (double v : m.data()) r.add(v);
  if (!r.valid()) throw SizeError("heatmap has no finite values");
  const double lo = std::min(r.lo, 0.0), hi = std::max(r.hi, lo + 1e-12);

  const double cell = std::clamp(480.0 / static_cast<double>(n), 8.0, 60.0);
  const double left = 90, top = 50;
  const double w = left + cell * static_cast<double>(n) + 110, h = top + cell * static_cast<double>(n) + 40;
  std::ostringstream out;
  open(out, title, w, h);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < n; ++j) {
      const double v = m(i, j);
      const double t = std::isfinite(v) ? (v - lo) / (hi - lo) : 0.0;
      const int shade = static_cast<int>(std::lround(255.0 * (1.0 - t)));
      char color[16];
      std::snprintf(color, sizeof color, "#%02x%02xff", shade, shade);
      out << "<rect x=\"" << num(left + cell * j) << "\" y=\"" << num(top + cell * i) << "\" width=\"" << num(cell)
          << "\" height=\"" << num(cell) << "\" fill=\"" << color << "\" stroke=\"#ddd\"><title>" << escape(labels[i])
          << " -&gt; " << escape(labels[j]) << ": " << tick(v) << "</title></rect>\n";
    }
    out << "<text x=\"" << num(left - 6) << "\" y=\"" << num(top + cell * (i + 0.5) + 4)
        << "\" font-size=\"11\" text-anchor=\"end\">" << escape(labels[i]) << "</text>\n";
    out << "<text x=\"" << num(left + cell * (i + 0.5)) << "\" y=\"" << num(top + cell * n + 16)
        << "\" font-size=\"11\" text-anchor=\"middle\">" << escape(labels[i]) << "</text>\n";
  }
  const double sx = left + cell * n + 20;
  out << "<text x=\"" << num(sx) << "\" y=\"" << num(top + 10) << "\" font-size=\"11\">" << tick(hi) << "</text>\n";
  out << "<text x=\"" << num(sx) << "\" y=\"" << num(top + cell * n) << "\" font-size=\"11\">" << tick(lo) << "</text>\n";
  out << "</svg>\n";
  return out.str();
}

std::string histogram(const Axes& axes, const std::vector<double>& samples, std::size_t bins) {
  if (bins == 0) throw DomainError("histogram needs at least one bin");
  Range r;
  for (double v : samples) r.add(v);
  if (!r.valid()) throw SizeError("histogram of an empty sample");
  r.pad();
  std::vector<double> counts(bins, 0.0);
  const double width = (r.hi - r.lo) / static_cast<double>(bins);
  for (double v : samples) {
    if (!std::isfinite(v)) continue;
    auto b = static_cast<std::size_t>((v - r.lo) / width);
    counts[std::min(b, bins - 1)] += 1.0;
  }
  double total = 0.0;
  for (double c : counts) total += c;
  // Densities, so the bars integrate to one like a PDF.
  std::vector<double> density(bins);
  Range yr;
  yr.add(0.0);
  for (std::size_t b = 0; b < bins; ++b) yr.add(density[b] = counts[b] / (total * width));
  yr.pad();
  const Frame f(r, yr);

  std::ostringstream out;
  open(out, axes.title);
  for (std::size_t b = 0; b < bins; ++b) {
    const double x0 = f.px(r.lo + width * static_cast<double>(b)), x1 = f.px(r.lo + width * static_cast<double>(b + 1));
    const double y = f.py(density[b]), y0 = f.py(0.0);
    out << "<rect x=\"" << num(x0) << "\" y=\"" << num(y) << "\" width=\"" << num(x1 - x0) << "\" height=\""
        << num(y0 - y) << "\" fill=\"#4c72b0\" stroke=\"white\"><title>" << static_cast<long>(counts[b])
        << "</title></rect>\n";
  }
  f.axes(out, axes);
  out << "</svg>\n";
  return out.str();
}

}  // namespace flowcast::svg
