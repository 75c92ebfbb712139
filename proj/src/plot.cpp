#include "cgrpo/plot.hpp"

#include "cgrpo/csv.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <map>
#include <set>
#include <sstream>
#include <string>

namespace cgrpo {

namespace fs = std::filesystem;

namespace {

constexpr int kMaxBins = 200;

const char* kGreen = "#2a9d3f";
const char* kRed = "#d62728";
const char* kBlue = "#1f77b4";
const char* kGrey = "#555555";

std::string f2(double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.2f", v);
  return buf;
}

std::string g3(double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.3g", v);
  return buf;
}

std::string escape(const std::string& s) {
  std::string out;
  for (char c : s) {
    if (c == '<') out += "&lt;";
    else if (c == '>') out += "&gt;";
    else if (c == '&') out += "&amp;";
    else out += c;
  }
  return out;
}

class Svg {
 public:
  Svg(double w, double h) : w_(w), h_(h) {}

  void rect(double x, double y, double w, double h, const std::string& fill, const std::string& extra = "") {
    os_ << "<rect x=\"" << f2(x) << "\" y=\"" << f2(y) << "\" width=\"" << f2(w) << "\" height=\"" << f2(h)
        << "\" fill=\"" << fill << "\"" << extra << "/>\n";
  }
  void line(double x1, double y1, double x2, double y2, const std::string& stroke, double width = 1.0,
            const std::string& extra = "") {
    os_ << "<line x1=\"" << f2(x1) << "\" y1=\"" << f2(y1) << "\" x2=\"" << f2(x2) << "\" y2=\"" << f2(y2)
        << "\" stroke=\"" << stroke << "\" stroke-width=\"" << f2(width) << "\"" << extra << "/>\n";
  }
  void polyline(const std::vector<std::pair<double, double>>& pts, const std::string& stroke) {
    if (pts.empty()) return;
    os_ << "<polyline fill=\"none\" stroke=\"" << stroke << "\" stroke-width=\"1.2\" points=\"";
    for (std::size_t i = 0; i < pts.size(); ++i) os_ << (i ? " " : "") << f2(pts[i].first) << ',' << f2(pts[i].second);
    os_ << "\"/>\n";
  }
  void polygon(const std::vector<std::pair<double, double>>& pts, const std::string& fill) {
    if (pts.empty()) return;
    os_ << "<polygon fill=\"" << fill << "\" fill-opacity=\"0.2\" stroke=\"none\" points=\"";
    for (std::size_t i = 0; i < pts.size(); ++i) os_ << (i ? " " : "") << f2(pts[i].first) << ',' << f2(pts[i].second);
    os_ << "\"/>\n";
  }
  void text(double x, double y, const std::string& s, const std::string& anchor = "start", int size = 11) {
    os_ << "<text x=\"" << f2(x) << "\" y=\"" << f2(y) << "\" font-size=\"" << size
        << "\" font-family=\"sans-serif\" text-anchor=\"" << anchor << "\">" << escape(s) << "</text>\n";
  }

  std::string str() const {
    std::ostringstream out;
    out << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << f2(w_) << "\" height=\"" << f2(h_)
        << "\" viewBox=\"0 0 " << f2(w_) << ' ' << f2(h_) << "\">\n";
    out << "<rect x=\"0\" y=\"0\" width=\"" << f2(w_) << "\" height=\"" << f2(h_) << "\" fill=\"white\"/>\n";
    out << os_.str() << "</svg>\n";
    return out.str();
  }

 private:
  double w_, h_;
  std::ostringstream os_;
};

struct Frame {
  double x0, y0, w, h;     // pixel box
  double lo, hi;           // y data range
  double xlo = 0, xhi = 1;  // x data range

  double px(double x) const { return x0 + (xhi > xlo ? (x - xlo) / (xhi - xlo) : 0.5) * w; }
  double py(double y) const { return y0 + h - (hi > lo ? (y - lo) / (hi - lo) : 0.5) * h; }
};

void axes(Svg& svg, const Frame& f, const std::string& title, bool x_labels) {
  svg.rect(f.x0, f.y0, f.w, f.h, "none", " stroke=\"#999999\"");
  for (int i = 0; i <= 4; ++i) {
    const double v = f.lo + (f.hi - f.lo) * i / 4.0;
    const double y = f.py(v);
    svg.line(f.x0, y, f.x0 + f.w, y, "#e5e5e5", 0.6);
    svg.text(f.x0 - 4, y + 4, g3(v), "end", 10);
  }
  if (x_labels) {
    for (int i = 0; i <= 4; ++i) {
      const double v = f.xlo + (f.xhi - f.xlo) * i / 4.0;
      svg.text(f.px(v), f.y0 + f.h + 14, g3(std::round(v)), "middle", 10);
    }
  }
  svg.text(f.x0, f.y0 - 6, title, "start", 12);
}

std::pair<double, double> padded_range(const std::vector<double>& values, double floor_lo) {
  double lo = floor_lo, hi = floor_lo;
  for (double v : values) {
    if (!std::isfinite(v)) continue;
    lo = std::min(lo, v);
    hi = std::max(hi, v);
  }
  if (hi - lo < 1e-12) hi = lo + 1.0;
  return {lo, lo + (hi - lo) * 1.08};
}

double mean_of(const std::vector<double>& v) {
  double s = 0.0;
  int n = 0;
  for (double x : v) {
    if (std::isfinite(x)) {
      s += x;
      ++n;
    }
  }
  return n ? s / n : std::nan("");
}

/// Sample std over finite values; 0 for a single value.
double std_of(const std::vector<double>& v) {
  const double m = mean_of(v);
  double ss = 0.0;
  int n = 0;
  for (double x : v) {
    if (std::isfinite(x)) {
      ss += (x - m) * (x - m);
      ++n;
    }
  }
  return n > 1 ? std::sqrt(ss / (n - 1)) : 0.0;
}

void write_text(const fs::path& p, const std::string& s) {
  std::ofstream out(p, std::ios::binary | std::ios::trunc);
  out << s;
  if (!out) throw std::runtime_error("cannot write " + p.string());
}

std::string strip_seed(const std::string& cell) {
  const auto pos = cell.rfind("_s");
  if (pos == std::string::npos) return cell;
  const std::string tail = cell.substr(pos + 2);
  if (tail.empty() || !std::all_of(tail.begin(), tail.end(), [](char c) { return c >= '0' && c <= '9'; })) return cell;
  return cell.substr(0, pos);
}

struct Series {
  std::string column;
  std::string label;
  const char* color;
};

struct Panel {
  std::string title;
  std::vector<Series> series;
  bool unit_range;  // fixed [0, 1]
};

const std::vector<Panel>& curve_panels() {
  static const std::vector<Panel> panels = {
      {"task: goal rate", {{"goal_rate", "goal", kGreen}}, true},
      {"behavior rates (per step)",
       {{"lava_rate_per_step", "lava", kRed}, {"battery_rate_per_step", "battery", kBlue}},
       false},
      {"multipliers",
       {{"lambda_R", "lambda_R", kGreen}, {"lambda_lava", "lambda_lava", kRed}, {"lambda_battery", "lambda_battery", kBlue}},
       false},
      {"effective weights",
       {{"eff_w_R", "e_R", kGreen}, {"eff_w_lava", "e_lava", kRed}, {"eff_w_battery", "e_battery", kBlue}},
       false},
  };
  return panels;
}

/// Per-seed bin means, then mean and std across seeds per bin.
struct Binned {
  std::vector<double> x, mean, sd;
};

Binned bin_series(const std::vector<CsvTable>& tables, const std::string& column, std::size_t rows, std::size_t bin) {
  Binned b;
  const std::size_t bins = (rows + bin - 1) / bin;
  const std::vector<double> updates = tables.front().numbers("update");
  std::vector<std::vector<double>> cols;
  for (const CsvTable& t : tables) cols.push_back(t.numbers(column));
  for (std::size_t k = 0; k < bins; ++k) {
    const std::size_t a = k * bin;
    const std::size_t e = std::min(rows, a + bin);
    std::vector<double> xs(updates.begin() + static_cast<std::ptrdiff_t>(a), updates.begin() + static_cast<std::ptrdiff_t>(e));
    std::vector<double> per_seed;
    for (const auto& c : cols) {
      per_seed.push_back(mean_of({c.begin() + static_cast<std::ptrdiff_t>(a), c.begin() + static_cast<std::ptrdiff_t>(e)}));
    }
    b.x.push_back(mean_of(xs));
    b.mean.push_back(mean_of(per_seed));
    b.sd.push_back(std_of(per_seed));
  }
  return b;
}

std::string render_curves(const std::string& title, const std::vector<CsvTable>& tables) {
  std::vector<std::string> required = {"update"};
  for (const Panel& p : curve_panels()) {
    for (const Series& s : p.series) required.push_back(s.column);
  }
  for (const CsvTable& t : tables) t.require(required);

  std::size_t rows = tables.front().rows.size();
  for (const CsvTable& t : tables) rows = std::min(rows, t.rows.size());
  if (rows == 0) throw std::runtime_error(tables.front().source.string() + ": no metrics rows");
  const std::size_t bin = (rows + kMaxBins - 1) / kMaxBins;
  const std::vector<double> updates = tables.front().numbers("update");

  const double left = 60, right = 140, top = 50, panel_h = 150, gap = 45, width = 760;
  const double plot_w = width - left - right;
  const double height = top + curve_panels().size() * (panel_h + gap);
  Svg svg(width, height);
  svg.text(left, 20, title, "start", 14);
  svg.text(left, 36,
           std::to_string(tables.size()) + " seed(s), " + std::to_string(rows) + " updates, bin = " +
               std::to_string(bin) + " update(s); line = mean over seeds, band = +/- 1 std",
           "start", 10);

  double y0 = top + 10;
  for (std::size_t pi = 0; pi < curve_panels().size(); ++pi) {
    const Panel& panel = curve_panels()[pi];
    std::vector<Binned> data;
    std::vector<double> all;
    for (const Series& s : panel.series) {
      data.push_back(bin_series(tables, s.column, rows, bin));
      for (std::size_t k = 0; k < data.back().mean.size(); ++k) {
        all.push_back(data.back().mean[k] + data.back().sd[k]);
        all.push_back(data.back().mean[k] - data.back().sd[k]);
      }
    }
    // Threshold markers for the behavior panel.
    std::vector<std::pair<double, const char*>> marks;
    if (pi == 1) {
      for (const auto& [col, color] : {std::pair{"d_lava", kRed}, std::pair{"d_battery", kBlue}}) {
        if (tables.front().index(col) >= 0) {
          const double d = tables.front().number(0, col);
          if (std::isfinite(d)) {
            marks.push_back({d, color});
            all.push_back(d);
          }
        }
      }
    }
    Frame f{left, y0, plot_w, panel_h, 0.0, 1.0, updates.front(), updates[rows - 1]};
    if (!panel.unit_range) std::tie(f.lo, f.hi) = padded_range(all, 0.0);
    axes(svg, f, panel.title, pi + 1 == curve_panels().size());

    for (std::size_t si = 0; si < panel.series.size(); ++si) {
      const Binned& b = data[si];
      std::vector<std::pair<double, double>> line, band_top, band_bottom;
      const auto flush = [&] {
        if (tables.size() > 1 && !band_top.empty()) {
          std::vector<std::pair<double, double>> poly = band_top;
          poly.insert(poly.end(), band_bottom.rbegin(), band_bottom.rend());
          svg.polygon(poly, panel.series[si].color);
        }
        svg.polyline(line, panel.series[si].color);
        line.clear();
        band_top.clear();
        band_bottom.clear();
      };
      for (std::size_t k = 0; k < b.x.size(); ++k) {
        if (!std::isfinite(b.mean[k])) {
          flush();
          continue;
        }
        const double x = f.px(b.x[k]);
        line.push_back({x, f.py(b.mean[k])});
        band_top.push_back({x, f.py(std::min(f.hi, b.mean[k] + b.sd[k]))});
        band_bottom.push_back({x, f.py(std::max(f.lo, b.mean[k] - b.sd[k]))});
      }
      flush();
      const double ly = y0 + 14 + 16 * static_cast<double>(si);
      svg.line(left + plot_w + 10, ly - 4, left + plot_w + 28, ly - 4, panel.series[si].color, 2.0);
      svg.text(left + plot_w + 32, ly, panel.series[si].label, "start", 10);
    }
    for (const auto& [d, color] : marks) {
      svg.line(f.x0, f.py(d), f.x0 + f.w, f.py(d), color, 1.0, " stroke-dasharray=\"5,4\"");
    }
    if (!marks.empty()) {
      svg.text(left + plot_w + 10, y0 + 14 + 16 * static_cast<double>(panel.series.size()), "dashed: threshold", "start", 10);
    }
    y0 += panel_h + gap;
  }
  svg.text(left + plot_w / 2, height - 8, "update", "middle", 11);
  return svg.str();
}

struct SweepPoint {
  std::vector<double> goal, lava, battery;
};

std::string render_sweep(const std::vector<CsvTable>& evals) {
  // (lambda_battery, mode, lambda_lava) -> per-seed rates
  std::map<double, std::map<std::string, std::map<double, SweepPoint>>> data;
  std::set<double> lavas;
  std::set<std::string> modes;
  for (const CsvTable& t : evals) {
    for (std::size_t r = 0; r < t.rows.size(); ++r) {
      const double ll = t.number(r, "lambda_lava");
      const double lb = t.number(r, "lambda_battery");
      if (!std::isfinite(ll) || !std::isfinite(lb)) continue;  // constrained cell
      const std::string mode = t.at(r, "mode");
      SweepPoint& p = data[lb][mode][ll];
      p.goal.push_back(t.number(r, "goal_rate"));
      p.lava.push_back(t.number(r, "lava_rate_per_step"));
      p.battery.push_back(t.number(r, "battery_rate_per_step"));
      lavas.insert(ll);
      modes.insert(mode);
    }
  }
  if (data.empty()) return {};

  const std::vector<double> lava_list(lavas.begin(), lavas.end());
  const std::vector<std::string> mode_list(modes.begin(), modes.end());
  const char* mode_colors[] = {"#4c72b0", "#dd8452", "#55a868", "#c44e52"};
  const char* metric_titles[] = {"goal rate", "lava rate (per step)", "battery rate (per step)"};

  const double left = 55, top = 60, panel_w = 300, panel_h = 170, gap_x = 60, gap_y = 70;
  const double width = left + 3 * panel_w + 2 * gap_x + 20;
  const double height = top + static_cast<double>(data.size()) * (panel_h + gap_y);
  Svg svg(width, height);
  svg.text(left, 20, "fixed-weight sweep: evaluation rates vs lambda_lava (mean +/- std over seeds)", "start", 14);
  for (std::size_t m = 0; m < mode_list.size(); ++m) {
    const double lx = left + 130.0 * static_cast<double>(m);
    svg.rect(lx, 30, 12, 12, mode_colors[m % 4]);
    svg.text(lx + 16, 40, mode_list[m], "start", 11);
  }

  double y0 = top + 10;
  for (const auto& [lb, by_mode] : data) {
    for (int metric = 0; metric < 3; ++metric) {
      const double x0 = left + metric * (panel_w + gap_x);
      std::vector<double> tops;
      for (const auto& [mode, by_lava] : by_mode) {
        for (const auto& [ll, p] : by_lava) {
          const auto& v = metric == 0 ? p.goal : metric == 1 ? p.lava : p.battery;
          tops.push_back(mean_of(v) + std_of(v));
        }
      }
      Frame f{x0, y0, panel_w, panel_h, 0.0, 1.0};
      if (metric != 0) std::tie(f.lo, f.hi) = padded_range(tops, 0.0);
      axes(svg, f, std::string(metric_titles[metric]) + ", lambda_battery = " + g3(lb), false);

      const double slot = panel_w / static_cast<double>(lava_list.size());
      const double bar_w = slot * 0.8 / static_cast<double>(mode_list.size());
      for (std::size_t li = 0; li < lava_list.size(); ++li) {
        const double sx = x0 + slot * static_cast<double>(li) + slot * 0.1;
        svg.text(sx + slot * 0.4, y0 + panel_h + 14, g3(lava_list[li]), "middle", 9);
        for (std::size_t m = 0; m < mode_list.size(); ++m) {
          const auto mit = by_mode.find(mode_list[m]);
          if (mit == by_mode.end()) continue;
          const auto lit = mit->second.find(lava_list[li]);
          if (lit == mit->second.end()) continue;
          const auto& v = metric == 0 ? lit->second.goal : metric == 1 ? lit->second.lava : lit->second.battery;
          const double mu = mean_of(v), sd = std_of(v);
          const double bx = sx + bar_w * static_cast<double>(m);
          svg.rect(bx, f.py(mu), bar_w, f.py(f.lo) - f.py(mu), mode_colors[m % 4]);
          const double cx = bx + bar_w / 2;
          svg.line(cx, f.py(std::min(f.hi, mu + sd)), cx, f.py(std::max(f.lo, mu - sd)), kGrey, 1.0);
          svg.line(cx - bar_w / 4, f.py(std::min(f.hi, mu + sd)), cx + bar_w / 4, f.py(std::min(f.hi, mu + sd)), kGrey, 1.0);
          svg.line(cx - bar_w / 4, f.py(std::max(f.lo, mu - sd)), cx + bar_w / 4, f.py(std::max(f.lo, mu - sd)), kGrey, 1.0);
        }
      }
      svg.text(x0 + panel_w / 2, y0 + panel_h + 30, "lambda_lava", "middle", 10);
    }
    y0 += panel_h + gap_y;
  }
  return svg.str();
}

}  // namespace

std::vector<fs::path> plot_run(const fs::path& run_dir) {
  if (!fs::is_directory(run_dir)) throw std::runtime_error("not a directory: " + run_dir.string());
  const fs::path out = run_dir / "plots";
  std::vector<fs::path> written;

  std::vector<fs::path> cells;
  for (const auto& e : fs::directory_iterator(run_dir)) {
    if (e.is_directory() && e.path().filename() != "plots") cells.push_back(e.path());
  }
  std::sort(cells.begin(), cells.end());

  std::vector<CsvTable> evals;
  std::map<std::string, std::vector<CsvTable>> metrics_by_point;
  for (const fs::path& c : cells) {
    if (fs::exists(c / "eval.csv")) {
      evals.push_back(read_csv(c / "eval.csv"));
      evals.back().require({"mode", "lambda_lava", "lambda_battery", "goal_rate", "lava_rate_per_step",
                            "battery_rate_per_step"});
    }
    if (fs::exists(c / "metrics.csv")) {
      metrics_by_point[strip_seed(c.filename().string())].push_back(read_csv(c / "metrics.csv"));
    }
  }

  if (fs::exists(run_dir / "metrics.csv")) {
    fs::create_directories(out);
    const fs::path p = out / "curves.svg";
    write_text(p, render_curves(run_dir.filename().string(), {read_csv(run_dir / "metrics.csv")}));
    written.push_back(p);
  }
  for (const auto& [point, tables] : metrics_by_point) {
    fs::create_directories(out);
    const fs::path p = out / ("curves_" + point + ".svg");
    write_text(p, render_curves(point, tables));
    written.push_back(p);
  }
  if (!evals.empty()) {
    const std::string sweep = render_sweep(evals);
    if (!sweep.empty()) {
      fs::create_directories(out);
      write_text(out / "sweep.svg", sweep);
      written.push_back(out / "sweep.svg");
    }
  }
  if (written.empty()) throw std::runtime_error(run_dir.string() + ": no metrics.csv or eval.csv to plot");
  return written;
}

}  // namespace cgrpo
