#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <map>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "sdeop/harness.hpp"

namespace sdeop {

namespace {

struct Table {
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;

  std::size_t col(const std::string& name) const {
    for (std::size_t i = 0; i < header.size(); ++i) {
      if (header[i] == name) return i;
    }
    throw std::runtime_error("plot: column '" + name + "' missing");
  }
};

Table read_csv(const std::filesystem::path& path) {
  std::ifstream is(path);
  if (!is) throw std::runtime_error("plot: missing input file " + path.string());
  Table t;
  std::string line;
  bool first = true;
  while (std::getline(is, line)) {
    if (line.empty()) continue;
    std::vector<std::string> cells;
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) cells.push_back(cell);
    if (first) {
      t.header = cells;
      first = false;
    } else {
      t.rows.push_back(cells);
    }
  }
  if (first) throw std::runtime_error("plot: empty input file " + path.string());
  return t;
}

std::string num(double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.6g", v);
  return buf;
}

struct Series {
  std::string label, color;
  std::vector<double> x, y;
};

constexpr double kW = 720, kH = 440, kMarginL = 70, kMarginR = 20, kMarginT = 40, kMarginB = 50;

// Shared frame: coordinate box, tick labels, title, legend.
class Chart {
 public:
  Chart(std::string title, bool logy) : title_(std::move(title)), logy_(logy) {}

  void add(Series s) {
    if (logy_) {
      for (double& v : s.y) v = std::log10(std::max(v, 1e-300));
    }
    series_.push_back(std::move(s));
  }

  void write(const std::filesystem::path& path) {
    double xlo = 1e300, xhi = -1e300, ylo = 1e300, yhi = -1e300;
    for (const Series& s : series_) {
      for (const double v : s.x) { xlo = std::min(xlo, v); xhi = std::max(xhi, v); }
      for (const double v : s.y) { ylo = std::min(ylo, v); yhi = std::max(yhi, v); }
    }
    if (xhi <= xlo) xhi = xlo + 1;
    if (yhi <= ylo) yhi = ylo + 1;
    const double ypad = 0.05 * (yhi - ylo);
    ylo -= ypad;
    yhi += ypad;

    auto px = [&](double x) { return kMarginL + (x - xlo) / (xhi - xlo) * (kW - kMarginL - kMarginR); };
    auto py = [&](double y) { return kH - kMarginB - (y - ylo) / (yhi - ylo) * (kH - kMarginT - kMarginB); };

    std::ofstream os(path);
    if (!os) throw std::runtime_error("plot: cannot write " + path.string());
    os << "<svg xmlns='http://www.w3.org/2000/svg' viewBox='0 0 " << kW << ' ' << kH << "'>\n";
    os << "<rect width='" << kW << "' height='" << kH << "' fill='white'/>\n";
    os << "<text x='" << kW / 2 << "' y='24' text-anchor='middle' font-size='16'>" << title_
       << "</text>\n";
    os << "<rect x='" << kMarginL << "' y='" << kMarginT << "' width='" << kW - kMarginL - kMarginR
       << "' height='" << kH - kMarginT - kMarginB << "' fill='none' stroke='black'/>\n";
    for (int i = 0; i <= 4; ++i) {
      const double fx = xlo + (xhi - xlo) * i / 4.0;
      const double fy = ylo + (yhi - ylo) * i / 4.0;
      os << "<text x='" << num(px(fx)) << "' y='" << kH - kMarginB + 18
         << "' text-anchor='middle' font-size='11'>" << num(fx) << "</text>\n";
      os << "<text x='" << kMarginL - 8 << "' y='" << num(py(fy) + 4)
         << "' text-anchor='end' font-size='11'>" << (logy_ ? "1e" + num(fy) : num(fy))
         << "</text>\n";
    }
    double ly = kMarginT + 16;
    for (const Series& s : series_) {
      os << "<polyline fill='none' stroke='" << s.color << "' stroke-width='1.5' points='";
      for (std::size_t i = 0; i < s.x.size(); ++i) {
        os << num(px(s.x[i])) << ',' << num(py(s.y[i])) << ' ';
      }
      os << "'/>\n";
      os << "<line x1='" << kW - 180 << "' y1='" << ly << "' x2='" << kW - 150 << "' y2='" << ly
         << "' stroke='" << s.color << "' stroke-width='2'/>\n";
      os << "<text x='" << kW - 144 << "' y='" << ly + 4 << "' font-size='12'>" << s.label
         << "</text>\n";
      ly += 18;
    }
    os << "</svg>\n";
  }

 private:
  std::string title_;
  bool logy_;
  std::vector<Series> series_;
};

// Stem chart for coefficient sparsity; entries below the threshold are
// rendered as class='zero' markers.
void write_stems(const std::filesystem::path& path, const std::string& title,
                 const std::vector<double>& values, double threshold) {
  double ylo = 0, yhi = 0;
  for (const double v : values) { ylo = std::min(ylo, v); yhi = std::max(yhi, v); }
  if (yhi <= ylo) yhi = ylo + 1;
  const double ypad = 0.08 * (yhi - ylo);
  ylo -= ypad;
  yhi += ypad;
  const double n = static_cast<double>(values.size());
  auto px = [&](double i) { return kMarginL + (i + 0.5) / n * (kW - kMarginL - kMarginR); };
  auto py = [&](double y) { return kH - kMarginB - (y - ylo) / (yhi - ylo) * (kH - kMarginT - kMarginB); };

  std::ofstream os(path);
  if (!os) throw std::runtime_error("plot: cannot write " + path.string());
  os << "<svg xmlns='http://www.w3.org/2000/svg' viewBox='0 0 " << kW << ' ' << kH << "'>\n";
  os << "<rect width='" << kW << "' height='" << kH << "' fill='white'/>\n";
  os << "<text x='" << kW / 2 << "' y='24' text-anchor='middle' font-size='16'>" << title
     << "</text>\n";
  os << "<rect x='" << kMarginL << "' y='" << kMarginT << "' width='" << kW - kMarginL - kMarginR
     << "' height='" << kH - kMarginT - kMarginB << "' fill='none' stroke='black'/>\n";
  os << "<line x1='" << kMarginL << "' y1='" << num(py(0)) << "' x2='" << kW - kMarginR
     << "' y2='" << num(py(0)) << "' stroke='#999' stroke-dasharray='4 3'/>\n";
  for (std::size_t i = 0; i < values.size(); ++i) {
    const bool zero = std::fabs(values[i]) < threshold;
    const char* color = zero ? "#bbbbbb" : "#1f77b4";
    os << "<line x1='" << num(px(static_cast<double>(i))) << "' y1='" << num(py(0)) << "' x2='"
       << num(px(static_cast<double>(i))) << "' y2='" << num(py(values[i])) << "' stroke='"
       << color << "'/>\n";
    os << "<circle class='" << (zero ? "zero" : "nonzero") << "' cx='"
       << num(px(static_cast<double>(i))) << "' cy='" << num(py(values[i])) << "' r='3' fill='"
       << color << "'/>\n";
  }
  os << "</svg>\n";
}

double to_d(const std::string& s) { return std::strtod(s.c_str(), nullptr); }

}  // namespace

void emit_plots(const std::filesystem::path& run_dir) {
  namespace fs = std::filesystem;

  bool any_history = false;
  for (const char* model : {"multiauto", "pca", "deeponet", "pce"}) {
    const fs::path hpath = run_dir / (std::string("history_") + model + ".csv");
    if (!fs::exists(hpath)) continue;
    any_history = true;
    const Table t = read_csv(hpath);
    Series train{"train", "#1f77b4", {}, {}}, val{"validation", "#d62728", {}, {}};
    const std::size_t ce = t.col("epoch"), ct = t.col("train_loss"), cv = t.col("val_loss");
    for (const auto& r : t.rows) {
      train.x.push_back(to_d(r[ce]));
      train.y.push_back(to_d(r[ct]));
      val.x.push_back(to_d(r[ce]));
      val.y.push_back(to_d(r[cv]));
    }
    Chart c(std::string("training and validation loss (") + model + ")", true);
    c.add(std::move(train));
    c.add(std::move(val));
    c.write(run_dir / (std::string("loss_curves_") + model + ".svg"));
  }
  if (!any_history) {
    throw std::runtime_error("plot: no history_*.csv found in " + run_dir.string());
  }

  auto overlay = [&](const fs::path& stats_path, const std::string& tag) {
    if (!fs::exists(stats_path)) return;
    const Table t = read_csv(stats_path);
    const std::size_t ci = t.col("index");
    const std::size_t cx = t.header[1] == "coord0" ? t.col("coord0") : ci;
    for (const auto& [metric, ref_col, pred_col] :
         {std::tuple{"mean", "ref_mean", "pred_mean"}, std::tuple{"variance", "ref_var", "pred_var"}}) {
      Series ref{"reference", "#d62728", {}, {}}, pred{"prediction", "#1f77b4", {}, {}};
      const std::size_t cr = t.col(ref_col), cp = t.col(pred_col);
      for (const auto& r : t.rows) {
        const double x = to_d(r[cx]);
        ref.x.push_back(x);
        ref.y.push_back(to_d(r[cr]));
        pred.x.push_back(x);
        pred.y.push_back(to_d(r[cp]));
      }
      Chart c(tag + " " + metric, false);
      c.add(std::move(ref));
      c.add(std::move(pred));
      c.write(run_dir / (tag + "_" + metric + "_overlay.svg"));
    }
  };
  overlay(run_dir / "stats_multiauto.csv", "predicted");
  overlay(run_dir / "gen_stats.csv", "generated");

  const fs::path coef_path = run_dir / "coefficients.csv";
  if (fs::exists(coef_path)) {
    const Table t = read_csv(coef_path);
    const std::size_t ch = t.col("head"), cr = t.col("row"), cc = t.col("component"),
                      cv = t.col("value");
    for (const char* head : {"a", "b", "phi"}) {
      // First dumped row of the head is the representative stem plot.
      std::string first_row;
      std::map<std::int64_t, double> comps;
      for (const auto& r : t.rows) {
        if (r[ch] != head) continue;
        if (first_row.empty()) first_row = r[cr];
        if (r[cr] != first_row) continue;
        comps[std::strtoll(r[cc].c_str(), nullptr, 10)] = to_d(r[cv]);
      }
      if (comps.empty()) continue;
      std::vector<double> values;
      values.reserve(comps.size());
      for (const auto& [idx, v] : comps) values.push_back(v);
      write_stems(run_dir / (std::string("sparsity_") + head + ".svg"),
                  std::string("coefficients ") + head, values, 1e-3);
    }
  }
}

}  // namespace sdeop
