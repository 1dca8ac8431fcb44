#include "impart/reports.hpp"

#include <fcntl.h>
#include <unistd.h>

#include <algorithm>
#include <cerrno>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <sstream>
#include <stdexcept>

#include "impart/dataset.hpp"

namespace impart {
namespace {

constexpr const char* kPalette[] = {"#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd", "#8c564b"};

std::string escape_xml(const std::string& s) {
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

void write_text(const std::filesystem::path& path, const std::string& text) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << text;
}

std::string tick_label(double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.3g", v);
  return buf;
}

struct Frame {
  double width = 640, height = 400, left = 70, right = 20, top = 40, bottom = 60;
  double x0, x1, y0, y1;

  double px(double x) const { return left + (x - x0) / (x1 - x0) * (width - left - right); }
  double py(double y) const { return height - bottom - (y - y0) / (y1 - y0) * (height - top - bottom); }
};

void pad_range(double& lo, double& hi) {
  if (!(hi > lo)) {
    lo -= 0.5;
    hi += 0.5;
  }
}

std::string axes(const Frame& f, const std::string& title, const std::string& xl, const std::string& yl,
                 const std::vector<double>& xticks, const std::vector<std::string>& xtick_labels) {
  std::ostringstream s;
  s << "<rect width=\"" << f.width << "\" height=\"" << f.height << "\" fill=\"white\"/>\n";
  s << "<text x=\"" << f.width / 2 << "\" y=\"22\" text-anchor=\"middle\" font-size=\"15\">"
    << escape_xml(title) << "</text>\n";
  s << "<line x1=\"" << f.left << "\" y1=\"" << f.height - f.bottom << "\" x2=\"" << f.width - f.right
    << "\" y2=\"" << f.height - f.bottom << "\" stroke=\"black\"/>\n";
  s << "<line x1=\"" << f.left << "\" y1=\"" << f.top << "\" x2=\"" << f.left << "\" y2=\""
    << f.height - f.bottom << "\" stroke=\"black\"/>\n";
  for (std::size_t i = 0; i < xticks.size(); ++i) {
    const double x = f.px(xticks[i]);
    s << "<line x1=\"" << x << "\" y1=\"" << f.height - f.bottom << "\" x2=\"" << x << "\" y2=\""
      << f.height - f.bottom + 5 << "\" stroke=\"black\"/>\n";
    s << "<text x=\"" << x << "\" y=\"" << f.height - f.bottom + 18
      << "\" text-anchor=\"middle\" font-size=\"11\">" << escape_xml(xtick_labels[i]) << "</text>\n";
  }
  for (int i = 0; i <= 4; ++i) {
    const double v = f.y0 + (f.y1 - f.y0) * i / 4.0;
    const double y = f.py(v);
    s << "<line x1=\"" << f.left - 5 << "\" y1=\"" << y << "\" x2=\"" << f.left << "\" y2=\"" << y
      << "\" stroke=\"black\"/>\n";
    s << "<text x=\"" << f.left - 8 << "\" y=\"" << y + 4 << "\" text-anchor=\"end\" font-size=\"11\">"
      << tick_label(v) << "</text>\n";
  }
  s << "<text x=\"" << (f.left + f.width - f.right) / 2 << "\" y=\"" << f.height - 18
    << "\" text-anchor=\"middle\" font-size=\"13\">" << escape_xml(xl) << "</text>\n";
  s << "<text x=\"16\" y=\"" << (f.top + f.height - f.bottom) / 2 << "\" text-anchor=\"middle\" font-size=\"13\" "
    << "transform=\"rotate(-90 16 " << (f.top + f.height - f.bottom) / 2 << ")\">" << escape_xml(yl) << "</text>\n";
  return s.str();
}

std::string svg_open(double w, double h) {
  std::ostringstream s;
  s << "<svg xmlns=\"http://www.w3.org/2000/svg\" xmlns:xlink=\"http://www.w3.org/1999/xlink\" width=\"" << w
    << "\" height=\"" << h << "\" font-family=\"sans-serif\">\n";
  return s.str();
}

}  // namespace

DirectoryLock::DirectoryLock(const std::filesystem::path& dir) : path_(dir / ".impart.lock") {
  std::filesystem::create_directories(dir);
  const int fd = ::open(path_.c_str(), O_CREAT | O_EXCL | O_WRONLY, 0644);
  if (fd < 0) {
    if (errno == EEXIST) {
      throw std::runtime_error("output directory " + dir.string() + " is locked by another run (" +
                               path_.string() + "; remove it if stale)");
    }
    throw std::runtime_error("cannot create lock " + path_.string() + ": " + std::strerror(errno));
  }
  const std::string pid = std::to_string(::getpid()) + "\n";
  [[maybe_unused]] const auto written = ::write(fd, pid.data(), pid.size());
  ::close(fd);
}

DirectoryLock::~DirectoryLock() {
  std::error_code ec;
  std::filesystem::remove(path_, ec);
}

std::filesystem::path versioned_path(const std::filesystem::path& dir, const std::string& stem,
                                     const std::string& ext) {
  auto candidate = dir / (stem + ext);
  for (int v = 1; std::filesystem::exists(candidate); ++v) {
    candidate = dir / (stem + "." + std::to_string(v) + ext);
  }
  return candidate;
}

void TsvTable::add_row(std::vector<std::string> row) {
  if (row.size() != columns.size()) throw std::logic_error("TsvTable: row width differs from header");
  rows.push_back(std::move(row));
}

std::string TsvTable::str() const {
  std::ostringstream s;
  for (const auto& c : comments) s << "# " << c << '\n';
  for (std::size_t i = 0; i < columns.size(); ++i) s << (i ? "\t" : "") << columns[i];
  s << '\n';
  for (const auto& r : rows) {
    for (std::size_t i = 0; i < r.size(); ++i) s << (i ? "\t" : "") << r[i];
    s << '\n';
  }
  return s.str();
}

std::filesystem::path write_report(const std::filesystem::path& dir, const std::string& stem,
                                   const TsvTable& table) {
  std::filesystem::create_directories(dir);
  const auto path = versioned_path(dir, stem, ".tsv");
  const int fd = ::open(path.c_str(), O_CREAT | O_EXCL | O_WRONLY, 0644);
  if (fd < 0) throw std::runtime_error("cannot create report " + path.string() + ": " + std::strerror(errno));
  const std::string text = table.str();
  const auto written = ::write(fd, text.data(), text.size());
  ::close(fd);
  if (written != static_cast<ssize_t>(text.size())) throw std::runtime_error("short write to " + path.string());
  return path;
}

std::string format_number(double v) {
  if (std::isnan(v)) return "NA";
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.10g", v);
  return buf;
}

TsvTable eval_report_table(const EvalReport& r, const std::string& victim_label) {
  TsvTable t;
  t.comments = {
      "config_hash " + r.config_hash,
      "ba: percent of the clean test split classified correctly",
      "asr: percent of poisoned test items classified as the target label",
      "asr_excluding_trivial: asr over items whose true label differs from the target (all-to-one)",
      "acc_clean_reference: test accuracy of the clean-trained victim",
      "quality: mean over poisoned test items; mean_e00 = per-pixel mean CIEDE2000, "
      "norm_e00 = l2 norm of the CIEDE2000 map, psnr capped at 100 dB"};
  t.columns = {"victim", "ba", "asr", "asr_excluding_trivial", "acc_clean_reference", "num_clean",
               "num_poisoned", "mean_e00", "norm_e00", "ssim", "psnr_db", "l2", "linf"};
  auto opt = [](const std::optional<double>& v) { return v ? format_number(*v) : std::string("NA"); };
  t.add_row({victim_label, format_number(r.ba), format_number(r.asr), opt(r.asr_excluding_trivial),
             opt(r.acc_clean_reference), std::to_string(r.num_clean), std::to_string(r.num_poisoned),
             format_number(r.quality.mean_ciede2000), format_number(r.quality.norm_ciede2000),
             format_number(r.quality.ssim), format_number(r.quality.psnr_db), format_number(r.quality.l2),
             format_number(r.quality.linf)});
  return t;
}

void write_json(const std::filesystem::path& path, const nlohmann::json& j) {
  write_text(path, j.dump(2) + "\n");
}

nlohmann::json read_json(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot read " + path.string());
  return nlohmann::json::parse(in);
}

void write_line_plot_svg(const std::filesystem::path& path, const std::string& title,
                         const std::string& x_label, const std::string& y_label,
                         const std::vector<PlotSeries>& series, bool log_x) {
  auto tx = [&](double x) {
    if (!log_x) return x;
    if (!(x > 0.0)) throw std::invalid_argument("write_line_plot_svg: log axis needs positive x");
    return std::log10(x);
  };
  Frame f;
  f.x0 = f.y0 = 1e300;
  f.x1 = f.y1 = -1e300;
  std::vector<double> xs;
  for (const auto& s : series) {
    if (s.x.size() != s.y.size()) throw std::invalid_argument("write_line_plot_svg: series length mismatch");
    for (std::size_t i = 0; i < s.x.size(); ++i) {
      f.x0 = std::min(f.x0, tx(s.x[i]));
      f.x1 = std::max(f.x1, tx(s.x[i]));
      f.y0 = std::min(f.y0, s.y[i]);
      f.y1 = std::max(f.y1, s.y[i]);
      if (std::find(xs.begin(), xs.end(), s.x[i]) == xs.end()) xs.push_back(s.x[i]);
    }
  }
  if (xs.empty()) throw std::invalid_argument("write_line_plot_svg: no data");
  pad_range(f.x0, f.x1);
  const double span = f.y1 - f.y0;
  f.y0 -= 0.05 * span;
  f.y1 += 0.05 * span;
  pad_range(f.y0, f.y1);
  std::sort(xs.begin(), xs.end());
  std::vector<double> ticks;
  std::vector<std::string> labels;
  for (double x : xs) {
    ticks.push_back(tx(x));
    labels.push_back(tick_label(x));
  }

  std::ostringstream s;
  s << svg_open(f.width, f.height) << axes(f, title, x_label, y_label, ticks, labels);
  for (std::size_t k = 0; k < series.size(); ++k) {
    const char* color = kPalette[k % std::size(kPalette)];
    s << "<polyline fill=\"none\" stroke=\"" << color << "\" stroke-width=\"2\" points=\"";
    for (std::size_t i = 0; i < series[k].x.size(); ++i) {
      s << f.px(tx(series[k].x[i])) << ',' << f.py(series[k].y[i]) << ' ';
    }
    s << "\"/>\n";
    for (std::size_t i = 0; i < series[k].x.size(); ++i) {
      s << "<circle cx=\"" << f.px(tx(series[k].x[i])) << "\" cy=\"" << f.py(series[k].y[i])
        << "\" r=\"3.5\" fill=\"" << color << "\"/>\n";
    }
    s << "<text x=\"" << f.width - f.right - 150 << "\" y=\"" << f.top + 14 + 16 * k << "\" font-size=\"12\" fill=\""
      << color << "\">" << escape_xml(series[k].name) << "</text>\n";
  }
  s << "</svg>\n";
  write_text(path, s.str());
}

void write_histogram_svg(const std::filesystem::path& path, const std::string& title,
                         const HistogramOverlap& hist, const std::string& first_name,
                         const std::string& second_name, std::optional<double> threshold) {
  const auto& a = hist.first.counts;
  const auto& b = hist.second.counts;
  if (a.empty() || a.size() != b.size()) throw std::invalid_argument("write_histogram_svg: malformed histogram");
  double ta = 0, tb = 0;
  for (auto c : a) ta += static_cast<double>(c);
  for (auto c : b) tb += static_cast<double>(c);
  Frame f;
  f.x0 = hist.first.lo;
  f.x1 = hist.first.hi;
  if (threshold) {
    f.x0 = std::min(f.x0, *threshold);
    f.x1 = std::max(f.x1, *threshold);
  }
  pad_range(f.x0, f.x1);
  f.y0 = 0.0;
  f.y1 = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    f.y1 = std::max({f.y1, a[i] / std::max(ta, 1.0), b[i] / std::max(tb, 1.0)});
  }
  f.y1 = f.y1 > 0 ? f.y1 * 1.1 : 1.0;
  std::vector<double> ticks;
  std::vector<std::string> labels;
  for (int i = 0; i <= 4; ++i) {
    ticks.push_back(f.x0 + (f.x1 - f.x0) * i / 4.0);
    labels.push_back(tick_label(ticks.back()));
  }
  std::ostringstream s;
  s << svg_open(f.width, f.height) << axes(f, title, "entropy", "fraction of inputs", ticks, labels);
  const double lo = hist.first.lo;
  const double bw = (hist.first.hi - lo) / static_cast<double>(a.size());
  auto bars = [&](const std::vector<std::size_t>& counts, double total, const char* color) {
    for (std::size_t i = 0; i < counts.size(); ++i) {
      const double frac = counts[i] / std::max(total, 1.0);
      const double x0 = bw > 0 ? f.px(lo + bw * i) : f.px(lo) - 4;
      const double x1 = bw > 0 ? f.px(lo + bw * (i + 1)) : f.px(lo) + 4;
      s << "<rect x=\"" << x0 << "\" y=\"" << f.py(frac) << "\" width=\"" << std::max(x1 - x0, 1.0)
        << "\" height=\"" << f.py(0) - f.py(frac) << "\" fill=\"" << color << "\" fill-opacity=\"0.45\"/>\n";
    }
  };
  bars(a, ta, kPalette[0]);
  bars(b, tb, kPalette[1]);
  if (threshold) {
    const double x = f.px(*threshold);
    s << "<line x1=\"" << x << "\" y1=\"" << f.top << "\" x2=\"" << x << "\" y2=\"" << f.height - f.bottom
      << "\" stroke=\"black\" stroke-dasharray=\"4 3\"/>\n";
    s << "<text x=\"" << x + 4 << "\" y=\"" << f.top + 12 << "\" font-size=\"11\">threshold "
      << tick_label(*threshold) << "</text>\n";
  }
  s << "<text x=\"" << f.width - f.right - 170 << "\" y=\"" << f.top + 14 << "\" font-size=\"12\" fill=\""
    << kPalette[0] << "\">" << escape_xml(first_name) << "</text>\n";
  s << "<text x=\"" << f.width - f.right - 170 << "\" y=\"" << f.top + 30 << "\" font-size=\"12\" fill=\""
    << kPalette[1] << "\">" << escape_xml(second_name) << "</text>\n";
  s << "<text x=\"" << f.width - f.right - 170 << "\" y=\"" << f.top + 46 << "\" font-size=\"12\">overlap "
    << tick_label(hist.overlap) << "</text>\n";
  s << "</svg>\n";
  write_text(path, s.str());
}

void write_image_grid(const std::filesystem::path& png_path, const std::filesystem::path& svg_path,
                      const std::vector<GridPair>& pairs, int scale) {
  if (pairs.empty()) throw std::invalid_argument("write_image_grid: no pairs");
  if (scale < 1) throw std::invalid_argument("write_image_grid: scale must be >= 1");
  const int h = pairs.front().clean->height();
  const int w = pairs.front().clean->width();
  const int cols = std::min<int>(4, static_cast<int>(pairs.size()));
  const int rows = (static_cast<int>(pairs.size()) + cols - 1) / cols;
  const int gap = 2 * scale;
  const int cell_w = 2 * w * scale + gap;
  const int cell_h = h * scale;
  const int caption_h = 34;
  RgbImage grid(rows * (cell_h + gap), cols * (cell_w + gap), 1.0);
  for (std::size_t k = 0; k < pairs.size(); ++k) {
    const auto& p = pairs[k];
    require_same_shape(*p.clean, *p.poisoned, "write_image_grid");
    if (p.clean->height() != h || p.clean->width() != w) {
      throw std::invalid_argument("write_image_grid: pairs differ in size");
    }
    const int oy = static_cast<int>(k) / cols * (cell_h + gap);
    const int ox = static_cast<int>(k) % cols * (cell_w + gap);
    for (int y = 0; y < cell_h; ++y) {
      for (int x = 0; x < 2 * w * scale; ++x) {
        const RgbImage& src = x < w * scale ? *p.clean : *p.poisoned;
        const int sx = (x % (w * scale)) / scale;
        for (int c = 0; c < 3; ++c) grid.at(oy + y, ox + x + (x >= w * scale ? gap : 0), c) = src.at(y / scale, sx, c);
      }
    }
  }
  write_png(png_path, grid);

  const int svg_w = grid.width();
  const int svg_h = rows * (cell_h + gap + caption_h);
  std::ostringstream s;
  s << svg_open(svg_w, svg_h) << "<rect width=\"" << svg_w << "\" height=\"" << svg_h << "\" fill=\"white\"/>\n";
  for (std::size_t k = 0; k < pairs.size(); ++k) {
    const int r = static_cast<int>(k) / cols;
    const int c = static_cast<int>(k) % cols;
    const int gy = r * (cell_h + gap);
    const int sy = r * (cell_h + gap + caption_h);
    const int sx = c * (cell_w + gap);
    s << "<svg x=\"" << sx << "\" y=\"" << sy << "\" width=\"" << cell_w << "\" height=\"" << cell_h
      << "\" viewBox=\"" << sx << ' ' << gy << ' ' << cell_w << ' ' << cell_h << "\">"
      << "<image xlink:href=\"" << escape_xml(png_path.filename().string()) << "\" width=\"" << grid.width()
      << "\" height=\"" << grid.height() << "\" style=\"image-rendering:pixelated\"/></svg>\n";
    std::istringstream lines(pairs[k].caption);
    std::string line;
    for (int li = 0; li < 2 && std::getline(lines, line); ++li) {
      s << "<text x=\"" << sx + 2 << "\" y=\"" << sy + cell_h + 13 + 13 * li << "\" font-size=\"10\">"
        << escape_xml(line) << "</text>\n";
    }
  }
  s << "</svg>\n";
  write_text(svg_path, s.str());
}

}  // namespace impart
