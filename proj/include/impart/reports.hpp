#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "json.hpp"

#include "impart/defense_bench.hpp"
#include "impart/evaluation.hpp"
#include "impart/image.hpp"

namespace impart {

// Exclusive lock on an output directory, held for the lifetime of the object.
class DirectoryLock {
 public:
  explicit DirectoryLock(const std::filesystem::path& dir);
  ~DirectoryLock();
  DirectoryLock(const DirectoryLock&) = delete;
  DirectoryLock& operator=(const DirectoryLock&) = delete;

  const std::filesystem::path& path() const { return path_; }

 private:
  std::filesystem::path path_;
};

// dir/stem + ext if free, else dir/stem.1 + ext, dir/stem.2 + ext, ...
std::filesystem::path versioned_path(const std::filesystem::path& dir, const std::string& stem,
                                     const std::string& ext);

// Tab-separated table with '#'-prefixed header comments.
struct TsvTable {
  std::vector<std::string> comments;
  std::vector<std::string> columns;
  std::vector<std::vector<std::string>> rows;

  void add_row(std::vector<std::string> row);
  std::string str() const;
};

// Writes to a fresh versioned file and returns its path. Reports are never overwritten.
std::filesystem::path write_report(const std::filesystem::path& dir, const std::string& stem,
                                   const TsvTable& table);

std::string format_number(double v);

TsvTable eval_report_table(const EvalReport& report, const std::string& victim_label);

// Writes JSON to `path`, creating parent directories.
void write_json(const std::filesystem::path& path, const nlohmann::json& j);
nlohmann::json read_json(const std::filesystem::path& path);

// ---- figures (SVG; image grids as PNG plus an SVG with captions)

struct PlotSeries {
  std::string name;
  std::vector<double> x;
  std::vector<double> y;
};

void write_line_plot_svg(const std::filesystem::path& path, const std::string& title,
                         const std::string& x_label, const std::string& y_label,
                         const std::vector<PlotSeries>& series, bool log_x = false);

void write_histogram_svg(const std::filesystem::path& path, const std::string& title,
                         const HistogramOverlap& hist, const std::string& first_name,
                         const std::string& second_name, std::optional<double> threshold = std::nullopt);

struct GridPair {
  const RgbImage* clean = nullptr;
  const RgbImage* poisoned = nullptr;
  std::string caption;
};

// Clean/poisoned pairs side by side, upscaled; `png_path` holds the pixels and
// `svg_path` places them with one caption line per pair.
void write_image_grid(const std::filesystem::path& png_path, const std::filesystem::path& svg_path,
                      const std::vector<GridPair>& pairs, int scale = 4);

}  // namespace impart
