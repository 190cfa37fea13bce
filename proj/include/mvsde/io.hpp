#pragma once

#include <cstdio>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "mvsde/common.hpp"

#include <json.hpp>

namespace mvsde {

// Shortest exact decimal form; the same bytes for the same double on every
// run, which the artifact determinism contract depends on.
inline std::string format_double(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  double back = 0.0;
  std::sscanf(buf, "%lf", &back);
  for (int prec = 1; prec < 17; ++prec) {
    char probe[40];
    std::snprintf(probe, sizeof probe, "%.*g", prec, v);
    std::sscanf(probe, "%lf", &back);
    if (back == v) return probe;
  }
  return buf;
}

inline void ensure_dir(const std::string& path) {
  std::error_code ec;
  std::filesystem::create_directories(path, ec);
  require(!ec, "cannot create directory: " + path);
}

// CSV with a versioned first line; all payload lines are deterministic.
class CsvWriter {
 public:
  CsvWriter(const std::string& path, std::span<const std::string> columns,
            std::span<const std::string> comments = {}) {
    f_ = std::fopen(path.c_str(), "wb");
    require(f_ != nullptr, "cannot open for writing: " + path);
    std::fprintf(f_, "# mvsde %s\n", MVSDE_VERSION);
    for (const auto& c : comments) std::fprintf(f_, "# %s\n", c.c_str());
    for (std::size_t i = 0; i < columns.size(); ++i)
      std::fprintf(f_, "%s%s", i ? "," : "", columns[i].c_str());
    std::fputc('\n', f_);
  }
  CsvWriter(const CsvWriter&) = delete;
  CsvWriter& operator=(const CsvWriter&) = delete;
  ~CsvWriter() {
    if (f_) std::fclose(f_);
  }

  void row(std::span<const double> values) {
    for (std::size_t i = 0; i < values.size(); ++i) {
      if (i) std::fputc(',', f_);
      std::fputs(format_double(values[i]).c_str(), f_);
    }
    std::fputc('\n', f_);
  }

  // mixed row: leading string cells, then numeric cells
  void row(std::span<const std::string> labels, std::span<const double> values) {
    for (std::size_t i = 0; i < labels.size(); ++i) {
      if (i) std::fputc(',', f_);
      std::fputs(labels[i].c_str(), f_);
    }
    for (std::size_t i = 0; i < values.size(); ++i) {
      if (i || !labels.empty()) std::fputc(',', f_);
      std::fputs(format_double(values[i]).c_str(), f_);
    }
    std::fputc('\n', f_);
  }

 private:
  std::FILE* f_ = nullptr;
};

inline void write_json_file(const std::string& path, const nlohmann::json& j) {
  std::FILE* f = std::fopen(path.c_str(), "wb");
  require(f != nullptr, "cannot open for writing: " + path);
  std::string s = j.dump(2);
  std::fwrite(s.data(), 1, s.size(), f);
  std::fputc('\n', f);
  std::fclose(f);
}

inline std::string read_text_file(const std::string& path) {
  std::FILE* f = std::fopen(path.c_str(), "rb");
  require(f != nullptr, "cannot open: " + path);
  std::string out;
  char buf[4096];
  std::size_t n;
  while ((n = std::fread(buf, 1, sizeof buf, f)) > 0) out.append(buf, n);
  std::fclose(f);
  return out;
}

}  // namespace mvsde
