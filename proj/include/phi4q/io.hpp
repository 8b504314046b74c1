#pragma once

// CSV output with unit-annotated headers, canonical number formatting and a
// bounded worker pool for independent grid points.

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <exception>
#include <filesystem>
#include <fstream>
#include <functional>
#include <stdexcept>
#include <string>
#include <thread>
#include <vector>

#include "phi4q/errors.hpp"

namespace phi4q::io {

/// Shortest round-trip decimal for doubles; "nan"/"inf" spelled out, -0 printed as 0.
inline std::string fmt(double x) {
  if (std::isnan(x)) return "nan";
  if (std::isinf(x)) return x > 0 ? "inf" : "-inf";
  if (x == 0.0) return "0";
  char buf[32];
  for (int prec = 15; prec <= 17; ++prec) {
    std::snprintf(buf, sizeof buf, "%.*g", prec, x);
    if (std::strtod(buf, nullptr) == x) break;
  }
  return buf;
}

inline std::string fmt(long long x) { return std::to_string(x); }
inline std::string fmt(int x) { return std::to_string(x); }
inline std::string fmt(bool x) { return x ? "1" : "0"; }
inline std::string fmt(const std::string& s) { return s; }
inline std::string fmt(const char* s) { return s; }

struct Column {
  std::string name;
  std::string unit;  // "1" for dimensionless
};

class CsvWriter {
 public:
  CsvWriter(const std::filesystem::path& path, std::vector<Column> columns)
      : path_(path), columns_(std::move(columns)), os_(path, std::ios::binary) {
    if (!os_) throw std::runtime_error("cannot open " + path.string() + " for writing");
    for (std::size_t i = 0; i < columns_.size(); ++i)
      os_ << (i ? "," : "") << columns_[i].name << " [" << columns_[i].unit << "]";
    os_ << '\n';
  }

  template <class... T>
  void row(const T&... values) {
    if (sizeof...(T) != columns_.size())
      throw std::logic_error("CsvWriter: row width does not match header in " + path_.string());
    std::size_t i = 0;
    ((os_ << (i++ ? "," : "") << fmt(values)), ...);
    os_ << '\n';
  }

  void row(const std::vector<std::string>& cells) {
    if (cells.size() != columns_.size())
      throw std::logic_error("CsvWriter: row width does not match header in " + path_.string());
    for (std::size_t i = 0; i < cells.size(); ++i) os_ << (i ? "," : "") << cells[i];
    os_ << '\n';
  }

  [[nodiscard]] const std::filesystem::path& path() const { return path_; }

 private:
  std::filesystem::path path_;
  std::vector<Column> columns_;
  std::ofstream os_;
};

inline unsigned resolve_threads(int requested) {
  if (requested > 0) return static_cast<unsigned>(requested);
  return std::max(1U, std::thread::hardware_concurrency());
}

/// Runs fn(i) for i in [0, n) on at most `threads` workers. Results land in
/// index order; the first exception (lowest index) is rethrown after all
/// workers finish.
template <class R>
std::vector<R> parallel_map(std::size_t n, unsigned threads, const std::function<R(std::size_t)>& fn) {
  std::vector<R> out(n);
  std::vector<std::exception_ptr> errors(n);
  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (std::size_t i = next++; i < n; i = next++) {
      try {
        out[i] = fn(i);
      } catch (...) {
        errors[i] = std::current_exception();
      }
    }
  };
  const unsigned count = std::max(1U, std::min<unsigned>(threads, static_cast<unsigned>(std::max<std::size_t>(n, 1))));
  {
    std::vector<std::jthread> pool;
    for (unsigned t = 1; t < count; ++t) pool.emplace_back(worker);
    worker();
  }
  for (auto& e : errors)
    if (e) std::rethrow_exception(e);
  return out;
}

}  // namespace phi4q::io
