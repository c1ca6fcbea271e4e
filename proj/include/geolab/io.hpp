// Experiment plumbing: delimited-text tables in round-trip precision, a
// line-oriented config format, deterministic SVG plots, and the output
// manifest with content digests.
#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "geolab/errors.hpp"

namespace geolab {

/// SHA-256 of a byte string (used for the output manifest).
std::string sha256_hex(const std::string& data);

/// Full round-trip formatting of a double (%.17g).
std::string format_full(double x);

/// Tab-separated table with '#' comment headers; numeric cells keep full
/// round-trip precision so reruns diff clean.
class Table {
  public:
    explicit Table(std::vector<std::string> columns) : columns_(std::move(columns)) {}
    void comment(const std::string& line) { comments_.push_back(line); }
    void row(const std::vector<double>& values);
    void row_mixed(const std::vector<std::string>& cells);
    std::string render() const;
    std::size_t rows() const { return cells_.size(); }

  private:
    std::vector<std::string> columns_;
    std::vector<std::string> comments_;
    std::vector<std::vector<std::string>> cells_;
};

/// Collects output files, writes them under a directory, and emits
/// manifest.txt with a SHA-256 digest per file.
class OutputBundle {
  public:
    explicit OutputBundle(std::string dir);
    void add(const std::string& name, const std::string& content);
    /// Writes all files plus the manifest; returns the manifest path.
    std::string flush();
    const std::string& dir() const { return dir_; }

  private:
    std::string dir_;
    std::vector<std::pair<std::string, std::string>> files_;
};

// ---- config ----

/// Line-oriented configuration: [section] headers, key = value pairs, '#'
/// comments. Unknown keys are rejected against a schema at read time.
class Config {
  public:
    static Config parse_file(const std::string& path);
    static Config parse_string(const std::string& text);

    bool has(const std::string& section, const std::string& key) const;
    std::string get_str(const std::string& section, const std::string& key,
                        const std::string& fallback) const;
    double get_num(const std::string& section, const std::string& key, double fallback) const;
    long get_int(const std::string& section, const std::string& key, long fallback) const;

    /// Throws ConfigError when a present key is not in the allowed set.
    void validate(const std::map<std::string, std::vector<std::string>>& schema) const;

    void set(const std::string& section, const std::string& key, const std::string& value);

  private:
    std::map<std::string, std::map<std::string, std::string>> data_;
};

// ---- plots ----

struct PlotSeries {
    std::vector<std::pair<double, double>> pts;
    bool lines = true;     // polyline vs scatter
    std::string css_class; // one of a fixed palette
};

/// Self-contained SVG with labeled axes; byte-deterministic for fixed input.
/// Throws EmptyDatasetError when nothing would be drawn.
std::string render_svg(const std::string& title, const std::string& xlabel,
                       const std::string& ylabel, const std::vector<PlotSeries>& series,
                       int width = 760, int height = 520);

/// Histogram helper: bins [lo, hi) uniformly and renders bars.
std::string render_histogram_svg(const std::string& title, const std::string& xlabel,
                                 const std::vector<double>& values, int bins);

}  // namespace geolab
