// Copyright (c) 2026 The recollect Authors
// SPDX-License-Identifier: Apache-2.0
//
// Config-driven runs of the continual-learning trainers, plus the small
// CSV and SVG writers shared with the command-line tool.

#pragma once

#include "recollect/gem.hpp"
#include "recollect/replay_trainer.hpp"

#include <filesystem>
#include <iosfwd>
#include <map>
#include <stdexcept>
#include <string>
#include <vector>

namespace recollect {

class ConfigError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// Flat key=value settings; '#' starts a comment. Unknown keys are rejected
/// and every key not given takes its documented default.
class ExperimentConfig {
 public:
  static ExperimentConfig parse(std::istream& is);
  static ExperimentConfig load(const std::filesystem::path& path);

  struct Key {
    std::string name;
    std::string fallback;
    std::string help;
    bool required = false;
  };
  static const std::vector<Key>& schema();

  void set(const std::string& key, const std::string& value);
  bool has(const std::string& key) const { return values_.count(key) > 0; }
  std::string str(const std::string& key) const;
  double num(const std::string& key) const;
  std::size_t count(const std::string& key) const;
  bool flag(const std::string& key) const;

  /// Throws ConfigError on a missing required key or an unparsable value.
  void validate() const;
  /// Every key in schema order with its resolved value.
  std::string echo() const;

 private:
  std::map<std::string, std::string> values_;
};

struct ExperimentResult {
  RetentionReport retention;
  StorageReport storage;
  std::size_t code_bits = 0;
  /// Mean accuracy over tasks seen so far, after each task.
  std::vector<double> curve;
};

TaskStream build_stream(const ExperimentConfig& config);
ExperimentResult run_experiment(const ExperimentConfig& config);

/// Project version, with the git revision when the build knew it.
std::string version_string();

/// Fixed "%.6f"-style formatting so reruns produce identical bytes.
std::string fmt(double v, int precision = 6);

void write_csv(const std::filesystem::path& path, const std::vector<std::string>& header,
               const std::vector<std::vector<std::string>>& rows);

struct PlotSeries {
  std::string name;
  std::vector<double> x;
  std::vector<double> y;
};

void write_svg_plot(const std::filesystem::path& path, const std::string& title, const std::string& x_label,
                    const std::string& y_label, const std::vector<PlotSeries>& series);

}  // namespace recollect
