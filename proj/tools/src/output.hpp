#pragma once

#include <filesystem>
#include <fstream>
#include <string>

#include <Eigen/Dense>

namespace mbym2::cli {

/// Creates parent directories; IoError when the file cannot be opened.
std::ofstream open_output(const std::filesystem::path& path);
/// Flushes and throws IoError if any write failed.
void finish_output(std::ofstream& out, const std::filesystem::path& path);

/// x rounded to 6 significant digits, for JSON reports.
double rounded(double x);
std::string csv_quote(const std::string& s);

/// "intercept", "x1", ... for design columns and "y1", ... for outcomes.
std::string term_name(Eigen::Index i);
std::string outcome_name(Eigen::Index j);

}  // namespace mbym2::cli
