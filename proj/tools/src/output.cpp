#include "output.hpp"

#include <cmath>
#include <cstdio>
#include <cstdlib>

#include "mbym2/cli/commands.hpp"
#include "mbym2/error.hpp"
#include "mbym2/io.hpp"

namespace mbym2::cli {

std::string format_number(double x) {
  if (std::isnan(x)) return "NA";
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.6g", x);
  return buf;
}

double rounded(double x) {
  if (!std::isfinite(x)) return x;
  return std::strtod(format_number(x).c_str(), nullptr);
}

std::ofstream open_output(const std::filesystem::path& path) {
  if (path.has_parent_path()) ensure_directory(path.parent_path());
  std::ofstream out(path);
  if (!out) throw IoError("cannot write " + path.string());
  return out;
}

void finish_output(std::ofstream& out, const std::filesystem::path& path) {
  out.flush();
  if (!out) throw IoError("failed writing " + path.string());
}

std::string csv_quote(const std::string& s) {
  std::string q = "\"";
  for (char c : s) {
    if (c == '"') q += '"';
    q += c == '\n' ? ' ' : c;
  }
  return q + '"';
}

std::string term_name(Eigen::Index i) { return i == 0 ? "intercept" : "x" + std::to_string(i); }

std::string outcome_name(Eigen::Index j) { return "y" + std::to_string(j + 1); }

}  // namespace mbym2::cli
