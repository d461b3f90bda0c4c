#include "mbym2/io.hpp"

#include <charconv>
#include <fstream>
#include <iomanip>
#include <sstream>

#include "mbym2/error.hpp"

namespace mbym2 {
namespace {

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

std::vector<std::string> split_csv(const std::string& line) {
  std::vector<std::string> out;
  std::string cell;
  std::istringstream ss(line);
  while (std::getline(ss, cell, ',')) out.push_back(trim(cell));
  if (!line.empty() && line.back() == ',') out.emplace_back();
  return out;
}

bool is_missing(const std::string& cell) {
  return cell.empty() || cell == "NA" || cell == "na" || cell == "nan" || cell == "NaN";
}

double parse_double(const std::string& cell, std::size_t line_no) {
  double value = 0.0;
  const char* first = cell.data();
  const char* last = first + cell.size();
  if (!cell.empty() && *first == '+') ++first;
  const auto [ptr, ec] = std::from_chars(first, last, value);
  if (ec != std::errc() || ptr != last) {
    throw IoError("line " + std::to_string(line_no) + ": '" + cell + "' is not a number");
  }
  return value;
}

// Column prefix and 1-based index, e.g. "y2" -> ('y', 2).
bool column_tag(const std::string& name, char& prefix, int& index) {
  if (name.size() < 2) return false;
  prefix = name[0];
  const auto [ptr, ec] = std::from_chars(name.data() + 1, name.data() + name.size(), index);
  return ec == std::errc() && ptr == name.data() + name.size() && index >= 1;
}

std::ifstream open_input(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open " + path.string());
  return in;
}

std::ofstream open_output(const std::filesystem::path& path) {
  if (path.has_parent_path()) ensure_directory(path.parent_path());
  std::ofstream out(path);
  if (!out) throw IoError("cannot write " + path.string());
  return out;
}

}  // namespace

AdjacencyGraph parse_adjacency(std::istream& in) {
  std::string line;
  std::size_t line_no = 0;
  Index n = -1;
  std::vector<Edge> edges;
  while (std::getline(in, line)) {
    ++line_no;
    const std::string t = trim(line);
    if (t.empty() || t[0] == '#') continue;
    std::istringstream ss(t);
    if (n < 0) {
      std::string tag;
      if (!(ss >> tag >> n) || tag != "n" || n < 1) throw IoError("adjacency: expected 'n <count>' on the first line");
      continue;
    }
    Index i = 0, j = 0;
    std::string rest;
    if (!(ss >> i >> j) || (ss >> rest)) {
      throw IoError("adjacency line " + std::to_string(line_no) + ": expected two region ids");
    }
    edges.emplace_back(i, j);
  }
  if (n < 0) throw IoError("adjacency: empty input");
  return build_adjacency(edges, n);
}

AdjacencyGraph read_adjacency(const std::filesystem::path& path) {
  auto in = open_input(path);
  return parse_adjacency(in);
}

void write_adjacency(std::ostream& out, const AdjacencyGraph& graph) {
  out << "n " << graph.n << '\n';
  for (const auto& [i, j] : graph.edges) out << i << ' ' << j << '\n';
}

void write_adjacency(const std::filesystem::path& path, const AdjacencyGraph& graph) {
  auto out = open_output(path);
  write_adjacency(out, graph);
  if (!out) throw IoError("failed writing " + path.string());
}

CsvDataset parse_dataset_csv(std::istream& in) {
  std::string line;
  if (!std::getline(in, line)) throw IoError("dataset: empty input");
  const auto header = split_csv(line);
  if (header.empty() || header[0] != "region") throw IoError("dataset: header must start with 'region'");

  std::vector<int> x_cols, y_cols, z_cols;
  for (std::size_t c = 1; c < header.size(); ++c) {
    char prefix = 0;
    int index = 0;
    if (!column_tag(header[c], prefix, index) || (prefix != 'x' && prefix != 'y' && prefix != 'z')) {
      throw IoError("dataset: unrecognised column '" + header[c] + "'");
    }
    auto& cols = prefix == 'x' ? x_cols : prefix == 'y' ? y_cols : z_cols;
    if (index != static_cast<int>(cols.size()) + 1) throw IoError("dataset: column '" + header[c] + "' is out of order");
    cols.push_back(static_cast<int>(c));
  }
  if (x_cols.empty() || y_cols.empty()) throw IoError("dataset: need at least one x and one y column");
  if (!z_cols.empty() && z_cols.size() != y_cols.size()) throw IoError("dataset: z columns must match y columns");

  std::vector<std::string> regions;
  std::vector<std::vector<double>> rows;
  std::vector<std::size_t> missing_rows;
  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (trim(line).empty()) continue;
    const auto cells = split_csv(line);
    if (cells.size() != header.size()) {
      throw IoError("dataset line " + std::to_string(line_no) + ": expected " + std::to_string(header.size()) +
                    " fields");
    }
    std::vector<double> values(header.size() - 1);
    bool missing = false;
    for (std::size_t c = 1; c < cells.size(); ++c) {
      if (is_missing(cells[c])) {
        missing = true;
        continue;
      }
      values[c - 1] = parse_double(cells[c], line_no);
    }
    if (missing) missing_rows.push_back(rows.size() + 1);
    regions.push_back(cells[0]);
    rows.push_back(std::move(values));
  }
  if (!missing_rows.empty()) {
    std::string list;
    for (std::size_t i = 0; i < missing_rows.size(); ++i) list += (i ? ", " : "") + std::to_string(missing_rows[i]);
    throw InvalidArgument("dataset has missing values in rows " + list);
  }
  if (rows.empty()) throw IoError("dataset: no data rows");

  const auto n = static_cast<Index>(rows.size());
  auto take = [&](const std::vector<int>& cols) {
    MatrixXd m(n, static_cast<Index>(cols.size()));
    for (Index i = 0; i < n; ++i) {
      for (std::size_t c = 0; c < cols.size(); ++c) m(i, static_cast<Index>(c)) = rows[i][cols[c] - 1];
    }
    return m;
  };
  return {std::move(regions), take(x_cols), take(y_cols), take(z_cols)};
}

CsvDataset read_dataset_csv(const std::filesystem::path& path) {
  auto in = open_input(path);
  return parse_dataset_csv(in);
}

void write_dataset_csv(std::ostream& out, const Dataset& data, bool include_confounders) {
  const Index n = data.Y.rows(), p = data.X1.cols(), k = data.Y.cols();
  out << "region";
  for (Index j = 1; j <= p; ++j) out << ",x" << j;
  for (Index j = 1; j <= k; ++j) out << ",y" << j;
  if (include_confounders) {
    for (Index j = 1; j <= k; ++j) out << ",z" << j;
  }
  out << '\n' << std::setprecision(17);
  for (Index i = 0; i < n; ++i) {
    out << i;
    for (Index j = 0; j < p; ++j) out << ',' << data.X1(i, j);
    for (Index j = 0; j < k; ++j) out << ',' << data.Y(i, j);
    if (include_confounders) {
      for (Index j = 0; j < k; ++j) out << ',' << data.Z(i, j);
    }
    out << '\n';
  }
}

void write_dataset_csv(const std::filesystem::path& path, const Dataset& data, bool include_confounders) {
  auto out = open_output(path);
  write_dataset_csv(out, data, include_confounders);
  if (!out) throw IoError("failed writing " + path.string());
}

void ensure_directory(const std::filesystem::path& dir) {
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec) throw IoError("cannot create directory " + dir.string() + ": " + ec.message());
}

}  // namespace mbym2
