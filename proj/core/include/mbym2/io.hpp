#pragma once

#include <filesystem>
#include <iosfwd>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "mbym2/datagen.hpp"
#include "mbym2/spatial_structure.hpp"

namespace mbym2 {

// Adjacency files: first line "n <count>", then one 0-based "i j" pair per
// line. Blank lines and lines starting with '#' are skipped.

/// Throws IoError on unreadable or malformed input and InvalidArgument when
/// the graph itself is invalid (isolated region, disconnected, ...).
AdjacencyGraph parse_adjacency(std::istream& in);
AdjacencyGraph read_adjacency(const std::filesystem::path& path);
void write_adjacency(std::ostream& out, const AdjacencyGraph& graph);
void write_adjacency(const std::filesystem::path& path, const AdjacencyGraph& graph);

// Dataset CSV: header "region,x1..xp,y1..yk[,z1..zk]".

struct CsvDataset {
  std::vector<std::string> regions;
  MatrixXd X1;
  MatrixXd Y;
  MatrixXd Z;  // 0 columns when the file has no z columns
};

/// Empty, "NA" and "nan" cells count as missing; any missing cell throws
/// InvalidArgument listing the affected data rows (1-based). Non-numeric cells
/// throw IoError.
CsvDataset parse_dataset_csv(std::istream& in);
CsvDataset read_dataset_csv(const std::filesystem::path& path);

/// Full precision (17 significant digits) so a round trip is exact.
void write_dataset_csv(std::ostream& out, const Dataset& data, bool include_confounders);
void write_dataset_csv(const std::filesystem::path& path, const Dataset& data, bool include_confounders);

/// Creates parent directories as needed; throws IoError on failure.
void ensure_directory(const std::filesystem::path& dir);

}  // namespace mbym2
