#include <array>
#include <span>
#include <string_view>

#include "mbym2/spatial_structure.hpp"

namespace mbym2 {
namespace {

// Counties in alphabetical order (equivalently, ascending county FIPS code).
constexpr std::array<std::string_view, 58> kNames = {
    "Alameda", "Alpine", "Amador", "Butte", "Calaveras", "Colusa", "Contra Costa", "Del Norte", "El Dorado",
    "Fresno", "Glenn", "Humboldt", "Imperial", "Inyo", "Kern", "Kings", "Lake", "Lassen", "Los Angeles",
    "Madera", "Marin", "Mariposa", "Mendocino", "Merced", "Modoc", "Mono", "Monterey", "Napa", "Nevada",
    "Orange", "Placer", "Plumas", "Riverside", "Sacramento", "San Benito", "San Bernardino", "San Diego",
    "San Francisco", "San Joaquin", "San Luis Obispo", "San Mateo", "Santa Barbara", "Santa Clara",
    "Santa Cruz", "Shasta", "Sierra", "Siskiyou", "Solano", "Sonoma", "Stanislaus", "Sutter", "Tehama",
    "Trinity", "Tulare", "Tuolumne", "Ventura", "Yolo", "Yuba",
};

// Shared land boundaries; a few corner contacts are included. Mirrors
// data/california_counties.adj.
constexpr std::array<std::pair<int, int>, 139> kEdges = {{
    {0, 6}, {0, 38}, {0, 42}, {0, 49}, {1, 2}, {1, 4}, {1, 8}, {1, 25}, {1, 54}, {2, 4}, {2, 8}, {2, 33},
    {2, 38}, {3, 5}, {3, 10}, {3, 31}, {3, 50}, {3, 51}, {3, 57}, {4, 38}, {4, 49}, {4, 54}, {5, 10}, {5, 16},
    {5, 50}, {5, 56}, {6, 33}, {6, 38}, {6, 47}, {7, 11}, {7, 46}, {8, 30}, {8, 33}, {9, 13}, {9, 15},
    {9, 19}, {9, 23}, {9, 25}, {9, 26}, {9, 34}, {9, 53}, {10, 16}, {10, 22}, {10, 51}, {11, 22}, {11, 46},
    {11, 52}, {12, 32}, {12, 36}, {13, 14}, {13, 25}, {13, 35}, {13, 53}, {14, 15}, {14, 18}, {14, 26},
    {14, 35}, {14, 39}, {14, 41}, {14, 53}, {14, 55}, {15, 26}, {15, 39}, {15, 53}, {16, 22}, {16, 27},
    {16, 48}, {16, 56}, {17, 24}, {17, 31}, {17, 44}, {17, 45}, {18, 29}, {18, 35}, {18, 55}, {19, 21},
    {19, 23}, {19, 25}, {19, 54}, {20, 48}, {21, 23}, {21, 49}, {21, 54}, {22, 48}, {22, 51}, {22, 52},
    {23, 34}, {23, 42}, {23, 49}, {23, 54}, {24, 44}, {24, 46}, {25, 54}, {26, 34}, {26, 39}, {26, 43},
    {27, 47}, {27, 48}, {27, 56}, {28, 30}, {28, 45}, {28, 57}, {29, 32}, {29, 35}, {29, 36}, {30, 33},
    {30, 50}, {30, 57}, {31, 44}, {31, 45}, {31, 51}, {31, 57}, {32, 35}, {32, 36}, {33, 38}, {33, 47},
    {33, 50}, {33, 56}, {34, 42}, {34, 43}, {37, 40}, {38, 42}, {38, 49}, {39, 41}, {40, 42}, {40, 43},
    {41, 55}, {42, 43}, {42, 49}, {44, 46}, {44, 51}, {44, 52}, {45, 57}, {46, 52}, {47, 56}, {49, 54},
    {50, 56}, {50, 57}, {51, 52},
}};

}  // namespace

AdjacencyGraph california_counties() {
  std::vector<Edge> edges;
  edges.reserve(kEdges.size());
  for (const auto& [i, j] : kEdges) edges.emplace_back(i, j);
  return build_adjacency(edges, static_cast<Index>(kNames.size()));
}

std::span<const std::string_view> california_county_names() { return kNames; }

}  // namespace mbym2
