#pragma once

#include <filesystem>
#include <iosfwd>
#include <string>
#include <vector>

#include "astgin/matrix.hpp"

namespace astgin::graph {

inline constexpr double kEarthRadiusMeters = 6371000.0;

struct Coordinate {
  double lat = 0.0;
  double lon = 0.0;
};

struct StationGraph {
  std::vector<std::string> station_ids;
  std::vector<Coordinate> coords;
  Matrix dist;   // meters, symmetric, zero diagonal
  Matrix adjacency;
  Matrix normalized;
  double sigma = 0.0;
  double kappa = 0.0;

  std::size_t size() const { return station_ids.size(); }
};

double haversine(const Coordinate& a, const Coordinate& b);

// Great-circle distances in meters. Throws on out-of-range coordinates.
Matrix pairwise_distance(const std::vector<Coordinate>& coords);

// A_ab = exp(-d^2 / sigma^2) when d <= kappa, else 0.
Matrix build_adjacency(const Matrix& dist, double sigma, double kappa);

// Population standard deviation of the strictly upper-triangular distances.
double default_sigma(const Matrix& dist);

// Linear-interpolated percentile (q in [0, 100]) of the strictly
// upper-triangular distances.
double distance_percentile(const Matrix& dist, double q);

// D^-1/2 (A + I) D^-1/2 with D the row sums of A + I.
Matrix normalize_adjacency(const Matrix& adjacency);

struct GraphOptions {
  double sigma = 0.0;  // <= 0 selects default_sigma
  double kappa = 0.0;  // <= 0 selects the 95th distance percentile
};

StationGraph build_graph(std::vector<std::string> station_ids, std::vector<Coordinate> coords,
                         const GraphOptions& options = {});

// Same as build_graph but with a caller-provided distance matrix.
StationGraph build_graph_from_distances(std::vector<std::string> station_ids, Matrix dist,
                                        const GraphOptions& options = {});

// Comma-delimited N x N with a station-id header row and first column.
// Rows and columns are reordered to follow `station_ids`.
Matrix read_distance_matrix(std::istream& in, const std::vector<std::string>& station_ids);

std::string format_matrix_csv(const Matrix& m, const std::vector<std::string>& station_ids);

void export_graph(const StationGraph& g, const std::filesystem::path& dir);

}  // namespace astgin::graph
