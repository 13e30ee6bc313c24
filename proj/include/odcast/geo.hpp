#pragma once

#include <vector>

namespace odcast {

// Uniform grid over the service area, anchored at the southwest corner.
struct GridSpec {
    double origin_lat = 0.0;
    double origin_lon = 0.0;
    double cell_length_km = 2.5;
    int rows = 0;
    int cols = 0;
    double geo_threshold_km = 0.0;  // <= 0 means 2 * cell_length_km

    int cell_count() const { return rows * cols; }
    double threshold_km() const { return geo_threshold_km > 0.0 ? geo_threshold_km : 2.0 * cell_length_km; }
    double lat_step_deg() const;
    double lon_step_deg() const;
    void validate() const;
};

struct GridCell {
    int id = 0;
    int row = 0;
    int col = 0;
    double center_lat = 0.0;
    double center_lon = 0.0;
};

// Symmetric haversine distances between cell centers, in km.
class DistanceGraph {
  public:
    DistanceGraph() = default;
    explicit DistanceGraph(const std::vector<GridCell>& cells);

    double at(int i, int j) const { return d_[static_cast<std::size_t>(i) * n_ + j]; }
    int size() const { return n_; }

  private:
    int n_ = 0;
    std::vector<double> d_;
};

double haversine_km(double lat1, double lon1, double lat2, double lon2);

// Row-major cells with id = row * cols + col.
std::vector<GridCell> build_grid(const GridSpec& spec);

// All j != i within threshold L of cell i, ascending ids.
std::vector<int> geo_neighbors(int cell_id, const DistanceGraph& dist, double threshold_km);

}  // namespace odcast
