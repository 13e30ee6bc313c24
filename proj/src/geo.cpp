#include "odcast/geo.hpp"

#include <cmath>

#include "odcast/errors.hpp"

namespace odcast {

namespace {
constexpr double kEarthRadiusKm = 6371.0;
constexpr double kKmPerDegree = 111.195;  // R * pi / 180
constexpr double kPi = 3.14159265358979323846;

double deg2rad(double d) { return d * kPi / 180.0; }
}  // namespace

double GridSpec::lat_step_deg() const { return cell_length_km / kKmPerDegree; }

double GridSpec::lon_step_deg() const {
    return cell_length_km / (kKmPerDegree * std::cos(deg2rad(origin_lat)));
}

void GridSpec::validate() const {
    if (rows <= 0 || cols <= 0) throw UserError("grid: rows and cols must be positive");
    if (cell_length_km <= 0.0) throw UserError("grid: cell_length_km must be positive");
    if (threshold_km() <= 0.0) throw UserError("grid: geo_threshold_km must be positive");
    if (origin_lat < -90.0 || origin_lat > 90.0 || origin_lon < -180.0 || origin_lon > 180.0)
        throw UserError("grid: origin out of range");
}

double haversine_km(double lat1, double lon1, double lat2, double lon2) {
    if (lat1 < -90.0 || lat1 > 90.0 || lat2 < -90.0 || lat2 > 90.0)
        throw InternalError("haversine: latitude out of [-90, 90]");
    if (lon1 < -180.0 || lon1 > 180.0 || lon2 < -180.0 || lon2 > 180.0)
        throw InternalError("haversine: longitude out of [-180, 180]");
    const double phi1 = deg2rad(lat1), phi2 = deg2rad(lat2);
    const double dphi = deg2rad(lat2 - lat1);
    const double dlam = deg2rad(lon2 - lon1);
    const double sp = std::sin(dphi / 2.0), sl = std::sin(dlam / 2.0);
    const double a = sp * sp + std::cos(phi1) * std::cos(phi2) * sl * sl;
    return 2.0 * kEarthRadiusKm * std::asin(std::min(1.0, std::sqrt(a)));
}

std::vector<GridCell> build_grid(const GridSpec& spec) {
    spec.validate();
    const double dlat = spec.lat_step_deg();
    const double dlon = spec.lon_step_deg();
    std::vector<GridCell> cells;
    cells.reserve(static_cast<std::size_t>(spec.cell_count()));
    for (int r = 0; r < spec.rows; ++r) {
        for (int c = 0; c < spec.cols; ++c) {
            GridCell cell;
            cell.row = r;
            cell.col = c;
            cell.id = r * spec.cols + c;
            cell.center_lat = spec.origin_lat + (r + 0.5) * dlat;
            cell.center_lon = spec.origin_lon + (c + 0.5) * dlon;
            cells.push_back(cell);
        }
    }
    return cells;
}

DistanceGraph::DistanceGraph(const std::vector<GridCell>& cells) : n_(static_cast<int>(cells.size())) {
    d_.assign(static_cast<std::size_t>(n_) * n_, 0.0);
    for (int i = 0; i < n_; ++i) {
        for (int j = i + 1; j < n_; ++j) {
            const double d = haversine_km(cells[i].center_lat, cells[i].center_lon, cells[j].center_lat,
                                          cells[j].center_lon);
            d_[static_cast<std::size_t>(i) * n_ + j] = d;
            d_[static_cast<std::size_t>(j) * n_ + i] = d;
        }
    }
}

std::vector<int> geo_neighbors(int cell_id, const DistanceGraph& dist, double threshold_km) {
    if (cell_id < 0 || cell_id >= dist.size()) throw InternalError("geo_neighbors: cell id out of range");
    std::vector<int> out;
    for (int j = 0; j < dist.size(); ++j) {
        if (j == cell_id) continue;  // self-information already lives in the node embedding
        if (dist.at(cell_id, j) <= threshold_km) out.push_back(j);
    }
    return out;
}

}  // namespace odcast
