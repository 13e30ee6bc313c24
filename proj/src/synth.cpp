#include "odcast/synth.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <ostream>

#include "odcast/errors.hpp"
#include "odcast/ingest.hpp"
#include "odcast/rng.hpp"

namespace odcast {

void ScenarioSpec::validate() const {
    grid.validate();
    if (days < 1) throw UserError("scenario: days must be >= 1");
    slots_per_day(granularity_min);
    if (base_rate < 0.0) throw UserError("scenario: base_rate must be >= 0");
    for (const auto& p : peaks)
        if (p.width_slots <= 0.0) throw UserError("scenario: peak width must be positive");
    const int n = grid.cell_count();
    for (const auto& e : events) {
        if (e.amplitude < -1.0) throw UserError("scenario: event amplitude below -1 gives negative rates");
        for (int c : e.cells)
            if (c < 0 || c >= n) throw UserError("scenario: event cell out of range");
    }
    for (const auto& o : od_prefs) {
        if (o.origin < 0 || o.origin >= n || o.dest < 0 || o.dest >= n)
            throw UserError("scenario: od preference cell out of range");
        if (o.share < 0.0 || o.share >= 1.0) throw UserError("scenario: od share must be in [0, 1)");
    }
    Timestamp ts;
    if (!parse_timestamp(start_date + "T00:00:00", ts)) throw UserError("scenario: malformed start_date");
}

namespace {

double periodic_factor(const ScenarioSpec& spec, int slot) {
    double f = 1.0;
    for (const auto& p : spec.peaks) {
        const double d = (slot - p.center_slot) / p.width_slots;
        f += p.amplitude * std::exp(-0.5 * d * d);
    }
    return f;
}

double event_factor(const ScenarioSpec& spec, int day, int slot, int origin) {
    double f = 1.0;
    for (const auto& e : spec.events) {
        if (e.day != day || slot < e.slot_lo || slot > e.slot_hi) continue;
        if (std::find(e.cells.begin(), e.cells.end(), origin) == e.cells.end()) continue;
        f *= 1.0 + e.amplitude;
    }
    return f;
}

double dest_weight(const ScenarioSpec& spec, int origin, int dest) {
    const int n = spec.grid.cell_count();
    double share = 0.0;
    int preferred = -1;
    for (const auto& o : spec.od_prefs) {
        if (o.origin == origin) {
            share = o.share;
            preferred = o.dest;
        }
    }
    if (preferred < 0) return 1.0;
    // row of weights sums to n, keeping base_rate per-pair semantics
    return n * (share * (dest == preferred ? 1.0 : 0.0) + (1.0 - share) / n);
}

}  // namespace

double reference_rate(const ScenarioSpec& spec, int day, int slot, int origin, int dest) {
    return spec.base_rate * periodic_factor(spec, slot) * event_factor(spec, day, slot, origin) *
           dest_weight(spec, origin, dest);
}

void generate(const ScenarioSpec& spec, std::ostream& out) {
    spec.validate();
    const auto cells = build_grid(spec.grid);
    const int n = spec.grid.cell_count();
    const int spd = slots_per_day(spec.granularity_min);
    const int slot_seconds = spec.granularity_min * 60;
    Timestamp start;
    parse_timestamp(spec.start_date + "T00:00:00", start);

    const double dlat = spec.grid.lat_step_deg();
    const double dlon = spec.grid.lon_step_deg();
    // uniform point inside the cell, kept off the upper edge
    auto point_in_cell = [&](const GridCell& cell, Rng& rng, double& lat, double& lon) {
        lat = spec.grid.origin_lat + (cell.row + rng.uniform() * 0.999999) * dlat;
        lon = spec.grid.origin_lon + (cell.col + rng.uniform() * 0.999999) * dlon;
    };

    out << "pickup_time,pickup_lat,pickup_lon,dropoff_lat,dropoff_lon\n";
    char buf[160];
    for (int day = 0; day < spec.days; ++day) {
        Rng rng(derive_seed(spec.seed, "synth.day." + std::to_string(day)));
        for (int slot = 0; slot < spd; ++slot) {
            for (int origin = 0; origin < n; ++origin) {
                for (int dest = 0; dest < n; ++dest) {
                    const double rate = reference_rate(spec, day, slot, origin, dest);
                    const int count = rate > 0.0 ? rng.poisson(rate) : 0;
                    for (int k = 0; k < count; ++k) {
                        Timestamp ts;
                        ts.days = start.days + day;
                        ts.seconds = slot * slot_seconds +
                                     static_cast<int>(rng.uniform() * (slot_seconds - 1));
                        double plat, plon, dlat2, dlon2;
                        point_in_cell(cells[static_cast<std::size_t>(origin)], rng, plat, plon);
                        point_in_cell(cells[static_cast<std::size_t>(dest)], rng, dlat2, dlon2);
                        std::snprintf(buf, sizeof buf, "%s,%.9f,%.9f,%.9f,%.9f\n",
                                      format_timestamp(ts).c_str(), plat, plon, dlat2, dlon2);
                        out << buf;
                    }
                }
            }
        }
    }
}

void generate_to_file(const ScenarioSpec& spec, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw UserError("cannot write orders file: " + path);
    generate(spec, out);
    if (!out) throw UserError("failed writing orders file: " + path);
}

}  // namespace odcast
