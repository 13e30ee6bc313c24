#pragma once

#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

#include "odcast/geo.hpp"

namespace odcast {

struct MealPeak {
    double center_slot = 0.0;  // slot-of-day
    double width_slots = 1.0;
    double amplitude = 0.0;
};

struct EventSpike {
    int day = 0;
    int slot_lo = 0;
    int slot_hi = 0;  // inclusive
    std::vector<int> cells;  // origin cells
    double amplitude = 0.0;
};

struct OdPreference {
    int origin = 0;
    int dest = 0;
    double share = 0.0;  // fraction of the origin's demand pulled to dest
};

struct ScenarioSpec {
    GridSpec grid;
    int days = 7;
    int granularity_min = 15;
    double base_rate = 0.1;  // expected orders per cell pair per slot
    std::vector<MealPeak> peaks;
    std::vector<EventSpike> events;
    std::vector<OdPreference> od_prefs;
    std::string start_date = "2024-03-04";  // a Monday
    std::uint64_t seed = 0;

    void validate() const;
};

// Noiseless Poisson rate for (day, slot, origin, dest): base * periodic
// meal-peak factor * event factor * destination weight.
double reference_rate(const ScenarioSpec& spec, int day, int slot, int origin, int dest);

// Poisson order counts per (day, slot, origin, dest) with timestamps uniform
// in the slot and coordinates uniform in the cells. Deterministic per seed.
void generate(const ScenarioSpec& spec, std::ostream& out);
void generate_to_file(const ScenarioSpec& spec, const std::string& path);

}  // namespace odcast
