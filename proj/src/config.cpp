#include "odcast/config.hpp"

#include <cstdio>
#include <fstream>
#include <sstream>

#include "json.hpp"
#include "odcast/errors.hpp"

namespace odcast {

namespace {

using nlohmann::json;
using nlohmann::ordered_json;

template <typename T>
void maybe(const json& j, const char* key, T& out) {
    if (j.contains(key)) out = j.at(key).get<T>();
}

GridSpec grid_from_json(const json& j) {
    GridSpec g;
    maybe(j, "origin_lat", g.origin_lat);
    maybe(j, "origin_lon", g.origin_lon);
    maybe(j, "cell_length_km", g.cell_length_km);
    maybe(j, "rows", g.rows);
    maybe(j, "cols", g.cols);
    maybe(j, "geo_threshold_km", g.geo_threshold_km);
    return g;
}

ordered_json grid_to_json(const GridSpec& g) {
    return {{"origin_lat", g.origin_lat},   {"origin_lon", g.origin_lon},
            {"cell_length_km", g.cell_length_km}, {"rows", g.rows},
            {"cols", g.cols},               {"geo_threshold_km", g.threshold_km()}};
}

}  // namespace

RunConfig RunConfig::from_json_text(const std::string& text) {
    json j;
    try {
        j = json::parse(text);
    } catch (const json::exception& e) {
        throw UserError(std::string("config is not valid JSON: ") + e.what());
    }

    RunConfig cfg;
    maybe(j, "seed", cfg.seed);
    if (j.contains("grid")) cfg.grid = grid_from_json(j.at("grid"));
    if (j.contains("ingest")) maybe(j.at("ingest"), "granularity_min", cfg.granularity_min);
    if (j.contains("model")) {
        const auto& m = j.at("model");
        maybe(m, "z", cfg.model.dims.z);
        maybe(m, "z_prime", cfg.model.dims.z_prime);
        maybe(m, "heads", cfg.model.dims.heads);
        maybe(m, "eps_h", cfg.model.eps_h);
        maybe(m, "leaky_slope", cfg.model.leaky_slope);
    }
    if (j.contains("temporal")) {
        const auto& t = j.at("temporal");
        maybe(t, "n_days", cfg.model.temporal.n_days);
        maybe(t, "h_hours", cfg.model.temporal.h_hours);
        if (t.contains("channels")) {
            const auto& c = t.at("channels");
            maybe(c, "linear", cfg.model.temporal.linear);
            maybe(c, "stpp", cfg.model.temporal.stpp);
            maybe(c, "stpm", cfg.model.temporal.stpm);
            maybe(c, "nonlinear", cfg.model.temporal.nonlinear);
        }
    }
    if (j.contains("train")) {
        const auto& t = j.at("train");
        maybe(t, "epochs", cfg.train.epochs);
        maybe(t, "batch_size", cfg.train.batch_size);
        maybe(t, "learning_rate", cfg.train.learning_rate);
        maybe(t, "w_demand", cfg.model.w_demand);
        maybe(t, "w_od", cfg.model.w_od);
        std::string optimizer = "adam";
        maybe(t, "optimizer", optimizer);
        if (optimizer == "adam")
            cfg.train.adam = true;
        else if (optimizer == "sgd")
            cfg.train.adam = false;
        else
            throw UserError("config: optimizer must be adam or sgd");
    }
    if (j.contains("blend")) maybe(j.at("blend"), "lambda", cfg.model.lambda_blend);
    if (j.contains("baseline")) maybe(j.at("baseline"), "ar_lag", cfg.ar_lag);
    if (j.contains("scenario")) {
        const auto& s = j.at("scenario");
        maybe(s, "days", cfg.scenario.days);
        maybe(s, "base_rate", cfg.scenario.base_rate);
        maybe(s, "start_date", cfg.scenario.start_date);
        if (s.contains("peaks")) {
            for (const auto& p : s.at("peaks")) {
                MealPeak peak;
                maybe(p, "center_slot", peak.center_slot);
                maybe(p, "width_slots", peak.width_slots);
                maybe(p, "amplitude", peak.amplitude);
                cfg.scenario.peaks.push_back(peak);
            }
        }
        if (s.contains("events")) {
            for (const auto& e : s.at("events")) {
                EventSpike spike;
                maybe(e, "day", spike.day);
                maybe(e, "slot_lo", spike.slot_lo);
                maybe(e, "slot_hi", spike.slot_hi);
                maybe(e, "amplitude", spike.amplitude);
                if (e.contains("cells")) spike.cells = e.at("cells").get<std::vector<int>>();
                cfg.scenario.events.push_back(spike);
            }
        }
        if (s.contains("od_prefs")) {
            for (const auto& o : s.at("od_prefs")) {
                OdPreference pref;
                maybe(o, "origin", pref.origin);
                maybe(o, "dest", pref.dest);
                maybe(o, "share", pref.share);
                cfg.scenario.od_prefs.push_back(pref);
            }
        }
    }
    cfg.model.temporal.granularity_min = cfg.granularity_min;
    cfg.scenario.grid = cfg.grid;
    cfg.scenario.granularity_min = cfg.granularity_min;
    cfg.scenario.seed = cfg.seed;
    cfg.train.seed = cfg.seed;
    return cfg;
}

RunConfig RunConfig::from_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw UserError("cannot open config file: " + path);
    std::ostringstream ss;
    ss << in.rdbuf();
    return from_json_text(ss.str());
}

void RunConfig::validate() const {
    grid.validate();
    model.validate();
    train.validate();
    scenario.validate();
    if (ar_lag < 1) throw UserError("config: ar_lag must be >= 1");
    if (model.temporal.granularity_min != granularity_min)
        throw InternalError("config: temporal granularity out of sync");
}

std::string RunConfig::to_json() const {
    ordered_json j;
    j["seed"] = seed;
    j["grid"] = grid_to_json(grid);
    j["ingest"] = {{"granularity_min", granularity_min}};
    j["model"] = {{"z", model.dims.z},
                  {"z_prime", model.dims.z_prime},
                  {"heads", model.dims.heads},
                  {"eps_h", model.eps_h},
                  {"leaky_slope", model.leaky_slope}};
    j["temporal"] = {{"n_days", model.temporal.n_days},
                     {"h_hours", model.temporal.h_hours},
                     {"channels",
                      {{"linear", model.temporal.linear},
                       {"stpp", model.temporal.stpp},
                       {"stpm", model.temporal.stpm},
                       {"nonlinear", model.temporal.nonlinear}}}};
    j["train"] = {{"epochs", train.epochs},
                  {"batch_size", train.batch_size},
                  {"learning_rate", train.learning_rate},
                  {"optimizer", train.adam ? "adam" : "sgd"},
                  {"w_demand", model.w_demand},
                  {"w_od", model.w_od}};
    j["blend"] = {{"lambda", model.lambda_blend}};
    j["baseline"] = {{"ar_lag", ar_lag}};
    ordered_json sc;
    sc["days"] = scenario.days;
    sc["base_rate"] = scenario.base_rate;
    sc["start_date"] = scenario.start_date;
    sc["peaks"] = ordered_json::array();
    for (const auto& p : scenario.peaks)
        sc["peaks"].push_back(
            {{"center_slot", p.center_slot}, {"width_slots", p.width_slots}, {"amplitude", p.amplitude}});
    sc["events"] = ordered_json::array();
    for (const auto& e : scenario.events)
        sc["events"].push_back({{"day", e.day},
                                {"slot_lo", e.slot_lo},
                                {"slot_hi", e.slot_hi},
                                {"cells", e.cells},
                                {"amplitude", e.amplitude}});
    sc["od_prefs"] = ordered_json::array();
    for (const auto& o : scenario.od_prefs)
        sc["od_prefs"].push_back({{"origin", o.origin}, {"dest", o.dest}, {"share", o.share}});
    j["scenario"] = sc;
    return j.dump(2);
}

std::string RunConfig::fingerprint() const {
    const std::string text = to_json();
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (char c : text) {
        h ^= static_cast<unsigned char>(c);
        h *= 0x100000001b3ULL;
    }
    char buf[20];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
    return buf;
}

void write_text_file(const std::string& path, const std::string& content) {
    std::ofstream out(path);
    if (!out) throw UserError("cannot write file: " + path);
    out << content;
    if (!out) throw UserError("failed writing file: " + path);
}

}  // namespace odcast
