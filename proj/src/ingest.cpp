#include "odcast/ingest.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <unordered_map>

#include "json.hpp"
#include "odcast/errors.hpp"

namespace odcast {

namespace fs = std::filesystem;

std::int64_t days_from_civil(int y, int m, int d) {
    y -= m <= 2;
    const std::int64_t era = (y >= 0 ? y : y - 399) / 400;
    const unsigned yoe = static_cast<unsigned>(y - era * 400);
    const unsigned doy = (153u * static_cast<unsigned>(m + (m > 2 ? -3 : 9)) + 2u) / 5u + static_cast<unsigned>(d) - 1u;
    const unsigned doe = yoe * 365 + yoe / 4 - yoe / 100 + doy;
    return era * 146097 + static_cast<std::int64_t>(doe) - 719468;
}

void civil_from_days(std::int64_t z, int& year, int& month, int& day) {
    z += 719468;
    const std::int64_t era = (z >= 0 ? z : z - 146096) / 146097;
    const unsigned doe = static_cast<unsigned>(z - era * 146097);
    const unsigned yoe = (doe - doe / 1460 + doe / 36524 - doe / 146096) / 365;
    const std::int64_t y = static_cast<std::int64_t>(yoe) + era * 400;
    const unsigned doy = doe - (365 * yoe + yoe / 4 - yoe / 100);
    const unsigned mp = (5 * doy + 2) / 153;
    day = static_cast<int>(doy - (153 * mp + 2) / 5 + 1);
    month = static_cast<int>(mp < 10 ? mp + 3 : mp - 9);
    year = static_cast<int>(y + (month <= 2));
}

int day_of_week(std::int64_t civil_days) {
    // 1970-01-01 was a Thursday
    return static_cast<int>(((civil_days % 7) + 7 + 3) % 7);
}

bool parse_timestamp(const std::string& text, Timestamp& out) {
    if (text.size() != 19 || text[4] != '-' || text[7] != '-' || text[10] != 'T' || text[13] != ':' ||
        text[16] != ':')
        return false;
    auto num = [&](int pos, int len, int& v) {
        v = 0;
        for (int i = pos; i < pos + len; ++i) {
            if (text[i] < '0' || text[i] > '9') return false;
            v = v * 10 + (text[i] - '0');
        }
        return true;
    };
    int y, mo, d, h, mi, s;
    if (!num(0, 4, y) || !num(5, 2, mo) || !num(8, 2, d) || !num(11, 2, h) || !num(14, 2, mi) || !num(17, 2, s))
        return false;
    if (mo < 1 || mo > 12 || d < 1 || d > 31 || h > 23 || mi > 59 || s > 59) return false;
    out.days = days_from_civil(y, mo, d);
    out.seconds = h * 3600 + mi * 60 + s;
    return true;
}

std::string format_timestamp(const Timestamp& ts) {
    int y, mo, d;
    civil_from_days(ts.days, y, mo, d);
    char buf[48];
    std::snprintf(buf, sizeof buf, "%04d-%02d-%02dT%02d:%02d:%02d", y, mo, d, ts.seconds / 3600,
                  (ts.seconds / 60) % 60, ts.seconds % 60);
    return buf;
}

namespace {

bool parse_double(const std::string& s, double& out) {
    if (s.empty()) return false;
    const char* begin = s.c_str();
    char* end = nullptr;
    out = std::strtod(begin, &end);
    return end == begin + s.size() && std::isfinite(out);
}

std::vector<std::string> split_csv(const std::string& line) {
    std::vector<std::string> fields;
    std::string cur;
    for (char c : line) {
        if (c == ',') {
            fields.push_back(cur);
            cur.clear();
        } else {
            cur.push_back(c);
        }
    }
    fields.push_back(cur);
    return fields;
}

constexpr const char* kHeader = "pickup_time,pickup_lat,pickup_lon,dropoff_lat,dropoff_lon";

}  // namespace

ParseResult parse_orders(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw UserError("cannot open orders file: " + path);
    std::string line;
    if (!std::getline(in, line)) throw UserError("orders file is empty (header required): " + path);
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line != kHeader) throw UserError("orders file has unexpected header: " + path);

    ParseResult result;
    std::size_t rows = 0;
    while (std::getline(in, line)) {
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;
        ++rows;
        auto fields = split_csv(line);
        OrderRecord rec;
        bool ok = fields.size() == 5 && parse_timestamp(fields[0], rec.pickup_time) &&
                  parse_double(fields[1], rec.pickup_lat) && parse_double(fields[2], rec.pickup_lon) &&
                  parse_double(fields[3], rec.dropoff_lat) && parse_double(fields[4], rec.dropoff_lon);
        ok = ok && std::abs(rec.pickup_lat) <= 90.0 && std::abs(rec.dropoff_lat) <= 90.0 &&
             std::abs(rec.pickup_lon) <= 180.0 && std::abs(rec.dropoff_lon) <= 180.0;
        if (!ok) {
            ++result.skipped;
            continue;
        }
        result.records.push_back(rec);
    }
    if (rows > 0 && result.skipped * 2 > rows) {
        std::ostringstream msg;
        msg << "orders file " << path << ": " << result.skipped << " of " << rows
            << " rows malformed (more than half)";
        throw UserError(msg.str());
    }
    std::stable_sort(result.records.begin(), result.records.end(),
                     [](const OrderRecord& a, const OrderRecord& b) { return a.pickup_time < b.pickup_time; });
    return result;
}

int slots_per_day(int granularity_min) {
    if (granularity_min <= 0 || 1440 % granularity_min != 0)
        throw UserError("granularity_min must divide 1440");
    return 1440 / granularity_min;
}

SlotIndex slot_of(const Timestamp& ts, int granularity_min, std::int64_t start_days) {
    SlotIndex idx;
    idx.day = static_cast<int>(ts.days - start_days);
    idx.slot = (ts.seconds / 60) / granularity_min;
    return idx;
}

long SlotODMatrix::total() const {
    long t = 0;
    for (const auto& e : entries) t += e[2];
    return t;
}

Tensor2 SlotODMatrix::dense() const {
    Tensor2 m(n, n);
    for (const auto& e : entries) m.at(e[0], e[1]) = e[2];
    return m;
}

std::vector<double> SlotODMatrix::demand() const {
    std::vector<double> d(static_cast<std::size_t>(n), 0.0);
    for (const auto& e : entries) d[static_cast<std::size_t>(e[0])] += e[2];
    return d;
}

void degrees(const SlotODMatrix& od, std::vector<long>& in_degree, std::vector<long>& out_degree) {
    in_degree.assign(static_cast<std::size_t>(od.n), 0);
    out_degree.assign(static_cast<std::size_t>(od.n), 0);
    for (const auto& e : od.entries) {
        out_degree[static_cast<std::size_t>(e[0])] += e[2];
        in_degree[static_cast<std::size_t>(e[1])] += e[2];
    }
}

GraphSnapshot GraphSnapshot::from_od(SlotODMatrix od) {
    GraphSnapshot g;
    g.od = std::move(od);
    degrees(g.od, g.in_degree, g.out_degree);
    g.fwd.assign(static_cast<std::size_t>(g.od.n), {});
    g.bwd.assign(static_cast<std::size_t>(g.od.n), {});
    for (const auto& e : g.od.entries) {
        g.fwd[static_cast<std::size_t>(e[0])].push_back(e[1]);
        g.bwd[static_cast<std::size_t>(e[1])].push_back(e[0]);
    }
    for (auto& v : g.bwd) std::sort(v.begin(), v.end());
    return g;
}

int Corpus::slots_per_day() const { return odcast::slots_per_day(granularity_min); }

const SlotODMatrix& Corpus::at(int day, int slot) const {
    return slots[static_cast<std::size_t>(day) * slots_per_day() + slot];
}

SlotODMatrix& Corpus::at(int day, int slot) {
    return slots[static_cast<std::size_t>(day) * slots_per_day() + slot];
}

long Corpus::total_orders() const {
    long t = 0;
    for (const auto& s : slots) t += s.total();
    return t;
}

Corpus build_od(const std::vector<OrderRecord>& records, const GridSpec& grid, int granularity_min,
                BuildStats* stats) {
    grid.validate();
    Corpus corpus;
    corpus.grid = grid;
    corpus.granularity_min = granularity_min;
    const int spd = slots_per_day(granularity_min);
    const int n = grid.cell_count();

    if (records.empty()) {
        if (stats) *stats = {};
        return corpus;
    }
    corpus.start_days = records.front().pickup_time.days;
    for (const auto& r : records) corpus.start_days = std::min(corpus.start_days, r.pickup_time.days);

    const double dlat = grid.lat_step_deg();
    const double dlon = grid.lon_step_deg();
    auto cell_of = [&](double lat, double lon) -> int {
        const double fr = (lat - grid.origin_lat) / dlat;
        const double fc = (lon - grid.origin_lon) / dlon;
        const int r = static_cast<int>(std::floor(fr));
        const int c = static_cast<int>(std::floor(fc));
        if (r < 0 || r >= grid.rows || c < 0 || c >= grid.cols) return -1;
        return r * grid.cols + c;
    };

    BuildStats bs;
    int max_day = 0;
    std::unordered_map<std::uint64_t, int> counts;
    counts.reserve(records.size());
    for (const auto& rec : records) {
        const int origin = cell_of(rec.pickup_lat, rec.pickup_lon);
        const int dest = cell_of(rec.dropoff_lat, rec.dropoff_lon);
        if (origin < 0 || dest < 0) {
            ++bs.skipped_bounds;
            continue;
        }
        const SlotIndex si = slot_of(rec.pickup_time, granularity_min, corpus.start_days);
        max_day = std::max(max_day, si.day);
        const std::uint64_t key =
            ((static_cast<std::uint64_t>(si.day) * spd + si.slot) * n + origin) * n + dest;
        ++counts[key];
        ++bs.accepted;
    }

    corpus.days = bs.accepted > 0 ? max_day + 1 : 0;
    corpus.slots.resize(static_cast<std::size_t>(corpus.days) * spd);
    for (int d = 0; d < corpus.days; ++d) {
        for (int s = 0; s < spd; ++s) {
            auto& m = corpus.at(d, s);
            m.day = d;
            m.slot = s;
            m.n = n;
        }
    }
    for (const auto& [key, count] : counts) {
        const int dest = static_cast<int>(key % n);
        const int origin = static_cast<int>((key / n) % n);
        const std::uint64_t ds = key / n / n;
        const int slot = static_cast<int>(ds % spd);
        const int day = static_cast<int>(ds / spd);
        corpus.at(day, slot).entries.push_back({origin, dest, count});
    }
    for (auto& m : corpus.slots) std::sort(m.entries.begin(), m.entries.end());

    corpus.accepted = bs.accepted;
    corpus.skipped_bounds = bs.skipped_bounds;
    if (stats) *stats = bs;
    return corpus;
}

void save_corpus(const Corpus& corpus, const std::string& dir) {
    fs::create_directories(dir);
    nlohmann::ordered_json manifest;
    manifest["format"] = "odcast-corpus";
    manifest["version"] = 1;
    int y, mo, d;
    civil_from_days(corpus.start_days, y, mo, d);
    char datebuf[16];
    std::snprintf(datebuf, sizeof datebuf, "%04d-%02d-%02d", y, mo, d);
    manifest["start_date"] = datebuf;
    manifest["granularity_min"] = corpus.granularity_min;
    manifest["days"] = corpus.days;
    manifest["grid"] = {{"origin_lat", corpus.grid.origin_lat},
                        {"origin_lon", corpus.grid.origin_lon},
                        {"cell_length_km", corpus.grid.cell_length_km},
                        {"rows", corpus.grid.rows},
                        {"cols", corpus.grid.cols},
                        {"geo_threshold_km", corpus.grid.threshold_km()}};
    manifest["accepted"] = corpus.accepted;
    manifest["skipped_parse"] = corpus.skipped_parse;
    manifest["skipped_bounds"] = corpus.skipped_bounds;
    std::ofstream mf(fs::path(dir) / "manifest.json");
    if (!mf) throw UserError("cannot write corpus manifest in " + dir);
    mf << manifest.dump(2) << "\n";

    const int spd = corpus.days > 0 ? corpus.slots_per_day() : 0;
    for (int day = 0; day < corpus.days; ++day) {
        char name[24];
        std::snprintf(name, sizeof name, "day_%04d.txt", day);
        std::ofstream df(fs::path(dir) / name);
        if (!df) throw UserError("cannot write corpus day file in " + dir);
        for (int slot = 0; slot < spd; ++slot) {
            for (const auto& e : corpus.at(day, slot).entries)
                df << day << ' ' << slot << ' ' << e[0] << ' ' << e[1] << ' ' << e[2] << '\n';
        }
    }
}

Corpus load_corpus(const std::string& dir) {
    std::ifstream mf(fs::path(dir) / "manifest.json");
    if (!mf) throw UserError("cannot open corpus manifest in " + dir);
    nlohmann::json manifest;
    try {
        mf >> manifest;
    } catch (const nlohmann::json::exception& e) {
        throw UserError("corpus manifest is not valid JSON: " + std::string(e.what()));
    }
    if (manifest.value("format", "") != "odcast-corpus") throw UserError("not an odcast corpus: " + dir);

    Corpus corpus;
    const auto& g = manifest.at("grid");
    corpus.grid.origin_lat = g.at("origin_lat").get<double>();
    corpus.grid.origin_lon = g.at("origin_lon").get<double>();
    corpus.grid.cell_length_km = g.at("cell_length_km").get<double>();
    corpus.grid.rows = g.at("rows").get<int>();
    corpus.grid.cols = g.at("cols").get<int>();
    corpus.grid.geo_threshold_km = g.at("geo_threshold_km").get<double>();
    corpus.granularity_min = manifest.at("granularity_min").get<int>();
    corpus.days = manifest.at("days").get<int>();
    corpus.accepted = manifest.at("accepted").get<std::size_t>();
    corpus.skipped_parse = manifest.value("skipped_parse", std::size_t{0});
    corpus.skipped_bounds = manifest.value("skipped_bounds", std::size_t{0});
    Timestamp start;
    if (!parse_timestamp(manifest.at("start_date").get<std::string>() + "T00:00:00", start))
        throw UserError("corpus manifest has malformed start_date");
    corpus.start_days = start.days;

    const int spd = corpus.slots_per_day();
    const int n = corpus.grid.cell_count();
    corpus.slots.resize(static_cast<std::size_t>(corpus.days) * spd);
    for (int d = 0; d < corpus.days; ++d) {
        for (int s = 0; s < spd; ++s) {
            auto& m = corpus.at(d, s);
            m.day = d;
            m.slot = s;
            m.n = n;
        }
    }
    for (int day = 0; day < corpus.days; ++day) {
        char name[24];
        std::snprintf(name, sizeof name, "day_%04d.txt", day);
        std::ifstream df(fs::path(dir) / name);
        if (!df) throw UserError("missing corpus day file: " + std::string(name));
        int d, s, i, j, c;
        while (df >> d >> s >> i >> j >> c) {
            if (d != day || s < 0 || s >= spd || i < 0 || i >= n || j < 0 || j >= n || c <= 0)
                throw UserError("corrupt corpus day file: " + std::string(name));
            corpus.at(d, s).entries.push_back({i, j, c});
        }
    }
    return corpus;
}

EmbeddingContext EmbeddingContext::from_corpus(const Corpus& corpus, int z, int train_day_end) {
    EmbeddingContext ctx;
    ctx.z = z;
    ctx.n = corpus.n();
    ctx.rows = corpus.grid.rows;
    ctx.cols = corpus.grid.cols;
    ctx.slots_per_day = corpus.slots_per_day();
    ctx.start_days = corpus.start_days;
    long max_in = 0, max_out = 0;
    std::vector<long> in_deg, out_deg;
    const int limit = std::min(train_day_end, corpus.days);
    for (int d = 0; d < limit; ++d) {
        for (int s = 0; s < ctx.slots_per_day; ++s) {
            degrees(corpus.at(d, s), in_deg, out_deg);
            for (long v : in_deg) max_in = std::max(max_in, v);
            for (long v : out_deg) max_out = std::max(max_out, v);
        }
    }
    ctx.in_degree_norm = 1.0 + static_cast<double>(max_in);
    ctx.out_degree_norm = 1.0 + static_cast<double>(max_out);
    return ctx;
}

Tensor2 init_embeddings(const GraphSnapshot& snapshot, const EmbeddingContext& ctx) {
    if (ctx.z < kMinEmbeddingDim) throw InternalError("init_embeddings: z must be at least 13");
    const int n = snapshot.od.n;
    Tensor2 e(n, ctx.z);
    auto norm = [](double v, double d) { return d > 0.0 ? v / d : 0.0; };
    const int dow = day_of_week(ctx.start_days + snapshot.od.day);
    for (int i = 0; i < n; ++i) {
        const int row = ctx.cols > 0 ? i / ctx.cols : 0;
        const int col = ctx.cols > 0 ? i % ctx.cols : 0;
        e.at(i, 0) = norm(i, ctx.n - 1);
        e.at(i, 1) = norm(row, ctx.rows - 1);
        e.at(i, 2) = norm(col, ctx.cols - 1);
        e.at(i, 3) = norm(snapshot.od.slot, ctx.slots_per_day - 1);
        e.at(i, 4 + dow) = 1.0;
        e.at(i, 11) = std::min(1.0, snapshot.in_degree[static_cast<std::size_t>(i)] / ctx.in_degree_norm);
        e.at(i, 12) = std::min(1.0, snapshot.out_degree[static_cast<std::size_t>(i)] / ctx.out_degree_norm);
    }
    return e;
}

HistoryStats history_stats(const Corpus& corpus, int day_begin, int day_end) {
    if (day_end <= day_begin) throw InternalError("history_stats: empty day range");
    HistoryStats h;
    h.n = corpus.n();
    h.slots_per_day = corpus.slots_per_day();
    h.demand.assign(static_cast<std::size_t>(h.slots_per_day), std::vector<double>(h.n, 0.0));
    h.od.assign(static_cast<std::size_t>(h.slots_per_day), Tensor2(h.n, h.n));
    const double days = day_end - day_begin;
    for (int d = day_begin; d < day_end; ++d) {
        for (int s = 0; s < h.slots_per_day; ++s) {
            for (const auto& e : corpus.at(d, s).entries) {
                h.demand[s][static_cast<std::size_t>(e[0])] += e[2];
                h.od[s].at(e[0], e[1]) += e[2];
            }
        }
    }
    for (int s = 0; s < h.slots_per_day; ++s) {
        for (double& v : h.demand[s]) v /= days;
        for (std::size_t i = 0; i < h.od[s].size(); ++i) h.od[s].data()[i] /= days;
    }
    return h;
}

}  // namespace odcast
