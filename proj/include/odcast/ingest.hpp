#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <vector>

#include "odcast/geo.hpp"
#include "odcast/tensor.hpp"

namespace odcast {

// Timezone-naive local timestamp: civil days since 1970-01-01 plus seconds
// into the day.
struct Timestamp {
    std::int64_t days = 0;
    int seconds = 0;

    std::int64_t total_seconds() const { return days * 86400 + seconds; }
    bool operator<(const Timestamp& o) const { return total_seconds() < o.total_seconds(); }
};

std::int64_t days_from_civil(int year, int month, int day);
void civil_from_days(std::int64_t days, int& year, int& month, int& day);
int day_of_week(std::int64_t civil_days);  // Monday = 0

// Strict "YYYY-MM-DDTHH:MM:SS"; returns false on malformed input.
bool parse_timestamp(const std::string& text, Timestamp& out);
std::string format_timestamp(const Timestamp& ts);

struct OrderRecord {
    Timestamp pickup_time;
    double pickup_lat = 0.0;
    double pickup_lon = 0.0;
    double dropoff_lat = 0.0;
    double dropoff_lon = 0.0;
};

struct ParseResult {
    std::vector<OrderRecord> records;  // sorted by pickup_time
    std::size_t skipped = 0;           // malformed rows
};

// Fatal on unreadable file, bad header, or >50% malformed rows.
ParseResult parse_orders(const std::string& path);

struct SlotIndex {
    int day = 0;
    int slot = 0;

    bool operator==(const SlotIndex& o) const { return day == o.day && slot == o.slot; }
};

int slots_per_day(int granularity_min);  // requires granularity dividing 1440
SlotIndex slot_of(const Timestamp& ts, int granularity_min, std::int64_t start_days);

// Sparse per-slot OD counts; only nonzero entries are stored, sorted by (i, j).
struct SlotODMatrix {
    int day = 0;
    int slot = 0;
    int n = 0;
    std::vector<std::array<int, 3>> entries;  // {origin, dest, count}

    long total() const;
    Tensor2 dense() const;
    std::vector<double> demand() const;  // row sums
};

// Row sums (outgoing) and column sums (incoming). The prose definition wins
// over the transposed formula pair: in-degree counts incoming requests.
void degrees(const SlotODMatrix& od, std::vector<long>& in_degree, std::vector<long>& out_degree);

struct GraphSnapshot {
    SlotODMatrix od;
    std::vector<long> in_degree;
    std::vector<long> out_degree;
    std::vector<std::vector<int>> fwd;  // j with od[i][j] > 0
    std::vector<std::vector<int>> bwd;  // j with od[j][i] > 0

    static GraphSnapshot from_od(SlotODMatrix od);
};

// Full (day x slot) lattice of OD matrices for a dataset span.
struct Corpus {
    GridSpec grid;
    int granularity_min = 15;
    int days = 0;
    std::int64_t start_days = 0;  // civil days of day 0
    std::vector<SlotODMatrix> slots;
    std::size_t accepted = 0;
    std::size_t skipped_parse = 0;
    std::size_t skipped_bounds = 0;

    int n() const { return grid.cell_count(); }
    int slots_per_day() const;
    const SlotODMatrix& at(int day, int slot) const;
    SlotODMatrix& at(int day, int slot);
    long total_orders() const;
};

struct BuildStats {
    std::size_t accepted = 0;
    std::size_t skipped_bounds = 0;
};

Corpus build_od(const std::vector<OrderRecord>& records, const GridSpec& grid, int granularity_min,
                BuildStats* stats = nullptr);

void save_corpus(const Corpus& corpus, const std::string& dir);
Corpus load_corpus(const std::string& dir);

// Feature layout: [id, row, col, slot] norms, day-of-week one-hot (7),
// in/out degree norms, zero padding up to z.
inline constexpr int kMinEmbeddingDim = 13;

struct EmbeddingContext {
    int z = 16;
    int n = 0;
    int rows = 0;
    int cols = 0;
    int slots_per_day = 0;
    std::int64_t start_days = 0;
    double in_degree_norm = 1.0;   // 1 + max in-degree over the training split
    double out_degree_norm = 1.0;  // 1 + max out-degree over the training split

    // train_day_end: one past the last training day used for the normalizers.
    static EmbeddingContext from_corpus(const Corpus& corpus, int z, int train_day_end);
};

Tensor2 init_embeddings(const GraphSnapshot& snapshot, const EmbeddingContext& ctx);

// Per slot-of-day training means.
struct HistoryStats {
    int n = 0;
    int slots_per_day = 0;
    std::vector<std::vector<double>> demand;  // [slot][node]
    std::vector<Tensor2> od;                  // [slot], n x n
};

HistoryStats history_stats(const Corpus& corpus, int day_begin, int day_end);

}  // namespace odcast
