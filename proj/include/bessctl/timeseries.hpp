#pragma once

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "bessctl/common.hpp"

namespace bessctl::data {

// strict ISO-8601 with offset, e.g. 2021-01-01T00:30:00+10:00 or ...Z
int64_t parse_iso8601(const std::string& s);
std::string format_iso8601_utc(int64_t epoch_seconds);

constexpr int64_t kSlotSeconds = 30 * 60;
constexpr int kSlotsPerDay = 48;
constexpr int kSlotsPerWeek = 7 * kSlotsPerDay;

// Aligned 30-minute series for one building. load/pv are energies per slot
// in kWh; price is EUR/kWh and may be negative. Values are kept in double;
// the 32-bit contract applies to model-facing state/action storage.
struct TimeSeriesBundle {
    std::string building_id;
    std::vector<int64_t> timestamps;
    std::vector<double> load;
    std::vector<double> pv;
    std::vector<double> price;

    size_t size() const { return timestamps.size(); }
    // prosumption_t = load_t - pv_t; positive values are grid imports
    double prosumption(size_t t) const { return load[t] - pv[t]; }
    TimeSeriesBundle subrange(size_t start, size_t len) const;
    void validate() const;  // spacing, lengths; throws DataError
};

struct BatterySpec {
    double capacity_max = 0.0;  // kWh
    double power_max = 0.0;     // kW
    double initial_soe = 0.0;   // kWh
    // per-slot energy bound for a 30-minute slot
    double slot_energy_bound() const { return power_max / 2.0; }
};

// Joins a building CSV (timestamp,load_kwh,pv_kwh) with a price CSV
// (timestamp,price_eur_per_kwh) on the intersection of their time ranges.
// price_factor rescales file prices (1e-3 converts EUR/MWh files).
// Whether load/pv are really kWh per slot is not detectable from the file;
// a kW-valued file silently shifts all energies by a factor of 2.
TimeSeriesBundle load_bundle(const std::string& building_csv_path, const std::string& price_csv_path,
                             double price_factor = 1.0, const std::string& building_id = "");

// capacity = mean over complete days of the daily PV surplus
// sum_slots max(pv-load, 0); power_max = capacity/4; initial SoE 0.
BatterySpec derive_battery_spec(const TimeSeriesBundle& bundle);

// eval window = final eval_weeks of data; train = everything before it.
// Requires at least one training day in front of the window.
std::pair<TimeSeriesBundle, TimeSeriesBundle> split_windows(const TimeSeriesBundle& bundle,
                                                            int eval_weeks = 4);

void write_building_csv(const std::string& path, const TimeSeriesBundle& bundle);
void write_price_csv(const std::string& path, const TimeSeriesBundle& bundle);

}  // namespace bessctl::data
