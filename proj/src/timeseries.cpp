#include "bessctl/timeseries.hpp"

#include <algorithm>
#include <cstdio>
#include <fstream>
#include <sstream>

namespace bessctl::data {

namespace {

// Howard Hinnant's civil-date algorithms
int64_t days_from_civil(int y, int m, int d) {
    y -= m <= 2;
    const int64_t era = (y >= 0 ? y : y - 399) / 400;
    const unsigned yoe = static_cast<unsigned>(y - era * 400);
    const unsigned doy = static_cast<unsigned>((153 * (m + (m > 2 ? -3 : 9)) + 2) / 5 + d - 1);
    const unsigned doe = yoe * 365 + yoe / 4 - yoe / 100 + doy;
    return era * 146097 + static_cast<int64_t>(doe) - 719468;
}

void civil_from_days(int64_t z, int& y, int& m, int& d) {
    z += 719468;
    const int64_t era = (z >= 0 ? z : z - 146096) / 146097;
    const unsigned doe = static_cast<unsigned>(z - era * 146097);
    const unsigned yoe = (doe - doe / 1460 + doe / 36524 - doe / 146096) / 365;
    const int64_t yr = static_cast<int64_t>(yoe) + era * 400;
    const unsigned doy = doe - (365 * yoe + yoe / 4 - yoe / 100);
    const unsigned mp = (5 * doy + 2) / 153;
    d = static_cast<int>(doy - (153 * mp + 2) / 5 + 1);
    m = static_cast<int>(mp + (mp < 10 ? 3 : -9));
    y = static_cast<int>(yr + (m <= 2));
}

struct Row {
    int64_t ts;
    std::vector<double> vals;
};

std::vector<std::string> split_fields(const std::string& line) {
    std::vector<std::string> out;
    std::string cur;
    for (char c : line) {
        if (c == ',') {
            out.push_back(cur);
            cur.clear();
        } else {
            cur.push_back(c);
        }
    }
    out.push_back(cur);
    return out;
}

double parse_number(const std::string& s, const std::string& path, int line_no) {
    size_t idx = 0;
    double v;
    try {
        v = std::stod(s, &idx);
    } catch (const std::exception&) {
        throw DataError(path + ":" + std::to_string(line_no) + ": unparsable number '" + s + "'");
    }
    if (idx != s.size())
        throw DataError(path + ":" + std::to_string(line_no) + ": trailing characters in number '" + s + "'");
    return v;
}

std::vector<Row> read_csv(const std::string& path, const std::string& expected_header) {
    std::ifstream f(path);
    if (!f) throw DataError("cannot open '" + path + "'");
    std::string line;
    if (!std::getline(f, line)) throw DataError(path + ": empty file");
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line != expected_header)
        throw DataError(path + ": expected header '" + expected_header + "', got '" + line + "'");
    size_t ncols = split_fields(expected_header).size();

    std::vector<Row> rows;
    int line_no = 1;
    while (std::getline(f, line)) {
        ++line_no;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;
        auto fields = split_fields(line);
        if (fields.size() != ncols)
            throw DataError(path + ":" + std::to_string(line_no) + ": expected " + std::to_string(ncols) +
                            " fields, got " + std::to_string(fields.size()));
        Row r;
        r.ts = parse_iso8601(fields[0]);
        for (size_t i = 1; i < ncols; ++i) r.vals.push_back(parse_number(fields[i], path, line_no));
        rows.push_back(std::move(r));
    }
    if (rows.empty()) throw DataError(path + ": no data rows");
    return rows;
}

// strictly increasing, exactly 30 minutes apart
void check_grid(const std::vector<Row>& rows, const std::string& path) {
    for (size_t i = 1; i < rows.size(); ++i) {
        int64_t gap = rows[i].ts - rows[i - 1].ts;
        if (gap == 0)
            throw DataError(path + ": duplicate timestamp " + format_iso8601_utc(rows[i].ts));
        if (gap == 2 * kSlotSeconds)
            throw DataError(path + ": missing slot " + format_iso8601_utc(rows[i - 1].ts + kSlotSeconds));
        if (gap != kSlotSeconds)
            throw DataError(path + ": non-30-minute spacing at " + format_iso8601_utc(rows[i].ts) +
                            " (previous " + format_iso8601_utc(rows[i - 1].ts) + ")");
    }
}

}  // namespace

int64_t parse_iso8601(const std::string& s) {
    int y, mo, d, h, mi, se;
    int n = 0;
    if (std::sscanf(s.c_str(), "%d-%d-%dT%d:%d:%d%n", &y, &mo, &d, &h, &mi, &se, &n) != 6)
        throw DataError("bad ISO-8601 timestamp '" + s + "'");
    std::string rest = s.substr(static_cast<size_t>(n));
    int64_t offset = 0;
    if (rest == "Z") {
        offset = 0;
    } else if (!rest.empty() && (rest[0] == '+' || rest[0] == '-')) {
        int oh, om;
        if (std::sscanf(rest.c_str() + 1, "%d:%d", &oh, &om) != 2)
            throw DataError("bad ISO-8601 offset in '" + s + "'");
        offset = (rest[0] == '-' ? -1 : 1) * (oh * 3600 + om * 60);
    } else {
        throw DataError("missing UTC offset in timestamp '" + s + "'");
    }
    if (mo < 1 || mo > 12 || d < 1 || d > 31 || h < 0 || h > 23 || mi < 0 || mi > 59 || se < 0 || se > 60)
        throw DataError("out-of-range field in timestamp '" + s + "'");
    return days_from_civil(y, mo, d) * 86400 + h * 3600 + mi * 60 + se - offset;
}

std::string format_iso8601_utc(int64_t epoch_seconds) {
    int64_t days = epoch_seconds / 86400;
    int64_t rem = epoch_seconds % 86400;
    if (rem < 0) {
        rem += 86400;
        days -= 1;
    }
    int y, m, d;
    civil_from_days(days, y, m, d);
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%04d-%02d-%02dT%02d:%02d:%02d+00:00", y, m, d,
                  static_cast<int>(rem / 3600), static_cast<int>((rem % 3600) / 60),
                  static_cast<int>(rem % 60));
    return buf;
}

TimeSeriesBundle TimeSeriesBundle::subrange(size_t start, size_t len) const {
    if (start + len > size()) throw DataError("subrange [" + std::to_string(start) + "," +
                                              std::to_string(start + len) + ") exceeds bundle length " +
                                              std::to_string(size()));
    TimeSeriesBundle out;
    out.building_id = building_id;
    out.timestamps.assign(timestamps.begin() + start, timestamps.begin() + start + len);
    out.load.assign(load.begin() + start, load.begin() + start + len);
    out.pv.assign(pv.begin() + start, pv.begin() + start + len);
    out.price.assign(price.begin() + start, price.begin() + start + len);
    return out;
}

void TimeSeriesBundle::validate() const {
    if (load.size() != size() || pv.size() != size() || price.size() != size())
        throw DataError("bundle '" + building_id + "': array lengths disagree");
    for (size_t i = 1; i < size(); ++i) {
        if (timestamps[i] - timestamps[i - 1] != kSlotSeconds)
            throw DataError("bundle '" + building_id + "': non-30-minute spacing at " +
                            format_iso8601_utc(timestamps[i]));
    }
    for (size_t i = 0; i < size(); ++i) {
        if (load[i] < 0 || pv[i] < 0)
            throw DataError("bundle '" + building_id + "': negative load/pv at " +
                            format_iso8601_utc(timestamps[i]));
    }
}

TimeSeriesBundle load_bundle(const std::string& building_csv_path, const std::string& price_csv_path,
                             double price_factor, const std::string& building_id) {
    auto brows = read_csv(building_csv_path, "timestamp,load_kwh,pv_kwh");
    auto prows = read_csv(price_csv_path, "timestamp,price_eur_per_kwh");
    check_grid(brows, building_csv_path);
    check_grid(prows, price_csv_path);

    int64_t lo = std::max(brows.front().ts, prows.front().ts);
    int64_t hi = std::min(brows.back().ts, prows.back().ts);
    if (lo > hi)
        throw DataError("no timestamp overlap between '" + building_csv_path + "' and '" +
                        price_csv_path + "'");
    // both grids are clean and 30-minute spaced, but their phases may differ
    if ((lo - brows.front().ts) % kSlotSeconds != 0 || (lo - prows.front().ts) % kSlotSeconds != 0)
        throw DataError("price file missing slot " + format_iso8601_utc(brows.front().ts + ((lo - brows.front().ts) / kSlotSeconds) * kSlotSeconds) +
                        ": grids of '" + building_csv_path + "' and '" + price_csv_path + "' are misaligned");

    size_t boff = static_cast<size_t>((lo - brows.front().ts) / kSlotSeconds);
    size_t poff = static_cast<size_t>((lo - prows.front().ts) / kSlotSeconds);
    size_t len = static_cast<size_t>((hi - lo) / kSlotSeconds) + 1;

    TimeSeriesBundle out;
    out.building_id = building_id.empty() ? building_csv_path : building_id;
    out.timestamps.reserve(len);
    out.load.reserve(len);
    out.pv.reserve(len);
    out.price.reserve(len);
    for (size_t i = 0; i < len; ++i) {
        const Row& b = brows[boff + i];
        const Row& p = prows[poff + i];
        if (b.ts != p.ts)
            throw DataError("price file missing slot " + format_iso8601_utc(b.ts));
        out.timestamps.push_back(b.ts);
        out.load.push_back(b.vals[0]);
        out.pv.push_back(b.vals[1]);
        out.price.push_back(p.vals[0] * price_factor);
    }
    out.validate();
    return out;
}

BatterySpec derive_battery_spec(const TimeSeriesBundle& bundle) {
    size_t days = bundle.size() / kSlotsPerDay;
    if (days == 0)
        throw DataError("derive_battery_spec: bundle '" + bundle.building_id + "' spans less than one day (" +
                        std::to_string(bundle.size()) + " slots)");
    double total = 0.0;
    for (size_t day = 0; day < days; ++day) {
        double surplus = 0.0;
        for (size_t s = 0; s < kSlotsPerDay; ++s) {
            size_t t = day * kSlotsPerDay + s;
            surplus += std::max(bundle.pv[t] - bundle.load[t], 0.0);
        }
        total += surplus;
    }
    double capacity = total / static_cast<double>(days);
    if (capacity == 0.0)
        throw DataError("building '" + bundle.building_id + "' has no PV surplus; supply explicit spec");
    BatterySpec spec;
    spec.capacity_max = capacity;
    spec.power_max = capacity / 4.0;
    spec.initial_soe = 0.0;
    return spec;
}

std::pair<TimeSeriesBundle, TimeSeriesBundle> split_windows(const TimeSeriesBundle& bundle,
                                                            int eval_weeks) {
    if (eval_weeks < 1) throw DataError("split_windows: eval_weeks must be >= 1");
    size_t eval_len = static_cast<size_t>(eval_weeks) * kSlotsPerWeek;
    size_t required = eval_len + kSlotsPerDay;  // at least one training day
    if (bundle.size() < required)
        throw DataError("split_windows: need at least " + std::to_string(required) + " slots (" +
                        std::to_string(eval_len) + " eval + one training day), bundle '" +
                        bundle.building_id + "' has " + std::to_string(bundle.size()));
    size_t train_len = bundle.size() - eval_len;
    return {bundle.subrange(0, train_len), bundle.subrange(train_len, eval_len)};
}

void write_building_csv(const std::string& path, const TimeSeriesBundle& bundle) {
    std::ofstream f(path);
    if (!f) throw DataError("cannot open '" + path + "' for writing");
    f << "timestamp,load_kwh,pv_kwh\n";
    char buf[96];
    for (size_t i = 0; i < bundle.size(); ++i) {
        std::snprintf(buf, sizeof(buf), "%s,%.6f,%.6f\n", format_iso8601_utc(bundle.timestamps[i]).c_str(),
                      bundle.load[i], bundle.pv[i]);
        f << buf;
    }
}

void write_price_csv(const std::string& path, const TimeSeriesBundle& bundle) {
    std::ofstream f(path);
    if (!f) throw DataError("cannot open '" + path + "' for writing");
    f << "timestamp,price_eur_per_kwh\n";
    char buf[64];
    for (size_t i = 0; i < bundle.size(); ++i) {
        std::snprintf(buf, sizeof(buf), "%s,%.6f\n", format_iso8601_utc(bundle.timestamps[i]).c_str(),
                      bundle.price[i]);
        f << buf;
    }
}

}  // namespace bessctl::data
