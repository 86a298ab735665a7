#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

namespace epi {

/// Calendar date; engines only ever see day indices, dates live at the IO
/// boundary.
struct Date {
  int y = 1970;
  int m = 1;
  int d = 1;

  bool operator==(const Date& o) const = default;
};

std::int64_t days_from_civil(const Date& date);
Date civil_from_days(std::int64_t z);
Date parse_date(const std::string& s);  // ISO-8601 YYYY-MM-DD
std::string format_date(const Date& date);
Date add_days(const Date& date, std::int64_t n);
std::int64_t days_between(const Date& a, const Date& b);  // b - a

/// Daily observation series over a contiguous date range. Missing days are
/// gaps (not zeros) and stay distinguishable downstream.
struct ObservationSeries {
  Date start;
  std::vector<std::optional<std::int64_t>> counts;

  std::size_t size() const { return counts.size(); }
  Date date_of(std::size_t i) const { return add_days(start, static_cast<std::int64_t>(i)); }
  bool has_gaps() const;
  std::vector<std::size_t> gap_days() const;
  /// Dense copy; throws if any day is missing.
  std::vector<double> dense() const;
};

/// CSV with header "date,count", ISO dates strictly increasing. Duplicate
/// dates, negative counts and malformed rows are errors naming the line.
ObservationSeries load_observations(const std::string& path);
void save_observations(const ObservationSeries& series, const std::string& path);

/// Daily real-valued series (mobility outflows), CSV header "date,outflow".
struct DailySeries {
  Date start;
  std::vector<double> values;
};
DailySeries load_daily_series(const std::string& path);

/// One observed aggregate flow row: people of age `age` sleeping in
/// from_region the night before and in to_region the night after.
struct FlowRow {
  Date date;
  std::string from_region;
  std::string to_region;
  std::string age;
  double count = 0.0;
};
std::vector<FlowRow> load_flows(const std::string& path);  // header date,r1,r2,age,count

struct VisitRow {
  Date date;
  std::string cohort;
  std::string location;
  double count = 0.0;
};
std::vector<VisitRow> load_visits(const std::string& path);  // header date,cohort,location,count

/// Full-precision decimal formatting used by every numeric output file, so
/// identical runs are byte-identical.
std::string fmt_double(double v);

std::vector<std::string> split_csv_line(const std::string& line);

}  // namespace epi
