#include "csv.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <stdexcept>

namespace epi {

// days-from-civil / civil-from-days per Howard Hinnant's algorithms
std::int64_t days_from_civil(const Date& date) {
  std::int64_t y = date.y;
  const int m = date.m, d = date.d;
  y -= m <= 2;
  const std::int64_t era = (y >= 0 ? y : y - 399) / 400;
  const unsigned yoe = static_cast<unsigned>(y - era * 400);
  const unsigned doy = (153u * (m + (m > 2 ? -3 : 9)) + 2) / 5 + d - 1;
  const unsigned doe = yoe * 365 + yoe / 4 - yoe / 100 + doy;
  return era * 146097 + static_cast<std::int64_t>(doe) - 719468;
}

Date civil_from_days(std::int64_t z) {
  z += 719468;
  const std::int64_t era = (z >= 0 ? z : z - 146096) / 146097;
  const unsigned doe = static_cast<unsigned>(z - era * 146097);
  const unsigned yoe = (doe - doe / 1460 + doe / 36524 - doe / 146096) / 365;
  const std::int64_t y = static_cast<std::int64_t>(yoe) + era * 400;
  const unsigned doy = doe - (365 * yoe + yoe / 4 - yoe / 100);
  const unsigned mp = (5 * doy + 2) / 153;
  const unsigned d = doy - (153 * mp + 2) / 5 + 1;
  const unsigned m = mp + (mp < 10 ? 3 : -9);
  return Date{static_cast<int>(y + (m <= 2)), static_cast<int>(m), static_cast<int>(d)};
}

Date parse_date(const std::string& s) {
  if (s.size() != 10 || s[4] != '-' || s[7] != '-')
    throw std::invalid_argument("bad date (want YYYY-MM-DD): " + s);
  for (int i : {0, 1, 2, 3, 5, 6, 8, 9})
    if (!std::isdigit(static_cast<unsigned char>(s[i])))
      throw std::invalid_argument("bad date (want YYYY-MM-DD): " + s);
  Date d;
  d.y = std::stoi(s.substr(0, 4));
  d.m = std::stoi(s.substr(5, 2));
  d.d = std::stoi(s.substr(8, 2));
  if (d.m < 1 || d.m > 12 || d.d < 1 || d.d > 31)
    throw std::invalid_argument("date out of range: " + s);
  if (civil_from_days(days_from_civil(d)) != d)
    throw std::invalid_argument("invalid calendar date: " + s);
  return d;
}

std::string format_date(const Date& date) {
  char buf[16];
  std::snprintf(buf, sizeof buf, "%04d-%02d-%02d", date.y, date.m, date.d);
  return buf;
}

Date add_days(const Date& date, std::int64_t n) { return civil_from_days(days_from_civil(date) + n); }

std::int64_t days_between(const Date& a, const Date& b) {
  return days_from_civil(b) - days_from_civil(a);
}

bool ObservationSeries::has_gaps() const {
  for (const auto& c : counts)
    if (!c) return true;
  return false;
}

std::vector<std::size_t> ObservationSeries::gap_days() const {
  std::vector<std::size_t> gaps;
  for (std::size_t i = 0; i < counts.size(); ++i)
    if (!counts[i]) gaps.push_back(i);
  return gaps;
}

std::vector<double> ObservationSeries::dense() const {
  std::vector<double> out;
  out.reserve(counts.size());
  for (std::size_t i = 0; i < counts.size(); ++i) {
    if (!counts[i])
      throw std::runtime_error("observation series has a gap at " +
                               format_date(date_of(i)));
    out.push_back(static_cast<double>(*counts[i]));
  }
  return out;
}

std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> fields;
  std::string cur;
  for (char ch : line) {
    if (ch == ',') {
      fields.push_back(cur);
      cur.clear();
    } else if (ch != '\r') {
      cur += ch;
    }
  }
  fields.push_back(cur);
  return fields;
}

namespace {

std::ifstream open_or_throw(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open: " + path);
  return in;
}

[[noreturn]] void row_error(const std::string& path, int line, const std::string& what) {
  throw std::runtime_error(path + ":" + std::to_string(line) + ": " + what);
}

}  // namespace

ObservationSeries load_observations(const std::string& path) {
  auto in = open_or_throw(path);
  std::string line;
  int lineno = 0;
  if (!std::getline(in, line)) throw std::runtime_error(path + ": empty file");
  ++lineno;
  {
    auto header = split_csv_line(line);
    if (header.size() != 2 || header[0] != "date" || header[1] != "count")
      row_error(path, lineno, "expected header 'date,count'");
  }
  std::vector<std::pair<Date, std::int64_t>> rows;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    auto fields = split_csv_line(line);
    if (fields.size() != 2) row_error(path, lineno, "expected 2 fields");
    Date d;
    std::int64_t count = 0;
    try {
      d = parse_date(fields[0]);
      std::size_t pos = 0;
      count = std::stoll(fields[1], &pos);
      if (pos != fields[1].size()) throw std::invalid_argument("trailing characters");
    } catch (const std::exception& e) {
      row_error(path, lineno, std::string("malformed row: ") + e.what());
    }
    if (count < 0) row_error(path, lineno, "negative count");
    if (!rows.empty()) {
      auto gap = days_between(rows.back().first, d);
      if (gap == 0) row_error(path, lineno, "duplicate date " + fields[0]);
      if (gap < 0) row_error(path, lineno, "dates must increase");
    }
    rows.emplace_back(d, count);
  }
  if (rows.empty()) throw std::runtime_error(path + ": no data rows");

  ObservationSeries series;
  series.start = rows.front().first;
  auto span = days_between(rows.front().first, rows.back().first);
  series.counts.assign(static_cast<std::size_t>(span) + 1, std::nullopt);
  for (const auto& [date, count] : rows)
    series.counts[static_cast<std::size_t>(days_between(series.start, date))] = count;
  return series;
}

void save_observations(const ObservationSeries& series, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write: " + path);
  out << "date,count\n";
  for (std::size_t i = 0; i < series.counts.size(); ++i)
    if (series.counts[i])
      out << format_date(series.date_of(i)) << "," << *series.counts[i] << "\n";
}

DailySeries load_daily_series(const std::string& path) {
  auto in = open_or_throw(path);
  std::string line;
  int lineno = 0;
  if (!std::getline(in, line)) throw std::runtime_error(path + ": empty file");
  ++lineno;
  {
    auto header = split_csv_line(line);
    if (header.size() != 2 || header[0] != "date")
      row_error(path, lineno, "expected header 'date,<value>'");
  }
  DailySeries series;
  bool first = true;
  Date prev;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    auto fields = split_csv_line(line);
    if (fields.size() != 2) row_error(path, lineno, "expected 2 fields");
    Date d;
    double v = 0;
    try {
      d = parse_date(fields[0]);
      v = std::stod(fields[1]);
    } catch (const std::exception& e) {
      row_error(path, lineno, std::string("malformed row: ") + e.what());
    }
    if (first) {
      series.start = d;
      first = false;
    } else if (days_between(prev, d) != 1) {
      row_error(path, lineno, "daily series must be contiguous");
    }
    prev = d;
    series.values.push_back(v);
  }
  if (series.values.empty()) throw std::runtime_error(path + ": no data rows");
  return series;
}

std::vector<FlowRow> load_flows(const std::string& path) {
  auto in = open_or_throw(path);
  std::string line;
  int lineno = 0;
  if (!std::getline(in, line)) throw std::runtime_error(path + ": empty file");
  ++lineno;
  {
    auto header = split_csv_line(line);
    if (header.size() != 5 || header[0] != "date")
      row_error(path, lineno, "expected header 'date,r1,r2,age,count'");
  }
  std::vector<FlowRow> rows;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    auto fields = split_csv_line(line);
    if (fields.size() != 5) row_error(path, lineno, "expected 5 fields");
    FlowRow r;
    try {
      r.date = parse_date(fields[0]);
      r.from_region = fields[1];
      r.to_region = fields[2];
      r.age = fields[3];
      r.count = std::stod(fields[4]);
    } catch (const std::exception& e) {
      row_error(path, lineno, std::string("malformed row: ") + e.what());
    }
    if (r.count < 0) row_error(path, lineno, "negative flow");
    rows.push_back(std::move(r));
  }
  return rows;
}

std::vector<VisitRow> load_visits(const std::string& path) {
  auto in = open_or_throw(path);
  std::string line;
  int lineno = 0;
  if (!std::getline(in, line)) throw std::runtime_error(path + ": empty file");
  ++lineno;
  {
    auto header = split_csv_line(line);
    if (header.size() != 4 || header[0] != "date")
      row_error(path, lineno, "expected header 'date,cohort,location,count'");
  }
  std::vector<VisitRow> rows;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    auto fields = split_csv_line(line);
    if (fields.size() != 4) row_error(path, lineno, "expected 4 fields");
    VisitRow r;
    try {
      r.date = parse_date(fields[0]);
      r.cohort = fields[1];
      r.location = fields[2];
      r.count = std::stod(fields[3]);
    } catch (const std::exception& e) {
      row_error(path, lineno, std::string("malformed row: ") + e.what());
    }
    if (r.count < 0) row_error(path, lineno, "negative visit count");
    rows.push_back(std::move(r));
  }
  return rows;
}

std::string fmt_double(double v) {
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  if (std::isnan(v)) return "nan";
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

}  // namespace epi
