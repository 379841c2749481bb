#include "preddev/io.hpp"
#include "preddev/errors.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <sstream>

namespace preddev {

std::string format_double(double v) {
  if (std::isnan(v)) return "nan";
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  char buf[64];
  auto res = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, res.ptr);
}

std::vector<std::string> split_csv(const std::string& line) {
  std::vector<std::string> out;
  std::string cell;
  std::istringstream ss(line);
  while (std::getline(ss, cell, ',')) {
    const auto b = cell.find_first_not_of(" \t\r");
    const auto e = cell.find_last_not_of(" \t\r");
    out.push_back(b == std::string::npos ? std::string() : cell.substr(b, e - b + 1));
  }
  if (!line.empty() && line.back() == ',') out.emplace_back();
  return out;
}

namespace {

double parse_number(const std::string& cell, const std::string& where) {
  double v = 0.0;
  const char* end = cell.data() + cell.size();
  auto res = std::from_chars(cell.data(), end, v);
  if (cell.empty() || res.ec != std::errc() || res.ptr != end || !std::isfinite(v)) {
    throw DataError(where + ": not a finite number: '" + cell + "'");
  }
  return v;
}

struct Row {
  std::string condition, observable;
  double time;
  long replicate;
  double value;
  std::optional<double> variance;
};

}  // namespace

Dataset parse_dataset(std::istream& in, const std::string& source, const std::map<std::string, double>& variances) {
  std::string line;
  long lineno = 0;
  std::vector<std::string> header;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    header = split_csv(line);
    break;
  }
  if (header.empty()) throw DataError(source + ": no observations");
  auto column = [&](const std::string& name, bool required) -> int {
    const auto it = std::find(header.begin(), header.end(), name);
    if (it == header.end()) {
      if (required) throw DataError(source + ": header lacks column '" + name + "'");
      return -1;
    }
    return static_cast<int>(it - header.begin());
  };
  const int c_cond = column("condition_id", true), c_obs = column("observable", true), c_time = column("time", true),
            c_rep = column("replicate", true), c_val = column("value", true), c_var = column("variance", false);

  std::vector<Row> rows;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    const auto cells = split_csv(line);
    const std::string where = source + ":" + std::to_string(lineno);
    if (cells.size() != header.size()) {
      throw DataError(where + ": expected " + std::to_string(header.size()) + " fields, found " +
                      std::to_string(cells.size()));
    }
    Row r;
    r.condition = cells[static_cast<std::size_t>(c_cond)];
    r.observable = cells[static_cast<std::size_t>(c_obs)];
    if (r.condition.empty() || r.observable.empty()) throw DataError(where + ": empty condition_id or observable");
    r.time = parse_number(cells[static_cast<std::size_t>(c_time)], where);
    const double rep = parse_number(cells[static_cast<std::size_t>(c_rep)], where);
    if (rep != std::floor(rep)) throw DataError(where + ": replicate must be an integer");
    r.replicate = static_cast<long>(rep);
    r.value = parse_number(cells[static_cast<std::size_t>(c_val)], where);
    if (c_var >= 0 && !cells[static_cast<std::size_t>(c_var)].empty()) {
      r.variance = parse_number(cells[static_cast<std::size_t>(c_var)], where);
      if (!(*r.variance > 0.0)) throw DataError(where + ": variance must be positive");
    }
    rows.push_back(std::move(r));
  }
  if (rows.empty()) throw DataError(source + ": no observations");

  std::stable_sort(rows.begin(), rows.end(), [](const Row& a, const Row& b) {
    return std::tie(a.time, a.replicate) < std::tie(b.time, b.replicate);
  });
  Dataset data;
  for (const auto& r : rows) {
    ObservedSeries* s = data.find(r.condition, r.observable);
    if (!s) {
      data.series.push_back({r.condition, r.observable, {}, {}, std::nullopt});
      s = &data.series.back();
    }
    if (r.variance) {
      if (s->variance && *s->variance != *r.variance) {
        throw DataError(source + ": conflicting variances for (" + r.observable + ", " + r.condition + ")");
      }
      s->variance = r.variance;
    }
    if (s->times.empty() || s->times.back() != r.time) {
      s->times.push_back(r.time);
      s->replicates.emplace_back();
    }
    s->replicates.back().push_back(r.value);
  }
  std::sort(data.series.begin(), data.series.end(), [](const ObservedSeries& a, const ObservedSeries& b) {
    return std::tie(a.condition_id, a.observable) < std::tie(b.condition_id, b.observable);
  });
  for (auto& s : data.series) {
    if (s.variance) continue;
    if (auto it = variances.find(s.observable); it != variances.end()) {
      s.variance = it->second;
      continue;
    }
    s.variance = estimate_noise(s);
  }
  data.validate();
  return data;
}

Dataset load_dataset(const std::string& path, const std::map<std::string, double>& variances) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open dataset " + path);
  return parse_dataset(in, path, variances);
}

void write_dataset(const Dataset& data, std::ostream& out) {
  out << "condition_id,observable,time,replicate,value,variance\n";
  for (const auto& s : data.series) {
    const std::string var = s.variance ? format_double(*s.variance) : std::string();
    for (std::size_t k = 0; k < s.times.size(); ++k) {
      for (std::size_t r = 0; r < s.replicates[k].size(); ++r) {
        out << s.condition_id << ',' << s.observable << ',' << format_double(s.times[k]) << ',' << r << ','
            << format_double(s.replicates[k][r]) << ',' << var << '\n';
      }
    }
  }
}

void write_dataset(const Dataset& data, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw DataError("cannot write " + path);
  write_dataset(data, out);
}

}  // namespace preddev
