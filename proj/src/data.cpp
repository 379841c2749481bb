#include "preddev/data.hpp"
#include "preddev/errors.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace preddev {

std::size_t Experiment::observation_count() const {
  std::size_t n = 0;
  for (const auto& s : series) n += s.times.size() * static_cast<std::size_t>(std::max(s.replicates, 0));
  return n;
}

std::size_t observation_count(const std::vector<Experiment>& experiments) {
  std::size_t n = 0;
  for (const auto& e : experiments) n += e.observation_count();
  return n;
}

std::size_t ObservedSeries::observation_count() const {
  std::size_t n = 0;
  for (const auto& r : replicates) n += r.size();
  return n;
}

const ObservedSeries* Dataset::find(const std::string& condition_id, const std::string& observable) const {
  for (const auto& s : series) {
    if (s.condition_id == condition_id && s.observable == observable) return &s;
  }
  return nullptr;
}

ObservedSeries* Dataset::find(const std::string& condition_id, const std::string& observable) {
  for (auto& s : series) {
    if (s.condition_id == condition_id && s.observable == observable) return &s;
  }
  return nullptr;
}

std::size_t Dataset::observation_count() const {
  std::size_t n = 0;
  for (const auto& s : series) n += s.observation_count();
  return n;
}

void Dataset::merge(const Dataset& other) {
  for (const auto& s : other.series) {
    ObservedSeries* mine = find(s.condition_id, s.observable);
    if (!mine) {
      series.push_back(s);
      continue;
    }
    for (std::size_t k = 0; k < s.times.size(); ++k) {
      auto it = std::lower_bound(mine->times.begin(), mine->times.end(), s.times[k]);
      const auto pos = static_cast<std::size_t>(it - mine->times.begin());
      if (it != mine->times.end() && *it == s.times[k]) {
        auto& reps = mine->replicates[pos];
        reps.insert(reps.end(), s.replicates[k].begin(), s.replicates[k].end());
      } else {
        mine->times.insert(it, s.times[k]);
        mine->replicates.insert(mine->replicates.begin() + static_cast<std::ptrdiff_t>(pos), s.replicates[k]);
      }
    }
    if (!mine->variance) mine->variance = s.variance;
  }
}

void Dataset::validate() const {
  if (series.empty()) throw DataError("no observations");
  for (const auto& s : series) {
    const std::string where = "(" + s.observable + ", " + s.condition_id + ")";
    if (s.times.size() != s.replicates.size()) throw DataError("ragged series " + where);
    for (const auto& r : s.replicates) {
      if (r.empty()) throw DataError("time point without replicates in " + where);
    }
    if (!s.variance) throw DataError("no noise variance for " + where);
    if (!(*s.variance > 0.0) || !std::isfinite(*s.variance)) {
      throw DataError("noise variance must be positive for " + where);
    }
  }
}

double estimate_noise(const ObservedSeries& s) {
  const std::string where = "(" + s.observable + ", " + s.condition_id + ")";
  if (s.replicates.empty()) throw DataError("no observations for " + where);
  double acc = 0.0;
  for (const auto& reps : s.replicates) {
    if (reps.size() < 2) {
      throw DataError("need at least two replicates per time point to estimate noise for " + where);
    }
    double mean = 0.0;
    for (double v : reps) mean += v;
    mean /= static_cast<double>(reps.size());
    double ss = 0.0;
    for (double v : reps) ss += (v - mean) * (v - mean);
    acc += ss / static_cast<double>(reps.size() - 1);
  }
  const double var = acc / static_cast<double>(s.replicates.size());
  if (!(var > 0.0)) throw DataError("estimated noise variance is zero for " + where);
  return var;
}

void estimate_missing_variances(Dataset& data) {
  for (auto& s : data.series) {
    if (!s.variance) s.variance = estimate_noise(s);
  }
}

Dataset select(const Dataset& data, const std::vector<Experiment>& experiments) {
  Dataset out;
  for (const auto& e : experiments) {
    for (const auto& s : e.series) {
      const ObservedSeries* src = data.find(e.factors.condition_id, s.observable);
      if (!src) {
        throw DataError("dataset has no observations of " + s.observable + " at " +
                                    e.factors.condition_id);
      }
      ObservedSeries picked{src->condition_id, src->observable, {}, {}, src->variance};
      for (double t : s.times) {
        auto it = std::find(src->times.begin(), src->times.end(), t);
        if (it == src->times.end()) {
          throw DataError("dataset has no observation of " + s.observable + " at " +
                                      e.factors.condition_id + ", t=" + std::to_string(t));
        }
        picked.times.push_back(t);
        picked.replicates.push_back(src->replicates[static_cast<std::size_t>(it - src->times.begin())]);
      }
      Dataset one;
      one.series.push_back(std::move(picked));
      out.merge(one);
    }
  }
  return out;
}

}  // namespace preddev
