#include "beamtune/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <set>

namespace beamtune::metrics {

namespace {

double median_of(std::vector<double> v) {
  if (v.empty()) return 0.0;
  std::sort(v.begin(), v.end());
  const std::size_t n = v.size();
  return n % 2 == 1 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

double quantile(std::vector<double> v, double q) {
  if (v.empty()) return 0.0;
  std::sort(v.begin(), v.end());
  const double pos = q * static_cast<double>(v.size() - 1);
  const auto lo = static_cast<std::size_t>(std::floor(pos));
  const auto hi = static_cast<std::size_t>(std::ceil(pos));
  return v[lo] + (pos - static_cast<double>(lo)) * (v[hi] - v[lo]);
}

}  // namespace

std::optional<int> steps_to_target(std::span<const double> mae_um, double epsilon_um) {
  for (std::size_t t = 0; t < mae_um.size(); ++t) {
    if (mae_um[t] < epsilon_um) return static_cast<int>(t);
  }
  return std::nullopt;
}

std::optional<int> steps_to_target(const RunRecord& record, double epsilon_um) {
  const auto trace = record.mae_trace_um();
  return steps_to_target(trace, epsilon_um);
}

std::optional<int> steps_to_convergence(std::span<const double> best, double epsilon_um) {
  const std::size_t n = best.size();
  if (n == 0) return std::nullopt;
  // suffix_min[t] = min over t' > t
  std::vector<double> suffix_min(n, best[n - 1]);
  for (std::size_t t = n - 1; t-- > 0;) suffix_min[t] = std::min(best[t + 1], suffix_min[t + 1]);
  for (std::size_t t = 0; t + 1 < n; ++t) {
    if (best[t] - suffix_min[t] < epsilon_um) return static_cast<int>(t);
  }
  return std::nullopt;
}

std::optional<int> steps_to_convergence(const RunRecord& record, double epsilon_um) {
  std::vector<double> best = record.best_mae_trace_um();
  if (record.returned_to_best && !best.empty()) best.pop_back();
  return steps_to_convergence(best, epsilon_um);
}

Summary summarize(std::span<const double> values) {
  Summary s;
  s.count = values.size();
  if (values.empty()) return s;
  double sum = 0.0;
  for (double v : values) sum += v;
  s.mean = sum / static_cast<double>(values.size());
  double ss = 0.0;
  for (double v : values) ss += (v - s.mean) * (v - s.mean);
  s.stddev = std::sqrt(ss / static_cast<double>(values.size()));
  s.median = median_of({values.begin(), values.end()});
  return s;
}

MetricsRow compute_row(const std::string& optimizer, std::span<const RunRecord> records) {
  MetricsRow row;
  row.optimizer = optimizer;
  row.trials = records.size();
  std::vector<double> finals, targets, convs;
  for (const RunRecord& r : records) {
    finals.push_back(r.final_mae_um());
    if (auto t = steps_to_target(r)) targets.push_back(*t);
    if (auto c = steps_to_convergence(r)) convs.push_back(*c);
  }
  row.final_mae_um = summarize(finals);
  row.steps_to_target = summarize(targets);
  row.steps_to_convergence = summarize(convs);
  if (!records.empty()) {
    const double n = static_cast<double>(records.size());
    row.target_success_rate = static_cast<double>(targets.size()) / n;
    row.convergence_success_rate = static_cast<double>(convs.size()) / n;
  }
  return row;
}

double win_rate(std::span<const RunRecord> a, std::span<const RunRecord> b) {
  std::map<int, double> other;
  for (const RunRecord& r : b) other[r.trial_id] = r.final_mae_um();
  std::size_t shared = 0, wins = 0;
  for (const RunRecord& r : a) {
    auto it = other.find(r.trial_id);
    if (it == other.end()) continue;
    ++shared;
    if (r.final_mae_um() < it->second) ++wins;
  }
  return shared == 0 ? 0.0 : static_cast<double>(wins) / static_cast<double>(shared);
}

std::vector<LatencySummary> timing_report(std::span<const RunRecord> records) {
  std::vector<LatencySummary> out;
  std::set<std::string> ids;
  for (const RunRecord& r : records) ids.insert(r.optimizer);
  for (const std::string& id : ids) {
    LatencySummary s;
    s.optimizer = id;
    std::vector<double> all;
    std::map<int, std::vector<double>> by_step;
    for (const RunRecord& r : records) {
      if (r.optimizer != id) continue;
      for (const StepRecord& st : r.steps) {
        if (!st.latency_s) continue;
        all.push_back(*st.latency_s);
        by_step[st.step].push_back(*st.latency_s);
      }
    }
    s.samples = all.size();
    if (!all.empty()) {
      double sum = 0.0;
      for (double v : all) sum += v;
      s.mean_s = sum / static_cast<double>(all.size());
      s.p50_s = quantile(all, 0.5);
      s.p90_s = quantile(all, 0.9);
      s.p99_s = quantile(all, 0.99);
    }
    for (auto& [step, v] : by_step) s.median_by_step[step] = median_of(v);
    if (s.median_by_step.size() >= 2) {
      double mx = 0.0, my = 0.0;
      for (const auto& [step, m] : s.median_by_step) {
        mx += step;
        my += m;
      }
      const double n = static_cast<double>(s.median_by_step.size());
      mx /= n;
      my /= n;
      double sxy = 0.0, sxx = 0.0;
      for (const auto& [step, m] : s.median_by_step) {
        sxy += (step - mx) * (m - my);
        sxx += (step - mx) * (step - mx);
      }
      s.slope_s_per_step = sxx > 0.0 ? sxy / sxx : 0.0;
    }
    out.push_back(std::move(s));
  }
  return out;
}

}  // namespace beamtune::metrics
