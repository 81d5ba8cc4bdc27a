#include "beamtune/benchmark.hpp"

#include "beamtune/errors.hpp"
#include "beamtune/json_io.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <map>
#include <mutex>
#include <set>
#include <sstream>
#include <thread>

#include <json.hpp>

namespace beamtune::bench {

using nlohmann::json;

void OptimizerSpec::validate() const {
  const auto ids = optimizer_ids();
  if (std::find(ids.begin(), ids.end(), id) == ids.end()) {
    throw ConfigError("unknown optimizer '" + id + "'");
  }
  if (id == "policy") {
    if (!policy) throw ConfigError("optimizer 'policy' needs a weights file (--policy-weights PATH)");
    policy->validate();
  }
}

std::vector<std::string> optimizer_ids() { return {"bo", "simplex", "random", "policy"}; }

std::uint64_t trial_seed(std::uint64_t suite_seed, int trial_id, const std::string& optimizer) {
  return derive_seed({suite_seed, static_cast<std::uint64_t>(trial_id), hash_name(optimizer)});
}

RunRecord run_optimizer(const OptimizerSpec& spec, const env::Trial& trial,
                        const env::ScenarioConfig& scenario, const optics::Lattice& lattice,
                        int budget, std::uint64_t suite_seed) {
  spec.validate();
  const std::uint64_t seed = trial_seed(suite_seed, trial.id, spec.id);
  env::Environment environment(lattice);
  environment.reset(trial, scenario);
  if (spec.id == "bo") {
    bo::BOConfig c = spec.bo;
    c.budget = budget;
    c.seed = seed;
    return bo::run_bo(environment, c);
  }
  if (spec.id == "simplex") {
    baselines::SimplexConfig c = spec.simplex;
    c.budget = budget;
    c.seed = seed;
    return baselines::run_nelder_mead(environment, c);
  }
  if (spec.id == "random") {
    baselines::RandomSearchConfig c = spec.random;
    c.budget = budget;
    c.seed = seed;
    return baselines::run_random_search(environment, c);
  }
  return policy::run_policy(environment, *spec.policy, budget);
}

// ---- suites ----------------------------------------------------------------

std::vector<RunRecord> SuiteResult::records_for(const std::string& optimizer) const {
  std::vector<RunRecord> out;
  for (const RunRecord& r : records) {
    if (r.optimizer == optimizer) out.push_back(r);
  }
  return out;
}

const metrics::MetricsRow* SuiteResult::row(const std::string& optimizer) const {
  for (const auto& r : rows) {
    if (r.optimizer == optimizer) return &r;
  }
  return nullptr;
}

void SuiteResult::recompute() {
  rows.clear();
  win_rates.clear();
  std::map<std::string, std::vector<RunRecord>> by_id;
  for (const std::string& id : optimizers) by_id[id] = records_for(id);
  for (const std::string& id : optimizers) rows.push_back(metrics::compute_row(id, by_id[id]));
  for (const std::string& a : optimizers) {
    for (const std::string& b : optimizers) {
      if (a == b) continue;
      win_rates.push_back({a, b, metrics::win_rate(by_id[a], by_id[b])});
    }
  }
}

namespace {

void check_unique(const std::vector<OptimizerSpec>& optimizers) {
  std::set<std::string> seen;
  for (const auto& o : optimizers) {
    o.validate();
    if (!seen.insert(o.id).second) throw ConfigError("optimizer '" + o.id + "' listed twice");
  }
}

}  // namespace

SuiteResult run_suite(const std::vector<OptimizerSpec>& optimizers,
                      const env::ScenarioConfig& scenario, const std::vector<env::Trial>& trials,
                      const optics::Lattice& lattice, const SuiteOptions& options) {
  check_unique(optimizers);
  scenario.validate();
  if (options.budget < 1) throw ConfigError("budget must be positive");
  if (options.jobs < 1) throw ConfigError("jobs must be positive");

  std::vector<env::Trial> sorted = trials;
  std::sort(sorted.begin(), sorted.end(),
            [](const env::Trial& a, const env::Trial& b) { return a.id < b.id; });

  const std::size_t n_jobs = optimizers.size() * sorted.size();
  std::vector<std::optional<RunRecord>> results(n_jobs);
  std::vector<std::optional<std::string>> errors(n_jobs);
  std::atomic<std::size_t> next{0};

  auto worker = [&] {
    for (std::size_t j = next++; j < n_jobs; j = next++) {
      const OptimizerSpec& spec = optimizers[j / sorted.size()];
      const env::Trial& trial = sorted[j % sorted.size()];
      try {
        results[j] = run_optimizer(spec, trial, scenario, lattice, options.budget, options.seed);
      } catch (const std::exception& e) {
        errors[j] = e.what();
      }
    }
  };
  const int n_threads = std::min<int>(options.jobs, static_cast<int>(std::max<std::size_t>(n_jobs, 1)));
  if (n_threads <= 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    for (int i = 0; i < n_threads; ++i) pool.emplace_back(worker);
    for (auto& t : pool) t.join();
  }

  SuiteResult suite;
  suite.label = scenario.name;
  suite.table = "suite";
  suite.scenario = scenario.name;
  suite.budget = options.budget;
  for (const auto& o : optimizers) suite.optimizers.push_back(o.id);
  for (std::size_t j = 0; j < n_jobs; ++j) {
    if (results[j]) {
      suite.records.push_back(std::move(*results[j]));
    } else {
      suite.failures.push_back(
          {sorted[j % sorted.size()].id, optimizers[j / sorted.size()].id, *errors[j]});
    }
  }
  suite.recompute();
  return suite;
}

std::vector<StudyColumn> study_columns() {
  return {{"normal", "sim-infinite"},
          {"drift-instant", "drift-instant"},
          {"drift-continuous", "drift-continuous"},
          {"failure-before", "failure-before"},
          {"failure-during", "failure-during"}};
}

std::vector<SuiteResult> run_scenario_studies(const std::vector<OptimizerSpec>& optimizers,
                                              const std::vector<env::Trial>& trials,
                                              const optics::Lattice& lattice,
                                              SuiteOptions options) {
  options.budget = kStudyBudget;
  std::vector<SuiteResult> out;
  for (const StudyColumn& col : study_columns()) {
    SuiteResult s = run_suite(optimizers, env::ScenarioConfig::named(col.scenario), trials,
                              lattice, options);
    s.label = "table2-" + col.column;
    s.table = "table2";
    out.push_back(std::move(s));
  }
  return out;
}

std::vector<std::string> table1_scenarios() {
  return {"sim-infinite", "sim-finite", "sim-finite-aligned"};
}

std::vector<SuiteResult> run_table1(const std::vector<OptimizerSpec>& optimizers,
                                    const std::vector<env::Trial>& trials,
                                    const optics::Lattice& lattice, const SuiteOptions& options) {
  std::vector<SuiteResult> out;
  for (const std::string& name : table1_scenarios()) {
    SuiteResult s = run_suite(optimizers, env::ScenarioConfig::named(name), trials, lattice, options);
    s.label = "table1-" + name;
    s.table = "table1";
    out.push_back(std::move(s));
  }
  return out;
}

// ---- grid scan -------------------------------------------------------------

void GridSpec::validate() const {
  if (size() == 0) throw ConfigError("grid needs at least one value per axis");
  for (const auto* axis : {&mu_x, &mu_y}) {
    for (double v : *axis) {
      if (!std::isfinite(v)) throw ConfigError("grid mu must be finite");
    }
  }
  for (const auto* axis : {&sigma_x, &sigma_y}) {
    for (double v : *axis) {
      if (!(v > 0.0) || !std::isfinite(v)) throw ConfigError("grid sigma must be positive");
    }
  }
}

GridSpec GridSpec::regular(int n_mu, double mu_max, int n_sigma, double sigma_min, double sigma_max) {
  if (n_mu < 1 || n_sigma < 1) throw ConfigError("grid axes need at least one point");
  auto axis = [](int n, double lo, double hi) {
    std::vector<double> v;
    for (int i = 0; i < n; ++i) v.push_back(n == 1 ? 0.5 * (lo + hi) : lo + (hi - lo) * i / (n - 1));
    return v;
  };
  GridSpec g;
  g.mu_x = g.mu_y = axis(n_mu, -mu_max, mu_max);
  g.sigma_x = g.sigma_y = axis(n_sigma, sigma_min, sigma_max);
  g.validate();
  return g;
}

GridResult target_grid_scan(const OptimizerSpec& optimizer, const env::Trial& trial,
                            const GridSpec& grid, const env::ScenarioConfig& scenario,
                            const optics::Lattice& lattice, const SuiteOptions& options) {
  grid.validate();
  optimizer.validate();
  std::vector<env::Trial> cells;
  for (double mx : grid.mu_x) {
    for (double my : grid.mu_y) {
      for (double sx : grid.sigma_x) {
        for (double sy : grid.sigma_y) {
          env::Trial t = trial;
          t.id = static_cast<int>(cells.size());
          t.target = {mx, sx, my, sy};
          cells.push_back(t);
        }
      }
    }
  }
  // Every cell keeps the base trial's seed stream so a one-point grid
  // matches a single run of that trial.
  GridResult out;
  out.optimizer = optimizer.id;
  out.trial_id = trial.id;
  out.cells.resize(cells.size());
  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (std::size_t j = next++; j < cells.size(); j = next++) {
      out.cells[j].target = cells[j].target;
      env::Trial t = cells[j];
      t.id = trial.id;
      try {
        out.cells[j].final_mae_um =
            run_optimizer(optimizer, t, scenario, lattice, options.budget, options.seed).final_mae_um();
      } catch (const std::exception& e) {
        out.cells[j].error = e.what();
      }
    }
  };
  const int n_threads = std::max(1, std::min<int>(options.jobs, static_cast<int>(cells.size())));
  if (n_threads == 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    for (int i = 0; i < n_threads; ++i) pool.emplace_back(worker);
    for (auto& t : pool) t.join();
  }
  return out;
}

// ---- reports ---------------------------------------------------------------

bool Report::has_failures() const {
  for (const auto& s : suites) {
    if (!s.failures.empty()) return true;
  }
  for (const auto& g : grids) {
    for (const auto& c : g.cells) {
      if (c.error) return true;
    }
  }
  return false;
}

const SuiteResult* Report::suite(const std::string& label) const {
  for (const auto& s : suites) {
    if (s.label == label) return &s;
  }
  return nullptr;
}

namespace {

json summary_json(const metrics::Summary& s) {
  return {{"median", s.median}, {"mean", s.mean}, {"std", s.stddev}, {"count", s.count}};
}

json row_json(const metrics::MetricsRow& r) {
  return {{"optimizer", r.optimizer},
          {"trials", r.trials},
          {"final_mae_um", summary_json(r.final_mae_um)},
          {"steps_to_target", summary_json(r.steps_to_target)},
          {"target_success_rate", r.target_success_rate},
          {"steps_to_convergence", summary_json(r.steps_to_convergence)},
          {"convergence_success_rate", r.convergence_success_rate}};
}

std::string records_file(const SuiteResult& s) { return "records/" + s.label + ".jsonl"; }

std::string fmt(double v) {
  std::ostringstream os;
  os << std::setprecision(6) << v;
  return os.str();
}

void write_text(const std::filesystem::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << text;
  if (!out) throw std::runtime_error("write failed: " + path.string());
}

}  // namespace

std::string format_report_json(const Report& report) {
  json suites = json::array();
  for (const auto& s : report.suites) {
    json rows = json::array();
    for (const auto& r : s.rows) rows.push_back(row_json(r));
    json wins = json::array();
    for (const auto& w : s.win_rates) wins.push_back({{"a", w.a}, {"b", w.b}, {"rate", w.rate}});
    json failures = json::array();
    for (const auto& f : s.failures) {
      failures.push_back({{"trial_id", f.trial_id}, {"optimizer", f.optimizer}, {"message", f.message}});
    }
    suites.push_back({{"label", s.label},
                      {"table", s.table},
                      {"scenario", s.scenario},
                      {"budget", s.budget},
                      {"optimizers", s.optimizers},
                      {"records", records_file(s)},
                      {"rows", rows},
                      {"win_rates", wins},
                      {"failures", failures}});
  }
  json grids = json::array();
  for (const auto& g : report.grids) {
    json cells = json::array();
    for (const auto& c : g.cells) {
      json cell = {{"target", json_io::to_json(c.target)}, {"final_mae_um", c.final_mae_um}};
      if (c.error) cell["error"] = *c.error;
      cells.push_back(cell);
    }
    grids.push_back({{"optimizer", g.optimizer}, {"trial_id", g.trial_id}, {"cells", cells}});
  }
  const json root = {{"format", "beamtune-report"},
                     {"version", 1},
                     {"seed", report.seed},
                     {"suites", suites},
                     {"grids", grids}};
  return root.dump(1) + "\n";
}

std::string format_tables_csv(const Report& report) {
  std::ostringstream os;
  os << "table,suite,scenario,optimizer,trials,final_mae_median_um,final_mae_mean_um,"
        "final_mae_std_um,steps_to_target_median,steps_to_target_mean,steps_to_target_std,"
        "target_success_rate,steps_to_convergence_median,steps_to_convergence_mean,"
        "steps_to_convergence_std,convergence_success_rate\n";
  for (const auto& s : report.suites) {
    for (const auto& r : s.rows) {
      os << s.table << ',' << s.label << ',' << s.scenario << ',' << r.optimizer << ',' << r.trials
         << ',' << fmt(r.final_mae_um.median) << ',' << fmt(r.final_mae_um.mean) << ','
         << fmt(r.final_mae_um.stddev) << ',' << fmt(r.steps_to_target.median) << ','
         << fmt(r.steps_to_target.mean) << ',' << fmt(r.steps_to_target.stddev) << ','
         << fmt(r.target_success_rate) << ',' << fmt(r.steps_to_convergence.median) << ','
         << fmt(r.steps_to_convergence.mean) << ',' << fmt(r.steps_to_convergence.stddev) << ','
         << fmt(r.convergence_success_rate) << '\n';
    }
  }
  return os.str();
}

std::string format_summary_md(const Report& report) {
  std::ostringstream os;
  os << "# Benchmark summary\n\nSuite seed: " << report.seed << "\n";
  for (const auto& s : report.suites) {
    if (s.table == "table2") continue;
    os << "\n## " << s.label << " (" << s.scenario << ", " << s.budget << " steps)\n\n";
    os << "| Optimizer | Trials | Final MAE median (um) | Final MAE mean +- std (um) "
          "| Steps to target median | Target success | Steps to convergence median "
          "| Convergence success |\n";
    os << "|---|---|---|---|---|---|---|---|\n";
    for (const auto& r : s.rows) {
      os << "| " << r.optimizer << " | " << r.trials << " | " << fmt(r.final_mae_um.median)
         << " | " << fmt(r.final_mae_um.mean) << " +- " << fmt(r.final_mae_um.stddev) << " | "
         << (r.steps_to_target.count ? fmt(r.steps_to_target.median) : "-") << " | "
         << fmt(100.0 * r.target_success_rate) << "% | "
         << (r.steps_to_convergence.count ? fmt(r.steps_to_convergence.median) : "-") << " | "
         << fmt(100.0 * r.convergence_success_rate) << "% |\n";
    }
    if (!s.win_rates.empty()) {
      os << "\nWin rates (row beats column):\n\n";
      for (const auto& w : s.win_rates) {
        os << "- " << w.a << " vs " << w.b << ": " << fmt(100.0 * w.rate) << "%\n";
      }
    }
    if (!s.failures.empty()) os << "\nFailed runs: " << s.failures.size() << "\n";
  }

  std::vector<const SuiteResult*> study;
  for (const auto& s : report.suites) {
    if (s.table == "table2") study.push_back(&s);
  }
  if (!study.empty()) {
    os << "\n## Scenario study: mean final MAE (um), " << study.front()->budget << " steps\n\n";
    os << "| Optimizer |";
    for (const auto* s : study) os << ' ' << s->label.substr(7) << " |";
    os << "\n|---|";
    for (std::size_t i = 0; i < study.size(); ++i) os << "---|";
    os << '\n';
    for (const std::string& id : study.front()->optimizers) {
      os << "| " << id << " |";
      for (const auto* s : study) {
        const auto* r = s->row(id);
        os << ' ' << (r ? fmt(r->final_mae_um.mean) : std::string("-")) << " |";
      }
      os << '\n';
    }
  }

  for (const auto& g : report.grids) {
    std::vector<double> v;
    for (const auto& c : g.cells) {
      if (!c.error) v.push_back(c.final_mae_um);
    }
    const auto s = metrics::summarize(v);
    os << "\n## Target grid scan (" << g.optimizer << ", trial " << g.trial_id << ")\n\n"
       << "Cells: " << g.cells.size() << ", median final MAE " << fmt(s.median) << " um, max "
       << fmt(v.empty() ? 0.0 : *std::max_element(v.begin(), v.end())) << " um\n";
  }
  return os.str();
}

std::vector<double> median_best_mae_curve(const std::vector<RunRecord>& records, int budget) {
  std::vector<double> curve;
  if (records.empty() || budget < 1) return curve;
  std::vector<std::vector<double>> traces;
  for (const RunRecord& r : records) {
    std::vector<double> best = r.best_mae_trace_um();
    if (r.returned_to_best && !best.empty()) best.pop_back();
    if (best.empty()) best.push_back(r.initial.mae_um);
    best.resize(static_cast<std::size_t>(budget), best.back());
    traces.push_back(std::move(best));
  }
  for (int t = 0; t < budget; ++t) {
    std::vector<double> col;
    for (const auto& tr : traces) col.push_back(tr[static_cast<std::size_t>(t)]);
    curve.push_back(metrics::summarize(col).median);
  }
  return curve;
}

std::string format_best_mae_svg(const SuiteResult& suite) {
  constexpr double W = 640, H = 400, L = 60, R = 120, T = 30, B = 40;
  static const char* colors[] = {"#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e"};
  std::vector<std::pair<std::string, std::vector<double>>> curves;
  double lo = 1e300, hi = 0.0;
  for (const std::string& id : suite.optimizers) {
    auto c = median_best_mae_curve(suite.records_for(id), suite.budget);
    for (double v : c) {
      lo = std::min(lo, std::max(v, 1e-3));
      hi = std::max(hi, v);
    }
    curves.emplace_back(id, std::move(c));
  }
  if (hi <= 0.0) {
    lo = 1.0;
    hi = 10.0;
  }
  const double ylo = std::floor(std::log10(lo)), yhi = std::max(std::ceil(std::log10(hi)), ylo + 1);
  auto px = [&](int t) { return L + (W - L - R) * (suite.budget > 1 ? double(t) / (suite.budget - 1) : 0.0); };
  auto py = [&](double v) {
    return T + (H - T - B) * (1.0 - (std::log10(std::max(v, 1e-3)) - ylo) / (yhi - ylo));
  };
  std::ostringstream os;
  os << std::fixed << std::setprecision(2);
  os << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << W << "\" height=\"" << H << "\">\n";
  os << "<title>" << suite.label << ": median best MAE vs step</title>\n";
  os << "<rect x=\"" << L << "\" y=\"" << T << "\" width=\"" << W - L - R << "\" height=\"" << H - T - B
     << "\" fill=\"none\" stroke=\"black\"/>\n";
  for (double d = ylo; d <= yhi; d += 1.0) {
    os << "<text x=\"" << L - 6 << "\" y=\"" << py(std::pow(10.0, d)) + 4
       << "\" font-size=\"11\" text-anchor=\"end\">1e" << static_cast<int>(d) << "</text>\n";
  }
  os << "<text x=\"" << (W - R + L) / 2 << "\" y=\"" << H - 8
     << "\" font-size=\"12\" text-anchor=\"middle\">step</text>\n";
  os << "<text x=\"14\" y=\"" << (H - B + T) / 2 << "\" font-size=\"12\" transform=\"rotate(-90 14 "
     << (H - B + T) / 2 << ")\" text-anchor=\"middle\">best MAE (um)</text>\n";
  for (std::size_t i = 0; i < curves.size(); ++i) {
    const auto& [id, c] = curves[i];
    const char* color = colors[i % 5];
    os << "<polyline data-optimizer=\"" << id << "\" data-points=\"" << c.size()
       << "\" fill=\"none\" stroke=\"" << color << "\" points=\"";
    for (std::size_t t = 0; t < c.size(); ++t) {
      os << (t ? " " : "") << px(static_cast<int>(t)) << ',' << py(c[t]);
    }
    os << "\"/>\n";
    os << "<text x=\"" << W - R + 8 << "\" y=\"" << T + 16 * (i + 1) << "\" font-size=\"12\" fill=\""
       << color << "\">" << id << "</text>\n";
  }
  os << "</svg>\n";
  return os.str();
}

std::string format_timing_json(const Report& report) {
  json suites = json::array();
  for (const auto& s : report.suites) {
    json entries = json::array();
    for (const auto& t : metrics::timing_report(s.records)) {
      json by_step = json::object();
      for (const auto& [step, m] : t.median_by_step) by_step[std::to_string(step)] = m;
      entries.push_back({{"optimizer", t.optimizer},
                         {"samples", t.samples},
                         {"mean_s", t.mean_s},
                         {"p50_s", t.p50_s},
                         {"p90_s", t.p90_s},
                         {"p99_s", t.p99_s},
                         {"slope_s_per_step", t.slope_s_per_step},
                         {"median_by_step", by_step}});
    }
    suites.push_back({{"label", s.label}, {"optimizers", entries}});
  }
  return json{{"format", "beamtune-timing"}, {"version", 1}, {"suites", suites}}.dump(1) + "\n";
}

void write_report(const Report& report, const std::filesystem::path& dir) {
  namespace fs = std::filesystem;
  fs::create_directories(dir / "records");
  for (const auto& s : report.suites) {
    std::ostringstream os;
    for (const auto& r : s.records) write_jsonl(os, r);
    write_text(dir / records_file(s), os.str());
    write_text(dir / ("best_mae_" + s.label + ".svg"), format_best_mae_svg(s));
  }
  write_text(dir / "tables.csv", format_tables_csv(report));
  write_text(dir / "summary.md", format_summary_md(report));
  write_text(dir / "timing.json", format_timing_json(report));
  write_text(dir / "report.json", format_report_json(report));
}

Report load_report(const std::filesystem::path& report_json) {
  std::ifstream in(report_json);
  if (!in) throw ConfigError("cannot open report " + report_json.string());
  json root;
  try {
    root = json::parse(in);
  } catch (const json::exception& e) {
    throw ConfigError("invalid report " + report_json.string() + ": " + e.what());
  }
  if (root.value("format", "") != "beamtune-report" || root.value("version", 0) != 1) {
    throw ConfigError("not a beamtune-report v1 file: " + report_json.string());
  }
  Report report;
  try {
    report.seed = root.at("seed").get<std::uint64_t>();
    const auto base = report_json.parent_path();
    for (const auto& js : root.at("suites")) {
      SuiteResult s;
      s.label = js.at("label").get<std::string>();
      s.table = js.at("table").get<std::string>();
      s.scenario = js.at("scenario").get<std::string>();
      s.budget = js.at("budget").get<int>();
      s.optimizers = js.at("optimizers").get<std::vector<std::string>>();
      for (const auto& f : js.at("failures")) {
        s.failures.push_back({f.at("trial_id").get<int>(), f.at("optimizer").get<std::string>(),
                              f.at("message").get<std::string>()});
      }
      const auto path = base / js.at("records").get<std::string>();
      std::ifstream rin(path);
      if (!rin) throw ConfigError("missing record file " + path.string());
      s.records = read_jsonl(rin);
      s.recompute();
      report.suites.push_back(std::move(s));
    }
    for (const auto& jg : root.at("grids")) {
      GridResult g;
      g.optimizer = jg.at("optimizer").get<std::string>();
      g.trial_id = jg.at("trial_id").get<int>();
      for (const auto& jc : jg.at("cells")) {
        GridCell c;
        c.target = json_io::beam_from_json(jc.at("target"));
        c.final_mae_um = jc.at("final_mae_um").get<double>();
        if (jc.contains("error")) c.error = jc.at("error").get<std::string>();
        g.cells.push_back(c);
      }
      report.grids.push_back(std::move(g));
    }
  } catch (const json::exception& e) {
    throw ConfigError("invalid report " + report_json.string() + ": " + e.what());
  }
  return report;
}

}  // namespace beamtune::bench
