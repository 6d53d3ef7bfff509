#include "quam/runner.hpp"

#include "quam/quantum.hpp"
#include "quam/simulation.hpp"

#include <atomic>
#include <chrono>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <iostream>
#include <mutex>
#include <thread>

namespace quam::runner {

namespace fs = std::filesystem;

fs::path resolve_out_dir(const std::string& explicit_out, const std::string& scenario_name) {
  if (!explicit_out.empty()) return explicit_out;
  if (const char* root = std::getenv(kOutRootEnv); root != nullptr && *root != '\0') {
    return fs::path(root) / scenario_name;
  }
  return fs::path("out") / scenario_name;
}

namespace {

struct Job {
  std::size_t cell = 0;
  std::string label;
  std::vector<std::pair<std::string, nlohmann::json>> assignment;
  nlohmann::json doc;
  std::uint64_t seed = 0;
  fs::path dir;
};

CellResult execute(const Job& job) {
  CellResult r;
  r.label = job.label;
  r.assignment = job.assignment;
  r.seed = job.seed;
  const auto start = std::chrono::steady_clock::now();
  try {
    auto doc = job.doc;
    doc["seed"] = job.seed;
    doc["seeds"] = 1;
    doc.erase("sweep");
    const auto cfg = scenario::from_json(doc);
    r.n_nodes = cfg.n_nodes;
    const auto log = sim::simulate(cfg);
    r.summary = metrics::summarize(log);
    metrics::write_run(job.dir, log, r.summary);
    r.wall_s = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    if (r.wall_s > cfg.time_budget_s) {
      std::fprintf(stderr, "warning: %s seed %llu took %.1f s (budget %.1f s)\n", job.label.c_str(),
                   static_cast<unsigned long long>(job.seed), r.wall_s, cfg.time_budget_s);
    }
    r.ok = true;
  } catch (const std::exception& e) {
    r.error = e.what();
  }
  return r;
}

std::string csv_value(const nlohmann::json& v) {
  if (v.is_string()) return v.get<std::string>();
  if (v.is_boolean()) return v.get<bool>() ? "true" : "false";
  if (v.is_number_float()) return metrics::format_double(v.get<double>());
  return v.dump();
}

int exit_for(const std::vector<CellResult>& results) {
  std::size_t failed = 0;
  for (const auto& r : results) {
    if (r.ok) continue;
    ++failed;
    std::fprintf(stderr, "failed: %s seed %llu: %s\n", r.label.c_str(), static_cast<unsigned long long>(r.seed),
                 r.error.c_str());
  }
  if (failed == 0) return kOk;
  return failed == results.size() ? kRuntimeFailure : kPartialFailure;
}

}  // namespace

std::vector<CellResult> run_cells(const scenario::ScenarioConfig& cfg, const fs::path& out_dir, int parallelism,
                                  bool flat_single) {
  std::vector<scenario::SweepCell> cells;
  if (cfg.sweep) {
    cells = scenario::expand_sweep(cfg);
  } else {
    cells.push_back({"base", {}, cfg.source});
  }
  std::vector<Job> jobs;
  for (std::size_t c = 0; c < cells.size(); ++c) {
    const auto base_seed = cells[c].doc.value("seed", cfg.seed);
    const int seeds = cells[c].doc.value("seeds", cfg.seeds);
    for (int k = 0; k < seeds; ++k) {
      Job j{c, cells[c].label, cells[c].assignment, cells[c].doc, base_seed + static_cast<std::uint64_t>(k), {}};
      fs::path dir = cfg.sweep ? out_dir / cells[c].label : out_dir;
      if (!(flat_single && !cfg.sweep && seeds == 1)) dir /= "seed-" + std::to_string(j.seed);
      j.dir = dir;
      jobs.push_back(std::move(j));
    }
  }

  std::vector<CellResult> results(jobs.size());
  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (std::size_t i = next++; i < jobs.size(); i = next++) results[i] = execute(jobs[i]);
  };
  const auto threads = static_cast<std::size_t>(std::max(1, parallelism));
  if (threads == 1 || jobs.size() == 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    for (std::size_t t = 0; t < std::min(threads, jobs.size()); ++t) pool.emplace_back(worker);
    for (auto& th : pool) th.join();
  }
  return results;
}

void write_sweep_summary(const fs::path& path, const std::vector<CellResult>& results) {
  std::vector<std::string> axes;
  for (const auto& r : results)
    for (const auto& [axis, value] : r.assignment)
      if (std::find(axes.begin(), axes.end(), axis) == axes.end()) axes.push_back(axis);

  std::vector<std::string> keys;
  for (const auto& r : results) {
    if (!r.ok) continue;
    const auto j = nlohmann::ordered_json::parse(metrics::summary_json(r.summary));
    for (const auto& item : j.items()) {
      if (item.key().rfind("shed_fraction_", 0) == 0) continue;  // width varies with n_nodes
      keys.push_back(item.key());
    }
    break;
  }

  if (!path.parent_path().empty()) fs::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  if (!out) throw metrics::IoError("cannot write " + path.string());
  out << "cell";
  for (const auto& a : axes) out << ',' << a;
  out << ",seed,n_nodes,status";
  for (const auto& k : keys) out << ',' << k;
  out << '\n';
  for (const auto& r : results) {
    out << r.label;
    for (const auto& a : axes) {
      out << ',';
      for (const auto& [axis, value] : r.assignment)
        if (axis == a) out << csv_value(value);
    }
    out << ',' << r.seed << ',' << r.n_nodes << ',' << (r.ok ? "ok" : "failed");
    const auto j = r.ok ? nlohmann::ordered_json::parse(metrics::summary_json(r.summary)) : nlohmann::ordered_json{};
    for (const auto& k : keys) {
      out << ',';
      if (j.contains(k)) out << csv_value(j[k]);
    }
    out << '\n';
  }
  if (!out) throw metrics::IoError("write failed for " + path.string());
}

int run_experiment(const scenario::ScenarioConfig& cfg, const fs::path& out_dir, int parallelism) {
  try {
    auto results = run_cells(cfg, out_dir, parallelism, true);
    if (results.size() > 1) write_sweep_summary(out_dir / "sweep_summary.csv", results);
    return exit_for(results) == kOk ? kOk : kRuntimeFailure;
  } catch (const scenario::ValidationError& e) {
    std::fprintf(stderr, "validation error at %s: %s\n", e.key_path().c_str(), e.what());
    return kValidationFailure;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return kRuntimeFailure;
  }
}

int run_sweep(const scenario::ScenarioConfig& cfg, const fs::path& out_dir, int parallelism) {
  try {
    auto results = run_cells(cfg, out_dir, parallelism, false);
    write_sweep_summary(out_dir / "sweep_summary.csv", results);
    return exit_for(results);
  } catch (const scenario::ValidationError& e) {
    std::fprintf(stderr, "validation error at %s: %s\n", e.key_path().c_str(), e.what());
    return kValidationFailure;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return kRuntimeFailure;
  }
}

int run_analytic(const scenario::ScenarioConfig& cfg, const fs::path& out_dir) {
  const auto& a = cfg.analytic;
  try {
    fs::create_directories(out_dir);
    const auto path = out_dir / ("analytic_" + a.curve + ".csv");
    std::ofstream out(path, std::ios::binary);
    if (!out) throw metrics::IoError("cannot write " + path.string());
    using metrics::format_double;
    const int points = std::max(2, a.points);
    if (a.curve == "swap") {
      out << "q_hop,hops,qber_e2e,key_rate_factor\n";
      for (double q : a.qber_values)
        for (int h = 1; h <= a.max_hops; ++h)
          out << format_double(q) << ',' << h << ',' << format_double(quantum::swap_chain_qber(q, h)) << ','
              << format_double(quantum::key_rate_factor(q, h)) << '\n';
    } else if (a.curve == "distillation") {
      out << "fidelity_in,fidelity_out,success_probability,yield\n";
      for (int i = 0; i < points; ++i) {
        const double f = 0.5 + 0.5 * (i + 1) / points;  // (0.5, 1]
        const auto d = quantum::distill_bbpssw(f);
        out << format_double(f) << ',' << format_double(d.fidelity) << ',' << format_double(d.success_probability)
            << ',' << format_double(d.yield()) << '\n';
      }
    } else {
      out << "qber,binary_entropy,secret_key_fraction\n";
      for (int i = 0; i < points; ++i) {
        const double q = 0.15 * i / (points - 1);
        out << format_double(q) << ',' << format_double(quantum::binary_entropy(q)) << ','
            << format_double(quantum::secret_key_fraction(q)) << '\n';
      }
    }
    if (!out) throw metrics::IoError("write failed for " + path.string());
    return kOk;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return kRuntimeFailure;
  }
}

}  // namespace quam::runner
