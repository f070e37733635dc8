#pragma once

// Command implementations for bethe_cli. Each command writes line-delimited
// JSON records to `out`; errors go to `err` as a single JSON record.
// Exit codes: 0 ok, 1 verdict violation, 2 input error, 3 capacity.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <ostream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "bethe/bethe.hpp"
#include "bethe/fuzz.hpp"

namespace bethe::cli {

enum Exit : int { kOk = 0, kViolation = 1, kInputError = 2, kCapacity = 3 };

namespace detail {

inline void emit(std::ostream& out, const Json& record) { out << record.dump() << '\n'; }

inline std::string hex64(std::uint64_t v) {
  char buf[20];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(v));
  return buf;
}

inline Json witness_json(const LatticeWitness& w) {
  if (w.holds) return nullptr;
  Json x = Json::array();
  for (const auto& a : w.witness) x.push_back(a.to_string());
  Json j{{"assignments", x}, {"lhs", w.lhs}, {"rhs", w.rhs}};
  if (w.factor) j["factor"] = *w.factor;
  return j;
}

inline Json summary_counts(const FuzzSummary& s) {
  Json j = Json::object();
  for (const auto& [name, count] : s.check_counts) j[name] = count;
  return j;
}

struct Common {
  std::uint64_t seed = 0;
  std::size_t restarts = 20;
  double tol = 1e-9;
};

inline BetheOptimum optimize(const FactorGraph& g, const Common& c) {
  OptimizeOptions opts;
  opts.restarts = c.restarts;
  opts.seed = c.seed;
  return optimize_bethe(g, opts);
}

// ---- commands ----------------------------------------------------------------

inline int cmd_check(const std::string& path, std::ostream& out) {
  const FactorGraph g = load_model(path);
  const auto lsm = is_log_supermodular_factorization(g);
  const double log_z = partition_function(g);
  Json rec{{"command", "check"},
           {"model", path},
           {"n", g.num_variables()},
           {"factors", g.num_factors()},
           {"log_supermodular", lsm.holds},
           {"witness", witness_json(lsm)},
           {"log_z", log_z},
           {"z", std::exp(log_z)}};
  int code = kOk;
  if (log_z == kNegInf) {
    rec["marginals"] = nullptr;
    rec["polytope_valid"] = nullptr;
    rec["note"] = "Z = 0; marginals undefined";
  } else {
    const auto tau = exact_marginals(g);
    const auto report = validate_polytope(tau, g);
    rec["marginals"] = tau_to_json(tau);
    rec["polytope_valid"] = report.valid;
    if (!report.valid) {
      rec["polytope_violation"] = report.violation;
      code = kViolation;
    }
  }
  emit(out, rec);
  return code;
}

inline int cmd_bethe(const std::string& path, const Common& c, std::ostream& out) {
  const FactorGraph g = load_model(path);
  const bool lsm = is_log_supermodular_factorization(g).holds;
  const double log_z = partition_function(g);
  const auto opt = optimize(g, c);
  const bool verdict = opt.log_z_bethe_lower <= log_z + c.tol;
  emit(out, Json{{"command", "bethe"},
                 {"model", path},
                 {"log_z_bethe_lower", opt.log_z_bethe_lower},
                 {"log_z", log_z},
                 {"gap", log_z - opt.log_z_bethe_lower},
                 {"tol", c.tol},
                 {"log_supermodular", lsm},
                 {"verdict", verdict},
                 {"verdict_binding", lsm},
                 {"bp_runs", opt.bp_runs},
                 {"bp_converged", opt.bp_converged},
                 {"best_effort", opt.best_effort},
                 {"seed", c.seed},
                 {"restarts", c.restarts}});
  return (verdict || !lsm) ? kOk : kViolation;
}

struct CoversArgs {
  std::size_t k = 2;
  std::uint64_t samples = 100;
  bool exhaustive = false;
  std::string csv;
};

inline int cmd_covers(const std::string& path, const CoversArgs& a, const Common& c,
                      std::ostream& out) {
  const FactorGraph g = load_model(path);
  const bool lsm = is_log_supermodular_factorization(g).holds;
  const double log_z = partition_function(g);
  const auto sweep = cover_sweep(g, a.k, a.samples, c.seed,
                                 a.exhaustive ? CoverAverage::exhaustive
                                              : CoverAverage::automatic);
  const auto est = summarize_sweep(sweep);
  const double k_log_z = static_cast<double>(a.k) * log_z;

  struct Row {
    std::uint64_t hash;
    std::size_t index;
  };
  std::vector<Row> rows;
  rows.reserve(sweep.samples.size());
  for (std::size_t j = 0; j < sweep.samples.size(); ++j) {
    rows.push_back({spec_hash(sweep.samples[j].spec), j});
  }
  std::stable_sort(rows.begin(), rows.end(),
                   [](const Row& x, const Row& y) { return x.hash < y.hash; });

  std::ofstream csv;
  if (!a.csv.empty()) {
    csv.open(a.csv);
    if (!csv) throw Error(a.csv + ": cannot write file");
    csv << "hash,log_z_h,k_log_z_g,holds\n";
  }
  std::size_t violations = 0;
  for (const auto& r : rows) {
    const auto& s = sweep.samples[r.index];
    const bool holds = s.log_z <= k_log_z + c.tol;
    if (!holds) ++violations;
    emit(out, Json{{"record", "cover"},
                   {"hash", hex64(r.hash)},
                   {"spec", cover_to_json(s.spec)},
                   {"log_z_h", s.log_z},
                   {"k_log_z_g", k_log_z},
                   {"holds", holds}});
    if (csv.is_open()) {
      csv << hex64(r.hash) << ',' << format_real(s.log_z) << ','
          << format_real(k_log_z) << ',' << (holds ? "true" : "false") << '\n';
    }
  }
  const auto opt = optimize(g, c);
  emit(out, Json{{"record", "summary"},
                 {"command", "covers"},
                 {"model", path},
                 {"k", a.k},
                 {"covers", est.covers},
                 {"exhaustive", est.exhaustive},
                 {"estimate", est.log_estimate},
                 {"stderr", est.stderr_log},
                 {"log_z", log_z},
                 {"log_z_bethe_lower", opt.log_z_bethe_lower},
                 {"log_supermodular", lsm},
                 {"violations", violations},
                 {"tol", c.tol},
                 {"seed", c.seed}});
  return (violations > 0 && lsm) ? kViolation : kOk;
}

inline int cmd_indsets(const std::string& path, bool no_flip, const Common& c,
                       std::ostream& out) {
  const SimpleGraph sg = load_graph(path);
  const FactorGraph base = independent_set_model(sg.n, sg.edges);
  FactorGraph model = base;
  Json part = nullptr;
  if (!no_flip) {
    if (sg.partition) {
      std::vector<bool> in_a(sg.n, false);
      for (std::size_t v : *sg.partition) {
        if (v >= sg.n) throw StructureError("partition vertex out of range");
        in_a[v] = true;
      }
      std::vector<std::size_t> b;
      for (std::size_t v = 0; v < sg.n; ++v) {
        if (!in_a[v]) b.push_back(v);
      }
      model = flip_bipartite(base, *sg.partition, b);
      part = *sg.partition;
    } else {
      model = flip_bipartite(base);
      const auto col = two_coloring(sg.n, sg.edges);
      std::vector<std::size_t> a;
      for (std::size_t v = 0; v < sg.n; ++v) {
        if (col.color[v] == 0) a.push_back(v);
      }
      part = a;
    }
  }
  const double log_count = partition_function(base);
  const auto opt = optimize(model, c);
  const bool lsm = is_log_supermodular_factorization(model).holds;
  const bool verdict = opt.log_z_bethe_lower <= log_count + c.tol;
  emit(out, Json{{"command", "indsets"},
                 {"graph", path},
                 {"n", sg.n},
                 {"edges", sg.edges.size()},
                 {"count", std::llround(std::exp(log_count))},
                 {"log_count", log_count},
                 {"flipped", !no_flip},
                 {"partition_a", part},
                 {"log_supermodular", lsm},
                 {"log_z_bethe_lower", opt.log_z_bethe_lower},
                 {"bethe_lower", std::exp(opt.log_z_bethe_lower)},
                 {"verdict", verdict},
                 {"seed", c.seed}});
  return (verdict || !lsm) ? kOk : kViolation;
}

struct FuzzArgs {
  std::string suite = "lattice";
  std::size_t trials = 100;
  std::string artifact_dir = ".";
  bool mutate = false;
  std::string replay;
};

inline int cmd_fuzz_replay(const FuzzArgs& a, std::ostream& out) {
  const Json art = bethe::detail::parse_text(read_file(a.replay), a.replay);
  FuzzOptions opts;
  const auto suite = bethe::detail::field<std::string>(art, "suite", a.replay);
  const auto check = bethe::detail::field<std::string>(art, "check", a.replay);
  const auto trial = bethe::detail::field<std::uint64_t>(art, "trial", a.replay);
  const auto trial_seed = bethe::detail::field<std::uint64_t>(art, "trial_seed", a.replay);
  opts.mutate = art.value("mutate", false);
  opts.restarts = art.value("restarts", std::size_t{20});
  const auto summary = run_fuzz_trial(suite, trial, trial_seed, opts);
  bool reproduced = false;
  bool instance_match = false;
  for (const auto& f : summary.failures) {
    if (f.check != check) continue;
    reproduced = true;
    if (f.instance == art.at("instance")) {
      instance_match = true;
      break;
    }
  }
  emit(out, Json{{"record", "replay"},
                 {"artifact", a.replay},
                 {"suite", suite},
                 {"check", check},
                 {"trial", trial},
                 {"trial_seed", trial_seed},
                 {"reproduced", reproduced},
                 {"instance_match", instance_match}});
  return reproduced ? kViolation : kOk;
}

inline int cmd_fuzz(const FuzzArgs& a, const Common& c, std::ostream& out) {
  if (!a.replay.empty()) return cmd_fuzz_replay(a, out);
  FuzzOptions opts;
  opts.trials = a.trials;
  opts.seed = c.seed;
  opts.restarts = c.restarts;
  opts.mutate = a.mutate;
  const auto summary = run_fuzz(a.suite, opts);

  std::string artifact;
  if (!summary.failures.empty()) {
    // the earliest failing check is the reproducer
    const auto& first = summary.failures.front();
    Json j = failure_to_json(first, c.seed);
    j["mutate"] = a.mutate;
    j["restarts"] = c.restarts;
    std::filesystem::create_directories(a.artifact_dir);
    artifact = (std::filesystem::path(a.artifact_dir) /
                ("fuzz-" + a.suite + "-seed" + std::to_string(c.seed) + "-trial" +
                 std::to_string(first.trial) + ".json"))
                   .string();
    write_file(artifact, j.dump(2) + "\n");
  }
  for (const auto& f : summary.failures) {
    emit(out, Json{{"record", "failure"},
                   {"suite", f.suite},
                   {"check", f.check},
                   {"trial", f.trial},
                   {"trial_seed", f.trial_seed},
                   {"detail", f.detail}});
  }
  Json rec{{"record", "summary"},
           {"command", "fuzz"},
           {"suite", summary.suite},
           {"trials", summary.trials},
           {"checks", summary.checks},
           {"failures", summary.failures.size()},
           {"check_counts", summary_counts(summary)},
           {"seed", c.seed},
           {"mutate", a.mutate}};
  rec["artifact"] = artifact.empty() ? Json(nullptr) : Json(artifact);
  emit(out, rec);
  return summary.failures.empty() ? kOk : kViolation;
}

inline int report_error(std::ostream& err, const char* kind, const std::string& msg,
                        int code, Json extra = Json::object()) {
  extra["error"] = kind;
  extra["message"] = msg;
  extra["exit"] = code;
  emit(err, extra);
  return code;
}

}  // namespace detail

/// Parses `args` (without the program name) and runs one command.
inline int run(const std::vector<std::string>& args, std::ostream& out,
               std::ostream& err) {
  CLI::App app{"Exact and Bethe partition functions, graph covers and lattice checks",
               "bethe_cli"};
  app.require_subcommand(1);

  detail::Common common;
  auto add_common = [&common](CLI::App* sub, bool with_restarts) {
    sub->add_option("--seed", common.seed, "base RNG seed")->capture_default_str();
    sub->add_option("--tol", common.tol, "verdict tolerance")->capture_default_str();
    if (with_restarts) {
      sub->add_option("--restarts", common.restarts, "random BP restarts")
          ->capture_default_str()
          ->check(CLI::PositiveNumber);
    }
  };

  std::string model_path;
  auto* check = app.add_subcommand("check", "log-supermodularity, log Z and exact marginals");
  check->add_option("model", model_path, "model file")->required();

  auto* bethe = app.add_subcommand("bethe", "Bethe lower estimate against log Z");
  bethe->add_option("model", model_path, "model file")->required();
  add_common(bethe, true);

  detail::CoversArgs cov;
  auto* covers = app.add_subcommand("covers", "Z(H) <= Z(G)^k over k-covers and the cover average");
  covers->add_option("model", model_path, "model file")->required();
  covers->add_option("--k", cov.k, "cover fold")->capture_default_str()->check(CLI::PositiveNumber);
  auto* samples_opt =
      covers->add_option("--samples", cov.samples, "sampled covers (enumerates when count fits)")
          ->capture_default_str()
          ->check(CLI::PositiveNumber);
  covers->add_flag("--exhaustive", cov.exhaustive, "enumerate every labeled cover")
      ->excludes(samples_opt);
  covers->add_option("--csv", cov.csv, "also write rows as CSV");
  add_common(covers, true);

  std::string graph_path;
  bool no_flip = false;
  auto* indsets = app.add_subcommand("indsets", "independent-set count vs Bethe estimate");
  indsets->add_option("graph", graph_path, "graph file")->required();
  indsets->add_flag("--no-flip", no_flip, "skip the bipartite flip");
  add_common(indsets, true);

  detail::FuzzArgs fz;
  auto* fuzz = app.add_subcommand("fuzz", "property suites with failure artifacts");
  fuzz->add_option("--suite", fz.suite, "suite")
      ->capture_default_str()
      ->check(CLI::IsMember(fuzz_suites()));
  fuzz->add_option("--trials", fz.trials, "trial count")->capture_default_str();
  fuzz->add_option("--artifact-dir", fz.artifact_dir, "where failure artifacts go")
      ->capture_default_str();
  fuzz->add_flag("--mutate", fz.mutate, "negate every property (harness self-test)");
  fuzz->add_option("--replay", fz.replay, "re-run the trial recorded in an artifact");
  add_common(fuzz, true);

  try {
    std::vector<std::string> rev(args.rbegin(), args.rend());
    app.parse(rev);
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return kOk;
  } catch (const CLI::CallForAllHelp&) {
    out << app.help("", CLI::AppFormatMode::All);
    return kOk;
  } catch (const CLI::ParseError& e) {
    return detail::report_error(err, "usage", e.what(), kInputError);
  }

  try {
    if (*check) return detail::cmd_check(model_path, out);
    if (*bethe) return detail::cmd_bethe(model_path, common, out);
    if (*covers) return detail::cmd_covers(model_path, cov, common, out);
    if (*indsets) return detail::cmd_indsets(graph_path, no_flip, common, out);
    if (*fuzz) return detail::cmd_fuzz(fz, common, out);
  } catch (const BipartitionError& e) {
    return detail::report_error(err, "bipartition", e.what(), kInputError,
                                Json{{"odd_cycle", e.odd_cycle()}});
  } catch (const CapacityError& e) {
    return detail::report_error(err, "capacity", e.what(), kCapacity);
  } catch (const ParseError& e) {
    return detail::report_error(err, "parse", e.what(), kInputError);
  } catch (const Error& e) {
    return detail::report_error(err, "input", e.what(), kInputError);
  } catch (const std::exception& e) {
    return detail::report_error(err, "internal", e.what(), kInputError);
  }
  return kInputError;
}

}  // namespace bethe::cli
