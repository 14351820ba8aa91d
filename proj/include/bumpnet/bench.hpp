#pragma once

// Benchmark runs: train from a resolved configuration, evaluate, and write a
// run directory plus one row of the shared results table.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <limits>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include "bumpnet/checkpoint.hpp"
#include "bumpnet/config.hpp"
#include "bumpnet/deeponet.hpp"
#include "bumpnet/ednn.hpp"
#include "bumpnet/error.hpp"
#include "bumpnet/metrics.hpp"
#include "bumpnet/pinn.hpp"
#include "bumpnet/report.hpp"

namespace bumpnet {

namespace fs = std::filesystem;

/// 64-bit FNV-1a, as 16 hex digits.
inline std::string fnv1a_hex(std::string_view text) {
  std::uint64_t h = 0xcbf29ce484222325ull;
  for (unsigned char ch : text) {
    h ^= ch;
    h *= 0x100000001b3ull;
  }
  char buf[17];
  std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

/// Hash of a resolved configuration (compact dump, keys sorted).
inline std::string config_hash(const Json& resolved) { return fnv1a_hex(resolved.dump()); }

struct MetricsRecord {
  std::string benchmark;
  std::string method;
  double rel_l1 = std::numeric_limits<double>::quiet_NaN();
  double mse = std::numeric_limits<double>::quiet_NaN();
  double rel_l2 = std::numeric_limits<double>::quiet_NaN();
  std::size_t params = 0;
  std::size_t epochs = 0;
  double wall_seconds = 0.0;
  std::uint64_t seed = 0;
  std::string config_hash;
  std::string status = "ok";  // "ok" or "failed"
  std::string message;

  bool ok() const { return status == "ok"; }

  static std::string csv_header() {
    return "benchmark,method,rel_l1,mse,rel_l2,params,epochs,wall_seconds,seed,config_hash,status,message\n";
  }

  std::string csv_row() const {
    auto clean = [](std::string s) {
      for (char& ch : s)
        if (ch == ',' || ch == '\n' || ch == '\r') ch = ch == ',' ? ';' : ' ';
      return s;
    };
    char buf[160];
    std::snprintf(buf, sizeof(buf), "%.17g,%.17g,%.17g,%zu,%zu,%.3f,%llu,", rel_l1, mse, rel_l2, params, epochs,
                  wall_seconds, static_cast<unsigned long long>(seed));
    return clean(benchmark) + "," + clean(method) + "," + buf + config_hash + "," + status + "," + clean(message) +
           "\n";
  }
};

/// Appends a row, writing the header first when the file is new or empty.
inline void append_result(const fs::path& csv, const MetricsRecord& r) {
  const bool fresh = !fs::exists(csv) || fs::file_size(csv) == 0;
  std::ofstream out(csv, std::ios::app | std::ios::binary);
  if (!out) throw ValidationError("cannot write results file " + csv.string());
  if (fresh) out << MetricsRecord::csv_header();
  out << r.csv_row();
}

/// Every run directory holds config.json (resolved), record.csv and, when the
/// run produced a model, checkpoint.json and bumps.csv.
inline void write_record(const fs::path& dir, const MetricsRecord& r) {
  write_text((dir / "record.csv").string(), MetricsRecord::csv_header() + r.csv_row());
  append_result(dir.parent_path() / "results.csv", r);
}

inline void prepare_run_dir(const fs::path& dir, const Json& resolved) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw ValidationError("cannot create run directory " + dir.string() + ": " + ec.message());
  write_text((dir / "config.json").string(), resolved.dump(2) + "\n");
}

namespace detail {

inline double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

inline std::string table_csv(const std::string& header, const std::vector<std::vector<double>>& rows) {
  std::string s = header + "\n";
  char buf[40];
  for (const auto& row : rows) {
    for (std::size_t i = 0; i < row.size(); ++i) {
      std::snprintf(buf, sizeof(buf), i ? ",%.17g" : "%.17g", row[i]);
      s += buf;
    }
    s += '\n';
  }
  return s;
}

}  // namespace detail

// ---------------------------------------------------------------------------
// PINN benchmarks.

struct PinnRun {
  BumpNetModel model;
  LossTrace trace;
  GridEvaluation grid;
  MetricsRecord record;
};

/// Trains and evaluates without touching the filesystem. Divergence yields a
/// failed record rather than an exception.
inline PinnRun run_pinn(const PinnRunConfig& c, std::size_t threads = 1, const std::string& hash = "") {
  const auto problem = problem_by_name(c.problem, c.problem_parameter);
  PinnRun run;
  run.model = init_grid(c.counts, problem.box, true, c.sharpness);
  auto& r = run.record;
  r.benchmark = c.name;
  r.method = c.method();
  r.params = run.model.parameter_count();
  r.epochs = c.train.epochs;
  r.seed = c.seed;
  r.config_hash = hash;
  const auto colloc = sample_collocation(problem, c.interior, c.boundary, c.seed);
  PinnOptions opt;
  opt.train = c.train;
  opt.self_adaptive = c.self_adaptive;
  opt.sa_schedule = c.sa_schedule;
  opt.init_heights = c.least_squares_heights;
  opt.threads = threads;
  const auto t0 = std::chrono::steady_clock::now();
  try {
    run.trace = train_pinn(run.model, problem, colloc, opt).trace;
  } catch (const NumericalError& e) {
    r.wall_seconds = detail::seconds_since(t0);
    r.status = "failed";
    r.message = e.what();
    return run;
  }
  r.wall_seconds = detail::seconds_since(t0);
  r.params = run.model.parameter_count();
  run.grid = evaluate_on_grid(run.model, problem.exact, c.eval_resolution);
  r.rel_l1 = run.grid.rel_l1();
  r.rel_l2 = run.grid.rel_l2();
  r.mse = run.grid.mse();
  if (!std::isfinite(r.rel_l1)) {
    r.status = "failed";
    r.message = "prediction is not finite";
  }
  return run;
}

/// train-pinn: config.json, checkpoint.json, trace.csv, grid.csv, bumps.csv, record.csv.
inline MetricsRecord run_pinn_benchmark(const Json& resolved, const fs::path& dir, std::size_t threads = 1) {
  const auto cfg = parse_pinn_config(resolved);
  prepare_run_dir(dir, resolved);
  auto run = run_pinn(cfg, threads, config_hash(resolved));
  save_checkpoint(run.model, (dir / "checkpoint.json").string());
  write_text((dir / "bumps.csv").string(), bump_report_csv(run.model));
  run.trace.write_csv((dir / "trace.csv").string());
  if (run.record.ok()) write_text((dir / "grid.csv").string(), grid_csv(run.grid));
  write_record(dir, run.record);
  return run.record;
}

// ---------------------------------------------------------------------------
// fit: regression on tabular data.

/// CSV with a header row; the last column is the target, the others are coordinates.
inline RegressionData read_regression_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ValidationError("cannot open data file " + path);
  std::string line;
  if (!std::getline(in, line)) throw ValidationError(path + " is empty");
  const std::size_t cols = static_cast<std::size_t>(std::count(line.begin(), line.end(), ',')) + 1;
  if (cols < 2) throw ValidationError(path + ": need at least one coordinate column and a value column");
  RegressionData d;
  d.dim = cols - 1;
  std::size_t lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    std::stringstream ss(line);
    std::string cell;
    std::size_t k = 0;
    while (std::getline(ss, cell, ',')) {
      char* end = nullptr;
      const double v = std::strtod(cell.c_str(), &end);
      if (end == cell.c_str() || !std::isfinite(v))
        throw ValidationError(path + ":" + std::to_string(lineno) + ": bad number '" + cell + "'");
      (k < d.dim ? d.points : d.values).push_back(v);
      ++k;
    }
    if (k != cols)
      throw ValidationError(path + ":" + std::to_string(lineno) + ": expected " + std::to_string(cols) + " columns");
  }
  if (d.values.empty()) throw ValidationError(path + " has no data rows");
  return d;
}

struct FitRun {
  BumpNetModel model;
  LossTrace trace;
  std::vector<double> pred;
  MetricsRecord record;
};

inline FitRun run_fit(const FitRunConfig& c, const RegressionData& data, std::size_t threads = 1,
                      const std::string& hash = "") {
  require(c.counts.size() == data.dim, "model.counts has " + std::to_string(c.counts.size()) +
                                           " entries but the data has " + std::to_string(data.dim) + " coordinates");
  std::vector<double> lo = c.lower, hi = c.upper;
  if (lo.empty()) {
    lo.assign(data.dim, std::numeric_limits<double>::infinity());
    hi.assign(data.dim, -std::numeric_limits<double>::infinity());
    for (std::size_t k = 0; k < data.size(); ++k)
      for (std::size_t j = 0; j < data.dim; ++j) {
        lo[j] = std::min(lo[j], data.point(k)[j]);
        hi[j] = std::max(hi[j], data.point(k)[j]);
      }
  }
  require(lo.size() == data.dim, "model.lower/upper must have one entry per coordinate");
  FitRun run;
  run.model = init_grid(c.counts, BoundingBox(lo, hi), true, c.sharpness);
  auto& r = run.record;
  r.benchmark = c.name;
  r.method = "bump-fit";
  r.epochs = c.train.epochs;
  r.seed = c.seed;
  r.config_hash = hash;
  const auto t0 = std::chrono::steady_clock::now();
  try {
    if (c.least_squares_heights) set_heights(run.model, solve_heights(run.model, data));
    run.trace = train_regression(run.model, data, c.train, threads);
  } catch (const NumericalError& e) {
    r.status = "failed";
    r.message = e.what();
  }
  r.wall_seconds = detail::seconds_since(t0);
  r.params = run.model.parameter_count();
  if (!r.ok()) return run;
  const CompiledModel cm(run.model);
  std::vector<double> cache(cm.cache_size());
  for (std::size_t k = 0; k < data.size(); ++k) run.pred.push_back(cm.forward<0>(data.point(k), nullptr, cache.data()).u);
  r.mse = mse(run.pred, data.values);
  r.rel_l1 = rel_l1(run.pred, data.values);
  r.rel_l2 = rel_l2(run.pred, data.values);
  return run;
}

/// fit: config.json, checkpoint.json, trace.csv, fit.csv (x, y, prediction), bumps.csv, record.csv.
inline MetricsRecord run_fit_job(const Json& resolved, const RegressionData& data, const fs::path& dir,
                                 std::size_t threads = 1) {
  const auto cfg = parse_fit_config(resolved);
  prepare_run_dir(dir, resolved);
  auto run = run_fit(cfg, data, threads, config_hash(resolved));
  save_checkpoint(run.model, (dir / "checkpoint.json").string());
  write_text((dir / "bumps.csv").string(), bump_report_csv(run.model));
  run.trace.write_csv((dir / "trace.csv").string());
  if (run.record.ok()) {
    std::string header;
    for (std::size_t j = 0; j < data.dim; ++j) header += "x_" + std::to_string(j) + ",";
    header += "y,prediction";
    std::vector<std::vector<double>> rows;
    for (std::size_t k = 0; k < data.size(); ++k) {
      std::vector<double> row(data.point(k), data.point(k) + data.dim);
      row.push_back(data.values[k]);
      row.push_back(run.pred[k]);
      rows.push_back(std::move(row));
    }
    write_text((dir / "fit.csv").string(), detail::table_csv(header, rows));
  }
  write_record(dir, run.record);
  return run.record;
}

// ---------------------------------------------------------------------------
// EDNN heat equation.

struct EdnnRun {
  EdnnResult result;
  GridEvaluation final_grid;
  MetricsRecord record;
  bool finished = false;
};

inline EdnnRun run_ednn(const EdnnRunConfig& c, std::size_t threads = 1, const std::string& hash = "") {
  EdnnRun run;
  auto& r = run.record;
  r.benchmark = c.name;
  r.method = "ednn";
  r.epochs = c.ednn.fit.epochs;
  r.seed = c.seed;
  r.config_hash = hash;
  auto cfg = c.ednn;
  cfg.threads = threads;
  const auto t0 = std::chrono::steady_clock::now();
  try {
    run.result = solve_heat2d(cfg);
  } catch (const NumericalError& e) {
    r.wall_seconds = detail::seconds_since(t0);
    r.status = "failed";
    r.message = e.what();
    return run;
  }
  r.wall_seconds = detail::seconds_since(t0);
  run.finished = true;
  const auto& m = run.result.model;
  r.params = m.parameter_count();
  const SineDistance dist{m.bbox()};
  auto& g = run.final_grid;
  g.dim = 2;
  g.points = uniform_grid(m.bbox(), cfg.error_resolution);
  const auto h = get_heights(m);
  g.pred = ednn_field(m, dist, h, g.points);
  const double t = run.result.errors.back().time;
  for (std::size_t k = 0; k < g.pred.size(); ++k) g.exact.push_back(heat2d_exact(g.points.data() + 2 * k, t, cfg.nu));
  r.rel_l1 = g.rel_l1();
  r.rel_l2 = g.rel_l2();
  r.mse = g.mse();
  return run;
}

/// ednn: config.json, checkpoint.json (final heights), fit_trace.csv,
/// errors.csv, grid.csv (final time), snapshot_<k>.csv, bumps.csv, record.csv.
inline void write_ednn_artifacts(const EdnnRun& run, const fs::path& dir) {
  if (run.finished) {
    const auto& res = run.result;
    save_checkpoint(res.model, (dir / "checkpoint.json").string());
    write_text((dir / "bumps.csv").string(), bump_report_csv(res.model));
    res.fit_trace.write_csv((dir / "fit_trace.csv").string());
    std::vector<std::vector<double>> rows;
    for (const auto& e : res.errors) rows.push_back({e.time, e.rel_l2, e.max_abs, e.boundary});
    write_text((dir / "errors.csv").string(), detail::table_csv("time,rel_l2,max_abs,boundary_max", rows));
    write_text((dir / "grid.csv").string(), grid_csv(run.final_grid));
    for (std::size_t k = 0; k < res.snapshots.size(); ++k) {
      const auto& s = res.snapshots[k];
      GridEvaluation g{2, s.points, s.pred, s.exact};
      write_text((dir / ("snapshot_" + std::to_string(k) + ".csv")).string(), grid_csv(g));
    }
  }
  write_record(dir, run.record);
}

inline MetricsRecord run_ednn_job(const Json& resolved, const fs::path& dir, std::size_t threads = 1) {
  const auto cfg = parse_ednn_config(resolved);
  prepare_run_dir(dir, resolved);
  const auto run = run_ednn(cfg, threads, config_hash(resolved));
  write_ednn_artifacts(run, dir);
  return run.record;
}

// ---------------------------------------------------------------------------
// DeepONet.

/// Training set uses seed 2s, test set 2s+1.
inline std::pair<DatasetSpec, DatasetSpec> deeponet_dataset_specs(const DeepOnetRunConfig& c) {
  DatasetSpec train = c.data, test = c.data;
  train.seed = 2 * c.seed;
  test.seed = 2 * c.seed + 1;
  test.functions = c.test_functions;
  return {train, test};
}

/// deeponet-gen: config.json, train.txt, test.txt.
inline void run_deeponet_gen(const Json& resolved, const fs::path& dir) {
  const auto cfg = parse_deeponet_config(resolved);
  prepare_run_dir(dir, resolved);
  const auto [tr, te] = deeponet_dataset_specs(cfg);
  save_dataset(generate_dataset(tr), (dir / "train.txt").string());
  save_dataset(generate_dataset(te), (dir / "test.txt").string());
}

struct DeepOnetRun {
  DeepOnetModel model;
  DeepOnetResult result;
  MetricsRecord record;
};

inline DeepOnetRun run_deeponet(const DeepOnetRunConfig& c, const OperatorDataset& train, const OperatorDataset& test,
                                std::size_t threads = 1, const std::string& hash = "") {
  DeepOnetRun run{make_deeponet(c.arch, c.seed), {}, {}};
  auto& r = run.record;
  r.benchmark = c.name;
  r.method = "deeponet";
  r.params = run.model.parameter_count();
  r.epochs = c.train.steps;
  r.seed = c.seed;
  r.config_hash = hash;
  auto opt = c.train;
  opt.seed = c.seed;
  opt.threads = threads;
  const auto t0 = std::chrono::steady_clock::now();
  try {
    run.result = train_deeponet(run.model, train, &test, opt);
  } catch (const NumericalError& e) {
    r.wall_seconds = detail::seconds_since(t0);
    r.status = "failed";
    r.message = e.what();
    return run;
  }
  r.wall_seconds = detail::seconds_since(t0);
  const auto pred = deeponet_predict(run.model, test);
  r.mse = mse(pred, test.values);
  r.rel_l1 = rel_l1(pred, test.values);
  r.rel_l2 = rel_l2(pred, test.values);
  if (!run.result.centers_inside) {
    r.status = "failed";
    r.message = "a trunk center left the domain";
  }
  return run;
}

/// deeponet-train: config.json, checkpoint.json, trace.csv, bumps.csv (trunk), record.csv.
/// Datasets are read from data_dir/{train,test}.txt when given, else generated.
inline MetricsRecord run_deeponet_job(const Json& resolved, const fs::path& dir, const std::string& data_dir,
                                      std::size_t threads = 1) {
  const auto cfg = parse_deeponet_config(resolved);
  OperatorDataset train, test;
  if (!data_dir.empty()) {
    train = load_dataset((fs::path(data_dir) / "train.txt").string());
    test = load_dataset((fs::path(data_dir) / "test.txt").string());
  } else {
    const auto [tr, te] = deeponet_dataset_specs(cfg);
    train = generate_dataset(tr);
    test = generate_dataset(te);
  }
  prepare_run_dir(dir, resolved);
  auto run = run_deeponet(cfg, train, test, threads, config_hash(resolved));
  save_checkpoint(run.model, (dir / "checkpoint.json").string());
  write_text((dir / "bumps.csv").string(), bump_report_csv(run.model.trunk));
  std::vector<std::vector<double>> rows;
  for (const auto& t : run.result.trace) rows.push_back({static_cast<double>(t.step), t.lr, t.loss});
  write_text((dir / "trace.csv").string(), detail::table_csv("step,lr,batch_loss", rows));
  write_record(dir, run.record);
  return run.record;
}

// ---------------------------------------------------------------------------
// report

/// Rewrites bumps.csv from the run's checkpoint and returns a text summary.
inline std::string run_report(const fs::path& dir) {
  const auto ckpt = (dir / "checkpoint.json").string();
  if (!fs::exists(ckpt)) throw ValidationError("no checkpoint.json in " + dir.string());
  const auto kind = checkpoint_kind(ckpt);
  const BumpNetModel model = kind == "deeponet" ? load_deeponet_checkpoint(ckpt).trunk : load_checkpoint(ckpt);
  write_text((dir / "bumps.csv").string(), bump_report_csv(model));
  std::ostringstream o;
  o << "run: " << dir.string() << "\n";
  o << "model: " << kind << ", " << model.bump_count() << " bumps in " << model.dim() << "D, "
    << model.parameter_count() << " parameters\n";
  const auto rec = dir / "record.csv";
  if (fs::exists(rec)) {
    std::ifstream in(rec);
    std::string header, row;
    std::getline(in, header);
    std::getline(in, row);
    std::stringstream hs(header), rs(row);
    std::string k, v;
    while (std::getline(hs, k, ',') && std::getline(rs, v, ',')) o << k << ": " << v << "\n";
  }
  o << "bump table: " << (dir / "bumps.csv").string() << "\n";
  return o.str();
}

}  // namespace bumpnet
