// bumpnet command-line driver.
//
//   bumpnet train-pinn     --config c.json [--out dir] [--seed s] [--threads t] [--smoke]
//   bumpnet fit            --config c.json --data d.csv [...]
//   bumpnet ednn           --config c.json [...]
//   bumpnet deeponet-gen   --config c.json [...]
//   bumpnet deeponet-train --config c.json [--data dataset_dir] [...]
//   bumpnet report         --run dir
//
// Exit status: 0 success, 1 invalid input, 2 numerical failure.

#include <cstdio>
#include <exception>
#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>

#include "bumpnet/bench.hpp"

using namespace bumpnet;

namespace {

struct Common {
  std::string config;
  std::string out;
  std::optional<std::uint64_t> seed;
  std::size_t threads = 1;
  bool smoke = false;
};

void add_common(CLI::App* sub, Common& c) {
  sub->add_option("--config", c.config, "JSON configuration file")->required();
  sub->add_option("--out", c.out, "run directory (default runs/<name>)");
  sub->add_option("--seed", c.seed, "overrides the configuration seed");
  sub->add_option("--threads", c.threads, "worker threads")->check(CLI::PositiveNumber);
  sub->add_flag("--smoke", c.smoke, "reduced epochs for a quick check");
}

Json load_resolved(const Common& c, const std::string& command) {
  Json j = read_json_file(c.config);
  const std::string expected = command == "deeponet-gen" || command == "deeponet-train" ? "deeponet" : command;
  const std::string declared = config_command(j);
  if (declared != expected)
    throw ValidationError(c.config + " is a '" + declared + "' configuration, not usable with " + command);
  return resolve_config(std::move(j), expected, c.seed, c.smoke);
}

fs::path run_dir(const Common& c, const Json& resolved, const std::string& fallback) {
  if (!c.out.empty()) return c.out;
  const std::string name = resolved.contains("name") && resolved["name"].is_string()
                               ? resolved["name"].get<std::string>()
                               : resolved.value("problem", fallback);
  return fs::path("runs") / name;
}

int finish(const MetricsRecord& r, const fs::path& dir) {
  std::printf("%s %s: rel_l1 %.4e  rel_l2 %.4e  mse %.4e  params %zu  %.1fs  [%s]\n", r.benchmark.c_str(),
              r.method.c_str(), r.rel_l1, r.rel_l2, r.mse, r.params, r.wall_seconds, r.status.c_str());
  std::printf("run directory: %s\n", dir.string().c_str());
  if (!r.ok()) {
    std::fprintf(stderr, "error: %s\n", r.message.c_str());
    return 2;
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Bump-function networks: PINNs, regression, EDNN evolution and operator learning"};
  app.require_subcommand(1);

  Common pinn, fit, ednn, gen, don;
  std::string fit_data, don_data, report_dir;
  auto* s_pinn = app.add_subcommand("train-pinn", "train a PINN benchmark");
  add_common(s_pinn, pinn);
  auto* s_fit = app.add_subcommand("fit", "fit bumps to tabular data");
  add_common(s_fit, fit);
  s_fit->add_option("--data", fit_data, "CSV with header; last column is the target")->required();
  auto* s_ednn = app.add_subcommand("ednn", "fit the heat initial condition and evolve the heights");
  add_common(s_ednn, ednn);
  auto* s_gen = app.add_subcommand("deeponet-gen", "generate operator-learning datasets");
  add_common(s_gen, gen);
  auto* s_don = app.add_subcommand("deeponet-train", "train a bump-trunk DeepONet");
  add_common(s_don, don);
  s_don->add_option("--data", don_data, "directory with train.txt and test.txt (default: generate)");
  auto* s_rep = app.add_subcommand("report", "bump geometry table and metric summary of a run");
  s_rep->add_option("--run", report_dir, "run directory")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 1;
  }

  try {
    if (*s_pinn) {
      const auto j = load_resolved(pinn, "train-pinn");
      const auto dir = run_dir(pinn, j, "pinn");
      return finish(run_pinn_benchmark(j, dir, pinn.threads), dir);
    }
    if (*s_fit) {
      const auto j = load_resolved(fit, "fit");
      const auto data = read_regression_csv(fit_data);
      const auto dir = run_dir(fit, j, "fit");
      return finish(run_fit_job(j, data, dir, fit.threads), dir);
    }
    if (*s_ednn) {
      const auto j = load_resolved(ednn, "ednn");
      const auto dir = run_dir(ednn, j, "ednn");
      return finish(run_ednn_job(j, dir, ednn.threads), dir);
    }
    if (*s_gen) {
      const auto j = load_resolved(gen, "deeponet-gen");
      const auto dir = run_dir(gen, j, "deeponet") / "data";
      run_deeponet_gen(j, dir);
      std::printf("datasets written to %s\n", dir.string().c_str());
      return 0;
    }
    if (*s_don) {
      const auto j = load_resolved(don, "deeponet-train");
      const auto dir = run_dir(don, j, "deeponet");
      return finish(run_deeponet_job(j, dir, don_data, don.threads), dir);
    }
    if (*s_rep) {
      std::fputs(run_report(report_dir).c_str(), stdout);
      return 0;
    }
  } catch (const ValidationError& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 1;
  } catch (const NumericalError& e) {
    std::fprintf(stderr, "numerical failure: %s\n", e.what());
    return 2;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 1;
  }
  return 1;
}
