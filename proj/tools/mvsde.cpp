// Command-line front end. Each experiment kind is a subcommand taking a
// config JSON file or a bare catalog name; `describe` prints the resolved
// parameters without running. Exit codes: 0 ok, 2 config error, 3 numerical
// abort, 4 a check failed.

#include <cstdio>
#include <fstream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <mvsde.hpp>

namespace {

mvsde::RunConfig load_config(const std::string& src, const std::string& experiment,
                             const std::optional<std::uint64_t>& seed,
                             const std::optional<std::size_t>& paths,
                             const std::optional<std::string>& out) {
  mvsde::json j;
  std::ifstream in(src);
  if (in.good()) {
    try {
      in >> j;
    } catch (const mvsde::json::exception& e) {
      throw mvsde::SpecError(src + ": " + e.what());
    }
    mvsde::require(j.is_object(), src + ": config must be a JSON object");
  } else {
    // not a file: treat the argument as a catalog name
    j = mvsde::json{{"catalog", src}};
  }
  if (!experiment.empty()) j["experiment"] = experiment;
  if (seed) j["seed"] = *seed;
  if (paths) j["n_paths"] = *paths;
  if (out) j["out"] = *out;
  return mvsde::RunConfig::from_json(j);
}

struct SubArgs {
  CLI::App* cmd = nullptr;
  std::string config;
  std::uint64_t seed = 0;
  std::size_t paths = 0;
  std::string out;
  CLI::Option* o_seed = nullptr;
  CLI::Option* o_paths = nullptr;
  CLI::Option* o_out = nullptr;
};

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"measure-valued SDE solver and verification toolkit"};
  app.require_subcommand(1);

  std::vector<std::pair<std::string, std::string>> kinds = {
      {"simulate", "solve sample paths and record per-path diagnostics"},
      {"density", "track pointwise densities and their integrals"},
      {"refine-consistency", "solve on nested partitions and compare aggregates"},
      {"converge", "estimate the seminorm ladder across partition levels"},
      {"verify-inequalities", "check the comparison inequalities on given specs"},
      {"ibp-check", "deterministic boundary-expansion identities"},
      {"martingale-test", "z-scores of pairings against their initial values"},
      {"describe", "print the resolved parameters and segment plan, run nothing"},
  };

  std::vector<SubArgs> subs(kinds.size());
  for (std::size_t i = 0; i < kinds.size(); ++i) {
    auto& a = subs[i];
    a.cmd = app.add_subcommand(kinds[i].first, kinds[i].second);
    a.cmd->add_option("config", a.config, "config JSON file or catalog name")->required();
    a.o_seed = a.cmd->add_option("--seed", a.seed, "master seed override");
    a.o_paths = a.cmd->add_option("--paths", a.paths, "sample path count override");
    a.o_out = a.cmd->add_option("--out", a.out, "output directory override");
  }

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    int rc = app.exit(e);
    return rc == 0 ? 0 : mvsde::kConfigError;
  }

  try {
    for (const auto& a : subs) {
      if (!a.cmd->parsed()) continue;
      bool is_describe = a.cmd->get_name() == "describe";
      std::optional<std::uint64_t> seed;
      std::optional<std::size_t> paths;
      std::optional<std::string> out;
      if (a.o_seed->count()) seed = a.seed;
      if (a.o_paths->count()) paths = a.paths;
      if (a.o_out->count()) out = a.out;
      mvsde::RunConfig cfg =
          load_config(a.config, is_describe ? "" : a.cmd->get_name(), seed, paths, out);
      if (is_describe) {
        mvsde::describe(cfg);
        return mvsde::kOk;
      }
      return mvsde::run(cfg);
    }
  } catch (const mvsde::SpecError& e) {
    std::fprintf(stderr, "config error: %s\n", e.what());
    return mvsde::kConfigError;
  } catch (const mvsde::NumericalAbort& e) {
    std::fprintf(stderr, "numerical abort: %s\n", e.what());
    return mvsde::kNumericalAbort;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "config error: %s\n", e.what());
    return mvsde::kConfigError;
  }
  return mvsde::kConfigError;
}
