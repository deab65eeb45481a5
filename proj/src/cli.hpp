#pragma once

#include <json.hpp>

#include <cstdint>
#include <iosfwd>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "lqspec/gifs_model.hpp"

namespace lqspec::cli {

// Parsed command options. Family fields map onto FamilyParams; the rest are
// per-command settings. Field names match the long flags with '-' -> '_'.
struct RunConfig {
  std::string family = "strong-r";
  std::optional<double> rho, r, t, s;
  std::string probs_base = "uniform";  // "uniform", "symmetric" or "explicit"
  std::map<std::string, double> probs;  // overrides on top of the base
  std::optional<double> q;
  double q_min = 0.0, q_max = 10.0;
  int steps = 101;
  double step = 1e-4;
  std::vector<double> scales;
  long samples = 1'000'000;
  std::uint64_t seed = 42;
  double depth_eps = 1e-9;
  double tie_tol = 1e-9;
  int threads = 0;
  std::string format = "text";
  std::string output;
  std::string curve;  // legendre: read q,alpha CSV instead of solving
};

double parse_number(const std::string& text);  // "a/b" or decimal
std::map<std::string, double> parse_probs(const std::string& text, std::string& base);

FamilyParams to_family_params(const RunConfig& c);
// Family part of a config with every probability spelled out.
RunConfig config_from_params(const FamilyParams& fp, RunConfig base = {});

nlohmann::json to_json(const RunConfig& c);
RunConfig config_from_json(const nlohmann::json& j);

// Runs one command line; returns the process exit code (0 ok, 2 config error, 3 numeric failure).
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace lqspec::cli
