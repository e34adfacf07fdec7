#ifndef SOSF_APP_CONFIG_HPP
#define SOSF_APP_CONFIG_HPP

#include <cstdint>
#include <string>
#include <vector>

#include "disorder.hpp"
#include "heights.hpp"

namespace sosf::app {

inline constexpr const char* kVersion = "sosfield 0.1.0";

struct ConfigError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct RunConfig {
  int dimension = 2;
  int side = 4;
  double q = 0.1;
  double mstar = 10.0;
  DisorderParams disorder;  // seed field unused; see seeds
  std::vector<std::uint64_t> seeds{1};
  long audit_samples = 100000;
  MCMCParams mcmc;
  int window = kDefaultWindow;
  int support_cutoff = 64;
  int polymer_size = 12;
  int hmax = 1;
  int quadrature_nodes = 24;
  int factor_hmax = 2;
  long gradient_volume_configs = 1000;
  long gaussian_draws = 100000;
  std::string output_dir = "out";
  std::string text;  // exact source text, echoed into outputs
};

RunConfig parse_config(const std::string& text);
RunConfig load_config(const std::string& path);
void validate(const RunConfig& c);

// Config text as '#'-prefixed lines headed by the version string.
std::string config_echo(const RunConfig& c);

}  // namespace sosf::app

#endif
