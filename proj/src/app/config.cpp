#include "config.hpp"

#include <cmath>
#include <fstream>
#include <set>
#include <sstream>

#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>

namespace sosf::app {

namespace pt = boost::property_tree;

namespace {

const std::set<std::string> kKeys = {
    "model.dimension",      "model.side",          "model.q",
    "model.mstar",          "disorder.sigma_eta",  "disorder.sigma_d",
    "disorder.delta_eta",   "disorder.delta_d",    "disorder.seeds",
    "disorder.audit_samples", "mcmc.sweeps",       "mcmc.burn_in",
    "mcmc.window",          "mcmc.shift_every",    "mcmc.thin",
    "mcmc.hmax",            "cutoffs.window",      "cutoffs.support_cutoff",
    "cutoffs.polymer_size", "cutoffs.hmax",        "cutoffs.quadrature_nodes",
    "verify.gradient_volume_configs", "verify.gaussian_draws", "verify.factor_hmax", "output.directory",
};

template <class T>
T get(const pt::ptree& t, const std::string& key, T fallback) {
  auto v = t.get_optional<std::string>(key);
  if (!v) return fallback;
  std::istringstream is(*v);
  T out{};
  if (!(is >> out) || !(is >> std::ws).eof()) throw ConfigError("bad value for " + key + ": '" + *v + "'");
  return out;
}

std::vector<std::uint64_t> parse_seeds(const std::string& s) {
  std::vector<std::uint64_t> out;
  std::istringstream is(s);
  std::string tok;
  while (std::getline(is, tok, ',')) {
    std::istringstream ts(tok);
    std::uint64_t v = 0;
    if (!(ts >> v) || !(ts >> std::ws).eof()) throw ConfigError("bad seed list: '" + s + "'");
    out.push_back(v);
  }
  if (out.empty()) throw ConfigError("seed list is empty");
  return out;
}

}  // namespace

RunConfig parse_config(const std::string& text) {
  pt::ptree tree;
  try {
    std::istringstream is(text);
    pt::read_ini(is, tree);
  } catch (const pt::ini_parser_error& e) {
    throw ConfigError(std::string("config parse error: ") + e.what());
  }
  for (const auto& [section, body] : tree) {
    if (body.empty()) throw ConfigError("key outside a section: " + section);
    for (const auto& [key, _] : body)
      if (!kKeys.count(section + "." + key)) throw ConfigError("unknown config key " + section + "." + key);
  }
  RunConfig c;
  c.text = text;
  c.dimension = get(tree, "model.dimension", c.dimension);
  c.side = get(tree, "model.side", c.side);
  c.q = get(tree, "model.q", c.q);
  c.mstar = get(tree, "model.mstar", c.mstar);
  c.disorder.sigma_eta = get(tree, "disorder.sigma_eta", 0.0);
  c.disorder.sigma_d = get(tree, "disorder.sigma_d", 0.0);
  c.disorder.delta_eta = get(tree, "disorder.delta_eta", 0.0);
  c.disorder.delta_d = get(tree, "disorder.delta_d", 0.0);
  if (auto s = tree.get_optional<std::string>("disorder.seeds")) c.seeds = parse_seeds(*s);
  c.audit_samples = get(tree, "disorder.audit_samples", c.audit_samples);
  c.mcmc.sweeps = get(tree, "mcmc.sweeps", c.mcmc.sweeps);
  c.mcmc.burn_in = get(tree, "mcmc.burn_in", c.mcmc.burn_in);
  c.mcmc.window = get(tree, "mcmc.window", c.mcmc.window);
  c.mcmc.shift_every = get(tree, "mcmc.shift_every", c.mcmc.shift_every);
  c.mcmc.thin = get(tree, "mcmc.thin", c.mcmc.thin);
  c.mcmc.hmax = get(tree, "mcmc.hmax", c.mcmc.hmax);
  c.window = get(tree, "cutoffs.window", c.window);
  c.support_cutoff = get(tree, "cutoffs.support_cutoff", c.support_cutoff);
  c.polymer_size = get(tree, "cutoffs.polymer_size", c.polymer_size);
  c.hmax = get(tree, "cutoffs.hmax", c.hmax);
  c.quadrature_nodes = get(tree, "cutoffs.quadrature_nodes", c.quadrature_nodes);
  c.gradient_volume_configs = get(tree, "verify.gradient_volume_configs", c.gradient_volume_configs);
  c.gaussian_draws = get(tree, "verify.gaussian_draws", c.gaussian_draws);
  c.factor_hmax = get(tree, "verify.factor_hmax", c.factor_hmax);
  c.output_dir = tree.get<std::string>("output.directory", c.output_dir);
  c.disorder.mstar = c.mstar;
  validate(c);
  return c;
}

RunConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot read config file " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return parse_config(ss.str());
}

void validate(const RunConfig& c) {
  auto need = [](bool ok, const std::string& what) {
    if (!ok) throw ConfigError("invalid config: " + what);
  };
  need(c.dimension >= 1 && c.dimension <= 3, "model.dimension must be 1, 2 or 3");
  need(c.side >= 1, "model.side must be positive");
  need(std::pow(static_cast<double>(c.side), c.dimension) <= static_cast<double>(kDenseThreshold),
       "volume exceeds the dense coupling limit");
  need(c.q > 0.0 && c.q < 1.0 / (2.0 * c.dimension), "model.q must lie in (0, 1/(2d))");
  need(c.mstar > 0.0, "model.mstar must be positive");
  try {
    sosf::validate(c.disorder);
  } catch (const std::exception& e) {
    throw ConfigError(std::string("invalid config: ") + e.what());
  }
  need(c.audit_samples >= 10000, "disorder.audit_samples must be at least 1e4");
  need(c.mcmc.sweeps >= 1 && c.mcmc.burn_in >= 0 && c.mcmc.thin >= 1, "bad mcmc schedule");
  need(c.mcmc.window >= 1 && c.mcmc.window <= 31, "mcmc.window must lie in [1, 31]");
  need(c.mcmc.shift_every >= 0, "mcmc.shift_every must be non-negative");
  need(c.window >= 3, "cutoffs.window must be at least 3");
  need(c.support_cutoff >= 2, "cutoffs.support_cutoff must be at least 2");
  need(c.polymer_size >= 1, "cutoffs.polymer_size must be positive");
  need(c.hmax >= 0 && c.hmax <= 6, "cutoffs.hmax must lie in [0, 6]");
  need(c.quadrature_nodes >= 4 && c.quadrature_nodes <= 60, "cutoffs.quadrature_nodes must lie in [4, 60]");
  need(c.factor_hmax >= 0 && c.factor_hmax <= 3, "verify.factor_hmax must lie in [0, 3]");
  need(c.gradient_volume_configs >= 1 && c.gaussian_draws >= 1000, "bad verify sizes");
  need(!c.output_dir.empty(), "output.directory is empty");
}

std::string config_echo(const RunConfig& c) {
  std::ostringstream os;
  os << "# " << kVersion << "\n# config:\n";
  std::istringstream is(c.text);
  std::string line;
  while (std::getline(is, line)) os << "#   " << line << "\n";
  return os.str();
}

}  // namespace sosf::app
