#include <doctest.h>

#include <unistd.h>

#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>

#include "commands.hpp"
#include "config.hpp"

using namespace sosf;
using namespace sosf::app;
namespace fs = std::filesystem;

namespace {

const char* kSmall = R"([model]
dimension = 2
side = 3
q = 0.1
mstar = 10

[disorder]
sigma_eta = 0.02
sigma_d = 0.01
delta_eta = 0.05
delta_d = 0.02
seeds = 4,5
audit_samples = 20000

[mcmc]
sweeps = 400
burn_in = 40
thin = 10

[verify]
gradient_volume_configs = 100
gaussian_draws = 5000
factor_hmax = 1
)";

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

struct TempDir {
  fs::path path;
  explicit TempDir(const std::string& tag) {
    path = fs::temp_directory_path() / ("sosf_test_" + tag + "_" + std::to_string(::getpid()));
    fs::remove_all(path);
    fs::create_directories(path);
  }
  ~TempDir() { fs::remove_all(path); }
};

RunOptions opts(const fs::path& dir, std::uint64_t offset = 0) {
  RunOptions o;
  o.out_dir = dir.string();
  o.seed_offset = offset;
  return o;
}

}  // namespace

TEST_SUITE("app") {

TEST_CASE("config parsing") {
  const RunConfig c = parse_config(kSmall);
  CHECK(c.side == 3);
  CHECK(c.seeds == std::vector<std::uint64_t>{4, 5});
  CHECK(c.disorder.mstar == 10.0);
  CHECK(c.mcmc.sweeps == 400);
  CHECK(c.gradient_volume_configs == 100);
  CHECK(c.output_dir == "out");

  CHECK_THROWS_AS(parse_config("[model]\nq = -0.1\n"), ConfigError);
  CHECK_THROWS_AS(parse_config("[model]\nq = 0.3\n"), ConfigError);
  CHECK_THROWS_AS(parse_config("[model]\ncolour = red\n"), ConfigError);
  CHECK_THROWS_AS(parse_config("[model]\nside = four\n"), ConfigError);
  CHECK_THROWS_AS(parse_config("[disorder]\nseeds = 1,,2\n"), ConfigError);
  CHECK_THROWS_AS(parse_config("[disorder]\ndelta_d = 0.3\n"), ConfigError);
  CHECK_THROWS_AS(parse_config("[verify]\nfactor_hmax = 4\n"), ConfigError);
  CHECK_THROWS_AS(load_config("/nonexistent/desk.ini"), ConfigError);
  CHECK_NOTHROW(parse_config(""));
}

TEST_CASE("config echo") {
  const RunConfig c = parse_config(kSmall);
  const std::string e = config_echo(c);
  CHECK(e.rfind(std::string("# ") + kVersion + "\n", 0) == 0);
  CHECK(e.find("#   mstar = 10\n") != std::string::npos);
  std::istringstream is(e);
  std::string line;
  while (std::getline(is, line)) CHECK(line.rfind("#", 0) == 0);
}

TEST_CASE("verify outcome is stable across seeds") {
  const RunConfig c = parse_config(kSmall);
  TempDir d("verify");
  const VerifyReport a = run_verify(c, opts(d.path, 0));
  const VerifyReport b = run_verify(c, opts(d.path, 17));
  CHECK(a.passed);
  CHECK(b.passed);
  REQUIRE(a.audits.size() == b.audits.size());
  for (std::size_t k = 0; k < a.audits.size(); ++k) {
    CHECK(a.audits[k].name == b.audits[k].name);
    CHECK(a.audits[k].passed == b.audits[k].passed);
  }
  std::ostringstream log;
  CHECK(cmd_verify(c, opts(d.path), log) == kExitOk);
  CHECK(fs::exists(d.path / "verify.json"));
  CHECK(log.str().find("FAIL") == std::string::npos);
}

TEST_CASE("sample output is deterministic") {
  const RunConfig c = parse_config(kSmall);
  TempDir a("sample_a"), b("sample_b");
  std::ostringstream log;
  RunOptions oa = opts(a.path), ob = opts(b.path);
  ob.threads = 2;
  CHECK(cmd_sample(c, oa, log) == kExitOk);
  CHECK(cmd_sample(c, ob, log) == kExitOk);
  std::size_t files = 0;
  for (const auto& e : fs::directory_iterator(a.path)) {
    ++files;
    const fs::path other = b.path / e.path().filename();
    REQUIRE(fs::exists(other));
    CHECK(slurp(e.path()) == slurp(other));
  }
  CHECK(files == 6);
  const std::string csv = slurp(a.path / "sample_seed4.csv");
  CHECK(csv.rfind(std::string("# ") + kVersion, 0) == 0);
  CHECK(csv.find("sample,x_1,x_2,h,m\n") != std::string::npos);
  TempDir s("sample_s");
  CHECK(cmd_sample(c, opts(s.path, 1), log) == kExitOk);
  // Files are named by the effective seed, so offset 1 maps seed 4 onto seed 5.
  CHECK(slurp(s.path / "sample_seed5.csv") == slurp(a.path / "sample_seed5.csv"));
  CHECK(slurp(s.path / "sample_seed6.csv") != slurp(a.path / "sample_seed5.csv"));
  CHECK_FALSE(fs::exists(s.path / "sample_seed4.csv"));
}

TEST_CASE("zero disorder height histogram is symmetric") {
  RunConfig c = parse_config(
      "[model]\nside = 3\nmstar = 2.5\n[disorder]\nseeds = 9\naudit_samples = 10000\n"
      "[mcmc]\nsweeps = 40000\nburn_in = 100\nthin = 1\n");
  TempDir d("hist");
  std::ostringstream log;
  CHECK(cmd_sample(c, opts(d.path), log) == kExitOk);
  std::ifstream in(d.path / "heights_seed9.csv");
  std::string line;
  std::map<int, double> count;
  double total = 0.0;
  while (std::getline(in, line)) {
    if (line.empty() || line[0] == '#' || line[0] == 'h') continue;
    const auto comma = line.find(',');
    const double n = std::stod(line.substr(comma + 1));
    count[std::stoi(line.substr(0, comma))] = n;
    total += n;
  }
  REQUIRE(total > 0.0);
  REQUIRE(count[1] > 0.0);
  // Loose: correlated samples, so a generous multiple of the iid error.
  CHECK(std::abs(count[1] - count[-1]) / total <= 10.0 * std::sqrt(count[1] / total / total) + 0.01);
}

TEST_CASE("contours of flat samples") {
  const RunConfig c = parse_config(kSmall);
  TempDir d("contours");
  std::ostringstream log;
  CHECK(cmd_contours(c, opts(d.path), log) == kExitOk);
  std::ifstream in(d.path / "contours_seed4.csv");
  std::string line;
  long rows = 0;
  while (std::getline(in, line))
    if (!line.empty() && line[0] != '#' && line.rfind("sample,", 0) != 0) ++rows;
  CHECK(rows == 0);
}

TEST_CASE("representation table margins") {
  RunConfig c = parse_config(kSmall);
  c.side = 2;
  c.mstar = 4.0;
  c.disorder.mstar = 4.0;
  c.seeds = {4};
  TempDir d("repr");
  std::ostringstream log;
  CHECK(cmd_contours(c, opts(d.path), log) == kExitOk);
  std::ifstream in(d.path / "representation_seed4.csv");
  REQUIRE(in.good());
  std::string line;
  long rows = 0;
  while (std::getline(in, line)) {
    if (line.empty() || line[0] == '#' || line.rfind("config,", 0) == 0) continue;
    ++rows;
    const double margin = std::stod(line.substr(line.rfind(',') + 1));
    CHECK(margin >= 0.0);
  }
  CHECK(rows >= 81);
}

TEST_CASE("potential dump and disorder audit") {
  const RunConfig c = parse_config(kSmall);
  TempDir d("misc");
  std::ostringstream log;
  CHECK(cmd_potential_dump(c, opts(d.path), log) == kExitOk);
  std::ifstream in(d.path / "potential.csv");
  std::string line;
  long rows = 0;
  while (std::getline(in, line))
    if (!line.empty() && line[0] != '#' && line.rfind("m,", 0) != 0) ++rows;
  CHECK(rows == 601);
  CHECK(cmd_disorder_audit(c, opts(d.path), log) == kExitOk);
  CHECK(fs::exists(d.path / "disorder_audit_seed4.txt"));
  CHECK(fs::exists(d.path / "disorder_snapshot_seed5.csv"));
  CHECK(cmd_nu(c, opts(d.path), log) == kExitOk);
  CHECK(fs::exists(d.path / "nu_seed4.csv"));
}

}  // TEST_SUITE
