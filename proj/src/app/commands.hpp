#ifndef SOSF_APP_COMMANDS_HPP
#define SOSF_APP_COMMANDS_HPP

#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

#include "audits.hpp"
#include "config.hpp"
#include "lattice.hpp"

namespace sosf::app {

struct IoError : Error {
  using Error::Error;
};

enum ExitCode : int { kExitOk = 0, kExitAudit = 1, kExitConfig = 2, kExitOther = 3 };

struct RunOptions {
  int threads = 1;
  std::uint64_t seed_offset = 0;
  std::string out_dir;  // overrides output.directory when non-empty
};

struct VerifyReport {
  std::vector<AuditResult> audits;
  bool passed = true;
  std::string first_failure;
};

VerifyReport run_verify(const RunConfig& c, const RunOptions& o);

// Each command writes under the output directory and logs one line per file to `log`.
int cmd_verify(const RunConfig& c, const RunOptions& o, std::ostream& log);
int cmd_sample(const RunConfig& c, const RunOptions& o, std::ostream& log);
int cmd_nu(const RunConfig& c, const RunOptions& o, std::ostream& log);
int cmd_contours(const RunConfig& c, const RunOptions& o, std::ostream& log);
int cmd_potential_dump(const RunConfig& c, const RunOptions& o, std::ostream& log);
int cmd_disorder_audit(const RunConfig& c, const RunOptions& o, std::ostream& log);

std::string output_dir(const RunConfig& c, const RunOptions& o);

}  // namespace sosf::app

#endif
