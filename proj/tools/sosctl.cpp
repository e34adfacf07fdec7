#include <cstdio>
#include <string>

#include <CLI11.hpp>

#include "sosfield/sosfield.h"

namespace {

void print_log(const char* text, void*) { std::fputs(text, stdout); }

int exit_code(sosf_status s) {
  switch (s) {
    case SOSF_OK: return 0;
    case SOSF_AUDIT_FAILED: return 1;
    case SOSF_CONFIG_ERROR: return 2;
    default: return 3;
  }
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Disordered SOS field toolkit"};
  app.set_version_flag("--version", std::string(sosf_version()));
  app.require_subcommand(1);
  std::string config_path, out_dir;
  int threads = 1;
  uint64_t seed_offset = 0;
  app.add_option("--config", config_path, "Config file (INI)")->required()->check(CLI::ExistingFile);
  app.add_option("--out", out_dir, "Output directory, overrides output.directory");
  app.add_option("--threads", threads, "Worker threads")->check(CLI::PositiveNumber);
  app.add_option("--seed-offset", seed_offset, "Added to every configured seed");

  using Cmd = sosf_status (*)(const sosf_config*, const sosf_run_options*);
  Cmd chosen = nullptr;
  auto sub = [&](CLI::App* parent, const char* name, const char* help, Cmd cmd) {
    CLI::App* s = parent->add_subcommand(name, help)->fallthrough();
    if (cmd) s->callback([&chosen, cmd] { chosen = cmd; });
    return s;
  };
  sub(&app, "verify", "Run the full audit suite and write verify.json", sosf_cmd_verify);
  sub(&app, "sample", "Joint (h, m) samples and roughness reports per seed", sosf_cmd_sample);
  sub(&app, "nu", "Height marginal, exact or Monte Carlo", sosf_cmd_nu);
  sub(&app, "contours", "Contour statistics and activity margins", sosf_cmd_contours);
  CLI::App* potential = sub(&app, "potential", "Potential tools", nullptr)->require_subcommand(1);
  sub(potential, "dump", "V(m) and T(h|m) as CSV", sosf_cmd_potential_dump);
  CLI::App* disorder = sub(&app, "disorder", "Disorder tools", nullptr)->require_subcommand(1);
  sub(disorder, "audit", "Disorder law audit and snapshot", sosf_cmd_disorder_audit);

  try {
    app.parse(argc, argv);
  } catch (const CLI::Success& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 2;
  }

  sosf_config* cfg = nullptr;
  sosf_status st = sosf_config_load(config_path.c_str(), &cfg);
  if (st != SOSF_OK) {
    std::fprintf(stderr, "error: %s\n", sosf_last_error());
    return exit_code(st);
  }
  sosf_run_options opts;
  sosf_run_options_init(&opts);
  opts.threads = threads;
  opts.seed_offset = seed_offset;
  opts.out_dir = out_dir.empty() ? nullptr : out_dir.c_str();
  opts.log = print_log;
  st = chosen(cfg, &opts);
  if (st != SOSF_OK) std::fprintf(stderr, "%s: %s\n", sosf_status_name(st), sosf_last_error());
  sosf_config_free(cfg);
  return exit_code(st);
}
