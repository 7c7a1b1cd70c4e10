#include <iostream>

#include "CLI11.hpp"
#include "commands.hpp"

namespace {

void add_common(CLI::App* app, rlrt::cli::CommonArgs& c) {
  app->add_option("--config", c.config, "Run config JSON (defaults when omitted)");
  app->add_option("--output", c.output, "Output directory; relative paths resolve against $RLRT_OUTPUT_ROOT");
  app->add_option("--seed", c.seed, "Root seed, overrides the config");
  app->add_option("--override", c.overrides, "Config override key=value (repeatable)");
}

}  // namespace

int main(int argc, char** argv) {
  using namespace rlrt::cli;
  CLI::App app{"Verifiable-reward training with reverse token weighting, plus diagnostics"};
  app.require_subcommand(1);

  TrainArgs train;
  bool no_resume = false;
  auto* train_cmd = app.add_subcommand("train", "Train a policy and write metrics, rollouts and checkpoints");
  add_common(train_cmd, train.common);
  train_cmd->add_option("--max-steps", train.max_steps, "Stop after this many steps (resumable)");
  train_cmd->add_flag("--no-resume", no_resume, "Ignore existing checkpoints");

  VerifyArgs verify;
  auto* verify_cmd = app.add_subcommand("verify", "Check the success-tilt identity and the KL bound by enumeration");
  add_common(verify_cmd, verify.common);
  verify_cmd->add_option("--positions", verify.positions, "Number of random (policy, history) positions");

  DiagnoseArgs diag;
  auto* diag_cmd = app.add_subcommand("diagnose", "Analysis reports");
  diag_cmd->require_subcommand(1);
  for (const char* name : {"markers", "intervene", "shift", "passk"}) {
    auto* sub = diag_cmd->add_subcommand(name);
    add_common(sub, diag.common);
    sub->add_option("--checkpoint", diag.checkpoint, "Checkpoint directory or policy.bin");
    if (std::string(name) == "shift") sub->add_option("--base", diag.base_checkpoint, "Base checkpoint");
    if (std::string(name) == "passk") {
      sub->add_option("--n", diag.n, "Samples");
      sub->add_option("--c", diag.c, "Correct samples");
      sub->add_option("--k", diag.k, "k");
    }
    sub->callback([&diag, name] { diag.subcommand = name; });
  }

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : kExitConfig;
  }

  if (*train_cmd) {
    train.resume = !no_resume;
    return cmd_train(train, std::cout, std::cerr);
  }
  if (*verify_cmd) return cmd_verify(verify, std::cout, std::cerr);
  return cmd_diagnose(diag, std::cout, std::cerr);
}
