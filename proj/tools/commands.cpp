#include "commands.hpp"

#include <cstdio>
#include <cstdlib>
#include <map>
#include <memory>

#include "rlrt/config.hpp"
#include "rlrt/error.hpp"
#include "rlrt/experiment.hpp"
#include "rlrt/records.hpp"

namespace rlrt::cli {

namespace fs = std::filesystem;

namespace {

int exit_code_for(ErrorCode code) {
  switch (code) {
    case ErrorCode::kIo:
      return kExitIo;
    case ErrorCode::kConfig:
    case ErrorCode::kInvalidArgs:
    case ErrorCode::kInvalidParams:
    case ErrorCode::kBudgetExceeded:
      return kExitConfig;
    default:
      return kExitNumeric;
  }
}

template <typename Fn>
int guarded(std::ostream& err, Fn&& fn) {
  try {
    return fn();
  } catch (const Error& e) {
    err << "error: " << e.what() << "\n";
    return exit_code_for(e.code());
  } catch (const fs::filesystem_error& e) {
    err << "error (io): " << e.what() << "\n";
    return kExitIo;
  }
}

RunConfig load_config(const CommonArgs& args) {
  RunConfig c = args.config ? load_run_config(*args.config) : default_run_config();
  for (const auto& o : args.overrides) apply_override(c, o);
  if (args.seed) c.seed = *args.seed;
  c.validate();
  return c;
}

fs::path prepare_output(const CommonArgs& args, const std::string& fallback, const RunConfig& config) {
  const fs::path dir = resolve_output(args.output, fallback);
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) fail(ErrorCode::kIo, "cannot create " + dir.string() + ": " + ec.message());
  write_text_file(dir / "config.json", dump_run_config(config));
  return dir;
}

std::shared_ptr<const PolicyParams> policy_from(const std::optional<fs::path>& checkpoint, const RunConfig& config,
                                                std::ostream& out) {
  if (!checkpoint) {
    out << "no checkpoint given; using the step-0 policy of the config\n";
    return snapshot(initial_state(config).params);
  }
  PolicyParams p = load_checkpoint_policy(*checkpoint);
  if (!(p.dims() == config.dims())) fail(ErrorCode::kConfig, "checkpoint shape does not match the config");
  return snapshot(p);
}

// Diagnostic rollouts: `groups` groups of `per_group` rollouts, prompt id = group mod arity.
std::vector<Rollout> sample_groups(const PolicyEvaluator& policy, const TaskSpec& task, int groups, int per_group,
                                   double temperature, std::uint64_t seed) {
  std::vector<Rollout> out;
  for (int g = 0; g < groups; ++g) {
    for (int k = 0; k < per_group; ++k) {
      Rng rng(derive_seed(seed, Stream::kVerify, {1, static_cast<std::uint64_t>(g), static_cast<std::uint64_t>(k)}));
      Rollout r = sample_rollout(policy, task, g % task.prompt_arity, temperature, rng);
      r.group_id = g;
      out.push_back(std::move(r));
    }
  }
  return out;
}

int diagnose_markers(const DiagnoseArgs& args, std::ostream& out) {
  const RunConfig config = load_config(args.common);
  const fs::path dir = prepare_output(args.common, "markers", config);
  const TaskSpec task = config.make_task();
  const PolicyEvaluator policy(policy_from(args.checkpoint, config, out));
  const MarkerOptions& mo = config.diagnostics.markers;
  const std::vector<Rollout> rollouts =
      sample_groups(policy, task, mo.prompts, mo.rollouts_per_prompt, 1.0, config.seed);

  // Teacher view per rollout, following the training teacher choice.
  std::map<int, std::unique_ptr<SuccessTable>> tables;
  std::vector<TeacherView> views;
  std::vector<Rollout> used;
  const auto n = static_cast<std::size_t>(mo.rollouts_per_prompt);
  for (std::size_t i = 0; i < rollouts.size(); ++i) {
    const Rollout& r = rollouts[i];
    if (config.train.teacher == TeacherKind::kExactBayes) {
      auto& t = tables[r.prompt];
      if (!t) t = std::make_unique<SuccessTable>(task, policy, r.prompt);
      views.emplace_back(ExactBayesView{&task, t.get()});
    } else {
      const std::size_t g = i / n;
      const auto group = std::span<const Rollout>(rollouts).subspan(g * n, n);
      const auto ctx = pick_context(group, i - g * n);
      if (!ctx) continue;  // no correct rollout to condition on
      views.emplace_back(ContextView{*ctx, false});
    }
    used.push_back(r);
  }

  const MarkerCorpora corpora = marker_corpora(policy, used, [&](std::size_t i) { return views[i]; });
  out << "explore corpus: " << corpora.explore.size() << " tokens\n"
      << "exploit corpus: " << corpora.exploit.size() << " tokens\n"
      << "skipped positions: " << corpora.skipped << "\n";
  const MarkerStats stats = marker_zscores(corpora, mo.alpha, mo.min_count, mo.z_threshold, mo.variance);
  write_text_file(dir / "markers.csv", markers_csv(stats));

  std::vector<AsymmetryProfile> profiles;
  for (std::size_t i = 0; i < used.size(); ++i) profiles.push_back(asymmetry_profile(policy, used[i], views[i]));
  write_text_file(dir / "heatmap.json", heatmap_json(used, profiles));
  out << "flagged tokens: " << stats.flagged().size() << "\nreport written to " << dir.string() << "\n";
  return kExitOk;
}

int diagnose_intervene(const DiagnoseArgs& args, std::ostream& out) {
  const RunConfig config = load_config(args.common);
  const fs::path dir = prepare_output(args.common, "intervene", config);
  const TaskSpec task = config.make_task();
  const PolicyEvaluator policy(policy_from(args.checkpoint, config, out));
  const InterventionOptions& io = config.diagnostics.intervene;
  std::vector<int> prompts;
  for (int p = 0; p < std::min(io.prompts, task.prompt_arity); ++p) prompts.push_back(p);
  const InterventionResult result = intervene(policy, task, prompts, io.strategies, io.rollouts_per_prompt,
                                              io.continuations, derive_seed(config.seed, Stream::kIntervention));
  write_text_file(dir / "intervention.csv", intervention_csv(result));
  write_text_file(dir / "intervention_samples.csv", intervention_samples_csv(result));
  out << "hard prompts: " << result.hard_prompts.size() << ", easy prompts: " << result.easy_prompts.size() << "\n";
  for (const auto& r : result.rates) {
    out << to_string(r.strategy) << ": flip->R " << format_real(r.flip_to_right) << " (" << r.hard_trials
        << " trials), flip->W " << format_real(r.flip_to_wrong) << " (" << r.easy_trials << " trials)\n";
  }
  out << "report written to " << dir.string() << "\n";
  return kExitOk;
}

int diagnose_shift(const DiagnoseArgs& args, std::ostream& out) {
  const RunConfig config = load_config(args.common);
  if (!args.checkpoint || !args.base_checkpoint) {
    fail(ErrorCode::kInvalidArgs, "shift needs --checkpoint (fine-tuned) and --base");
  }
  const fs::path dir = prepare_output(args.common, "shift", config);
  const TaskSpec task = config.make_task();
  const PolicyEvaluator ft(policy_from(args.checkpoint, config, out));
  const PolicyEvaluator base(policy_from(args.base_checkpoint, config, out));
  const std::vector<Rollout> rollouts = sample_groups(ft, task, config.diagnostics.shift_rollouts, 1, 1.0, config.seed);
  const ShiftReport report = shift_report(ft, base, rollouts, config.diagnostics.shift);
  write_text_file(dir / "shift_positions.csv", shift_positions_csv(report));
  write_text_file(dir / "shift_summary.json", shift_summary_json(report));
  double max_js = 0.0;
  for (double j : report.js) max_js = std::max(max_js, j);
  out << "positions: " << report.js.size() << ", high-divergence: " << report.high_divergence.size()
      << ", max JS (nats): " << format_real(max_js) << "\nreport written to " << dir.string() << "\n";
  return kExitOk;
}

int diagnose_passk(const DiagnoseArgs& args, std::ostream& out) {
  if (args.n || args.c || args.k) {
    if (!(args.n && args.c && args.k)) fail(ErrorCode::kInvalidArgs, "--n, --c and --k go together");
    out << format_real(pass_at_k(*args.n, *args.c, *args.k)) << "\n";
    return kExitOk;
  }
  const RunConfig config = load_config(args.common);
  const fs::path dir = prepare_output(args.common, "passk", config);
  const TaskSpec task = config.make_task();
  const PolicyEvaluator policy(policy_from(args.checkpoint, config, out));
  const PassKOptions& po = config.diagnostics.passk;
  const std::vector<Rollout> rollouts =
      sample_groups(policy, task, task.prompt_arity, po.samples, po.temperature, config.seed);

  std::string csv = "prompt,n,c";
  for (int k : po.k_list) csv += ",pass_at_" + std::to_string(k);
  csv += "\n";
  std::vector<double> mean(po.k_list.size(), 0.0);
  for (int p = 0; p < task.prompt_arity; ++p) {
    long c = 0;
    for (int s = 0; s < po.samples; ++s) c += rollouts[static_cast<std::size_t>(p * po.samples + s)].reward;
    csv += std::to_string(p) + "," + std::to_string(po.samples) + "," + std::to_string(c);
    for (std::size_t i = 0; i < po.k_list.size(); ++i) {
      const double v = pass_at_k(po.samples, c, po.k_list[i]);
      mean[i] += v / task.prompt_arity;
      csv += "," + format_real(v);
    }
    csv += "\n";
  }
  write_text_file(dir / "passk.csv", csv);
  for (std::size_t i = 0; i < po.k_list.size(); ++i) {
    out << "pass@" << po.k_list[i] << ": " << format_real(mean[i]) << "\n";
  }
  out << "report written to " << dir.string() << "\n";
  return kExitOk;
}

}  // namespace

fs::path resolve_output(const std::optional<fs::path>& output, const std::string& fallback) {
  fs::path p = output.value_or(fs::path("runs") / fallback);
  if (p.is_relative()) {
    if (const char* root = std::getenv("RLRT_OUTPUT_ROOT"); root != nullptr && *root != '\0') p = fs::path(root) / p;
  }
  return p;
}

ProfileFault off_by_one_fault() {
  return [](SuccessProfile& sp) {
    const std::size_t V = sp.f.size();
    std::vector<double> shifted(V);
    for (std::size_t v = 0; v < V; ++v) shifted[v] = sp.f[(v + 1) % V];
    sp.f = std::move(shifted);
    sp.f_bar = 0.0;
    for (std::size_t v = 0; v < V; ++v) sp.f_bar += sp.student.probs[v] * sp.f[v];
  };
}

int cmd_train(const TrainArgs& args, std::ostream& out, std::ostream& err) {
  return guarded(err, [&] {
    const RunConfig config = load_config(args.common);
    ExperimentOptions opts;
    opts.output_dir = resolve_output(args.common.output, "train");
    opts.max_steps = args.max_steps;
    opts.resume = args.resume;
    const ExperimentResult r = run_experiment(config, opts);
    if (r.start_step > 0) out << "resumed at step " << r.start_step << "\n";
    if (!r.metrics.empty()) {
      out << "step " << r.metrics.back().step << ": mean reward " << format_real(r.metrics.back().mean_reward) << "\n";
    }
    out << "finished at step " << r.end_step << " of " << config.train.total_steps << "; output in "
        << opts.output_dir.string() << "\n";
    return int{kExitOk};
  });
}

int cmd_verify(const VerifyArgs& args, std::ostream& out, std::ostream& err, const ProfileFault& fault) {
  return guarded(err, [&] {
    const RunConfig config = load_config(args.common);
    const long n = args.positions.value_or(config.diagnostics.verify_positions);
    if (n < 1) fail(ErrorCode::kInvalidArgs, "positions must be positive");
    const TheoryReport report = theory_sweep(static_cast<std::size_t>(n), config.seed, fault);
    out << "positions checked: " << report.checked << " (skipped " << report.skipped << ")\n"
        << "max tilt residual: " << format_real(report.max_tilt_residual) << "\n"
        << "max identity residual: " << format_real(report.max_identity_residual) << "\n"
        << "min bound slack: " << format_real(report.min_bound_slack) << "\n";
    if (args.common.output) {
      const fs::path dir = prepare_output(args.common, "verify", config);
      write_text_file(dir / "theory.csv", theory_csv(report));
    }
    if (!report.holds(1e-9)) {
      err << "violation: a residual exceeds 1e-9 or a bound slack is below -1e-9\n";
      return int{kExitNumeric};
    }
    out << "all relations hold\n";
    return int{kExitOk};
  });
}

int cmd_diagnose(const DiagnoseArgs& args, std::ostream& out, std::ostream& err) {
  return guarded(err, [&] {
    if (args.subcommand == "markers") return diagnose_markers(args, out);
    if (args.subcommand == "intervene") return diagnose_intervene(args, out);
    if (args.subcommand == "shift") return diagnose_shift(args, out);
    if (args.subcommand == "passk") return diagnose_passk(args, out);
    fail(ErrorCode::kInvalidArgs, "unknown diagnose subcommand '" + args.subcommand + "'");
  });
}

}  // namespace rlrt::cli
