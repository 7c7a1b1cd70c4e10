#include "rlrt/experiment.hpp"

#include <fstream>
#include <sstream>
#include <string>

#include "json.hpp"
#include "rlrt/checkpoint.hpp"
#include "rlrt/error.hpp"
#include "rlrt/records.hpp"

namespace rlrt {

namespace fs = std::filesystem;
using nlohmann::json;

TrainerState initial_state(const RunConfig& config) {
  return make_trainer_state(config.make_task(), config.dims(), derive_seed(config.seed, Stream::kInit),
                            config.policy.init_scale);
}

StepMetrics advance(TrainerState& state, const TaskSpec& task, const TrainConfig& config, Batch* batch_out) {
  const PolicyEvaluator policy(snapshot(state.params));
  Batch batch = collect_batch(policy, task, config, state.step);
  StepMetrics m = train_step(state, batch, config);
  if (batch_out != nullptr) *batch_out = std::move(batch);
  return m;
}

namespace {

int checkpoint_step(const fs::path& dir) {
  const std::string name = dir.filename().string();
  if (name.rfind("step_", 0) != 0) return -1;
  try {
    std::size_t used = 0;
    const int n = std::stoi(name.substr(5), &used);
    return used == name.size() - 5 ? n : -1;
  } catch (const std::exception&) {
    return -1;
  }
}

// Keeps lines whose step is below `limit`. `step_of` returns -1 for lines to keep unconditionally.
void truncate_lines(const fs::path& path, int limit, const std::function<int(const std::string&)>& step_of) {
  if (!fs::exists(path)) return;
  std::istringstream in(read_text_file(path));
  std::string kept;
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    if (step_of(line) < limit) kept += line + "\n";
  }
  write_text_file(path, kept);
}

void append(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary | std::ios::app);
  if (!out) fail(ErrorCode::kIo, "cannot append to " + path.string());
  out << text;
  out.flush();
  if (!out) fail(ErrorCode::kIo, "write failed for " + path.string());
}

void write_checkpoint(const fs::path& root, const TrainerState& state, const std::string& config_text) {
  const fs::path dir = root / "checkpoints" / ("step_" + std::to_string(state.step));
  const fs::path tmp = root / "checkpoints" / ("step_" + std::to_string(state.step) + ".tmp");
  std::error_code ec;
  fs::remove_all(tmp, ec);
  fs::create_directories(tmp, ec);
  if (ec) fail(ErrorCode::kIo, "cannot create " + tmp.string() + ": " + ec.message());
  save_policy(tmp / "policy.bin", state.params);
  save_optimizer(tmp / "optimizer.bin", state.adam);
  const json st = {{"step", state.step}, {"policy_version", state.params.version()}};
  write_text_file(tmp / "state.json", st.dump(2) + "\n");
  write_text_file(tmp / "config.json", config_text);
  fs::remove_all(dir, ec);
  fs::rename(tmp, dir, ec);
  if (ec) fail(ErrorCode::kIo, "cannot finalize checkpoint " + dir.string() + ": " + ec.message());
}

}  // namespace

std::optional<fs::path> latest_checkpoint(const fs::path& output_dir) {
  const fs::path dir = output_dir / "checkpoints";
  if (!fs::is_directory(dir)) return std::nullopt;
  std::optional<fs::path> best;
  int best_step = -1;
  for (const auto& e : fs::directory_iterator(dir)) {
    const int n = checkpoint_step(e.path());
    if (n < 0 || n <= best_step) continue;
    bool complete = true;
    for (const char* f : {"policy.bin", "optimizer.bin", "state.json", "config.json"}) {
      complete = complete && fs::exists(e.path() / f);
    }
    if (complete) {
      best = e.path();
      best_step = n;
    }
  }
  return best;
}

PolicyParams load_checkpoint_policy(const fs::path& path) {
  return load_policy(fs::is_directory(path) ? path / "policy.bin" : path);
}

ExperimentResult run_experiment(const RunConfig& config, const ExperimentOptions& options) {
  config.validate();
  const TaskSpec task = config.make_task();
  const TrainConfig train = config.train_config();
  const std::string config_text = dump_run_config(config);
  const fs::path& out = options.output_dir;

  std::error_code ec;
  fs::create_directories(out, ec);
  if (ec) fail(ErrorCode::kIo, "cannot create output directory " + out.string() + ": " + ec.message());

  const fs::path config_path = out / "config.json";
  const fs::path metrics_path = out / "metrics.csv";
  const fs::path rollouts_path = out / "rollouts.jsonl";

  TrainerState state = initial_state(config);
  std::optional<fs::path> ckpt = options.resume ? latest_checkpoint(out) : std::nullopt;
  if (ckpt) {
    if (read_text_file(*ckpt / "config.json") != config_text) {
      fail(ErrorCode::kConfig, "checkpoint " + ckpt->string() + " was written by a different config");
    }
    PolicyParams params = load_policy(*ckpt / "policy.bin");
    if (!(params.dims() == state.params.dims())) fail(ErrorCode::kConfig, "checkpoint policy shape differs");
    const json st = json::parse(read_text_file(*ckpt / "state.json"), nullptr, false);
    if (st.is_discarded() || !st.contains("step")) fail(ErrorCode::kIo, "corrupt state.json in " + ckpt->string());
    state.params = std::move(params);
    state.adam = load_optimizer(*ckpt / "optimizer.bin");
    state.step = st["step"].get<int>();

    const int n = state.step;
    truncate_lines(metrics_path, n, [](const std::string& line) {
      if (line.rfind("step,", 0) == 0) return -1;
      return std::stoi(line.substr(0, line.find(',')));
    });
    truncate_lines(rollouts_path, n, [](const std::string& line) {
      const json j = json::parse(line, nullptr, false);
      return j.is_discarded() ? -1 : j.value("step", -1);
    });
  } else {
    write_text_file(metrics_path, std::string(kMetricsHeader) + "\n");
    write_text_file(rollouts_path, "");
    fs::remove_all(out / "checkpoints", ec);
  }
  write_text_file(config_path, config_text);

  ExperimentResult result;
  result.start_step = state.step;
  int budget = options.max_steps.value_or(train.total_steps);
  while (state.step < train.total_steps && budget-- > 0) {
    Batch batch;
    const StepMetrics m = advance(state, task, train, &batch);
    append(metrics_path, metrics_row(m, train.scheme) + "\n");
    if (config.run.rollout_log_every > 0 && m.step % config.run.rollout_log_every == 0) {
      std::string lines;
      for (const auto& g : batch.groups) {
        for (const auto& r : g.rollouts) lines += rollout_json_line(r, train.scheme, m.step) + "\n";
      }
      append(rollouts_path, lines);
    }
    const bool last = state.step == train.total_steps || budget == 0;
    if (last || (config.run.checkpoint_every > 0 && state.step % config.run.checkpoint_every == 0)) {
      write_checkpoint(out, state, config_text);
    }
    result.metrics.push_back(m);
    if (options.on_step) options.on_step(m);
  }
  result.end_step = state.step;
  result.final_params = snapshot(state.params);
  return result;
}

}  // namespace rlrt
