#include "rlrt/config.hpp"

#include <fstream>
#include <map>
#include <set>
#include <sstream>

#include "json.hpp"
#include "rlrt/error.hpp"

namespace rlrt {

using json = nlohmann::ordered_json;

namespace {

[[noreturn]] void bad(const std::string& msg) { fail(ErrorCode::kConfig, msg); }

// Reads the keys of one JSON object and rejects any it did not consume.
class ObjectReader {
 public:
  ObjectReader(const json& j, std::string path) : j_(j), path_(std::move(path)) {
    if (!j_.is_object()) bad(where() + " must be an object");
  }

  void get(const char* key, int& out) { read(key, [&](const json& v) { out = as_int(v, key); }); }
  void get(const char* key, long& out) { read(key, [&](const json& v) { out = as_int(v, key); }); }
  void get(const char* key, std::uint64_t& out) {
    read(key, [&](const json& v) {
      if (!v.is_number_unsigned() && !(v.is_number_integer() && v.get<std::int64_t>() >= 0)) {
        bad(name(key) + " must be a non-negative integer");
      }
      out = v.get<std::uint64_t>();
    });
  }
  void get(const char* key, double& out) {
    read(key, [&](const json& v) {
      if (!v.is_number()) bad(name(key) + " must be a number");
      out = v.get<double>();
    });
  }
  void get(const char* key, bool& out) {
    read(key, [&](const json& v) {
      if (!v.is_boolean()) bad(name(key) + " must be true or false");
      out = v.get<bool>();
    });
  }
  void get(const char* key, std::string& out) {
    read(key, [&](const json& v) {
      if (!v.is_string()) bad(name(key) + " must be a string");
      out = v.get<std::string>();
    });
  }
  template <typename T>
  void get_list(const char* key, std::vector<T>& out) {
    read(key, [&](const json& v) {
      if (!v.is_array()) bad(name(key) + " must be an array");
      out.clear();
      for (const json& e : v) {
        if constexpr (std::is_same_v<T, int>) {
          out.push_back(static_cast<T>(as_int(e, key)));
        } else {
          if (!e.is_number()) bad(name(key) + " must hold numbers");
          out.push_back(e.get<T>());
        }
      }
    });
  }
  template <typename Fn>
  void read(const char* key, Fn&& fn) {
    seen_.insert(key);
    if (auto it = j_.find(key); it != j_.end()) fn(*it);
  }
  ObjectReader child(const char* key) {
    seen_.insert(key);
    static const json kEmpty = json::object();
    auto it = j_.find(key);
    return ObjectReader(it == j_.end() ? kEmpty : *it, name(key));
  }
  void finish() const {
    for (const auto& [k, v] : j_.items()) {
      if (!seen_.contains(k)) bad("unknown key " + name(k.c_str()));
    }
  }
  std::string name(const char* key) const { return path_.empty() ? key : path_ + "." + key; }

 private:
  std::string where() const { return path_.empty() ? "config" : path_; }
  long as_int(const json& v, const char* key) const {
    if (!v.is_number_integer()) bad(name(key) + " must be an integer");
    return v.get<long>();
  }

  const json& j_;
  std::string path_;
  std::set<std::string> seen_;
};

template <typename E, typename Parse>
void get_enum(ObjectReader& r, const char* key, E& out, Parse parse) {
  std::string s;
  bool present = false;
  r.read(key, [&](const json& v) {
    if (!v.is_string()) bad(r.name(key) + " must be a string");
    s = v.get<std::string>();
    present = true;
  });
  if (!present) return;
  try {
    out = parse(s);
  } catch (const Error& e) {
    bad(r.name(key) + ": " + e.what());
  }
}

MarkerVariance marker_variance_from_string(std::string_view s) {
  if (s == "monroe") return MarkerVariance::kMonroe;
  if (s == "with_complements") return MarkerVariance::kWithComplements;
  fail(ErrorCode::kConfig, "unknown variance '" + std::string(s) + "'");
}

InjectStrategy strategy_from_string(std::string_view s) {
  for (auto k : {InjectStrategy::kMaxKl, InjectStrategy::kRandom, InjectStrategy::kMinKl}) {
    if (to_string(k) == s) return k;
  }
  fail(ErrorCode::kConfig, "unknown strategy '" + std::string(s) + "'");
}

json to_json(const RunConfig& c) {
  json j;
  j["schema_version"] = c.schema_version;
  j["seed"] = c.seed;

  const TaskParams& t = c.task;
  j["task"] = {{"family", std::string(to_string(c.family))},
               {"vocab_size", t.vocab_size},
               {"horizon", t.horizon},
               {"prompt_arity", t.prompt_arity},
               {"enumeration_budget", t.enumeration_budget},
               {"modulus", t.modulus},
               {"target", t.target},
               {"hidden_set", t.hidden_set ? json(*t.hidden_set) : json(nullptr)},
               {"hidden_set_size", t.hidden_set_size},
               {"required_hits", t.required_hits}};
  j["policy"] = {{"window", c.policy.window},
                 {"embed_dim", c.policy.embed_dim},
                 {"hidden_dim", c.policy.hidden_dim},
                 {"init_scale", c.policy.init_scale}};

  const TrainConfig& r = c.train;
  j["train"] = {{"scheme", std::string(to_string(r.scheme))},
                {"teacher", std::string(to_string(r.teacher))},
                {"group_size", r.group_size},
                {"prompts_per_batch", r.prompts_per_batch},
                {"ppo_epochs", r.ppo_epochs},
                {"mini_batches", r.mini_batches},
                {"learning_rate", r.learning_rate},
                {"sdpo_lr_scale", r.sdpo_lr_scale},
                {"srpo_lr_scale", r.srpo_lr_scale},
                {"beta1", r.beta1},
                {"beta2", r.beta2},
                {"adam_eps", r.adam_eps},
                {"weight_decay", r.weight_decay},
                {"grad_clip", r.grad_clip},
                {"warmup_steps", r.warmup_steps},
                {"eps_low", r.eps_low},
                {"eps_high", r.eps_high},
                {"lambda_init", r.lambda_init},
                {"lambda_decay_steps", r.lambda_decay_steps},
                {"eps_w", r.eps_w},
                {"normalize_std", r.normalize_std ? json(*r.normalize_std) : json(nullptr)},
                {"temperature", r.temperature},
                {"total_steps", r.total_steps},
                {"distill_top_k", r.distill_top_k},
                {"js_alpha", r.js_alpha},
                {"srpo_beta", r.srpo_beta}};
  j["run"] = {{"checkpoint_every", c.run.checkpoint_every}, {"rollout_log_every", c.run.rollout_log_every}};

  const DiagnosticsConfig& d = c.diagnostics;
  json strategies = json::array();
  for (auto s : d.intervene.strategies) strategies.push_back(std::string(to_string(s)));
  j["diagnostics"] = {
      {"markers",
       {{"alpha", d.markers.alpha},
        {"min_count", d.markers.min_count},
        {"z_threshold", d.markers.z_threshold},
        {"variance", std::string(to_string(d.markers.variance))},
        {"prompts", d.markers.prompts},
        {"rollouts_per_prompt", d.markers.rollouts_per_prompt}}},
      {"intervene",
       {{"prompts", d.intervene.prompts},
        {"rollouts_per_prompt", d.intervene.rollouts_per_prompt},
        {"continuations", d.intervene.continuations},
        {"strategies", strategies}}},
      {"shift",
       {{"js_threshold", d.shift.js_threshold},
        {"threshold_unit", d.shift.threshold_in_bits ? "bits" : "nats"},
        {"k_list", d.shift.k_list},
        {"tail_thresholds", d.shift.tail_thresholds},
        {"ccdf_thresholds", d.shift.ccdf_thresholds},
        {"rollouts", d.shift_rollouts}}},
      {"passk", {{"samples", d.passk.samples}, {"k_list", d.passk.k_list}, {"temperature", d.passk.temperature}}},
      {"verify", {{"positions", d.verify_positions}}}};
  return j;
}

RunConfig from_json(const json& j) {
  RunConfig c;
  ObjectReader root(j, "");
  root.get("schema_version", c.schema_version);
  if (c.schema_version != kConfigSchemaVersion) {
    bad("schema_version " + std::to_string(c.schema_version) + " is not supported (expected " +
        std::to_string(kConfigSchemaVersion) + ")");
  }
  root.get("seed", c.seed);

  {
    ObjectReader t = root.child("task");
    get_enum(t, "family", c.family, task_family_from_string);
    t.get("vocab_size", c.task.vocab_size);
    t.get("horizon", c.task.horizon);
    t.get("prompt_arity", c.task.prompt_arity);
    t.get("enumeration_budget", c.task.enumeration_budget);
    t.get("modulus", c.task.modulus);
    t.get("target", c.task.target);
    t.read("hidden_set", [&](const json& v) {
      if (v.is_null()) {
        c.task.hidden_set.reset();
        return;
      }
      if (!v.is_array()) bad("task.hidden_set must be null or an array");
      std::vector<Token> h;
      for (const json& e : v) {
        if (!e.is_number_integer()) bad("task.hidden_set must hold integers");
        h.push_back(e.get<Token>());
      }
      c.task.hidden_set = std::move(h);
    });
    t.get("hidden_set_size", c.task.hidden_set_size);
    t.get("required_hits", c.task.required_hits);
    t.finish();
  }
  {
    ObjectReader p = root.child("policy");
    p.get("window", c.policy.window);
    p.get("embed_dim", c.policy.embed_dim);
    p.get("hidden_dim", c.policy.hidden_dim);
    p.get("init_scale", c.policy.init_scale);
    p.finish();
  }
  {
    TrainConfig& r = c.train;
    ObjectReader t = root.child("train");
    get_enum(t, "scheme", r.scheme, scheme_from_string);
    get_enum(t, "teacher", r.teacher, teacher_kind_from_string);
    t.get("group_size", r.group_size);
    t.get("prompts_per_batch", r.prompts_per_batch);
    t.get("ppo_epochs", r.ppo_epochs);
    t.get("mini_batches", r.mini_batches);
    t.get("learning_rate", r.learning_rate);
    t.get("sdpo_lr_scale", r.sdpo_lr_scale);
    t.get("srpo_lr_scale", r.srpo_lr_scale);
    t.get("beta1", r.beta1);
    t.get("beta2", r.beta2);
    t.get("adam_eps", r.adam_eps);
    t.get("weight_decay", r.weight_decay);
    t.get("grad_clip", r.grad_clip);
    t.get("warmup_steps", r.warmup_steps);
    t.get("eps_low", r.eps_low);
    t.get("eps_high", r.eps_high);
    t.get("lambda_init", r.lambda_init);
    t.get("lambda_decay_steps", r.lambda_decay_steps);
    t.get("eps_w", r.eps_w);
    t.read("normalize_std", [&](const json& v) {
      if (v.is_null()) {
        r.normalize_std.reset();
      } else if (v.is_boolean()) {
        r.normalize_std = v.get<bool>();
      } else {
        bad("train.normalize_std must be null, true or false");
      }
    });
    t.get("temperature", r.temperature);
    t.get("total_steps", r.total_steps);
    std::uint64_t top_k = r.distill_top_k;
    t.get("distill_top_k", top_k);
    r.distill_top_k = static_cast<std::size_t>(top_k);
    t.get("js_alpha", r.js_alpha);
    t.get("srpo_beta", r.srpo_beta);
    t.finish();
  }
  {
    ObjectReader r = root.child("run");
    r.get("checkpoint_every", c.run.checkpoint_every);
    r.get("rollout_log_every", c.run.rollout_log_every);
    r.finish();
  }
  {
    DiagnosticsConfig& d = c.diagnostics;
    ObjectReader dr = root.child("diagnostics");
    {
      ObjectReader m = dr.child("markers");
      m.get("alpha", d.markers.alpha);
      m.get("min_count", d.markers.min_count);
      m.get("z_threshold", d.markers.z_threshold);
      get_enum(m, "variance", d.markers.variance, marker_variance_from_string);
      m.get("prompts", d.markers.prompts);
      m.get("rollouts_per_prompt", d.markers.rollouts_per_prompt);
      m.finish();
    }
    {
      ObjectReader i = dr.child("intervene");
      i.get("prompts", d.intervene.prompts);
      i.get("rollouts_per_prompt", d.intervene.rollouts_per_prompt);
      i.get("continuations", d.intervene.continuations);
      i.read("strategies", [&](const json& v) {
        if (!v.is_array()) bad("diagnostics.intervene.strategies must be an array");
        d.intervene.strategies.clear();
        for (const json& e : v) {
          if (!e.is_string()) bad("diagnostics.intervene.strategies must hold strings");
          d.intervene.strategies.push_back(strategy_from_string(e.get<std::string>()));
        }
      });
      i.finish();
    }
    {
      ObjectReader s = dr.child("shift");
      s.get("js_threshold", d.shift.js_threshold);
      std::string unit = d.shift.threshold_in_bits ? "bits" : "nats";
      s.get("threshold_unit", unit);
      if (unit != "nats" && unit != "bits") bad("diagnostics.shift.threshold_unit must be nats or bits");
      d.shift.threshold_in_bits = unit == "bits";
      s.get_list("k_list", d.shift.k_list);
      s.get_list("tail_thresholds", d.shift.tail_thresholds);
      s.get_list("ccdf_thresholds", d.shift.ccdf_thresholds);
      s.get("rollouts", d.shift_rollouts);
      s.finish();
    }
    {
      ObjectReader p = dr.child("passk");
      p.get("samples", d.passk.samples);
      p.get_list("k_list", d.passk.k_list);
      p.get("temperature", d.passk.temperature);
      p.finish();
    }
    {
      ObjectReader v = dr.child("verify");
      v.get("positions", d.verify_positions);
      v.finish();
    }
    dr.finish();
  }
  root.finish();
  c.validate();
  return c;
}

const std::map<std::string, std::string, std::less<>>& aliases() {
  static const std::map<std::string, std::string, std::less<>> kAliases = {
      {"lambda", "train.lambda_init"},
      {"scheme", "train.scheme"},
      {"teacher", "train.teacher"},
      {"steps", "train.total_steps"},
      {"seed", "seed"},
  };
  return kAliases;
}

}  // namespace

std::string_view to_string(TaskFamily f) {
  return f == TaskFamily::kModularSum ? "ModularSum" : "HiddenLexicon";
}

TaskFamily task_family_from_string(std::string_view s) {
  if (s == "ModularSum") return TaskFamily::kModularSum;
  if (s == "HiddenLexicon") return TaskFamily::kHiddenLexicon;
  fail(ErrorCode::kConfig, "unknown task family '" + std::string(s) + "'");
}

void RunConfig::validate() const {
  if (schema_version != kConfigSchemaVersion) bad("unsupported schema_version");
  try {
    (void)make_task();
    train_config().validate();
  } catch (const Error& e) {
    if (e.code() == ErrorCode::kConfig) throw;
    bad(e.what());
  }
  if (policy.window < 1 || policy.embed_dim < 1 || policy.hidden_dim < 1) bad("policy sizes must be positive");
  if (!(policy.init_scale > 0.0)) bad("policy.init_scale must be positive");
  if (run.checkpoint_every < 0 || run.rollout_log_every < 0) bad("run intervals must be >= 0");

  const auto& d = diagnostics;
  if (!(d.markers.alpha > 0.0)) bad("diagnostics.markers.alpha must be positive");
  if (d.markers.min_count < 0) bad("diagnostics.markers.min_count must be >= 0");
  if (d.markers.prompts < 1 || d.markers.rollouts_per_prompt < 1) bad("diagnostics.markers sizes must be positive");
  if (d.intervene.prompts < 1 || d.intervene.rollouts_per_prompt < 2 || d.intervene.continuations < 1) {
    bad("diagnostics.intervene needs prompts >= 1, rollouts_per_prompt >= 2, continuations >= 1");
  }
  if (d.intervene.strategies.empty()) bad("diagnostics.intervene.strategies is empty");
  for (int k : d.shift.k_list) {
    if (k < 1 || k > task.vocab_size) bad("diagnostics.shift.k_list entries must be in [1, vocab_size]");
  }
  if (d.shift_rollouts < 1) bad("diagnostics.shift.rollouts must be positive");
  if (d.passk.samples < 1) bad("diagnostics.passk.samples must be positive");
  for (int k : d.passk.k_list) {
    if (k < 1 || k > d.passk.samples) bad("diagnostics.passk.k_list entries must be in [1, samples]");
  }
  if (d.passk.temperature < 0.0) bad("diagnostics.passk.temperature must be >= 0");
  if (d.verify_positions < 1) bad("diagnostics.verify.positions must be positive");
}

TaskSpec RunConfig::make_task() const { return rlrt::make_task(family, task, derive_seed(seed, Stream::kTask)); }

PolicyDims RunConfig::dims() const {
  return PolicyDims::for_task(make_task(), policy.window, policy.embed_dim, policy.hidden_dim);
}

TrainConfig RunConfig::train_config() const {
  TrainConfig t = train;
  t.seed = seed;
  return t;
}

RunConfig default_run_config() { return RunConfig{}; }

RunConfig parse_run_config(std::string_view json_text) {
  json j;
  try {
    j = json::parse(json_text);
  } catch (const json::parse_error& e) {
    bad(std::string("malformed JSON: ") + e.what());
  }
  return from_json(j);
}

RunConfig load_run_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) fail(ErrorCode::kIo, "cannot read config file " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  try {
    return parse_run_config(ss.str());
  } catch (const Error& e) {
    if (e.code() != ErrorCode::kConfig) throw;
    fail(ErrorCode::kConfig, path.string() + ": " + e.what());
  }
}

std::string dump_run_config(const RunConfig& config) { return to_json(config).dump(2) + "\n"; }

void apply_override(RunConfig& config, std::string_view assignment) {
  const auto eq = assignment.find('=');
  if (eq == std::string_view::npos || eq == 0) bad("override must look like key=value: " + std::string(assignment));
  std::string key(assignment.substr(0, eq));
  const std::string text(assignment.substr(eq + 1));
  if (auto it = aliases().find(key); it != aliases().end()) key = it->second;

  json j = to_json(config);
  json* node = &j;
  std::size_t start = 0;
  while (true) {
    const auto dot = key.find('.', start);
    const std::string part = key.substr(start, dot == std::string::npos ? std::string::npos : dot - start);
    if (!node->is_object() || !node->contains(part)) bad("unknown config key '" + key + "'");
    node = &(*node)[part];
    if (dot == std::string::npos) break;
    start = dot + 1;
  }
  if (node->is_object()) bad("'" + key + "' is a section, not a value");
  json value = json::parse(text, nullptr, false);
  if (value.is_discarded()) value = text;
  *node = value;
  config = from_json(j);
}

}  // namespace rlrt
