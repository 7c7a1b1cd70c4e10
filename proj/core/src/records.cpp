#include "rlrt/records.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

#include "json.hpp"
#include "rlrt/error.hpp"

namespace rlrt {

using nlohmann::json;

namespace {

json real_or_null(double x) { return std::isfinite(x) ? json(x) : json(nullptr); }

json real_array(std::span<const double> xs) {
  json a = json::array();
  for (double x : xs) a.push_back(real_or_null(x));
  return a;
}

}  // namespace

std::string format_real(double x) {
  if (std::isnan(x)) return "nan";
  if (std::isinf(x)) return x > 0 ? "inf" : "-inf";
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", x);
  return buf;
}

std::string metrics_row(const StepMetrics& m, Scheme scheme) {
  std::ostringstream s;
  s << m.step << ',' << to_string(scheme) << ',' << format_real(m.mean_reward) << ',' << format_real(m.entropy)
    << ',' << format_real(m.mean_abs_dhat) << ',' << format_real(m.mean_dbar) << ',' << format_real(m.clip_frac)
    << ',' << format_real(m.grad_norm) << ',' << format_real(m.lambda);
  return s.str();
}

std::string rollout_json_line(const RolloutRecord& record, Scheme scheme, int step) {
  const Rollout& r = record.rollout;
  json j;
  j["prompt"] = r.prompt;
  j["response"] = r.response;
  j["reward"] = r.reward;
  j["student_logprobs"] = real_array(r.student_logprobs);
  j["d_hat"] = real_array(record.profile.d_hat);
  j["d_bar"] = real_array(record.profile.d_bar);
  j["skipped"] = record.profile.skipped;
  j["weights"] = real_array(record.credit.weights);
  j["advantages"] = real_array(record.credit.advantages);
  j["scheme"] = std::string(to_string(scheme));
  j["step"] = step;
  j["seed"] = r.seed;
  return j.dump();
}

std::optional<std::string> validate_rollout_line(std::string_view line) {
  const json j = json::parse(line, nullptr, false);
  if (j.is_discarded()) return "not valid JSON";
  if (!j.is_object()) return "record is not an object";
  static const char* const kRequired[] = {"prompt",     "response", "reward", "student_logprobs", "d_hat", "d_bar",
                                          "weights", "advantages", "scheme", "step",             "seed"};
  for (const char* k : kRequired) {
    if (!j.contains(k)) return std::string("missing field ") + k;
  }
  for (const auto& [k, v] : j.items()) {
    bool known = k == "skipped";
    for (const char* r : kRequired) known = known || k == r;
    if (!known) return "unknown field " + k;
  }
  if (!j["prompt"].is_number_integer() || j["prompt"].get<long>() < 0) return "prompt must be a non-negative integer";
  if (!j["response"].is_array()) return "response must be an array";
  for (const auto& t : j["response"]) {
    if (!t.is_number_integer() || t.get<long>() < 0) return "response must hold token ids";
  }
  if (!j["reward"].is_number_integer() || (j["reward"] != 0 && j["reward"] != 1)) return "reward must be 0 or 1";
  const std::size_t n = j["response"].size();
  for (const char* k : {"student_logprobs", "d_hat", "d_bar", "weights", "advantages"}) {
    const json& a = j[k];
    if (!a.is_array()) return std::string(k) + " must be an array";
    if (a.size() != n) return std::string(k) + " length differs from response";
    for (const auto& x : a) {
      if (!x.is_number() && !x.is_null()) return std::string(k) + " must hold numbers or null";
    }
  }
  if (j.contains("skipped")) {
    const json& s = j["skipped"];
    if (!s.is_array() || s.size() != n) return "skipped must be a boolean array of response length";
    for (const auto& x : s) {
      if (!x.is_boolean()) return "skipped must hold booleans";
    }
  }
  if (!j["scheme"].is_string()) return "scheme must be a string";
  try {
    (void)scheme_from_string(j["scheme"].get<std::string>());
  } catch (const Error&) {
    return "unknown scheme";
  }
  if (!j["step"].is_number_integer() || j["step"].get<long>() < 0) return "step must be a non-negative integer";
  if (!j["seed"].is_number_unsigned() && !(j["seed"].is_number_integer() && j["seed"].get<long>() >= 0)) {
    return "seed must be a non-negative integer";
  }
  return std::nullopt;
}

std::string heatmap_json(std::span<const Rollout> rollouts, std::span<const AsymmetryProfile> profiles) {
  if (rollouts.size() != profiles.size()) fail(ErrorCode::kLengthMismatch, "one profile per rollout required");
  json out = json::array();
  for (std::size_t i = 0; i < rollouts.size(); ++i) {
    const AsymmetryProfile& p = profiles[i];
    out.push_back({{"prompt", rollouts[i].prompt},
                   {"reward", rollouts[i].reward},
                   {"tokens", p.tokens},
                   {"d_bar", real_array(p.d_bar)},
                   {"d_hat", real_array(p.d_hat)},
                   {"skipped", p.skipped}});
  }
  return out.dump(1) + "\n";
}

std::string theory_csv(const TheoryReport& report) {
  std::ostringstream s;
  s << "rollout,position,skipped,f_bar,influence,tv,kl,identity_residual,bound_slack,tilt_residual,f\n";
  for (const auto& p : report.positions) {
    s << p.rollout << ',' << p.position << ',' << (p.skipped ? 1 : 0) << ',' << format_real(p.f_bar) << ','
      << format_real(p.influence) << ',' << format_real(p.tv) << ',' << format_real(p.kl) << ','
      << format_real(p.identity_residual) << ',' << format_real(p.bound_slack) << ','
      << format_real(p.tilt_residual) << ',';
    for (std::size_t v = 0; v < p.f.size(); ++v) s << (v ? " " : "") << format_real(p.f[v]);
    s << '\n';
  }
  return s.str();
}

std::string markers_csv(const MarkerStats& stats) {
  std::ostringstream s;
  s << "token,explore,exploit,delta,z,flagged\n";
  for (const auto& t : stats.tokens) {
    s << t.token << ',' << t.explore << ',' << t.exploit << ',' << format_real(t.delta) << ',' << format_real(t.z)
      << ',' << (t.flagged ? 1 : 0) << '\n';
  }
  return s.str();
}

std::string intervention_csv(const InterventionResult& result) {
  std::ostringstream s;
  s << "strategy,flip_to_right,hard_flips,hard_trials,flip_to_wrong,easy_flips,easy_trials\n";
  for (const auto& r : result.rates) {
    s << to_string(r.strategy) << ',' << format_real(r.flip_to_right) << ',' << r.hard_flips << ','
      << r.hard_trials << ',' << format_real(r.flip_to_wrong) << ',' << r.easy_flips << ',' << r.easy_trials
      << '\n';
  }
  return s.str();
}

std::string intervention_samples_csv(const InterventionResult& result) {
  std::ostringstream s;
  s << "prompt,rollout,strategy,subset,position,flips,trials\n";
  for (const auto& x : result.samples) {
    s << x.prompt << ',' << x.rollout << ',' << to_string(x.strategy) << ',' << (x.hard ? "hard" : "easy") << ','
      << x.position << ',' << x.flips << ',' << x.trials << '\n';
  }
  return s.str();
}

std::string shift_positions_csv(const ShiftReport& report) {
  std::ostringstream s;
  s << "index,js_nats,high_divergence\n";
  std::size_t h = 0;
  for (std::size_t i = 0; i < report.js.size(); ++i) {
    const bool high = h < report.high_divergence.size() && report.high_divergence[h] == i;
    if (high) ++h;
    s << i << ',' << format_real(report.js[i]) << ',' << (high ? 1 : 0) << '\n';
  }
  return s.str();
}

std::string shift_summary_json(const ShiftReport& report) {
  json j;
  j["positions"] = report.js.size();
  j["js_threshold"] = report.js_threshold;
  j["threshold_unit"] = report.threshold_in_bits ? "bits" : "nats";
  j["high_divergence_count"] = report.high_divergence.size();
  j["ccdf"] = {{"thresholds_nats", report.ccdf_thresholds}, {"fraction_above", report.ccdf}};
  j["topk_overlap"] = {{"k", report.k_list},
                       {"all", real_array(report.topk_overlap_all)},
                       {"high_divergence", real_array(report.topk_overlap_high)}};
  j["tail_promotion"] = {{"base_prob_below", report.tail_thresholds}, {"fraction", report.tail_promotion}};
  return j.dump(2) + "\n";
}

void write_text_file(const std::filesystem::path& path, std::string_view text) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) fail(ErrorCode::kIo, "cannot write " + path.string());
  out.write(text.data(), static_cast<std::streamsize>(text.size()));
  if (!out) fail(ErrorCode::kIo, "write failed for " + path.string());
}

std::string read_text_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail(ErrorCode::kIo, "cannot read " + path.string());
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

}  // namespace rlrt
