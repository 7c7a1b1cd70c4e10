#include "rlrt/checkpoint.hpp"

#include <array>
#include <bit>
#include <cstring>
#include <fstream>

#include "rlrt/error.hpp"

namespace rlrt {

static_assert(std::endian::native == std::endian::little, "binary formats assume a little-endian host");

namespace {

constexpr std::array<char, 8> kPolicyMagic = {'R', 'L', 'R', 'T', 'P', 'O', 'L', '1'};
constexpr std::array<char, 8> kAdamMagic = {'R', 'L', 'R', 'T', 'A', 'D', 'M', '1'};
constexpr std::uint32_t kFormatVersion = 1;

class Writer {
 public:
  explicit Writer(const std::filesystem::path& path) : path_(path), out_(path, std::ios::binary) {
    if (!out_) fail(ErrorCode::kIo, "cannot open " + path.string() + " for writing");
  }
  template <typename T>
  void put(const T& value) {
    out_.write(reinterpret_cast<const char*>(&value), sizeof(T));
  }
  void put_doubles(std::span<const double> xs) {
    out_.write(reinterpret_cast<const char*>(xs.data()), static_cast<std::streamsize>(xs.size() * sizeof(double)));
  }
  void finish() {
    out_.flush();
    if (!out_) fail(ErrorCode::kIo, "write failed for " + path_.string());
  }

 private:
  std::filesystem::path path_;
  std::ofstream out_;
};

class Reader {
 public:
  explicit Reader(const std::filesystem::path& path) : path_(path), in_(path, std::ios::binary) {
    if (!in_) fail(ErrorCode::kIo, "cannot open " + path.string());
  }
  template <typename T>
  T get() {
    T value{};
    in_.read(reinterpret_cast<char*>(&value), sizeof(T));
    if (!in_) fail(ErrorCode::kIo, "truncated file " + path_.string());
    return value;
  }
  void get_doubles(std::span<double> xs) {
    in_.read(reinterpret_cast<char*>(xs.data()), static_cast<std::streamsize>(xs.size() * sizeof(double)));
    if (!in_) fail(ErrorCode::kIo, "truncated file " + path_.string());
  }
  void expect_magic(const std::array<char, 8>& magic) {
    const auto got = get<std::array<char, 8>>();
    if (got != magic) fail(ErrorCode::kIo, "bad magic in " + path_.string());
  }

 private:
  std::filesystem::path path_;
  std::ifstream in_;
};

}  // namespace

void save_policy(const std::filesystem::path& path, const PolicyParams& params) {
  const PolicyDims& d = params.dims();
  Writer w(path);
  w.put(kPolicyMagic);
  w.put(kFormatVersion);
  for (int x : {d.vocab_size, d.horizon, d.prompt_arity, d.window, d.embed_dim, d.hidden_dim}) {
    w.put(static_cast<std::uint32_t>(x));
  }
  w.put(static_cast<std::uint64_t>(params.seed()));
  w.put(static_cast<std::uint64_t>(params.version()));
  w.put(static_cast<std::uint64_t>(params.values().size()));
  w.put_doubles(params.values());
  w.finish();
}

PolicyParams load_policy(const std::filesystem::path& path) {
  Reader r(path);
  r.expect_magic(kPolicyMagic);
  if (r.get<std::uint32_t>() != kFormatVersion) fail(ErrorCode::kIo, "unsupported policy format in " + path.string());
  PolicyDims d;
  d.vocab_size = static_cast<int>(r.get<std::uint32_t>());
  d.horizon = static_cast<int>(r.get<std::uint32_t>());
  d.prompt_arity = static_cast<int>(r.get<std::uint32_t>());
  d.window = static_cast<int>(r.get<std::uint32_t>());
  d.embed_dim = static_cast<int>(r.get<std::uint32_t>());
  d.hidden_dim = static_cast<int>(r.get<std::uint32_t>());
  const auto seed = r.get<std::uint64_t>();
  const auto version = r.get<std::uint64_t>();
  const auto count = r.get<std::uint64_t>();
  if (count != d.num_params()) fail(ErrorCode::kIo, "parameter count does not match dims in " + path.string());
  PolicyParams p(d, seed);
  std::vector<double> values(count);
  r.get_doubles(values);
  p.update([&](std::span<double> theta) { std::copy(values.begin(), values.end(), theta.begin()); });
  p.set_version(version);
  return p;
}

void save_optimizer(const std::filesystem::path& path, const AdamState& adam) {
  Writer w(path);
  w.put(kAdamMagic);
  w.put(static_cast<std::uint64_t>(adam.steps));
  w.put(static_cast<std::uint64_t>(adam.m.size()));
  w.put_doubles(adam.m);
  w.put_doubles(adam.v);
  w.finish();
}

AdamState load_optimizer(const std::filesystem::path& path) {
  Reader r(path);
  r.expect_magic(kAdamMagic);
  AdamState a;
  a.steps = r.get<std::uint64_t>();
  const auto n = r.get<std::uint64_t>();
  a.m.resize(n);
  a.v.resize(n);
  r.get_doubles(a.m);
  r.get_doubles(a.v);
  return a;
}

}  // namespace rlrt
