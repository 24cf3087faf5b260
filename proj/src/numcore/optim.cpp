#include "hpgm/numcore/optim.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <iomanip>
#include <random>
#include <sstream>

namespace hpgm::nc {

Adam::Adam(ParameterSet params, AdamConfig config) : params_(std::move(params)), config_(config) {
  for (const auto& p : params_) {
    m_.emplace_back(p.tensor.size(), 0.0);
    v_.emplace_back(p.tensor.size(), 0.0);
  }
}

void Adam::step() {
  for (const auto& p : params_)
    if (!p.tensor.has_grad()) throw MissingGrad(p.name);
  ++steps_;
  const double bc1 = 1.0 - std::pow(config_.beta1, static_cast<double>(steps_));
  const double bc2 = 1.0 - std::pow(config_.beta2, static_cast<double>(steps_));
  for (std::size_t k = 0; k < params_.size(); ++k) {
    Tensor& t = params_[k].tensor;
    auto value = t.data();
    auto grad = t.grad();
    auto& m = m_[k];
    auto& v = v_[k];
    for (std::size_t i = 0; i < value.size(); ++i) {
      m[i] = config_.beta1 * m[i] + (1 - config_.beta1) * grad[i];
      v[i] = config_.beta2 * v[i] + (1 - config_.beta2) * grad[i] * grad[i];
      const double mhat = m[i] / bc1;
      const double vhat = v[i] / bc2;
      value[i] -= config_.lr * mhat / (std::sqrt(vhat) + config_.eps);
    }
    t.zero_grad();
  }
}

void Adam::zero_grad() {
  for (auto& p : params_) p.tensor.zero_grad();
}

Tensor init_normal(Shape shape, double mean, double stddev, std::uint64_t seed) {
  Tensor t(std::move(shape));
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> dist(mean, stddev);
  for (double& x : t.data()) x = dist(rng);
  return t;
}

std::uint64_t derive_seed(std::uint64_t base, std::string_view label) {
  std::uint64_t h = 1469598103934665603ULL ^ (base * 0x9E3779B97F4A7C15ULL);
  for (unsigned char ch : label) {
    h ^= ch;
    h *= 1099511628211ULL;
  }
  // splitmix64 finaliser
  h += 0x9E3779B97F4A7C15ULL;
  h = (h ^ (h >> 30)) * 0xBF58476D1CE4E5B9ULL;
  h = (h ^ (h >> 27)) * 0x94D049BB133111EBULL;
  return h ^ (h >> 31);
}

namespace {

template <typename T>
void put_le(std::string& out, T v) {
  static_assert(std::is_integral_v<T>);
  for (std::size_t i = 0; i < sizeof(T); ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xFF));
}

void put_f64(std::string& out, double d) { put_le(out, std::bit_cast<std::uint64_t>(d)); }

class Reader {
 public:
  explicit Reader(std::string_view bytes) : bytes_(bytes) {}

  template <typename T>
  T get() {
    need(sizeof(T));
    T v = 0;
    for (std::size_t i = 0; i < sizeof(T); ++i)
      v |= static_cast<T>(static_cast<unsigned char>(bytes_[pos_ + i])) << (8 * i);
    pos_ += sizeof(T);
    return v;
  }
  double get_f64() { return std::bit_cast<double>(get<std::uint64_t>()); }
  std::string_view take(std::size_t n) {
    need(n);
    auto s = bytes_.substr(pos_, n);
    pos_ += n;
    return s;
  }
  bool done() const { return pos_ == bytes_.size(); }

 private:
  void need(std::size_t n) const {
    if (pos_ + n > bytes_.size()) throw CheckpointError("checkpoint truncated");
  }
  std::string_view bytes_;
  std::size_t pos_ = 0;
};

}  // namespace

std::string encode_checkpoint(const ParameterSet& params) {
  std::string out(kCheckpointMagic, sizeof(kCheckpointMagic));
  put_le<std::uint32_t>(out, kCheckpointVersion);
  put_le<std::uint32_t>(out, static_cast<std::uint32_t>(params.size()));
  for (const auto& p : params) {
    put_le<std::uint32_t>(out, static_cast<std::uint32_t>(p.name.size()));
    out += p.name;
    put_le<std::uint32_t>(out, static_cast<std::uint32_t>(p.tensor.rank()));
    for (std::size_t d : p.tensor.shape()) put_le<std::uint64_t>(out, d);
    for (double v : p.tensor.data()) put_f64(out, v);
  }
  return out;
}

ParameterSet decode_checkpoint(std::string_view bytes) {
  Reader r(bytes);
  if (r.take(sizeof(kCheckpointMagic)) != std::string_view(kCheckpointMagic, sizeof(kCheckpointMagic)))
    throw CheckpointError("not a checkpoint (bad magic)");
  const auto version = r.get<std::uint32_t>();
  if (version != kCheckpointVersion)
    throw CheckpointError("unsupported checkpoint version " + std::to_string(version));
  const auto count = r.get<std::uint32_t>();
  ParameterSet out;
  for (std::uint32_t i = 0; i < count; ++i) {
    NamedTensor nt;
    nt.name = std::string(r.take(r.get<std::uint32_t>()));
    const auto rank = r.get<std::uint32_t>();
    Shape shape(rank);
    for (auto& d : shape) d = r.get<std::uint64_t>();
    std::vector<double> values(numel(shape));
    for (double& v : values) v = r.get_f64();
    nt.tensor = Tensor(std::move(shape), std::move(values));
    out.push_back(std::move(nt));
  }
  if (!r.done()) throw CheckpointError("trailing bytes after checkpoint records");
  return out;
}

void save_checkpoint(const std::filesystem::path& path, const ParameterSet& params) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw CheckpointError("cannot write " + path.string());
  const std::string bytes = encode_checkpoint(params);
  os.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
}

ParameterSet load_checkpoint(const std::filesystem::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw CheckpointError("cannot read " + path.string());
  std::ostringstream ss;
  ss << is.rdbuf();
  return decode_checkpoint(ss.str());
}

void assign_parameters(ParameterSet& target, const ParameterSet& source) {
  for (auto& t : target) {
    auto it = std::find_if(source.begin(), source.end(), [&](const NamedTensor& s) { return s.name == t.name; });
    if (it == source.end()) throw CheckpointError("checkpoint lacks parameter '" + t.name + "'");
    if (it->tensor.shape() != t.tensor.shape())
      throw CheckpointError("parameter '" + t.name + "' has shape " + to_string(it->tensor.shape()) +
                            ", expected " + to_string(t.tensor.shape()));
    std::copy(it->tensor.data().begin(), it->tensor.data().end(), t.tensor.data().begin());
  }
}

std::string checksum(const ParameterSet& params) {
  const std::string bytes = encode_checkpoint(params);
  std::uint64_t h = 1469598103934665603ULL;
  for (unsigned char ch : bytes) {
    h ^= ch;
    h *= 1099511628211ULL;
  }
  std::ostringstream os;
  os << std::hex << std::setw(16) << std::setfill('0') << h;
  return os.str();
}

}  // namespace hpgm::nc
