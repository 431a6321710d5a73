#include "otfwi/checkpoint.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <sstream>

#include "otfwi/error.hpp"
#include "otfwi/rng.hpp"

namespace otfwi {

namespace {

constexpr char kMagic[8] = {'O', 'T', 'F', 'W', 'I', 'C', 'K', 'P'};

template <class T>
void put(std::string& out, T v) {
  char b[sizeof(T)];
  std::memcpy(b, &v, sizeof(T));
  out.append(b, sizeof(T));
}

class Reader {
 public:
  explicit Reader(const std::string& b) : b_(b) {}
  template <class T>
  T get() {
    if (pos_ + sizeof(T) > b_.size()) throw IoError("checkpoint truncated");
    T v;
    std::memcpy(&v, b_.data() + pos_, sizeof(T));
    pos_ += sizeof(T);
    return v;
  }
  std::size_t pos() const { return pos_; }

 private:
  const std::string& b_;
  std::size_t pos_ = 0;
};

}  // namespace

std::string serialize_checkpoint(const ScoreNet& net, const FieldScaler& scaler) {
  static_assert(std::endian::native == std::endian::little);
  std::string out(kMagic, 8);
  put<std::uint32_t>(out, kCheckpointVersion);
  const auto& c = net.config();
  for (int v : {c.nx, c.nz, c.channels, c.embed_dim}) put<std::int32_t>(out, v);
  put<double>(out, scaler.v_min);
  put<double>(out, scaler.v_max);
  const auto& s = net.schedule();
  put<std::int32_t>(out, s.N);
  put<std::uint32_t>(out, 0);  // linear
  put<double>(out, s.beta_start);
  put<double>(out, s.beta_end);
  put<std::uint64_t>(out, net.param_count());
  for (double p : net.params()) {
    const float f = static_cast<float>(p);
    if (static_cast<double>(f) != p) throw InvalidArgument("network weights are not float32-representable");
    put<float>(out, f);
  }
  put<std::uint64_t>(out, fnv1a64(out));
  return out;
}

Prior parse_checkpoint(const std::string& bytes) {
  if (bytes.size() < 8 || std::memcmp(bytes.data(), kMagic, 8) != 0) throw IoError("not a checkpoint (bad magic)");
  if (bytes.size() < 16) throw IoError("checkpoint truncated");
  Reader r(bytes);
  r.get<std::uint64_t>();
  const auto version = r.get<std::uint32_t>();
  if (version != kCheckpointVersion) throw IoError("unsupported checkpoint version " + std::to_string(version));
  ScoreNetConfig c;
  c.nx = r.get<std::int32_t>();
  c.nz = r.get<std::int32_t>();
  c.channels = r.get<std::int32_t>();
  c.embed_dim = r.get<std::int32_t>();
  const double lo = r.get<double>(), hi = r.get<double>();
  const int N = r.get<std::int32_t>();
  if (r.get<std::uint32_t>() != 0) throw IoError("unknown schedule kind in checkpoint");
  const double b0 = r.get<double>(), b1 = r.get<double>();
  const auto n = r.get<std::uint64_t>();
  if (n > (bytes.size() - r.pos()) / 4) throw IoError("checkpoint truncated");
  std::vector<double> params(n);
  for (auto& p : params) p = r.get<float>();
  const std::size_t body = r.pos();
  const auto sum = r.get<std::uint64_t>();
  if (r.pos() != bytes.size()) throw IoError("trailing bytes after checkpoint");
  if (sum != fnv1a64(std::string_view(bytes.data(), body))) throw IoError("checkpoint checksum mismatch");
  try {
    return Prior{ScoreNet(c, make_schedule(N, b0, b1), std::move(params)), FieldScaler(lo, hi)};
  } catch (const InvalidArgument& e) {
    throw IoError(std::string("inconsistent checkpoint: ") + e.what());
  }
}

void save_checkpoint(const std::filesystem::path& path, const ScoreNet& net, const FieldScaler& scaler) {
  const std::string b = serialize_checkpoint(net, scaler);
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot write " + path.string());
  out.write(b.data(), static_cast<std::streamsize>(b.size()));
  if (!out) throw IoError("write failed for " + path.string());
}

Prior load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string());
  std::ostringstream s;
  s << in.rdbuf();
  return parse_checkpoint(s.str());
}

}  // namespace otfwi
