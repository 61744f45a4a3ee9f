// Checkpoint container, little-endian binary:
//
//   magic "GZACKPT\0" | u32 format version | u64 input_dim | u64 hidden_dim
//   | u64 n | n x f64 params | u64 adam step | u64 m | m x f64 first moment
//   | m x f64 second moment | u64 len | len bytes provenance JSON
//   | u64 FNV-1a of everything before it

#include <bit>
#include <cstring>
#include <fstream>
#include <iomanip>
#include <sstream>

#include "gazeadapt/errors.hpp"
#include "gazeadapt/model.hpp"

namespace gazeadapt {
namespace {

static_assert(std::endian::native == std::endian::little, "checkpoint I/O assumes little-endian");

constexpr char kMagic[8] = {'G', 'Z', 'A', 'C', 'K', 'P', 'T', '\0'};
constexpr std::uint32_t kFormatVersion = 1;

std::uint64_t fnv1a(const char* data, std::size_t n, std::uint64_t h = 0xcbf29ce484222325ULL) {
  for (std::size_t i = 0; i < n; ++i) {
    h ^= static_cast<unsigned char>(data[i]);
    h *= 0x100000001b3ULL;
  }
  return h;
}

class Writer {
 public:
  template <typename T>
  void put(const T& v) {
    raw(reinterpret_cast<const char*>(&v), sizeof(T));
  }
  void put_doubles(const std::vector<double>& v) { put_doubles(std::span<const double>(v)); }
  void put_doubles(std::span<const double> v) {
    raw(reinterpret_cast<const char*>(v.data()), v.size() * sizeof(double));
  }
  void raw(const char* p, std::size_t n) { buf_.append(p, n); }
  const std::string& bytes() const { return buf_; }

 private:
  std::string buf_;
};

class Reader {
 public:
  explicit Reader(std::string bytes) : buf_(std::move(bytes)) {}

  template <typename T>
  T get() {
    T v;
    take(reinterpret_cast<char*>(&v), sizeof(T));
    return v;
  }
  void get_doubles(std::span<double> out) {
    take(reinterpret_cast<char*>(out.data()), out.size() * sizeof(double));
  }
  std::string get_string(std::size_t n) {
    need(n);
    std::string s = buf_.substr(pos_, n);
    pos_ += n;
    return s;
  }
  std::size_t pos() const { return pos_; }
  std::size_t remaining() const { return buf_.size() - pos_; }
  const std::string& bytes() const { return buf_; }

 private:
  void need(std::size_t n) const {
    if (remaining() < n) throw FormatError("checkpoint truncated");
  }
  void take(char* out, std::size_t n) {
    need(n);
    std::memcpy(out, buf_.data() + pos_, n);
    pos_ += n;
  }

  std::string buf_;
  std::size_t pos_ = 0;
};

}  // namespace

void save_checkpoint(const std::filesystem::path& path, const Checkpoint& ck) {
  Writer w;
  w.raw(kMagic, sizeof(kMagic));
  w.put(kFormatVersion);
  w.put<std::uint64_t>(ck.params.arch().input_dim);
  w.put<std::uint64_t>(ck.params.arch().hidden_dim);
  w.put<std::uint64_t>(ck.params.size());
  w.put_doubles(ck.params.values());
  w.put<std::uint64_t>(ck.optimizer.step);
  w.put<std::uint64_t>(ck.optimizer.m.size());
  w.put_doubles(ck.optimizer.m);
  w.put_doubles(ck.optimizer.v);
  w.put<std::uint64_t>(ck.provenance.size());
  w.raw(ck.provenance.data(), ck.provenance.size());
  const std::uint64_t sum = fnv1a(w.bytes().data(), w.bytes().size());
  w.put(sum);

  if (path.has_parent_path()) {
    std::error_code ec;
    std::filesystem::create_directories(path.parent_path(), ec);
  }
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot write checkpoint " + path.string());
  out.write(w.bytes().data(), static_cast<std::streamsize>(w.bytes().size()));
  if (!out) throw IoError("failed writing checkpoint " + path.string());
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open checkpoint " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  Reader r(ss.str());

  if (r.get_string(sizeof(kMagic)) != std::string(kMagic, sizeof(kMagic)))
    throw FormatError("not a checkpoint file: " + path.string());
  const auto version = r.get<std::uint32_t>();
  if (version != kFormatVersion)
    throw FormatError("unsupported checkpoint version " + std::to_string(version));

  Architecture arch;
  arch.input_dim = r.get<std::uint64_t>();
  arch.hidden_dim = r.get<std::uint64_t>();
  const auto n = r.get<std::uint64_t>();
  if (arch.input_dim == 0 || arch.hidden_dim == 0 || arch.input_dim > (1u << 20) ||
      arch.hidden_dim > (1u << 20) || n != arch.param_count())
    throw FormatError("checkpoint header inconsistent");
  if (r.remaining() < n * sizeof(double)) throw FormatError("checkpoint truncated");

  Checkpoint ck{EstimatorParams(arch), AdamState(), {}};
  r.get_doubles(ck.params.values());
  ck.optimizer.step = r.get<std::uint64_t>();
  const auto m = r.get<std::uint64_t>();
  if (m != 0 && m != n) throw FormatError("optimizer state size inconsistent");
  if (r.remaining() < 2 * m * sizeof(double)) throw FormatError("checkpoint truncated");
  ck.optimizer.m.resize(m);
  ck.optimizer.v.resize(m);
  r.get_doubles(ck.optimizer.m);
  r.get_doubles(ck.optimizer.v);
  const auto len = r.get<std::uint64_t>();
  ck.provenance = r.get_string(len);

  const std::size_t body = r.pos();
  const auto sum = r.get<std::uint64_t>();
  if (sum != fnv1a(r.bytes().data(), body)) throw FormatError("checkpoint checksum mismatch");
  if (r.remaining() != 0) throw FormatError("trailing bytes after checkpoint");
  return ck;
}

Checkpoint load_checkpoint(const std::filesystem::path& path, const Architecture& expected) {
  Checkpoint ck = load_checkpoint(path);
  if (!(ck.params.arch() == expected))
    throw ArchitectureMismatch(
        "checkpoint has dims " + std::to_string(ck.params.arch().input_dim) + "x" +
        std::to_string(ck.params.arch().hidden_dim) + ", expected " +
        std::to_string(expected.input_dim) + "x" + std::to_string(expected.hidden_dim));
  return ck;
}

std::string file_digest(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  const std::string bytes = ss.str();
  std::ostringstream hex;
  hex << std::hex << std::setw(16) << std::setfill('0') << fnv1a(bytes.data(), bytes.size());
  return hex.str();
}

}  // namespace gazeadapt
