// Copyright Contributors to the simc3d project
// SPDX-License-Identifier: Apache-2.0

#include "simc3d/checkpoint.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <sstream>

#include "simc3d/dataio.hpp"

namespace simc3d {
namespace {

constexpr char kMagic[8] = {'S', 'I', 'M', 'C', '3', 'D', 'C', 'K'};
constexpr const char* kVelocityPrefix = "optim/velocity/";

template <typename U>
void put(std::string& out, U value) {
  static_assert(std::endian::native == std::endian::little, "little-endian host required");
  char buf[sizeof(U)];
  std::memcpy(buf, &value, sizeof(U));
  out.append(buf, sizeof(U));
}

class Reader {
 public:
  explicit Reader(std::string bytes) : bytes_(std::move(bytes)) {}

  template <typename U>
  U get(const char* what) {
    need(sizeof(U), what);
    U v;
    std::memcpy(&v, bytes_.data() + pos_, sizeof(U));
    pos_ += sizeof(U);
    return v;
  }

  std::string take(std::size_t n, const char* what) {
    need(n, what);
    std::string s = bytes_.substr(pos_, n);
    pos_ += n;
    return s;
  }

  std::size_t pos() const { return pos_; }
  bool done() const { return pos_ == bytes_.size(); }

 private:
  void need(std::size_t n, const char* what) const {
    if (bytes_.size() - pos_ < n)
      throw FormatError("checkpoint: truncated while reading " + std::string(what) +
                            " at byte " + std::to_string(pos_) + " (need " + std::to_string(n) +
                            ", have " + std::to_string(bytes_.size() - pos_) + ")",
                        pos_);
  }

  std::string bytes_;
  std::size_t pos_ = 0;
};

void put_entry(std::string& out, const std::string& name, const Matrix<float>& m) {
  put<std::uint32_t>(out, static_cast<std::uint32_t>(name.size()));
  out += name;
  put<std::uint32_t>(out, static_cast<std::uint32_t>(m.rows()));
  put<std::uint32_t>(out, static_cast<std::uint32_t>(m.cols()));
  out.append(reinterpret_cast<const char*>(m.data()),
             static_cast<std::size_t>(m.size()) * sizeof(float));
}

}  // namespace

void save_checkpoint(const Checkpoint& ckpt, const std::filesystem::path& path) {
  std::string out(kMagic, sizeof kMagic);
  put<std::uint32_t>(out, kCheckpointVersion);
  put<std::int64_t>(out, ckpt.step);
  std::string meta;
  for (const auto& [k, v] : ckpt.metadata) {
    if (k.find_first_of("=\n") != std::string::npos || v.find('\n') != std::string::npos)
      throw std::invalid_argument("checkpoint metadata cannot contain '=' in keys or newlines");
    meta += k + "=" + v + "\n";
  }
  put<std::uint32_t>(out, static_cast<std::uint32_t>(meta.size()));
  out += meta;
  put<std::uint32_t>(out, static_cast<std::uint32_t>(ckpt.params.size() + ckpt.velocity.size()));
  for (std::size_t i = 0; i < ckpt.params.size(); ++i)
    put_entry(out, ckpt.params.name(i), ckpt.params.value(i));
  for (std::size_t i = 0; i < ckpt.velocity.size(); ++i)
    put_entry(out, kVelocityPrefix + ckpt.velocity.name(i), ckpt.velocity.value(i));

  std::ofstream f(path, std::ios::binary | std::ios::trunc);
  if (!f) throw std::runtime_error("cannot open " + path.string() + " for writing");
  f.write(out.data(), static_cast<std::streamsize>(out.size()));
  if (!f) throw std::runtime_error("write failed: " + path.string());
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw std::runtime_error("cannot open " + path.string());
  std::ostringstream ss;
  ss << f.rdbuf();
  Reader r(ss.str());

  if (r.take(sizeof kMagic, "magic") != std::string(kMagic, sizeof kMagic))
    throw FormatError("checkpoint: bad magic (not a simc3d checkpoint)", 0);
  const auto version = r.get<std::uint32_t>("version");
  if (version != kCheckpointVersion)
    throw FormatError("checkpoint: version " + std::to_string(version) +
                          " is not supported (this build reads version " +
                          std::to_string(kCheckpointVersion) + ")",
                      8);
  Checkpoint ckpt;
  ckpt.step = r.get<std::int64_t>("step");
  const auto meta_len = r.get<std::uint32_t>("metadata length");
  for (const KeyValueRecord& rec : parse_key_value_records(r.take(meta_len, "metadata")))
    for (const auto& [k, v] : rec.fields) ckpt.metadata[k] = v;

  const auto count = r.get<std::uint32_t>("entry count");
  for (std::uint32_t e = 0; e < count; ++e) {
    const auto name_len = r.get<std::uint32_t>("name length");
    if (name_len > 4096) throw FormatError("checkpoint: implausible name length", r.pos());
    std::string name = r.take(name_len, "name");
    const auto rows = r.get<std::uint32_t>("rows");
    const auto cols = r.get<std::uint32_t>("cols");
    const std::size_t n = static_cast<std::size_t>(rows) * cols;
    const std::string payload = r.take(n * sizeof(float), "payload");
    Matrix<float> m(rows, cols);
    std::memcpy(m.data(), payload.data(), payload.size());
    if (name.rfind(kVelocityPrefix, 0) == 0)
      ckpt.velocity.add(name.substr(std::strlen(kVelocityPrefix)), std::move(m));
    else
      ckpt.params.add(std::move(name), std::move(m));
  }
  if (!r.done()) throw FormatError("checkpoint: trailing bytes after last entry", r.pos());
  return ckpt;
}

}  // namespace simc3d
