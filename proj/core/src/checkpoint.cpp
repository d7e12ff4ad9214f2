// Copyright 2026 The nqs-prune Authors
// SPDX-License-Identifier: Apache-2.0

#include "nqs/checkpoint.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <sstream>

#include "nqs/error.hpp"

namespace nqs {

namespace {

constexpr char kMagic[4] = {'N', 'Q', 'S', 'P'};

std::uint64_t fnv1a(const char* data, std::size_t size) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (std::size_t i = 0; i < size; ++i) {
    h ^= static_cast<unsigned char>(data[i]);
    h *= 0x100000001b3ULL;
  }
  return h;
}

template <typename T>
void put(std::string& out, T value) {
  static_assert(std::is_unsigned_v<T>);
  for (std::size_t i = 0; i < sizeof(T); ++i) out.push_back(static_cast<char>((value >> (8 * i)) & 0xff));
}

void put_string(std::string& out, const std::string& s) {
  put<std::uint32_t>(out, static_cast<std::uint32_t>(s.size()));
  out += s;
}

class Reader {
 public:
  explicit Reader(const std::string& bytes) : bytes_(bytes) {}

  template <typename T>
  T get() {
    need(sizeof(T));
    T value = 0;
    for (std::size_t i = 0; i < sizeof(T); ++i)
      value |= static_cast<T>(static_cast<unsigned char>(bytes_[pos_ + i])) << (8 * i);
    pos_ += sizeof(T);
    return value;
  }

  std::string get_string() {
    const auto len = get<std::uint32_t>();
    need(len);
    std::string s = bytes_.substr(pos_, len);
    pos_ += len;
    return s;
  }

  std::string_view take(std::size_t n) {
    need(n);
    std::string_view view(bytes_.data() + pos_, n);
    pos_ += n;
    return view;
  }

  std::size_t position() const { return pos_; }

 private:
  void need(std::size_t n) const {
    if (pos_ + n > bytes_.size()) throw CheckpointError("checkpoint truncated");
  }

  const std::string& bytes_;
  std::size_t pos_ = 0;
};

}  // namespace

Checkpoint Checkpoint::of(const MaskedAnsatz& ansatz, std::uint64_t config_hash, std::uint64_t iteration,
                          RngStream rng) {
  Checkpoint c;
  c.architecture = ansatz.architecture().descriptor();
  c.lattice = describe(ansatz.architecture().lattice());
  c.config_hash = config_hash;
  c.iteration = iteration;
  c.rng = rng;
  c.theta.assign(ansatz.parameters().begin(), ansatz.parameters().end());
  c.mask = ansatz.mask();
  return c;
}

MaskedAnsatz Checkpoint::ansatz() const {
  return MaskedAnsatz(ArchitectureSpec::from_descriptors(architecture, lattice), theta, mask);
}

std::string encode_checkpoint(const Checkpoint& c) {
  NQS_EXPECT(c.theta.size() == c.mask.size(), "parameter and mask lengths differ");
  std::string out(kMagic, 4);
  put<std::uint32_t>(out, kCheckpointVersion);
  put_string(out, c.architecture);
  put_string(out, c.lattice);
  put<std::uint64_t>(out, c.theta.size());
  put<std::uint64_t>(out, c.mask.ones());
  put<std::uint64_t>(out, c.config_hash);
  put<std::uint64_t>(out, c.iteration);
  put<std::uint64_t>(out, c.rng.key());
  put<std::uint64_t>(out, c.rng.counter());
  for (double v : c.theta) put<std::uint64_t>(out, std::bit_cast<std::uint64_t>(v));
  for (std::uint8_t b : c.mask.pack()) out.push_back(static_cast<char>(b));
  put<std::uint64_t>(out, fnv1a(out.data(), out.size()));
  return out;
}

Checkpoint decode_checkpoint(const std::string& bytes) {
  Reader in(bytes);
  if (in.take(4) != std::string_view(kMagic, 4)) throw CheckpointError("not a checkpoint (bad magic)");
  const auto version = in.get<std::uint32_t>();
  if (version != kCheckpointVersion) throw CheckpointError("unsupported checkpoint version " + std::to_string(version));
  Checkpoint c;
  c.architecture = in.get_string();
  c.lattice = in.get_string();
  const auto n = in.get<std::uint64_t>();
  const auto ones = in.get<std::uint64_t>();
  c.config_hash = in.get<std::uint64_t>();
  c.iteration = in.get<std::uint64_t>();
  const auto key = in.get<std::uint64_t>();
  const auto counter = in.get<std::uint64_t>();
  c.rng = RngStream(key, counter);
  if (n > bytes.size()) throw CheckpointError("checkpoint truncated");
  c.theta.resize(n);
  for (auto& v : c.theta) v = std::bit_cast<double>(in.get<std::uint64_t>());
  const std::string_view packed = in.take((n + 7) / 8);
  const std::size_t body = in.position();
  const auto checksum = in.get<std::uint64_t>();
  if (checksum != fnv1a(bytes.data(), body)) throw CheckpointError("checkpoint checksum mismatch");
  if (in.position() != bytes.size()) throw CheckpointError("trailing bytes after checkpoint");
  c.mask = Mask::unpack(std::span(reinterpret_cast<const std::uint8_t*>(packed.data()), packed.size()), n);
  if (c.mask.ones() != ones) throw CheckpointError("mask population does not match header");
  return c;
}

void write_checkpoint(const std::filesystem::path& path, const Checkpoint& checkpoint) {
  const std::string bytes = encode_checkpoint(checkpoint);
  std::filesystem::path tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw CheckpointError("cannot write " + tmp.string());
    out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
    out.flush();
    if (!out) throw CheckpointError("short write to " + tmp.string());
  }
  std::filesystem::rename(tmp, path);
}

Checkpoint read_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw CheckpointError("missing checkpoint " + path.string());
  std::ostringstream buffer;
  buffer << in.rdbuf();
  try {
    return decode_checkpoint(buffer.str());
  } catch (const CheckpointError& e) {
    throw CheckpointError(path.string() + ": " + e.what());
  }
}

}  // namespace nqs
