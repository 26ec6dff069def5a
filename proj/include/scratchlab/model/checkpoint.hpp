#pragma once

// Checkpoint layout, all integers 64-bit little-endian:
//   "SCRLAB01"
//   u64 length, config record (key=value lines, UTF-8)
//   per parameter: u64 name length, name, u64 rank, rank x u64 dims,
//                  float32 little-endian row-major data
// Extra config keys (vocabulary description etc.) ride along in the record.

#include <bit>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <sstream>
#include <string>
#include <utility>

#include "scratchlab/errors.hpp"
#include "scratchlab/kv.hpp"
#include "scratchlab/model/config.hpp"
#include "scratchlab/model/parameters.hpp"

namespace scratchlab::model {

static_assert(std::endian::native == std::endian::little, "checkpoint I/O assumes a little-endian host");

inline constexpr char kCheckpointMagic[8] = {'S', 'C', 'R', 'L', 'A', 'B', '0', '1'};

struct Checkpoint {
  ModelConfig config;
  KeyValues extra;  // every record key not consumed by ModelConfig
  ParameterStore<float> params;
};

namespace detail {

inline void put_u64(std::string& out, std::uint64_t v) {
  char b[8];
  std::memcpy(b, &v, 8);
  out.append(b, 8);
}

class Reader {
 public:
  explicit Reader(std::string data) : data_(std::move(data)) {}

  std::uint64_t u64() {
    std::uint64_t v;
    std::memcpy(&v, take(8), 8);
    return v;
  }
  const char* take(std::size_t n) {
    if (n > data_.size() - pos_) throw FormatError("checkpoint truncated");
    const char* p = data_.data() + pos_;
    pos_ += n;
    return p;
  }
  bool done() const { return pos_ == data_.size(); }

 private:
  std::string data_;
  std::size_t pos_ = 0;
};

}  // namespace detail

inline std::string serialize_checkpoint(const ParameterStore<float>& params, const ModelConfig& cfg,
                                        const KeyValues& extra = {}) {
  check_store_matches(params, cfg);
  KeyValues record = extra;
  cfg.store(record, "model.");
  const std::string text = format_kv(record);
  std::string out(kCheckpointMagic, 8);
  detail::put_u64(out, text.size());
  out += text;
  for (std::size_t i = 0; i < params.size(); ++i) {
    const auto& name = params.name(i);
    const auto& t = params[i];
    detail::put_u64(out, name.size());
    out += name;
    detail::put_u64(out, t.rank());
    for (auto d : t.shape()) detail::put_u64(out, d);
    out.append(reinterpret_cast<const char*>(t.ptr()), t.numel() * sizeof(float));
  }
  return out;
}

inline Checkpoint deserialize_checkpoint(std::string bytes) {
  detail::Reader r(std::move(bytes));
  if (std::memcmp(r.take(8), kCheckpointMagic, 8) != 0) throw FormatError("bad checkpoint magic");
  const std::uint64_t len = r.u64();
  const std::string text(r.take(len), len);
  KeyValues record = parse_kv(text);

  Checkpoint ck;
  ck.config.apply(record, "model.");
  ck.config.validate();
  for (const auto& [k, v] : record) {
    if (k.rfind("model.", 0) != 0) ck.extra.emplace(k, v);
  }
  const ParameterStore<float> ref = init_model<float>(ck.config, 0);
  for (std::size_t i = 0; i < ref.size(); ++i) {
    const std::uint64_t nlen = r.u64();
    if (nlen > 4096) throw FormatError("checkpoint parameter name too long");
    std::string name(r.take(nlen), nlen);
    if (name != ref.name(i)) throw FormatError("unexpected parameter " + name + ", expected " + ref.name(i));
    const std::uint64_t rank = r.u64();
    if (rank != ref[i].rank()) throw FormatError("rank mismatch for " + name);
    Shape shape(rank);
    for (auto& d : shape) d = r.u64();
    if (shape != ref[i].shape()) throw FormatError("shape mismatch for " + name);
    Tensor<float> t(shape);
    std::memcpy(t.ptr(), r.take(t.numel() * sizeof(float)), t.numel() * sizeof(float));
    ck.params.add(name, std::move(t));
  }
  if (!r.done()) throw FormatError("trailing bytes after checkpoint");
  return ck;
}

inline void save_checkpoint(const ParameterStore<float>& params, const ModelConfig& cfg, const std::string& path,
                            const KeyValues& extra = {}) {
  const std::string bytes = serialize_checkpoint(params, cfg, extra);
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw FormatError("cannot open " + path + " for writing");
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw FormatError("failed writing " + path);
}

inline Checkpoint load_checkpoint(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw FormatError("cannot open " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return deserialize_checkpoint(ss.str());
}

}  // namespace scratchlab::model
