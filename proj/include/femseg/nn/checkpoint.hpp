#pragma once

#include <zlib.h>

#include <cstring>
#include <filesystem>
#include <fstream>
#include <map>
#include <span>
#include <string>
#include <vector>

#include "femseg/nn/unet.hpp"

// Versioned binary model container: fixed header (magic, version, network
// configuration, optimizer step, batch-norm initialization flag), then named
// float64 blobs for every parameter, its Adam moments, and every running
// statistic, closed by a CRC-32 of all preceding bytes. Loading rebuilds the
// model from the stored configuration and validates every blob shape.

namespace femseg {

namespace ckpt_detail {

constexpr char kMagic[8] = {'F', 'E', 'M', 'S', 'E', 'G', 'C', 'K'};
constexpr std::uint32_t kVersion = 1;

inline void put_u32(std::vector<std::uint8_t>& b, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) b.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
}
inline void put_u64(std::vector<std::uint8_t>& b, std::uint64_t v) {
  for (int i = 0; i < 8; ++i) b.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
}
inline void put_f64(std::vector<std::uint8_t>& b, double d) {
  std::uint64_t u;
  std::memcpy(&u, &d, sizeof u);
  put_u64(b, u);
}

struct Reader {
  std::span<const std::uint8_t> b;
  std::size_t pos = 0;

  void need(std::size_t n) const {
    if (pos + n > b.size()) raise(ErrorKind::Format, "checkpoint truncated");
  }
  std::uint32_t u32() {
    need(4);
    std::uint32_t v = 0;
    for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(b[pos + i]) << (8 * i);
    pos += 4;
    return v;
  }
  std::uint64_t u64() {
    need(8);
    std::uint64_t v = 0;
    for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(b[pos + i]) << (8 * i);
    pos += 8;
    return v;
  }
  double f64() {
    const std::uint64_t u = u64();
    double d;
    std::memcpy(&d, &u, sizeof d);
    return d;
  }
  std::string str(std::size_t n) {
    need(n);
    std::string s(reinterpret_cast<const char*>(b.data() + pos), n);
    pos += n;
    return s;
  }
};

inline void put_blob(std::vector<std::uint8_t>& out, const std::string& name,
                     const std::vector<double>& data) {
  put_u32(out, static_cast<std::uint32_t>(name.size()));
  out.insert(out.end(), name.begin(), name.end());
  put_u64(out, data.size());
  for (double d : data) put_f64(out, d);
}

template <typename Fn>
inline void for_each_blob(UNetModel& m, Fn&& fn) {
  for (ParamTensor* p : m.parameters()) {
    fn(p->name, p->value);
    fn(p->name + ".adam_m", p->adam_m);
    fn(p->name + ".adam_v", p->adam_v);
  }
  for (BatchNorm3d* bn : m.batchnorms()) {
    const std::string prefix = bn->gain.name.substr(0, bn->gain.name.size() - 5);  // strip ".gain"
    fn(prefix + ".running_mean", bn->running_mean);
    fn(prefix + ".running_var", bn->running_var);
  }
}

}  // namespace ckpt_detail

inline std::vector<std::uint8_t> serialize_checkpoint(UNetModel& m) {
  using namespace ckpt_detail;
  std::vector<std::uint8_t> out;
  out.insert(out.end(), kMagic, kMagic + 8);
  put_u32(out, kVersion);
  put_u32(out, static_cast<std::uint32_t>(m.config.levels));
  put_u32(out, static_cast<std::uint32_t>(m.config.base_features));
  put_u32(out, static_cast<std::uint32_t>(m.config.in_channels));
  put_u32(out, static_cast<std::uint32_t>(m.config.out_classes));
  put_u64(out, m.adam_t);
  bool stats = true;
  for (BatchNorm3d* bn : m.batchnorms()) stats = stats && bn->stats_initialized;
  put_u32(out, stats ? 1u : 0u);

  std::uint32_t count = 0;
  for_each_blob(m, [&](const std::string&, const std::vector<double>&) { ++count; });
  put_u32(out, count);
  for_each_blob(m, [&](const std::string& name, const std::vector<double>& data) {
    put_blob(out, name, data);
  });

  const auto crc = static_cast<std::uint32_t>(
      crc32(crc32(0L, Z_NULL, 0), out.data(), static_cast<uInt>(out.size())));
  put_u32(out, crc);
  return out;
}

inline UNetModel deserialize_checkpoint(std::span<const std::uint8_t> bytes) {
  using namespace ckpt_detail;
  if (bytes.size() < 12 + 16 + 8 + 4 + 4 + 4)
    raise(ErrorKind::Format, "checkpoint truncated");
  if (std::memcmp(bytes.data(), kMagic, 8) != 0)
    raise(ErrorKind::Format, "checkpoint magic mismatch");

  const auto crc_stored = [&] {
    std::uint32_t v = 0;
    for (int i = 0; i < 4; ++i)
      v |= static_cast<std::uint32_t>(bytes[bytes.size() - 4 + static_cast<std::size_t>(i)])
           << (8 * i);
    return v;
  }();
  const auto crc_actual = static_cast<std::uint32_t>(
      crc32(crc32(0L, Z_NULL, 0), bytes.data(), static_cast<uInt>(bytes.size() - 4)));
  if (crc_stored != crc_actual)
    raise(ErrorKind::Format, "checkpoint checksum mismatch: file is corrupt");

  Reader r{bytes.subspan(8, bytes.size() - 12), 0};
  const std::uint32_t version = r.u32();
  if (version != kVersion)
    raise(ErrorKind::Compatibility, "checkpoint version " + std::to_string(version) +
                                        " unsupported (expected " + std::to_string(kVersion) +
                                        ")");
  UNetConfig cfg;
  cfg.levels = r.u32();
  cfg.base_features = r.u32();
  cfg.in_channels = r.u32();
  cfg.out_classes = r.u32();
  cfg.validate();
  UNetModel m = make_unet(cfg, 0);
  m.adam_t = r.u64();
  const bool stats = r.u32() != 0;

  std::map<std::string, std::vector<double>*> slots;
  for_each_blob(m, [&](const std::string& name, std::vector<double>& data) {
    slots[name] = &data;
  });

  const std::uint32_t count = r.u32();
  if (count != slots.size())
    raise(ErrorKind::Compatibility, "checkpoint carries " + std::to_string(count) +
                                        " blobs, model expects " + std::to_string(slots.size()));
  for (std::uint32_t i = 0; i < count; ++i) {
    const std::uint32_t name_len = r.u32();
    if (name_len > 4096) raise(ErrorKind::Format, "checkpoint blob name too long");
    const std::string name = r.str(name_len);
    const std::uint64_t n = r.u64();
    auto it = slots.find(name);
    if (it == slots.end())
      raise(ErrorKind::Compatibility, "unexpected checkpoint blob \"" + name + "\"");
    if (it->second->size() != n)
      raise(ErrorKind::Compatibility, "blob \"" + name + "\" has " + std::to_string(n) +
                                          " values, model expects " +
                                          std::to_string(it->second->size()));
    for (std::uint64_t j = 0; j < n; ++j) (*it->second)[static_cast<std::size_t>(j)] = r.f64();
    slots.erase(it);
  }
  if (!slots.empty())
    raise(ErrorKind::Compatibility, "checkpoint missing blob \"" + slots.begin()->first + "\"");

  for (BatchNorm3d* bn : m.batchnorms()) bn->stats_initialized = stats;
  return m;
}

inline void save_checkpoint(const std::filesystem::path& path, UNetModel& m) {
  const auto bytes = serialize_checkpoint(m);
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) raise(ErrorKind::Processing, "cannot write " + path.string());
  out.write(reinterpret_cast<const char*>(bytes.data()),
            static_cast<std::streamsize>(bytes.size()));
  if (!out) raise(ErrorKind::Processing, "short write to " + path.string());
}

inline UNetModel load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) raise(ErrorKind::Ingestion, "cannot open " + path.string());
  std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)),
                                  std::istreambuf_iterator<char>());
  return deserialize_checkpoint(bytes);
}

}  // namespace femseg
