#pragma once

#include <bit>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "vfscan/errors.hpp"
#include "vfscan/nn.hpp"

namespace vfscan {

// Layout: 8-byte magic, u32 format version, u64 header length, JSON header,
// then for every tensor its values, first moments and second moments as
// little-endian IEEE-754 doubles.
inline constexpr char kCheckpointMagic[8] = {'V', 'F', 'S', 'C', 'K', 'P', 'T', '\0'};
inline constexpr std::uint32_t kCheckpointVersion = 1;

struct StoredTensor {
  std::size_t rows = 0;
  std::size_t cols = 0;
  nn::Vec value, m, v;
};

struct CheckpointData {
  nlohmann::json meta;
  std::uint64_t adam_steps = 0;
  std::vector<std::string> order;
  std::map<std::string, StoredTensor> tensors;
};

namespace detail {

inline void put_u64(std::string& out, std::uint64_t x) {
  for (int i = 0; i < 8; ++i) out.push_back(static_cast<char>((x >> (8 * i)) & 0xff));
}

inline void put_u32(std::string& out, std::uint32_t x) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<char>((x >> (8 * i)) & 0xff));
}

inline std::uint64_t get_uint(const std::string& in, std::size_t& pos, int bytes) {
  require(pos + static_cast<std::size_t>(bytes) <= in.size(), ErrorCode::CheckpointFormat, "checkpoint is truncated");
  std::uint64_t x = 0;
  for (int i = 0; i < bytes; ++i) x |= static_cast<std::uint64_t>(static_cast<unsigned char>(in[pos + i])) << (8 * i);
  pos += static_cast<std::size_t>(bytes);
  return x;
}

inline void put_doubles(std::string& out, const nn::Vec& xs) {
  for (double x : xs) put_u64(out, std::bit_cast<std::uint64_t>(x));
}

inline nn::Vec get_doubles(const std::string& in, std::size_t& pos, std::size_t n) {
  nn::Vec xs(n);
  for (auto& x : xs) x = std::bit_cast<double>(get_uint(in, pos, 8));
  return xs;
}

}  // namespace detail

inline std::string serialize_checkpoint(const nn::ParamSet& params, const nlohmann::json& meta, std::uint64_t adam_steps) {
  nlohmann::json header = {{"format", "vfscan-checkpoint"}, {"version", kCheckpointVersion}, {"meta", meta}, {"adam_steps", adam_steps}};
  nlohmann::json tensors = nlohmann::json::array();
  for (const auto* p : params) tensors.push_back({{"name", p->name}, {"rows", p->rows}, {"cols", p->cols}});
  header["tensors"] = std::move(tensors);
  const std::string text = header.dump();

  std::string out(kCheckpointMagic, sizeof kCheckpointMagic);
  detail::put_u32(out, kCheckpointVersion);
  detail::put_u64(out, text.size());
  out += text;
  for (const auto* p : params) {
    detail::put_doubles(out, p->value);
    detail::put_doubles(out, p->m);
    detail::put_doubles(out, p->v);
  }
  return out;
}

inline CheckpointData deserialize_checkpoint(const std::string& bytes) {
  require(bytes.size() >= sizeof kCheckpointMagic + 12 && std::memcmp(bytes.data(), kCheckpointMagic, sizeof kCheckpointMagic) == 0,
          ErrorCode::CheckpointFormat, "not a checkpoint file");
  std::size_t pos = sizeof kCheckpointMagic;
  const auto version = detail::get_uint(bytes, pos, 4);
  require(version == kCheckpointVersion, ErrorCode::CheckpointFormat, "unsupported checkpoint version " + std::to_string(version));
  const auto header_len = detail::get_uint(bytes, pos, 8);
  require(pos + header_len <= bytes.size(), ErrorCode::CheckpointFormat, "checkpoint header is truncated");
  nlohmann::json header;
  try {
    header = nlohmann::json::parse(bytes.substr(pos, header_len));
  } catch (const nlohmann::json::exception& e) {
    fail(ErrorCode::CheckpointFormat, std::string("bad checkpoint header: ") + e.what());
  }
  pos += header_len;

  CheckpointData data;
  data.meta = header.value("meta", nlohmann::json::object());
  data.adam_steps = header.value("adam_steps", std::uint64_t{0});
  for (const auto& t : header.at("tensors")) {
    StoredTensor st;
    st.rows = t.at("rows").get<std::size_t>();
    st.cols = t.at("cols").get<std::size_t>();
    const auto n = st.rows * st.cols;
    st.value = detail::get_doubles(bytes, pos, n);
    st.m = detail::get_doubles(bytes, pos, n);
    st.v = detail::get_doubles(bytes, pos, n);
    const auto name = t.at("name").get<std::string>();
    data.order.push_back(name);
    data.tensors.emplace(name, std::move(st));
  }
  require(pos == bytes.size(), ErrorCode::CheckpointFormat, "trailing bytes after checkpoint payload");
  return data;
}

/// Copies stored tensors into `params`, matching by name and shape.
inline void load_params(const CheckpointData& data, const nn::ParamSet& params) {
  for (auto* p : params) {
    auto it = data.tensors.find(p->name);
    require(it != data.tensors.end(), ErrorCode::CheckpointFormat, "checkpoint lacks tensor " + p->name);
    require(it->second.rows == p->rows && it->second.cols == p->cols, ErrorCode::CheckpointFormat, "shape mismatch for tensor " + p->name);
    p->value = it->second.value;
    p->m = it->second.m;
    p->v = it->second.v;
  }
  require(data.tensors.size() == params.size(), ErrorCode::CheckpointFormat, "checkpoint holds tensors the model does not know");
}

inline void write_binary_file(const std::filesystem::path& path, const std::string& bytes) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  require(static_cast<bool>(out), ErrorCode::Io, "cannot write " + path.string());
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  require(static_cast<bool>(out), ErrorCode::Io, "failed writing " + path.string());
}

inline std::string read_binary_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  require(static_cast<bool>(in), ErrorCode::Io, "cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

/// FNV-1a 64-bit digest, hex encoded; used to fingerprint artifacts.
inline std::string digest_hex(const std::string& bytes) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char ch : bytes) {
    h ^= ch;
    h *= 0x100000001b3ULL;
  }
  static constexpr char hex[] = "0123456789abcdef";
  std::string out(16, '0');
  for (int i = 15; i >= 0; --i, h >>= 4) out[static_cast<std::size_t>(i)] = hex[h & 0xf];
  return out;
}

}  // namespace vfscan
