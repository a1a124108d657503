// SPDX-License-Identifier: Apache-2.0
#pragma once

// Binary checkpoint:
//
//   magic "DCNCKPT1" | u32 version | u64 config length | config text (UTF-8, key = value)
//   | u32 parameter count | per parameter: u32 name length, name, u32 rank,
//   u64 dims[rank], f32 values[prod(dims)]
//
// All integers and floats are little-endian. The config block records the
// model settings, label names, vocabulary size and the SHA-256 of the
// vocabulary and descriptor files the model was trained with.

#include <array>
#include <bit>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include <openssl/evp.h>

#include "descnet/model/dual_channel.hpp"

namespace descnet {

inline std::string sha256_hex(std::string_view bytes) {
  std::array<unsigned char, EVP_MAX_MD_SIZE> digest{};
  unsigned int len = 0;
  if (EVP_Digest(bytes.data(), bytes.size(), digest.data(), &len, EVP_sha256(), nullptr) != 1) {
    throw Error("sha256 failed", 1);
  }
  static const char* hex = "0123456789abcdef";
  std::string out;
  for (unsigned int i = 0; i < len; ++i) {
    out.push_back(hex[digest[i] >> 4]);
    out.push_back(hex[digest[i] & 15]);
  }
  return out;
}

inline constexpr char kCheckpointMagic[8] = {'D', 'C', 'N', 'C', 'K', 'P', 'T', '1'};
inline constexpr std::uint32_t kCheckpointVersion = 1;

/// What a checkpoint carries besides the parameters.
struct CheckpointInfo {
  ModelConfig config;
  std::vector<std::string> labels;
  std::size_t vocab_size = 0;
  std::string vocabulary_sha256;
  std::string descriptors_sha256;
  std::size_t epoch = 0;
  double validation_metric = 0;

  KeyValues to_key_values() const {
    KeyValues kv = config.to_key_values();
    std::string joined;
    for (std::size_t i = 0; i < labels.size(); ++i) joined += (i ? "|" : "") + labels[i];
    kv.emplace_back("labels", joined);
    kv.emplace_back("vocab_size", std::to_string(vocab_size));
    kv.emplace_back("vocabulary_sha256", vocabulary_sha256);
    kv.emplace_back("descriptors_sha256", descriptors_sha256);
    kv.emplace_back("epoch", std::to_string(epoch));
    kv.emplace_back("validation_metric", detail::format_real(validation_metric));
    return kv;
  }

  static CheckpointInfo from_key_values(const KeyValues& kv) {
    CheckpointInfo info;
    for (const auto& [k, v] : kv) {
      if (info.config.apply(k, v)) continue;
      if (k == "labels") {
        std::size_t start = 0;
        while (start <= v.size()) {
          const auto bar = v.find('|', start);
          info.labels.push_back(v.substr(start, bar == std::string::npos ? std::string::npos : bar - start));
          if (bar == std::string::npos) break;
          start = bar + 1;
        }
      } else if (k == "vocab_size") {
        info.vocab_size = detail::parse_size(k, v);
      } else if (k == "vocabulary_sha256") {
        info.vocabulary_sha256 = v;
      } else if (k == "descriptors_sha256") {
        info.descriptors_sha256 = v;
      } else if (k == "epoch") {
        info.epoch = detail::parse_size(k, v);
      } else if (k == "validation_metric") {
        info.validation_metric = detail::parse_real(k, v);
      } else {
        throw CompatibilityError("checkpoint config has unknown key '" + k + "'");
      }
    }
    return info;
  }
};

struct StoredParameter {
  std::string name;
  numerics::Shape shape;
  std::vector<float> values;
};

struct CheckpointData {
  CheckpointInfo info;
  std::vector<StoredParameter> parameters;
};

namespace detail {

template <class U>
void put_le(std::string& out, U value) {
  static_assert(std::is_trivially_copyable_v<U>);
  std::array<char, sizeof(U)> bytes;
  std::memcpy(bytes.data(), &value, sizeof(U));
  if constexpr (std::endian::native == std::endian::big) std::reverse(bytes.begin(), bytes.end());
  out.append(bytes.data(), bytes.size());
}

class ByteReader {
 public:
  ByteReader(std::string_view bytes, std::string origin) : bytes_(bytes), origin_(std::move(origin)) {}

  template <class U>
  U get() {
    std::array<char, sizeof(U)> raw;
    take(raw.data(), raw.size());
    if constexpr (std::endian::native == std::endian::big) std::reverse(raw.begin(), raw.end());
    U value;
    std::memcpy(&value, raw.data(), sizeof(U));
    return value;
  }

  std::string get_string(std::size_t n) {
    std::string s(n, '\0');
    take(s.data(), n);
    return s;
  }

  bool at_end() const { return pos_ == bytes_.size(); }

 private:
  void take(char* dst, std::size_t n) {
    if (n > bytes_.size() - pos_) throw CompatibilityError(origin_ + ": checkpoint is truncated");
    std::memcpy(dst, bytes_.data() + pos_, n);
    pos_ += n;
  }

  std::string_view bytes_;
  std::string origin_;
  std::size_t pos_ = 0;
};

inline std::string read_file_bytes(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw InputError("cannot open '" + path + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

}  // namespace detail

template <std::floating_point T>
std::string serialize_checkpoint(DualChannelModel<T>& model, const CheckpointInfo& info) {
  std::string out(kCheckpointMagic, sizeof kCheckpointMagic);
  detail::put_le<std::uint32_t>(out, kCheckpointVersion);
  const std::string config = format_key_values(info.to_key_values());
  detail::put_le<std::uint64_t>(out, config.size());
  out += config;
  const auto params = model.params();
  detail::put_le<std::uint32_t>(out, static_cast<std::uint32_t>(params.size()));
  for (const auto* p : params) {
    detail::put_le<std::uint32_t>(out, static_cast<std::uint32_t>(p->name.size()));
    out += p->name;
    detail::put_le<std::uint32_t>(out, static_cast<std::uint32_t>(p->value.rank()));
    for (auto d : p->value.shape()) detail::put_le<std::uint64_t>(out, d);
    for (T v : p->value.values()) detail::put_le<float>(out, static_cast<float>(v));
  }
  return out;
}

template <std::floating_point T>
void save_checkpoint(DualChannelModel<T>& model, const CheckpointInfo& info, const std::string& path) {
  const std::string bytes = serialize_checkpoint(model, info);
  std::ofstream out(path, std::ios::binary);
  if (!out) throw InputError("cannot write checkpoint '" + path + "'");
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
}

inline CheckpointData parse_checkpoint(std::string_view bytes, const std::string& origin) {
  detail::ByteReader in(bytes, origin);
  if (in.get_string(sizeof kCheckpointMagic) != std::string(kCheckpointMagic, sizeof kCheckpointMagic)) {
    throw CompatibilityError(origin + ": not a checkpoint file");
  }
  const auto version = in.get<std::uint32_t>();
  if (version != kCheckpointVersion) {
    throw CompatibilityError(origin + ": unsupported checkpoint version " + std::to_string(version));
  }
  const auto config_len = in.get<std::uint64_t>();
  if (config_len > bytes.size()) throw CompatibilityError(origin + ": checkpoint is truncated");
  CheckpointData data;
  data.info = CheckpointInfo::from_key_values(parse_key_values(in.get_string(config_len), origin));
  const auto count = in.get<std::uint32_t>();
  for (std::uint32_t i = 0; i < count; ++i) {
    StoredParameter p;
    p.name = in.get_string(in.get<std::uint32_t>());
    const auto rank = in.get<std::uint32_t>();
    if (rank == 0 || rank > 8) throw CompatibilityError(origin + ": parameter '" + p.name + "' has invalid rank");
    std::size_t n = 1;
    for (std::uint32_t r = 0; r < rank; ++r) {
      p.shape.push_back(in.get<std::uint64_t>());
      n *= p.shape.back();
    }
    if (n == 0 || n > bytes.size()) throw CompatibilityError(origin + ": checkpoint is truncated");
    p.values.resize(n);
    for (auto& v : p.values) v = in.get<float>();
    data.parameters.push_back(std::move(p));
  }
  if (!in.at_end()) throw CompatibilityError(origin + ": trailing bytes after last parameter");
  return data;
}

inline CheckpointData read_checkpoint(const std::string& path) {
  return parse_checkpoint(detail::read_file_bytes(path), path);
}

/// Copies stored values into `model`; names and shapes must match exactly.
template <std::floating_point T>
void restore_parameters(DualChannelModel<T>& model, const CheckpointData& data) {
  const auto params = model.params();
  if (params.size() != data.parameters.size()) {
    throw CompatibilityError("checkpoint has " + std::to_string(data.parameters.size()) + " parameters, model expects " +
                             std::to_string(params.size()));
  }
  for (std::size_t i = 0; i < params.size(); ++i) {
    const auto& stored = data.parameters[i];
    if (stored.name != params[i]->name) {
      throw CompatibilityError("checkpoint parameter '" + stored.name + "' where '" + params[i]->name + "' was expected");
    }
    if (stored.shape != params[i]->value.shape()) {
      throw CompatibilityError("shape mismatch for '" + stored.name + "': checkpoint " + numerics::shape_string(stored.shape) +
                               ", model " + numerics::shape_string(params[i]->value.shape()));
    }
  }
  for (std::size_t i = 0; i < params.size(); ++i) {
    auto& value = params[i]->value;
    const auto& stored = data.parameters[i].values;
    for (std::size_t k = 0; k < stored.size(); ++k) value[k] = static_cast<T>(stored[k]);
    params[i]->reset_state();
  }
}

/// Builds a model from the checkpoint's own config and restores it.
template <std::floating_point T>
DualChannelModel<T> load_checkpoint_model(const CheckpointData& data) {
  DualChannelModel<T> model(data.info.config, data.info.vocab_size, data.info.labels.size());
  restore_parameters(model, data);
  return model;
}

}  // namespace descnet
