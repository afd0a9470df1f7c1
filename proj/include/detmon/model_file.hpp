#pragma once

#include <filesystem>
#include <string>

#include <nlohmann/json.hpp>

#include "detmon/nn/params.hpp"

// Envelope shared by monitor and baseline model files:
//   magic "DETMONMF" (8 bytes)
//   header length (uint32 LE) + header JSON (compact, sorted keys) with
//     "kind", "format_version", "meta" (model-specific) and "parameters"
//     (name + shape of every blob, in order)
//   parameter blobs, float32 little-endian, in header order
namespace detmon::model_file {

inline constexpr char kMagic[8] = {'D', 'E', 'T', 'M', 'O', 'N', 'M', 'F'};
inline constexpr int kFormatVersion = 1;

struct Envelope {
  std::string kind;
  nlohmann::json meta;
  nn::ParameterSet<float> params;
};

std::string serialize(const Envelope& env);
void save(const std::filesystem::path& path, const Envelope& env);

// Parses the header and blobs; blob layout is returned as recorded in the
// file. Callers rebuild their architecture from `meta` and check it with
// `require_layout`.
Envelope deserialize(const std::string& bytes);
Envelope load(const std::filesystem::path& path);

// Throws FormatError unless `loaded` has exactly the names and shapes of
// `expected`.
void require_layout(const nn::ParameterSet<float>& expected, const nn::ParameterSet<float>& loaded);

}  // namespace detmon::model_file
