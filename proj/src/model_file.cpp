#include "detmon/model_file.hpp"

#include <cstring>
#include <fstream>
#include <sstream>

#include "detmon/binary_io.hpp"

namespace detmon::model_file {

using nlohmann::json;

std::string serialize(const Envelope& env) {
  json params = json::array();
  for (const auto& info : env.params.infos()) params.push_back({{"name", info.name}, {"shape", info.shape},
                                                               {"non_negative", info.non_negative}});
  json header = {{"kind", env.kind}, {"format_version", kFormatVersion}, {"meta", env.meta}, {"parameters", params}};
  const std::string text = header.dump();
  std::ostringstream out(std::ios::binary);
  out.write(kMagic, sizeof(kMagic));
  io::write_le(out, static_cast<std::uint32_t>(text.size()));
  out.write(text.data(), static_cast<std::streamsize>(text.size()));
  io::write_f32_blob(out, env.params.values());
  return std::move(out).str();
}

void save(const std::filesystem::path& path, const Envelope& env) {
  const auto bytes = serialize(env);
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw DataError("cannot open " + path.string() + " for writing");
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw DataError("write failed for " + path.string());
}

Envelope deserialize(const std::string& bytes) {
  std::istringstream in(bytes, std::ios::binary);
  io::CountingReader r(in);
  char magic[sizeof(kMagic)];
  if (r.read_some(magic, sizeof(magic)) != sizeof(magic) || std::memcmp(magic, kMagic, sizeof(magic)) != 0)
    throw FormatError("bad magic: not a detmon model file");
  const auto len = r.read<std::uint32_t>("model header length");
  std::string text(len, '\0');
  r.read_exact(text.data(), len, "model header");
  Envelope env;
  try {
    const json header = json::parse(text);
    if (header.at("format_version").get<int>() != kFormatVersion)
      throw FormatError("unsupported model format version");
    env.kind = header.at("kind").get<std::string>();
    env.meta = header.at("meta");
    for (const auto& p : header.at("parameters"))
      env.params.add(p.at("name").get<std::string>(), p.at("shape").get<std::vector<std::int64_t>>(),
                     p.at("non_negative").get<bool>());
  } catch (const json::exception& e) {
    throw FormatError(std::string("malformed model header: ") + e.what());
  }
  io::read_f32_blob(r, env.params.values(), "parameter blob");
  if (!r.at_eof()) throw FormatError("trailing bytes after the last parameter blob");
  return env;
}

Envelope load(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open model file " + path.string());
  std::ostringstream buf;
  buf << in.rdbuf();
  return deserialize(buf.str());
}

void require_layout(const nn::ParameterSet<float>& expected, const nn::ParameterSet<float>& loaded) {
  const auto& a = expected.infos();
  const auto& b = loaded.infos();
  if (a.size() != b.size())
    throw FormatError("model file has " + std::to_string(b.size()) + " parameter blobs, architecture expects " +
                      std::to_string(a.size()));
  for (std::size_t i = 0; i < a.size(); ++i) {
    if (a[i].name != b[i].name || a[i].shape != b[i].shape)
      throw FormatError("model parameter '" + b[i].name + "' does not match the architecture (expected '" +
                        a[i].name + "')");
  }
}

}  // namespace detmon::model_file
