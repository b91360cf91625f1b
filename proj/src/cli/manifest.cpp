#include "manifest.hpp"

#include <fstream>
#include <memory>

#include <openssl/evp.h>

#include "xmrmap/error.hpp"

namespace xmrmap::cli {

namespace fs = std::filesystem;

std::string sha256_file(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw InputError("cannot read " + path.string());
  std::unique_ptr<EVP_MD_CTX, decltype(&EVP_MD_CTX_free)> ctx(EVP_MD_CTX_new(), EVP_MD_CTX_free);
  if (!ctx || EVP_DigestInit_ex(ctx.get(), EVP_sha256(), nullptr) != 1) {
    throw InvariantError("sha256 initialisation failed");
  }
  char buf[1 << 16];
  while (in) {
    in.read(buf, sizeof buf);
    if (in.gcount() > 0) EVP_DigestUpdate(ctx.get(), buf, static_cast<std::size_t>(in.gcount()));
  }
  unsigned char md[EVP_MAX_MD_SIZE];
  unsigned int len = 0;
  EVP_DigestFinal_ex(ctx.get(), md, &len);
  static constexpr char hex[] = "0123456789abcdef";
  std::string out;
  for (unsigned i = 0; i < len; ++i) {
    out += hex[md[i] >> 4];
    out += hex[md[i] & 0xf];
  }
  return out;
}

InputDigest digest_input(const fs::path& path) { return {path.string(), sha256_file(path)}; }

void write_manifest(const fs::path& out_dir, const RunManifest& m) {
  nlohmann::ordered_json j;
  j["tool"] = "xmrmap";
  j["version"] = m.version;
  j["command"] = m.command;
  j["seed"] = m.seed;
  j["parameters"] = m.parameters;
  auto& inputs = j["inputs"] = nlohmann::ordered_json::array();
  for (const auto& in : m.inputs) inputs.push_back({{"path", in.path}, {"sha256", in.sha256}});
  j["outputs"] = m.outputs;
  std::ofstream out(out_dir / kManifestName, std::ios::binary);
  if (!out) throw InputError("cannot write manifest in " + out_dir.string());
  out << j.dump(2) << '\n';
}

RunManifest read_manifest(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw InputError("cannot read manifest " + path.string());
  auto j = nlohmann::ordered_json::parse(in, nullptr, false);
  if (j.is_discarded() || !j.is_object() || j.value("tool", "") != "xmrmap") {
    throw ProtocolError(path.string() + " is not an xmrmap run manifest");
  }
  try {
    RunManifest m;
    m.command = j.at("command").get<std::string>();
    m.version = j.at("version").get<std::string>();
    m.seed = j.at("seed").get<std::uint64_t>();
    m.parameters = j.at("parameters");
    for (const auto& in : j.at("inputs")) {
      m.inputs.push_back({in.at("path").get<std::string>(), in.at("sha256").get<std::string>()});
    }
    m.outputs = j.at("outputs").get<std::vector<std::string>>();
    return m;
  } catch (const nlohmann::json::exception& e) {
    throw ProtocolError("malformed manifest " + path.string() + ": " + e.what());
  }
}

void verify_inputs(const RunManifest& m) {
  for (const auto& in : m.inputs) {
    if (sha256_file(in.path) != in.sha256) {
      throw InputError("input " + in.path + " changed since the manifest was written");
    }
  }
}

}  // namespace xmrmap::cli
