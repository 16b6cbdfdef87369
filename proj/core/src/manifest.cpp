#include "neurocat/manifest.hpp"

#include <openssl/evp.h>

#include <array>
#include <fmt/format.h>
#include <fstream>
#include "json.hpp"
#include <sstream>

#include "neurocat/errors.hpp"

namespace neurocat {

using json = nlohmann::ordered_json;

namespace {

class Sha256 {
 public:
  Sha256() : ctx_(EVP_MD_CTX_new()) {
    if (!ctx_ || EVP_DigestInit_ex(ctx_, EVP_sha256(), nullptr) != 1) throw Error("sha256: init failed");
  }
  ~Sha256() { EVP_MD_CTX_free(ctx_); }
  Sha256(const Sha256&) = delete;
  Sha256& operator=(const Sha256&) = delete;

  void update(const void* data, std::size_t n) { EVP_DigestUpdate(ctx_, data, n); }

  std::string hex() {
    std::array<unsigned char, EVP_MAX_MD_SIZE> md{};
    unsigned int len = 0;
    EVP_DigestFinal_ex(ctx_, md.data(), &len);
    std::string out;
    for (unsigned int i = 0; i < len; ++i) out += fmt::format("{:02x}", md[i]);
    return out;
  }

 private:
  EVP_MD_CTX* ctx_;
};

}  // namespace

std::string sha256_hex(std::string_view data) {
  Sha256 h;
  h.update(data.data(), data.size());
  return h.hex();
}

std::string sha256_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot open " + path.string());
  Sha256 h;
  std::array<char, 1 << 16> buf{};
  while (in) {
    in.read(buf.data(), buf.size());
    h.update(buf.data(), static_cast<std::size_t>(in.gcount()));
  }
  return h.hex();
}

std::string tool_version() { return NEUROCAT_VERSION; }

std::string RunManifest::run_digest() const {
  std::string material = "neurocat " + tool_version + "\n" + config_text + "\n";
  for (const auto& [role, digest] : inputs) material += role + "=" + digest + "\n";
  return sha256_hex(material);
}

std::string RunManifest::to_json() const {
  json j;
  j["tool_version"] = tool_version;
  j["run_digest"] = run_digest();
  j["config"] = config_text;
  j["inputs"] = json::object();
  for (const auto& [role, digest] : inputs) j["inputs"][role] = digest;
  j["stages"] = json::object();
  for (const auto& [name, s] : stages) {
    json st{{"backend", s.backend},
            {"prompt_template", s.prompt_template},
            {"neurons_in", s.neurons_in},
            {"eligible", s.eligible},
            {"failures", s.failures}};
    if (s.seconds) st["seconds"] = *s.seconds;
    st["artifacts"] = json::object();
    for (const auto& [file, digest] : s.artifacts) st["artifacts"][file] = digest;
    j["stages"][name] = std::move(st);
  }
  return j.dump(2) + "\n";
}

RunManifest RunManifest::from_json(std::string_view text) {
  RunManifest m;
  try {
    const auto j = json::parse(text);
    m.tool_version = j.at("tool_version").get<std::string>();
    m.config_text = j.at("config").get<std::string>();
    for (const auto& [role, digest] : j.at("inputs").items()) m.inputs[role] = digest.get<std::string>();
    for (const auto& [name, st] : j.at("stages").items()) {
      StageRecord s;
      s.backend = st.at("backend").get<std::string>();
      s.prompt_template = st.at("prompt_template").get<std::string>();
      s.neurons_in = st.at("neurons_in").get<std::size_t>();
      s.eligible = st.at("eligible").get<std::size_t>();
      s.failures = st.at("failures").get<std::size_t>();
      if (st.contains("seconds")) s.seconds = st["seconds"].get<double>();
      for (const auto& [file, digest] : st.at("artifacts").items()) s.artifacts[file] = digest.get<std::string>();
      m.stages[name] = std::move(s);
    }
  } catch (const json::exception& e) {
    throw ValidationError(std::string("manifest: ") + e.what());
  }
  return m;
}

RunManifest RunManifest::load_or_new(const std::filesystem::path& dir) {
  const auto path = dir / kManifestName;
  if (!std::filesystem::exists(path)) {
    RunManifest m;
    m.tool_version = neurocat::tool_version();
    return m;
  }
  std::ifstream in(path, std::ios::binary);
  std::ostringstream ss;
  ss << in.rdbuf();
  return from_json(ss.str());
}

void RunManifest::save(const std::filesystem::path& dir) const {
  std::filesystem::create_directories(dir);
  std::ofstream out(dir / kManifestName, std::ios::binary | std::ios::trunc);
  if (!out) throw Error("cannot write manifest in " + dir.string());
  out << to_json();
}

}  // namespace neurocat
