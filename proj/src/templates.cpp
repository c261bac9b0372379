#include "socsim/templates.hpp"

#include <cstdlib>

#include "socsim/domain.hpp"
#include "socsim/errors.hpp"
#include "socsim/hash.hpp"

namespace socsim {

std::string PromptTemplates::hash() const {
  std::string all;
  for (const auto* part : {&agent_system, &agent_user, &repair, &enrich_system, &enrich_user}) {
    all += std::to_string(part->size());
    all += ':';
    all += *part;
  }
  return sha256_hex(all);
}

PromptTemplates PromptTemplates::load(const std::filesystem::path& dir) {
  auto read = [&](const char* name) {
    try {
      return read_file(dir / name);
    } catch (const IoError&) {
      throw ConfigError("missing prompt template " + (dir / name).string());
    }
  };
  PromptTemplates t;
  t.agent_system = read("agent_system.txt");
  t.agent_user = read("agent_user.txt");
  t.repair = read("repair.txt");
  t.enrich_system = read("enrich_system.txt");
  t.enrich_user = read("enrich_user.txt");
  return t;
}

std::filesystem::path PromptTemplates::default_dir() {
  if (const char* env = std::getenv("SOCSIM_TEMPLATE_DIR"); env && *env) return env;
  return SOCSIM_DEFAULT_TEMPLATE_DIR;
}

const PromptTemplates& PromptTemplates::defaults() {
  static const PromptTemplates templates = load(default_dir());
  return templates;
}

std::string render(std::string_view tmpl, const std::map<std::string, std::string>& values) {
  std::string out;
  out.reserve(tmpl.size() * 2);
  std::size_t pos = 0;
  while (pos < tmpl.size()) {
    const auto open = tmpl.find("{{", pos);
    if (open == std::string_view::npos) {
      out.append(tmpl.substr(pos));
      break;
    }
    const auto close = tmpl.find("}}", open + 2);
    if (close == std::string_view::npos) {
      throw ArgumentError("unterminated placeholder in template");
    }
    out.append(tmpl.substr(pos, open - pos));
    const std::string name(tmpl.substr(open + 2, close - open - 2));
    const auto it = values.find(name);
    if (it == values.end()) throw ArgumentError("no value for template placeholder '" + name + "'");
    out.append(it->second);
    pos = close + 2;
  }
  return out;
}

}  // namespace socsim
