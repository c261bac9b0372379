#pragma once

#include <filesystem>
#include <map>
#include <string>
#include <string_view>

namespace socsim {

/// Prompt templates read from a directory of text files. Placeholders are
/// written `{{name}}`.
struct PromptTemplates {
  std::string agent_system;   // agent_system.txt
  std::string agent_user;     // agent_user.txt
  std::string repair;         // repair.txt
  std::string enrich_system;  // enrich_system.txt
  std::string enrich_user;    // enrich_user.txt

  /// SHA-256 over every template, recorded in run manifests.
  std::string hash() const;

  static PromptTemplates load(const std::filesystem::path& dir);
  /// The directory shipped with the sources (overridable with
  /// SOCSIM_TEMPLATE_DIR in the environment).
  static std::filesystem::path default_dir();
  static const PromptTemplates& defaults();
};

/// Substitutes every `{{name}}`. Throws ArgumentError for a placeholder
/// without a value.
std::string render(std::string_view tmpl, const std::map<std::string, std::string>& values);

}  // namespace socsim
