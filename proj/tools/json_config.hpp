#pragma once

#include <istream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

namespace afirl::cli {

// Reads flags from a JSON object. Keys name long flags without the dashes.
// Top-level keys go to the root app when it owns the flag and otherwise to the
// subcommand being run; an object keyed by a subcommand name scopes its keys
// to that subcommand. Lists become repeated values.
class JsonConfig : public CLI::Config {
 public:
  explicit JsonConfig(const CLI::App* root) : root_(root) {}

  std::string to_config(const CLI::App*, bool, bool, std::string) const override {
    throw CLI::ConfigError("writing JSON config files is not supported");
  }

  std::vector<CLI::ConfigItem> from_config(std::istream& input) const override {
    nlohmann::json doc;
    try {
      doc = nlohmann::json::parse(input);
    } catch (const nlohmann::json::exception& e) {
      throw CLI::ConfigError(std::string("config is not valid JSON: ") + e.what());
    }
    if (!doc.is_object()) throw CLI::ConfigError("config must be a JSON object");

    std::vector<std::string> active;
    for (const auto* sub : root_->get_subcommands()) active.push_back(sub->get_name());

    std::vector<CLI::ConfigItem> items;
    for (const auto& [key, value] : doc.items()) {
      if (value.is_object()) {
        if (root_->get_subcommand_no_throw(key) == nullptr)
          throw CLI::ConfigError("config section '" + key + "' is not a subcommand");
        for (const auto& [name, inner] : value.items()) items.push_back(item({key}, name, inner));
        continue;
      }
      const bool rootFlag = root_->get_option_no_throw("--" + key) != nullptr;
      items.push_back(item(rootFlag ? std::vector<std::string>{} : active, key, value));
    }
    return items;
  }

 private:
  static std::string scalar(const std::string& key, const nlohmann::json& v) {
    if (v.is_string()) return v.get<std::string>();
    if (v.is_boolean()) return v.get<bool>() ? "true" : "false";
    if (v.is_number()) return v.dump();
    throw CLI::ConfigError("config value for '" + key + "' must be a string, number, boolean or list of those");
  }

  static CLI::ConfigItem item(std::vector<std::string> parents, const std::string& name, const nlohmann::json& v) {
    CLI::ConfigItem out;
    out.parents = std::move(parents);
    out.name = name;
    if (v.is_array()) {
      for (const auto& e : v) out.inputs.push_back(scalar(name, e));
    } else {
      out.inputs.push_back(scalar(name, v));
    }
    return out;
  }

  const CLI::App* root_;
};

}  // namespace afirl::cli
