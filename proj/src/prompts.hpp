#pragma once

#include <filesystem>
#include <map>
#include <string>

#include "common.hpp"

namespace metro {

// Named prompt templates with {placeholder} slots. Built-in defaults can be
// overridden per template by dropping <name>.txt into a prompts directory.
class PromptLibrary {
public:
    PromptLibrary() = default;
    explicit PromptLibrary(const std::filesystem::path& override_dir);

    const std::string& get(const std::string& name) const;
    std::string render(const std::string& name,
                       const std::map<std::string, std::string>& slots) const;

    static std::string substitute(const std::string& tmpl,
                                  const std::map<std::string, std::string>& slots);

private:
    std::map<std::string, std::string> overrides_;
};

}  // namespace metro
