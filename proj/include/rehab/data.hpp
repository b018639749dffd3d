#pragma once

#include <string>
#include <string_view>

namespace rehab {

// Default data files (grammar, message table, prompt template, landmark
// mapping) are compiled in from data/ at build time. Runtime overrides load
// from disk through read_text_file.
std::string_view embedded_data(std::string_view name);

// Throws FileUnreadable.
std::string read_text_file(const std::string& path);

}  // namespace rehab
