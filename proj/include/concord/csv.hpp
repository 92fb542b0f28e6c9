#pragma once
// Tiny CSV emission helpers. All numeric fields go through format_double so
// identical inputs always produce byte-identical files.

#include <string>
#include <string_view>
#include <vector>

#include "concord/detail/util.hpp"

namespace concord {

inline std::string csv_escape(std::string_view field) {
    if (field.find_first_of(",\"\n") == std::string_view::npos) return std::string(field);
    std::string out = "\"";
    for (char c : field) {
        if (c == '"') out += "\"\"";
        else out.push_back(c);
    }
    out += "\"";
    return out;
}

inline std::string csv_row(const std::vector<std::string>& fields) {
    std::string out;
    for (size_t i = 0; i < fields.size(); ++i) {
        if (i) out.push_back(',');
        out += csv_escape(fields[i]);
    }
    out.push_back('\n');
    return out;
}

} // namespace concord
