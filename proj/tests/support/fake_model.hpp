// SPDX-License-Identifier: Apache-2.0
// Protocol test double for the external model server.
#pragma once

#include <string>
#include <string_view>

#include "json.hpp"

namespace vulnrisk::testing {

// Modes: "fixed" answers a fixed legal vector, "echo-av" derives AV from the
// description, "illegal" answers "Critical" for AV, "error" answers an error
// object, "wrong-id" answers a different id, "silent" never answers.
inline std::string fake_model_response(std::string_view line, std::string_view mode) {
    nlohmann::json request;
    try {
        request = nlohmann::json::parse(line);
    } catch (const nlohmann::json::parse_error&) {
        return R"({"id":null,"error":"malformed request"})";
    }
    const auto id = request.value("id", std::string{});
    if (mode == "error") return nlohmann::json{{"id", id}, {"error", "model failure"}}.dump();
    nlohmann::json labels{{"AV", "NETWORK"}, {"AC", "LOW"}, {"Au", "NONE"}, {"C", "PARTIAL"}, {"I", "PARTIAL"}, {"A", "PARTIAL"}};
    if (mode == "illegal") labels["AV"] = "Critical";
    if (mode == "echo-av") {
        const auto desc = request.value("description", std::string{});
        labels["AV"] = desc.find("local") != std::string::npos ? "L" : "N";
    }
    nlohmann::json confidences;
    for (const auto& [key, value] : labels.items()) confidences[key] = 0.75;
    return nlohmann::json{{"id", mode == "wrong-id" ? id + "-other" : id}, {"labels", labels}, {"confidences", confidences}}
        .dump();
}

}  // namespace vulnrisk::testing
