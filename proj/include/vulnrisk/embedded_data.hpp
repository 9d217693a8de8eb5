// SPDX-License-Identifier: Apache-2.0
// Versioned data files compiled into the library (sources live in data/).
#pragma once

#include <string_view>

namespace vulnrisk::data {

std::string_view stopwords_v1() noexcept;
std::string_view taxonomy_v1() noexcept;
std::string_view taxonomy_rules_v1() noexcept;

}  // namespace vulnrisk::data
