// SPDX-License-Identifier: Apache-2.0
// Command-line front end. main() forwards to run() so tests can drive the
// same code path in-process.
#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <map>
#include <string>
#include <vector>

namespace vulnrisk::cli {

/// Resolved settings. Precedence: built-in defaults, then the config file,
/// then VULNRISK_STORE for store_path, then command-line flags.
struct PipelineConfig {
    std::filesystem::path store_path = "vulnrisk-store";
    std::filesystem::path stop_word_list_path;  ///< empty selects the built-in list
    std::size_t max_tokens = 132;
    std::uint64_t split_seed = 42;
    double mask_fraction = 0.24;
    std::string model = "baseline";  ///< baseline | external
    std::string endpoint;            ///< external model endpoint
    std::size_t timeout_ms = 30000;
    std::filesystem::path output_dir = "vulnrisk-out";
    std::size_t workers = 1;

    /// key=value pairs in a stable order; hashed into the run manifest.
    [[nodiscard]] std::map<std::string, std::string> to_map() const;
    /// Throws Error(Config) when an invariant does not hold.
    void validate() const;
};

/// Parses a key=value file: one pair per line, '#' comments, blank lines
/// ignored. Unknown keys and malformed values are Config errors.
void apply_config_text(PipelineConfig& config, const std::string& text, const std::string& origin);

/// Runs one invocation; args excludes the program name. Returns the exit
/// status: 0 on success, the ErrorCode value for domain errors, 2 for usage
/// errors and 1 for anything unexpected.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace vulnrisk::cli
