#pragma once

#include <cstdint>
#include <iosfwd>
#include <map>
#include <string>
#include <vector>

#include "threedw/io.hpp"

namespace threedw::cli {

inline constexpr const char* kToolVersion = "0.1.0";
inline constexpr const char* kEnvPrefix = "THREEDW_";

enum ExitCode : int {
    kOk = 0,
    kUsage = 2,      // bad flags, unknown model, invalid parameter ranges
    kFormat = 3,     // unparseable or inconsistent input documents
    kDegenerate = 4, // valid input whose answer is unreachable or undefined
    kIo = 5,
};

// Provenance record embedded in every artifact. Reruns with the same
// manifest reproduce byte-identical output.
struct RunManifest {
    std::string subcommand;
    Json config = Json::object();
    std::map<std::string, std::string> input_digests; // input role -> sha256
    std::uint64_t master_seed = 0;
    std::string tool_version = kToolVersion;

    Json to_json() const;
};

// Entry point shared by the executable and the tests. `args` excludes the
// program name.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

} // namespace threedw::cli
