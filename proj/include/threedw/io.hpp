#pragma once

// Document formats: JSON for structured artifacts, fixed-precision text for
// numbers in CSV output.

#include <filesystem>
#include <string>
#include <string_view>

#include <json.hpp>

#include "threedw/estimators.hpp"
#include "threedw/markov_sim.hpp"
#include "threedw/synth_oracle.hpp"
#include "threedw/trace_core.hpp"

namespace threedw {

using Json = nlohmann::ordered_json;

inline constexpr int kFormatVersion = 1;

// %.12g; the same value always renders to the same bytes.
std::string format_number(double v);

std::string read_file(const std::filesystem::path& path);
void write_file(const std::filesystem::path& path, std::string_view content);

// Lower-case hex SHA-256.
std::string sha256_hex(std::string_view content);

Json to_json(const TupleDistribution& td);
// Accepts a bare distribution document or one nested under "distribution".
TupleDistribution tuple_distribution_from_json(const Json& doc);

Json to_json(const DoubleMarkov& dm);
DoubleMarkov double_markov_from_json(const Json& doc);

Json to_json(const EtxEstimate& e);
Json to_json(const OracleResult& r);

SynthConfig synth_config_from_json(const Json& doc);
Json to_json(const SynthConfig& cfg);

// Parses JSON text, reporting syntax errors as FormatError with position.
Json parse_json(std::string_view text);

} // namespace threedw
