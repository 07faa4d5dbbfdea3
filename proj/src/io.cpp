#include "threedw/io.hpp"

#include <cstdio>
#include <fstream>
#include <sstream>

#include <openssl/evp.h>

#include "threedw/errors.hpp"

namespace threedw {

namespace {

template <typename F>
auto as_format_error(const char* what, F&& body) -> decltype(body()) {
    try {
        return body();
    } catch (const FormatError&) {
        throw;
    } catch (const nlohmann::json::exception& e) {
        throw FormatError(std::string(what) + ": " + e.what());
    } catch (const std::invalid_argument& e) {
        throw FormatError(std::string(what) + ": " + e.what());
    }
}

void expect_version(const Json& doc) {
    if (doc.contains("format_version") && doc.at("format_version").get<int>() != kFormatVersion)
        throw FormatError("unsupported format_version " + doc.at("format_version").dump());
}

Json matrix_json(const Matrix& m) {
    Json out = Json::array();
    for (const auto& row : m) out.push_back(row);
    return out;
}

Json optional_value(const std::optional<double>& v) {
    if (v) return *v;
    return "unreachable";
}

} // namespace

std::string format_number(double v) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.12g", v);
    return buf;
}

std::string read_file(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot open '" + path.string() + "'");
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

void write_file(const std::filesystem::path& path, std::string_view content) {
    if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw std::runtime_error("cannot write '" + path.string() + "'");
    out.write(content.data(), static_cast<std::streamsize>(content.size()));
}

std::string sha256_hex(std::string_view content) {
    unsigned char digest[EVP_MAX_MD_SIZE];
    unsigned int len = 0;
    if (EVP_Digest(content.data(), content.size(), digest, &len, EVP_sha256(), nullptr) != 1)
        throw std::runtime_error("SHA-256 failed");
    static constexpr char hex[] = "0123456789abcdef";
    std::string out;
    for (unsigned int i = 0; i < len; ++i) {
        out += hex[digest[i] >> 4];
        out += hex[digest[i] & 0xf];
    }
    return out;
}

Json parse_json(std::string_view text) {
    try {
        return Json::parse(text);
    } catch (const nlohmann::json::parse_error& e) {
        // Translate the byte offset to a line/column pair.
        std::size_t line = 1, col = 1;
        for (std::size_t i = 0; i + 1 < e.byte && i < text.size(); ++i) {
            if (text[i] == '\n') {
                ++line;
                col = 1;
            } else {
                ++col;
            }
        }
        throw FormatError(std::string("invalid JSON: ") + e.what(), line, col);
    }
}

Json to_json(const TupleDistribution& td) {
    Json doc;
    doc["format_version"] = kFormatVersion;
    doc["kind"] = "tuple_distribution";
    doc["receiver_order"] = td.receiver_order();
    doc["window_len"] = td.window_len();
    Json entries = Json::array();
    for (const auto& [t, p] : td.entries()) entries.push_back({{"tuple", t.values}, {"prob", p}});
    doc["entries"] = std::move(entries);
    return doc;
}

TupleDistribution tuple_distribution_from_json(const Json& doc_in) {
    return as_format_error("tuple distribution", [&] {
        const Json& doc = doc_in.contains("distribution") ? doc_in.at("distribution") : doc_in;
        expect_version(doc);
        std::map<PrrTuple, double> entries;
        for (const auto& e : doc.at("entries")) {
            PrrTuple t{e.at("tuple").get<std::vector<double>>()};
            if (!entries.emplace(std::move(t), e.at("prob").get<double>()).second)
                throw FormatError("duplicate tuple in distribution");
        }
        std::vector<std::string> order;
        if (doc.contains("receiver_order")) {
            order = doc.at("receiver_order").get<std::vector<std::string>>();
        } else if (!entries.empty()) {
            for (std::size_t i = 0; i < entries.begin()->first.arity(); ++i) order.push_back("R" + std::to_string(i + 1));
        }
        const std::size_t window = doc.value("window_len", std::size_t{1});
        return TupleDistribution(std::move(order), std::move(entries), window);
    });
}

Json to_json(const DoubleMarkov& dm) {
    Json doc;
    doc["format_version"] = kFormatVersion;
    doc["kind"] = "double_markov";
    doc["sender_id"] = dm.sender_id;
    doc["receiver_order"] = dm.receiver_order;
    doc["window_len"] = dm.window_len;
    doc["segment_len"] = dm.segment_len;
    doc["grid_levels"] = dm.grid_levels;
    Json states = Json::array();
    for (const auto& s : dm.level1.states) states.push_back({{"aetx", s.aetx}, {"betx", s.betx}});
    doc["level1"] = {{"states", states},
                     {"transition", matrix_json(dm.level1.transition)},
                     {"initial", dm.level1.initial}};
    Json level2 = Json::array();
    for (const auto& l2 : dm.level2) {
        Json tuples = Json::array();
        for (const auto& t : l2.tuple_states) tuples.push_back(t.values);
        level2.push_back({{"tuple_states", tuples},
                          {"transition", matrix_json(l2.transition)},
                          {"initial", l2.initial}});
    }
    doc["level2"] = std::move(level2);
    return doc;
}

DoubleMarkov double_markov_from_json(const Json& doc) {
    return as_format_error("double markov model", [&] {
        expect_version(doc);
        DoubleMarkov dm;
        dm.sender_id = doc.value("sender_id", std::string("S"));
        dm.receiver_order = doc.at("receiver_order").get<std::vector<std::string>>();
        dm.window_len = doc.at("window_len").get<std::size_t>();
        dm.segment_len = doc.at("segment_len").get<std::size_t>();
        dm.grid_levels = doc.value("grid_levels", kDefaultGridLevels);
        const auto& l1 = doc.at("level1");
        for (const auto& s : l1.at("states")) dm.level1.states.push_back({s.at("aetx").get<double>(), s.at("betx").get<double>()});
        dm.level1.transition = l1.at("transition").get<Matrix>();
        dm.level1.initial = l1.at("initial").get<std::vector<double>>();
        for (const auto& l2j : doc.at("level2")) {
            Level2Model l2;
            for (const auto& t : l2j.at("tuple_states")) l2.tuple_states.push_back({t.get<std::vector<double>>()});
            l2.transition = l2j.at("transition").get<Matrix>();
            l2.initial = l2j.at("initial").get<std::vector<double>>();
            dm.level2.push_back(std::move(l2));
        }
        dm.validate();
        return dm;
    });
}

Json to_json(const EtxEstimate& e) {
    Json j;
    j["model"] = model_name(e.model);
    j["metric"] = metric_name(e.metric);
    if (!e.receiver.empty()) j["receiver"] = e.receiver;
    j["value"] = optional_value(e.value);
    j["op_count"] = e.op_count;
    if (e.flagged) j["note"] = e.note;
    return j;
}

Json to_json(const OracleResult& r) {
    return {{"mean", optional_value(r.mean)},
            {"half_width_95", r.half_width_95},
            {"trials", r.trials},
            {"seed", r.seed}};
}

Json to_json(const SynthConfig& cfg) {
    Json j;
    j["marginals"] = cfg.marginals;
    j["rho"] = cfg.rho;
    if (cfg.burst) {
        j["burst"] = {{"p_stay_good", cfg.burst->p_stay_good},
                      {"p_stay_bad", cfg.burst->p_stay_bad},
                      {"good_scale", cfg.burst->good_scale},
                      {"bad_scale", cfg.burst->bad_scale}};
    } else {
        j["burst"] = "none";
    }
    j["rounds"] = cfg.rounds;
    j["seed"] = cfg.seed;
    return j;
}

SynthConfig synth_config_from_json(const Json& doc) {
    return as_format_error("synthetic config", [&] {
        SynthConfig cfg;
        cfg.marginals = doc.at("marginals").get<std::vector<double>>();
        cfg.rho = doc.value("rho", 0.0);
        if (doc.contains("burst") && doc.at("burst").is_object()) {
            const auto& b = doc.at("burst");
            cfg.burst = BurstModel{b.at("p_stay_good").get<double>(), b.at("p_stay_bad").get<double>(),
                                   b.at("good_scale").get<double>(), b.at("bad_scale").get<double>()};
        }
        cfg.rounds = doc.value("rounds", cfg.rounds);
        cfg.seed = doc.value("seed", std::uint64_t{0});
        cfg.validate();
        return cfg;
    });
}

} // namespace threedw
