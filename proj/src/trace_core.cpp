#include "threedw/trace_core.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <numeric>
#include <set>
#include <sstream>
#include <stdexcept>

#include "threedw/errors.hpp"

namespace threedw {

namespace {

std::string located(const std::string& what, std::size_t line, std::size_t column) {
    if (line == 0) return what;
    std::ostringstream os;
    os << "line " << line;
    if (column > 0) os << ", column " << column;
    os << ": " << what;
    return os.str();
}

std::string_view trim(std::string_view s) {
    while (!s.empty() && std::isspace(static_cast<unsigned char>(s.front()))) s.remove_prefix(1);
    while (!s.empty() && std::isspace(static_cast<unsigned char>(s.back()))) s.remove_suffix(1);
    return s;
}

struct Field {
    std::string_view text;
    std::size_t column; // 1-based position of the first non-blank character
};

std::vector<Field> split_fields(std::string_view line, char sep) {
    std::vector<Field> out;
    std::size_t start = 0;
    while (true) {
        const std::size_t end = line.find(sep, start);
        std::string_view raw = line.substr(start, end == std::string_view::npos ? line.npos : end - start);
        std::size_t lead = 0;
        while (lead < raw.size() && std::isspace(static_cast<unsigned char>(raw[lead]))) ++lead;
        out.push_back({trim(raw), start + lead + 1});
        if (end == std::string_view::npos) break;
        start = end + 1;
    }
    return out;
}

void check_probability_sum(double sum, const char* what) {
    if (std::abs(sum - 1.0) > 1e-9) {
        std::ostringstream os;
        os << what << " probabilities sum to " << sum << ", expected 1";
        throw std::invalid_argument(os.str());
    }
}

std::vector<std::string> default_receiver_names(std::size_t n) {
    std::vector<std::string> names;
    for (std::size_t i = 0; i < n; ++i) names.push_back("R" + std::to_string(i + 1));
    return names;
}

void check_permutation(const std::vector<std::size_t>& perm, std::size_t n) {
    std::vector<std::size_t> sorted = perm;
    std::sort(sorted.begin(), sorted.end());
    std::vector<std::size_t> ident(n);
    std::iota(ident.begin(), ident.end(), 0);
    if (sorted != ident) throw std::invalid_argument("not a permutation of the receivers");
}

} // namespace

FormatError::FormatError(const std::string& what, std::size_t line, std::size_t column)
    : std::runtime_error(located(what, line, column)), line_(line), column_(column) {}

// --- ReceptionTrace / TraceSet ---------------------------------------------

std::size_t ReceptionTrace::receptions() const {
    return static_cast<std::size_t>(std::count(bits.begin(), bits.end(), 1));
}

double ReceptionTrace::prr() const {
    return bits.empty() ? 0.0 : static_cast<double>(receptions()) / static_cast<double>(bits.size());
}

TraceSet::TraceSet(std::string sender_id, std::vector<ReceptionTrace> traces)
    : sender_id_(std::move(sender_id)), traces_(std::move(traces)) {
    if (traces_.empty()) throw std::invalid_argument("trace set has no receivers");
    rounds_ = traces_.front().bits.size();
    if (rounds_ == 0) throw std::invalid_argument("trace set has no rounds");
    std::set<std::string> ids;
    for (const auto& t : traces_) {
        if (!ids.insert(t.receiver_id).second)
            throw std::invalid_argument("duplicate receiver id '" + t.receiver_id + "'");
        if (t.bits.size() != rounds_)
            throw LengthMismatchError("receiver '" + t.receiver_id + "' has " +
                                      std::to_string(t.bits.size()) + " rounds, expected " +
                                      std::to_string(rounds_));
        for (auto b : t.bits)
            if (b > 1) throw std::invalid_argument("reception bits must be 0 or 1");
    }
}

std::vector<std::string> TraceSet::receiver_ids() const {
    std::vector<std::string> ids;
    ids.reserve(traces_.size());
    for (const auto& t : traces_) ids.push_back(t.receiver_id);
    return ids;
}

std::uint32_t TraceSet::round_bitmap(std::size_t r) const {
    if (traces_.size() > 32) throw std::invalid_argument("bitmap views need at most 32 receivers");
    std::uint32_t b = 0;
    for (std::size_t i = 0; i < traces_.size(); ++i)
        if (traces_[i].bits[r]) b |= (1u << i);
    return b;
}

TraceSet TraceSet::permuted(const std::vector<std::size_t>& perm) const {
    check_permutation(perm, traces_.size());
    std::vector<ReceptionTrace> out;
    for (auto i : perm) out.push_back(traces_[i]);
    return TraceSet(sender_id_, std::move(out));
}

// --- TupleDistribution -----------------------------------------------------

TupleDistribution::TupleDistribution(std::vector<std::string> receiver_order,
                                     std::map<PrrTuple, double> entries, std::size_t window_len)
    : receiver_order_(std::move(receiver_order)), entries_(std::move(entries)), window_len_(window_len) {
    if (receiver_order_.empty()) throw std::invalid_argument("tuple distribution has no receivers");
    if (entries_.empty()) throw std::invalid_argument("tuple distribution has no entries");
    if (window_len_ == 0) throw std::invalid_argument("window length must be at least 1");
    double sum = 0.0;
    for (const auto& [t, p] : entries_) {
        if (t.arity() != receiver_order_.size())
            throw std::invalid_argument("tuple arity does not match receiver count");
        for (double v : t.values)
            if (!(v >= 0.0 && v <= 1.0)) throw std::invalid_argument("tuple PRR outside [0,1]");
        if (!(p > 0.0 && p <= 1.0 + 1e-12)) throw std::invalid_argument("tuple probability outside (0,1]");
        sum += p;
    }
    check_probability_sum(sum, "tuple");
}

std::vector<double> TupleDistribution::marginals() const {
    std::vector<double> m(receivers(), 0.0);
    for (const auto& [t, p] : entries_)
        for (std::size_t i = 0; i < m.size(); ++i) m[i] += p * t.values[i];
    for (auto& x : m) x = std::clamp(x, 0.0, 1.0);
    return m;
}

TupleDistribution TupleDistribution::restrict_to(const std::vector<std::size_t>& indices) const {
    if (indices.empty()) throw std::invalid_argument("cannot restrict to an empty receiver set");
    std::vector<std::string> order;
    for (auto i : indices) order.push_back(receiver_order_.at(i));
    std::map<PrrTuple, double> out;
    for (const auto& [t, p] : entries_) {
        PrrTuple proj;
        for (auto i : indices) proj.values.push_back(t.values[i]);
        out[proj] += p;
    }
    return TupleDistribution(std::move(order), std::move(out), window_len_);
}

TupleDistribution TupleDistribution::permuted(const std::vector<std::size_t>& perm) const {
    check_permutation(perm, receivers());
    return restrict_to(perm);
}

// --- BitmapDistribution ----------------------------------------------------

BitmapDistribution::BitmapDistribution(std::size_t n, std::vector<double> probs)
    : n_(n), probs_(std::move(probs)) {
    if (n_ == 0 || n_ > kMaxBitmapReceivers)
        throw std::invalid_argument("bitmap distributions support 1.." +
                                    std::to_string(kMaxBitmapReceivers) + " receivers");
    if (probs_.size() != (std::size_t{1} << n_))
        throw std::invalid_argument("bitmap table must have 2^n entries");
    double sum = 0.0;
    for (double p : probs_) {
        if (!(p >= 0.0 && p <= 1.0 + 1e-12)) throw std::invalid_argument("bitmap probability outside [0,1]");
        sum += p;
    }
    check_probability_sum(sum, "bitmap");
}

std::vector<double> BitmapDistribution::marginals() const {
    std::vector<double> m(n_, 0.0);
    for (std::uint32_t b = 0; b < probs_.size(); ++b)
        for (std::size_t i = 0; i < n_; ++i)
            if (b & (1u << i)) m[i] += probs_[b];
    return m;
}

BitmapDistribution BitmapDistribution::from_traces(const TraceSet& ts) {
    const std::size_t n = ts.receivers();
    if (n > kMaxBitmapReceivers) throw std::invalid_argument("too many receivers for a bitmap table");
    std::vector<std::size_t> counts(std::size_t{1} << n, 0);
    for (std::size_t r = 0; r < ts.rounds(); ++r) ++counts[ts.round_bitmap(r)];
    std::vector<double> probs(counts.size());
    const double total = static_cast<double>(ts.rounds());
    for (std::size_t b = 0; b < counts.size(); ++b) probs[b] = static_cast<double>(counts[b]) / total;
    return BitmapDistribution(n, std::move(probs));
}

std::string bitmap_to_string(std::uint32_t bitmap, std::size_t n) {
    std::string s(n, '0');
    for (std::size_t i = 0; i < n; ++i)
        if (bitmap & (1u << i)) s[i] = '1';
    return s;
}

std::uint32_t bitmap_from_string(std::string_view text) {
    if (text.empty() || text.size() > 32) throw std::invalid_argument("bad bitmap string");
    std::uint32_t b = 0;
    for (std::size_t i = 0; i < text.size(); ++i) {
        if (text[i] == '1') b |= (1u << i);
        else if (text[i] != '0') throw std::invalid_argument("bitmap strings use only 0 and 1");
    }
    return b;
}

// --- parsing ----------------------------------------------------------------

TraceSet parse_trace_set(std::string_view content) {
    std::string sender = "S";
    std::vector<std::string> receivers;
    bool have_header = false;
    bool skip_first_column = false;
    std::vector<std::vector<std::uint8_t>> columns;

    std::size_t line_no = 0;
    std::size_t pos = 0;
    while (pos <= content.size()) {
        std::size_t end = content.find('\n', pos);
        if (end == std::string_view::npos) end = content.size();
        std::string_view line = content.substr(pos, end - pos);
        pos = end + 1;
        ++line_no;
        if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
        if (trim(line).empty()) continue;

        if (line.front() == '#') {
            if (line.rfind("#sender=", 0) != 0) continue; // comment
            if (have_header) throw FormatError("duplicate header", line_no, 1);
            std::istringstream words{std::string(line.substr(1))};
            std::string word;
            bool got_receivers = false;
            while (words >> word) {
                if (word.rfind("sender=", 0) == 0) {
                    sender = word.substr(7);
                } else if (word.rfind("receivers=", 0) == 0) {
                    for (const auto& f : split_fields(std::string_view(word).substr(10), ',')) {
                        if (f.text.empty())
                            throw FormatError("empty receiver id", line_no, line.find(word) + 1);
                        receivers.emplace_back(f.text);
                    }
                    got_receivers = true;
                } else {
                    throw FormatError("unknown header field '" + word + "'", line_no, line.find(word) + 1);
                }
            }
            if (!got_receivers || sender.empty())
                throw FormatError("header needs sender=<id> and receivers=<ids>", line_no, 1);
            have_header = true;
            columns.assign(receivers.size(), {});
            continue;
        }

        auto fields = split_fields(line, ',');
        if (!have_header) {
            // Columnar CSV: the first content row names the receivers.
            std::size_t first = 0;
            std::string lead(fields.front().text);
            std::transform(lead.begin(), lead.end(), lead.begin(), [](unsigned char c) { return std::tolower(c); });
            if (lead == "round") {
                skip_first_column = true;
                first = 1;
            }
            for (std::size_t i = first; i < fields.size(); ++i) {
                if (fields[i].text.empty()) throw FormatError("empty column name", line_no, fields[i].column);
                if (fields[i].text == "0" || fields[i].text == "1")
                    throw FormatError("missing header row", line_no, fields[i].column);
                receivers.emplace_back(fields[i].text);
            }
            have_header = true;
            columns.assign(receivers.size(), {});
            continue;
        }

        const std::size_t offset = skip_first_column ? 1 : 0;
        if (fields.size() != receivers.size() + offset)
            throw LengthMismatchError("round has " + std::to_string(fields.size() - std::min(fields.size(), offset)) +
                                          " values, expected " + std::to_string(receivers.size()),
                                      line_no, 1);
        for (std::size_t i = offset; i < fields.size(); ++i) {
            const auto& f = fields[i];
            if (f.text != "0" && f.text != "1")
                throw FormatError("expected 0 or 1, found '" + std::string(f.text) + "'", line_no, f.column);
            columns[i - offset].push_back(f.text == "1" ? 1 : 0);
        }
    }

    if (!have_header) throw FormatError("empty trace file");
    if (receivers.empty()) throw FormatError("no receivers declared");
    if (columns.front().empty()) throw FormatError("trace file has no rounds");
    std::set<std::string> unique(receivers.begin(), receivers.end());
    if (unique.size() != receivers.size()) throw FormatError("duplicate receiver id in header", 1, 1);

    std::vector<ReceptionTrace> traces;
    for (std::size_t i = 0; i < receivers.size(); ++i)
        traces.push_back({receivers[i], std::move(columns[i])});
    return TraceSet(sender, std::move(traces));
}

std::string format_trace_set(const TraceSet& ts) {
    std::string out = "#sender=" + ts.sender_id() + " receivers=";
    const auto& traces = ts.traces();
    for (std::size_t i = 0; i < traces.size(); ++i) {
        if (i) out += ',';
        out += traces[i].receiver_id;
    }
    out += '\n';
    out.reserve(out.size() + ts.rounds() * traces.size() * 2);
    for (std::size_t r = 0; r < ts.rounds(); ++r) {
        for (std::size_t i = 0; i < traces.size(); ++i) {
            if (i) out += ',';
            out += traces[i].bits[r] ? '1' : '0';
        }
        out += '\n';
    }
    return out;
}

// --- windowing ---------------------------------------------------------------

std::vector<PrrTuple> slice_windows(const TraceSet& ts, std::size_t window_len) {
    if (window_len == 0) throw std::invalid_argument("window length must be at least 1");
    if (ts.rounds() < window_len) throw DegenerateDataError("trace is shorter than one window");
    const std::size_t windows = ts.rounds() / window_len;
    std::vector<PrrTuple> out(windows);
    for (std::size_t w = 0; w < windows; ++w) {
        out[w].values.reserve(ts.receivers());
        for (const auto& t : ts.traces()) {
            const auto first = t.bits.begin() + static_cast<std::ptrdiff_t>(w * window_len);
            const auto got = std::count(first, first + static_cast<std::ptrdiff_t>(window_len), 1);
            out[w].values.push_back(static_cast<double>(got) / static_cast<double>(window_len));
        }
    }
    return out;
}

double quantize_prr(double value, std::size_t grid_levels) {
    if (grid_levels < 2) throw std::invalid_argument("quantization grid needs at least 2 levels");
    if (!(value >= 0.0 && value <= 1.0)) throw std::invalid_argument("PRR outside [0,1]");
    const double steps = static_cast<double>(grid_levels - 1);
    const double level = std::floor(value * steps + 0.5);
    return level / steps;
}

PrrTuple quantize_tuple(const PrrTuple& t, std::size_t grid_levels) {
    PrrTuple q;
    q.values.reserve(t.arity());
    for (double v : t.values) q.values.push_back(quantize_prr(v, grid_levels));
    return q;
}

TupleDistribution build_tuple_distribution(const std::vector<PrrTuple>& tuples,
                                           std::vector<std::string> receiver_order,
                                           std::size_t window_len) {
    if (tuples.empty()) throw std::invalid_argument("no tuples to aggregate");
    const std::size_t arity = tuples.front().arity();
    std::map<PrrTuple, std::size_t> counts;
    for (const auto& t : tuples) {
        if (t.arity() != arity) throw std::invalid_argument("tuples have mixed arity");
        ++counts[t];
    }
    if (receiver_order.empty()) receiver_order = default_receiver_names(arity);
    std::map<PrrTuple, double> entries;
    const double total = static_cast<double>(tuples.size());
    for (const auto& [t, c] : counts) entries.emplace(t, static_cast<double>(c) / total);
    return TupleDistribution(std::move(receiver_order), std::move(entries), window_len);
}

TupleDistribution extract_tuple_distribution(const TraceSet& ts, std::size_t window_len,
                                             std::size_t grid_levels) {
    auto tuples = slice_windows(ts, window_len);
    for (auto& t : tuples) t = quantize_tuple(t, grid_levels);
    return build_tuple_distribution(tuples, ts.receiver_ids(), window_len);
}

BitmapDistribution tuple_to_bitmap_distribution(const TupleDistribution& td, OpCounter* counter) {
    const std::size_t n = td.receivers();
    if (n > kMaxBitmapReceivers) throw std::invalid_argument("too many receivers for a bitmap table");
    const std::size_t size = std::size_t{1} << n;
    std::vector<double> probs(size, 0.0);
    std::vector<double> loss(n);
    for (const auto& [t, p] : td.entries()) {
        for (std::size_t i = 0; i < n; ++i) loss[i] = 1.0 - t.values[i];
        count_ops(counter, n);
        for (std::uint32_t b = 0; b < size; ++b) {
            double prod = p;
            for (std::size_t i = 0; i < n; ++i) prod *= (b & (1u << i)) ? t.values[i] : loss[i];
            probs[b] += prod;
        }
        count_ops(counter, size * (n + 1));
    }
    count_probabilities(counter, size);
    return BitmapDistribution(n, std::move(probs));
}

// --- empirical ETX -------------------------------------------------------------

std::optional<EmpiricalEtx> measure_uetx(const ReceptionTrace& trace) {
    std::size_t total = 0, epochs = 0, run = 0;
    for (auto bit : trace.bits) {
        ++run;
        if (bit) {
            total += run;
            ++epochs;
            run = 0;
        }
    }
    if (epochs == 0) return std::nullopt;
    return EmpiricalEtx{EtxKind::unicast, static_cast<double>(total) / static_cast<double>(epochs), epochs};
}

std::optional<EmpiricalEtx> measure_aetx(const TraceSet& ts) {
    std::size_t total = 0, epochs = 0, run = 0;
    for (std::size_t r = 0; r < ts.rounds(); ++r) {
        ++run;
        bool any = false;
        for (const auto& t : ts.traces()) any = any || t.bits[r];
        if (any) {
            total += run;
            ++epochs;
            run = 0;
        }
    }
    if (epochs == 0) return std::nullopt;
    return EmpiricalEtx{EtxKind::anycast, static_cast<double>(total) / static_cast<double>(epochs), epochs};
}

std::optional<EmpiricalEtx> measure_betx(const TraceSet& ts) {
    for (const auto& t : ts.traces())
        if (t.receptions() == 0) return std::nullopt;
    const std::size_t n = ts.receivers();
    std::vector<std::uint8_t> covered(n, 0);
    std::size_t uncovered = n, total = 0, epochs = 0, run = 0;
    for (std::size_t r = 0; r < ts.rounds(); ++r) {
        ++run;
        for (std::size_t i = 0; i < n; ++i) {
            if (!covered[i] && ts.traces()[i].bits[r]) {
                covered[i] = 1;
                --uncovered;
            }
        }
        if (uncovered == 0) {
            total += run;
            ++epochs;
            run = 0;
            std::fill(covered.begin(), covered.end(), 0);
            uncovered = n;
        }
    }
    if (epochs == 0) return std::nullopt;
    return EmpiricalEtx{EtxKind::broadcast, static_cast<double>(total) / static_cast<double>(epochs), epochs};
}

std::optional<double> link_correlation(const ReceptionTrace& a, const ReceptionTrace& b) {
    if (a.bits.size() != b.bits.size()) throw std::invalid_argument("traces differ in length");
    double n = static_cast<double>(a.bits.size());
    double sa = 0, sb = 0, sab = 0;
    for (std::size_t i = 0; i < a.bits.size(); ++i) {
        sa += a.bits[i];
        sb += b.bits[i];
        sab += a.bits[i] & b.bits[i];
    }
    const double va = n * sa - sa * sa;
    const double vb = n * sb - sb * sb;
    if (va <= 0.0 || vb <= 0.0) return std::nullopt;
    return (n * sab - sa * sb) / std::sqrt(va * vb);
}

std::optional<double> mean_pairwise_correlation(const TraceSet& ts) {
    double sum = 0.0;
    std::size_t count = 0;
    const auto& traces = ts.traces();
    for (std::size_t i = 0; i < traces.size(); ++i)
        for (std::size_t j = i + 1; j < traces.size(); ++j)
            if (auto r = link_correlation(traces[i], traces[j])) {
                sum += *r;
                ++count;
            }
    if (count == 0) return std::nullopt;
    return sum / static_cast<double>(count);
}

} // namespace threedw
