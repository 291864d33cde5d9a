#include "skillkt/dataset.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <istream>
#include <map>
#include <numeric>
#include <ostream>
#include <random>
#include <unordered_map>

#include "skillkt/errors.hpp"

namespace skillkt {

namespace {

std::vector<std::string> split_fields(const std::string& line, char delim)
{
    std::vector<std::string> out;
    std::string field;
    bool quoted = false;
    for (std::size_t i = 0; i < line.size(); ++i) {
        const char c = line[i];
        if (quoted) {
            if (c == '"' && i + 1 < line.size() && line[i + 1] == '"') {
                field += '"';
                ++i;
            } else if (c == '"') {
                quoted = false;
            } else {
                field += c;
            }
        } else if (c == '"') {
            quoted = true;
        } else if (c == delim) {
            out.push_back(std::move(field));
            field.clear();
        } else if (c != '\r') {
            field += c;
        }
    }
    out.push_back(std::move(field));
    return out;
}

std::string trim(std::string s)
{
    const auto b = s.find_first_not_of(" \t");
    if (b == std::string::npos) return {};
    const auto e = s.find_last_not_of(" \t");
    return s.substr(b, e - b + 1);
}

bool parse_int(const std::string& s, long long& out)
{
    if (s.empty()) return false;
    auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), out);
    return ec == std::errc() && ptr == s.data() + s.size();
}

bool parse_binary(const std::string& s, std::uint8_t& out)
{
    double v = 0;
    auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    if (s.empty() || ec != std::errc() || ptr != s.data() + s.size()) return false;
    if (v == 0.0) out = 0;
    else if (v == 1.0) out = 1;
    else return false;
    return true;
}

std::size_t column_index(const std::vector<std::string>& header, const std::string& name)
{
    auto it = std::find(header.begin(), header.end(), name);
    if (it == header.end()) throw ParseError("missing mandatory column '" + name + "'", 1);
    return static_cast<std::size_t>(it - header.begin());
}

struct RawRow
{
    std::int64_t user;
    std::int64_t order;
    std::string skill;
    std::uint8_t correct;
};

} // namespace

InteractionLog parse_interactions(std::istream& in, const InteractionSchema& schema)
{
    InteractionLog log;
    std::string line;
    if (!std::getline(in, line)) throw ParseError("empty interaction file", 0);
    std::vector<std::string> header = split_fields(line, schema.delimiter);
    for (auto& h : header) h = trim(h);
    if (!header.empty() && header[0].starts_with("\xEF\xBB\xBF")) header[0].erase(0, 3);

    const auto user_col = column_index(header, schema.user_column);
    const auto skill_col = column_index(header, schema.skill_column);
    const auto correct_col = column_index(header, schema.correct_column);
    const bool has_order = !schema.order_column.empty();
    const auto order_col = has_order ? column_index(header, schema.order_column) : 0;
    const auto needed = std::max({user_col, skill_col, correct_col, order_col}) + 1;

    std::vector<RawRow> rows;
    std::size_t line_no = 1;
    while (std::getline(in, line)) {
        ++line_no;
        if (trim(line).empty()) continue;
        ++log.rows_read;
        const auto fields = split_fields(line, schema.delimiter);
        if (fields.size() < needed) throw ParseError("row has " + std::to_string(fields.size()) + " fields", line_no);

        long long user = 0;
        if (!parse_int(trim(fields[user_col]), user)) {
            throw ParseError("non-integer user id '" + fields[user_col] + "'", line_no);
        }
        long long order = static_cast<long long>(log.rows_read);
        if (has_order && !parse_int(trim(fields[order_col]), order)) {
            throw ParseError("non-integer order key '" + fields[order_col] + "'", line_no);
        }
        std::uint8_t correct = 0;
        if (!parse_binary(trim(fields[correct_col]), correct)) {
            ++log.dropped_bad_correct;
            continue;
        }
        const std::string skill_field = trim(fields[skill_col]);
        if (skill_field.empty()) {
            ++log.dropped_missing_skill;
            continue;
        }
        std::vector<std::string> tags;
        if (schema.multi_skill_separator != '\0') {
            std::size_t start = 0;
            while (true) {
                const auto pos = skill_field.find(schema.multi_skill_separator, start);
                auto tag = trim(skill_field.substr(start, pos == std::string::npos ? std::string::npos : pos - start));
                if (!tag.empty()) tags.push_back(std::move(tag));
                if (pos == std::string::npos) break;
                start = pos + 1;
            }
        } else {
            tags.push_back(skill_field);
        }
        if (tags.size() > 1) ++log.multi_skill_rows;
        for (auto& tag : tags) rows.push_back(RawRow{user, order, std::move(tag), correct});
    }

    // label -> dense id
    std::unordered_map<std::string, NodeId> ids;
    if (!schema.skill_labels.empty()) {
        log.skill_labels = schema.skill_labels;
        for (std::size_t i = 0; i < schema.skill_labels.size(); ++i) ids[schema.skill_labels[i]] = static_cast<NodeId>(i);
    } else if (schema.n_skills > 0) {
        for (NodeId i = 0; i < schema.n_skills; ++i) {
            log.skill_labels.push_back(std::to_string(i));
            ids[log.skill_labels.back()] = i;
        }
    } else {
        std::vector<std::string> labels;
        for (const auto& r : rows) labels.push_back(r.skill);
        std::sort(labels.begin(), labels.end());
        labels.erase(std::unique(labels.begin(), labels.end()), labels.end());
        const bool numeric = std::all_of(labels.begin(), labels.end(), [](const std::string& s) {
            long long v;
            return parse_int(s, v);
        });
        if (numeric) {
            std::sort(labels.begin(), labels.end(), [](const std::string& a, const std::string& b) {
                return std::stoll(a) < std::stoll(b);
            });
        }
        for (std::size_t i = 0; i < labels.size(); ++i) ids[labels[i]] = static_cast<NodeId>(i);
        log.skill_labels = std::move(labels);
    }
    log.n_skills = static_cast<NodeId>(log.skill_labels.size());

    std::unordered_map<std::string, NodeId> numeric_alias;
    if (schema.n_skills > 0) {
        // other integer spellings of a dense id, e.g. "07"
        for (const auto& r : rows) {
            long long v;
            if (!ids.contains(r.skill) && parse_int(r.skill, v) && v >= 0 && v < schema.n_skills) {
                numeric_alias[r.skill] = static_cast<NodeId>(v);
            }
        }
    }

    log.records.reserve(rows.size());
    for (const auto& r : rows) {
        NodeId id = -1;
        if (auto it = ids.find(r.skill); it != ids.end()) id = it->second;
        else if (auto al = numeric_alias.find(r.skill); al != numeric_alias.end()) id = al->second;
        if (id < 0) {
            ++log.dropped_missing_skill;
            continue;
        }
        log.records.push_back(InteractionRecord{r.user, r.order, id, r.correct});
    }
    return log;
}

InteractionLog parse_interactions(const std::filesystem::path& path, const InteractionSchema& schema)
{
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open interactions '" + path.string() + "'");
    return parse_interactions(in, schema);
}

void write_interactions(std::span<const InteractionRecord> records, std::ostream& out)
{
    out << "user_id,order_id,skill_id,correct\n";
    for (const auto& r : records) {
        out << r.user_id << ',' << r.order_key << ',' << r.skill << ',' << int(r.correct) << '\n';
    }
}

std::int32_t interaction_index(NodeId skill, int correct, NodeId n_problems)
{
    if (skill < 0 || skill >= n_problems) {
        throw RangeError("interaction index: problem " + std::to_string(skill) + " outside [0, "
                         + std::to_string(n_problems) + ")");
    }
    if (correct != 0 && correct != 1) throw RangeError("interaction index: correctness must be 0 or 1");
    return skill + correct * n_problems;
}

InteractionPair decode_interaction_index(std::int32_t index, NodeId n_problems)
{
    if (index < 0 || index >= 2 * n_problems) throw RangeError("interaction index out of range");
    return {index % n_problems, index / n_problems};
}

std::vector<StudentSequence> build_sequences(std::span<const InteractionRecord> records, int max_len)
{
    if (max_len < 2) throw ConfigError("max_len must be >= 2");
    std::vector<std::size_t> order(records.size());
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
        if (records[a].user_id != records[b].user_id) return records[a].user_id < records[b].user_id;
        return records[a].order_key < records[b].order_key;
    });

    std::vector<StudentSequence> out;
    std::size_t i = 0;
    while (i < order.size()) {
        const auto user = records[order[i]].user_id;
        std::size_t j = i;
        while (j < order.size() && records[order[j]].user_id == user) ++j;
        for (std::size_t start = i; start < j; start += static_cast<std::size_t>(max_len)) {
            const std::size_t stop = std::min(j, start + static_cast<std::size_t>(max_len));
            if (stop - start < 2) continue;
            StudentSequence seq;
            seq.user_id = user;
            for (std::size_t k = start; k < stop; ++k) {
                seq.skills.push_back(records[order[k]].skill);
                seq.correct.push_back(records[order[k]].correct);
            }
            out.push_back(std::move(seq));
        }
        i = j;
    }
    return out;
}

void SplitSpec::validate() const
{
    if (!(train_fraction > 0.0 && train_fraction <= 1.0)) throw ConfigError("train fraction must be in (0, 1]");
    if (!(subsample_fraction > 0.0 && subsample_fraction <= 1.0)) {
        throw ConfigError("subsample fraction must be in (0, 1]");
    }
}

namespace {

std::size_t fraction_count(double fraction, std::size_t n)
{
    return static_cast<std::size_t>(std::floor(fraction * static_cast<double>(n) + 1e-9));
}

std::vector<std::size_t> seeded_permutation(std::size_t n, std::uint64_t seed)
{
    std::vector<std::size_t> perm(n);
    std::iota(perm.begin(), perm.end(), 0);
    std::mt19937_64 rng(seed);
    for (std::size_t i = n; i > 1; --i) {
        std::uniform_int_distribution<std::size_t> pick(0, i - 1);
        std::swap(perm[i - 1], perm[pick(rng)]);
    }
    return perm;
}

} // namespace

std::vector<InteractionRecord> subsample_records(std::span<const InteractionRecord> records, double fraction,
                                                 std::uint64_t seed)
{
    if (!(fraction > 0.0 && fraction <= 1.0)) throw ConfigError("subsample fraction must be in (0, 1]");
    auto perm = seeded_permutation(records.size(), seed ^ 0x5ab5a3b1e5ULL);
    perm.resize(fraction_count(fraction, records.size()));
    std::sort(perm.begin(), perm.end());
    std::vector<InteractionRecord> out;
    out.reserve(perm.size());
    for (auto i : perm) out.push_back(records[i]);
    return out;
}

std::string split_mode_name(SplitMode mode)
{
    switch (mode) {
    case SplitMode::record: return "record";
    case SplitMode::student: return "student";
    case SplitMode::chronological: return "chronological";
    }
    return "unknown";
}

SplitMode parse_split_mode(const std::string& name)
{
    if (name == "record") return SplitMode::record;
    if (name == "student") return SplitMode::student;
    if (name == "chronological") return SplitMode::chronological;
    throw ConfigError("unknown split mode '" + name + "' (expected record, student or chronological)");
}

RecordSplit split_records(std::span<const InteractionRecord> records, const SplitSpec& spec)
{
    spec.validate();
    std::vector<bool> in_train(records.size(), false);
    if (spec.mode == SplitMode::record) {
        const auto perm = seeded_permutation(records.size(), spec.seed);
        const std::size_t n_train = fraction_count(spec.train_fraction, records.size());
        for (std::size_t k = 0; k < n_train; ++k) in_train[perm[k]] = true;
    } else {
        std::map<std::int64_t, std::vector<std::size_t>> by_user;
        for (std::size_t i = 0; i < records.size(); ++i) by_user[records[i].user_id].push_back(i);
        if (spec.mode == SplitMode::student) {
            std::vector<const std::vector<std::size_t>*> users;
            for (const auto& [user, rows] : by_user) users.push_back(&rows);
            const auto perm = seeded_permutation(users.size(), spec.seed);
            const std::size_t n_train = fraction_count(spec.train_fraction, users.size());
            for (std::size_t k = 0; k < n_train; ++k) {
                for (auto i : *users[perm[k]]) in_train[i] = true;
            }
        } else {
            for (auto& [user, rows] : by_user) {
                std::stable_sort(rows.begin(), rows.end(), [&](std::size_t a, std::size_t b) {
                    return records[a].order_key < records[b].order_key;
                });
                const std::size_t n_train = fraction_count(spec.train_fraction, rows.size());
                for (std::size_t k = 0; k < n_train; ++k) in_train[rows[k]] = true;
            }
        }
    }

    RecordSplit split;
    for (std::size_t i = 0; i < records.size(); ++i) (in_train[i] ? split.train : split.eval).push_back(records[i]);
    if (spec.subsample_fraction < 1.0) split.train = subsample_records(split.train, spec.subsample_fraction, spec.seed);
    return split;
}

std::size_t Batch::valid_count() const
{
    return static_cast<std::size_t>(std::count(mask.begin(), mask.end(), std::uint8_t{1}));
}

std::vector<Batch> make_batches(std::span<const StudentSequence> sequences, NodeId n_problems, int max_len,
                                int batch_size)
{
    if (batch_size < 1) throw ConfigError("batch_size must be >= 1");
    std::vector<Batch> out;
    for (std::size_t first = 0; first < sequences.size(); first += static_cast<std::size_t>(batch_size)) {
        const std::size_t last = std::min(sequences.size(), first + static_cast<std::size_t>(batch_size));
        Batch b;
        b.batch_size = static_cast<Index>(last - first);
        for (std::size_t s = first; s < last; ++s) {
            if (sequences[s].size() > static_cast<std::size_t>(max_len)) {
                throw ConfigError("sequence of length " + std::to_string(sequences[s].size()) + " exceeds max_len "
                                  + std::to_string(max_len));
            }
            b.length = std::max<Index>(b.length, static_cast<Index>(sequences[s].size()));
        }
        const auto cells = static_cast<std::size_t>(b.batch_size * b.length);
        b.encoder_ids.assign(cells, kPadId);
        b.decoder_ids.assign(cells, kPadId);
        b.labels.assign(cells, 0);
        b.mask.assign(cells, 0);
        for (std::size_t s = first; s < last; ++s) {
            const auto& seq = sequences[s];
            const auto row = static_cast<std::size_t>(s - first) * static_cast<std::size_t>(b.length);
            b.user_ids.push_back(seq.user_id);
            for (std::size_t i = 0; i < seq.size(); ++i) {
                b.encoder_ids[row + i] = interaction_index(seq.skills[i], 0, n_problems);
                b.decoder_ids[row + i] = i == 0 ? start_token(n_problems)
                                                : interaction_index(seq.skills[i - 1], seq.correct[i - 1], n_problems);
                b.labels[row + i] = seq.correct[i];
                b.mask[row + i] = 1;
            }
        }
        out.push_back(std::move(b));
    }
    return out;
}

std::vector<StudentSequence> unbatch(const Batch& batch)
{
    std::vector<StudentSequence> out;
    for (Index s = 0; s < batch.batch_size; ++s) {
        StudentSequence seq;
        seq.user_id = batch.user_ids[static_cast<std::size_t>(s)];
        for (Index i = 0; i < batch.length; ++i) {
            const auto cell = static_cast<std::size_t>(s * batch.length + i);
            if (!batch.mask[cell]) continue;
            seq.skills.push_back(batch.encoder_ids[cell]);
            seq.correct.push_back(batch.labels[cell]);
        }
        out.push_back(std::move(seq));
    }
    return out;
}

} // namespace skillkt
