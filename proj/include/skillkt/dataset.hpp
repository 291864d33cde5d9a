#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <span>
#include <string>
#include <vector>

#include "skillkt/skill_graph.hpp"
#include "skillkt/tensor.hpp"

namespace skillkt {

struct InteractionRecord
{
    std::int64_t user_id = 0;
    std::int64_t order_key = 0;
    NodeId skill = 0;
    std::uint8_t correct = 0;

    bool operator==(const InteractionRecord&) const = default;
};

/// Column mapping for delimiter-separated interaction logs.
struct InteractionSchema
{
    std::string user_column = "user_id";
    std::string skill_column = "skill_id";
    std::string correct_column = "correct";
    std::string order_column;  ///< empty: file row order
    char delimiter = ',';
    char multi_skill_separator = '_';  ///< "12_37" tags one row with two skills
    /// > 0: skill field holds dense ids already in [0, n_skills).
    NodeId n_skills = 0;
    /// Non-empty: fixed label -> id mapping (position = id); unknown labels are dropped.
    std::vector<std::string> skill_labels;
};

struct InteractionLog
{
    std::vector<InteractionRecord> records;
    NodeId n_skills = 0;
    std::vector<std::string> skill_labels;  ///< dense id -> original label
    std::size_t rows_read = 0;
    std::size_t dropped_missing_skill = 0;
    std::size_t dropped_bad_correct = 0;
    std::size_t multi_skill_rows = 0;
};

/**
 * Parses a header-led delimited log. Double-quoted fields may contain the
 * delimiter. Rows with an empty or unmappable skill, or a correctness value
 * other than 0/1, are dropped and counted. Without a fixed mapping, skill
 * labels are re-indexed densely in ascending (numeric when possible) order.
 */
InteractionLog parse_interactions(std::istream& in, const InteractionSchema& schema);
InteractionLog parse_interactions(const std::filesystem::path& path, const InteractionSchema& schema);

/// Writes "user_id,order_id,skill_id,correct" rows.
void write_interactions(std::span<const InteractionRecord> records, std::ostream& out);

/// j = skill + correct · n_problems
std::int32_t interaction_index(NodeId skill, int correct, NodeId n_problems);

struct InteractionPair
{
    NodeId skill;
    int correct;
};

InteractionPair decode_interaction_index(std::int32_t index, NodeId n_problems);

struct StudentSequence
{
    std::int64_t user_id = 0;
    std::vector<NodeId> skills;
    std::vector<std::uint8_t> correct;

    std::size_t size() const noexcept { return skills.size(); }
    bool operator==(const StudentSequence&) const = default;
};

/// Groups by user, orders by order_key, cuts into windows of max_len, drops windows shorter than 2.
std::vector<StudentSequence> build_sequences(std::span<const InteractionRecord> records, int max_len);

/// record: shuffled records; student: whole students held out; chronological: each student's latest records held out.
enum class SplitMode
{
    record,
    student,
    chronological
};

std::string split_mode_name(SplitMode mode);
SplitMode parse_split_mode(const std::string& name);

struct SplitSpec
{
    SplitMode mode = SplitMode::record;
    double train_fraction = 0.9;
    double subsample_fraction = 1.0;
    std::uint64_t seed = 0;

    void validate() const;
};

struct RecordSplit
{
    std::vector<InteractionRecord> train;
    std::vector<InteractionRecord> eval;
};

/// Train/eval partition by spec.mode; both sides keep input order, and the subsample fraction applies to the train side only.
RecordSplit split_records(std::span<const InteractionRecord> records, const SplitSpec& spec);

/// First ⌊fraction·n⌋ records of a seeded permutation, returned in original order. Nested across fractions.
std::vector<InteractionRecord> subsample_records(std::span<const InteractionRecord> records, double fraction,
                                                 std::uint64_t seed);

inline constexpr std::int32_t kPadId = -1;

inline std::int32_t start_token(NodeId n_problems) { return 2 * n_problems; }

/**
 * Padded mini-batch, row-major [batch, length].
 *
 * Decoder position 0 holds the start token and position i > 0 holds
 * interaction_index(skill[i-1], correct[i-1]), so position i never sees its own
 * label. Padding uses kPadId and mask 0.
 */
struct Batch
{
    Index batch_size = 0;
    Index length = 0;
    std::vector<std::int32_t> encoder_ids;
    std::vector<std::int32_t> decoder_ids;
    std::vector<std::uint8_t> labels;
    std::vector<std::uint8_t> mask;
    std::vector<std::int64_t> user_ids;

    std::size_t valid_count() const;
};

/// Consecutive groups of batch_size sequences, each padded to its longest member.
std::vector<Batch> make_batches(std::span<const StudentSequence> sequences, NodeId n_problems, int max_len,
                                int batch_size);

std::vector<StudentSequence> unbatch(const Batch& batch);

} // namespace skillkt
