#pragma once

#include <filesystem>
#include <iosfwd>

#include "skillkt/tensor.hpp"

namespace skillkt {

/// Row i is the vector for id i.
struct EmbeddingTable
{
    Matrix<double> vectors;

    Index count() const noexcept { return vectors.rows(); }
    Index dim() const noexcept { return vectors.cols(); }
};

/**
 * Text format: a "count dim" header, then one "id v1 ... v_dim" line per row,
 * values printed with 9 significant digits.
 */
void write_embeddings(const EmbeddingTable& table, std::ostream& out);
void write_embeddings(const EmbeddingTable& table, const std::filesystem::path& path);

/// Throws ParseError on malformed input, including a row count that disagrees with the header.
EmbeddingTable read_embeddings(std::istream& in);
EmbeddingTable read_embeddings(const std::filesystem::path& path);

double cosine_similarity(const EmbeddingTable& table, Index a, Index b);

} // namespace skillkt
