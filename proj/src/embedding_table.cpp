#include "skillkt/embedding_table.hpp"

#include <cstdio>
#include <fstream>
#include <istream>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

#include "skillkt/errors.hpp"

namespace skillkt {

void write_embeddings(const EmbeddingTable& table, std::ostream& out)
{
    out << table.count() << ' ' << table.dim() << '\n';
    char buf[32];
    for (Index r = 0; r < table.count(); ++r) {
        out << r;
        for (Index c = 0; c < table.dim(); ++c) {
            std::snprintf(buf, sizeof buf, " %.9g", table.vectors(r, c));
            out << buf;
        }
        out << '\n';
    }
}

void write_embeddings(const EmbeddingTable& table, const std::filesystem::path& path)
{
    std::ofstream out(path);
    if (!out) throw ConfigError("cannot write embeddings to '" + path.string() + "'");
    write_embeddings(table, out);
}

EmbeddingTable read_embeddings(std::istream& in)
{
    std::string line;
    std::size_t line_no = 0;
    auto next_line = [&]() -> bool {
        while (std::getline(in, line)) {
            ++line_no;
            if (line.find_first_not_of(" \t\r") != std::string::npos) return true;
        }
        return false;
    };

    if (!next_line()) throw ParseError("empty embedding file", 0);
    long long count = 0, dim = 0;
    {
        std::istringstream header(line);
        std::string extra;
        if (!(header >> count >> dim) || (header >> extra) || count < 0 || dim <= 0) {
            throw ParseError("header must be 'count dim'", line_no);
        }
    }
    EmbeddingTable table{Matrix<double>::Zero(count, dim)};
    std::vector<bool> seen(static_cast<std::size_t>(count), false);
    long long rows = 0;
    while (next_line()) {
        std::istringstream fields(line);
        long long id = -1;
        if (!(fields >> id)) throw ParseError("row must start with an integer id", line_no);
        if (id < 0 || id >= count) {
            throw ParseError("row id " + std::to_string(id) + " outside [0, " + std::to_string(count) + ")", line_no);
        }
        if (seen[id]) throw ParseError("duplicate row id " + std::to_string(id), line_no);
        seen[id] = true;
        for (long long c = 0; c < dim; ++c) {
            double v = 0;
            if (!(fields >> v)) {
                throw ParseError("row " + std::to_string(id) + " has fewer than " + std::to_string(dim) + " values",
                                 line_no);
            }
            table.vectors(id, c) = v;
        }
        std::string extra;
        if (fields >> extra) throw ParseError("row " + std::to_string(id) + " has extra values", line_no);
        ++rows;
    }
    if (rows != count) {
        throw ParseError("header declares " + std::to_string(count) + " rows but file has " + std::to_string(rows), 0);
    }
    if (!table.vectors.allFinite()) throw ParseError("non-finite embedding value", 0);
    return table;
}

EmbeddingTable read_embeddings(const std::filesystem::path& path)
{
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open embeddings '" + path.string() + "'");
    return read_embeddings(in);
}

double cosine_similarity(const EmbeddingTable& table, Index a, Index b)
{
    const auto u = table.vectors.row(a);
    const auto v = table.vectors.row(b);
    const double denom = u.norm() * v.norm();
    return denom == 0.0 ? 0.0 : u.dot(v) / denom;
}

} // namespace skillkt
