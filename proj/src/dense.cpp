#include "cascade/dense.hpp"

#include <array>
#include <bit>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <limits>

#include <json.hpp>

#include "cascade/error.hpp"
#include "cascade/parallel.hpp"
#include "cascade/tsv.hpp"

namespace cascade::dense {

namespace {

constexpr std::array<char, 4> kMagic = {'C', 'R', 'K', '1'};

void put_u32(std::ostream& out, std::uint32_t v)
{
    char b[4] = {static_cast<char>(v & 0xFF), static_cast<char>((v >> 8) & 0xFF), static_cast<char>((v >> 16) & 0xFF),
                 static_cast<char>((v >> 24) & 0xFF)};
    out.write(b, 4);
}

std::uint32_t get_u32(std::istream& in, const char* what)
{
    unsigned char b[4];
    if (!in.read(reinterpret_cast<char*>(b), 4)) {
        throw Error(ErrorCode::FormatError, std::string("embedding store truncated while reading ") + what);
    }
    return static_cast<std::uint32_t>(b[0]) | (static_cast<std::uint32_t>(b[1]) << 8) |
           (static_cast<std::uint32_t>(b[2]) << 16) | (static_cast<std::uint32_t>(b[3]) << 24);
}

std::uint32_t checked_u32(std::size_t v, const char* what)
{
    if (v > std::numeric_limits<std::uint32_t>::max()) {
        throw Error(ErrorCode::InvalidArgument, std::string(what) + " does not fit in 32 bits");
    }
    return static_cast<std::uint32_t>(v);
}

double dot(std::span<const float> a, std::span<const float> b)
{
    double s = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        s += static_cast<double>(a[i]) * static_cast<double>(b[i]);
    }
    return s;
}

}  // namespace

Matrix::Matrix(std::size_t dim, std::vector<float> values) : dim_(dim), values_(std::move(values))
{
    if (dim_ == 0 ? !values_.empty() : values_.size() % dim_ != 0) {
        throw Error(ErrorCode::FormatError, "matrix values are not a whole number of rows of dim " + std::to_string(dim_));
    }
}

Matrix::Matrix(std::initializer_list<std::initializer_list<float>> rows)
{
    for (const auto& r : rows) {
        append_row(std::span<const float>(r.begin(), r.size()));
    }
}

void Matrix::append_row(std::span<const float> row)
{
    if (values_.empty() && dim_ == 0) {
        dim_ = row.size();
    } else if (row.size() != dim_) {
        throw Error(ErrorCode::FormatError, "row of " + std::to_string(row.size()) + " values in a matrix of dim " + std::to_string(dim_));
    }
    values_.insert(values_.end(), row.begin(), row.end());
}

double maxsim(const Matrix& query, const Matrix& doc)
{
    if (query.dim() != doc.dim()) {
        throw Error(ErrorCode::DimMismatch,
                    "query dim " + std::to_string(query.dim()) + " vs document dim " + std::to_string(doc.dim()));
    }
    double total = 0.0;
    for (std::size_t i = 0; i < query.rows(); ++i) {
        double best = -std::numeric_limits<double>::infinity();
        for (std::size_t j = 0; j < doc.rows(); ++j) {
            best = std::max(best, dot(query.row(i), doc.row(j)));
        }
        if (doc.rows() > 0) {
            total += best;
        }
    }
    return total;
}

void EmbeddingStore::add(std::string item_id, Matrix matrix)
{
    if (items_.empty() && dim_ == 0) {
        dim_ = matrix.dim();
    }
    if (matrix.dim() != dim_) {
        throw Error(ErrorCode::DimMismatch, "item '" + item_id + "' has dim " + std::to_string(matrix.dim()) + ", store dim is " +
                                                std::to_string(dim_));
    }
    if (matrix.rows() == 0) {
        throw Error(ErrorCode::FormatError, "item '" + item_id + "' has no token rows");
    }
    for (std::size_t r = 0; r < matrix.rows(); ++r) {
        double norm = std::sqrt(dot(matrix.row(r), matrix.row(r)));
        if (!std::isfinite(norm) || std::abs(norm - 1.0) > kNormTolerance) {
            throw Error(ErrorCode::NormError, "item '" + item_id + "' row " + std::to_string(r) + " has norm " + std::to_string(norm));
        }
    }
    if (item_id.empty() || tsv::has_whitespace(item_id)) {
        throw Error(ErrorCode::FormatError, "item id must be non-empty without whitespace: '" + item_id + "'");
    }
    auto [it, inserted] = items_.emplace(std::move(item_id), std::move(matrix));
    if (!inserted) {
        throw Error(ErrorCode::DuplicateId, "duplicate embedding item '" + it->first + "'");
    }
}

const Matrix* EmbeddingStore::find(std::string_view item_id) const
{
    auto it = items_.find(item_id);
    return it == items_.end() ? nullptr : &it->second;
}

void write_binary(const EmbeddingStore& store, std::ostream& out)
{
    out.write(kMagic.data(), kMagic.size());
    put_u32(out, checked_u32(store.dim(), "dim"));
    put_u32(out, checked_u32(store.size(), "item count"));
    for (const auto& [id, m] : store.items()) {
        put_u32(out, checked_u32(id.size(), "id length"));
        out.write(id.data(), static_cast<std::streamsize>(id.size()));
        put_u32(out, checked_u32(m.rows(), "token count"));
        for (float v : m.values()) {
            put_u32(out, std::bit_cast<std::uint32_t>(v));
        }
    }
}

EmbeddingStore read_binary(std::istream& in)
{
    std::array<char, 4> magic{};
    if (!in.read(magic.data(), magic.size()) || magic != kMagic) {
        throw Error(ErrorCode::FormatError, "embedding store does not start with CRK1");
    }
    auto dim = get_u32(in, "dim");
    auto count = get_u32(in, "item count");
    EmbeddingStore store(dim);
    for (std::uint32_t i = 0; i < count; ++i) {
        auto id_len = get_u32(in, "id length");
        std::string id(id_len, '\0');
        if (!in.read(id.data(), id_len)) {
            throw Error(ErrorCode::FormatError, "embedding store truncated inside item id");
        }
        auto tokens = get_u32(in, "token count");
        std::vector<float> values;
        values.reserve(static_cast<std::size_t>(tokens) * dim);
        for (std::size_t v = 0; v < static_cast<std::size_t>(tokens) * dim; ++v) {
            values.push_back(std::bit_cast<float>(get_u32(in, "token values")));
        }
        store.add(std::move(id), Matrix(dim, std::move(values)));
    }
    if (in.peek() != std::char_traits<char>::eof()) {
        throw Error(ErrorCode::FormatError, "trailing bytes after last embedding item");
    }
    return store;
}

void write_text(const EmbeddingStore& store, std::ostream& out)
{
    out << "#dim " << store.dim() << '\n';
    for (const auto& [id, m] : store.items()) {
        nlohmann::json rows = nlohmann::json::array();
        for (std::size_t r = 0; r < m.rows(); ++r) {
            auto row = m.row(r);
            rows.push_back(std::vector<float>(row.begin(), row.end()));
        }
        out << id << '\t' << rows.dump() << '\n';
    }
}

EmbeddingStore read_text(std::istream& in)
{
    EmbeddingStore store;
    std::size_t declared_dim = 0;
    std::string line;
    std::size_t line_no = 0;
    while (tsv::read_line(in, line)) {
        ++line_no;
        if (line.empty()) {
            continue;
        }
        auto where = "embedding text line " + std::to_string(line_no) + ": ";
        if (line.rfind("#dim", 0) == 0) {
            auto f = tsv::split_whitespace(line);
            if (line_no != 1 || f.size() != 2) {
                throw Error(ErrorCode::FormatError, where + "'#dim N' is only allowed as the first line");
            }
            try {
                declared_dim = std::stoul(std::string(f[1]));
            } catch (const std::logic_error&) {
                throw Error(ErrorCode::FormatError, where + "bad dim");
            }
            store = EmbeddingStore(declared_dim);
            continue;
        }
        auto tab = line.find('\t');
        if (tab == std::string::npos) {
            throw Error(ErrorCode::FormatError, where + "expected item_id<TAB>[[...]]");
        }
        nlohmann::json rows;
        try {
            rows = nlohmann::json::parse(line.substr(tab + 1));
        } catch (const nlohmann::json::exception& e) {
            throw Error(ErrorCode::FormatError, where + e.what());
        }
        if (!rows.is_array()) {
            throw Error(ErrorCode::FormatError, where + "token rows must be a nested array");
        }
        Matrix m;
        for (const auto& row : rows) {
            if (!row.is_array()) {
                throw Error(ErrorCode::FormatError, where + "token rows must be a nested array");
            }
            std::vector<float> values;
            for (const auto& v : row) {
                if (!v.is_number()) {
                    throw Error(ErrorCode::FormatError, where + "non-numeric embedding value");
                }
                values.push_back(v.get<float>());
            }
            if (declared_dim != 0 && values.size() != declared_dim) {
                throw Error(ErrorCode::FormatError, where + "row of " + std::to_string(values.size()) + " values, declared dim " +
                                                        std::to_string(declared_dim));
            }
            m.append_row(values);
        }
        store.add(line.substr(0, tab), std::move(m));
    }
    return store;
}

EmbeddingStore load_embedding_store(const std::string& path)
{
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        throw Error(ErrorCode::IoError, "cannot open embedding store " + path);
    }
    std::array<char, 4> head{};
    in.read(head.data(), head.size());
    bool binary = in.gcount() == 4 && head == kMagic;
    in.clear();
    in.seekg(0);
    return binary ? read_binary(in) : read_text(in);
}

RankedList search_dense(const Matrix& query, const EmbeddingStore& store, std::size_t k, unsigned threads)
{
    if (k == 0) {
        throw Error(ErrorCode::InvalidArgument, "k must be >= 1");
    }
    if (store.empty()) {
        return {};
    }
    if (query.dim() != store.dim()) {
        throw Error(ErrorCode::DimMismatch,
                    "query dim " + std::to_string(query.dim()) + " vs store dim " + std::to_string(store.dim()));
    }
    std::vector<const std::pair<const std::string, Matrix>*> items;
    items.reserve(store.size());
    for (const auto& entry : store.items()) {
        items.push_back(&entry);
    }
    RankedList out(items.size());
    parallel_for(items.size(), threads, [&](std::size_t i) {
        out[i] = {items[i]->first, maxsim(query, items[i]->second), Stage::Dense};
    });
    keep_top_k(out, k);
    return out;
}

}  // namespace cascade::dense
