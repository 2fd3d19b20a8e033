#pragma once

#include <cstddef>
#include <istream>
#include <map>
#include <ostream>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "cascade/ranking.hpp"

namespace cascade::dense {

inline constexpr double kNormTolerance = 1e-4;

/// Row-major token matrix: one row per token, `dim` floats per row.
class Matrix {
  public:
    Matrix() = default;
    Matrix(std::size_t dim, std::vector<float> values);
    Matrix(std::initializer_list<std::initializer_list<float>> rows);

    std::size_t rows() const { return dim_ == 0 ? 0 : values_.size() / dim_; }
    std::size_t dim() const { return dim_; }
    std::span<const float> row(std::size_t i) const { return {values_.data() + i * dim_, dim_}; }
    const std::vector<float>& values() const { return values_; }

    void append_row(std::span<const float> row);

    friend bool operator==(const Matrix&, const Matrix&) = default;

  private:
    std::size_t dim_ = 0;
    std::vector<float> values_;
};

/// Σ over query rows of the best dot product against any document row.
/// Throws DimMismatch when the matrices disagree on dimension.
double maxsim(const Matrix& query, const Matrix& doc);

/// Item id -> unit-row token matrix, all of the same dimension.
class EmbeddingStore {
  public:
    EmbeddingStore() = default;
    explicit EmbeddingStore(std::size_t dim) : dim_(dim) {}

    /// Validates dimension, row count and row norms before inserting.
    /// Throws DimMismatch, NormError, FormatError (no rows) or DuplicateId.
    void add(std::string item_id, Matrix matrix);

    std::size_t dim() const { return dim_; }
    std::size_t size() const { return items_.size(); }
    bool empty() const { return items_.empty(); }
    const Matrix* find(std::string_view item_id) const;
    const std::map<std::string, Matrix, std::less<>>& items() const { return items_; }

    friend bool operator==(const EmbeddingStore&, const EmbeddingStore&) = default;

  private:
    std::size_t dim_ = 0;
    std::map<std::string, Matrix, std::less<>> items_;
};

/// Binary layout (all integers uint32 little-endian):
///   "CRK1" dim item_count { id_len id_bytes token_count float32[token_count*dim] }*
void write_binary(const EmbeddingStore& store, std::ostream& out);
EmbeddingStore read_binary(std::istream& in);

/// Text layout: optional "#dim N" first line, then one item per line:
///   item_id <TAB> [[f, f, ...], [f, f, ...]]
void write_text(const EmbeddingStore& store, std::ostream& out);
EmbeddingStore read_text(std::istream& in);

/// Picks the binary reader when the file starts with the "CRK1" magic.
EmbeddingStore load_embedding_store(const std::string& path);

/// Exact top-k by maxsim over every stored item.
RankedList search_dense(const Matrix& query, const EmbeddingStore& store, std::size_t k, unsigned threads = 1);

}  // namespace cascade::dense
