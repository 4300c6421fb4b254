#pragma once

// Exact dense retrieval: full cosine scan over an in-memory embedding matrix
// followed by partial selection of the top n.

#include <cstddef>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "confret/core.hpp"

namespace confret {

class EmbeddingMatrix {
 public:
  EmbeddingMatrix() = default;
  // values is row-major, ids.size() rows of dim entries. Throws DimError on a
  // size mismatch and InvalidScore on non-finite entries.
  EmbeddingMatrix(std::vector<DocId> ids, std::size_t dim, std::vector<double> values);

  std::size_t rows() const noexcept { return ids_.size(); }
  std::size_t dim() const noexcept { return dim_; }
  bool normalized() const noexcept { return normalized_; }
  const std::vector<DocId>& ids() const noexcept { return ids_; }
  std::span<const double> row(std::size_t i) const { return {values_.data() + i * dim_, dim_}; }

  // Scales every row to unit L2 norm. Throws InvalidQuery on a zero row.
  void normalize();

 private:
  std::vector<DocId> ids_;
  std::size_t dim_ = 0;
  std::vector<double> values_;
  bool normalized_ = false;
};

// Reads the binary "CRET1" format or the `id<TAB>v1,...,vd` text format,
// detected from the leading bytes. Rows are normalized when normalize is set.
EmbeddingMatrix load_embeddings(const std::string& path, bool normalize = true);
void save_embeddings_binary(const EmbeddingMatrix& m, const std::string& path);
void save_embeddings_text(const EmbeddingMatrix& m, const std::string& path);

// cos(query, row_i) for every corpus row, in corpus order. Parallel over rows.
std::vector<std::pair<DocId, double>> cosine_scores(std::span<const double> query,
                                                    const EmbeddingMatrix& corpus);

// The n best candidates (all of them if fewer), ranked. Throws InvalidArg on n < 1.
QueryRun top_n(std::string query_id, std::vector<std::pair<DocId, double>> scores, int n);

// Scores and truncates every query row against the corpus. Parallel over queries.
RetrievalRun retrieve_all(const EmbeddingMatrix& queries, const EmbeddingMatrix& corpus, int n);

}  // namespace confret
