#include "confret/retrieval.hpp"

#include <array>
#include <bit>
#include <charconv>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <limits>

#include <fmt/format.h>

#include "confret/error.hpp"
#include "confret/io.hpp"
#include "kernels.hpp"

namespace confret {

namespace {

constexpr std::string_view kMagic = "CRET1";

static_assert(std::endian::native == std::endian::little, "embedding I/O assumes a little-endian host");

template <typename T>
T read_le(io::Reader& in, const char* what) {
  T v{};
  if (!in.read_exact(&v, sizeof(T))) {
    throw Error(ErrorCode::ParseError, fmt::format("{}: truncated {}", in.path(), what));
  }
  return v;
}

template <typename T>
void append_le(std::string& buf, T v) {
  std::array<char, sizeof(T)> bytes{};
  std::memcpy(bytes.data(), &v, sizeof(T));
  buf.append(bytes.data(), bytes.size());
}

double squared_norm(std::span<const double> v) {
  double acc = 0.0;
  for (double x : v) acc += x * x;
  return acc;
}

EmbeddingMatrix load_binary(io::Reader& in) {
  std::array<char, 5> magic{};
  in.read_exact(magic.data(), magic.size());
  const auto dim = read_le<std::uint32_t>(in, "header");
  const auto count = read_le<std::uint64_t>(in, "header");
  if (dim == 0) throw Error(ErrorCode::ParseError, fmt::format("{}: zero dimension", in.path()));

  std::vector<DocId> ids;
  std::vector<double> values;
  ids.reserve(count);
  values.reserve(count * dim);
  std::vector<float> row(dim);
  std::string id;
  for (std::uint64_t i = 0; i < count; ++i) {
    const auto len = read_le<std::uint16_t>(in, "record id length");
    id.assign(len, '\0');
    if (!in.read_exact(id.data(), len) || !in.read_exact(row.data(), dim * sizeof(float))) {
      throw Error(ErrorCode::ParseError, fmt::format("{}: truncated record {}", in.path(), i));
    }
    ids.emplace_back(id);
    values.insert(values.end(), row.begin(), row.end());
  }
  return EmbeddingMatrix(std::move(ids), dim, std::move(values));
}

EmbeddingMatrix load_text(io::Reader& in) {
  std::vector<DocId> ids;
  std::vector<double> values;
  std::size_t dim = 0;
  std::string line;
  while (in.next_line(line)) {
    if (line.empty()) continue;
    const auto tab = line.find('\t');
    if (tab == std::string::npos || tab == 0) {
      throw Error(ErrorCode::ParseError,
                  fmt::format("{}:{}: expected id<TAB>values", in.path(), in.line_number()));
    }
    std::size_t n = 0;
    const char* p = line.data() + tab + 1;
    const char* end = line.data() + line.size();
    while (p < end) {
      double v = 0.0;
      auto [next, ec] = std::from_chars(p, end, v);
      if (ec != std::errc()) {
        throw Error(ErrorCode::ParseError,
                    fmt::format("{}:{}: bad number in column {}", in.path(), in.line_number(), n + 1));
      }
      values.push_back(v);
      ++n;
      p = next;
      if (p < end) {
        if (*p != ',') {
          throw Error(ErrorCode::ParseError,
                      fmt::format("{}:{}: expected ',' after value {}", in.path(), in.line_number(), n));
        }
        ++p;
      }
    }
    if (dim == 0) dim = n;
    if (n != dim || n == 0) {
      throw Error(ErrorCode::DimError,
                  fmt::format("{}:{}: {} values, expected {}", in.path(), in.line_number(), n, dim));
    }
    ids.emplace_back(line.substr(0, tab));
  }
  return EmbeddingMatrix(std::move(ids), dim, std::move(values));
}

}  // namespace

EmbeddingMatrix::EmbeddingMatrix(std::vector<DocId> ids, std::size_t dim, std::vector<double> values)
    : ids_(std::move(ids)), dim_(dim), values_(std::move(values)) {
  if (values_.size() != ids_.size() * dim_) {
    throw Error(ErrorCode::DimError,
                fmt::format("{} values for {} rows of dim {}", values_.size(), ids_.size(), dim_));
  }
  for (double v : values_) {
    if (!std::isfinite(v)) throw Error(ErrorCode::InvalidScore, "non-finite embedding value");
  }
}

void EmbeddingMatrix::normalize() {
  for (std::size_t i = 0; i < rows(); ++i) {
    double* r = values_.data() + i * dim_;
    const double norm = std::sqrt(squared_norm({r, dim_}));
    if (norm == 0.0) {
      throw Error(ErrorCode::InvalidQuery, fmt::format("zero-norm embedding for '{}'", ids_[i].str()));
    }
    for (std::size_t j = 0; j < dim_; ++j) r[j] /= norm;
  }
  normalized_ = true;
}

EmbeddingMatrix load_embeddings(const std::string& path, bool normalize) {
  io::Reader in(path);
  EmbeddingMatrix m = in.peek(kMagic.size()) == kMagic ? load_binary(in) : load_text(in);
  if (normalize) m.normalize();
  return m;
}

void save_embeddings_binary(const EmbeddingMatrix& m, const std::string& path) {
  std::string buf(kMagic);
  append_le(buf, static_cast<std::uint32_t>(m.dim()));
  append_le(buf, static_cast<std::uint64_t>(m.rows()));
  for (std::size_t i = 0; i < m.rows(); ++i) {
    const auto& id = m.ids()[i].str();
    if (id.size() > std::numeric_limits<std::uint16_t>::max()) {
      throw Error(ErrorCode::InvalidArg, "document id longer than 65535 bytes");
    }
    append_le(buf, static_cast<std::uint16_t>(id.size()));
    buf += id;
    for (double v : m.row(i)) append_le(buf, static_cast<float>(v));
  }
  io::Writer out(path);
  out.write(buf);
  out.close();
}

void save_embeddings_text(const EmbeddingMatrix& m, const std::string& path) {
  io::Writer out(path);
  std::string line;
  for (std::size_t i = 0; i < m.rows(); ++i) {
    line = m.ids()[i].str();
    line += '\t';
    const auto r = m.row(i);
    for (std::size_t j = 0; j < r.size(); ++j) {
      if (j > 0) line += ',';
      line += fmt::format("{}", r[j]);
    }
    line += '\n';
    out.write(line);
  }
  out.close();
}

namespace kernels {

double query_norm(std::span<const double> query, const EmbeddingMatrix& corpus) {
  if (query.size() != corpus.dim()) {
    throw Error(ErrorCode::DimError,
                fmt::format("query dim {} does not match corpus dim {}", query.size(), corpus.dim()));
  }
  for (double x : query) {
    if (!std::isfinite(x)) throw Error(ErrorCode::InvalidQuery, "non-finite query component");
  }
  const double norm = std::sqrt(squared_norm(query));
  if (norm == 0.0) throw Error(ErrorCode::InvalidQuery, "zero-norm query");
  return norm;
}

double cosine_at(std::span<const double> query, double query_norm, const EmbeddingMatrix& corpus,
                 std::size_t i) {
  const auto row = corpus.row(i);
  double dot = 0.0;
  for (std::size_t j = 0; j < row.size(); ++j) dot += query[j] * row[j];
  const double row_norm = corpus.normalized() ? 1.0 : std::sqrt(squared_norm(row));
  return dot / (query_norm * row_norm);
}

}  // namespace kernels

std::vector<std::pair<DocId, double>> cosine_scores(std::span<const double> query,
                                                    const EmbeddingMatrix& corpus) {
  const double qn = kernels::query_norm(query, corpus);
  const auto n = static_cast<std::ptrdiff_t>(corpus.rows());
  std::vector<double> scores(corpus.rows());
#pragma omp parallel for schedule(static) if (n > 4096)
  for (std::ptrdiff_t i = 0; i < n; ++i) {
    scores[i] = kernels::cosine_at(query, qn, corpus, static_cast<std::size_t>(i));
  }
  std::vector<std::pair<DocId, double>> out;
  out.reserve(corpus.rows());
  for (std::size_t i = 0; i < corpus.rows(); ++i) out.emplace_back(corpus.ids()[i], scores[i]);
  return out;
}

QueryRun top_n(std::string query_id, std::vector<std::pair<DocId, double>> scores, int n) {
  if (n < 1) throw Error(ErrorCode::InvalidArg, fmt::format("n must be >= 1, got {}", n));
  return make_query_run(std::move(query_id), std::move(scores), n);
}

RetrievalRun retrieve_all(const EmbeddingMatrix& queries, const EmbeddingMatrix& corpus, int n) {
  if (n < 1) throw Error(ErrorCode::InvalidArg, fmt::format("n must be >= 1, got {}", n));
  const auto nq = static_cast<std::ptrdiff_t>(queries.rows());
  std::vector<QueryRun> runs(queries.rows());
  kernels::ErrorSlot failure;
#pragma omp parallel for schedule(dynamic)
  for (std::ptrdiff_t i = 0; i < nq; ++i) {
    failure.run([&] {
      const auto q = queries.row(static_cast<std::size_t>(i));
      const double qn = kernels::query_norm(q, corpus);
      std::vector<std::pair<DocId, double>> scores;
      scores.reserve(corpus.rows());
      for (std::size_t j = 0; j < corpus.rows(); ++j) {
        scores.emplace_back(corpus.ids()[j], kernels::cosine_at(q, qn, corpus, j));
      }
      runs[i] = top_n(queries.ids()[i].str(), std::move(scores), n);
    });
  }
  failure.rethrow();
  return RetrievalRun(std::move(runs), n);
}

}  // namespace confret
