#pragma once

#include <cstddef>
#include <filesystem>
#include <optional>
#include <string>
#include <unordered_map>
#include <vector>

#include <Eigen/Core>

namespace miltag {

// Word vectors keyed by tag token. Tokens keep their first-seen order so
// that saved tables are reproducible.
class EmbeddingTable {
 public:
  EmbeddingTable() = default;
  explicit EmbeddingTable(std::size_t dim);

  std::size_t dim() const noexcept { return dim_; }
  std::size_t size() const noexcept { return tokens_.size(); }
  bool empty() const noexcept { return tokens_.empty(); }

  // Inserts or replaces. Returns true when the token was already present.
  bool set(const std::string& token, Eigen::VectorXd vector);

  bool contains(const std::string& token) const { return index_.count(token) != 0; }
  const Eigen::VectorXd& at(const std::string& token) const;

  const std::vector<std::string>& tokens() const noexcept { return tokens_; }

  friend bool operator==(const EmbeddingTable& a, const EmbeddingTable& b);

 private:
  std::size_t dim_ = 0;
  std::vector<std::string> tokens_;
  std::vector<Eigen::VectorXd> vectors_;
  std::unordered_map<std::string, std::size_t> index_;
};

struct EmbeddingLoadResult {
  EmbeddingTable table;
  std::size_t duplicates = 0;  // lines whose token had already appeared
};

// Parses the GloVe text format: `token v1 ... vd` per nonempty line.
// Vectors are returned as read; call normalize_table before use.
EmbeddingLoadResult load_embeddings(const std::filesystem::path& path,
                                    std::optional<std::size_t> expected_dim = {});
EmbeddingLoadResult parse_embeddings(std::string_view text,
                                     std::optional<std::size_t> expected_dim = {});

void save_embeddings(const EmbeddingTable& table, const std::filesystem::path& path);

// Divides every vector by its Euclidean norm. Norms below 1e-12 are an error.
EmbeddingTable normalize_table(const EmbeddingTable& table);

// Ordered tag vocabulary with its d x T column matrix; column t is the vector
// of tags()[t].
class SemanticMatrix {
 public:
  SemanticMatrix() = default;
  SemanticMatrix(std::vector<std::string> tags, Eigen::MatrixXd columns);

  std::size_t dim() const noexcept { return static_cast<std::size_t>(columns_.rows()); }
  std::size_t tag_count() const noexcept { return tags_.size(); }
  const std::vector<std::string>& tags() const noexcept { return tags_; }
  const Eigen::MatrixXd& columns() const noexcept { return columns_; }
  std::optional<std::size_t> index_of(const std::string& tag) const;

  friend bool operator==(const SemanticMatrix& a, const SemanticMatrix& b) {
    return a.tags_ == b.tags_ && a.columns_.rows() == b.columns_.rows() &&
           a.columns_.cols() == b.columns_.cols() && a.columns_ == b.columns_;
  }

 private:
  std::vector<std::string> tags_;
  Eigen::MatrixXd columns_;
};

struct SemanticMatrices {
  SemanticMatrix seen;      // W: seen tags only
  SemanticMatrix extended;  // W': seen tags then unseen tags
};

// Throws MissingVectorError listing every absent token (seen and unseen).
SemanticMatrices build_matrix(const EmbeddingTable& table,
                              const std::vector<std::string>& seen_tags,
                              const std::vector<std::string>& unseen_tags);

// One token per line, order preserved. Blank lines are ignored and
// surrounding whitespace is trimmed.
std::vector<std::string> load_tag_list(const std::filesystem::path& path);
void save_tag_list(const std::vector<std::string>& tags, const std::filesystem::path& path);

}  // namespace miltag
