#include "miltag/embeddings.hpp"

#include <cmath>
#include <string_view>

#include "miltag/error.hpp"
#include "text_format.hpp"

namespace miltag {

MissingVectorError::MissingVectorError(std::vector<std::string> tokens)
    : Error([&] {
        std::string msg = "no embedding vector for tag(s):";
        for (const auto& t : tokens) msg += " " + t;
        return msg;
      }()),
      missing_(std::move(tokens)) {}

EmbeddingTable::EmbeddingTable(std::size_t dim) : dim_(dim) {
  if (dim == 0) throw ConfigError("embedding dimension must be positive");
}

bool EmbeddingTable::set(const std::string& token, Eigen::VectorXd vector) {
  if (static_cast<std::size_t>(vector.size()) != dim_) {
    throw ShapeError("embedding for '" + token + "' has length " +
                     std::to_string(vector.size()) + ", table dim is " + std::to_string(dim_));
  }
  if (auto it = index_.find(token); it != index_.end()) {
    vectors_[it->second] = std::move(vector);
    return true;
  }
  index_.emplace(token, tokens_.size());
  tokens_.push_back(token);
  vectors_.push_back(std::move(vector));
  return false;
}

const Eigen::VectorXd& EmbeddingTable::at(const std::string& token) const {
  auto it = index_.find(token);
  if (it == index_.end()) throw MissingVectorError({token});
  return vectors_[it->second];
}

bool operator==(const EmbeddingTable& a, const EmbeddingTable& b) {
  if (a.dim_ != b.dim_ || a.tokens_ != b.tokens_) return false;
  for (std::size_t i = 0; i < a.vectors_.size(); ++i) {
    if (a.vectors_[i] != b.vectors_[i]) return false;
  }
  return true;
}

EmbeddingLoadResult parse_embeddings(std::string_view text,
                                     std::optional<std::size_t> expected_dim) {
  if (expected_dim && *expected_dim == 0) throw ConfigError("expected_dim must be positive");
  EmbeddingLoadResult result;
  std::optional<std::size_t> dim = expected_dim;
  std::size_t line_no = 0;
  while (!text.empty()) {
    const auto nl = text.find('\n');
    const auto line = text.substr(0, nl);
    text = nl == std::string_view::npos ? std::string_view{} : text.substr(nl + 1);
    ++line_no;

    const auto fields = detail::split_whitespace(line);
    if (fields.empty()) continue;
    const std::size_t len = fields.size() - 1;
    if (len == 0) {
      throw ParseError("line " + std::to_string(line_no) + ": token without vector");
    }
    if (!dim) dim = len;
    if (len != *dim) {
      throw ShapeError("line " + std::to_string(line_no) + ": vector length " +
                       std::to_string(len) + " differs from dimension " + std::to_string(*dim));
    }
    if (result.table.dim() == 0) result.table = EmbeddingTable(*dim);

    Eigen::VectorXd v(static_cast<Eigen::Index>(len));
    for (std::size_t k = 0; k < len; ++k) {
      const auto value = detail::parse_double(fields[k + 1]);
      if (!value) {
        throw ParseError("line " + std::to_string(line_no) + ": cannot parse '" +
                         std::string(fields[k + 1]) + "' as a number");
      }
      v[static_cast<Eigen::Index>(k)] = *value;
    }
    if (result.table.set(std::string(fields[0]), std::move(v))) ++result.duplicates;
  }
  if (result.table.empty()) throw ParseError("embedding file contains no vectors");
  return result;
}

EmbeddingLoadResult load_embeddings(const std::filesystem::path& path,
                                    std::optional<std::size_t> expected_dim) {
  const auto text = detail::read_file(path);
  try {
    return parse_embeddings(text, expected_dim);
  } catch (const ParseError& e) {
    throw ParseError(path.string() + ": " + e.what());
  } catch (const ShapeError& e) {
    throw ShapeError(path.string() + ": " + e.what());
  }
}

void save_embeddings(const EmbeddingTable& table, const std::filesystem::path& path) {
  std::string out;
  for (const auto& token : table.tokens()) {
    out += token;
    for (double x : table.at(token)) {
      out += ' ';
      out += detail::format_double(x);
    }
    out += '\n';
  }
  detail::write_file(path, out);
}

EmbeddingTable normalize_table(const EmbeddingTable& table) {
  EmbeddingTable out(table.dim());
  for (const auto& token : table.tokens()) {
    const auto& v = table.at(token);
    const double norm = v.norm();
    if (!(norm >= 1e-12)) {
      throw NumericError("embedding for '" + token + "' has zero norm");
    }
    out.set(token, v / norm);
  }
  return out;
}

SemanticMatrix::SemanticMatrix(std::vector<std::string> tags, Eigen::MatrixXd columns)
    : tags_(std::move(tags)), columns_(std::move(columns)) {
  if (static_cast<std::size_t>(columns_.cols()) != tags_.size()) {
    throw ShapeError("semantic matrix has " + std::to_string(columns_.cols()) +
                     " columns for " + std::to_string(tags_.size()) + " tags");
  }
}

std::optional<std::size_t> SemanticMatrix::index_of(const std::string& tag) const {
  for (std::size_t i = 0; i < tags_.size(); ++i) {
    if (tags_[i] == tag) return i;
  }
  return std::nullopt;
}

namespace {

Eigen::MatrixXd stack_columns(const EmbeddingTable& table, const std::vector<std::string>& tags) {
  Eigen::MatrixXd m(static_cast<Eigen::Index>(table.dim()), static_cast<Eigen::Index>(tags.size()));
  for (std::size_t t = 0; t < tags.size(); ++t) m.col(static_cast<Eigen::Index>(t)) = table.at(tags[t]);
  return m;
}

}  // namespace

SemanticMatrices build_matrix(const EmbeddingTable& table,
                              const std::vector<std::string>& seen_tags,
                              const std::vector<std::string>& unseen_tags) {
  std::vector<std::string> missing;
  for (const auto* list : {&seen_tags, &unseen_tags}) {
    for (const auto& t : *list) {
      if (!table.contains(t)) missing.push_back(t);
    }
  }
  if (!missing.empty()) throw MissingVectorError(std::move(missing));

  std::vector<std::string> all = seen_tags;
  all.insert(all.end(), unseen_tags.begin(), unseen_tags.end());
  return {SemanticMatrix(seen_tags, stack_columns(table, seen_tags)),
          SemanticMatrix(all, stack_columns(table, all))};
}

std::vector<std::string> load_tag_list(const std::filesystem::path& path) {
  const auto text = detail::read_file(path);
  std::vector<std::string> tags;
  std::string_view rest = text;
  while (!rest.empty()) {
    const auto nl = rest.find('\n');
    const auto line = detail::trim(rest.substr(0, nl));
    rest = nl == std::string_view::npos ? std::string_view{} : rest.substr(nl + 1);
    if (!line.empty()) tags.emplace_back(line);
  }
  return tags;
}

void save_tag_list(const std::vector<std::string>& tags, const std::filesystem::path& path) {
  std::string out;
  for (const auto& t : tags) {
    out += t;
    out += '\n';
  }
  detail::write_file(path, out);
}

}  // namespace miltag
