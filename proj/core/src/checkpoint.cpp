#include "miltag/checkpoint.hpp"

#include <algorithm>
#include <bit>
#include <cstring>

#include "miltag/error.hpp"
#include "text_format.hpp"

namespace miltag {

namespace {

constexpr char kMagic[8] = {'M', 'I', 'L', 'T', 'A', 'G', 'C', 'K'};

template <typename T>
void put_le(std::string& out, T value) {
  unsigned char bytes[sizeof(T)];
  std::memcpy(bytes, &value, sizeof(T));
  if constexpr (std::endian::native == std::endian::big) {
    std::reverse(std::begin(bytes), std::end(bytes));
  }
  out.append(reinterpret_cast<const char*>(bytes), sizeof(T));
}

class Reader {
 public:
  explicit Reader(std::string_view bytes) : bytes_(bytes) {}

  template <typename T>
  T get() {
    if (bytes_.size() - pos_ < sizeof(T)) throw ParseError("checkpoint is truncated");
    unsigned char raw[sizeof(T)];
    std::memcpy(raw, bytes_.data() + pos_, sizeof(T));
    pos_ += sizeof(T);
    if constexpr (std::endian::native == std::endian::big) {
      std::reverse(std::begin(raw), std::end(raw));
    }
    T value;
    std::memcpy(&value, raw, sizeof(T));
    return value;
  }

  std::string_view take(std::size_t n) {
    if (bytes_.size() - pos_ < n) throw ParseError("checkpoint is truncated");
    auto s = bytes_.substr(pos_, n);
    pos_ += n;
    return s;
  }

  bool done() const { return pos_ == bytes_.size(); }

 private:
  std::string_view bytes_;
  std::size_t pos_ = 0;
};

void put_matrix_rowmajor(std::string& out, const Eigen::MatrixXd& m) {
  for (Eigen::Index r = 0; r < m.rows(); ++r) {
    for (Eigen::Index c = 0; c < m.cols(); ++c) put_le(out, m(r, c));
  }
}

Eigen::MatrixXd get_matrix_rowmajor(Reader& in, Eigen::Index rows, Eigen::Index cols) {
  Eigen::MatrixXd m(rows, cols);
  for (Eigen::Index r = 0; r < rows; ++r) {
    for (Eigen::Index c = 0; c < cols; ++c) m(r, c) = in.get<double>();
  }
  return m;
}

}  // namespace

std::string encode_checkpoint(const Checkpoint& ckpt) {
  const auto& h = ckpt.head;
  std::string out(kMagic, sizeof kMagic);
  put_le<std::uint32_t>(out, kCheckpointVersion);
  put_le<std::uint32_t>(out, ckpt.pooling == Pooling::Mean ? 0u : 1u);
  put_le<std::uint64_t>(out, static_cast<std::uint64_t>(h.W1.cols()));
  put_le<std::uint64_t>(out, static_cast<std::uint64_t>(h.W1.rows()));
  put_le<std::uint64_t>(out, static_cast<std::uint64_t>(h.W2.rows()));
  put_le<std::uint64_t>(out, static_cast<std::uint64_t>(ckpt.seen_count));
  put_matrix_rowmajor(out, h.W1);
  for (double x : h.b1) put_le(out, x);
  put_matrix_rowmajor(out, h.W2);
  for (double x : h.b2) put_le(out, x);
  return out;
}

Checkpoint decode_checkpoint(std::string_view bytes) {
  Reader in(bytes);
  if (in.take(sizeof kMagic) != std::string_view(kMagic, sizeof kMagic)) {
    throw ParseError("not a checkpoint file (bad magic)");
  }
  const auto version = in.get<std::uint32_t>();
  if (version != kCheckpointVersion) {
    throw ParseError("unsupported checkpoint version " + std::to_string(version));
  }
  const auto pooling = in.get<std::uint32_t>();
  if (pooling > 1) throw ParseError("checkpoint has unknown pooling code");
  const auto D = in.get<std::uint64_t>();
  const auto H = in.get<std::uint64_t>();
  const auto d = in.get<std::uint64_t>();
  const auto S = in.get<std::uint64_t>();
  constexpr std::uint64_t kMaxDim = 1u << 24;
  if (D == 0 || H == 0 || d == 0 || D > kMaxDim || H > kMaxDim || d > kMaxDim) {
    throw ParseError("checkpoint has invalid dimensions");
  }
  const std::uint64_t expected = 48 + 8 * (H * D + H + d * H + d);
  if (bytes.size() != expected) {
    throw ParseError("checkpoint size " + std::to_string(bytes.size()) + " does not match " +
                     "declared dimensions (" + std::to_string(expected) + " bytes)");
  }

  Checkpoint ckpt;
  ckpt.pooling = pooling == 0 ? Pooling::Mean : Pooling::Max;
  ckpt.seen_count = static_cast<std::size_t>(S);
  const auto Hi = static_cast<Eigen::Index>(H);
  const auto Di = static_cast<Eigen::Index>(D);
  const auto di = static_cast<Eigen::Index>(d);
  ckpt.head.W1 = get_matrix_rowmajor(in, Hi, Di);
  ckpt.head.b1.resize(Hi);
  for (auto& x : ckpt.head.b1) x = in.get<double>();
  ckpt.head.W2 = get_matrix_rowmajor(in, di, Hi);
  ckpt.head.b2.resize(di);
  for (auto& x : ckpt.head.b2) x = in.get<double>();
  return ckpt;
}

void save_checkpoint(const ModelParams& params, const std::filesystem::path& path) {
  // S comes from the installed frozen matrix, which must be the seen-only W.
  detail::write_file(path, encode_checkpoint({params.head, params.pooling, params.tag_count()}));
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
  try {
    return decode_checkpoint(detail::read_file(path));
  } catch (const ParseError& e) {
    throw ParseError(path.string() + ": " + e.what());
  }
}

ModelParams restore_params(const Checkpoint& ckpt, SemanticMatrix semantic) {
  if (semantic.tag_count() < ckpt.seen_count) {
    throw ConfigError("checkpoint was trained on " + std::to_string(ckpt.seen_count) +
                      " seen tags but the tag universe has only " +
                      std::to_string(semantic.tag_count()));
  }
  ModelParams params{ckpt.head, std::move(semantic), ckpt.pooling};
  params.check_shapes();
  return params;
}

}  // namespace miltag
