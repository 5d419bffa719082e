#include "sparseseg/model.hpp"

#include <random>

namespace sparseseg {

namespace {

constexpr std::uint32_t kVersion = 1;

void read_into(io::Reader& r, RowMatrix<float>& m, Eigen::Index rows, Eigen::Index cols) {
  m.resize(rows, cols);
  r.read_floats(m.data(), static_cast<std::size_t>(m.size()));
}

void read_into(io::Reader& r, ColVector<float>& v, Eigen::Index n) {
  v.resize(n);
  r.read_floats(v.data(), static_cast<std::size_t>(n));
}

template <typename Derived>
void write_tensor(io::Writer& w, const Eigen::PlainObjectBase<Derived>& t) {
  w.write_floats(t.data(), static_cast<std::size_t>(t.size()));
}

std::vector<std::string> split_names(const std::string& table) {
  std::vector<std::string> names;
  std::size_t start = 0;
  while (true) {
    const auto end = table.find('\n', start);
    names.push_back(table.substr(start, end - start));
    if (end == std::string::npos) break;
    start = end + 1;
  }
  return names;
}

}  // namespace

ClassProbabilities softmax(const Eigen::Ref<const Eigen::VectorXf>& logits) {
  ClassProbabilities out;
  int best = 0;
  for (Eigen::Index i = 1; i < logits.size(); ++i)
    if (logits[i] > logits[best]) best = static_cast<int>(i);
  out.argmax_label = best;
  out.probs = (logits.array() - logits[best]).exp().matrix();
  out.probs /= out.probs.sum();
  return out;
}

ModelWeights load_weights(io::ByteView bytes) {
  io::Reader r(bytes);
  io::expect_magic(r, "ORGC");
  r.require(6 * sizeof(std::uint32_t));
  const auto version = r.read<std::uint32_t>();
  if (version != kVersion)
    throw Error(ErrorCode::UnsupportedVersion, "ORGC version " + std::to_string(version));
  const std::uint64_t input = r.read<std::uint32_t>();
  const std::uint64_t hidden = r.read<std::uint32_t>();
  const std::uint64_t num_blocks = r.read<std::uint32_t>();
  const std::uint64_t classes = r.read<std::uint32_t>();
  const std::uint64_t name_bytes = r.read<std::uint32_t>();

  if (input == 0 || hidden == 0) throw Error(ErrorCode::DimensionMismatch, "zero layer width");
  if (num_blocks == 0) throw Error(ErrorCode::DimensionMismatch, "no residual blocks");
  if (classes < 2) throw Error(ErrorCode::DimensionMismatch, "fewer than two classes");

  auto names = split_names(r.read_string(name_bytes));
  if (names.size() != classes)
    throw Error(ErrorCode::DimensionMismatch, std::to_string(names.size()) + " label names for " +
                                                  std::to_string(classes) + " classes");

  const long double approx = static_cast<long double>(hidden) * input +
                             static_cast<long double>(num_blocks) * 2 * hidden * hidden +
                             static_cast<long double>(classes) * hidden;
  if (approx > static_cast<long double>(r.remaining()))
    throw Error(ErrorCode::TruncatedData, "tensor data shorter than header implies");
  const std::uint64_t floats = hidden * input + hidden +
                               num_blocks * (2 * hidden * hidden + 6 * hidden) +
                               classes * hidden + classes;
  if (r.remaining() / sizeof(float) < floats)
    throw Error(ErrorCode::TruncatedData, "tensor data shorter than header implies");
  if (r.remaining() != floats * sizeof(float))
    throw Error(ErrorCode::MalformedHeader, "trailing bytes after tensors");

  const auto in = static_cast<Eigen::Index>(input);
  const auto h = static_cast<Eigen::Index>(hidden);
  const auto c = static_cast<Eigen::Index>(classes);
  ModelWeights w;
  read_into(r, w.projection, h, in);
  read_into(r, w.projection_bias, h);
  w.blocks.resize(num_blocks);
  for (auto& b : w.blocks) {
    read_into(r, b.weight1, h, h);
    read_into(r, b.bias1, h);
    read_into(r, b.scale1, h);
    read_into(r, b.shift1, h);
    read_into(r, b.weight2, h, h);
    read_into(r, b.bias2, h);
    read_into(r, b.scale2, h);
    read_into(r, b.shift2, h);
  }
  read_into(r, w.head, c, h);
  read_into(r, w.head_bias, c);
  w.label_names = std::move(names);
  w.validate();
  return w;
}

io::Bytes save_weights(const ModelWeights& w) {
  w.validate();
  std::string table;
  for (std::size_t i = 0; i < w.label_names.size(); ++i) {
    if (w.label_names[i].find('\n') != std::string::npos)
      throw Error(ErrorCode::InvalidArgument, "label names must not contain newlines");
    if (i) table += '\n';
    table += w.label_names[i];
  }

  io::Writer out;
  out.write_string("ORGC");
  out.write<std::uint32_t>(kVersion);
  out.write<std::uint32_t>(static_cast<std::uint32_t>(w.input_dim()));
  out.write<std::uint32_t>(static_cast<std::uint32_t>(w.hidden_dim()));
  out.write<std::uint32_t>(static_cast<std::uint32_t>(w.num_blocks()));
  out.write<std::uint32_t>(static_cast<std::uint32_t>(w.num_classes()));
  out.write<std::uint32_t>(static_cast<std::uint32_t>(table.size()));
  out.write_string(table);
  write_tensor(out, w.projection);
  write_tensor(out, w.projection_bias);
  for (const auto& b : w.blocks) {
    write_tensor(out, b.weight1);
    write_tensor(out, b.bias1);
    write_tensor(out, b.scale1);
    write_tensor(out, b.shift1);
    write_tensor(out, b.weight2);
    write_tensor(out, b.bias2);
    write_tensor(out, b.scale2);
    write_tensor(out, b.shift2);
  }
  write_tensor(out, w.head);
  write_tensor(out, w.head_bias);
  return out.take();
}

ModelWeights load_weights_file(const std::string& path) { return load_weights(io::read_file(path)); }

ModelWeights make_random_weights(int input_dim, int hidden_dim, int num_blocks,
                                 std::vector<std::string> label_names, std::uint64_t seed) {
  auto w = ModelWeights::zeros(input_dim, hidden_dim, num_blocks, std::move(label_names));
  std::mt19937_64 rng(seed);
  const auto fill = [&rng](auto& tensor, double stddev) {
    std::normal_distribution<float> dist(0.0f, static_cast<float>(stddev));
    for (Eigen::Index i = 0; i < tensor.size(); ++i) tensor.data()[i] = dist(rng);
  };
  fill(w.projection, std::sqrt(2.0 / input_dim));
  fill(w.projection_bias, 0.01);
  for (auto& b : w.blocks) {
    fill(b.weight1, std::sqrt(2.0 / hidden_dim));
    fill(b.bias1, 0.01);
    b.scale1.setOnes();
    fill(b.weight2, std::sqrt(2.0 / hidden_dim));
    fill(b.bias2, 0.01);
    b.scale2.setOnes();
  }
  fill(w.head, std::sqrt(1.0 / hidden_dim));
  fill(w.head_bias, 0.01);
  return w;
}

std::vector<std::string> default_label_names(int num_classes) {
  std::vector<std::string> names{"background"};
  for (int c = 1; c < num_classes; ++c) names.push_back("organ_" + std::to_string(c));
  return names;
}

}  // namespace sparseseg
