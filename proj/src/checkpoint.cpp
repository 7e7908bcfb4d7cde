#include <bit>
#include <cstring>
#include <fstream>
#include <iterator>

#include "sparsereg/error.hpp"
#include "sparsereg/trainer.hpp"

namespace sparsereg {

namespace {

constexpr char kMagic[4] = {'S', 'R', 'C', 'K'};

template <typename T>
void put_le(std::ostream& out, T value) {
  for (std::size_t i = 0; i < sizeof(T); ++i) {
    out.put(static_cast<char>(static_cast<unsigned char>(value >> (8 * i))));
  }
}

class Reader {
 public:
  Reader(std::vector<unsigned char> bytes, std::string path)
      : bytes_(std::move(bytes)), path_(std::move(path)) {}

  template <typename T>
  T get_le() {
    need(sizeof(T));
    T value = 0;
    for (std::size_t i = 0; i < sizeof(T); ++i) value |= T{bytes_[pos_ + i]} << (8 * i);
    pos_ += sizeof(T);
    return value;
  }

  Matrix get_matrix() {
    const auto rows = get_le<std::uint64_t>();
    const auto cols = get_le<std::uint64_t>();
    if (rows != 0 && cols > (bytes_.size() / 8) / rows) {
      throw FormatError("checkpoint '" + path_ + "' truncated: matrix " + std::to_string(rows) +
                        "x" + std::to_string(cols) + " exceeds file size");
    }
    Matrix m(rows, cols);
    for (double& v : m.values()) v = std::bit_cast<double>(get_le<std::uint64_t>());
    return m;
  }

  void need(std::size_t n) {
    if (pos_ + n > bytes_.size()) {
      throw FormatError("checkpoint '" + path_ + "' truncated: expected at least " +
                        std::to_string(pos_ + n) + " bytes, got " + std::to_string(bytes_.size()));
    }
  }

  bool at_end() const { return pos_ == bytes_.size(); }
  std::size_t position() const { return pos_; }

 private:
  std::vector<unsigned char> bytes_;
  std::string path_;
  std::size_t pos_ = 0;
};

void put_matrix(std::ostream& out, const Matrix& m) {
  put_le<std::uint64_t>(out, m.rows());
  put_le<std::uint64_t>(out, m.cols());
  for (double v : m.values()) put_le<std::uint64_t>(out, std::bit_cast<std::uint64_t>(v));
}

}  // namespace

void save_checkpoint(const Mlp& model, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw FormatError("cannot open '" + path.string() + "' for writing");
  out.write(kMagic, sizeof(kMagic));
  put_le<std::uint32_t>(out, kCheckpointVersion);
  put_le<std::uint32_t>(out, static_cast<std::uint32_t>(model.layers.size()));
  for (const auto& layer : model.layers) {
    put_matrix(out, layer.weight);
    put_matrix(out, layer.bias);
  }
  if (!out) throw FormatError("failed writing checkpoint '" + path.string() + "'");
}

Mlp load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw FormatError("cannot open checkpoint '" + path.string() + "'");
  std::vector<unsigned char> bytes{std::istreambuf_iterator<char>(in),
                                   std::istreambuf_iterator<char>()};
  if (bytes.size() < sizeof(kMagic) || std::memcmp(bytes.data(), kMagic, sizeof(kMagic)) != 0) {
    throw FormatError("'" + path.string() + "' is not a checkpoint (bad magic)");
  }
  Reader reader(std::move(bytes), path.string());
  for (std::size_t i = 0; i < sizeof(kMagic); ++i) reader.get_le<std::uint8_t>();
  const auto version = reader.get_le<std::uint32_t>();
  if (version != kCheckpointVersion) {
    throw FormatError("checkpoint '" + path.string() + "' has unsupported version " +
                      std::to_string(version) + " (expected " +
                      std::to_string(kCheckpointVersion) + ")");
  }
  const auto layer_count = reader.get_le<std::uint32_t>();
  if (layer_count == 0) throw FormatError("checkpoint '" + path.string() + "' has no layers");

  Mlp model;
  for (std::uint32_t i = 0; i < layer_count; ++i) {
    DenseLayer layer;
    layer.weight = reader.get_matrix();
    layer.bias = reader.get_matrix();
    if (layer.bias.rows() != 1 || layer.bias.cols() != layer.weight.cols()) {
      throw FormatError("checkpoint layer " + std::to_string(i) + " bias shape " +
                        layer.bias.shape_string() + " does not match weight " +
                        layer.weight.shape_string());
    }
    if (i > 0 && model.layers.back().weight.cols() != layer.weight.rows()) {
      throw FormatError("checkpoint layer " + std::to_string(i) + " input width " +
                        std::to_string(layer.weight.rows()) + " does not chain");
    }
    model.layers.push_back(std::move(layer));
  }
  if (!reader.at_end()) {
    throw FormatError("checkpoint '" + path.string() + "' has trailing bytes after offset " +
                      std::to_string(reader.position()));
  }
  model.config.layer_widths.push_back(model.layers.front().weight.rows());
  for (const auto& layer : model.layers) model.config.layer_widths.push_back(layer.weight.cols());
  return model;
}

}  // namespace sparsereg
