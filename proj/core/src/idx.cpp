// IDX container layout (all integers big-endian):
//   images: u32 magic 0x00000803, u32 count, u32 rows, u32 cols, then
//           count*rows*cols unsigned pixel bytes
//   labels: u32 magic 0x00000801, u32 count, then count unsigned label bytes

#include <algorithm>
#include <fstream>
#include <iterator>
#include <string>

#include "fednoil/data.hpp"
#include "fednoil/errors.hpp"

namespace fednoil {
namespace {

constexpr std::uint32_t kImagesMagic = 0x00000803;
constexpr std::uint32_t kLabelsMagic = 0x00000801;

std::uint32_t read_be32(std::span<const std::uint8_t> bytes,
                        std::size_t offset, const char* file) {
  if (offset + 4 > bytes.size()) {
    throw ParseError(std::string(file) + ": truncated header at offset " +
                     std::to_string(offset));
  }
  return (std::uint32_t{bytes[offset]} << 24) |
         (std::uint32_t{bytes[offset + 1]} << 16) |
         (std::uint32_t{bytes[offset + 2]} << 8) |
         std::uint32_t{bytes[offset + 3]};
}

std::vector<std::uint8_t> read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string());
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

}  // namespace

Dataset parse_idx(std::span<const std::uint8_t> images,
                  std::span<const std::uint8_t> labels) {
  const std::uint32_t image_magic = read_be32(images, 0, "images");
  if (image_magic != kImagesMagic) {
    throw ParseError("images: bad magic at offset 0");
  }
  const std::uint32_t label_magic = read_be32(labels, 0, "labels");
  if (label_magic != kLabelsMagic) {
    throw ParseError("labels: bad magic at offset 0");
  }
  const std::uint32_t count = read_be32(images, 4, "images");
  const std::uint32_t rows = read_be32(images, 8, "images");
  const std::uint32_t cols = read_be32(images, 12, "images");
  const std::uint32_t label_count = read_be32(labels, 4, "labels");
  if (count != label_count) {
    throw ParseError("labels: count " + std::to_string(label_count) +
                     " at offset 4 does not match image count " +
                     std::to_string(count));
  }

  const std::size_t dim = std::size_t{rows} * cols;
  const std::size_t pixel_bytes = std::size_t{count} * dim;
  if (images.size() < 16 + pixel_bytes) {
    throw ParseError("images: truncated payload at offset " +
                     std::to_string(images.size()) + ", expected " +
                     std::to_string(16 + pixel_bytes) + " bytes");
  }
  if (labels.size() < 8 + std::size_t{count}) {
    throw ParseError("labels: truncated payload at offset " +
                     std::to_string(labels.size()) + ", expected " +
                     std::to_string(8 + std::size_t{count}) + " bytes");
  }

  Dataset out;
  out.features = Matrix(0, dim);
  std::vector<double> row(dim);
  int max_label = 0;
  for (std::size_t i = 0; i < count; ++i) {
    const std::uint8_t* pixels = images.data() + 16 + i * dim;
    std::transform(pixels, pixels + dim, row.begin(),
                   [](std::uint8_t p) { return p / 255.0; });
    out.features.append_row(row);
    const int label = labels[8 + i];
    max_label = std::max(max_label, label);
    out.true_labels.push_back(label);
  }
  out.num_classes = std::max(2, max_label + 1);
  return out;
}

Dataset load_idx(const std::filesystem::path& images_path,
                 const std::filesystem::path& labels_path) {
  const auto images = read_file(images_path);
  const auto labels = read_file(labels_path);
  try {
    return parse_idx(images, labels);
  } catch (const ParseError& e) {
    throw ParseError(images_path.string() + " / " + labels_path.string() +
                     ": " + e.what());
  }
}

}  // namespace fednoil
