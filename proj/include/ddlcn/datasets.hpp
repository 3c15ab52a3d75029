#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "ddlcn/image.hpp"

namespace ddlcn {

struct LabeledImages {
  std::vector<GrayImage> images;
  std::vector<int> labels;
  std::vector<std::string> class_names;  // index == label

  std::size_t size() const { return images.size(); }
  std::size_t num_classes() const { return class_names.size(); }
};

/// Parses an IDX image file (magic 0x00000803) and label file (magic
/// 0x00000801). Pixel bytes are scaled by 1/255. Throws FormatError naming
/// the offending field.
LabeledImages parse_mnist(std::span<const std::uint8_t> image_bytes, std::span<const std::uint8_t> label_bytes);

LabeledImages load_mnist(const std::filesystem::path& images_path, const std::filesystem::path& labels_path);

/// Parses a binary 8-bit PGM ("P5", maxval <= 255).
GrayImage parse_pgm(std::span<const std::uint8_t> bytes);

struct ImageDirectory {
  LabeledImages data;
  std::size_t skipped = 0;          // files without a .pgm extension
  std::vector<std::string> errors;  // unreadable PGMs, one message per file
};

/// One subdirectory per class; sorted subdirectory names become labels
/// 0..r-1. Malformed PGMs are reported and skipped.
ImageDirectory load_image_dir(const std::filesystem::path& root);

std::vector<std::uint8_t> read_file(const std::filesystem::path& path);

}  // namespace ddlcn
