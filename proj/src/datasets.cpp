#include "ddlcn/datasets.hpp"

#include <algorithm>
#include <cctype>
#include <fstream>
#include <iterator>
#include <stdexcept>

#include "ddlcn/errors.hpp"

namespace ddlcn {
namespace {

std::uint32_t read_be32(std::span<const std::uint8_t> b, std::size_t at, const char* field) {
  if (b.size() < at + 4) throw FormatError(std::string("truncated IDX header: missing ") + field, b.size());
  return (std::uint32_t{b[at]} << 24) | (std::uint32_t{b[at + 1]} << 16) | (std::uint32_t{b[at + 2]} << 8) |
         std::uint32_t{b[at + 3]};
}

}  // namespace

std::vector<std::uint8_t> read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open " + path.string());
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

LabeledImages parse_mnist(std::span<const std::uint8_t> image_bytes, std::span<const std::uint8_t> label_bytes) {
  if (read_be32(image_bytes, 0, "image magic") != 0x00000803u) throw FormatError("bad magic in image file", 0);
  if (read_be32(label_bytes, 0, "label magic") != 0x00000801u) throw FormatError("bad magic in label file", 0);
  const std::uint32_t count = read_be32(image_bytes, 4, "image count");
  const std::uint32_t rows = read_be32(image_bytes, 8, "row count");
  const std::uint32_t cols = read_be32(image_bytes, 12, "column count");
  const std::uint32_t label_count = read_be32(label_bytes, 4, "label count");
  if (count != label_count) {
    throw FormatError("image count " + std::to_string(count) + " does not match label count " +
                          std::to_string(label_count),
                      4);
  }
  const std::uint64_t pixels = std::uint64_t{rows} * cols;
  if (image_bytes.size() < 16 + pixels * count) throw FormatError("truncated image data", image_bytes.size());
  if (label_bytes.size() < 8 + std::uint64_t{count}) throw FormatError("truncated label data", label_bytes.size());

  LabeledImages out;
  out.images.reserve(count);
  out.labels.reserve(count);
  int max_label = -1;
  for (std::uint32_t i = 0; i < count; ++i) {
    GrayImage img{cols, rows, std::vector<double>(pixels)};
    const std::uint8_t* src = image_bytes.data() + 16 + pixels * i;
    for (std::uint64_t p = 0; p < pixels; ++p) img.pixels[p] = static_cast<double>(src[p]) / 255.0;
    out.images.push_back(std::move(img));
    const int label = label_bytes[8 + i];
    max_label = std::max(max_label, label);
    out.labels.push_back(label);
  }
  for (int c = 0; c <= max_label; ++c) out.class_names.push_back(std::to_string(c));
  return out;
}

LabeledImages load_mnist(const std::filesystem::path& images_path, const std::filesystem::path& labels_path) {
  return parse_mnist(read_file(images_path), read_file(labels_path));
}

GrayImage parse_pgm(std::span<const std::uint8_t> bytes) {
  std::size_t pos = 0;
  auto skip_space = [&] {
    while (pos < bytes.size()) {
      if (bytes[pos] == '#') {
        while (pos < bytes.size() && bytes[pos] != '\n') ++pos;
      } else if (std::isspace(bytes[pos])) {
        ++pos;
      } else {
        break;
      }
    }
  };
  auto read_uint = [&](const char* field) {
    skip_space();
    const std::size_t start = pos;
    std::uint64_t v = 0;
    while (pos < bytes.size() && std::isdigit(bytes[pos]) && pos - start < 9) v = v * 10 + (bytes[pos++] - '0');
    if (pos == start) throw FormatError(std::string("PGM header: bad ") + field, start);
    return v;
  };

  if (bytes.size() < 2 || bytes[0] != 'P' || bytes[1] != '5') throw FormatError("bad magic (expected P5)", 0);
  pos = 2;
  const std::uint64_t width = read_uint("width");
  const std::uint64_t height = read_uint("height");
  const std::uint64_t maxval = read_uint("maxval");
  if (width == 0 || height == 0) throw FormatError("PGM header: zero dimension", pos);
  if (maxval == 0 || maxval > 255) throw FormatError("PGM header: maxval must be in [1, 255]", pos);
  if (pos >= bytes.size() || !std::isspace(bytes[pos])) throw FormatError("PGM header: missing separator", pos);
  ++pos;
  if (bytes.size() - pos < width * height) throw FormatError("truncated PGM pixel data", bytes.size());

  GrayImage img{width, height, std::vector<double>(width * height)};
  for (std::uint64_t i = 0; i < width * height; ++i) {
    img.pixels[i] = std::min(1.0, static_cast<double>(bytes[pos + i]) / static_cast<double>(maxval));
  }
  return img;
}

ImageDirectory load_image_dir(const std::filesystem::path& root) {
  namespace fs = std::filesystem;
  if (!fs::is_directory(root)) throw std::runtime_error("not a directory: " + root.string());
  std::vector<fs::path> class_dirs;
  for (const auto& entry : fs::directory_iterator(root)) {
    if (entry.is_directory()) class_dirs.push_back(entry.path());
  }
  if (class_dirs.empty()) throw std::runtime_error("no class subdirectories in " + root.string());
  std::sort(class_dirs.begin(), class_dirs.end(),
            [](const fs::path& a, const fs::path& b) { return a.filename().string() < b.filename().string(); });

  ImageDirectory out;
  for (std::size_t c = 0; c < class_dirs.size(); ++c) {
    out.data.class_names.push_back(class_dirs[c].filename().string());
    std::vector<fs::path> files;
    for (const auto& entry : fs::directory_iterator(class_dirs[c])) {
      if (entry.is_regular_file()) files.push_back(entry.path());
    }
    std::sort(files.begin(), files.end());
    for (const fs::path& f : files) {
      std::string ext = f.extension().string();
      std::transform(ext.begin(), ext.end(), ext.begin(), [](unsigned char ch) { return std::tolower(ch); });
      if (ext != ".pgm") {
        ++out.skipped;
        continue;
      }
      try {
        out.data.images.push_back(parse_pgm(read_file(f)));
        out.data.labels.push_back(static_cast<int>(c));
      } catch (const std::exception& e) {
        out.errors.push_back(f.string() + ": " + e.what());
      }
    }
  }
  if (out.data.images.empty()) throw std::runtime_error("no readable PGM images under " + root.string());
  return out;
}

}  // namespace ddlcn
