#include "ddlcn/model_io.hpp"

#include <bit>
#include <charconv>
#include <fstream>
#include <iterator>
#include <sstream>
#include <string>
#include <string_view>

#include "ddlcn/errors.hpp"

namespace ddlcn {
namespace {

constexpr std::string_view kMagic = "DDLC";

std::string format_double(double v) {
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, res.ptr);
}

template <typename T>
std::string join(const std::vector<T>& values) {
  std::string out;
  for (std::size_t i = 0; i < values.size(); ++i) {
    if (i) out += ',';
    if constexpr (std::is_floating_point_v<T>) out += format_double(values[i]);
    else out += std::to_string(values[i]);
  }
  return out;
}

class Writer {
public:
  void bytes(std::string_view s) { out_.insert(out_.end(), s.begin(), s.end()); }

  void u32(std::uint32_t v) {
    for (int i = 0; i < 4; ++i) out_.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
  }

  void u64(std::uint64_t v) {
    for (int i = 0; i < 8; ++i) out_.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
  }

  void f64(double v) { u64(std::bit_cast<std::uint64_t>(v)); }

  void matrix(const RowMatrix& m) {
    u64(m.rows);
    u64(m.cols);
    for (double v : m.data) f64(v);
  }

  std::vector<std::uint8_t> take() { return std::move(out_); }

private:
  std::vector<std::uint8_t> out_;
};

class Reader {
public:
  explicit Reader(std::span<const std::uint8_t> in) : in_(in) {}

  std::uint64_t offset() const { return pos_; }

  void need(std::uint64_t n, const char* what) const {
    if (n > in_.size() - pos_) throw FormatError(std::string("truncated file while reading ") + what, pos_);
  }

  std::string bytes(std::uint64_t n, const char* what) {
    need(n, what);
    std::string s(reinterpret_cast<const char*>(in_.data() + pos_), n);
    pos_ += n;
    return s;
  }

  std::uint32_t u32(const char* what) {
    need(4, what);
    std::uint32_t v = 0;
    for (int i = 0; i < 4; ++i) v |= std::uint32_t{in_[pos_ + i]} << (8 * i);
    pos_ += 4;
    return v;
  }

  std::uint64_t u64(const char* what) {
    need(8, what);
    std::uint64_t v = 0;
    for (int i = 0; i < 8; ++i) v |= std::uint64_t{in_[pos_ + i]} << (8 * i);
    pos_ += 8;
    return v;
  }

  double f64(const char* what) { return std::bit_cast<double>(u64(what)); }

  RowMatrix matrix(const char* what) {
    const std::uint64_t rows = u64(what);
    const std::uint64_t cols = u64(what);
    const std::uint64_t remaining = (in_.size() - pos_) / 8;
    if (cols != 0 && rows > remaining / cols) throw FormatError(std::string("truncated file while reading ") + what, pos_);
    RowMatrix m(rows, cols);
    for (double& v : m.data) v = f64(what);
    return m;
  }

  bool done() const { return pos_ == in_.size(); }

private:
  std::span<const std::uint8_t> in_;
  std::uint64_t pos_ = 0;
};

template <typename T>
std::vector<T> parse_list(std::string_view text, const std::string& key, std::uint64_t offset) {
  std::vector<T> out;
  if (text.empty()) return out;
  std::size_t start = 0;
  while (start <= text.size()) {
    const std::size_t end = std::min(text.find(',', start), text.size());
    const std::string_view item = text.substr(start, end - start);
    T v{};
    const auto res = std::from_chars(item.data(), item.data() + item.size(), v);
    if (res.ec != std::errc{} || res.ptr != item.data() + item.size()) {
      throw FormatError("bad value '" + std::string(item) + "' for metadata key " + key, offset);
    }
    out.push_back(v);
    start = end + 1;
  }
  return out;
}

}  // namespace

std::vector<std::uint8_t> serialize_model(const DdlcnModel& model) {
  validate(model);
  std::ostringstream meta;
  std::vector<std::size_t> sizes;
  for (const Dictionary& d : model.layers) sizes.push_back(d.size());
  meta << "layers=" << join(sizes) << '\n';
  meta << "m=" << model.layers.front().dim() << '\n';
  meta << "beta=" << join(model.beta) << '\n';
  meta << "knn=" << model.knn_k << '\n';
  meta << "pyramid=" << join(model.pyramid) << '\n';
  meta << "patch_size=" << model.descriptor.patch_size << '\n';
  meta << "stride=" << model.descriptor.stride << '\n';
  meta << "normalize=" << (model.normalize ? 1 : 0) << '\n';
  meta << "layer1_atom_class=" << join(model.layers.front().atom_class) << '\n';
  if (model.svm) {
    meta << "svm_space=compact\n";
    meta << "svm_C=" << format_double(model.svm->C) << '\n';
    meta << "svm_classes=" << join(model.svm->classes) << '\n';
  }
  for (const auto& [key, value] : model.info) {
    if (key.find_first_of("=\n") != std::string::npos || value.find('\n') != std::string::npos) {
      throw InvalidInput("model info entries must not contain '=' in keys or newlines");
    }
    meta << "info." << key << '=' << value << '\n';
  }
  const std::string metadata = meta.str();

  Writer w;
  w.bytes(kMagic);
  w.u32(model.version);
  w.u64(metadata.size());
  w.bytes(metadata);
  w.u64(model.layers.size());
  for (const Dictionary& d : model.layers) w.matrix(d.atoms);
  w.u64(model.atom_codes.size());
  for (const RowMatrix& t : model.atom_codes) w.matrix(t);
  w.u64(model.svm ? 1 : 0);
  if (model.svm) {
    w.matrix(model.svm->weights);
    w.u64(model.svm->biases.size());
    for (double b : model.svm->biases) w.f64(b);
  }
  return w.take();
}

DdlcnModel deserialize_model(std::span<const std::uint8_t> bytes) {
  Reader r(bytes);
  if (r.bytes(4, "magic") != kMagic) throw FormatError("bad magic", 0);
  DdlcnModel model;
  model.version = r.u32("version");
  if (model.version != kModelFormatVersion) {
    throw FormatError("unsupported model version " + std::to_string(model.version), 4);
  }

  const std::uint64_t meta_offset = r.offset();
  const std::uint64_t meta_len = r.u64("metadata length");
  const std::string metadata = r.bytes(meta_len, "metadata");

  std::map<std::string, std::string> kv;
  std::istringstream lines(metadata);
  for (std::string line; std::getline(lines, line);) {
    const auto eq = line.find('=');
    if (eq == std::string::npos) throw FormatError("metadata line without '=': " + line, meta_offset);
    kv[line.substr(0, eq)] = line.substr(eq + 1);
  }
  auto get = [&](const std::string& key) -> const std::string& {
    const auto it = kv.find(key);
    if (it == kv.end()) throw FormatError("missing metadata key " + key, meta_offset);
    return it->second;
  };
  auto get_u64 = [&](const std::string& key) {
    const auto v = parse_list<std::uint64_t>(get(key), key, meta_offset);
    if (v.size() != 1) throw FormatError("metadata key " + key + " must hold one value", meta_offset);
    return v.front();
  };

  const auto sizes = parse_list<std::size_t>(get("layers"), "layers", meta_offset);
  const std::uint64_t m = get_u64("m");
  model.beta = parse_list<double>(get("beta"), "beta", meta_offset);
  model.knn_k = get_u64("knn");
  model.pyramid = parse_list<std::size_t>(get("pyramid"), "pyramid", meta_offset);
  model.descriptor.patch_size = get_u64("patch_size");
  model.descriptor.stride = get_u64("stride");
  model.normalize = get_u64("normalize") != 0;
  const auto atom_class = parse_list<int>(get("layer1_atom_class"), "layer1_atom_class", meta_offset);
  for (const auto& [key, value] : kv) {
    if (key.rfind("info.", 0) == 0) model.info[key.substr(5)] = value;
  }

  const std::uint64_t layer_offset = r.offset();
  const std::uint64_t layer_count = r.u64("layer count");
  if (layer_count != sizes.size()) throw FormatError("layer count disagrees with metadata", layer_offset);
  for (std::uint64_t i = 0; i < layer_count; ++i) {
    const std::uint64_t at = r.offset();
    Dictionary d;
    d.atoms = r.matrix("dictionary atoms");
    if (d.atoms.rows != sizes[i] || d.atoms.cols != m) {
      throw FormatError("dictionary " + std::to_string(i + 1) + " shape disagrees with metadata", at);
    }
    d.layer_index = i + 1;
    d.atom_class = i == 0 ? atom_class : std::vector<int>(d.size(), kUnlabeled);
    model.layers.push_back(std::move(d));
  }

  const std::uint64_t table_count = r.u64("table count");
  for (std::uint64_t i = 0; i < table_count; ++i) model.atom_codes.push_back(r.matrix("atom-code table"));

  const std::uint64_t svm_offset = r.offset();
  const std::uint64_t has_svm = r.u64("svm flag");
  if (has_svm > 1) throw FormatError("bad svm flag", svm_offset);
  if (has_svm == 1) {
    SvmModel svm;
    svm.weights = r.matrix("svm weights");
    const std::uint64_t nb = r.u64("svm bias count");
    if (nb != svm.weights.rows) throw FormatError("svm bias count disagrees with weight rows", r.offset());
    r.need(nb * 8, "svm biases");
    for (std::uint64_t i = 0; i < nb; ++i) svm.biases.push_back(r.f64("svm biases"));
    svm.C = parse_list<double>(get("svm_C"), "svm_C", meta_offset).at(0);
    svm.classes = parse_list<int>(get("svm_classes"), "svm_classes", meta_offset);
    if (svm.classes.size() != nb) throw FormatError("svm class list disagrees with weight rows", svm_offset);
    model.svm = std::move(svm);
  }
  if (!r.done()) throw FormatError("trailing bytes after model", r.offset());

  try {
    validate(model);
  } catch (const InvalidInput& e) {
    throw FormatError(std::string("inconsistent model: ") + e.what(), r.offset());
  }
  if (model.svm && model.layers.size() >= 2) {
    const CompactPlan plan = make_compact_plan(model);
    if (model.svm->feature_dim() != plan.dim()) {
      throw FormatError("svm dimension does not match the model's pooled representation", svm_offset);
    }
  }
  return model;
}

void save_model(const DdlcnModel& model, const std::filesystem::path& path) {
  const std::vector<std::uint8_t> bytes = serialize_model(model);
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw std::runtime_error("cannot open " + path.string() + " for writing");
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw std::runtime_error("failed writing " + path.string());
}

DdlcnModel load_model(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open " + path.string());
  const std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  return deserialize_model(bytes);
}

}  // namespace ddlcn
