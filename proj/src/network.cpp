#include "ddlcn/network.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

#include "ddlcn/errors.hpp"
#include "ddlcn/parallel.hpp"
#include "ddlcn/simd/kernels.hpp"

namespace ddlcn {
namespace {

void validate_pyramid(std::span<const std::size_t> pyramid) {
  if (pyramid.empty()) throw InvalidInput("pyramid needs at least one level");
  for (std::size_t i = 0; i < pyramid.size(); ++i) {
    if (pyramid[i] < 1) throw InvalidInput("pyramid levels must be >= 1");
    if (i > 0 && pyramid[i] <= pyramid[i - 1]) throw InvalidInput("pyramid levels must be strictly increasing");
  }
}

std::size_t cell_count(std::span<const std::size_t> pyramid) {
  std::size_t n = 0;
  for (std::size_t g : pyramid) n += g * g;
  return n;
}

// Cell offset (in cells) of every position, per level.
std::vector<std::vector<std::size_t>> assign_cells(std::span<const Position> positions,
                                                   std::span<const std::size_t> pyramid) {
  std::vector<std::vector<std::size_t>> cells(pyramid.size());
  std::size_t base = 0;
  for (std::size_t l = 0; l < pyramid.size(); ++l) {
    const std::size_t g = pyramid[l];
    cells[l].reserve(positions.size());
    for (const Position& p : positions) {
      cells[l].push_back(base + pyramid_cell(p.y, g) * g + pyramid_cell(p.x, g));
    }
    base += g * g;
  }
  return cells;
}

void normalize_in_place(std::vector<double>& v) {
  const double n2 = simd::dot(v, v);
  if (n2 > 0.0) simd::scale(v, 1.0 / std::sqrt(n2));
}

}  // namespace

void validate(const DdlcnModel& model) {
  if (model.layers.empty()) throw InvalidInput("model has no layers");
  const std::size_t m = model.layers.front().dim();
  for (std::size_t i = 0; i < model.layers.size(); ++i) {
    const Dictionary& d = model.layers[i];
    if (d.layer_index != i + 1) throw InvalidInput("layer " + std::to_string(i) + " has wrong layer index");
    if (d.dim() != m) throw InvalidInput("all dictionaries must share the descriptor dimension");
    if (d.size() == 0) throw InvalidInput("dictionary " + std::to_string(i + 1) + " is empty");
    if (d.atom_class.size() != d.size()) throw InvalidInput("atom class list has wrong length");
  }
  if (m != kDescriptorDim) throw InvalidInput("dictionary dimension does not match descriptor dimension");
  if (model.beta.size() != model.layers.size()) throw InvalidInput("need one beta per layer");
  if (model.knn_k < 1) throw InvalidInput("knn width must be >= 1");
  validate_pyramid(model.pyramid);
  if (model.atom_codes.size() + 1 != model.layers.size()) {
    throw InvalidInput("need one atom-code table per layer beyond the first");
  }
  for (std::size_t i = 0; i < model.atom_codes.size(); ++i) {
    const RowMatrix& t = model.atom_codes[i];
    if (t.rows != model.layers[i].size() || t.cols != model.layers[i + 1].size()) {
      throw InvalidInput("atom-code table " + std::to_string(i + 2) + " has wrong shape");
    }
  }
}

std::vector<RowMatrix> precompute_atom_codes(std::span<const Dictionary> layers, std::span<const double> beta,
                                             std::size_t k, std::size_t threads) {
  if (layers.size() < 2) throw InvalidInput("atom-code tables need at least two layers");
  if (beta.size() != layers.size()) throw InvalidInput("need one beta per layer");
  std::vector<RowMatrix> tables;
  for (std::size_t n = 1; n < layers.size(); ++n) {
    const Dictionary& prev = layers[n - 1];
    const Dictionary& cur = layers[n];
    const std::size_t width = std::min(k, cur.size());
    RowMatrix table(prev.size(), cur.size());
    parallel_for(prev.size(), threads, [&](std::size_t i) {
      const LayerCode c = code_knn(prev.atom(i), cur, beta[n], width);
      std::copy(c.values.begin(), c.values.end(), table.row(i).begin());
    });
    tables.push_back(std::move(table));
  }
  return tables;
}

std::size_t augmented_dim(std::span<const std::size_t> layer_sizes) {
  if (layer_sizes.empty()) return 0;
  std::size_t inner = 1;
  for (std::size_t i = layer_sizes.size(); i-- > 1;) inner = 1 + layer_sizes[i] * inner;
  return layer_sizes[0] * inner;
}

std::size_t pooled_dim(std::span<const std::size_t> pyramid, std::size_t augmented) {
  return cell_count(pyramid) * augmented;
}

RowMatrix augmentation_blocks(std::span<const RowMatrix> atom_codes) {
  if (atom_codes.empty()) throw InvalidInput("augmentation needs at least one atom-code table");
  for (std::size_t i = 0; i + 1 < atom_codes.size(); ++i) {
    if (atom_codes[i].cols != atom_codes[i + 1].rows) throw InvalidInput("atom-code tables do not chain");
  }
  RowMatrix inner = atom_codes.back();
  for (std::size_t i = atom_codes.size() - 1; i-- > 0;) {
    const RowMatrix& t = atom_codes[i];
    const std::size_t w = 1 + inner.cols;
    RowMatrix folded(t.rows, t.cols * w);
    for (std::size_t r = 0; r < t.rows; ++r) {
      auto out = folded.row(r);
      for (std::size_t k = 0; k < t.cols; ++k) {
        const double v = t(r, k);
        out[k * w] = v;
        for (std::size_t e = 0; e < inner.cols; ++e) out[k * w + 1 + e] = v * inner(k, e);
      }
    }
    inner = std::move(folded);
  }
  RowMatrix blocks(inner.rows, 1 + inner.cols);
  for (std::size_t j = 0; j < inner.rows; ++j) {
    blocks(j, 0) = 1.0;
    std::copy(inner.row(j).begin(), inner.row(j).end(), blocks.row(j).begin() + 1);
  }
  return blocks;
}

namespace {

AugmentedCode augment_with_blocks(const LayerCode& code1, const RowMatrix& blocks, std::size_t layer_count) {
  if (code1.values.size() != blocks.rows) {
    throw InvalidInput("layer-1 code length " + std::to_string(code1.values.size()) +
                       " does not match table rows " + std::to_string(blocks.rows));
  }
  AugmentedCode out;
  out.layer_count = layer_count;
  out.values.assign(blocks.rows * blocks.cols, 0.0);
  for (std::size_t j = 0; j < blocks.rows; ++j) {
    const double g = code1.values[j];
    if (g == 0.0) continue;
    std::span<double> dst(out.values.data() + j * blocks.cols, blocks.cols);
    simd::axpy(g, blocks.row(j), dst);
  }
  return out;
}

}  // namespace

AugmentedCode augment(const LayerCode& code1, const RowMatrix& table) {
  return augment(code1, std::span<const RowMatrix>(&table, 1));
}

AugmentedCode augment(const LayerCode& code1, std::span<const RowMatrix> tables) {
  return augment_with_blocks(code1, augmentation_blocks(tables), tables.size() + 1);
}

PooledFeature pool_pyramid(std::span<const AugmentedCode> codes, std::span<const Position> positions,
                           std::span<const std::size_t> pyramid, bool normalize) {
  if (codes.empty()) throw InvalidInput("pooling needs at least one code");
  if (codes.size() != positions.size()) throw InvalidInput("codes and positions differ in count");
  validate_pyramid(pyramid);
  const std::size_t dim = codes.front().values.size();
  for (const AugmentedCode& c : codes) {
    if (c.values.size() != dim) throw InvalidInput("augmented codes differ in dimension");
  }

  const std::size_t ncells = cell_count(pyramid);
  PooledFeature out;
  out.pyramid.assign(pyramid.begin(), pyramid.end());
  out.values.assign(ncells * dim, -std::numeric_limits<double>::infinity());
  std::vector<bool> filled(ncells, false);

  const auto cells = assign_cells(positions, pyramid);
  for (const auto& level : cells) {
    for (std::size_t i = 0; i < codes.size(); ++i) {
      const std::size_t c = level[i];
      filled[c] = true;
      simd::max_inplace(std::span<double>(out.values.data() + c * dim, dim), codes[i].values);
    }
  }
  for (std::size_t c = 0; c < ncells; ++c) {
    if (!filled[c]) std::fill_n(out.values.begin() + static_cast<std::ptrdiff_t>(c * dim), dim, 0.0);
  }
  if (normalize) normalize_in_place(out.values);
  return out;
}

std::vector<LayerCode> code_descriptors(const DescriptorGrid& grid, const DdlcnModel& model) {
  const Dictionary& first = model.layers.front();
  const std::size_t k = std::min(model.knn_k, first.size());
  std::vector<LayerCode> codes;
  codes.reserve(grid.count());
  for (std::size_t i = 0; i < grid.count(); ++i) {
    codes.push_back(code_knn(grid.descriptor(i), first, model.beta.front(), k));
  }
  return codes;
}

PooledFeature encode_image(const GrayImage& image, const DdlcnModel& model) {
  validate(model);
  if (model.layers.size() < 2) throw InvalidInput("encoding needs at least two layers");
  const DescriptorGrid grid = extract_dense_descriptors(image, model.descriptor);
  const std::vector<LayerCode> codes1 = code_descriptors(grid, model);
  const RowMatrix blocks = augmentation_blocks(model.atom_codes);
  std::vector<AugmentedCode> augmented;
  augmented.reserve(codes1.size());
  for (const LayerCode& c : codes1) augmented.push_back(augment_with_blocks(c, blocks, model.layers.size()));
  return pool_pyramid(augmented, grid.positions, model.pyramid, model.normalize);
}

std::size_t CompactPlan::cells() const { return cell_count(pyramid); }

CompactPlan make_compact_plan(const DdlcnModel& model) {
  validate(model);
  if (model.layers.size() < 2) throw InvalidInput("encoding needs at least two layers");
  const RowMatrix blocks = augmentation_blocks(model.atom_codes);
  CompactPlan plan;
  plan.pyramid = model.pyramid;
  plan.normalize = model.normalize;
  plan.atoms = blocks.rows;
  plan.positive_scale.resize(blocks.rows);
  plan.negative_scale.resize(blocks.rows);
  for (std::size_t j = 0; j < blocks.rows; ++j) {
    double pos = 0.0, neg = 0.0;
    for (double c : blocks.row(j)) {
      if (c > 0.0) pos += c * c;
      else if (c < 0.0) neg += c * c;
    }
    plan.positive_scale[j] = std::sqrt(pos);
    plan.negative_scale[j] = std::sqrt(neg);
  }
  return plan;
}

std::vector<double> pool_compact(std::span<const LayerCode> codes, std::span<const Position> positions,
                                 const CompactPlan& plan) {
  if (codes.empty()) throw InvalidInput("pooling needs at least one code");
  if (codes.size() != positions.size()) throw InvalidInput("codes and positions differ in count");
  const std::size_t d = plan.atoms;
  for (const LayerCode& c : codes) {
    if (c.values.size() != d) throw InvalidInput("code length does not match the compact plan");
  }
  const std::size_t ncells = plan.cells();
  constexpr double inf = std::numeric_limits<double>::infinity();
  std::vector<double> hi(ncells * d, -inf), lo(ncells * d, inf);
  std::vector<bool> filled(ncells, false);

  for (const auto& level : assign_cells(positions, plan.pyramid)) {
    for (std::size_t i = 0; i < codes.size(); ++i) {
      const std::size_t c = level[i];
      filled[c] = true;
      simd::max_inplace(std::span<double>(hi.data() + c * d, d), codes[i].values);
      simd::min_inplace(std::span<double>(lo.data() + c * d, d), codes[i].values);
    }
  }

  std::vector<double> out(ncells * 2 * d, 0.0);
  for (std::size_t c = 0; c < ncells; ++c) {
    if (!filled[c]) continue;
    double* dst = out.data() + c * 2 * d;
    for (std::size_t j = 0; j < d; ++j) {
      dst[j] = plan.positive_scale[j] * hi[c * d + j];
      dst[d + j] = plan.negative_scale[j] * lo[c * d + j];
    }
  }
  if (plan.normalize) normalize_in_place(out);
  return out;
}

std::vector<double> encode_image_compact(const GrayImage& image, const DdlcnModel& model, const CompactPlan& plan) {
  const DescriptorGrid grid = extract_dense_descriptors(image, model.descriptor);
  return pool_compact(code_descriptors(grid, model), grid.positions, plan);
}

SvmModel expand_compact_svm(const SvmModel& compact, const DdlcnModel& model) {
  const CompactPlan plan = make_compact_plan(model);
  if (compact.feature_dim() != plan.dim()) throw InvalidInput("SVM does not match the model's compact dimension");
  const RowMatrix blocks = augmentation_blocks(model.atom_codes);
  const std::size_t d = plan.atoms;
  const std::size_t w = blocks.cols;
  const std::size_t ncells = plan.cells();

  SvmModel full;
  full.classes = compact.classes;
  full.biases = compact.biases;
  full.C = compact.C;
  full.weights = RowMatrix(compact.weights.rows, ncells * d * w);
  for (std::size_t r = 0; r < compact.weights.rows; ++r) {
    const auto a = compact.weights.row(r);
    auto out = full.weights.row(r);
    for (std::size_t c = 0; c < ncells; ++c) {
      for (std::size_t j = 0; j < d; ++j) {
        const double a_hi = plan.positive_scale[j] > 0.0 ? a[c * 2 * d + j] / plan.positive_scale[j] : 0.0;
        const double a_lo = plan.negative_scale[j] > 0.0 ? a[c * 2 * d + d + j] / plan.negative_scale[j] : 0.0;
        for (std::size_t e = 0; e < w; ++e) {
          const double coef = blocks(j, e);
          out[(c * d + j) * w + e] = coef > 0.0 ? a_hi * coef : (coef < 0.0 ? a_lo * coef : 0.0);
        }
      }
    }
  }
  return full;
}

int classify(const GrayImage& image, const DdlcnModel& model, const CompactPlan& plan) {
  if (!model.svm) throw InvalidInput("model has no classifier");
  return predict(*model.svm, encode_image_compact(image, model, plan));
}

}  // namespace ddlcn
