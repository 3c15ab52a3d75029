#pragma once

#include <cstddef>
#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "ddlcn/coding.hpp"
#include "ddlcn/descriptors.hpp"
#include "ddlcn/dictionary.hpp"
#include "ddlcn/image.hpp"
#include "ddlcn/matrix.hpp"
#include "ddlcn/svm.hpp"

namespace ddlcn {

inline constexpr std::uint32_t kModelFormatVersion = 1;

/// A trained network: the dictionary stack, coding settings, the
/// image-independent atom-code tables and (optionally) the classifier.
struct DdlcnModel {
  std::vector<Dictionary> layers;       // layer_index 1..n, all in descriptor space
  std::vector<double> beta;             // locality penalty used when coding against each layer
  std::size_t knn_k = 5;
  std::vector<std::size_t> pyramid{1, 2, 4};
  DescriptorParams descriptor;
  bool normalize = true;                // l2-normalize pooled features
  std::vector<RowMatrix> atom_codes;    // [i]: atoms of layer i+1 coded against layer i+2
  std::optional<SvmModel> svm;          // over the compact pooled representation
  std::map<std::string, std::string> info;  // free-form provenance (seed, trial, p, q, t, ...)
  std::uint32_t version = kModelFormatVersion;

  bool operator==(const DdlcnModel&) const = default;
};

/// Throws InvalidInput if layer indices, dimensions, pyramid or tables are inconsistent.
void validate(const DdlcnModel& model);

/// Layer-n codes of every layer-(n-1) atom, for n = 2..N. They depend only on
/// the dictionaries, so they are computed once per model. beta[n-1] and
/// min(k, D_n) are used for layer n.
std::vector<RowMatrix> precompute_atom_codes(std::span<const Dictionary> layers, std::span<const double> beta,
                                             std::size_t k, std::size_t threads = 1);

/// D1 (1 + D2 (1 + D3 (...))) for layer sizes D1..Dn.
std::size_t augmented_dim(std::span<const std::size_t> layer_sizes);

/// (sum of level^2) * augmented dimension.
std::size_t pooled_dim(std::span<const std::size_t> pyramid, std::size_t augmented);

struct AugmentedCode {
  std::vector<double> values;
  std::size_t layer_count = 2;
};

/// Per layer-1 atom j, the fixed vector c_j with block j of every augmented
/// code equal to g1_j * c_j. For two layers c_j = [1, T2_j]; deeper tables are
/// folded in innermost-first.
RowMatrix augmentation_blocks(std::span<const RowMatrix> atom_codes);

/// Block j = [g1_j, g1_j * T_j] for a two-layer table.
AugmentedCode augment(const LayerCode& code1, const RowMatrix& table);

/// Recursive augmentation over all tables (layers 2..n).
AugmentedCode augment(const LayerCode& code1, std::span<const RowMatrix> tables);

struct PooledFeature {
  std::vector<double> values;
  std::vector<std::size_t> pyramid;
};

/// Grid cell of a normalized coordinate at a pyramid level.
inline std::size_t pyramid_cell(double coord, std::size_t level) {
  const double scaled = coord * static_cast<double>(level);
  const auto cell = scaled <= 0.0 ? std::size_t{0} : static_cast<std::size_t>(scaled);
  return cell >= level ? level - 1 : cell;
}

/// Spatial-pyramid max pooling: for every level g and each of its g x g
/// cells (row-major), element-wise max over the codes positioned in the
/// cell; empty cells stay zero. Optionally l2-normalized as a whole.
PooledFeature pool_pyramid(std::span<const AugmentedCode> codes, std::span<const Position> positions,
                           std::span<const std::size_t> pyramid, bool normalize = true);

/// Layer-1 code of every descriptor (code_knn).
std::vector<LayerCode> code_descriptors(const DescriptorGrid& grid, const DdlcnModel& model);

/// Descriptors -> layer-1 codes -> augmentation -> pyramid pooling.
PooledFeature encode_image(const GrayImage& image, const DdlcnModel& model);

/// Exact low-dimensional stand-in for the pooled feature.
///
/// Block j of an augmented code is g1_j * c_j with c_j fixed, so each pooled
/// entry is c_e * max(g1_j) when c_e > 0 and c_e * min(g1_j) when c_e < 0.
/// Scaling the per-cell max / min of g1_j by the norms of the positive /
/// negative parts of c_j gives a vector with the same inner products (and
/// norm) as the full pooled feature, so a linear SVM trained on it is the
/// same classifier.
struct CompactPlan {
  std::vector<double> positive_scale;  // ||c_j^+||
  std::vector<double> negative_scale;  // ||c_j^-||
  std::vector<std::size_t> pyramid;
  bool normalize = true;
  std::size_t atoms = 0;

  std::size_t cells() const;
  std::size_t dim() const { return cells() * 2 * atoms; }
};

CompactPlan make_compact_plan(const DdlcnModel& model);

std::vector<double> pool_compact(std::span<const LayerCode> codes, std::span<const Position> positions,
                                 const CompactPlan& plan);

std::vector<double> encode_image_compact(const GrayImage& image, const DdlcnModel& model, const CompactPlan& plan);

/// Maps an SVM over compact features to the equivalent SVM over full pooled
/// features (identical scores, identical weight norm).
SvmModel expand_compact_svm(const SvmModel& compact, const DdlcnModel& model);

/// Classifies with the model's SVM. Throws if the model has none.
int classify(const GrayImage& image, const DdlcnModel& model, const CompactPlan& plan);

}  // namespace ddlcn
