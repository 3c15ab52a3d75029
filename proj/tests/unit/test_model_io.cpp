#include <doctest.h>

#include <filesystem>
#include <random>

#include "ddlcn/errors.hpp"
#include "ddlcn/model_io.hpp"
#include "../support/oracles.hpp"

using namespace ddlcn;

namespace {

DdlcnModel sample_model() {
  std::mt19937_64 gen(99);
  DdlcnModel m;
  Dictionary d1 = oracle::random_dictionary(4, kDescriptorDim, gen);
  d1.atom_class = {0, 0, 1, 1};
  Dictionary d2 = oracle::random_dictionary(3, kDescriptorDim, gen);
  d2.layer_index = 2;
  m.layers = {d1, d2};
  m.beta = {0.1, 0.25};
  m.knn_k = 2;
  m.pyramid = {1, 3};
  m.descriptor = {8, 2};
  m.normalize = false;
  m.atom_codes = precompute_atom_codes(m.layers, m.beta, 2, 1);
  const CompactPlan plan = make_compact_plan(m);
  SvmModel svm;
  svm.weights = RowMatrix(2, plan.dim());
  for (double& v : svm.weights.data) v = oracle::random_vector(1, gen)[0] / 3.0;
  svm.biases = {0.1, 1e-300};
  svm.classes = {0, 1};
  svm.C = 0.7;
  m.svm = svm;
  m.info = {{"seed", "42"}, {"p", "1"}};
  return m;
}

}  // namespace

TEST_CASE("serialization round-trips exactly") {
  const DdlcnModel m = sample_model();
  const auto bytes = serialize_model(m);
  CHECK(std::string(bytes.begin(), bytes.begin() + 4) == "DDLC");
  const DdlcnModel back = deserialize_model(bytes);
  CHECK(back == m);
  CHECK(serialize_model(back) == bytes);

  DdlcnModel bare = m;
  bare.svm.reset();
  CHECK(deserialize_model(serialize_model(bare)) == bare);
}

TEST_CASE("file round-trip") {
  const DdlcnModel m = sample_model();
  const auto path = std::filesystem::temp_directory_path() / "ddlcn_io_test.ddlc";
  save_model(m, path);
  CHECK(load_model(path) == m);
  std::filesystem::remove(path);
}

TEST_CASE("truncated files are rejected") {
  const auto bytes = serialize_model(sample_model());
  for (std::size_t n = 0; n < bytes.size(); n += (n < 64 ? 1 : 97)) {
    CAPTURE(n);
    CHECK_THROWS_AS(deserialize_model(std::span(bytes.data(), n)), FormatError);
  }
  try {
    deserialize_model(std::span(bytes.data(), bytes.size() - 3));
    FAIL("expected a format error");
  } catch (const FormatError& e) {
    CHECK(std::string(e.what()).find("truncated") != std::string::npos);
    CHECK(e.offset() > 0);
  }
}

TEST_CASE("bad magic, version and trailing bytes") {
  auto bytes = serialize_model(sample_model());
  auto bad = bytes;
  bad[0] = 'X';
  try {
    deserialize_model(bad);
    FAIL("expected a format error");
  } catch (const FormatError& e) {
    CHECK(std::string(e.what()).find("bad magic") != std::string::npos);
  }
  bad = bytes;
  bad[4] = 7;
  CHECK_THROWS_AS(deserialize_model(bad), FormatError);
  bad = bytes;
  bad.push_back(0);
  CHECK_THROWS_AS(deserialize_model(bad), FormatError);
}
