#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <vector>

#include "ddlcn/network.hpp"

namespace ddlcn {

/// Model container, all integers little-endian:
///
///   "DDLC" | u32 version | u64 n + n bytes of key=value metadata lines
///   | u64 layer count, then per layer: u64 rows, u64 cols, rows*cols f64
///   | u64 table count, then per table: u64 rows, u64 cols, rows*cols f64
///   | u64 svm flag; if 1: u64 rows, u64 cols, weights f64, u64 n, biases f64
///
/// Matrices are row-major; one row per atom (or per class for the SVM).
std::vector<std::uint8_t> serialize_model(const DdlcnModel& model);

/// Throws FormatError (with byte offset) on bad magic, unsupported version,
/// truncation or inconsistent metadata. Never returns a partial model.
DdlcnModel deserialize_model(std::span<const std::uint8_t> bytes);

void save_model(const DdlcnModel& model, const std::filesystem::path& path);
DdlcnModel load_model(const std::filesystem::path& path);

}  // namespace ddlcn
