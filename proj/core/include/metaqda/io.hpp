#pragma once

#include "metaqda/classifier.hpp"
#include "metaqda/episodes.hpp"

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace metaqda {

/// MQDF feature file, all integers little-endian:
///   "MQDF" | u8 version = 1 | u32 d | u32 class_count | u64 n |
///   n*d f32 features, row-major | n u32 labels
inline constexpr std::uint8_t kFeatureFormatVersion = 1;
inline constexpr std::size_t kFeatureHeaderSize = 21;

std::vector<std::uint8_t> encode_features(const FeatureDataset& dataset);
/// Validates the header, exact payload length, finiteness and labels.
FeatureDataset decode_features(std::span<const std::uint8_t> bytes, std::string name = {});

FeatureDataset read_feature_file(const std::string& path);
void write_feature_file(const FeatureDataset& dataset, const std::string& path);

/// A trained prior plus the settings it was trained under.
struct PriorCheckpoint {
  NiwPrior prior;
  Mode mode = Mode::FullBayes;
  bool normalized = false;
  /// Reference mean for centering when `normalized` is set.
  std::optional<Vector> norm_mean;
};

inline constexpr int kCheckpointVersion = 1;

/// Text document of "key value..." lines; reals use 17 significant digits so
/// every double survives a round trip.
std::string encode_checkpoint(const PriorCheckpoint& checkpoint);
PriorCheckpoint decode_checkpoint(const std::string& text);

PriorCheckpoint load_checkpoint(const std::string& path);
void save_checkpoint(const PriorCheckpoint& checkpoint, const std::string& path);

}  // namespace metaqda
