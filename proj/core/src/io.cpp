#include "metaqda/io.hpp"

#include "metaqda/error.hpp"

#include <bit>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <cstring>
#include <fstream>
#include <iterator>
#include <limits>
#include <sstream>
#include <stdexcept>

namespace metaqda {

namespace {

void put_u32(std::vector<std::uint8_t>& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
}

void put_u64(std::vector<std::uint8_t>& out, std::uint64_t v) {
  for (int i = 0; i < 8; ++i) out.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
}

std::uint32_t get_u32(std::span<const std::uint8_t> bytes, std::size_t at) {
  std::uint32_t v = 0;
  for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(bytes[at + i]) << (8 * i);
  return v;
}

std::uint64_t get_u64(std::span<const std::uint8_t> bytes, std::size_t at) {
  std::uint64_t v = 0;
  for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(bytes[at + i]) << (8 * i);
  return v;
}

[[noreturn]] void truncated(std::size_t offset, const std::string& what) {
  throw Error(ErrorKind::TruncatedFile, what + " at byte offset " + std::to_string(offset));
}

std::string format_real(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

double parse_real(const std::string& token) {
  const char* begin = token.c_str();
  char* end = nullptr;
  const double v = std::strtod(begin, &end);
  if (end == begin || *end != '\0' || !std::isfinite(v)) {
    throw Error(ErrorKind::BadCheckpoint, "not a finite number: '" + token + "'");
  }
  return v;
}

std::vector<std::uint8_t> read_all(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorKind::Io, "cannot open '" + path + "'");
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

void write_all(const std::string& path, const char* data, std::size_t size) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error(ErrorKind::Io, "cannot open '" + path + "' for writing");
  out.write(data, static_cast<std::streamsize>(size));
  if (!out) throw Error(ErrorKind::Io, "write to '" + path + "' failed");
}

}  // namespace

std::vector<std::uint8_t> encode_features(const FeatureDataset& dataset) {
  const auto n = static_cast<std::uint64_t>(dataset.size());
  const auto d = static_cast<std::uint64_t>(dataset.dim());
  std::vector<std::uint8_t> out;
  out.reserve(kFeatureHeaderSize + 4 * n * d + 4 * n);
  for (char c : {'M', 'Q', 'D', 'F'}) out.push_back(static_cast<std::uint8_t>(c));
  out.push_back(kFeatureFormatVersion);
  put_u32(out, static_cast<std::uint32_t>(d));
  put_u32(out, static_cast<std::uint32_t>(dataset.class_count()));
  put_u64(out, n);
  for (Index i = 0; i < dataset.features.rows(); ++i) {
    for (Index j = 0; j < dataset.features.cols(); ++j) {
      put_u32(out, std::bit_cast<std::uint32_t>(static_cast<float>(dataset.features(i, j))));
    }
  }
  for (int label : dataset.labels) put_u32(out, static_cast<std::uint32_t>(label));
  return out;
}

FeatureDataset decode_features(std::span<const std::uint8_t> bytes, std::string name) {
  if (bytes.size() < 4) truncated(bytes.size(), "header ends before magic");
  if (std::memcmp(bytes.data(), "MQDF", 4) != 0) throw Error(ErrorKind::BadMagic, "not an MQDF file");
  if (bytes.size() < 5) truncated(bytes.size(), "header ends before version");
  if (bytes[4] != kFeatureFormatVersion) {
    throw Error(ErrorKind::UnsupportedVersion, "version " + std::to_string(bytes[4]));
  }
  if (bytes.size() < kFeatureHeaderSize) truncated(bytes.size(), "header incomplete");

  const std::uint64_t d = get_u32(bytes, 5);
  const std::uint64_t classes = get_u32(bytes, 9);
  const std::uint64_t n = get_u64(bytes, 13);
  if (d == 0) throw Error(ErrorKind::DimensionMismatch, "feature dimension is zero");
  if (classes > static_cast<std::uint64_t>(std::numeric_limits<int>::max())) {
    throw Error(ErrorKind::LabelOutOfRange, "class count " + std::to_string(classes));
  }

  // 4 * n * (d + 1) payload bytes, checked without overflow.
  const std::uint64_t available = bytes.size() - kFeatureHeaderSize;
  const std::uint64_t row_bytes = 4 * (d + 1);
  if (n > available / row_bytes) {
    truncated(bytes.size(), "payload for " + std::to_string(n) + " rows ends");
  }
  const std::uint64_t expected = kFeatureHeaderSize + n * row_bytes;
  if (bytes.size() != expected) {
    throw Error(ErrorKind::TrailingData, std::to_string(bytes.size() - expected) +
                                             " unexpected bytes after offset " +
                                             std::to_string(expected));
  }

  Matrix features(static_cast<Index>(n), static_cast<Index>(d));
  std::size_t at = kFeatureHeaderSize;
  for (std::uint64_t i = 0; i < n; ++i) {
    for (std::uint64_t j = 0; j < d; ++j, at += 4) {
      const float v = std::bit_cast<float>(get_u32(bytes, at));
      if (!std::isfinite(v)) {
        throw Error(ErrorKind::NonFiniteValue, "feature at byte offset " + std::to_string(at));
      }
      features(static_cast<Index>(i), static_cast<Index>(j)) = v;
    }
  }
  std::vector<int> labels(static_cast<std::size_t>(n));
  for (std::uint64_t i = 0; i < n; ++i, at += 4) {
    const std::uint32_t label = get_u32(bytes, at);
    if (label >= classes) {
      throw Error(ErrorKind::LabelOutOfRange, "row " + std::to_string(i) + " has label " +
                                                  std::to_string(label) + " with " +
                                                  std::to_string(classes) + " classes");
    }
    labels[static_cast<std::size_t>(i)] = static_cast<int>(label);
  }
  // every class needs at least one row
  if (classes > n) {
    throw Error(ErrorKind::InsufficientSamplesPerClass,
                std::to_string(classes) + " classes declared for " + std::to_string(n) + " rows");
  }
  return FeatureDataset::from_parts(std::move(features), std::move(labels),
                                    static_cast<int>(classes), std::move(name));
}

FeatureDataset read_feature_file(const std::string& path) {
  const auto bytes = read_all(path);
  return decode_features(bytes, path);
}

void write_feature_file(const FeatureDataset& dataset, const std::string& path) {
  const auto bytes = encode_features(dataset);
  write_all(path, reinterpret_cast<const char*>(bytes.data()), bytes.size());
}

std::string encode_checkpoint(const PriorCheckpoint& checkpoint) {
  const NiwPrior& p = checkpoint.prior;
  std::string out = "# metaqda prior checkpoint\n";
  out += "format-version " + std::to_string(kCheckpointVersion) + "\n";
  out += "d " + std::to_string(p.dim()) + "\n";
  out += std::string("mode ") + to_string(checkpoint.mode) + "\n";
  out += std::string("normalized ") + (checkpoint.normalized ? "1" : "0") + "\n";
  out += "kappa " + format_real(p.kappa) + "\n";
  out += "nu " + format_real(p.nu) + "\n";
  out += "m";
  for (Index i = 0; i < p.dim(); ++i) out += " " + format_real(p.mean(i));
  out += "\nL";
  for (double v : p.chol_scale.packed()) out += " " + format_real(v);
  out += "\n";
  if (checkpoint.norm_mean) {
    out += "norm-mean";
    for (Index i = 0; i < checkpoint.norm_mean->size(); ++i) {
      out += " " + format_real((*checkpoint.norm_mean)(i));
    }
    out += "\n";
  }
  return out;
}

PriorCheckpoint decode_checkpoint(const std::string& text) {
  std::istringstream in(text);
  std::string line;
  std::optional<long> dim;
  std::optional<int> version;
  std::optional<double> kappa;
  std::optional<double> nu;
  std::vector<double> mean;
  std::vector<double> packed;
  std::vector<double> norm_mean;
  bool have_mean = false;
  bool have_l = false;
  PriorCheckpoint ckpt;

  while (std::getline(in, line)) {
    if (line.empty() || line[0] == '#') continue;
    std::istringstream fields(line);
    std::string key;
    fields >> key;
    std::vector<std::string> values;
    for (std::string v; fields >> v;) values.push_back(v);
    auto single = [&]() -> const std::string& {
      if (values.size() != 1) throw Error(ErrorKind::BadCheckpoint, "key '" + key + "' takes one value");
      return values.front();
    };
    auto reals = [&] {
      std::vector<double> out;
      for (const auto& v : values) out.push_back(parse_real(v));
      return out;
    };
    if (key == "format-version") {
      version = static_cast<int>(parse_real(single()));
    } else if (key == "d") {
      dim = static_cast<long>(parse_real(single()));
    } else if (key == "mode") {
      try {
        ckpt.mode = parse_mode(single());
      } catch (const std::invalid_argument& e) {
        throw Error(ErrorKind::BadCheckpoint, e.what());
      }
    } else if (key == "normalized") {
      const std::string& v = single();
      if (v != "0" && v != "1") throw Error(ErrorKind::BadCheckpoint, "normalized must be 0 or 1");
      ckpt.normalized = v == "1";
    } else if (key == "kappa") {
      kappa = parse_real(single());
    } else if (key == "nu") {
      nu = parse_real(single());
    } else if (key == "m") {
      mean = reals();
      have_mean = true;
    } else if (key == "L") {
      packed = reals();
      have_l = true;
    } else if (key == "norm-mean") {
      norm_mean = reals();
    } else {
      throw Error(ErrorKind::BadCheckpoint, "unknown key '" + key + "'");
    }
  }

  if (!version) throw Error(ErrorKind::BadCheckpoint, "checkpoint has no format-version");
  if (*version != kCheckpointVersion) {
    throw Error(ErrorKind::UnsupportedVersion, "checkpoint format-version " + std::to_string(*version));
  }
  if (!dim || *dim < 1 || !kappa || !nu || !have_mean || !have_l) {
    throw Error(ErrorKind::BadCheckpoint, "checkpoint is missing required keys");
  }
  const Index d = *dim;
  if (static_cast<Index>(mean.size()) != d || static_cast<Index>(packed.size()) != LowerTriangular::packed_size(d)) {
    throw Error(ErrorKind::BadCheckpoint, "m or L length does not match d");
  }
  ckpt.prior.mean = Eigen::Map<const Vector>(mean.data(), d);
  ckpt.prior.kappa = *kappa;
  ckpt.prior.nu = *nu;
  ckpt.prior.chol_scale = LowerTriangular::from_packed(packed, d);
  if (!ckpt.prior.valid()) throw Error(ErrorKind::BadCheckpoint, "prior violates NIW constraints");
  if (!norm_mean.empty()) {
    if (static_cast<Index>(norm_mean.size()) != d) {
      throw Error(ErrorKind::BadCheckpoint, "norm-mean length does not match d");
    }
    ckpt.norm_mean = Vector(Eigen::Map<const Vector>(norm_mean.data(), d));
  }
  return ckpt;
}

PriorCheckpoint load_checkpoint(const std::string& path) {
  const auto bytes = read_all(path);
  return decode_checkpoint(std::string(bytes.begin(), bytes.end()));
}

void save_checkpoint(const PriorCheckpoint& checkpoint, const std::string& path) {
  const std::string text = encode_checkpoint(checkpoint);
  write_all(path, text.data(), text.size());
}

}  // namespace metaqda
