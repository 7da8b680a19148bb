// Copyright 2026 The FusionForge Authors
// SPDX-License-Identifier: Apache-2.0

#include <fstream>
#include <iterator>
#include <unordered_set>

#include "byte_io.hpp"
#include "fusionforge/datastore.hpp"
#include "fusionforge/error.hpp"

namespace fusionforge {

namespace detail {

std::vector<std::byte> read_binary_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path);
  in.seekg(0, std::ios::end);
  const auto size = static_cast<std::size_t>(in.tellg());
  in.seekg(0, std::ios::beg);
  std::vector<std::byte> bytes(size);
  in.read(reinterpret_cast<char*>(bytes.data()), static_cast<std::streamsize>(size));
  if (!in) throw IoError("read failed: " + path);
  return bytes;
}

void write_binary_file(const std::string& path, std::span<const std::byte> bytes) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot write " + path);
  out.write(reinterpret_cast<const char*>(bytes.data()),
            static_cast<std::streamsize>(bytes.size()));
  if (!out) throw IoError("write failed: " + path);
}

}  // namespace detail

namespace {
constexpr std::string_view kFeatureMagic = "MMF1";
}  // namespace

std::vector<std::byte> encode_feature_file(std::span<const FeatureRecord> records,
                                           std::uint32_t dim) {
  if (dim == 0) throw FormatError(FormatErrorCode::kDimMismatch, "feature file: dim must be positive");

  std::unordered_set<std::string_view> seen;
  for (const FeatureRecord& r : records) {
    if (r.dim != dim) {
      throw FormatError(FormatErrorCode::kDimMismatch,
                        "feature file: record '" + r.sample_id + "' has dim " +
                            std::to_string(r.dim) + ", file dim is " + std::to_string(dim));
    }
    if (r.sample_id.empty()) throw ValidationError("feature file: empty sample id");
    if (r.rows == 0) {
      throw ValidationError("feature file: record '" + r.sample_id + "' has no rows");
    }
    if (r.values.size() != static_cast<std::size_t>(r.rows) * dim) {
      throw ValidationError("feature file: record '" + r.sample_id +
                            "' payload size does not match rows x dim");
    }
    if (!seen.insert(r.sample_id).second) {
      throw ValidationError("feature file: duplicate sample id '" + r.sample_id + "'");
    }
  }

  detail::ByteWriter w;
  w.put_bytes(kFeatureMagic);
  w.put<std::uint32_t>(dim);
  w.put<std::uint64_t>(records.size());
  for (const FeatureRecord& r : records) {
    w.put_short_string(r.sample_id, "sample id");
    w.put<std::uint32_t>(r.rows);
    w.put_floats(r.values);
  }
  return std::move(w).take();
}

std::vector<FeatureRecord> decode_feature_file(std::span<const std::byte> bytes) {
  detail::ByteReader in(bytes, "feature file");
  if (in.remaining() < kFeatureMagic.size() ||
      in.get_bytes(kFeatureMagic.size(), "magic") != kFeatureMagic) {
    throw FormatError(FormatErrorCode::kBadMagic, "feature file: bad magic (expected MMF1)", 0);
  }
  const auto dim = in.get<std::uint32_t>("dim");
  const auto count = in.get<std::uint64_t>("record count");
  if (dim == 0) throw FormatError(FormatErrorCode::kDimMismatch, "feature file: header dim is 0", 4);

  std::vector<FeatureRecord> records;
  // Each record needs at least 2 + 1 + 4 + 4*dim bytes; bound the reserve by
  // what the file can actually hold.
  const std::uint64_t min_record = 7 + 4ULL * dim;
  records.reserve(static_cast<std::size_t>(std::min<std::uint64_t>(count, in.remaining() / min_record + 1)));
  for (std::uint64_t i = 0; i < count; ++i) {
    FeatureRecord r;
    r.dim = dim;
    r.sample_id = in.get_short_string("sample id");
    if (r.sample_id.empty()) {
      throw FormatError(FormatErrorCode::kMalformed,
                        "feature file: empty sample id in record " + std::to_string(i),
                        in.offset());
    }
    r.rows = in.get<std::uint32_t>("row count");
    if (r.rows == 0) {
      throw FormatError(FormatErrorCode::kMalformed,
                        "feature file: record '" + r.sample_id + "' has zero rows",
                        in.offset());
    }
    const std::uint64_t n = static_cast<std::uint64_t>(r.rows) * dim;
    in.require(n * sizeof(float), "row payload of '" + r.sample_id + "'");
    r.values.resize(n);
    in.get_floats(r.values, "row payload");
    records.push_back(std::move(r));
  }
  if (in.remaining() != 0) {
    throw FormatError(FormatErrorCode::kCountMismatch,
                      "feature file: header declares " + std::to_string(count) +
                          " records but " + std::to_string(in.remaining()) +
                          " bytes remain after the last one",
                      in.offset());
  }

  std::unordered_set<std::string_view> seen;
  for (const FeatureRecord& r : records) {
    if (!seen.insert(r.sample_id).second) {
      throw ValidationError("feature file: duplicate sample id '" + r.sample_id + "'");
    }
  }
  return records;
}

void write_feature_file(std::span<const FeatureRecord> records, std::uint32_t dim,
                        const std::filesystem::path& path) {
  detail::write_binary_file(path.string(), encode_feature_file(records, dim));
}

std::vector<FeatureRecord> read_feature_file(const std::filesystem::path& path) {
  return decode_feature_file(detail::read_binary_file(path.string()));
}

}  // namespace fusionforge
