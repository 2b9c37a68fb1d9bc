#pragma once

#include <string>

#include "og/grader.hpp"

namespace og {

inline constexpr std::uint32_t kModelFormatMajor = 1;
inline constexpr std::uint32_t kModelFormatMinor = 0;

// Single-file container: magic, format version, JSON header (config, pipeline
// constants, tensor directory), little-endian double blob, crc32 trailer.
// Byte-deterministic for a given model.
void save_model(const GraderModel& model, const std::string& path);

// Verifies the checksum before trusting anything else; rejects files from a
// newer major format version.
GraderModel load_model(const std::string& path);

}  // namespace og
