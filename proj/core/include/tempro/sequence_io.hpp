#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "tempro/simulator.hpp"

namespace tempro::io {

/// Sequence container: `<name>.bin` (flat little-endian f32, frame-major
/// [t][y][x]) + `<name>.json` sidecar + optional `<name>.mask.bin` (u8 {0,1}).
void write_sequence(const std::filesystem::path& dir, const sim::Sequence& seq);
sim::Sequence read_sequence(const std::filesystem::path& dir, const std::string& name);

struct ManifestEntry {
    std::string name;
    std::string split;
};

/// `manifest.json` lists the sequences of a dataset directory and their split.
void write_manifest(const std::filesystem::path& dir, const std::vector<ManifestEntry>& entries);
std::vector<ManifestEntry> read_manifest(const std::filesystem::path& dir);

/// Raw helpers shared by the checkpoint and confidence-map writers.
void write_f32(const std::filesystem::path& file, std::span<const double> values);
std::vector<double> read_f32(const std::filesystem::path& file);
void write_u8(const std::filesystem::path& file, std::span<const std::uint8_t> values);
std::vector<std::uint8_t> read_u8(const std::filesystem::path& file);

}  // namespace tempro::io
