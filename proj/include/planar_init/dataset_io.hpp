#pragma once

#include "planar_init/simulator.hpp"

#include <cstdint>
#include <filesystem>
#include <string>

namespace planar_init {

/// Writes rig.json, imu.csv, features.csv, groundtruth.csv and scene.json.
/// Throws kIo when the directory cannot be written.
void write_dataset(const std::filesystem::path& dir, const Dataset& dataset);

/// Reads a dataset directory. Scene points are not stored, so `scene` comes
/// back empty; ground truth frames are rebuilt from groundtruth.csv and the
/// per-frame plane entries of scene.json. Throws kIo on missing or malformed files.
Dataset read_dataset(const std::filesystem::path& dir);

/// FNV-1a 64 over the dataset files in a fixed order, as 16 hex digits.
std::string dataset_digest(const std::filesystem::path& dir);

std::string read_text(const std::filesystem::path& path);
void write_text(const std::filesystem::path& path, const std::string& text);

}  // namespace planar_init
