// Copyright (c) 2026 The apnv Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <filesystem>

#include "apnv/image.hpp"

namespace apnv {

// Binary PPM (P6, 8-bit RGB) and PGM (P5, 8-bit or 16-bit big-endian) files.
// All functions throw DataError on I/O failure or malformed headers.

void write_ppm(const std::filesystem::path& path, const ImageU8& rgb);
void write_pgm(const std::filesystem::path& path, const ImageU8& gray);
void write_pgm(const std::filesystem::path& path, const ImageU16& gray);

ImageU8 read_ppm(const std::filesystem::path& path);
ImageU8 read_pgm8(const std::filesystem::path& path);
ImageU16 read_pgm16(const std::filesystem::path& path);

}  // namespace apnv
