// Copyright (c) 2026 The apnv Authors
// SPDX-License-Identifier: Apache-2.0

#include "apnv/netpbm.hpp"

#include <cctype>
#include <fstream>
#include <string>

#include "apnv/error.hpp"

namespace apnv {
namespace {

struct Header {
  std::string magic;
  int width = 0;
  int height = 0;
  int maxval = 0;
};

std::ofstream open_out(const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write " + path.string());
  return out;
}

void finish(std::ofstream& out, const std::filesystem::path& path) {
  out.flush();
  if (!out) throw DataError("write failed for " + path.string());
}

Header read_header(std::ifstream& in, const std::filesystem::path& path) {
  Header h;
  auto token = [&]() {
    std::string t;
    char c;
    while (in.get(c)) {
      if (c == '#') {
        std::string skip;
        std::getline(in, skip);
        continue;
      }
      if (std::isspace(static_cast<unsigned char>(c))) {
        if (!t.empty()) break;
        continue;
      }
      t.push_back(c);
    }
    return t;
  };
  try {
    h.magic = token();
    h.width = std::stoi(token());
    h.height = std::stoi(token());
    h.maxval = std::stoi(token());
  } catch (const std::exception&) {
    throw DataError("malformed netpbm header in " + path.string());
  }
  if (h.width <= 0 || h.height <= 0 || h.maxval <= 0 || h.maxval > 65535) {
    throw DataError("malformed netpbm header in " + path.string());
  }
  return h;
}

std::ifstream open_in(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot read " + path.string());
  return in;
}

template <typename T>
Image<T> read_body(std::ifstream& in, const Header& h, int channels, const std::filesystem::path& path) {
  Image<T> img(h.width, h.height, channels);
  if constexpr (sizeof(T) == 1) {
    in.read(reinterpret_cast<char*>(img.data().data()), static_cast<std::streamsize>(img.size()));
  } else {
    std::vector<unsigned char> raw(img.size() * 2);
    in.read(reinterpret_cast<char*>(raw.data()), static_cast<std::streamsize>(raw.size()));
    for (std::size_t i = 0; i < img.size(); ++i) {
      img.data()[i] = static_cast<T>((raw[2 * i] << 8) | raw[2 * i + 1]);
    }
  }
  if (!in) throw DataError("truncated image data in " + path.string());
  return img;
}

}  // namespace

void write_ppm(const std::filesystem::path& path, const ImageU8& rgb) {
  if (rgb.channels() != 3) throw std::invalid_argument("write_ppm: expected 3 channels");
  auto out = open_out(path);
  out << "P6\n" << rgb.width() << ' ' << rgb.height() << "\n255\n";
  out.write(reinterpret_cast<const char*>(rgb.data().data()), static_cast<std::streamsize>(rgb.size()));
  finish(out, path);
}

void write_pgm(const std::filesystem::path& path, const ImageU8& gray) {
  if (gray.channels() != 1) throw std::invalid_argument("write_pgm: expected 1 channel");
  auto out = open_out(path);
  out << "P5\n" << gray.width() << ' ' << gray.height() << "\n255\n";
  out.write(reinterpret_cast<const char*>(gray.data().data()), static_cast<std::streamsize>(gray.size()));
  finish(out, path);
}

void write_pgm(const std::filesystem::path& path, const ImageU16& gray) {
  if (gray.channels() != 1) throw std::invalid_argument("write_pgm: expected 1 channel");
  auto out = open_out(path);
  out << "P5\n" << gray.width() << ' ' << gray.height() << "\n65535\n";
  std::vector<unsigned char> raw(gray.size() * 2);
  for (std::size_t i = 0; i < gray.size(); ++i) {
    raw[2 * i] = static_cast<unsigned char>(gray.data()[i] >> 8);
    raw[2 * i + 1] = static_cast<unsigned char>(gray.data()[i] & 0xff);
  }
  out.write(reinterpret_cast<const char*>(raw.data()), static_cast<std::streamsize>(raw.size()));
  finish(out, path);
}

ImageU8 read_ppm(const std::filesystem::path& path) {
  auto in = open_in(path);
  const Header h = read_header(in, path);
  if (h.magic != "P6" || h.maxval > 255) throw DataError("not an 8-bit P6 image: " + path.string());
  return read_body<std::uint8_t>(in, h, 3, path);
}

ImageU8 read_pgm8(const std::filesystem::path& path) {
  auto in = open_in(path);
  const Header h = read_header(in, path);
  if (h.magic != "P5" || h.maxval > 255) throw DataError("not an 8-bit P5 image: " + path.string());
  return read_body<std::uint8_t>(in, h, 1, path);
}

ImageU16 read_pgm16(const std::filesystem::path& path) {
  auto in = open_in(path);
  const Header h = read_header(in, path);
  if (h.magic != "P5" || h.maxval <= 255) throw DataError("not a 16-bit P5 image: " + path.string());
  return read_body<std::uint16_t>(in, h, 1, path);
}

}  // namespace apnv
