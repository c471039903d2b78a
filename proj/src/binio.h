// src/binio.h

// Copyright 2026  The tpsda authors

// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//  http://www.apache.org/licenses/LICENSE-2.0
//
// THIS CODE IS PROVIDED *AS IS* BASIS, WITHOUT WARRANTIES OR CONDITIONS OF ANY
// KIND, EITHER EXPRESS OR IMPLIED, INCLUDING WITHOUT LIMITATION ANY IMPLIED
// WARRANTIES OR CONDITIONS OF TITLE, FITNESS FOR A PARTICULAR PURPOSE,
// MERCHANTABLITY OR NON-INFRINGEMENT.
// See the Apache 2 License for the specific language governing permissions and
// limitations under the License.

#ifndef TPSDA_SRC_BINIO_H_
#define TPSDA_SRC_BINIO_H_

#include <cstdint>
#include <cstring>
#include <istream>
#include <ostream>
#include <string>

#include "tpsda/common.h"

// Little-endian primitive encoding for the binary file sections,
// independent of host byte order.

namespace tpsda {
namespace binio {

inline void WriteBytes(std::ostream &os, const void *p, std::size_t n) {
  os.write(static_cast<const char *>(p), static_cast<std::streamsize>(n));
  if (!os) throw IoError("write failed");
}

inline void ReadBytes(std::istream &is, void *p, std::size_t n) {
  is.read(static_cast<char *>(p), static_cast<std::streamsize>(n));
  if (static_cast<std::size_t>(is.gcount()) != n) {
    throw IoError("unexpected end of file");
  }
}

template <typename UInt>
void WriteLe(std::ostream &os, UInt value) {
  unsigned char buf[sizeof(UInt)];
  for (std::size_t i = 0; i < sizeof(UInt); ++i) {
    buf[i] = static_cast<unsigned char>(value >> (8 * i));
  }
  WriteBytes(os, buf, sizeof(UInt));
}

template <typename UInt>
UInt ReadLe(std::istream &is) {
  unsigned char buf[sizeof(UInt)];
  ReadBytes(is, buf, sizeof(UInt));
  UInt value = 0;
  for (std::size_t i = 0; i < sizeof(UInt); ++i) {
    value |= static_cast<UInt>(buf[i]) << (8 * i);
  }
  return value;
}

inline void WriteF64(std::ostream &os, double x) {
  std::uint64_t bits;
  std::memcpy(&bits, &x, 8);
  WriteLe<std::uint64_t>(os, bits);
}

inline double ReadF64(std::istream &is) {
  const std::uint64_t bits = ReadLe<std::uint64_t>(is);
  double x;
  std::memcpy(&x, &bits, 8);
  return x;
}

inline void WriteF32(std::ostream &os, float x) {
  std::uint32_t bits;
  std::memcpy(&bits, &x, 4);
  WriteLe<std::uint32_t>(os, bits);
}

inline float ReadF32(std::istream &is) {
  const std::uint32_t bits = ReadLe<std::uint32_t>(is);
  float x;
  std::memcpy(&x, &bits, 4);
  return x;
}

inline void WriteString(std::ostream &os, const std::string &s) {
  WriteLe<std::uint32_t>(os, static_cast<std::uint32_t>(s.size()));
  if (!s.empty()) WriteBytes(os, s.data(), s.size());
}

inline std::string ReadString(std::istream &is, std::uint32_t max_len = 1u
                                                                        << 20) {
  const std::uint32_t len = ReadLe<std::uint32_t>(is);
  if (len > max_len) throw IoError("string length out of range");
  std::string s(len, '\0');
  if (len) ReadBytes(is, s.data(), len);
  return s;
}

}  // namespace binio
}  // namespace tpsda

#endif  // TPSDA_SRC_BINIO_H_
