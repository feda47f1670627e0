#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "polarguide/image.hpp"

// Lock-step binary protocol between the primary process and an external
// backbone. Every frame is
//
//   magic   4 bytes  "PGBF"
//   opcode  4 bytes  uint32 little-endian
//   length  8 bytes  uint64 little-endian, payload size in bytes
//   payload length bytes
//
// Tensors are little-endian float32, row-major, channel-last.
//
//   HELLO   {h, w, c, caps: uint32}  client -> server, echoed with server caps
//   FWD     {x}                      -> NORMALS {n}
//   VJP     {x, cotangent}           -> GRAD    {g}
//   JVP     {x, tangent}             -> OUT     {t}
//   BYE     {}                       -> BYE, then the server exits
//   ERROR   {utf-8 message}          server -> client on any failure
namespace polarguide::bridge {

inline constexpr std::uint8_t kMagic[4] = {'P', 'G', 'B', 'F'};
inline constexpr std::size_t kHeaderSize = 16;

enum Opcode : std::uint32_t {
  kHello = 1,
  kForward = 2,
  kNormals = 3,
  kVjp = 4,
  kGrad = 5,
  kJvp = 6,
  kOut = 7,
  kBye = 8,
  kError = 9,
};

enum Capability : std::uint32_t {
  kCapVjp = 1u << 0,
  kCapJvp = 1u << 1,
  kCapDeterministic = 1u << 2,
};

struct Header {
  std::uint32_t opcode = 0;
  std::uint64_t length = 0;
};

std::vector<std::uint8_t> encode_header(std::uint32_t opcode, std::uint64_t length);
// Throws kBridge on a bad magic.
Header decode_header(std::span<const std::uint8_t> bytes);

void append_u32(std::vector<std::uint8_t>& out, std::uint32_t v);
std::uint32_t read_u32(std::span<const std::uint8_t> bytes, std::size_t offset);

// Appends img as float32 values.
void append_tensor(std::vector<std::uint8_t>& out, const Image& img);
// Reads h x w x c float32 values starting at offset.
Image read_tensor(std::span<const std::uint8_t> bytes, std::size_t offset, int h, int w, int c);

// FNV-1a over raw bytes; used to compare frames across the process boundary.
std::uint64_t checksum(std::span<const std::uint8_t> bytes);

}  // namespace polarguide::bridge
