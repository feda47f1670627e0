#include <fcntl.h>
#include <poll.h>
#include <signal.h>
#include <sys/types.h>
#include <sys/wait.h>
#include <unistd.h>

#include <cerrno>
#include <cstring>

#include "polarguide/backbone.hpp"
#include "polarguide/bridge_protocol.hpp"
#include "polarguide/error.hpp"

namespace polarguide {
namespace bridge {

void append_u32(std::vector<std::uint8_t>& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
}

std::uint32_t read_u32(std::span<const std::uint8_t> bytes, std::size_t offset) {
  if (offset + 4 > bytes.size()) fail(ErrorKind::kBridge, "truncated frame payload");
  std::uint32_t v = 0;
  for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(bytes[offset + i]) << (8 * i);
  return v;
}

std::vector<std::uint8_t> encode_header(std::uint32_t opcode, std::uint64_t length) {
  std::vector<std::uint8_t> out(kMagic, kMagic + 4);
  append_u32(out, opcode);
  for (int i = 0; i < 8; ++i) out.push_back(static_cast<std::uint8_t>(length >> (8 * i)));
  return out;
}

Header decode_header(std::span<const std::uint8_t> bytes) {
  if (bytes.size() < kHeaderSize) fail(ErrorKind::kBridge, "truncated frame header");
  if (std::memcmp(bytes.data(), kMagic, 4) != 0) fail(ErrorKind::kBridge, "malformed frame: bad magic");
  Header h;
  h.opcode = read_u32(bytes, 4);
  for (int i = 0; i < 8; ++i) h.length |= static_cast<std::uint64_t>(bytes[8 + i]) << (8 * i);
  return h;
}

void append_tensor(std::vector<std::uint8_t>& out, const Image& img) {
  out.reserve(out.size() + 4 * img.size());
  for (double v : img.data()) {
    const float f = static_cast<float>(v);
    std::uint32_t bits;
    std::memcpy(&bits, &f, 4);
    append_u32(out, bits);
  }
}

Image read_tensor(std::span<const std::uint8_t> bytes, std::size_t offset, int h, int w, int c) {
  Image img(h, w, c);
  if (offset + 4 * img.size() > bytes.size()) fail(ErrorKind::kBridge, "tensor payload too short");
  for (std::size_t i = 0; i < img.size(); ++i) {
    const std::uint32_t bits = read_u32(bytes, offset + 4 * i);
    float f;
    std::memcpy(&f, &bits, 4);
    img[i] = f;
  }
  return img;
}

std::uint64_t checksum(std::span<const std::uint8_t> bytes) {
  std::uint64_t hash = 14695981039346656037ull;
  for (std::uint8_t b : bytes) {
    hash ^= b;
    hash *= 1099511628211ull;
  }
  return hash;
}

}  // namespace bridge

struct BridgeBackbone::Frame {
  std::uint32_t opcode = 0;
  std::vector<std::uint8_t> payload;
};

BridgeBackbone::BridgeBackbone(const std::string& command, int height, int width, int channels, Options options)
    : options_(options) {
  info_ = {"bridge", height, width, channels, false, false, false};
  ::signal(SIGPIPE, SIG_IGN);
  int down[2];
  int up[2];
  if (::pipe(down) != 0 || ::pipe(up) != 0) fail(ErrorKind::kBridge, "pipe() failed: " + std::string(std::strerror(errno)));
  const pid_t pid = ::fork();
  if (pid < 0) fail(ErrorKind::kBridge, "fork() failed: " + std::string(std::strerror(errno)));
  if (pid == 0) {
    ::setpgid(0, 0);
    ::dup2(down[0], STDIN_FILENO);
    ::dup2(up[1], STDOUT_FILENO);
    ::close(down[0]);
    ::close(down[1]);
    ::close(up[0]);
    ::close(up[1]);
    ::execl("/bin/sh", "sh", "-c", command.c_str(), static_cast<char*>(nullptr));
    ::_exit(127);
  }
  ::setpgid(pid, pid);
  ::close(down[0]);
  ::close(up[1]);
  pid_ = pid;
  to_child_ = down[1];
  from_child_ = up[0];

  std::vector<std::uint8_t> hello;
  bridge::append_u32(hello, static_cast<std::uint32_t>(height));
  bridge::append_u32(hello, static_cast<std::uint32_t>(width));
  bridge::append_u32(hello, static_cast<std::uint32_t>(channels));
  bridge::append_u32(hello, 0);
  try {
    const Frame reply = round_trip(bridge::kHello, hello, bridge::kHello);
    const std::span<const std::uint8_t> p(reply.payload);
    if (bridge::read_u32(p, 0) != static_cast<std::uint32_t>(height) ||
        bridge::read_u32(p, 4) != static_cast<std::uint32_t>(width) ||
        bridge::read_u32(p, 8) != static_cast<std::uint32_t>(channels)) {
      fail(ErrorKind::kBridge, "bridge answered HELLO with a different shape");
    }
    const std::uint32_t caps = bridge::read_u32(p, 12);
    info_.has_vjp = (caps & bridge::kCapVjp) != 0;
    info_.has_jvp = (caps & bridge::kCapJvp) != 0;
    info_.is_deterministic = (caps & bridge::kCapDeterministic) != 0;
  } catch (...) {
    shutdown();
    throw;
  }
}

BridgeBackbone::~BridgeBackbone() {
  if (to_child_ >= 0) {
    try {
      const auto bye = bridge::encode_header(bridge::kBye, 0);
      write_all(bye.data(), bye.size());
    } catch (const Error&) {
    }
  }
  shutdown();
}

void BridgeBackbone::shutdown() {
  if (to_child_ >= 0) ::close(to_child_);
  if (from_child_ >= 0) ::close(from_child_);
  to_child_ = from_child_ = -1;
  if (pid_ > 0) {
    int status = 0;
    // Give the child a moment to exit after BYE before killing it.
    for (int i = 0; i < 100; ++i) {
      if (::waitpid(pid_, &status, WNOHANG) == pid_) {
        ::kill(-pid_, SIGKILL);
        pid_ = -1;
        return;
      }
      ::usleep(10000);
    }
    ::kill(-pid_, SIGKILL);
    ::waitpid(pid_, &status, 0);
    pid_ = -1;
  }
}

void BridgeBackbone::write_all(const std::uint8_t* data, std::size_t n) {
  while (n > 0) {
    const ssize_t k = ::write(to_child_, data, n);
    if (k < 0) {
      if (errno == EINTR) continue;
      fail(ErrorKind::kBridge, "bridge write failed: " + std::string(std::strerror(errno)));
    }
    data += k;
    n -= static_cast<std::size_t>(k);
  }
}

void BridgeBackbone::read_all(std::uint8_t* data, std::size_t n) {
  const int timeout_ms = static_cast<int>(options_.timeout_seconds * 1000.0);
  while (n > 0) {
    pollfd pfd{from_child_, POLLIN, 0};
    const int ready = ::poll(&pfd, 1, timeout_ms);
    if (ready == 0) fail(ErrorKind::kBridge, "bridge timed out");
    if (ready < 0) {
      if (errno == EINTR) continue;
      fail(ErrorKind::kBridge, "bridge poll failed: " + std::string(std::strerror(errno)));
    }
    const ssize_t k = ::read(from_child_, data, n);
    if (k == 0) fail(ErrorKind::kBridge, "bridge closed the connection");
    if (k < 0) {
      if (errno == EINTR) continue;
      fail(ErrorKind::kBridge, "bridge read failed: " + std::string(std::strerror(errno)));
    }
    data += k;
    n -= static_cast<std::size_t>(k);
  }
}

BridgeBackbone::Frame BridgeBackbone::round_trip(std::uint32_t opcode, const std::vector<std::uint8_t>& payload,
                                                 std::uint32_t expect) {
  if (to_child_ < 0) fail(ErrorKind::kBridge, "bridge session is closed");
  const auto header = bridge::encode_header(opcode, payload.size());
  write_all(header.data(), header.size());
  write_all(payload.data(), payload.size());
  last_sent_ = bridge::checksum(payload);

  std::uint8_t raw_header[bridge::kHeaderSize];
  read_all(raw_header, sizeof raw_header);
  const bridge::Header h = bridge::decode_header(raw_header);
  if (h.length > (std::uint64_t{1} << 34)) fail(ErrorKind::kBridge, "malformed frame: payload length too large");
  Frame frame{h.opcode, std::vector<std::uint8_t>(h.length)};
  read_all(frame.payload.data(), frame.payload.size());
  last_received_ = bridge::checksum(frame.payload);
  if (frame.opcode == bridge::kError) {
    fail(ErrorKind::kBridge, "bridge error: " + std::string(frame.payload.begin(), frame.payload.end()));
  }
  if (frame.opcode != expect) {
    fail(ErrorKind::kBridge, "unexpected opcode " + std::to_string(frame.opcode) + " (wanted " +
                                 std::to_string(expect) + ")");
  }
  return frame;
}

NormalMap BridgeBackbone::forward(const Image& x) {
  check_input(x);
  std::vector<std::uint8_t> payload;
  bridge::append_tensor(payload, x);
  const Frame reply = round_trip(bridge::kForward, payload, bridge::kNormals);
  if (reply.payload.size() != 4 * x.pixels() * 3) fail(ErrorKind::kBridge, "NORMALS frame has the wrong size");
  return bridge::read_tensor(reply.payload, 0, info_.height, info_.width, 3);
}

Image BridgeBackbone::vjp_input(const Image& x, const Image& cotangent) {
  check_input(x);
  require_shape(cotangent, info_.height, info_.width, 3, "vjp cotangent");
  if (!info_.has_vjp) {
    if (!options_.allow_fd_fallback) {
      fail(ErrorKind::kCapability, "bridge backbone does not provide a VJP");
    }
    return finite_difference_vjp(*this, x, cotangent);
  }
  std::vector<std::uint8_t> payload;
  bridge::append_tensor(payload, x);
  bridge::append_tensor(payload, cotangent);
  const Frame reply = round_trip(bridge::kVjp, payload, bridge::kGrad);
  if (reply.payload.size() != 4 * x.size()) fail(ErrorKind::kBridge, "GRAD frame has the wrong size");
  return bridge::read_tensor(reply.payload, 0, info_.height, info_.width, info_.channels);
}

Image BridgeBackbone::jvp_input(const Image& x, const Image& tangent) {
  check_input(x);
  require_same_shape(x, tangent, "jvp tangent");
  if (!info_.has_jvp) fail(ErrorKind::kCapability, "bridge backbone does not provide a JVP");
  std::vector<std::uint8_t> payload;
  bridge::append_tensor(payload, x);
  bridge::append_tensor(payload, tangent);
  const Frame reply = round_trip(bridge::kJvp, payload, bridge::kOut);
  if (reply.payload.size() != 4 * x.pixels() * 3) fail(ErrorKind::kBridge, "OUT frame has the wrong size");
  return bridge::read_tensor(reply.payload, 0, info_.height, info_.width, 3);
}

}  // namespace polarguide
