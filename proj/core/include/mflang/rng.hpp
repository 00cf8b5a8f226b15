#pragma once

#include <array>
#include <cstdint>
#include <span>

namespace mflang {

/// Philox4x32-10 block function (Salmon et al., SC'11). Maps a 128-bit
/// counter and a 64-bit key to 128 pseudo-random bits.
std::array<std::uint32_t, 4> philox4x32(std::array<std::uint32_t, 4> counter,
                                        std::array<std::uint32_t, 2> key) noexcept;

/// Packs (replica, role, index) into a stream id. Roles separate the
/// independent noise families of one experiment (main particles, reference
/// particles, initial data, ...).
constexpr std::uint64_t stream_id(std::uint32_t replica, std::uint32_t role, std::uint32_t index) noexcept {
  return (static_cast<std::uint64_t>(replica & 0xFFFFFFu) << 40) |
         (static_cast<std::uint64_t>(role & 0xFFu) << 32) | index;
}

namespace stream_role {
inline constexpr std::uint32_t kParticles = 0;
inline constexpr std::uint32_t kReference = 1;
inline constexpr std::uint32_t kInitialA = 2;
inline constexpr std::uint32_t kInitialB = 3;
inline constexpr std::uint32_t kInitialReference = 4;
inline constexpr std::uint32_t kAuxiliary = 5;
}  // namespace stream_role

/// Counter-based Gaussian stream. The pair (seed, stream) fully determines
/// the sequence, so any number of streams can be advanced independently
/// in any order or on any thread.
class RngStream {
 public:
  RngStream(std::uint64_t seed, std::uint64_t stream) noexcept;

  std::uint64_t seed() const noexcept { return seed_; }
  std::uint64_t stream() const noexcept { return stream_; }

  std::uint64_t next_u64() noexcept;
  /// Uniform on the open interval (0, 1).
  double next_uniform() noexcept;
  /// Standard normal (Box–Muller on two uniforms).
  double next_normal() noexcept;
  void fill_normal(std::span<double> out) noexcept;

 private:
  void refill() noexcept;

  std::uint64_t seed_;
  std::uint64_t stream_;
  std::uint64_t block_ = 0;
  std::array<std::uint32_t, 4> buffer_{};
  int used_ = 4;
  double spare_normal_ = 0.0;
  bool has_spare_ = false;
};

}  // namespace mflang
