#pragma once

#include <array>
#include <cstdint>
#include <span>
#include <vector>

namespace lpcc {

inline constexpr int kCdfBits = 16;
inline constexpr std::uint32_t kCdfTotal = 1u << kCdfBits;

/// Integer CDF over symbols 1..255: frequency of symbol s is
/// cum[s] - cum[s - 1], cum[0] = 0, cum[255] = 2^16, every frequency >= 1.
struct QuantizedCdf {
  std::array<std::uint32_t, 256> cum{};

  std::uint32_t freq(int symbol) const { return cum[symbol] - cum[symbol - 1]; }
  /// -log2(freq / 2^16)
  double cost_bits(int symbol) const;
};

/// Largest-remainder allocation of 2^16 with a floor of one count per symbol;
/// remainder ties go to the lower symbol. Throws on a negative entry or a sum
/// that is not 1 within 1e-9.
QuantizedCdf quantize_pmf(std::span<const double> pmf);
QuantizedCdf uniform_cdf();

/// Range encoder with a 56-bit coding window in 64-bit registers. Carries are
/// propagated into the bytes already written.
class RangeEncoder {
 public:
  void encode(const QuantizedCdf& cdf, int symbol);
  /// Flushes one final byte and returns the payload.
  std::vector<std::uint8_t> finish();
  std::size_t bytes_written() const { return out_.size(); }

 private:
  void carry();

  std::uint64_t low_ = 0;
  std::uint64_t range_ = (1ull << 56) - 1;
  std::vector<std::uint8_t> out_;
  bool finished_ = false;
};

class RangeDecoder {
 public:
  explicit RangeDecoder(std::span<const std::uint8_t> payload);

  int decode(const QuantizedCdf& cdf);
  /// Throws unless the payload was consumed exactly.
  void finish() const;

 private:
  std::uint8_t next_byte();

  std::span<const std::uint8_t> in_;
  std::size_t pos_ = 0;
  std::uint64_t code_ = 0;  // stream value minus low, inside the window
  std::uint64_t range_ = (1ull << 56) - 1;
};

}  // namespace lpcc
