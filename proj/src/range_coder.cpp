#include "lpcc/range_coder.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "lpcc/error.hpp"

namespace lpcc {

namespace {

constexpr std::uint64_t kWindowBits = 56;
constexpr std::uint64_t kWindowMask = (1ull << kWindowBits) - 1;
constexpr std::uint64_t kRenormBound = 1ull << 48;
constexpr std::size_t kInitialBytes = 7;
// A valid payload leaves exactly this many implicit zero bytes for the decoder
// to read past its end (7 bytes primed, one flush byte written).
constexpr std::size_t kImplicitTail = kInitialBytes - 1;

}  // namespace

double QuantizedCdf::cost_bits(int symbol) const {
  return static_cast<double>(kCdfBits) - std::log2(static_cast<double>(freq(symbol)));
}

QuantizedCdf quantize_pmf(std::span<const double> pmf) {
  require(pmf.size() == 255, ErrorKind::invalid_argument, "pmf must have 255 entries");
  double sum = 0.0;
  for (double p : pmf) {
    require(std::isfinite(p) && p >= 0.0, ErrorKind::invalid_argument, "invalid pmf: negative or non-finite entry");
    sum += p;
  }
  require(std::abs(sum - 1.0) <= 1e-9, ErrorKind::invalid_argument, "invalid pmf: entries do not sum to 1");

  constexpr std::uint32_t spread = kCdfTotal - 255;
  std::array<std::uint32_t, 255> freq{};
  std::array<double, 255> rem{};
  std::int64_t assigned = 0;
  for (std::size_t i = 0; i < 255; ++i) {
    const double ideal = pmf[i] / sum * static_cast<double>(spread);
    const double fl = std::floor(ideal);
    freq[i] = static_cast<std::uint32_t>(fl);
    rem[i] = ideal - fl;
    assigned += freq[i];
  }
  std::int64_t deficit = static_cast<std::int64_t>(spread) - assigned;
  std::array<std::uint8_t, 255> order{};
  std::iota(order.begin(), order.end(), std::uint8_t{0});
  if (deficit > 0) {
    const auto cmp = [&](std::uint8_t a, std::uint8_t b) { return rem[a] > rem[b] || (rem[a] == rem[b] && a < b); };
    const auto k = static_cast<std::ptrdiff_t>(std::min<std::int64_t>(deficit, 255));
    std::nth_element(order.begin(), order.begin() + k - 1, order.end(), cmp);
    for (std::ptrdiff_t j = 0; j < k; ++j) ++freq[order[j]];
    deficit -= k;
  }
  // Rounding can in principle overshoot by a count; take it back from the
  // smallest remainders that still have mass to give.
  while (deficit < 0) {
    std::size_t best = 255;
    for (std::size_t i = 0; i < 255; ++i)
      if (freq[i] > 0 && (best == 255 || rem[i] < rem[best])) best = i;
    --freq[best];
    rem[best] = 2.0;
    ++deficit;
  }
  QuantizedCdf cdf;
  cdf.cum[0] = 0;
  for (std::size_t i = 0; i < 255; ++i) cdf.cum[i + 1] = cdf.cum[i] + freq[i] + 1;
  return cdf;
}

QuantizedCdf uniform_cdf() {
  std::array<double, 255> p;
  p.fill(1.0 / 255.0);
  return quantize_pmf(p);
}

void RangeEncoder::carry() {
  for (auto it = out_.rbegin(); it != out_.rend(); ++it) {
    if (++*it != 0) return;
  }
  fail(ErrorKind::internal_sync, "range coder carry past the start of the stream");
}

void RangeEncoder::encode(const QuantizedCdf& cdf, int symbol) {
  require(!finished_, ErrorKind::usage, "encode after finish");
  require(symbol >= 1 && symbol <= 255, ErrorKind::invalid_argument, "symbol outside 1..255");
  const std::uint64_t start = cdf.cum[symbol - 1];
  const std::uint64_t size = cdf.cum[symbol] - cdf.cum[symbol - 1];
  require(size > 0, ErrorKind::invalid_argument, "zero-frequency symbol");
  const std::uint64_t r = range_ >> kCdfBits;
  low_ += r * start;
  // The top symbol absorbs the truncation remainder.
  range_ = symbol == 255 ? range_ - r * start : r * size;
  if (low_ > kWindowMask) {
    low_ &= kWindowMask;
    carry();
  }
  while (range_ < kRenormBound) {
    out_.push_back(static_cast<std::uint8_t>(low_ >> 48));
    low_ = (low_ << 8) & kWindowMask;
    range_ <<= 8;
  }
}

std::vector<std::uint8_t> RangeEncoder::finish() {
  require(!finished_, ErrorKind::usage, "finish called twice");
  finished_ = true;
  // Any value in [low, low + range) identifies the interval; range >= 2^48,
  // so rounding low up to a multiple of 2^48 needs only one more byte.
  std::uint64_t v = (low_ + (kRenormBound - 1)) & ~(kRenormBound - 1);
  if (v > kWindowMask) {
    v &= kWindowMask;
    carry();
  }
  out_.push_back(static_cast<std::uint8_t>(v >> 48));
  return std::move(out_);
}

RangeDecoder::RangeDecoder(std::span<const std::uint8_t> payload) : in_(payload) {
  require(!payload.empty(), ErrorKind::truncated, "empty coder payload");
  for (std::size_t i = 0; i < kInitialBytes; ++i) code_ = (code_ << 8) | next_byte();
  require(code_ < range_, ErrorKind::corrupt, "coder payload starts outside the code space");
}

std::uint8_t RangeDecoder::next_byte() {
  const std::size_t p = pos_++;
  if (p < in_.size()) return in_[p];
  require(p < in_.size() + kImplicitTail, ErrorKind::truncated, "coder payload truncated");
  return 0;
}

int RangeDecoder::decode(const QuantizedCdf& cdf) {
  const std::uint64_t r = range_ >> kCdfBits;
  const std::uint64_t v = std::min<std::uint64_t>(code_ / r, kCdfTotal - 1);
  const auto it = std::upper_bound(cdf.cum.begin() + 1, cdf.cum.end(), static_cast<std::uint32_t>(v));
  const int symbol = static_cast<int>(it - cdf.cum.begin());
  const std::uint64_t start = cdf.cum[symbol - 1];
  const std::uint64_t size = cdf.cum[symbol] - start;
  code_ -= r * start;
  range_ = symbol == 255 ? range_ - r * start : r * size;
  require(code_ < range_, ErrorKind::corrupt, "coder state left the interval");
  while (range_ < kRenormBound) {
    code_ = (code_ << 8) | next_byte();
    range_ <<= 8;
  }
  return symbol;
}

void RangeDecoder::finish() const {
  require(pos_ == in_.size() + kImplicitTail, ErrorKind::corrupt,
          "coder payload length does not match the decoded symbols");
}

}  // namespace lpcc
