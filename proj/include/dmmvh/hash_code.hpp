#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

namespace dmmvh {

// K-bit code over {-1,+1}. Bit k of the packed words is 1 for +1 and 0 for -1;
// unused high bits of the last word stay zero.
class HashCode {
 public:
  HashCode() = default;
  explicit HashCode(std::size_t bits);

  // Packs a vector of signs; any value >= 0 is read as +1.
  static HashCode from_signs(std::span<const double> signs);

  std::size_t bits() const { return bits_; }
  const std::vector<std::uint64_t>& words() const { return words_; }

  int sign(std::size_t k) const { return (words_[k / 64] >> (k % 64)) & 1u ? 1 : -1; }
  void set(std::size_t k, bool positive);

  // Back to a +/-1 vector.
  std::vector<double> unpack() const;

  friend bool operator==(const HashCode&, const HashCode&) = default;

 private:
  std::size_t bits_ = 0;
  std::vector<std::uint64_t> words_;
};

// Number of differing bits. Throws ShapeError if the bit lengths differ.
std::size_t hamming_distance(const HashCode& a, const HashCode& b);

}  // namespace dmmvh
