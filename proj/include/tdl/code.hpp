#pragma once

#include <bit>
#include <cstdint>
#include <functional>
#include <string>
#include <vector>

namespace tdl {

/// Growable bit set used as a type code. Bit i set means type i lies in the
/// lower set of the coded type.
class Code {
 public:
  Code() = default;
  explicit Code(std::size_t width) : words_((width + 63) / 64, 0), width_(width) {}

  std::size_t width() const { return width_; }

  void resize(std::size_t width) {
    width_ = width;
    words_.resize((width + 63) / 64, 0);
  }

  void set(std::size_t i) {
    if (i >= width_) resize(i + 1);
    words_[i / 64] |= std::uint64_t{1} << (i % 64);
  }
  bool test(std::size_t i) const {
    return i < width_ && (words_[i / 64] >> (i % 64)) & 1u;
  }

  Code& operator&=(const Code& o) {
    for (std::size_t w = 0; w < words_.size(); ++w) words_[w] &= w < o.words_.size() ? o.words_[w] : 0;
    return *this;
  }
  Code& operator|=(const Code& o) {
    if (o.width_ > width_) resize(o.width_);
    for (std::size_t w = 0; w < o.words_.size(); ++w) words_[w] |= o.words_[w];
    return *this;
  }
  friend Code operator&(Code a, const Code& b) { return a &= b; }
  friend Code operator|(Code a, const Code& b) { return a |= b; }

  /// this ⊆ o
  bool subset_of(const Code& o) const {
    for (std::size_t w = 0; w < words_.size(); ++w) {
      std::uint64_t ow = w < o.words_.size() ? o.words_[w] : 0;
      if (words_[w] & ~ow) return false;
    }
    return true;
  }

  bool none() const {
    for (auto w : words_)
      if (w) return false;
    return true;
  }
  std::size_t count() const {
    std::size_t n = 0;
    for (auto w : words_) n += static_cast<std::size_t>(std::popcount(w));
    return n;
  }

  friend bool operator==(const Code& a, const Code& b) { return a.subset_of(b) && b.subset_of(a); }

  template <typename F>
  void for_each(F&& f) const {
    for (std::size_t w = 0; w < words_.size(); ++w) {
      std::uint64_t bits = words_[w];
      while (bits) {
        int b = std::countr_zero(bits);
        f(w * 64 + static_cast<std::size_t>(b));
        bits &= bits - 1;
      }
    }
  }

  /// Most significant nibble first, trailing zero words trimmed.
  std::string hex() const {
    static const char* digits = "0123456789abcdef";
    std::size_t n = words_.size();
    while (n > 0 && words_[n - 1] == 0) --n;
    if (n == 0) return "0";
    std::string s;
    bool leading = true;
    for (std::size_t w = n; w-- > 0;) {
      for (int shift = 60; shift >= 0; shift -= 4) {
        unsigned d = (words_[w] >> shift) & 0xf;
        if (leading && d == 0) continue;
        leading = false;
        s.push_back(digits[d]);
      }
    }
    return s;
  }

  std::size_t hash() const {
    std::size_t h = 1469598103934665603ull;
    std::size_t n = words_.size();
    while (n > 0 && words_[n - 1] == 0) --n;
    for (std::size_t w = 0; w < n; ++w) h = (h ^ words_[w]) * 1099511628211ull;
    return h;
  }

 private:
  std::vector<std::uint64_t> words_;
  std::size_t width_ = 0;
};

struct CodeHash {
  std::size_t operator()(const Code& c) const { return c.hash(); }
};

}  // namespace tdl
