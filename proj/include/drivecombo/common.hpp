#pragma once

#include <algorithm>
#include <array>
#include <atomic>
#include <cstddef>
#include <cstdint>
#include <exception>
#include <limits>
#include <mutex>
#include <optional>
#include <random>
#include <stdexcept>
#include <string>
#include <string_view>
#include <thread>
#include <utility>
#include <vector>

namespace drivecombo {

// ── Errors ───────────────────────────────────────────────────────────────────

class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Malformed input text. `line` is 1-based, 0 when unknown.
class ParseError : public Error {
 public:
  ParseError(const std::string& what, std::size_t line = 0)
      : Error(line == 0 ? what : "line " + std::to_string(line) + ": " + what), line_(line) {}
  std::size_t line() const { return line_; }

 private:
  std::size_t line_;
};

// Well-formed input that violates a domain invariant.
class ValidationError : public Error {
 public:
  using Error::Error;
};

// An endpoint could not be reached or returned a transport-level failure.
// Callers treat it as retriable.
class TransportError : public Error {
 public:
  using Error::Error;
};

class ConfigError : public Error {
 public:
  using Error::Error;
};

// ── Closed enums ─────────────────────────────────────────────────────────────

template <typename E>
struct EnumEntry {
  E value;
  std::string_view token;
};

// Each closed enum specializes this with a `static constexpr std::array entries`
// listing every member exactly once, in declaration order.
template <typename E>
struct EnumTraits;

template <typename E>
constexpr std::size_t enum_count() {
  return EnumTraits<E>::entries.size();
}

template <typename E>
std::string_view to_token(E value) {
  for (const auto& e : EnumTraits<E>::entries) {
    if (e.value == value) return e.token;
  }
  throw std::logic_error("enum value without token");
}

template <typename E>
std::optional<E> parse_token(std::string_view token) {
  for (const auto& e : EnumTraits<E>::entries) {
    if (e.token == token) return e.value;
  }
  return std::nullopt;
}

template <typename E>
std::vector<E> all_values() {
  std::vector<E> out;
  out.reserve(enum_count<E>());
  for (const auto& e : EnumTraits<E>::entries) out.push_back(e.value);
  return out;
}

// ── Randomness ───────────────────────────────────────────────────────────────

// Seeded generator with portable derived draws (the std distributions are not
// specified bit-for-bit across standard libraries).
class SeededRng {
 public:
  explicit SeededRng(std::uint64_t seed) : engine_(seed) {}

  // Uniform in [0, 1).
  double uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  // Uniform in [0, n). n must be positive.
  std::size_t index(std::size_t n) {
    // Rejection sampling keeps the draw unbiased.
    const std::uint64_t bound = static_cast<std::uint64_t>(n);
    const std::uint64_t limit = std::numeric_limits<std::uint64_t>::max() -
                                std::numeric_limits<std::uint64_t>::max() % bound;
    std::uint64_t x;
    do {
      x = engine_();
    } while (x >= limit);
    return static_cast<std::size_t>(x % bound);
  }

  template <typename T>
  void shuffle(std::vector<T>& items) {
    for (std::size_t i = items.size(); i > 1; --i) {
      std::swap(items[i - 1], items[index(i)]);
    }
  }

 private:
  std::mt19937_64 engine_;
};

// ── Bounded fan-out ──────────────────────────────────────────────────────────

// Applies `fn` to every item with at most `max_in_flight` concurrent calls.
// Results keep input order. The first exception thrown by any call is
// rethrown after all workers finish.
template <typename In, typename Fn>
auto parallel_map(const std::vector<In>& items, Fn fn, std::size_t max_in_flight)
    -> std::vector<decltype(fn(items.front()))> {
  using Out = decltype(fn(items.front()));
  std::vector<std::optional<Out>> slots(items.size());
  std::exception_ptr failure;
  std::mutex failure_mutex;
  std::atomic<std::size_t> next{0};

  auto worker = [&] {
    for (;;) {
      const std::size_t i = next.fetch_add(1);
      if (i >= items.size()) return;
      try {
        slots[i].emplace(fn(items[i]));
      } catch (...) {
        std::lock_guard lock(failure_mutex);
        if (!failure) failure = std::current_exception();
      }
    }
  };

  const std::size_t workers = std::clamp<std::size_t>(max_in_flight, 1, std::max<std::size_t>(items.size(), 1));
  if (workers == 1) {
    worker();
  } else {
    std::vector<std::jthread> pool;
    pool.reserve(workers);
    for (std::size_t w = 0; w < workers; ++w) pool.emplace_back(worker);
  }
  if (failure) std::rethrow_exception(failure);

  std::vector<Out> out;
  out.reserve(items.size());
  for (auto& s : slots) out.push_back(std::move(*s));
  return out;
}

// ── Small text helpers ───────────────────────────────────────────────────────

std::string trim(std::string_view s);
std::string to_lower(std::string_view s);
std::string read_file(const std::string& path);
void write_file(const std::string& path, std::string_view content);
void append_file(const std::string& path, std::string_view content);

}  // namespace drivecombo
