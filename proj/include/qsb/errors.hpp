#pragma once

#include <optional>
#include <stdexcept>
#include <string>
#include <utility>

namespace qsb {

enum class Errc {
  invalid_input,
  invalid_seed,
  key_too_short,
  key_starved,
  pool_desync,
  insufficient_sample,
  reconciliation_impossible,
  relay_failed,
  signing_failed,
  no_route,
  no_wavelength,
  config_error,
  internal_error,
  append_rejected,
  invalid_block,
  transaction_failed,
  invariant_violation,
  io_error,
};

const char* errc_name(Errc code);

class Error : public std::runtime_error {
 public:
  Error(Errc code, const std::string& message);
  Errc code() const { return code_; }

 private:
  Errc code_;
};

[[noreturn]] void fail(Errc code, const std::string& message);

inline void require(bool condition, Errc code, const std::string& message) {
  if (!condition) fail(code, message);
}

// Value-or-error carrier for outcomes the caller is expected to branch on
// (key starvation, blocked requests, aborted sessions). Hard misuse still
// throws Error.
template <typename T>
class Result {
 public:
  Result(T value) : value_(std::move(value)), code_(Errc::internal_error) {}
  Result(Errc code, std::string message)
      : code_(code), message_(std::move(message)) {}

  bool ok() const { return value_.has_value(); }
  explicit operator bool() const { return ok(); }

  const T& value() const& {
    check();
    return *value_;
  }
  T& value() & {
    check();
    return *value_;
  }
  T take() && {
    check();
    return std::move(*value_);
  }

  Errc code() const { return code_; }
  const std::string& message() const { return message_; }

 private:
  void check() const {
    if (!value_.has_value()) throw Error(code_, message_);
  }

  std::optional<T> value_;
  Errc code_;
  std::string message_;
};

struct Unit {};
using Status = Result<Unit>;

inline Status ok_status() { return Status(Unit{}); }

}  // namespace qsb
