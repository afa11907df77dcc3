#pragma once

#include <cassert>
#include <string>
#include <utility>
#include <variant>

namespace jcall {

struct Unit {
  bool operator==(const Unit&) const = default;
};

template <typename E>
struct Err {
  E code;
  std::string detail;
};

template <typename E>
Err<E> make_err(E code, std::string detail = {}) {
  return Err<E>{code, std::move(detail)};
}

/// Value-or-error carrier used across the codec and call-control layers.
template <typename T, typename E>
class Result {
public:
  Result(T value) : v_(std::move(value)) {}
  Result(Err<E> e) : v_(std::move(e)) {}

  bool ok() const { return std::holds_alternative<T>(v_); }
  explicit operator bool() const { return ok(); }

  T& value() {
    assert(ok());
    return std::get<T>(v_);
  }
  const T& value() const {
    assert(ok());
    return std::get<T>(v_);
  }
  T take() {
    assert(ok());
    return std::move(std::get<T>(v_));
  }

  E error() const {
    assert(!ok());
    return std::get<Err<E>>(v_).code;
  }
  const std::string& error_detail() const {
    assert(!ok());
    return std::get<Err<E>>(v_).detail;
  }

private:
  std::variant<T, Err<E>> v_;
};

template <typename E>
using Status = Result<Unit, E>;

inline Unit ok_unit() { return Unit{}; }

}  // namespace jcall
