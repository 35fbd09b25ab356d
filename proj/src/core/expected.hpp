#pragma once

#include <cassert>
#include <utility>
#include <variant>

namespace curlvis {

// Minimal value-or-error carrier used by operations with typed failure modes.
// E is a small enum or struct describing what went wrong.
template <class T, class E>
class Expected {
public:
  Expected(T value) : data_(std::in_place_index<0>, std::move(value)) {}
  Expected(E error) : data_(std::in_place_index<1>, std::move(error)) {}

  bool ok() const { return data_.index() == 0; }
  explicit operator bool() const { return ok(); }

  const T& value() const {
    assert(ok());
    return std::get<0>(data_);
  }
  T& value() {
    assert(ok());
    return std::get<0>(data_);
  }
  const T& operator*() const { return value(); }
  T& operator*() { return value(); }
  const T* operator->() const { return &value(); }
  T* operator->() { return &value(); }

  const E& error() const {
    assert(!ok());
    return std::get<1>(data_);
  }

private:
  std::variant<T, E> data_;
};

}  // namespace curlvis
