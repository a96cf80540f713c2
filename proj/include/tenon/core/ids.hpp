#pragma once

#include <compare>
#include <functional>
#include <ostream>
#include <string>
#include <string_view>
#include <utility>

namespace tenon {

// String-backed identifier distinguished by Tag so a PartId cannot be passed
// where a ClassId is expected.
template <typename Tag>
class StrongId {
 public:
  StrongId() = default;
  explicit StrongId(std::string value) : value_(std::move(value)) {}
  explicit StrongId(std::string_view value) : value_(value) {}
  explicit StrongId(const char* value) : value_(value) {}

  const std::string& str() const noexcept { return value_; }
  bool empty() const noexcept { return value_.empty(); }

  friend auto operator<=>(const StrongId&, const StrongId&) = default;
  friend bool operator==(const StrongId&, const StrongId&) = default;

  friend std::ostream& operator<<(std::ostream& os, const StrongId& id) {
    return os << id.value_;
  }

 private:
  std::string value_;
};

struct PartIdTag {};
struct ClassIdTag {};

using PartId = StrongId<PartIdTag>;
using ClassId = StrongId<ClassIdTag>;

}  // namespace tenon

template <typename Tag>
struct std::hash<tenon::StrongId<Tag>> {
  std::size_t operator()(const tenon::StrongId<Tag>& id) const noexcept {
    return std::hash<std::string>{}(id.str());
  }
};
