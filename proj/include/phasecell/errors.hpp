#pragma once

#include <stdexcept>
#include <string>

namespace phasecell {

// Every library error derives from Error so callers (the CLI in particular)
// can map a failure to a machine-readable kind.
class Error : public std::runtime_error {
 public:
  Error(std::string kind, const std::string& what)
      : std::runtime_error(what), kind_(std::move(kind)) {}
  const std::string& kind() const noexcept { return kind_; }

 private:
  std::string kind_;
};

struct ValidationError : Error {
  explicit ValidationError(const std::string& w) : Error("ValidationError", w) {}
};
struct TruncationError : Error {
  explicit TruncationError(const std::string& w) : Error("TruncationError", w) {}
};
struct DivergentMoment : Error {
  explicit DivergentMoment(const std::string& w) : Error("DivergentMoment", w) {}
};
struct GridTooCoarse : Error {
  explicit GridTooCoarse(const std::string& w) : Error("GridTooCoarse", w) {}
};
struct DomainOverflow : Error {
  explicit DomainOverflow(const std::string& w) : Error("DomainOverflow", w) {}
};
struct TruncationLeak : Error {
  explicit TruncationLeak(const std::string& w) : Error("TruncationLeak", w) {}
};
struct UncertaintyViolation : Error {
  explicit UncertaintyViolation(const std::string& w)
      : Error("UncertaintyViolation", w) {}
};

}  // namespace phasecell
