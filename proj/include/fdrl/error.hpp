#pragma once

#include <stdexcept>
#include <string>

namespace fdrl {

// Every failure raised by the library derives from Error. The CLI maps the
// category onto its exit code.
class Error : public std::runtime_error {
 public:
  enum class Category { kValidation, kRuntime, kIo };

  Error(Category category, const std::string& what)
      : std::runtime_error(what), category_(category) {}

  Category category() const noexcept { return category_; }

 private:
  Category category_;
};

#define FDRL_DEFINE_ERROR(Name, Cat)                                        \
  class Name : public Error {                                               \
   public:                                                                  \
    explicit Name(const std::string& what) : Error(Category::Cat, what) {} \
  }

FDRL_DEFINE_ERROR(RangeError, kValidation);
FDRL_DEFINE_ERROR(DegeneratePartitionError, kValidation);
FDRL_DEFINE_ERROR(InvalidIntervalError, kValidation);
FDRL_DEFINE_ERROR(ShapeError, kValidation);
FDRL_DEFINE_ERROR(ConfigError, kValidation);
FDRL_DEFINE_ERROR(EmptyInputError, kValidation);
FDRL_DEFINE_ERROR(GroupSizeError, kValidation);
FDRL_DEFINE_ERROR(ParseError, kValidation);
FDRL_DEFINE_ERROR(NumericError, kRuntime);
FDRL_DEFINE_ERROR(FormatError, kIo);
FDRL_DEFINE_ERROR(CorruptionError, kIo);
FDRL_DEFINE_ERROR(IoError, kIo);

#undef FDRL_DEFINE_ERROR

}  // namespace fdrl
