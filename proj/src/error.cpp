#include "ebench/error.hpp"

namespace ebench {

void throw_validation(const std::string& what) { throw ValidationError(what); }

}  // namespace ebench
