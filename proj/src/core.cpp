#include "mdf/core.hpp"

namespace mdf {

std::string to_string(Shape s) { return std::to_string(s.height) + "x" + std::to_string(s.width); }

}  // namespace mdf
