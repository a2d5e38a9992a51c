#pragma once

#include <string_view>

namespace fedar {

std::string_view version();
std::string_view git_hash();

}  // namespace fedar
