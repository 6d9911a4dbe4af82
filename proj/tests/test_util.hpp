#pragma once

#include <doctest.h>

#include <filesystem>
#include <string>

#include "tsgp/error.hpp"

namespace tsgp::test {

inline ErrorCode code_of(auto&& fn) {
  try {
    fn();
  } catch (const Error& e) {
    return e.code();
  }
  FAIL("expected an Error");
  return ErrorCode::kIo;
}

inline std::string temp_path(const std::string& name) {
  return (std::filesystem::temp_directory_path() / ("tsgp_test_" + name)).string();
}

}  // namespace tsgp::test
