#pragma once

#include <string>

#include "hdqkd/detection_matrix.hpp"

inline hdqkd::DetectionMatrix load_fixture(const std::string& name) {
  return hdqkd::read_matrix_file(std::string(HDQKD_FIXTURE_DIR) + "/" + name + ".csv");
}
