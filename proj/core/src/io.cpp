// Copyright 2026 The nwf authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.

#include "nwf/io.hpp"

#include <filesystem>
#include <fstream>
#include <sstream>

#include "nwf/common.hpp"

namespace nwf {

std::string read_text_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  NWF_REQUIRE(in.good(), "io: cannot open " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_text_file(const std::string& path, const std::string& content) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  NWF_REQUIRE(out.good(), "io: cannot write " + path);
  out << content;
  out.close();
  NWF_REQUIRE(out.good(), "io: write failed for " + path);
}

std::vector<std::string> read_lines(const std::string& path, bool skip_empty) {
  std::ifstream in(path, std::ios::binary);
  NWF_REQUIRE(in.good(), "io: cannot open " + path);
  std::vector<std::string> lines;
  std::string line;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (skip_empty && line.empty()) continue;
    lines.push_back(line);
  }
  return lines;
}

void ensure_directory(const std::string& path) {
  std::error_code ec;
  std::filesystem::create_directories(path, ec);
  NWF_REQUIRE(!ec, "io: cannot create directory " + path);
}

bool file_exists(const std::string& path) {
  return std::filesystem::exists(path);
}

}  // namespace nwf
