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

#ifndef NWF_IO_HPP_
#define NWF_IO_HPP_

#include <string>
#include <vector>

namespace nwf {

std::string read_text_file(const std::string& path);
void write_text_file(const std::string& path, const std::string& content);

// Lines of a file with trailing newlines stripped; skips empty lines when
// skip_empty is set (JSONL convention).
std::vector<std::string> read_lines(const std::string& path, bool skip_empty);

void ensure_directory(const std::string& path);
bool file_exists(const std::string& path);

}  // namespace nwf

#endif  // NWF_IO_HPP_
