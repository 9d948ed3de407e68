// Copyright 2026 The Atlas Authors
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
// See the License for the specific language governing permissions and
// limitations under the License.


#pragma once

#include <filesystem>
#include <string>
#include <string_view>

namespace atlas {

// Whole file as bytes. Throws Io, or NotFound when the file does not exist.
std::string read_file(const std::filesystem::path& file);

// Writes through a temporary file and a rename, so readers never see a
// partial file. Creates parent directories.
void write_file(const std::filesystem::path& file, std::string_view content);

// Current time as ISO-8601 UTC, second precision.
std::string utc_timestamp();

}  // namespace atlas
