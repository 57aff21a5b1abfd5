/*
 * Copyright 2026 The VISION Authors
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *    http://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

#pragma once

#include <filesystem>
#include <map>
#include <string>

namespace vision {

using KeyValues = std::map<std::string, std::string>;

/// Parses `key = value` lines. Blank lines and lines starting with '#' are
/// skipped; anything else without '=' is a ParseError.
KeyValues parse_key_values(const std::string& text, const std::string& source = "config");
KeyValues load_key_values(const std::filesystem::path& path);
std::string format_key_values(const KeyValues& kv);

/// Typed lookups; a present but malformed value throws ParseError.
void read_value(const KeyValues& kv, const std::string& key, std::size_t& out);
void read_value(const KeyValues& kv, const std::string& key, double& out);
void read_value(const KeyValues& kv, const std::string& key, bool& out);
void read_value(const KeyValues& kv, const std::string& key, std::string& out);

}  // namespace vision
