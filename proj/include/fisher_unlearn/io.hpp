/*
 * Copyright 2026 The fisher-unlearn Authors.
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *     https://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

// Manifest (key=value text) + flat little-endian float64 payload, the on-disk
// form shared by model checkpoints and Fisher block dumps.

#ifndef FISHER_UNLEARN_IO_HPP_
#define FISHER_UNLEARN_IO_HPP_

#include <bit>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <map>
#include <span>
#include <sstream>
#include <string>
#include <vector>

#include "fisher_unlearn/error.hpp"

namespace fisher_unlearn::io {

/// Ordered key/value manifest. Keys keep insertion order on output so files
/// diff cleanly.
class Manifest {
 public:
  void set(const std::string& key, const std::string& value) {
    if (!values_.contains(key)) order_.push_back(key);
    values_[key] = value;
  }
  template <class T>
  void set(const std::string& key, const T& value) {
    std::ostringstream os;
    os << value;
    set(key, os.str());
  }

  bool has(const std::string& key) const { return values_.contains(key); }

  const std::string& get(const std::string& key) const {
    auto it = values_.find(key);
    if (it == values_.end()) fail(ErrorCode::kIoError, "manifest key missing: " + key);
    return it->second;
  }
  std::uint64_t get_u64(const std::string& key) const {
    try {
      return std::stoull(get(key));
    } catch (const std::logic_error&) {
      fail(ErrorCode::kIoError, "manifest key is not an integer: " + key);
    }
  }

  std::string to_string() const {
    std::string out;
    for (const auto& k : order_) out += k + "=" + values_.at(k) + "\n";
    return out;
  }

  static Manifest parse(const std::string& text) {
    Manifest m;
    std::istringstream is(text);
    std::string line;
    while (std::getline(is, line)) {
      if (line.empty() || line[0] == '#') continue;
      const auto eq = line.find('=');
      if (eq == std::string::npos) fail(ErrorCode::kIoError, "malformed manifest line: " + line);
      m.set(line.substr(0, eq), line.substr(eq + 1));
    }
    return m;
  }

 private:
  std::vector<std::string> order_;
  std::map<std::string, std::string> values_;
};

inline std::string read_text(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail(ErrorCode::kIoError, "cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

inline void write_text(const std::filesystem::path& path, const std::string& text) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) fail(ErrorCode::kIoError, "cannot write " + path.string());
  out << text;
  if (!out) fail(ErrorCode::kIoError, "write failed for " + path.string());
}

inline void write_f64_le(const std::filesystem::path& path, std::span<const double> values) {
  std::string bytes(values.size() * 8, '\0');
  for (std::size_t i = 0; i < values.size(); ++i) {
    const auto bits = std::bit_cast<std::uint64_t>(values[i]);
    for (int b = 0; b < 8; ++b) bytes[i * 8 + static_cast<std::size_t>(b)] =
        static_cast<char>((bits >> (8 * b)) & 0xFF);
  }
  write_text(path, bytes);
}

inline std::vector<double> read_f64_le(const std::filesystem::path& path) {
  const std::string bytes = read_text(path);
  if (bytes.size() % 8 != 0) fail(ErrorCode::kIoError, "payload size not a multiple of 8");
  std::vector<double> out(bytes.size() / 8);
  for (std::size_t i = 0; i < out.size(); ++i) {
    std::uint64_t bits = 0;
    for (int b = 0; b < 8; ++b)
      bits |= static_cast<std::uint64_t>(static_cast<unsigned char>(bytes[i * 8 + static_cast<std::size_t>(b)]))
              << (8 * b);
    out[i] = std::bit_cast<double>(bits);
  }
  return out;
}

/// Sibling payload path for a manifest: "<manifest>.bin".
inline std::filesystem::path payload_path(const std::filesystem::path& manifest) {
  return manifest.string() + ".bin";
}

}  // namespace fisher_unlearn::io

#endif  // FISHER_UNLEARN_IO_HPP_
