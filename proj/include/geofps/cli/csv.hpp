// Copyright The geostat-fps Authors
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

#include <fstream>
#include <string>
#include <string_view>
#include <vector>

namespace geofps::csv {

struct Table {
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;
  std::vector<std::size_t> lines;  // 1-based line on which each row starts

  /// Column index of `name`, or -1.
  long column(std::string_view name) const;
};

/// RFC 4180: comma separated, '"' quoting with doubled quotes, CRLF or LF
/// line ends, quoted fields may span lines.  Blank lines are skipped.  Throws
/// DataError (with the line number) on an unterminated or stray quote.
Table parse(std::string_view text);
Table read_file(const std::string& path);

/// Quotes the field when it contains a comma, quote, CR or LF.
std::string escape(std::string_view field);

/// Shortest representation that parses back to the same double.
std::string format_double(double v);

class Writer {
 public:
  /// Throws DataError when the file cannot be opened.
  explicit Writer(const std::string& path);
  void row(const std::vector<std::string>& fields);
  void close();

 private:
  std::ofstream out_;
  std::string path_;
};

}  // namespace geofps::csv
