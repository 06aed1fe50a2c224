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

#include "geofps/cli/ingest.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <map>

#include "geofps/error.hpp"
#include "geofps/rng.hpp"

namespace geofps {
namespace {

struct Record {
  std::string id;
  double x = 0.0;
  double y = 0.0;
  std::string region;
  std::optional<double> value;
  bool sampled = false;
  std::size_t line = 0;
};

double parse_number(const std::string& s, std::size_t line, const char* what) {
  double v = 0.0;
  const auto res = std::from_chars(s.data(), s.data() + s.size(), v);
  if (s.empty() || res.ec != std::errc() || res.ptr != s.data() + s.size() || !std::isfinite(v))
    throw DataError("line " + std::to_string(line) + ": " + what + " is not a finite number: '" + s + "'");
  return v;
}

}  // namespace

IngestResult ingest_table(const csv::Table& table, std::uint64_t seed, std::size_t min_region_size) {
  static const char* kCols[] = {"id", "x", "y", "region_label", "value", "sampled"};
  long col[6];
  for (int i = 0; i < 6; ++i) {
    col[i] = table.column(kCols[i]);
    if (col[i] < 0) throw DataError(std::string("missing column '") + kCols[i] + "' in header");
  }

  std::vector<Record> recs;
  recs.reserve(table.rows.size());
  for (std::size_t r = 0; r < table.rows.size(); ++r) {
    const auto& row = table.rows[r];
    const std::size_t line = table.lines[r];
    if (row.size() != table.header.size())
      throw DataError("line " + std::to_string(line) + ": expected " + std::to_string(table.header.size()) +
                      " fields, found " + std::to_string(row.size()));
    Record rec;
    rec.line = line;
    rec.id = row[static_cast<std::size_t>(col[0])];
    rec.x = parse_number(row[static_cast<std::size_t>(col[1])], line, "x");
    rec.y = parse_number(row[static_cast<std::size_t>(col[2])], line, "y");
    rec.region = row[static_cast<std::size_t>(col[3])];
    if (rec.region.empty()) throw DataError("line " + std::to_string(line) + ": empty region_label");
    const std::string& v = row[static_cast<std::size_t>(col[4])];
    if (!v.empty()) rec.value = parse_number(v, line, "value");
    const std::string& s = row[static_cast<std::size_t>(col[5])];
    if (s == "1") rec.sampled = true;
    else if (s != "0") throw DataError("line " + std::to_string(line) + ": sampled must be 0 or 1, got '" + s + "'");
    if (rec.sampled && !rec.value)
      throw DataError("line " + std::to_string(line) + ": sampled record has no value");
    recs.push_back(std::move(rec));
  }

  IngestResult res;
  res.report.rows = recs.size();

  // (1) duplicate coordinates
  std::map<std::pair<double, double>, std::vector<std::size_t>> by_coord;
  for (std::size_t i = 0; i < recs.size(); ++i) by_coord[{recs[i].x, recs[i].y}].push_back(i);
  std::vector<bool> keep(recs.size(), true);
  StreamRng rng(seed, 2);
  for (std::size_t i = 0; i < recs.size(); ++i) {
    const auto& group = by_coord[{recs[i].x, recs[i].y}];
    if (group.size() < 2 || group.front() != i) continue;
    const std::size_t pick =
        std::min(group.size() - 1, static_cast<std::size_t>(rng.uniform() * static_cast<double>(group.size())));
    for (std::size_t j = 0; j < group.size(); ++j)
      if (j != pick) {
        keep[group[j]] = false;
        ++res.report.duplicates_removed;
      }
  }

  // (2) region size filter
  std::map<std::string, std::size_t> region_count;
  for (std::size_t i = 0; i < recs.size(); ++i)
    if (keep[i]) ++region_count[recs[i].region];
  std::map<std::string, std::size_t> dense;
  for (const auto& [label, count] : region_count) {
    if (count < min_region_size) {
      ++res.report.regions_dropped;
      res.report.units_in_dropped_regions += count;
    } else {
      // (3) dense ids in sorted label order (std::map iterates sorted)
      const std::size_t id = dense.size();
      dense[label] = id;
    }
  }

  std::vector<std::string> labels(dense.size());
  for (const auto& [label, id] : dense) labels[id] = label;
  std::vector<Location> locs;
  std::vector<std::optional<double>> values;
  std::vector<bool> mask;
  for (std::size_t i = 0; i < recs.size(); ++i) {
    if (!keep[i]) continue;
    const auto it = dense.find(recs[i].region);
    if (it == dense.end()) continue;
    locs.push_back(Location{recs[i].id, recs[i].x, recs[i].y, it->second});
    values.push_back(recs[i].value);
    mask.push_back(recs[i].sampled);
  }
  if (std::none_of(mask.begin(), mask.end(), [](bool b) { return b; }))
    throw DataError("no sampled units remain after cleaning");
  res.pop = FinitePopulation(std::move(locs), std::move(values), std::move(labels));
  res.sample = SampleIndex(res.pop, mask);
  res.report.regions = res.pop.n_regions();
  res.report.units = res.pop.size();
  res.report.sampled = res.sample.k();
  return res;
}

IngestResult ingest_csv(const std::string& path, std::uint64_t seed, std::size_t min_region_size) {
  const csv::Table t = csv::read_file(path);
  try {
    return ingest_table(t, seed, min_region_size);
  } catch (const DataError& e) {
    throw DataError(path + ": " + e.what());
  }
}

void write_population_csv(const std::string& path, const FinitePopulation& pop,
                          const SampleIndex& sample, bool hide_nonsampled) {
  csv::Writer w(path);
  w.row({"id", "x", "y", "region_label", "value", "sampled"});
  for (std::size_t u = 0; u < pop.size(); ++u) {
    const Location& l = pop.locations()[u];
    const bool s = sample.is_sampled(u);
    const auto& v = pop.values()[u];
    const std::string value = (v && (s || !hide_nonsampled)) ? csv::format_double(*v) : "";
    w.row({l.id, csv::format_double(l.x), csv::format_double(l.y), pop.region_labels()[l.region], value,
           s ? "1" : "0"});
  }
  w.close();
}

}  // namespace geofps
