#include "threshcox/csvio.hpp"

#include <algorithm>
#include <fstream>
#include <map>
#include <sstream>

namespace threshcox {

namespace {

// RFC-4180 field split (quotes, embedded commas); no multi-line fields.
std::vector<std::string> split_csv(const std::string& line) {
  std::vector<std::string> fields;
  std::string cur;
  bool quoted = false;
  for (std::size_t i = 0; i < line.size(); ++i) {
    const char c = line[i];
    if (quoted) {
      if (c == '"') {
        if (i + 1 < line.size() && line[i + 1] == '"') {
          cur += '"';
          ++i;
        } else {
          quoted = false;
        }
      } else {
        cur += c;
      }
    } else if (c == '"') {
      quoted = true;
    } else if (c == ',') {
      fields.push_back(cur);
      cur.clear();
    } else if (c != '\r') {
      cur += c;
    }
  }
  fields.push_back(cur);
  return fields;
}

std::string trim(const std::string& s) {
  const auto a = s.find_first_not_of(" \t");
  if (a == std::string::npos) return "";
  const auto b = s.find_last_not_of(" \t");
  return s.substr(a, b - a + 1);
}

double parse_num(const std::string& s, int row) {
  try {
    std::size_t pos = 0;
    const double v = std::stod(s, &pos);
    if (pos != s.size()) throw std::invalid_argument(s);
    return v;
  } catch (const std::exception&) {
    throw MalformedRecord(row, "bad field");
  }
}

struct Header {
  std::map<std::string, int> cols;
  std::vector<int> z_cols;  // z1..zp in order
  int col(const std::string& name) const {
    const auto it = cols.find(name);
    return it == cols.end() ? -1 : it->second;
  }
};

Header parse_header(const std::string& line) {
  Header h;
  const auto fields = split_csv(line);
  for (int j = 0; j < static_cast<int>(fields.size()); ++j) {
    std::string name = trim(fields[j]);
    std::transform(name.begin(), name.end(), name.begin(),
                   [](unsigned char c) { return std::tolower(c); });
    h.cols[name] = j;
  }
  for (int k = 1;; ++k) {
    const int j = h.col("z" + std::to_string(k));
    if (j < 0) break;
    h.z_cols.push_back(j);
  }
  return h;
}

}  // namespace

Cohort read_cohort_csv(std::istream& in) {
  std::string line;
  if (!std::getline(in, line)) throw EmptyCohort();
  const Header h = parse_header(line);
  for (const char* req : {"time", "event", "w"})
    if (h.col(req) < 0)
      throw ConfigError(std::string("cohort CSV missing required column: ") + req);
  const int c_entry = h.col("entry_time");
  const int c_time = h.col("time");
  const int c_event = h.col("event");
  const int c_w = h.col("w");
  const int c_stratum = h.col("stratum");
  const int p = static_cast<int>(h.z_cols.size());

  std::vector<SubjectRecord> records;
  std::map<std::string, int> stratum_ids;
  int row = 1;
  while (std::getline(in, line)) {
    ++row;
    if (trim(line).empty()) continue;
    const auto f = split_csv(line);
    const auto at = [&](int j) -> const std::string& {
      if (j >= static_cast<int>(f.size())) throw MalformedRecord(row, "bad field");
      return f[j];
    };
    SubjectRecord r;
    r.entry_time = c_entry >= 0 ? parse_num(at(c_entry), row) : 0.0;
    r.followup_time = parse_num(at(c_time), row);
    const double ev = parse_num(at(c_event), row);
    if (ev != 0.0 && ev != 1.0) throw MalformedRecord(row, "bad field");
    r.event = ev == 1.0;
    r.surrogate = parse_num(at(c_w), row);
    r.covariates.resize(p);
    for (int k = 0; k < p; ++k) r.covariates[k] = parse_num(at(h.z_cols[k]), row);
    if (c_stratum >= 0) {
      const std::string key = trim(at(c_stratum));
      const auto [it, fresh] =
          stratum_ids.emplace(key, static_cast<int>(stratum_ids.size()));
      (void)fresh;
      r.stratum = it->second;
    }
    records.push_back(std::move(r));
  }
  return Cohort::build(std::move(records));
}

Cohort read_cohort_csv_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open cohort CSV: " + path);
  return read_cohort_csv(in);
}

ReliabilityStudy read_reliability_csv(std::istream& in) {
  std::string line;
  if (!std::getline(in, line)) throw ConfigError("empty reliability CSV");
  const Header h = parse_header(line);
  if (h.col("id") < 0 || h.col("w") < 0)
    throw ConfigError("reliability CSV needs columns: id, w");
  const int c_id = h.col("id"), c_w = h.col("w");
  const int p = static_cast<int>(h.z_cols.size());

  ReliabilityStudy study;
  std::map<std::string, int> ids;
  std::vector<Vec> zrows;
  int row = 1;
  while (std::getline(in, line)) {
    ++row;
    if (trim(line).empty()) continue;
    const auto f = split_csv(line);
    if (c_id >= static_cast<int>(f.size()) || c_w >= static_cast<int>(f.size()))
      throw MalformedRecord(row, "bad field");
    const std::string key = trim(f[c_id]);
    const auto [it, fresh] = ids.emplace(key, static_cast<int>(ids.size()));
    if (fresh) {
      study.measurements.emplace_back();
      Vec z(p);
      for (int k = 0; k < p; ++k) {
        if (h.z_cols[k] >= static_cast<int>(f.size())) throw MalformedRecord(row, "bad field");
        z[k] = parse_num(f[h.z_cols[k]], row);
      }
      zrows.push_back(std::move(z));
    }
    study.measurements[it->second].push_back(parse_num(f[c_w], row));
  }
  if (p > 0) {
    study.covariates.resize(static_cast<int>(zrows.size()), p);
    for (std::size_t i = 0; i < zrows.size(); ++i)
      study.covariates.row(static_cast<int>(i)) = zrows[i].transpose();
  }
  return study;
}

ReliabilityStudy read_reliability_csv_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open reliability CSV: " + path);
  return read_reliability_csv(in);
}

}  // namespace threshcox
