#include "frsf/longdata.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <limits>
#include <set>
#include <sstream>

#include "frsf/error.hpp"

namespace frsf {
namespace {

std::string_view trim(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
  return s;
}

struct CsvLine {
  std::size_t number = 0;  // 1-based line number in the file
  std::vector<std::string_view> fields;
};

std::vector<CsvLine> split_lines(std::string_view text) {
  if (text.size() >= 3 && text.substr(0, 3) == "\xEF\xBB\xBF") text.remove_prefix(3);
  std::vector<CsvLine> lines;
  std::size_t number = 0;
  while (!text.empty()) {
    ++number;
    std::size_t end = text.find('\n');
    std::string_view line = text.substr(0, end);
    text = end == std::string_view::npos ? std::string_view{} : text.substr(end + 1);
    line = trim(line);
    if (line.empty()) continue;
    CsvLine parsed;
    parsed.number = number;
    std::size_t start = 0;
    while (true) {
      std::size_t comma = line.find(',', start);
      parsed.fields.push_back(trim(line.substr(start, comma - start)));
      if (comma == std::string_view::npos) break;
      start = comma + 1;
    }
    lines.push_back(std::move(parsed));
  }
  return lines;
}

double parse_real(std::string_view field, std::size_t line, std::string_view column) {
  double value = 0.0;
  const char* first = field.data();
  const char* last = field.data() + field.size();
  if (!field.empty() && *first == '+') ++first;
  auto [ptr, ec] = std::from_chars(first, last, value);
  if (field.empty() || ec != std::errc{} || ptr != last || !std::isfinite(value)) {
    throw Error(ErrorKind::parse, "line " + std::to_string(line) + ": column '" +
                                      std::string(column) + "' is not a finite number: '" +
                                      std::string(field) + "'");
  }
  return value;
}

void expect_field_count(const CsvLine& line, std::size_t expected) {
  if (line.fields.size() != expected) {
    throw Error(ErrorKind::parse, "line " + std::to_string(line.number) + ": expected " +
                                      std::to_string(expected) + " fields, found " +
                                      std::to_string(line.fields.size()));
  }
}

}  // namespace

std::vector<double> Dataset::event_times() const {
  std::vector<double> out;
  out.reserve(subjects.size());
  for (const auto& s : subjects) out.push_back(s.event_time);
  return out;
}

std::vector<bool> Dataset::events() const {
  std::vector<bool> out;
  out.reserve(subjects.size());
  for (const auto& s : subjects) out.push_back(s.event);
  return out;
}

ObservationMap parse_observations(std::string_view text) {
  const auto lines = split_lines(text);
  if (lines.empty()) throw Error(ErrorKind::schema, "observations file is empty");
  const auto& header = lines.front();
  if (header.fields.size() != 3 || header.fields[0] != "subject_id" || header.fields[1] != "time" ||
      header.fields[2] != "value") {
    throw Error(ErrorKind::schema, "observations header must be 'subject_id,time,value'");
  }
  ObservationMap out;
  for (std::size_t k = 1; k < lines.size(); ++k) {
    const auto& line = lines[k];
    expect_field_count(line, 3);
    if (line.fields[0].empty()) {
      throw Error(ErrorKind::parse, "line " + std::to_string(line.number) + ": empty subject_id");
    }
    Observation obs{parse_real(line.fields[1], line.number, "time"),
                    parse_real(line.fields[2], line.number, "value")};
    out[std::string(line.fields[0])].push_back(obs);
  }
  for (auto& [id, series] : out) {
    std::stable_sort(series.begin(), series.end(),
                     [](const Observation& l, const Observation& r) { return l.time < r.time; });
    for (std::size_t j = 1; j < series.size(); ++j) {
      if (series[j].time == series[j - 1].time) {
        throw Error(ErrorKind::validation, "subject '" + id + "' has two observations at time " +
                                               format_real(series[j].time));
      }
    }
  }
  return out;
}

SubjectTable parse_subjects(std::string_view text) {
  const auto lines = split_lines(text);
  if (lines.empty()) throw Error(ErrorKind::schema, "subjects file is empty");
  const auto& header = lines.front();
  if (header.fields.size() < 3 || header.fields[0] != "subject_id" ||
      header.fields[1] != "event_time" || header.fields[2] != "event") {
    throw Error(ErrorKind::schema,
                "subjects header must start with 'subject_id,event_time,event'");
  }
  SubjectTable table;
  std::set<std::string, std::less<>> seen_names{"subject_id", "event_time", "event"};
  for (std::size_t c = 3; c < header.fields.size(); ++c) {
    std::string name(header.fields[c]);
    if (name.empty()) throw Error(ErrorKind::schema, "empty covariate name in header");
    if (!seen_names.insert(name).second) {
      throw Error(ErrorKind::schema, "duplicate column '" + name + "' in header");
    }
    table.covariate_names.push_back(std::move(name));
  }
  for (std::size_t k = 1; k < lines.size(); ++k) {
    const auto& line = lines[k];
    expect_field_count(line, header.fields.size());
    std::string id(line.fields[0]);
    if (id.empty()) {
      throw Error(ErrorKind::parse, "line " + std::to_string(line.number) + ": empty subject_id");
    }
    SubjectOutcome rec;
    rec.event_time = parse_real(line.fields[1], line.number, "event_time");
    const double event = parse_real(line.fields[2], line.number, "event");
    if (event != 0.0 && event != 1.0) {
      throw Error(ErrorKind::validation, "line " + std::to_string(line.number) +
                                             ": event must be 0 or 1, got " +
                                             std::string(line.fields[2]));
    }
    rec.event = event == 1.0;
    for (std::size_t c = 3; c < line.fields.size(); ++c) {
      if (line.fields[c].empty()) {
        throw Error(ErrorKind::validation, "line " + std::to_string(line.number) +
                                               ": missing value for covariate '" +
                                               table.covariate_names[c - 3] + "'");
      }
      rec.covariates.push_back(parse_real(line.fields[c], line.number, header.fields[c]));
    }
    if (!table.records.emplace(id, std::move(rec)).second) {
      throw Error(ErrorKind::validation, "duplicate subject_id '" + id + "'");
    }
    table.order.push_back(std::move(id));
  }
  return table;
}

Dataset assemble_dataset(const ObservationMap& observations, const SubjectTable& subjects,
                         std::optional<Domain> domain) {
  for (const auto& [id, series] : observations) {
    if (!subjects.records.count(id)) {
      throw Error(ErrorKind::validation,
                  "observations for subject '" + id + "' have no outcome record");
    }
  }
  Dataset ds;
  ds.covariate_names = subjects.covariate_names;
  double min_time = std::numeric_limits<double>::infinity();
  double max_event = -std::numeric_limits<double>::infinity();
  for (const auto& id : subjects.order) {
    const auto& rec = subjects.records.at(id);
    auto it = observations.find(id);
    if (it == observations.end() || it->second.empty()) {
      throw Error(ErrorKind::missing_series, "subject '" + id + "' has no observations");
    }
    SubjectSeries s;
    s.id = id;
    s.observations = it->second;
    s.event_time = rec.event_time;
    s.event = rec.event;
    s.covariates = rec.covariates;
    for (std::size_t j = 1; j < s.observations.size(); ++j) {
      if (!(s.observations[j].time > s.observations[j - 1].time)) {
        throw Error(ErrorKind::validation,
                    "subject '" + id + "' observation times are not strictly increasing");
      }
    }
    if (s.observations.back().time > s.event_time) {
      throw Error(ErrorKind::censoring_consistency,
                  "subject '" + id + "' has an observation at " +
                      format_real(s.observations.back().time) + " after its event time " +
                      format_real(s.event_time));
    }
    min_time = std::min(min_time, s.observations.front().time);
    max_event = std::max(max_event, s.event_time);
    ds.subjects.push_back(std::move(s));
  }
  if (domain) {
    if (!(domain->a < domain->b)) {
      throw Error(ErrorKind::parameter, "domain must satisfy a < b");
    }
    ds.domain = *domain;
  } else if (!ds.subjects.empty()) {
    if (!(min_time < max_event)) {
      throw Error(ErrorKind::parameter,
                  "default domain [min observed time, max event time] is degenerate");
    }
    ds.domain = Domain{min_time, max_event};
  }
  for (const auto& s : ds.subjects) {
    if (s.observations.front().time < ds.domain.a || s.event_time > ds.domain.b) {
      throw Error(ErrorKind::domain, "subject '" + s.id + "' lies outside the domain [" +
                                         format_real(ds.domain.a) + ", " +
                                         format_real(ds.domain.b) + "]");
    }
  }
  return ds;
}

std::string format_real(double value) {
  char buf[64];
  auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, value);
  return std::string(buf, ptr);
}

std::string format_observations_csv(const Dataset& dataset) {
  std::string out = "subject_id,time,value\n";
  for (const auto& s : dataset.subjects) {
    for (const auto& o : s.observations) {
      out += s.id + ',' + format_real(o.time) + ',' + format_real(o.value) + '\n';
    }
  }
  return out;
}

std::string format_subjects_csv(const Dataset& dataset) {
  std::string out = "subject_id,event_time,event";
  for (const auto& name : dataset.covariate_names) out += ',' + name;
  out += '\n';
  for (const auto& s : dataset.subjects) {
    out += s.id + ',' + format_real(s.event_time) + ',' + (s.event ? "1" : "0");
    for (double c : s.covariates) out += ',' + format_real(c);
    out += '\n';
  }
  return out;
}

std::string read_text_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorKind::io, "cannot open file '" + path + "' (file not found)");
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_text_file(const std::string& path, std::string_view contents) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error(ErrorKind::io, "cannot write file '" + path + "'");
  out.write(contents.data(), static_cast<std::streamsize>(contents.size()));
  if (!out) throw Error(ErrorKind::io, "failed writing '" + path + "'");
}

}  // namespace frsf
