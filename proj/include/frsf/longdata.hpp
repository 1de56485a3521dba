#pragma once

#include <cstddef>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace frsf {

struct Observation {
  double time = 0.0;
  double value = 0.0;
};

/// One subject's raw longitudinal record with its survival outcome.
/// Covariate values are aligned with Dataset::covariate_names.
struct SubjectSeries {
  std::string id;
  std::vector<Observation> observations;
  double event_time = 0.0;
  bool event = false;
  std::vector<double> covariates;
};

/// Closed follow-up interval [a, b].
struct Domain {
  double a = 0.0;
  double b = 1.0;

  double length() const { return b - a; }
  bool contains(double t) const { return t >= a && t <= b; }
};

/// Immutable after assembly. Subject order is the order of the subjects file.
struct Dataset {
  std::vector<std::string> covariate_names;
  std::vector<SubjectSeries> subjects;
  Domain domain;

  std::size_t size() const { return subjects.size(); }
  double follow_up_length() const { return domain.length(); }
  std::vector<double> event_times() const;
  std::vector<bool> events() const;
};

using ObservationMap = std::map<std::string, std::vector<Observation>>;

struct SubjectOutcome {
  double event_time = 0.0;
  bool event = false;
  std::vector<double> covariates;
};

struct SubjectTable {
  std::vector<std::string> covariate_names;
  std::vector<std::string> order;  // file order of subject ids
  std::map<std::string, SubjectOutcome> records;
};

/// Parses `subject_id,time,value` CSV. Rows are grouped per subject and
/// sorted by time; a repeated (subject, time) pair is a validation error.
ObservationMap parse_observations(std::string_view text);

/// Parses `subject_id,event_time,event,<covariates...>` CSV.
SubjectTable parse_subjects(std::string_view text);

/// Joins observations with outcomes and enforces the per-subject invariants.
/// Without an explicit domain, [min observed time, max event time] is used.
Dataset assemble_dataset(const ObservationMap& observations, const SubjectTable& subjects,
                         std::optional<Domain> domain = std::nullopt);

std::string format_observations_csv(const Dataset& dataset);
std::string format_subjects_csv(const Dataset& dataset);

/// Shortest decimal text that parses back to the same double.
std::string format_real(double value);

std::string read_text_file(const std::string& path);
void write_text_file(const std::string& path, std::string_view contents);

}  // namespace frsf
