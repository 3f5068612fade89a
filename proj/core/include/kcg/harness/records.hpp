#pragma once

#include <iosfwd>
#include <string>
#include <vector>

#include "kcg/harness/experiment.hpp"

namespace kcg::harness {

inline constexpr const char* kRecordHeader =
    "method,step,budget,run,eps_f,eps_var,eps_ev,smse,seconds,effective_p,reason";

void emit_csv(const std::vector<ExperimentRecord>& records, std::ostream& out);
/// Throws std::runtime_error if the file cannot be written.
void emit_csv(const std::vector<ExperimentRecord>& records, const std::string& path);
/// Reader for files written by emit_csv; throws std::runtime_error on malformed rows.
std::vector<ExperimentRecord> read_csv(std::istream& in);
std::vector<ExperimentRecord> read_csv(const std::string& path);

/// Shortest decimal form that parses back to the same double; nan and inf spelled out.
std::string format_double(double v);
double parse_double(const std::string& text);

}  // namespace kcg::harness
