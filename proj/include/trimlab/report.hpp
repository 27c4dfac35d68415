#pragma once
// Text output: locale-independent number formatting, RFC-4180 CSV writers for
// every report type, and the content hashing used by run manifests.

#include <iosfwd>
#include <string>
#include <vector>

#include "trimlab/experiments.hpp"
#include "trimlab/mixing.hpp"
#include "trimlab/norming.hpp"
#include "trimlab/processes.hpp"

namespace trimlab {

// 17 significant digits; round-trips any double. NaN prints as nan.
std::string fmt17(double v);
// %.16e, the fixed-width variant used in path dumps.
std::string sci17(double v);
// Quotes a field per RFC 4180 when it contains commas, quotes, or newlines.
std::string csv_escape(const std::string& field);

void write_norming_csv(std::ostream& os, const std::vector<NormingRow>& rows);
void write_convergence_csv(std::ostream& os, const ConvergenceReport& rep);
// Long-form n,metric,value rows for plotting tools.
void write_convergence_plot_csv(std::ostream& os, const ConvergenceReport& rep);
void write_truncation_csv(std::ostream& os, const TruncationReport& rep);
void write_psi_csv(std::ostream& os, const std::vector<PsiEstimate>& rows);
void write_tail_csv(std::ostream& os, const TailReport& rep);
void write_running_csv(std::ostream& os, const TailReport& rep);
void write_omega_csv(std::ostream& os, const TailReport& rep);
void write_validation_csv(std::ostream& os, const ValidationReport& rep);

std::string sha1_hex(const std::string& data);
// SHA-1 of "blob <len>\0<content>", matching git hash-object.
std::string git_blob_sha1(const std::string& content);

}  // namespace trimlab
