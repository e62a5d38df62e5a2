#pragma once

// Ensemble files and table writers.
//
// JSON ensemble schema:
//   { "states": [ { "rho": [[[re, im] x4] x4], "source": "..." }, ... ] }
// CSV ensemble schema: one state per line, 32 numbers
//   re00,im00,re01,im01,...,re33,im33 followed by an optional source column.
//   A first line starting with a non-numeric token is treated as a header.

#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "qperturb/linalg.hpp"
#include "qperturb/pauli.hpp"
#include "qperturb/stats.hpp"

namespace qperturb {

/// Experimental tolerance on trace and negative eigenvalues of ingested states.
inline constexpr double kExperimentTolerance = 1e-6;

struct ExperimentEnsemble {
  std::vector<HermitianOperator> states;
  std::vector<std::string> sources;

  std::size_t size() const noexcept { return states.size(); }
  bool empty() const noexcept { return states.empty(); }
};

enum class EnsembleFormat { Json, Csv };

/// json for ".json", csv for ".csv"; throws InvalidArgument otherwise.
EnsembleFormat format_from_path(const std::filesystem::path& path);

/// Validates raw 4x4 matrices: Hermiticity, trace and PSD within
/// kExperimentTolerance. Matrices with small negative eigenvalues are clamped
/// and renormalized; valid matrices are kept bit-exact (after symmetrization).
/// Throws ValidationError naming the offending index.
ExperimentEnsemble validate_ensemble(const std::vector<ComplexMatrix>& matrices,
                                     std::vector<std::string> sources);

ExperimentEnsemble parse_ensemble_json(std::string_view text);
ExperimentEnsemble parse_ensemble_csv(std::string_view text);
ExperimentEnsemble load_ensemble(const std::filesystem::path& path, EnsembleFormat format);
ExperimentEnsemble load_ensemble(const std::filesystem::path& path);

void save_ensemble(const std::filesystem::path& path, const ExperimentEnsemble& ensemble,
                   EnsembleFormat format = EnsembleFormat::Json);

nlohmann::json matrix_to_json(const ComplexMatrix& m);
ComplexMatrix matrix_from_json(const nlohmann::json& j, std::size_t dim = 4);

/// 17 significant digits, shortest round-trip form.
std::string format_double(double v);

/// Writes `header` then one line per row, comma separated.
void write_csv(const std::filesystem::path& path, const std::vector<std::string>& header,
               const std::vector<std::vector<double>>& rows);

void write_eta_csv(const std::filesystem::path& path, const std::vector<PauliCoefficients>& etas);
void write_correlation_csv(const std::filesystem::path& path, const CorrelationMatrix& corr);
nlohmann::ordered_json histogram_to_json(const Histogram& h, const std::string& measure);
void write_json(const std::filesystem::path& path, const nlohmann::ordered_json& j);

std::string read_file(const std::filesystem::path& path);

}  // namespace qperturb
