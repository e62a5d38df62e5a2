#include "qperturb/io.hpp"

#include <cmath>
#include <fstream>
#include <sstream>

#include <fmt/format.h>

#include "qperturb/errors.hpp"

namespace qperturb {

namespace {

std::vector<std::string> split_csv_line(std::string_view line) {
  std::vector<std::string> out;
  std::string cur;
  for (char ch : line) {
    if (ch == ',') {
      out.push_back(cur);
      cur.clear();
    } else if (ch != '\r') {
      cur.push_back(ch);
    }
  }
  out.push_back(cur);
  for (std::string& s : out) {
    const auto b = s.find_first_not_of(" \t");
    const auto e = s.find_last_not_of(" \t");
    s = b == std::string::npos ? std::string() : s.substr(b, e - b + 1);
  }
  return out;
}

bool parse_number(const std::string& token, double& value) {
  if (token.empty()) return false;
  std::size_t used = 0;
  try {
    value = std::stod(token, &used);
  } catch (const std::exception&) {
    return false;
  }
  return used == token.size();
}

}  // namespace

EnsembleFormat format_from_path(const std::filesystem::path& path) {
  const std::string ext = path.extension().string();
  if (ext == ".json") return EnsembleFormat::Json;
  if (ext == ".csv") return EnsembleFormat::Csv;
  throw InvalidArgument("cannot infer ensemble format from '" + path.string() + "'");
}

ExperimentEnsemble validate_ensemble(const std::vector<ComplexMatrix>& matrices,
                                     std::vector<std::string> sources) {
  ExperimentEnsemble out;
  sources.resize(matrices.size());
  for (std::size_t idx = 0; idx < matrices.size(); ++idx) {
    const ComplexMatrix& m = matrices[idx];
    if (m.dim() != 4) throw ValidationError(idx, "matrix is not 4x4");
    for (const Complex& z : m.entries()) {
      if (!std::isfinite(z.real()) || !std::isfinite(z.imag())) {
        throw ValidationError(idx, "non-finite entry");
      }
    }
    const double defect = m.hermiticity_defect();
    if (defect > kExperimentTolerance) {
      throw ValidationError(idx, "not Hermitian (defect " + format_double(defect) + ")");
    }
    // Exact symmetrization before the Hermitian type check.
    ComplexMatrix sym = (m + m.adjoint()) * Complex(0.5);
    HermitianOperator rho(sym);
    const double tr = rho.trace();
    if (std::abs(tr - 1.0) > kExperimentTolerance) {
      throw ValidationError(idx, "trace " + format_double(tr) + " differs from 1");
    }
    const EigenDecomposition eig = eig_hermitian(rho);
    if (eig.eigenvalues.front() < -kExperimentTolerance) {
      throw ValidationError(idx, "eigenvalue " + format_double(eig.eigenvalues.front()) +
                                     " below tolerance");
    }
    if (eig.eigenvalues.front() < 0.0) {
      HermitianOperator clamped = eig.apply([](double x) { return std::max(x, 0.0); });
      rho = (1.0 / clamped.trace()) * clamped;
    }
    out.states.push_back(std::move(rho));
  }
  out.sources = std::move(sources);
  return out;
}

nlohmann::json matrix_to_json(const ComplexMatrix& m) {
  nlohmann::json rows = nlohmann::json::array();
  for (std::size_t i = 0; i < m.dim(); ++i) {
    nlohmann::json row = nlohmann::json::array();
    for (std::size_t j = 0; j < m.dim(); ++j) row.push_back({m(i, j).real(), m(i, j).imag()});
    rows.push_back(std::move(row));
  }
  return rows;
}

ComplexMatrix matrix_from_json(const nlohmann::json& j, std::size_t dim) {
  if (!j.is_array() || j.size() != dim) throw InvalidArgument("matrix must have " + std::to_string(dim) + " rows");
  ComplexMatrix m(dim);
  for (std::size_t r = 0; r < dim; ++r) {
    const auto& row = j[r];
    if (!row.is_array() || row.size() != dim) throw InvalidArgument("matrix row has wrong length");
    for (std::size_t c = 0; c < dim; ++c) {
      const auto& z = row[c];
      if (z.is_number()) {
        m(r, c) = z.get<double>();
      } else if (z.is_array() && z.size() == 2 && z[0].is_number() && z[1].is_number()) {
        m(r, c) = Complex(z[0].get<double>(), z[1].get<double>());
      } else {
        throw InvalidArgument("matrix entry must be [re, im]");
      }
    }
  }
  return m;
}

ExperimentEnsemble parse_ensemble_json(std::string_view text) {
  nlohmann::json doc;
  try {
    doc = nlohmann::json::parse(text);
  } catch (const nlohmann::json::parse_error& e) {
    // byte offset -> line number
    const std::size_t upto = std::min<std::size_t>(e.byte, text.size());
    const std::size_t line = 1 + static_cast<std::size_t>(
                                     std::count(text.begin(), text.begin() + upto, '\n'));
    throw ParseError(line, e.what());
  }
  const nlohmann::json* states = nullptr;
  if (doc.is_object() && doc.contains("states")) {
    states = &doc["states"];
  } else if (doc.is_array()) {
    states = &doc;
  }
  if (!states || !states->is_array()) throw ParseError(1, "expected a \"states\" array");

  std::vector<ComplexMatrix> matrices;
  std::vector<std::string> sources;
  for (std::size_t i = 0; i < states->size(); ++i) {
    const auto& rec = (*states)[i];
    const nlohmann::json& m = rec.is_object() ? rec.at("rho") : rec;
    try {
      matrices.push_back(matrix_from_json(m));
    } catch (const InvalidArgument& e) {
      throw ParseError(i + 1, std::string("record ") + std::to_string(i) + ": " + e.what());
    }
    sources.push_back(rec.is_object() && rec.contains("source") ? rec["source"].get<std::string>()
                                                                 : std::string());
  }
  return validate_ensemble(matrices, std::move(sources));
}

ExperimentEnsemble parse_ensemble_csv(std::string_view text) {
  std::vector<ComplexMatrix> matrices;
  std::vector<std::string> sources;
  std::istringstream in{std::string(text)};
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    const std::vector<std::string> cells = split_csv_line(line);
    double first = 0.0;
    if (matrices.empty() && line_no == 1 && !parse_number(cells.front(), first)) continue;
    if (cells.size() != 32 && cells.size() != 33) {
      throw ParseError(line_no, "expected 32 numeric columns, got " + std::to_string(cells.size()));
    }
    ComplexMatrix m(4);
    for (std::size_t k = 0; k < 16; ++k) {
      double re = 0.0, im = 0.0;
      if (!parse_number(cells[2 * k], re) || !parse_number(cells[2 * k + 1], im)) {
        throw ParseError(line_no, "non-numeric matrix entry in column " + std::to_string(2 * k + 1));
      }
      m(k / 4, k % 4) = Complex(re, im);
    }
    matrices.push_back(m);
    sources.push_back(cells.size() == 33 ? cells[32] : std::string());
  }
  return validate_ensemble(matrices, std::move(sources));
}

std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw InvalidArgument("cannot open '" + path.string() + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

ExperimentEnsemble load_ensemble(const std::filesystem::path& path, EnsembleFormat format) {
  const std::string text = read_file(path);
  return format == EnsembleFormat::Json ? parse_ensemble_json(text) : parse_ensemble_csv(text);
}

ExperimentEnsemble load_ensemble(const std::filesystem::path& path) {
  return load_ensemble(path, format_from_path(path));
}

std::string format_double(double v) { return fmt::format("{:.17g}", v); }

void save_ensemble(const std::filesystem::path& path, const ExperimentEnsemble& ensemble,
                   EnsembleFormat format) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw InvalidArgument("cannot write '" + path.string() + "'");
  if (format == EnsembleFormat::Json) {
    nlohmann::ordered_json doc;
    doc["states"] = nlohmann::ordered_json::array();
    for (std::size_t i = 0; i < ensemble.size(); ++i) {
      nlohmann::ordered_json rec;
      rec["rho"] = matrix_to_json(ensemble.states[i].matrix());
      if (i < ensemble.sources.size() && !ensemble.sources[i].empty()) rec["source"] = ensemble.sources[i];
      doc["states"].push_back(std::move(rec));
    }
    out << doc.dump(1) << '\n';
    return;
  }
  for (std::size_t i = 0; i < ensemble.size(); ++i) {
    const ComplexMatrix& m = ensemble.states[i].matrix();
    std::string line;
    for (std::size_t k = 0; k < 16; ++k) {
      if (k) line += ',';
      line += format_double(m(k / 4, k % 4).real()) + ',' + format_double(m(k / 4, k % 4).imag());
    }
    if (i < ensemble.sources.size() && !ensemble.sources[i].empty()) line += ',' + ensemble.sources[i];
    out << line << '\n';
  }
}

void write_csv(const std::filesystem::path& path, const std::vector<std::string>& header,
               const std::vector<std::vector<double>>& rows) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw InvalidArgument("cannot write '" + path.string() + "'");
  out << fmt::format("{}\n", fmt::join(header, ","));
  for (const auto& row : rows) {
    std::string line;
    for (std::size_t i = 0; i < row.size(); ++i) {
      if (i) line += ',';
      line += format_double(row[i]);
    }
    out << line << '\n';
  }
}

void write_eta_csv(const std::filesystem::path& path, const std::vector<PauliCoefficients>& etas) {
  std::vector<std::string> header;
  for (std::size_t k = 0; k < 16; ++k) header.push_back(CorrelationMatrix::label(k));
  std::vector<std::vector<double>> rows;
  rows.reserve(etas.size());
  for (const auto& e : etas) {
    std::vector<double> row(16);
    for (std::size_t k = 0; k < 16; ++k) row[k] = e.flat(k);
    rows.push_back(std::move(row));
  }
  write_csv(path, header, rows);
}

void write_correlation_csv(const std::filesystem::path& path, const CorrelationMatrix& corr) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw InvalidArgument("cannot write '" + path.string() + "'");
  out << "label";
  for (std::size_t k = 0; k < 16; ++k) out << ',' << CorrelationMatrix::label(k);
  out << '\n';
  for (std::size_t a = 0; a < 16; ++a) {
    out << CorrelationMatrix::label(a);
    for (std::size_t b = 0; b < 16; ++b) out << ',' << format_double(corr(a, b));
    out << '\n';
  }
}

nlohmann::ordered_json histogram_to_json(const Histogram& h, const std::string& measure) {
  nlohmann::ordered_json j;
  j["measure"] = measure;
  j["count"] = h.count;
  j["degenerate"] = h.degenerate;
  j["edges"] = h.edges;
  j["densities"] = h.densities;
  return j;
}

void write_json(const std::filesystem::path& path, const nlohmann::ordered_json& j) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw InvalidArgument("cannot write '" + path.string() + "'");
  out << j.dump(2) << '\n';
}

}  // namespace qperturb
