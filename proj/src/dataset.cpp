#include "syndecomp/dataset.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <map>
#include <sstream>
#include <unordered_map>

#include <json.hpp>

#include "syndecomp/error.hpp"

namespace syndecomp {

namespace {

Error validation_error(const std::string& message) {
  return Error(ErrorKind::validation, "dataset", message);
}

// Splits one CSV record. Supports double-quoted fields with "" escapes.
std::vector<std::string> split_record(const std::string& line, std::size_t row) {
  std::vector<std::string> fields;
  std::string field;
  bool quoted = false;
  for (std::size_t i = 0; i < line.size(); ++i) {
    const char c = line[i];
    if (quoted) {
      if (c == '"') {
        if (i + 1 < line.size() && line[i + 1] == '"') {
          field.push_back('"');
          ++i;
        } else {
          quoted = false;
        }
      } else {
        field.push_back(c);
      }
    } else if (c == '"') {
      quoted = true;
    } else if (c == ',') {
      fields.push_back(std::move(field));
      field.clear();
    } else if (c != '\r') {
      field.push_back(c);
    }
  }
  if (quoted) throw ParseError(row, "row " + std::to_string(row) + ": unterminated quoted field");
  fields.push_back(std::move(field));
  return fields;
}

std::string trim(std::string_view s) {
  const auto first = s.find_first_not_of(" \t");
  if (first == std::string_view::npos) return {};
  const auto last = s.find_last_not_of(" \t");
  return std::string(s.substr(first, last - first + 1));
}

std::optional<double> parse_number(const std::string& text) {
  const std::string t = trim(text);
  if (t.empty()) return std::nullopt;
  double value = 0.0;
  const char* begin = t.data();
  const char* end = t.data() + t.size();
  if (*begin == '+') ++begin;
  const auto [ptr, ec] = std::from_chars(begin, end, value);
  if (ec != std::errc() || ptr != end) return std::nullopt;
  return value;
}

std::string format_double(double v) {
  std::ostringstream os;
  os << std::setprecision(17) << v;
  return os.str();
}

std::string quote_if_needed(const std::string& s) {
  if (s.find_first_of(",\"\n") == std::string::npos) return s;
  std::string out = "\"";
  for (char c : s) {
    if (c == '"') out += "\"\"";
    else out.push_back(c);
  }
  out += '"';
  return out;
}

struct RegionRows {
  std::vector<double> outcomes;
  std::vector<std::vector<double>> covariates;
  std::vector<double> thresholds;
  std::vector<double> index_outcomes;
};

RegionSample assemble(const std::string& id, const RegionRows& rows, const CsvSchema& schema) {
  RegionSample sample;
  sample.region_id = id;
  const std::size_t n = rows.outcomes.size();
  const std::size_t d = schema.covariate_columns.size();
  sample.outcomes = Eigen::Map<const Eigen::VectorXd>(rows.outcomes.data(), static_cast<Eigen::Index>(n));
  sample.covariates.resize(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(d));
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < d; ++j) {
      sample.covariates(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = rows.covariates[i][j];
    }
  }
  if (schema.threshold_column) {
    const double first = rows.thresholds.front();
    for (double t : rows.thresholds) {
      if (t != first) {
        throw validation_error("region '" + id + "': threshold column '" + *schema.threshold_column +
                               "' is not constant within the region");
      }
    }
    sample.threshold = first;
  }
  if (schema.index_outcome_column) {
    sample.index_outcomes = Eigen::Map<const Eigen::VectorXd>(rows.index_outcomes.data(),
                                                              static_cast<Eigen::Index>(n));
  }
  return sample;
}

}  // namespace

bool region_id_less(const std::string& a, const std::string& b) {
  long long ia = 0;
  long long ib = 0;
  const auto ra = std::from_chars(a.data(), a.data() + a.size(), ia);
  const auto rb = std::from_chars(b.data(), b.data() + b.size(), ib);
  const bool a_int = ra.ec == std::errc() && ra.ptr == a.data() + a.size() && !a.empty();
  const bool b_int = rb.ec == std::errc() && rb.ptr == b.data() + b.size() && !b.empty();
  if (a_int && b_int && ia != ib) return ia < ib;
  return a < b;
}

void RegionSample::validate() const {
  const auto n = outcomes.size();
  if (n < 2) {
    throw validation_error("region '" + region_id + "' has n_k = " + std::to_string(n) +
                           " observations; at least 2 are required");
  }
  if (covariates.rows() != n) {
    throw validation_error("region '" + region_id + "': outcome length " + std::to_string(n) +
                           " does not match covariate rows " + std::to_string(covariates.rows()));
  }
  if (!outcomes.allFinite()) throw validation_error("region '" + region_id + "': non-finite outcome");
  if (!covariates.allFinite()) throw validation_error("region '" + region_id + "': non-finite covariate");
  if (threshold && !(*threshold > 0.0 && std::isfinite(*threshold))) {
    throw validation_error("region '" + region_id + "': threshold must be a positive finite number");
  }
  if (index_outcomes && index_outcomes->size() != n) {
    throw validation_error("region '" + region_id + "': index outcome length mismatch");
  }
}

RegionSample RegionSample::select_rows(std::span<const std::size_t> rows) const {
  RegionSample out;
  out.region_id = region_id;
  out.threshold = threshold;
  const auto m = static_cast<Eigen::Index>(rows.size());
  out.outcomes.resize(m);
  out.covariates.resize(m, covariates.cols());
  if (index_outcomes) out.index_outcomes = Eigen::VectorXd(m);
  for (Eigen::Index i = 0; i < m; ++i) {
    const auto r = static_cast<Eigen::Index>(rows[static_cast<std::size_t>(i)]);
    out.outcomes(i) = outcomes(r);
    out.covariates.row(i) = covariates.row(r);
    if (index_outcomes) (*out.index_outcomes)(i) = (*index_outcomes)(r);
  }
  return out;
}

void MultiRegionDataset::validate() const {
  if (sources.empty()) throw validation_error("no source regions: at least one source region is required");
  target.validate();
  std::vector<std::string> ids{target.region_id};
  for (const auto& s : sources) {
    s.validate();
    if (s.dimension() != target.dimension()) {
      throw validation_error("region '" + s.region_id + "' has a different covariate dimension");
    }
    ids.push_back(s.region_id);
  }
  std::sort(ids.begin(), ids.end());
  if (std::adjacent_find(ids.begin(), ids.end()) != ids.end()) {
    throw validation_error("region identifiers are not unique");
  }
}

bool CovariateShiftPolicy::selected(const Eigen::Ref<const Eigen::RowVectorXd>& x) const {
  for (const auto& b : selection) {
    const double v = x(static_cast<Eigen::Index>(b.column));
    if (v < b.lower || v > b.upper) return false;
  }
  return true;
}

void validate_policy(const PolicySpec& policy, std::size_t dimension) {
  std::visit(
      [dimension](const auto& p) {
        using T = std::decay_t<decltype(p)>;
        if constexpr (std::is_same_v<T, IndexThresholdPolicy>) {
          if (!(p.counterfactual_threshold > 0.0) || !std::isfinite(p.counterfactual_threshold)) {
            throw validation_error("counterfactual threshold must be positive");
          }
        } else if constexpr (std::is_same_v<T, CovariateShiftPolicy>) {
          if (static_cast<std::size_t>(p.loadings.size()) != dimension ||
              static_cast<std::size_t>(p.shift.size()) != dimension) {
            throw validation_error("covariate-shift loadings and shift must have one entry per covariate (" +
                                   std::to_string(dimension) + ")");
          }
          for (const auto& b : p.selection) {
            if (b.column >= dimension) throw validation_error("selection bound refers to a missing covariate");
            if (b.lower > b.upper) throw validation_error("selection bound has lower > upper");
          }
        } else {
          if (p.column >= dimension) throw validation_error("identity-index column out of range");
          if (!std::isfinite(p.pre_scale) || !std::isfinite(p.pre_offset) || !std::isfinite(p.post_scale) ||
              !std::isfinite(p.post_offset)) {
            throw validation_error("identity-index map parameters must be finite");
          }
        }
      },
      policy);
}

void AnalysisConfig::validate() const {
  if (!(alpha > 0.0 && alpha < 1.0)) throw validation_error("alpha must lie in (0, 1)");
  if (!(kappa > 0.0)) throw validation_error("kappa must be positive");
  if (!(kappa < alpha)) throw validation_error("kappa must be smaller than alpha");
  if (bootstrap_draws < 2) throw validation_error("bootstrap_draws must be at least 2");
  if (!(truncation_constant > 0.0)) throw validation_error("truncation_constant must be positive");
  if (simplex_grid_size < 1) throw validation_error("simplex_grid_size must be positive");
  if (!(matched_trim >= 0.0)) throw validation_error("matched_trim must be nonnegative");
}

MultiRegionDataset parse_csv(std::istream& in, const CsvSchema& schema) {
  std::string line;
  if (!std::getline(in, line)) throw Error(ErrorKind::schema, "dataset", "empty CSV: no header row");
  if (line.size() >= 3 && line.compare(0, 3, "\xEF\xBB\xBF") == 0) line.erase(0, 3);
  const auto header = split_record(line, 1);
  std::unordered_map<std::string, std::size_t> column_index;
  for (std::size_t i = 0; i < header.size(); ++i) column_index[trim(header[i])] = i;

  auto require = [&](const std::string& name) {
    const auto it = column_index.find(name);
    if (it == column_index.end()) {
      throw Error(ErrorKind::schema, "dataset", "missing column '" + name + "'");
    }
    return it->second;
  };
  const std::size_t region_col = require(schema.region_column);
  const std::size_t outcome_col = require(schema.outcome_column);
  std::vector<std::size_t> covariate_cols;
  for (const auto& c : schema.covariate_columns) covariate_cols.push_back(require(c));
  std::optional<std::size_t> threshold_col;
  if (schema.threshold_column) threshold_col = require(*schema.threshold_column);
  std::optional<std::size_t> index_col;
  if (schema.index_outcome_column) index_col = require(*schema.index_outcome_column);

  std::map<std::string, RegionRows, bool (*)(const std::string&, const std::string&)> regions(&region_id_less);
  std::size_t row = 1;
  while (std::getline(in, line)) {
    ++row;
    if (trim(line).empty()) continue;
    const auto fields = split_record(line, row);
    if (fields.size() != header.size()) {
      throw ParseError(row, "row " + std::to_string(row) + ": expected " + std::to_string(header.size()) +
                                " fields, found " + std::to_string(fields.size()));
    }
    auto numeric = [&](std::size_t col) {
      const auto v = parse_number(fields[col]);
      if (!v) {
        const std::string what = trim(fields[col]).empty() ? "missing value" : "non-numeric value '" + fields[col] + "'";
        throw ParseError(row, "row " + std::to_string(row) + ": " + what + " in column '" + trim(header[col]) + "'");
      }
      if (!std::isfinite(*v)) {
        throw ParseError(row, "row " + std::to_string(row) + ": non-finite value in column '" + trim(header[col]) + "'");
      }
      return *v;
    };
    const std::string id = trim(fields[region_col]);
    if (id.empty()) throw ParseError(row, "row " + std::to_string(row) + ": missing region identifier");
    auto& r = regions[id];
    r.outcomes.push_back(numeric(outcome_col));
    std::vector<double> x;
    x.reserve(covariate_cols.size());
    for (auto c : covariate_cols) x.push_back(numeric(c));
    r.covariates.push_back(std::move(x));
    if (threshold_col) r.thresholds.push_back(numeric(*threshold_col));
    if (index_col) {
      const auto v = parse_number(fields[*index_col]);
      if (!v && !trim(fields[*index_col]).empty()) {
        throw ParseError(row, "row " + std::to_string(row) + ": non-numeric value '" + fields[*index_col] +
                                  "' in column '" + *schema.index_outcome_column + "'");
      }
      r.index_outcomes.push_back(v ? *v : std::numeric_limits<double>::quiet_NaN());
    }
  }

  MultiRegionDataset data;
  bool found_target = false;
  for (const auto& [id, rows] : regions) {
    if (id == schema.target_region) {
      data.target = assemble(id, rows, schema);
      found_target = true;
    } else {
      data.sources.push_back(assemble(id, rows, schema));
    }
  }
  if (!found_target) {
    throw validation_error("target region '" + schema.target_region + "' not present in the data");
  }
  data.validate();
  return data;
}

MultiRegionDataset load_csv(const std::filesystem::path& path, const CsvSchema& schema) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorKind::usage, "dataset", "cannot open data file '" + path.string() + "'");
  return parse_csv(in, schema);
}

void write_csv(const MultiRegionDataset& data, std::ostream& out, const CsvSchema& schema) {
  out << quote_if_needed(schema.region_column) << ',' << quote_if_needed(schema.outcome_column);
  for (const auto& c : schema.covariate_columns) out << ',' << quote_if_needed(c);
  if (schema.threshold_column) out << ',' << quote_if_needed(*schema.threshold_column);
  if (schema.index_outcome_column) out << ',' << quote_if_needed(*schema.index_outcome_column);
  out << '\n';
  auto emit = [&](const RegionSample& s) {
    if (static_cast<std::size_t>(s.covariates.cols()) != schema.covariate_columns.size()) {
      throw Error(ErrorKind::schema, "dataset", "schema covariate count does not match the data");
    }
    for (Eigen::Index i = 0; i < s.outcomes.size(); ++i) {
      out << quote_if_needed(s.region_id) << ',' << format_double(s.outcomes(i));
      for (Eigen::Index j = 0; j < s.covariates.cols(); ++j) out << ',' << format_double(s.covariates(i, j));
      if (schema.threshold_column) out << ',' << (s.threshold ? format_double(*s.threshold) : std::string());
      if (schema.index_outcome_column) {
        out << ',';
        if (s.index_outcomes && std::isfinite((*s.index_outcomes)(i))) out << format_double((*s.index_outcomes)(i));
      }
      out << '\n';
    }
  };
  emit(data.target);
  for (const auto& s : data.sources) emit(s);
}

void write_csv(const MultiRegionDataset& data, const std::filesystem::path& path, const CsvSchema& schema) {
  std::ofstream out(path);
  if (!out) throw Error(ErrorKind::usage, "dataset", "cannot write '" + path.string() + "'");
  write_csv(data, out, schema);
}

AnalysisConfig parse_config(const std::string& json_text) {
  nlohmann::json doc;
  try {
    doc = nlohmann::json::parse(json_text);
  } catch (const nlohmann::json::parse_error& e) {
    throw Error(ErrorKind::parse, "dataset", std::string("config is not valid JSON: ") + e.what());
  }
  if (!doc.is_object()) throw validation_error("config must be a JSON object");

  AnalysisConfig cfg;
  try {
    for (const auto& [key, value] : doc.items()) {
      if (key == "alpha") cfg.alpha = value.get<double>();
      else if (key == "kappa") cfg.kappa = value.get<double>();
      else if (key == "bootstrap_draws") {
        const auto b = value.get<long long>();
        if (b <= 0) throw validation_error("bootstrap_draws must be positive");
        cfg.bootstrap_draws = static_cast<std::size_t>(b);
      } else if (key == "truncation_constant") cfg.truncation_constant = value.get<double>();
      else if (key == "simplex_grid_size") {
        const auto g = value.get<long long>();
        if (g <= 0) throw validation_error("simplex_grid_size must be positive");
        cfg.simplex_grid_size = static_cast<std::size_t>(g);
      } else if (key == "master_seed") cfg.master_seed = value.get<std::uint64_t>();
      else if (key == "robust_mode") cfg.robust_mode = value.get<bool>();
      else if (key == "matched_trim") cfg.matched_trim = value.get<double>();
      else throw validation_error("unknown config key '" + key + "'");
    }
  } catch (const nlohmann::json::type_error& e) {
    throw validation_error(std::string("config value has the wrong type: ") + e.what());
  }
  cfg.validate();
  return cfg;
}

AnalysisConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorKind::usage, "dataset", "cannot open config file '" + path.string() + "'");
  std::stringstream buffer;
  buffer << in.rdbuf();
  return parse_config(buffer.str());
}

std::string_view to_string(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::schema: return "schema";
    case ErrorKind::parse: return "parse";
    case ErrorKind::validation: return "validation";
    case ErrorKind::usage: return "usage";
    case ErrorKind::singular_fit: return "singular-fit";
    case ErrorKind::degenerate_design: return "degenerate-design";
    case ErrorKind::no_identification: return "no-identification";
    case ErrorKind::empty_window: return "empty-window";
    case ErrorKind::empty_matched_group: return "empty-matched-group";
    case ErrorKind::numeric: return "numeric";
    case ErrorKind::insufficient_draws: return "insufficient-draws";
    case ErrorKind::degenerate_scale: return "degenerate-scale";
    case ErrorKind::singular_metric: return "singular-metric";
    case ErrorKind::bootstrap_failure: return "bootstrap-failure";
  }
  return "unknown";
}

}  // namespace syndecomp
