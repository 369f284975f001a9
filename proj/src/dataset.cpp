#include "cvxrobust/dataset.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <numeric>
#include <sstream>

#include "cvxrobust/error.hpp"
#include "cvxrobust/rng.hpp"

namespace cvxrobust {

using Eigen::Index;

Dataset::Dataset(Eigen::MatrixXd X, Eigen::VectorXd y, std::vector<std::string> feature_names)
    : X_(std::move(X)), y_(std::move(y)), names_(std::move(feature_names)) {
  if (X_.rows() != y_.size()) {
    throw DomainError("dataset: X has " + std::to_string(X_.rows()) + " rows but y has " +
                      std::to_string(y_.size()) + " labels");
  }
  if (!names_.empty() && static_cast<Index>(names_.size()) != X_.cols()) {
    throw DomainError("dataset: feature name count does not match column count");
  }
  for (Index i = 0; i < y_.size(); ++i) {
    if (y_[i] != 1.0 && y_[i] != -1.0) {
      throw DomainError("dataset: label at row " + std::to_string(i) + " is not +1 or -1");
    }
  }
  if (!X_.allFinite()) throw DomainError("dataset: feature matrix has non-finite entries");
}

Dataset Dataset::rows(std::span<const Index> index) const {
  Eigen::MatrixXd X(static_cast<Index>(index.size()), X_.cols());
  Eigen::VectorXd y(static_cast<Index>(index.size()));
  for (std::size_t k = 0; k < index.size(); ++k) {
    X.row(static_cast<Index>(k)) = X_.row(index[k]);
    y[static_cast<Index>(k)] = y_[index[k]];
  }
  return Dataset(std::move(X), std::move(y), names_);
}

Dataset Dataset::columns(std::span<const Index> index) const {
  Eigen::MatrixXd X(X_.rows(), static_cast<Index>(index.size()));
  std::vector<std::string> names;
  for (std::size_t k = 0; k < index.size(); ++k) {
    X.col(static_cast<Index>(k)) = X_.col(index[k]);
    if (!names_.empty()) names.push_back(names_[static_cast<std::size_t>(index[k])]);
  }
  return Dataset(std::move(X), y_, std::move(names));
}

namespace {

struct CsvRecord {
  std::vector<std::string> fields;
  std::size_t line = 0;
};

// RFC-4180: quoted fields may contain separators, doubled quotes and newlines.
std::vector<CsvRecord> parse_csv(const std::string& text) {
  std::vector<CsvRecord> records;
  CsvRecord current;
  std::string field;
  std::size_t line = 1;
  current.line = 1;
  bool in_quotes = false;
  bool field_started = false;
  bool pending = false;

  auto end_field = [&] {
    current.fields.push_back(std::move(field));
    field.clear();
    field_started = false;
  };
  auto end_record = [&] {
    end_field();
    const bool blank = current.fields.size() == 1 && current.fields[0].empty();
    if (!blank) records.push_back(std::move(current));
    current = CsvRecord{};
    current.line = line;
    pending = false;
  };

  for (std::size_t i = 0; i < text.size(); ++i) {
    const char ch = text[i];
    if (in_quotes) {
      if (ch == '"') {
        if (i + 1 < text.size() && text[i + 1] == '"') {
          field.push_back('"');
          ++i;
        } else {
          in_quotes = false;
        }
      } else {
        if (ch == '\n') ++line;
        field.push_back(ch);
      }
      continue;
    }
    switch (ch) {
      case '"':
        if (field_started && !field.empty()) {
          throw ParseError("csv: stray quote inside unquoted field at line " + std::to_string(line),
                           line, current.fields.size() + 1);
        }
        in_quotes = true;
        field_started = true;
        pending = true;
        break;
      case ',':
        end_field();
        pending = true;
        break;
      case '\r':
        break;
      case '\n':
        ++line;
        end_record();
        break;
      default:
        field.push_back(ch);
        field_started = true;
        pending = true;
    }
  }
  if (in_quotes) throw ParseError("csv: unterminated quoted field", current.line);
  if (pending || !field.empty()) end_record();
  return records;
}

std::string trim(std::string_view s) {
  const auto first = s.find_first_not_of(" \t");
  if (first == std::string_view::npos) return {};
  const auto last = s.find_last_not_of(" \t");
  return std::string(s.substr(first, last - first + 1));
}

bool is_missing(const std::string& cell) {
  if (cell.empty() || cell == "?") return true;
  std::string lower;
  for (const char ch : cell) lower.push_back(static_cast<char>(std::tolower(static_cast<unsigned char>(ch))));
  return lower == "na" || lower == "nan" || lower == "null";
}

bool parse_double(const std::string& cell, double& out) {
  const char* begin = cell.data();
  const char* end = begin + cell.size();
  if (begin != end && *begin == '+') ++begin;
  const auto [ptr, ec] = std::from_chars(begin, end, out);
  return ec == std::errc() && ptr == end && std::isfinite(out);
}

Index resolve_label_column(const std::vector<std::string>& header, const std::string& label_column) {
  for (std::size_t c = 0; c < header.size(); ++c) {
    if (trim(header[c]) == label_column) return static_cast<Index>(c);
  }
  Index idx = -1;
  const auto [ptr, ec] =
      std::from_chars(label_column.data(), label_column.data() + label_column.size(), idx);
  if (ec == std::errc() && ptr == label_column.data() + label_column.size() && idx >= 0 &&
      idx < static_cast<Index>(header.size())) {
    return idx;
  }
  throw DomainError("csv: label column '" + label_column + "' not found in header");
}

}  // namespace

Dataset load_csv(const std::filesystem::path& path, const std::string& label_column,
                 const std::string& positive_label, LoadReport* report) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DomainError("csv: cannot open " + path.string());
  std::stringstream buffer;
  buffer << in.rdbuf();
  const std::string text = buffer.str();

  const auto records = parse_csv(text);
  if (records.empty()) throw DomainError("csv: empty file " + path.string());
  const auto& header = records.front().fields;
  const Index label_col = resolve_label_column(header, label_column);
  const std::size_t width = header.size();

  std::vector<std::string> names;
  for (std::size_t c = 0; c < width; ++c) {
    if (static_cast<Index>(c) != label_col) names.push_back(trim(header[c]));
  }
  const Index d = static_cast<Index>(names.size());

  std::vector<double> values;
  std::vector<std::string> labels;
  LoadReport rep;
  for (std::size_t r = 1; r < records.size(); ++r) {
    const auto& rec = records[r];
    if (rec.fields.size() != width) {
      throw ParseError("csv: line " + std::to_string(rec.line) + " has " +
                           std::to_string(rec.fields.size()) + " fields, header has " +
                           std::to_string(width),
                       rec.line);
    }
    ++rep.rows_read;
    std::vector<double> row;
    row.reserve(static_cast<std::size_t>(d));
    bool missing = false;
    std::string label;
    for (std::size_t c = 0; c < width; ++c) {
      const std::string cell = trim(rec.fields[c]);
      if (is_missing(cell)) {
        missing = true;
        continue;
      }
      if (static_cast<Index>(c) == label_col) {
        label = cell;
        continue;
      }
      double v = 0.0;
      if (!parse_double(cell, v)) {
        throw ParseError("csv: non-numeric value '" + cell + "' at line " + std::to_string(rec.line) +
                             ", column " + std::to_string(c + 1) + " (" + trim(header[c]) + ")",
                         rec.line, c + 1);
      }
      row.push_back(v);
    }
    if (missing) {
      ++rep.rows_rejected;
      continue;
    }
    values.insert(values.end(), row.begin(), row.end());
    labels.push_back(std::move(label));
  }
  if (labels.empty()) throw DomainError("csv: no complete data rows in " + path.string());

  std::vector<std::string> distinct = labels;
  std::sort(distinct.begin(), distinct.end());
  distinct.erase(std::unique(distinct.begin(), distinct.end()), distinct.end());
  if (distinct.size() != 2) {
    throw DomainError("csv: expected exactly two label classes, found " +
                      std::to_string(distinct.size()));
  }
  if (positive_label != distinct[0] && positive_label != distinct[1]) {
    throw DomainError("csv: positive label '" + positive_label + "' does not occur in the data");
  }
  rep.positive_label = positive_label;
  rep.negative_label = positive_label == distinct[0] ? distinct[1] : distinct[0];

  const Index n = static_cast<Index>(labels.size());
  Eigen::MatrixXd X(n, d);
  Eigen::VectorXd y(n);
  for (Index i = 0; i < n; ++i) {
    for (Index j = 0; j < d; ++j) X(i, j) = values[static_cast<std::size_t>(i * d + j)];
    y[i] = labels[static_cast<std::size_t>(i)] == positive_label ? 1.0 : -1.0;
  }
  if (report != nullptr) *report = rep;
  return Dataset(std::move(X), std::move(y), std::move(names));
}

void save_csv(const Dataset& data, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw DomainError("csv: cannot write " + path.string());
  out << std::setprecision(17);
  for (Index j = 0; j < data.d(); ++j) {
    if (data.feature_names().empty()) {
      out << "x" << j;
    } else {
      const std::string& name = data.feature_names()[static_cast<std::size_t>(j)];
      if (name.find_first_of(",\"\n") != std::string::npos) {
        out << '"';
        for (const char ch : name) out << (ch == '"' ? "\"\"" : std::string(1, ch));
        out << '"';
      } else {
        out << name;
      }
    }
    out << ',';
  }
  out << "label\n";
  for (Index i = 0; i < data.n(); ++i) {
    for (Index j = 0; j < data.d(); ++j) out << data.X()(i, j) << ',';
    out << (data.y()[i] > 0 ? "1" : "-1") << '\n';
  }
}

Dataset apply_standardization(const Dataset& data, const Standardization& stats) {
  const Dataset kept = data.columns(stats.kept_columns);
  Eigen::MatrixXd X = kept.X();
  for (Index j = 0; j < X.cols(); ++j) {
    X.col(j).array() =
        (X.col(j).array() - stats.mean[static_cast<std::size_t>(j)]) / stats.stddev[static_cast<std::size_t>(j)];
  }
  return Dataset(std::move(X), kept.y(), kept.feature_names());
}

Standardized standardize(const Dataset& train, const Dataset& test) {
  if (train.n() == 0) throw DomainError("standardize: empty training set");
  if (test.d() != train.d()) throw DomainError("standardize: train and test feature counts differ");

  Standardization stats;
  const double n = static_cast<double>(train.n());
  for (Index j = 0; j < train.d(); ++j) {
    const auto col = train.X().col(j);
    const double mean = col.mean();
    const double var = (col.array() - mean).square().sum() / n;
    const double sd = std::sqrt(var);
    if (!(sd > 1e-12 * std::max(1.0, std::abs(mean)))) {
      stats.dropped.push_back(train.feature_names().empty()
                                  ? "x" + std::to_string(j)
                                  : train.feature_names()[static_cast<std::size_t>(j)]);
      continue;
    }
    stats.kept_columns.push_back(j);
    stats.mean.push_back(mean);
    stats.stddev.push_back(sd);
  }
  return {apply_standardization(train, stats), apply_standardization(test, stats), stats};
}

Split split(const Dataset& data, double test_fraction, std::uint64_t seed) {
  if (!(test_fraction > 0.0 && test_fraction < 1.0)) {
    throw DomainError("split: test fraction must lie in (0, 1)");
  }
  if (data.n() < 2) throw DomainError("split: need at least two rows");

  std::vector<Index> pos, neg;
  for (Index i = 0; i < data.n(); ++i) (data.y()[i] > 0 ? pos : neg).push_back(i);
  if (pos.empty() || neg.empty()) {
    throw DomainError("split: both classes must be present for a stratified binary split");
  }

  const Index total_test = static_cast<Index>(std::llround(test_fraction * static_cast<double>(data.n())));
  if (total_test < 1 || total_test >= data.n()) {
    throw DomainError("split: test fraction leaves one side empty");
  }

  // largest-remainder allocation of the test rows across the two classes
  const double quota_pos = test_fraction * static_cast<double>(pos.size());
  const double quota_neg = test_fraction * static_cast<double>(neg.size());
  Index take_pos = static_cast<Index>(std::floor(quota_pos));
  Index take_neg = static_cast<Index>(std::floor(quota_neg));
  while (take_pos + take_neg < total_test) {
    const double rem_pos = quota_pos - static_cast<double>(take_pos);
    const double rem_neg = quota_neg - static_cast<double>(take_neg);
    if (rem_pos >= rem_neg && take_pos < static_cast<Index>(pos.size())) {
      ++take_pos;
    } else {
      ++take_neg;
    }
  }

  Rng rng(seed);
  std::shuffle(pos.begin(), pos.end(), rng);
  std::shuffle(neg.begin(), neg.end(), rng);

  Split out;
  out.test_index.assign(pos.begin(), pos.begin() + take_pos);
  out.test_index.insert(out.test_index.end(), neg.begin(), neg.begin() + take_neg);
  out.train_index.assign(pos.begin() + take_pos, pos.end());
  out.train_index.insert(out.train_index.end(), neg.begin() + take_neg, neg.end());
  std::sort(out.test_index.begin(), out.test_index.end());
  std::sort(out.train_index.begin(), out.train_index.end());
  out.train = data.rows(out.train_index);
  out.test = data.rows(out.test_index);
  return out;
}

nlohmann::json to_json(const Standardization& stats) {
  return {{"mean", stats.mean},
          {"stddev", stats.stddev},
          {"kept_columns", stats.kept_columns},
          {"dropped", stats.dropped}};
}

Standardization standardization_from_json(const nlohmann::json& j) {
  Standardization s;
  j.at("mean").get_to(s.mean);
  j.at("stddev").get_to(s.stddev);
  j.at("kept_columns").get_to(s.kept_columns);
  if (j.contains("dropped")) j.at("dropped").get_to(s.dropped);
  if (s.mean.size() != s.stddev.size() || s.mean.size() != s.kept_columns.size()) {
    throw DomainError("standardization: inconsistent field lengths");
  }
  return s;
}

}  // namespace cvxrobust
