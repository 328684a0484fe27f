#include "affistack/features.hpp"

#include <algorithm>
#include <unordered_map>
#include <unordered_set>

#include "affistack/error.hpp"
#include "affistack/text.hpp"

namespace affistack {

std::string_view to_string(FeatureGroup g) {
  switch (g) {
    case FeatureGroup::E: return "E";
    case FeatureGroup::EW: return "EW";
    case FeatureGroup::ED1: return "ED1";
    case FeatureGroup::ED2: return "ED2";
    case FeatureGroup::ED3: return "ED3";
    case FeatureGroup::ED1F: return "ED1-F";
    case FeatureGroup::ED2F: return "ED2-F";
    case FeatureGroup::ED1FP: return "ED1-F-P";
    case FeatureGroup::ED2FP: return "ED2-F-P";
    case FeatureGroup::ED3P: return "ED3-P";
    case FeatureGroup::EDAP: return "ED-A-P";
  }
  return "E";
}

FeatureGroup feature_group_from_string(std::string_view s) {
  std::string norm(s);
  std::replace(norm.begin(), norm.end(), '_', '-');
  for (auto g : kAllFeatureGroups)
    if (to_string(g) == norm) return g;
  throw ConfigError("unknown feature group '" + std::string(s) + "'");
}

bool is_pca_group(FeatureGroup g) {
  return g == FeatureGroup::ED1FP || g == FeatureGroup::ED2FP || g == FeatureGroup::ED3P ||
         g == FeatureGroup::EDAP;
}

bool uses_molecular_weight(FeatureGroup g) { return g != FeatureGroup::E; }

std::optional<TableGroup> mean_source(FeatureGroup g) {
  switch (g) {
    case FeatureGroup::ED1: return TableGroup::D1;
    case FeatureGroup::ED2: return TableGroup::D2;
    case FeatureGroup::ED3: return TableGroup::D3;
    case FeatureGroup::ED1F: return TableGroup::D1F;
    case FeatureGroup::ED2F: return TableGroup::D2F;
    default: return std::nullopt;
  }
}

std::vector<TableGroup> pca_tables(FeatureGroup g) {
  switch (g) {
    case FeatureGroup::ED1FP: return {TableGroup::D1F};
    case FeatureGroup::ED2FP: return {TableGroup::D2F};
    case FeatureGroup::ED3P: return {TableGroup::D3};
    case FeatureGroup::EDAP: return {TableGroup::D1F, TableGroup::D2F, TableGroup::D3};
    default: return {};
  }
}

PcaSource pca_source(FeatureGroup g) {
  switch (g) {
    case FeatureGroup::ED1FP: return PcaSource::D1FP;
    case FeatureGroup::ED2FP: return PcaSource::D2FP;
    case FeatureGroup::ED3P: return PcaSource::D3P;
    case FeatureGroup::EDAP: return PcaSource::DAP;
    default: break;
  }
  throw ConfigError("feature group " + std::string(to_string(g)) + " has no PCA source");
}

void FeatureGroupSpec::validate(int k_max) const {
  const auto name = std::string(to_string(group));
  if (is_pca_group(group)) {
    if (!pc_count) throw ConfigError(name + " requires a PC count");
    if (*pc_count < 1 || *pc_count > k_max)
      throw ConfigError(name + ": PC count must be in 1.." + std::to_string(k_max));
  } else if (pc_count) {
    throw ConfigError(name + " does not take a PC count");
  }
}

// ---------------------------------------------------------------------------
// FeatureMatrix
// ---------------------------------------------------------------------------

FeatureMatrix FeatureMatrix::select_columns(std::span<const std::string> names) const {
  std::vector<Eigen::Index> positions;
  std::string missing;
  for (const auto& name : names) {
    const auto it = std::find(column_names.begin(), column_names.end(), name);
    if (it == column_names.end()) {
      missing += (missing.empty() ? "" : ", ") + name;
      continue;
    }
    positions.push_back(static_cast<Eigen::Index>(it - column_names.begin()));
  }
  if (!missing.empty()) throw DataError("feature matrix lacks column(s): " + missing);
  FeatureMatrix out;
  out.complex_ids = complex_ids;
  out.column_names.assign(names.begin(), names.end());
  out.values.resize(values.rows(), static_cast<Eigen::Index>(positions.size()));
  for (std::size_t c = 0; c < positions.size(); ++c)
    out.values.col(static_cast<Eigen::Index>(c)) = values.col(positions[c]);
  out.labels = labels;
  return out;
}

FeatureMatrix FeatureMatrix::select_rows(std::span<const std::size_t> rows) const {
  FeatureMatrix out;
  out.column_names = column_names;
  out.values.resize(static_cast<Eigen::Index>(rows.size()), values.cols());
  if (labels) out.labels = Eigen::VectorXd(static_cast<Eigen::Index>(rows.size()));
  for (std::size_t i = 0; i < rows.size(); ++i) {
    const auto r = static_cast<Eigen::Index>(rows[i]);
    out.complex_ids.push_back(complex_ids.at(rows[i]));
    out.values.row(static_cast<Eigen::Index>(i)) = values.row(r);
    if (labels) (*out.labels)(static_cast<Eigen::Index>(i)) = (*labels)(r);
  }
  return out;
}

std::string write_feature_matrix(const FeatureMatrix& m) {
  std::string out = "complex_id";
  for (const auto& c : m.column_names) out += '\t' + c;
  out += "\tlabel\n";
  for (Eigen::Index r = 0; r < m.values.rows(); ++r) {
    out += m.complex_ids[static_cast<std::size_t>(r)];
    for (Eigen::Index c = 0; c < m.values.cols(); ++c) out += '\t' + format_double(m.values(r, c));
    out += '\t';
    if (m.labels) out += format_double((*m.labels)(r));
    out += '\n';
  }
  return out;
}

FeatureMatrix parse_feature_matrix(std::string_view text) {
  const auto lines = split_lines(text);
  if (lines.empty()) throw ParseError("feature matrix: missing header");
  const auto header = split(lines[0], '\t');
  if (header.size() < 2 || header.front() != "complex_id" || header.back() != "label")
    throw ParseError("feature matrix: header must start with complex_id and end with label");
  FeatureMatrix m;
  for (std::size_t i = 1; i + 1 < header.size(); ++i) m.column_names.emplace_back(header[i]);
  const auto width = static_cast<Eigen::Index>(m.column_names.size());
  std::vector<double> cells;
  std::vector<std::optional<double>> labels;
  std::unordered_set<std::string> seen;
  for (std::size_t i = 1; i < lines.size(); ++i) {
    if (lines[i].empty()) continue;
    const auto row = split(lines[i], '\t');
    const auto where = "feature matrix, row " + std::to_string(i) + ": ";
    if (row.size() != header.size()) throw ParseError(where + "ragged row");
    std::string id(row[0]);
    if (!seen.insert(id).second) throw ParseError(where + "duplicate complex_id " + id);
    for (Eigen::Index c = 0; c < width; ++c) {
      double v = 0;
      if (!parse_double(row[static_cast<std::size_t>(c) + 1], v))
        throw ParseError(where + "non-numeric cell in column " + m.column_names[static_cast<std::size_t>(c)]);
      cells.push_back(v);
    }
    double label = 0;
    if (trim(row.back()).empty()) {
      labels.emplace_back();
    } else if (parse_double(row.back(), label)) {
      labels.emplace_back(label);
    } else {
      throw ParseError(where + "non-numeric label");
    }
    m.complex_ids.push_back(std::move(id));
  }
  const auto n = static_cast<Eigen::Index>(m.complex_ids.size());
  m.values.resize(n, width);
  for (Eigen::Index r = 0; r < n; ++r)
    for (Eigen::Index c = 0; c < width; ++c) m.values(r, c) = cells[static_cast<std::size_t>(r * width + c)];
  if (n > 0 && std::all_of(labels.begin(), labels.end(), [](const auto& l) { return l.has_value(); })) {
    m.labels = Eigen::VectorXd(n);
    for (Eigen::Index r = 0; r < n; ++r) (*m.labels)(r) = *labels[static_cast<std::size_t>(r)];
  }
  return m;
}

// ---------------------------------------------------------------------------
// DL means and assembly
// ---------------------------------------------------------------------------

std::string default_architecture_key(std::string_view column_id) {
  const auto first = column_id.find('|');
  if (first == std::string_view::npos) return std::string(column_id);
  const auto second = column_id.find('|', first + 1);
  return std::string(column_id.substr(0, second));
}

ArchitectureMeans dl_mean_scores(const BasePredictionTable& table, const ArchitectureKey& key) {
  ArchitectureMeans out;
  std::unordered_map<std::string, std::size_t> slot;
  std::vector<std::vector<Eigen::Index>> members;
  for (std::size_t c = 0; c < table.column_ids().size(); ++c) {
    const auto arch = key(table.column_ids()[c]);
    auto [it, inserted] = slot.emplace(arch, out.architectures.size());
    if (inserted) {
      out.architectures.push_back(arch);
      members.emplace_back();
    }
    members[it->second].push_back(static_cast<Eigen::Index>(c));
  }
  if (out.architectures.empty())
    throw DataError("dl_mean_scores: table " + std::string(to_string(table.group())) + " has no columns");
  const auto& v = table.values();
  out.means.resize(v.rows(), static_cast<Eigen::Index>(out.architectures.size()));
  for (std::size_t a = 0; a < members.size(); ++a) {
    Eigen::VectorXd sum = Eigen::VectorXd::Zero(v.rows());
    for (const auto c : members[a]) sum += v.col(c);
    out.means.col(static_cast<Eigen::Index>(a)) = sum / static_cast<double>(members[a].size());
  }
  return out;
}

BasePredictionTable pca_input_table(const Cohort& cohort, FeatureGroup group) {
  const auto groups = pca_tables(group);
  if (groups.empty())
    throw ConfigError("feature group " + std::string(to_string(group)) + " is not PCA-based");
  std::vector<const BasePredictionTable*> tables;
  for (const auto g : groups) tables.push_back(&cohort.table(g));
  if (tables.size() == 1) return *tables.front();
  return BasePredictionTable::hstack(tables, TableGroup::Other);
}

FeatureMatrix assemble_features(const Cohort& cohort, const FeatureGroupSpec& spec,
                                const PCABasis* pca) {
  const auto group = spec.group;
  if (is_pca_group(group)) {
    if (!pca) throw ConfigError(std::string(to_string(group)) + " needs a PCA basis");
    spec.validate(static_cast<int>(pca->component_count()));
  } else {
    spec.validate();
  }

  FeatureMatrix m;
  m.complex_ids = cohort.ids();
  const auto n = static_cast<Eigen::Index>(m.complex_ids.size());

  m.column_names = {"smina", "vinardo"};
  if (uses_molecular_weight(group)) m.column_names.emplace_back("mw");
  const Eigen::Index fixed = static_cast<Eigen::Index>(m.column_names.size());

  std::string missing;
  auto note_missing = [&](const std::string& id, std::string_view what) {
    missing += (missing.empty() ? "" : ", ") + id + " (" + std::string(what) + ")";
  };

  Eigen::MatrixXd base(n, fixed);
  Eigen::VectorXd labels(n);
  bool all_labeled = true;
  for (Eigen::Index r = 0; r < n; ++r) {
    const auto& id = m.complex_ids[static_cast<std::size_t>(r)];
    const auto& rec = cohort.records.at(id);
    const auto fr = rec.filter_results.find(spec.rmsd_mode.kind);
    if (fr == rec.filter_results.end()) {
      note_missing(id, "docking scores");
    } else {
      base(r, 0) = fr->second.smina.energy;
      base(r, 1) = fr->second.vinardo.energy;
    }
    if (uses_molecular_weight(group)) {
      if (const auto mw = rec.resolve_molecular_weight()) {
        base(r, 2) = *mw;
      } else {
        note_missing(id, "mw");
      }
    }
    if (rec.label) {
      labels(r) = rec.label->value;
    } else {
      all_labeled = false;
    }
  }

  Eigen::MatrixXd extra(n, 0);
  if (const auto source = mean_source(group)) {
    const auto& table = cohort.table(*source);
    const auto means = dl_mean_scores(table);
    extra.resize(n, means.means.cols());
    for (Eigen::Index r = 0; r < n; ++r) {
      const auto& id = m.complex_ids[static_cast<std::size_t>(r)];
      if (!table.contains(id)) {
        note_missing(id, to_string(*source));
        continue;
      }
      extra.row(r) = means.means.row(table.row_index(id));
    }
    m.column_names.insert(m.column_names.end(), means.architectures.begin(), means.architectures.end());
  } else if (is_pca_group(group)) {
    const auto table = pca_input_table(cohort, group);
    std::vector<std::string> present;
    for (const auto& id : m.complex_ids) {
      if (table.contains(id)) {
        present.push_back(id);
      } else {
        note_missing(id, "DL predictions");
      }
    }
    if (missing.empty()) extra = project(*pca, table.gather(m.complex_ids), *spec.pc_count);
    for (int k = 1; k <= *spec.pc_count; ++k) m.column_names.push_back("pc" + std::to_string(k));
  }
  if (!missing.empty())
    throw DataError("feature group " + std::string(to_string(group)) + " is missing inputs for: " + missing);

  m.values.resize(n, fixed + extra.cols());
  m.values.leftCols(fixed) = base;
  m.values.rightCols(extra.cols()) = extra;
  if (!m.values.allFinite()) throw DataError("assembled features contain non-finite values");
  if (all_labeled) m.labels = labels;
  return m;
}

}  // namespace affistack
