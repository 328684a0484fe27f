#include "affistack/ingest.hpp"

#include <algorithm>
#include <array>
#include <cctype>
#include <cmath>
#include <cstdio>
#include <unordered_set>

#include "affistack/error.hpp"
#include "affistack/text.hpp"

namespace affistack {

namespace {

struct ElementInfo {
  std::string_view symbol;
  double weight;
};

// IUPAC 2021 abridged conventional standard atomic weights, indexed by Z - 1.
// Elements without a standard weight carry the mass number of their longest-lived isotope.
constexpr std::array<ElementInfo, 86> kElements{{
    {"H", 1.008},     {"He", 4.0026},   {"Li", 6.94},     {"Be", 9.0122},   {"B", 10.81},
    {"C", 12.011},    {"N", 14.007},    {"O", 15.999},    {"F", 18.998},    {"Ne", 20.180},
    {"Na", 22.990},   {"Mg", 24.305},   {"Al", 26.982},   {"Si", 28.085},   {"P", 30.974},
    {"S", 32.06},     {"Cl", 35.45},    {"Ar", 39.95},    {"K", 39.098},    {"Ca", 40.078},
    {"Sc", 44.956},   {"Ti", 47.867},   {"V", 50.942},    {"Cr", 51.996},   {"Mn", 54.938},
    {"Fe", 55.845},   {"Co", 58.933},   {"Ni", 58.693},   {"Cu", 63.546},   {"Zn", 65.38},
    {"Ga", 69.723},   {"Ge", 72.630},   {"As", 74.922},   {"Se", 78.971},   {"Br", 79.904},
    {"Kr", 83.798},   {"Rb", 85.468},   {"Sr", 87.62},    {"Y", 88.906},    {"Zr", 91.224},
    {"Nb", 92.906},   {"Mo", 95.95},    {"Tc", 97.0},     {"Ru", 101.07},   {"Rh", 102.91},
    {"Pd", 106.42},   {"Ag", 107.87},   {"Cd", 112.41},   {"In", 114.82},   {"Sn", 118.71},
    {"Sb", 121.76},   {"Te", 127.60},   {"I", 126.90},    {"Xe", 131.29},   {"Cs", 132.91},
    {"Ba", 137.33},   {"La", 138.91},   {"Ce", 140.12},   {"Pr", 140.91},   {"Nd", 144.24},
    {"Pm", 145.0},    {"Sm", 150.36},   {"Eu", 151.96},   {"Gd", 157.25},   {"Tb", 158.93},
    {"Dy", 162.50},   {"Ho", 164.93},   {"Er", 167.26},   {"Tm", 168.93},   {"Yb", 173.05},
    {"Lu", 174.97},   {"Hf", 178.49},   {"Ta", 180.95},   {"W", 183.84},    {"Re", 186.21},
    {"Os", 190.23},   {"Ir", 192.22},   {"Pt", 195.08},   {"Au", 196.97},   {"Hg", 200.59},
    {"Tl", 204.38},   {"Pb", 207.2},    {"Bi", 208.98},   {"Po", 209.0},    {"At", 210.0},
    {"Rn", 222.0},
}};

std::string normalize_symbol(std::string_view symbol) {
  std::string s(trim(symbol));
  for (std::size_t i = 0; i < s.size(); ++i)
    s[i] = static_cast<char>(i == 0 ? std::toupper(static_cast<unsigned char>(s[i]))
                                    : std::tolower(static_cast<unsigned char>(s[i])));
  return s;
}

int lookup_symbol(std::string_view symbol) {
  const auto norm = normalize_symbol(symbol);
  for (std::size_t i = 0; i < kElements.size(); ++i)
    if (kElements[i].symbol == norm) return static_cast<int>(i) + 1;
  return 0;
}

std::string lower(std::string_view s) {
  std::string out(s);
  for (auto& c : out) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  return out;
}

}  // namespace

// ---------------------------------------------------------------------------
// Element / Molecule
// ---------------------------------------------------------------------------

Element Element::from_symbol(std::string_view symbol) {
  const int z = lookup_symbol(symbol);
  if (z == 0) throw ParseError("unknown element symbol '" + std::string(trim(symbol)) + "'");
  return Element(static_cast<std::uint8_t>(z));
}

bool Element::is_known(std::string_view symbol) { return lookup_symbol(symbol) != 0; }

std::string_view Element::symbol() const { return kElements[z_ - 1].symbol; }

double Element::standard_weight() const { return kElements[z_ - 1].weight; }

Molecule::Molecule(std::string source_id, std::vector<Atom> atoms,
                   std::map<std::string, std::string> properties)
    : source_id_(std::move(source_id)), atoms_(std::move(atoms)), properties_(std::move(properties)) {
  for (const auto& a : atoms_) {
    if (!a.position.allFinite())
      throw DataError("molecule '" + source_id_ + "': non-finite coordinate");
    if (!a.element.is_hydrogen()) heavy_elements_.push_back(a.element);
  }
  if (heavy_elements_.empty())
    throw DataError("molecule '" + source_id_ + "' has no heavy atom");
  heavy_positions_.resize(3, static_cast<Eigen::Index>(heavy_elements_.size()));
  Eigen::Index col = 0;
  for (const auto& a : atoms_)
    if (!a.element.is_hydrogen()) heavy_positions_.col(col++) = a.position;
}

double molecular_weight(const Molecule& m) {
  double total = 0.0;
  for (const auto& a : m.atoms()) total += a.element.standard_weight();
  return total;
}

// ---------------------------------------------------------------------------
// SDF
// ---------------------------------------------------------------------------

namespace {

class SdfRecordParser {
 public:
  SdfRecordParser(const std::vector<std::string_view>& lines, std::size_t& cursor,
                  std::size_t record_index)
      : lines_(lines), cursor_(cursor), record_(record_index) {}

  Molecule parse() {
    const auto title = next_line("header");
    next_line("header");
    next_line("header");
    const std::size_t counts_line = cursor_;
    const auto counts = next_line("counts line");
    if (counts.find("V3000") != std::string_view::npos)
      fail(counts_line, "V3000 molfiles are not supported");
    long long natoms = 0;
    long long nbonds = 0;
    if (!parse_counts(counts, natoms, nbonds) || natoms < 0 || nbonds < 0)
      fail(counts_line, "malformed counts line");

    std::vector<Atom> atoms;
    atoms.reserve(static_cast<std::size_t>(natoms));
    for (long long i = 0; i < natoms; ++i) {
      const std::size_t at = cursor_;
      atoms.push_back(parse_atom(next_line("atom block"), at));
    }
    for (long long i = 0; i < nbonds; ++i) {
      const std::size_t at = cursor_;
      const auto line = next_line("bond block");
      long long a = 0;
      long long b = 0;
      if (!parse_bond(line, a, b) || a < 1 || b < 1 || a > natoms || b > natoms)
        fail(at, "malformed bond line");
    }
    while (true) {
      const auto line = next_line("properties block (missing 'M  END')");
      if (line.starts_with("M  END")) break;
    }

    std::map<std::string, std::string> properties;
    while (cursor_ < lines_.size()) {
      const auto line = lines_[cursor_];
      if (trim(line) == "$$$$") break;
      ++cursor_;
      if (!line.starts_with(">")) continue;
      const auto open = line.find('<');
      const auto close = line.find('>', open == std::string_view::npos ? 1 : open);
      if (open == std::string_view::npos || close == std::string_view::npos) continue;
      std::string name(line.substr(open + 1, close - open - 1));
      std::string value;
      while (cursor_ < lines_.size() && !trim(lines_[cursor_]).empty() &&
             trim(lines_[cursor_]) != "$$$$") {
        if (!value.empty()) value += '\n';
        value += lines_[cursor_];
        ++cursor_;
      }
      properties[name] = value;
    }

    std::string id(trim(title));
    if (id.empty()) id = "record" + std::to_string(record_);
    try {
      return Molecule(std::move(id), std::move(atoms), std::move(properties));
    } catch (const DataError& e) {
      throw ParseError("SDF record " + std::to_string(record_) + ": " + e.what());
    }
  }

 private:
  std::string_view next_line(const char* what) {
    if (cursor_ >= lines_.size())
      throw ParseError("SDF record " + std::to_string(record_) + ", line " +
                       std::to_string(cursor_ + 1) + ": truncated " + what);
    return lines_[cursor_++];
  }

  [[noreturn]] void fail(std::size_t line_index, const std::string& why) const {
    throw ParseError("SDF record " + std::to_string(record_) + ", line " +
                     std::to_string(line_index + 1) + ": " + why);
  }

  static bool parse_counts(std::string_view line, long long& natoms, long long& nbonds) {
    if (line.size() >= 6 && parse_int(line.substr(0, 3), natoms) &&
        parse_int(line.substr(3, 3), nbonds))
      return true;
    const auto tokens = tokens_of(line);
    return tokens.size() >= 2 && parse_int(tokens[0], natoms) && parse_int(tokens[1], nbonds);
  }

  static bool parse_bond(std::string_view line, long long& a, long long& b) {
    if (line.size() >= 6 && parse_int(line.substr(0, 3), a) && parse_int(line.substr(3, 3), b))
      return true;
    const auto tokens = tokens_of(line);
    return tokens.size() >= 3 && parse_int(tokens[0], a) && parse_int(tokens[1], b);
  }

  Atom parse_atom(std::string_view line, std::size_t at) const {
    double x = 0;
    double y = 0;
    double z = 0;
    std::string_view symbol;
    bool ok = false;
    if (line.size() >= 34) {
      ok = parse_double(line.substr(0, 10), x) && parse_double(line.substr(10, 10), y) &&
           parse_double(line.substr(20, 10), z);
      symbol = trim(line.substr(31, 3));
    }
    if (!ok) {
      const auto tokens = tokens_of(line);
      ok = tokens.size() >= 4 && parse_double(tokens[0], x) && parse_double(tokens[1], y) &&
           parse_double(tokens[2], z);
      if (ok) symbol = tokens[3];
    }
    if (!ok) fail(at, "malformed atom line");
    if (!Element::is_known(symbol))
      fail(at, "unknown element symbol '" + std::string(symbol) + "'");
    return Atom{Element::from_symbol(symbol), Eigen::Vector3d(x, y, z)};
  }

  static std::vector<std::string_view> tokens_of(std::string_view line) {
    std::vector<std::string_view> out;
    std::size_t i = 0;
    while (i < line.size()) {
      while (i < line.size() && (line[i] == ' ' || line[i] == '\t')) ++i;
      const std::size_t start = i;
      while (i < line.size() && line[i] != ' ' && line[i] != '\t') ++i;
      if (i > start) out.push_back(line.substr(start, i - start));
    }
    return out;
  }

  const std::vector<std::string_view>& lines_;
  std::size_t& cursor_;
  std::size_t record_;
};

}  // namespace

std::vector<Molecule> parse_sdf(std::string_view text) {
  const auto lines = split_lines(text);
  std::vector<Molecule> out;
  std::size_t cursor = 0;
  std::size_t record = 1;
  while (true) {
    std::size_t probe = cursor;
    while (probe < lines.size() && trim(lines[probe]).empty()) ++probe;
    if (probe >= lines.size()) break;
    SdfRecordParser parser(lines, cursor, record);
    out.push_back(parser.parse());
    while (cursor < lines.size() && trim(lines[cursor]) != "$$$$") ++cursor;
    if (cursor < lines.size()) ++cursor;  // consume "$$$$"
    ++record;
  }
  return out;
}

std::string write_sdf(std::span<const Molecule> molecules) {
  std::string out;
  char buf[128];
  for (const auto& m : molecules) {
    out += m.source_id();
    out += "\n  affistack\n\n";
    std::snprintf(buf, sizeof(buf), "%3zu%3d  0  0  0  0  0  0  0  0999 V2000\n",
                  m.atoms().size(), 0);
    out += buf;
    for (const auto& a : m.atoms()) {
      const std::string sym(a.element.symbol());
      std::snprintf(buf, sizeof(buf), "%10.4f%10.4f%10.4f %-3s 0  0  0  0  0  0  0  0  0  0  0  0\n",
                    a.position.x(), a.position.y(), a.position.z(), sym.c_str());
      out += buf;
    }
    out += "M  END\n";
    for (const auto& [name, value] : m.properties()) {
      out += "> <" + name + ">\n" + value + "\n\n";
    }
    out += "$$$$\n";
  }
  return out;
}

// ---------------------------------------------------------------------------
// Poses
// ---------------------------------------------------------------------------

std::string_view to_string(ScoringFunction s) {
  return s == ScoringFunction::Smina ? "SMINA" : "VINARDO";
}

void PoseSet::validate() const {
  for (std::size_t i = 0; i < poses.size(); ++i) {
    if (poses[i].rank != static_cast<int>(i))
      throw DataError("pose set " + complex_id + ": ranks must be 0..n-1");
    if (i > 0 && poses[i].energy < poses[i - 1].energy)
      throw DataError("pose set " + complex_id + ": energies must be non-decreasing in rank");
  }
}

PoseSet pose_set_from_sdf(std::string complex_id, ScoringFunction sf,
                          std::span<const Molecule> records) {
  PoseSet set{std::move(complex_id), sf, {}, false};
  for (std::size_t i = 0; i < records.size(); ++i) {
    const auto& props = records[i].properties();
    const auto it = props.find("minimizedAffinity");
    double energy = 0.0;
    if (it == props.end() || !parse_double(it->second, energy))
      throw ParseError("pose set " + set.complex_id + ", record " + std::to_string(i + 1) +
                       ": missing or invalid minimizedAffinity");
    set.poses.push_back(Pose{static_cast<int>(i), energy, records[i]});
  }
  set.failed = set.poses.empty();
  set.validate();
  return set;
}

// ---------------------------------------------------------------------------
// Labels
// ---------------------------------------------------------------------------

namespace {

MeasureKind measure_from_string(std::string_view s) {
  const auto l = lower(trim(s));
  if (l == "kd") return MeasureKind::Kd;
  if (l == "ki") return MeasureKind::Ki;
  if (l == "ic50") return MeasureKind::IC50;
  return MeasureKind::Unknown;
}

std::string_view measure_to_string(MeasureKind k) {
  switch (k) {
    case MeasureKind::Kd: return "Kd";
    case MeasureKind::Ki: return "Ki";
    case MeasureKind::IC50: return "IC50";
    case MeasureKind::Unknown: break;
  }
  return "unknown";
}

std::optional<AssayMethod> assay_from_string(std::string_view s) {
  const auto l = lower(trim(s));
  if (l.empty()) return std::nullopt;
  if (l == "xray" || l == "x-ray") return AssayMethod::Xray;
  if (l == "nmr") return AssayMethod::Nmr;
  return AssayMethod::Unknown;
}

std::string_view assay_to_string(const std::optional<AssayMethod>& a) {
  if (!a) return "";
  switch (*a) {
    case AssayMethod::Xray: return "XRAY";
    case AssayMethod::Nmr: return "NMR";
    case AssayMethod::Unknown: break;
  }
  return "unknown";
}

}  // namespace

std::vector<AffinityLabel> parse_labels(std::string_view text) {
  const auto lines = split_lines(text);
  if (lines.empty()) throw ParseError("labels: missing header");
  const auto header = split(lines[0], '\t');
  const std::array<std::string_view, 5> expected{"complex_id", "ln_affinity", "measure_kind",
                                                 "assay_method", "year"};
  if (header.size() != expected.size() || !std::equal(header.begin(), header.end(), expected.begin()))
    throw ParseError("labels: header must be complex_id, ln_affinity, measure_kind, assay_method, year");
  std::vector<AffinityLabel> out;
  std::unordered_set<std::string> seen;
  for (std::size_t i = 1; i < lines.size(); ++i) {
    if (trim(lines[i]).empty()) continue;
    const auto cells = split(lines[i], '\t');
    const auto where = "labels, line " + std::to_string(i + 1) + ": ";
    if (cells.size() != expected.size()) throw ParseError(where + "expected 5 cells");
    AffinityLabel label;
    label.complex_id = std::string(trim(cells[0]));
    if (label.complex_id.empty()) throw ParseError(where + "empty complex_id");
    if (!seen.insert(label.complex_id).second)
      throw ParseError(where + "duplicate complex_id " + label.complex_id);
    if (!parse_double(cells[1], label.value)) throw ParseError(where + "non-numeric ln_affinity");
    label.measure_kind = measure_from_string(cells[2]);
    label.assay_method = assay_from_string(cells[3]);
    if (!trim(cells[4]).empty()) {
      long long year = 0;
      if (!parse_int(cells[4], year)) throw ParseError(where + "non-integer year");
      label.year = static_cast<int>(year);
    }
    out.push_back(std::move(label));
  }
  return out;
}

std::string write_labels(std::span<const AffinityLabel> labels) {
  std::string out = "complex_id\tln_affinity\tmeasure_kind\tassay_method\tyear\n";
  for (const auto& l : labels) {
    out += l.complex_id + '\t' + format_double(l.value) + '\t';
    out += measure_to_string(l.measure_kind);
    out += '\t';
    out += assay_to_string(l.assay_method);
    out += '\t';
    if (l.year) out += std::to_string(*l.year);
    out += '\n';
  }
  return out;
}

// ---------------------------------------------------------------------------
// Score tables
// ---------------------------------------------------------------------------

std::string_view to_string(TableGroup g) {
  switch (g) {
    case TableGroup::D1: return "D1";
    case TableGroup::D2: return "D2";
    case TableGroup::D3: return "D3";
    case TableGroup::D1F: return "D1F";
    case TableGroup::D2F: return "D2F";
    case TableGroup::DockingSmina: return "DOCKING_SMINA";
    case TableGroup::DockingVinardo: return "DOCKING_VINARDO";
    case TableGroup::Other: break;
  }
  return "OTHER";
}

TableGroup table_group_from_string(std::string_view s) {
  for (auto g : {TableGroup::D1, TableGroup::D2, TableGroup::D3, TableGroup::D1F, TableGroup::D2F,
                 TableGroup::DockingSmina, TableGroup::DockingVinardo, TableGroup::Other})
    if (to_string(g) == s) return g;
  throw ConfigError("unknown table group '" + std::string(s) + "'");
}

BasePredictionTable::BasePredictionTable(TableGroup group, std::vector<std::string> column_ids,
                                         std::vector<std::string> row_ids, Eigen::MatrixXd values)
    : group_(group),
      column_ids_(std::move(column_ids)),
      row_ids_(std::move(row_ids)),
      values_(std::move(values)) {
  if (values_.rows() != static_cast<Eigen::Index>(row_ids_.size()) ||
      values_.cols() != static_cast<Eigen::Index>(column_ids_.size()))
    throw DataError("score table: shape does not match ids");
  std::unordered_set<std::string> cols;
  for (const auto& c : column_ids_)
    if (!cols.insert(c).second) throw DataError("score table: duplicate column id " + c);
  for (std::size_t i = 0; i < row_ids_.size(); ++i)
    if (!index_.emplace(row_ids_[i], static_cast<Eigen::Index>(i)).second)
      throw DataError("score table: duplicate complex_id " + row_ids_[i]);
  if (!values_.allFinite()) throw DataError("score table: non-finite value");
}

Eigen::Index BasePredictionTable::row_index(const std::string& complex_id) const {
  const auto it = index_.find(complex_id);
  if (it == index_.end())
    throw DataError("score table " + std::string(to_string(group_)) + ": no row for " + complex_id);
  return it->second;
}

Eigen::MatrixXd BasePredictionTable::gather(std::span<const std::string> ids) const {
  Eigen::MatrixXd out(static_cast<Eigen::Index>(ids.size()), values_.cols());
  std::string missing;
  for (std::size_t i = 0; i < ids.size(); ++i) {
    const auto it = index_.find(ids[i]);
    if (it == index_.end()) {
      missing += (missing.empty() ? "" : ", ") + ids[i];
      continue;
    }
    out.row(static_cast<Eigen::Index>(i)) = values_.row(it->second);
  }
  if (!missing.empty())
    throw DataError("score table " + std::string(to_string(group_)) + " has no rows for: " + missing);
  return out;
}

BasePredictionTable BasePredictionTable::hstack(
    std::span<const BasePredictionTable* const> tables, TableGroup group) {
  if (tables.empty()) throw DataError("hstack: no tables");
  const auto& ids = tables.front()->row_ids();
  std::vector<std::string> columns;
  Eigen::Index width = 0;
  for (const auto* t : tables) {
    if (t->row_ids().size() != ids.size())
      throw DataError("hstack: tables cover different complexes");
    width += t->values().cols();
  }
  Eigen::MatrixXd values(static_cast<Eigen::Index>(ids.size()), width);
  Eigen::Index offset = 0;
  for (const auto* t : tables) {
    values.middleCols(offset, t->values().cols()) = t->gather(ids);
    offset += t->values().cols();
    columns.insert(columns.end(), t->column_ids().begin(), t->column_ids().end());
  }
  return BasePredictionTable(group, std::move(columns), ids, std::move(values));
}

BasePredictionTable parse_score_table(std::string_view text, TableGroup group) {
  const auto lines = split_lines(text);
  if (lines.empty() || lines[0].empty()) throw ParseError("score table: missing header");
  const auto header = split(lines[0], '\t');
  if (header.size() < 2) throw ParseError("score table: header needs an id column and at least one model column");
  std::vector<std::string> columns;
  for (std::size_t i = 1; i < header.size(); ++i) columns.emplace_back(header[i]);
  {
    std::unordered_set<std::string> seen;
    for (const auto& c : columns)
      if (!seen.insert(c).second) throw ParseError("score table: duplicate column id " + c);
  }
  std::vector<std::string> ids;
  std::vector<double> cells;
  std::unordered_set<std::string> seen_ids;
  for (std::size_t i = 1; i < lines.size(); ++i) {
    if (lines[i].empty() && i + 1 == lines.size()) break;
    const auto row = split(lines[i], '\t');
    const auto where = "score table, row " + std::to_string(i) + ": ";
    if (row.size() != header.size()) throw ParseError(where + "ragged row");
    std::string id(row[0]);
    if (!seen_ids.insert(id).second) throw ParseError(where + "duplicate complex_id " + id);
    for (std::size_t c = 1; c < row.size(); ++c) {
      double v = 0.0;
      if (!parse_double(row[c], v))
        throw ParseError(where + "non-numeric cell '" + std::string(row[c]) + "'");
      cells.push_back(v);
    }
    ids.push_back(std::move(id));
  }
  Eigen::MatrixXd values(static_cast<Eigen::Index>(ids.size()),
                         static_cast<Eigen::Index>(columns.size()));
  for (Eigen::Index r = 0; r < values.rows(); ++r)
    for (Eigen::Index c = 0; c < values.cols(); ++c)
      values(r, c) = cells[static_cast<std::size_t>(r * values.cols() + c)];
  BasePredictionTable table(group, std::move(columns), std::move(ids), std::move(values));
  table.set_id_header(std::string(header[0]));
  return table;
}

std::string write_score_table(const BasePredictionTable& table) {
  std::string out = table.id_header();
  for (const auto& c : table.column_ids()) out += '\t' + c;
  out += '\n';
  const auto& v = table.values();
  for (Eigen::Index r = 0; r < v.rows(); ++r) {
    out += table.row_ids()[static_cast<std::size_t>(r)];
    for (Eigen::Index c = 0; c < v.cols(); ++c) out += '\t' + format_double(v(r, c));
    out += '\n';
  }
  return out;
}

// ---------------------------------------------------------------------------
// GeneralSet rules
// ---------------------------------------------------------------------------

std::vector<std::string> filter_general_set(
    std::span<const AffinityLabel> labels, const std::set<std::string>& exclusions,
    const std::map<std::string, DockingScores>& predictions) {
  std::vector<std::string> kept;
  for (const auto& l : labels) {
    if (exclusions.contains(l.complex_id)) continue;
    if (!l.assay_method || *l.assay_method == AssayMethod::Nmr) continue;
    if (l.measure_kind == MeasureKind::IC50) continue;
    if (!l.year || *l.year <= 2000) continue;
    const auto it = predictions.find(l.complex_id);
    if (it == predictions.end() || it->second.smina == 0.0 || it->second.vinardo == 0.0) continue;
    kept.push_back(l.complex_id);
  }
  return kept;
}

}  // namespace affistack
