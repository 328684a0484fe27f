#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <set>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include <Eigen/Core>

namespace affistack {

// ---------------------------------------------------------------------------
// Elements and molecules
// ---------------------------------------------------------------------------

/// Chemical element identified by atomic number. Only elements present in the
/// built-in atomic-weight table can be constructed.
class Element {
 public:
  /// Throws ParseError for symbols not in the table. Accepts "Cl" and "CL".
  static Element from_symbol(std::string_view symbol);
  static bool is_known(std::string_view symbol);

  std::uint8_t atomic_number() const { return z_; }
  std::string_view symbol() const;
  /// IUPAC 2021 conventional standard atomic weight, in daltons.
  double standard_weight() const;
  bool is_hydrogen() const { return z_ == 1; }

  friend bool operator==(Element, Element) = default;
  friend auto operator<=>(Element, Element) = default;

 private:
  explicit Element(std::uint8_t z) : z_(z) {}
  std::uint8_t z_;
};

struct Atom {
  Element element;
  Eigen::Vector3d position;
};

/// Ligand structure as parsed. Hydrogens are kept (for molecular weight) and
/// excluded from the heavy-atom view (for RMSD).
class Molecule {
 public:
  Molecule() = default;
  /// Throws DataError when there is no heavy atom or a coordinate is not finite.
  Molecule(std::string source_id, std::vector<Atom> atoms,
           std::map<std::string, std::string> properties = {});

  const std::string& source_id() const { return source_id_; }
  const std::vector<Atom>& atoms() const { return atoms_; }
  const std::map<std::string, std::string>& properties() const { return properties_; }

  std::size_t heavy_atom_count() const { return heavy_elements_.size(); }
  /// 3 x N matrix of heavy-atom coordinates, columns in file order.
  const Eigen::Matrix3Xd& heavy_positions() const { return heavy_positions_; }
  std::span<const Element> heavy_elements() const { return heavy_elements_; }

 private:
  std::string source_id_;
  std::vector<Atom> atoms_;
  std::map<std::string, std::string> properties_;
  Eigen::Matrix3Xd heavy_positions_;
  std::vector<Element> heavy_elements_;
};

/// Parse one or more V2000 molfile records separated by "$$$$".
/// Errors name the 1-based record index and line number.
std::vector<Molecule> parse_sdf(std::string_view text);

/// Serialize molecules as V2000 records (no bonds; data items preserved).
std::string write_sdf(std::span<const Molecule> molecules);

/// Sum of standard atomic weights over all atoms, hydrogens included.
double molecular_weight(const Molecule& m);

// ---------------------------------------------------------------------------
// Docking poses
// ---------------------------------------------------------------------------

enum class ScoringFunction { Smina, Vinardo };
std::string_view to_string(ScoringFunction s);

struct Pose {
  int rank = 0;
  double energy = 0.0;  ///< kcal/mol
  Molecule molecule;
};

/// Ranked docking poses for one complex and one scoring function.
struct PoseSet {
  std::string complex_id;
  ScoringFunction scoring_function = ScoringFunction::Smina;
  std::vector<Pose> poses;
  /// Structure generation failed upstream; poses may be empty.
  bool failed = false;

  /// Ranks are 0..n-1 and energies are non-decreasing in rank.
  void validate() const;
};

/// Build a PoseSet from an SDF file's records. The energy is read from the
/// `minimizedAffinity` data item; record order is rank order.
PoseSet pose_set_from_sdf(std::string complex_id, ScoringFunction sf,
                          std::span<const Molecule> records);

// ---------------------------------------------------------------------------
// Tables
// ---------------------------------------------------------------------------

enum class MeasureKind { Kd, Ki, IC50, Unknown };
enum class AssayMethod { Xray, Nmr, Unknown };

struct AffinityLabel {
  std::string complex_id;
  double value = 0.0;  ///< ln(Kd) or ln(Ki), as given upstream
  MeasureKind measure_kind = MeasureKind::Unknown;
  std::optional<AssayMethod> assay_method;
  std::optional<int> year;
};

/// Columns: complex_id, ln_affinity, measure_kind, assay_method, year.
std::vector<AffinityLabel> parse_labels(std::string_view text);
std::string write_labels(std::span<const AffinityLabel> labels);

enum class TableGroup { D1, D2, D3, D1F, D2F, DockingSmina, DockingVinardo, Other };
std::string_view to_string(TableGroup g);
TableGroup table_group_from_string(std::string_view s);

/// Base-predictor scores: one row per complex, one column per model instance.
class BasePredictionTable {
 public:
  BasePredictionTable() = default;
  /// Throws DataError on duplicate ids, duplicate columns, shape mismatch or NaN.
  BasePredictionTable(TableGroup group, std::vector<std::string> column_ids,
                      std::vector<std::string> row_ids, Eigen::MatrixXd values);

  TableGroup group() const { return group_; }
  /// Header of the id column, kept for byte-identical re-serialization.
  const std::string& id_header() const { return id_header_; }
  void set_id_header(std::string header) { id_header_ = std::move(header); }
  const std::vector<std::string>& column_ids() const { return column_ids_; }
  /// Row ids in input order.
  const std::vector<std::string>& row_ids() const { return row_ids_; }
  const Eigen::MatrixXd& values() const { return values_; }

  bool contains(const std::string& complex_id) const { return index_.contains(complex_id); }
  /// Throws DataError if the id is absent.
  Eigen::Index row_index(const std::string& complex_id) const;
  Eigen::RowVectorXd row(const std::string& complex_id) const {
    return values_.row(row_index(complex_id));
  }

  /// Rows for `ids`, in that order. Throws DataError listing every missing id.
  Eigen::MatrixXd gather(std::span<const std::string> ids) const;

  /// Column-wise concatenation. Every table must cover the same ids; row order
  /// follows the first table.
  static BasePredictionTable hstack(std::span<const BasePredictionTable* const> tables,
                                    TableGroup group);

 private:
  TableGroup group_ = TableGroup::Other;
  std::string id_header_ = "complex_id";
  std::vector<std::string> column_ids_;
  std::vector<std::string> row_ids_;
  Eigen::MatrixXd values_;
  std::unordered_map<std::string, Eigen::Index> index_;
};

/// Tab-separated table with a header; the first header cell names the id column.
BasePredictionTable parse_score_table(std::string_view text, TableGroup group);
std::string write_score_table(const BasePredictionTable& table);

// ---------------------------------------------------------------------------
// GeneralSet cohort rules
// ---------------------------------------------------------------------------

struct DockingScores {
  double smina = 0.0;
  double vinardo = 0.0;
};

/// Applies, in order: drop excluded ids, drop NMR, drop IC50, keep year > 2000,
/// drop any complex with a zero SMINA or Vinardo score. Missing metadata or
/// missing docking scores fail the corresponding rule. Input order is kept.
std::vector<std::string> filter_general_set(
    std::span<const AffinityLabel> labels, const std::set<std::string>& exclusions,
    const std::map<std::string, DockingScores>& predictions);

}  // namespace affistack
