#include "affistack/cli.hpp"

#include <algorithm>
#include <cctype>
#include <cstdlib>
#include <fstream>
#include <iostream>
#include <set>

#include <CLI11.hpp>

#include "affistack/error.hpp"
#include "affistack/parallel.hpp"
#include "affistack/random.hpp"
#include "affistack/serialization.hpp"
#include "affistack/text.hpp"

namespace fs = std::filesystem;

namespace affistack {

// ---------------------------------------------------------------------------
// Logging
// ---------------------------------------------------------------------------

namespace {

enum class LogLevel { Off, Error, Warn, Info, Debug };

LogLevel log_level_from_env() {
  const char* raw = std::getenv("AFFISTACK_LOG");
  if (!raw) return LogLevel::Warn;
  std::string v(raw);
  std::transform(v.begin(), v.end(), v.begin(),
                 [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
  if (v == "off") return LogLevel::Off;
  if (v == "error") return LogLevel::Error;
  if (v == "info") return LogLevel::Info;
  if (v == "debug") return LogLevel::Debug;
  return LogLevel::Warn;
}

class Log {
 public:
  explicit Log(std::ostream& sink) : sink_(sink), level_(log_level_from_env()) {}
  void error(const std::string& m) const { emit(LogLevel::Error, "error", m); }
  void warn(const std::string& m) const { emit(LogLevel::Warn, "warn", m); }
  void info(const std::string& m) const { emit(LogLevel::Info, "info", m); }
  void debug(const std::string& m) const { emit(LogLevel::Debug, "debug", m); }

 private:
  void emit(LogLevel at, const char* tag, const std::string& m) const {
    if (level_ >= at) sink_ << "[affistack " << tag << "] " << m << '\n';
  }
  std::ostream& sink_;
  LogLevel level_;
};

// ---------------------------------------------------------------------------
// Config
// ---------------------------------------------------------------------------

const std::set<std::string> kTopLevelKeys = {
    "labels",        "partitions", "poses_dir",  "experimental_dir", "ligands_dir",
    "molecular_weights", "score_tables", "filter_tables", "groups", "algorithms",
    "rmsd_modes",    "seed",       "output_dir", "workers",          "protocol",
    "screening",     "mw_threshold", "synergy",  "null"};

void check_keys(const Json& j, const std::set<std::string>& allowed, const std::string& where) {
  if (!j.is_object()) throw ConfigError(where + " must be a JSON object");
  for (const auto& [key, value] : j.items())
    if (!allowed.contains(key)) throw ConfigError("unknown key '" + key + "' in " + where);
}

template <typename T>
T get_as(const Json& j, const std::string& key) {
  try {
    return j.get<T>();
  } catch (const nlohmann::json::exception&) {
    throw ConfigError("config key '" + key + "' has the wrong type");
  }
}

std::vector<std::string> string_list(const Json& j, const std::string& key) {
  if (!j.is_array()) throw ConfigError("config key '" + key + "' must be a list");
  std::vector<std::string> out;
  for (const auto& v : j) out.push_back(get_as<std::string>(v, key));
  return out;
}

void read_protocol(const Json& j, TrainingProtocol& p) {
  check_keys(j, {"folds", "lasso_repeats", "enet_repeats_per_ratio", "gbt_search_iters", "pc_k_max",
                 "pc_validation_fraction", "sweep_lasso_repeats", "sweep_enet_repeats_per_ratio",
                 "sweep_gbt_search_iters"},
             "protocol");
  auto read_int = [&](const char* key, int& field, int min) {
    if (!j.contains(key)) return;
    field = get_as<int>(j.at(key), key);
    if (field < min)
      throw ConfigError(std::string("protocol.") + key + " must be >= " + std::to_string(min));
  };
  read_int("folds", p.folds, 2);
  read_int("lasso_repeats", p.lasso_repeats, 1);
  read_int("enet_repeats_per_ratio", p.enet_repeats_per_ratio, 1);
  read_int("gbt_search_iters", p.gbt_search_iters, 0);
  read_int("pc_k_max", p.pc_k_max, 1);
  read_int("sweep_lasso_repeats", p.sweep_lasso_repeats, 1);
  read_int("sweep_enet_repeats_per_ratio", p.sweep_enet_repeats_per_ratio, 1);
  read_int("sweep_gbt_search_iters", p.sweep_gbt_search_iters, 0);
  if (j.contains("pc_validation_fraction")) {
    p.pc_validation_fraction = get_as<double>(j.at("pc_validation_fraction"), "pc_validation_fraction");
    if (!(p.pc_validation_fraction > 0.0 && p.pc_validation_fraction < 1.0))
      throw ConfigError("protocol.pc_validation_fraction must be in (0, 1)");
  }
}

Json protocol_json(const TrainingProtocol& p) {
  return Json{{"folds", p.folds},
              {"lasso_repeats", p.lasso_repeats},
              {"enet_repeats_per_ratio", p.enet_repeats_per_ratio},
              {"gbt_search_iters", p.gbt_search_iters},
              {"pc_k_max", p.pc_k_max},
              {"pc_validation_fraction", p.pc_validation_fraction},
              {"sweep_lasso_repeats", p.sweep_lasso_repeats},
              {"sweep_enet_repeats_per_ratio", p.sweep_enet_repeats_per_ratio},
              {"sweep_gbt_search_iters", p.sweep_gbt_search_iters}};
}

template <typename T, typename Parse>
void narrow(std::vector<T>& items, const std::vector<std::string>& wanted, Parse parse) {
  if (wanted.empty()) return;
  std::vector<T> keep;
  std::vector<T> parsed;
  for (const auto& w : wanted) parsed.push_back(parse(w));
  for (const auto& item : items)
    if (std::find(parsed.begin(), parsed.end(), item) != parsed.end()) keep.push_back(item);
  items = std::move(keep);
}

void require_exists(const RunConfig& c, const std::string& path, const std::string& key) {
  if (path.empty()) return;
  if (!fs::exists(c.resolve(path)))
    throw ConfigError("config key '" + key + "': path does not exist: " + path);
}

}  // namespace

fs::path RunConfig::resolve(const std::string& path) const {
  const fs::path p(path);
  return p.is_absolute() ? p : base_dir / p;
}

RunConfig parse_run_config(const std::string& json_text, const fs::path& base_dir,
                           const ConfigOverrides& overrides) {
  Json j;
  try {
    j = Json::parse(json_text);
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("config is not valid JSON: ") + e.what());
  }
  check_keys(j, kTopLevelKeys, "config");
  RunConfig c;
  c.base_dir = base_dir;
  auto str = [&](const char* key, std::string& field) {
    if (j.contains(key)) field = get_as<std::string>(j.at(key), key);
  };
  str("labels", c.labels);
  str("partitions", c.partitions);
  str("poses_dir", c.poses_dir);
  str("experimental_dir", c.experimental_dir);
  str("ligands_dir", c.ligands_dir);
  str("molecular_weights", c.molecular_weights);
  str("output_dir", c.output_dir);
  if (c.labels.empty()) throw ConfigError("config requires 'labels'");
  if (c.partitions.empty()) throw ConfigError("config requires 'partitions'");

  if (j.contains("score_tables")) {
    const auto& t = j.at("score_tables");
    if (!t.is_object()) throw ConfigError("'score_tables' must map table groups to paths");
    for (const auto& [k, v] : t.items()) {
      TableGroup g;
      try {
        g = table_group_from_string(k);
      } catch (const Error&) {
        throw ConfigError("unknown score table group '" + k + "'");
      }
      c.score_tables[g] = get_as<std::string>(v, "score_tables." + k);
    }
  }
  if (j.contains("filter_tables")) {
    const auto& t = j.at("filter_tables");
    if (!t.is_object()) throw ConfigError("'filter_tables' must map filter modes to paths");
    for (const auto& [k, v] : t.items())
      c.filter_tables[filter_kind_from_string(k)] = get_as<std::string>(v, "filter_tables." + k);
  }

  c.groups.assign(std::begin(kAllFeatureGroups), std::end(kAllFeatureGroups));
  if (j.contains("groups")) {
    c.groups.clear();
    for (const auto& s : string_list(j.at("groups"), "groups")) c.groups.push_back(feature_group_from_string(s));
  }
  c.algorithms.assign(std::begin(kAllMetaAlgorithms), std::end(kAllMetaAlgorithms));
  if (j.contains("algorithms")) {
    c.algorithms.clear();
    for (const auto& s : string_list(j.at("algorithms"), "algorithms"))
      c.algorithms.push_back(meta_algorithm_from_string(s));
  }
  c.rmsd_modes = {RmsdFilterMode{FilterKind::Consensus, RmsdCutoff::Unfiltered}};
  if (j.contains("rmsd_modes")) {
    const auto& modes = j.at("rmsd_modes");
    if (!modes.is_array()) throw ConfigError("'rmsd_modes' must be a list");
    c.rmsd_modes.clear();
    for (const auto& m : modes) {
      check_keys(m, {"mode", "cutoff"}, "rmsd_modes entry");
      RmsdFilterMode mode;
      mode.kind = filter_kind_from_string(get_as<std::string>(m.at("mode"), "rmsd_modes.mode"));
      if (m.contains("cutoff")) mode.cutoff = cutoff_from_value(get_as<double>(m.at("cutoff"), "rmsd_modes.cutoff"));
      c.rmsd_modes.push_back(mode);
    }
  }
  if (j.contains("seed")) c.seed = get_as<std::uint64_t>(j.at("seed"), "seed");
  if (j.contains("workers")) c.workers = get_as<int>(j.at("workers"), "workers");
  if (j.contains("protocol")) read_protocol(j.at("protocol"), c.protocol);
  if (j.contains("screening")) {
    check_keys(j.at("screening"), {"orientation"}, "screening");
    if (j.at("screening").contains("orientation"))
      c.orientation = orientation_from_string(
          get_as<std::string>(j.at("screening").at("orientation"), "screening.orientation"));
  }
  if (j.contains("mw_threshold")) c.mw_threshold = get_as<double>(j.at("mw_threshold"), "mw_threshold");
  if (j.contains("synergy")) {
    const auto& s = j.at("synergy");
    check_keys(s, {"meta", "dl", "dock"}, "synergy");
    if (s.contains("meta")) c.synergy_meta = string_list(s.at("meta"), "synergy.meta");
    if (s.contains("dl")) c.synergy_dl = string_list(s.at("dl"), "synergy.dl");
    if (s.contains("dock")) c.synergy_dock = string_list(s.at("dock"), "synergy.dock");
    if (c.synergy_dl.empty() || c.synergy_dock.empty())
      throw ConfigError("synergy needs at least one 'dl' and one 'dock' prediction file");
  }
  if (j.contains("null")) {
    const auto& n = j.at("null");
    check_keys(n, {"subset", "iters"}, "null");
    c.null_subset = get_as<std::size_t>(n.at("subset"), "null.subset");
    c.null_iters = get_as<int>(n.at("iters"), "null.iters");
    if (c.null_subset < 3 || c.null_iters < 1)
      throw ConfigError("null.subset must be >= 3 and null.iters >= 1");
  }

  if (overrides.seed) c.seed = *overrides.seed;
  if (overrides.workers) c.workers = *overrides.workers;
  if (overrides.output_dir) c.output_dir = *overrides.output_dir;
  narrow(c.groups, overrides.groups, feature_group_from_string);
  narrow(c.algorithms, overrides.algorithms, meta_algorithm_from_string);
  if (!overrides.modes.empty()) {
    std::set<FilterKind> kinds;
    for (const auto& m : overrides.modes) kinds.insert(filter_kind_from_string(m));
    std::erase_if(c.rmsd_modes, [&](const RmsdFilterMode& m) { return !kinds.contains(m.kind); });
  }
  if (!overrides.cutoffs.empty()) {
    std::set<RmsdCutoff> cuts;
    for (const double v : overrides.cutoffs) cuts.insert(cutoff_from_value(v));
    std::erase_if(c.rmsd_modes, [&](const RmsdFilterMode& m) { return !cuts.contains(m.cutoff); });
  }

  if (c.workers < 1) throw ConfigError("workers must be >= 1");
  if (c.groups.empty() || c.algorithms.empty() || c.rmsd_modes.empty())
    throw ConfigError("run matrix is empty");

  require_exists(c, c.labels, "labels");
  require_exists(c, c.partitions, "partitions");
  require_exists(c, c.poses_dir, "poses_dir");
  require_exists(c, c.experimental_dir, "experimental_dir");
  require_exists(c, c.ligands_dir, "ligands_dir");
  require_exists(c, c.molecular_weights, "molecular_weights");
  for (const auto& [g, p] : c.score_tables) require_exists(c, p, "score_tables");
  for (const auto& [k, p] : c.filter_tables) require_exists(c, p, "filter_tables");
  for (const auto& p : c.synergy_dl) require_exists(c, p, "synergy.dl");
  for (const auto& p : c.synergy_dock) require_exists(c, p, "synergy.dock");
  for (const auto& mode : c.rmsd_modes) {
    if (c.filter_tables.contains(mode.kind)) continue;
    if (c.poses_dir.empty())
      throw ConfigError("mode " + mode.tag() + " needs 'poses_dir' or a filter table");
    if (mode.kind == FilterKind::Experimental && c.experimental_dir.empty())
      throw ConfigError("mode RelExpt needs 'experimental_dir'");
  }
  return c;
}

RunConfig load_run_config(const fs::path& path, const ConfigOverrides& overrides) {
  if (!fs::exists(path)) throw ConfigError("config file not found: " + path.string());
  return parse_run_config(read_file(path.string()), path.parent_path(), overrides);
}

namespace {

std::vector<std::string> sorted_files(const fs::path& dir) {
  std::vector<std::string> names;
  for (const auto& e : fs::directory_iterator(dir))
    if (e.is_regular_file()) names.push_back(e.path().filename().string());
  std::sort(names.begin(), names.end());
  return names;
}

bool uses_poses(const RunConfig& c) {
  return std::any_of(c.rmsd_modes.begin(), c.rmsd_modes.end(),
                     [&](const RmsdFilterMode& m) { return !c.filter_tables.contains(m.kind); });
}

}  // namespace

std::map<std::string, std::string> input_hashes(const RunConfig& c) {
  std::map<std::string, std::string> out;
  auto add = [&](const std::string& p) {
    if (!p.empty()) out[p] = content_hash(read_file(c.resolve(p).string()));
  };
  add(c.labels);
  add(c.partitions);
  add(c.molecular_weights);
  for (const auto& [g, p] : c.score_tables) add(p);
  for (const auto& [k, p] : c.filter_tables) add(p);
  auto add_dir = [&](const std::string& dir) {
    if (dir.empty()) return;
    for (const auto& name : sorted_files(c.resolve(dir)))
      out[dir + "/" + name] = content_hash(read_file((c.resolve(dir) / name).string()));
  };
  if (uses_poses(c)) {
    add_dir(c.poses_dir);
    add_dir(c.experimental_dir);
  }
  add_dir(c.ligands_dir);
  return out;
}

std::map<std::string, double> read_value_table(const fs::path& path) {
  const auto text = read_file(path.string());
  const auto lines = split_lines(text);
  if (lines.empty()) throw ParseError(path.string() + ": empty table");
  std::map<std::string, double> out;
  for (std::size_t i = 1; i < lines.size(); ++i) {
    if (trim(lines[i]).empty()) continue;
    const auto cells = split(lines[i], '\t');
    const auto where = path.string() + ", row " + std::to_string(i) + ": ";
    if (cells.size() != 2) throw ParseError(where + "expected 2 cells");
    double v = 0.0;
    if (!parse_double(cells[1], v)) throw ParseError(where + "non-numeric value");
    if (!out.emplace(std::string(cells[0]), v).second)
      throw ParseError(where + "duplicate id " + std::string(cells[0]));
  }
  return out;
}

std::string write_value_table(const std::map<std::string, double>& values,
                              const std::string& value_header) {
  std::string out = "complex_id\t" + value_header + "\n";
  for (const auto& [id, v] : values) out += id + '\t' + format_double(v) + '\n';
  return out;
}

Cohort load_cohort(const RunConfig& c, std::map<std::string, std::string>* pose_errors) {
  Cohort cohort;
  {
    const auto text = read_file(c.resolve(c.partitions).string());
    const auto lines = split_lines(text);
    if (lines.empty() || lines[0] != "complex_id\tpartition")
      throw ParseError(c.partitions + ": header must be 'complex_id<TAB>partition'");
    for (std::size_t i = 1; i < lines.size(); ++i) {
      if (trim(lines[i]).empty()) continue;
      const auto cells = split(lines[i], '\t');
      const auto where = c.partitions + ", row " + std::to_string(i) + ": ";
      if (cells.size() != 2) throw ParseError(where + "expected 2 cells");
      ComplexRecord rec;
      try {
        rec.partition = partition_from_string(cells[1]);
      } catch (const Error& e) {
        throw ParseError(where + e.what());
      }
      if (!cohort.records.emplace(std::string(cells[0]), std::move(rec)).second)
        throw ParseError(where + "duplicate id " + std::string(cells[0]));
    }
  }
  for (auto& label : parse_labels(read_file(c.resolve(c.labels).string()))) {
    const auto it = cohort.records.find(label.complex_id);
    if (it != cohort.records.end()) it->second.label = std::move(label);
  }
  for (const auto& [g, p] : c.score_tables)
    cohort.base_tables[g] = std::make_shared<const BasePredictionTable>(
        parse_score_table(read_file(c.resolve(p).string()), g));
  if (!c.molecular_weights.empty()) {
    for (const auto& [id, mw] : read_value_table(c.resolve(c.molecular_weights))) {
      const auto it = cohort.records.find(id);
      if (it != cohort.records.end()) it->second.molecular_weight = mw;
    }
  }

  const auto ids = cohort.ids();
  std::vector<ComplexRecord*> recs;
  for (const auto& id : ids) recs.push_back(&cohort.records.at(id));
  const bool need_poses = uses_poses(c);
  std::vector<std::string> errors(ids.size());
  parallel_for(ids.size(), c.workers, [&](std::size_t i) {
    const auto& id = ids[i];
    auto& rec = *recs[i];
    auto read_molecule = [&](const fs::path& p) -> std::optional<Molecule> {
      if (!fs::exists(p)) return std::nullopt;
      auto mols = parse_sdf(read_file(p.string()));
      if (mols.empty()) throw ParseError(p.filename().string() + ": no records");
      return std::move(mols.front());
    };
    try {
      if (!c.ligands_dir.empty()) rec.ligand = read_molecule(c.resolve(c.ligands_dir) / (id + ".sdf"));
      if (!need_poses) return;
      if (!c.experimental_dir.empty())
        rec.experimental_pose = read_molecule(c.resolve(c.experimental_dir) / (id + "_ligand.sdf"));
      for (const auto sf : {ScoringFunction::Smina, ScoringFunction::Vinardo}) {
        const auto suffix = sf == ScoringFunction::Smina ? "_smina.sdf" : "_vinardo.sdf";
        const auto p = c.resolve(c.poses_dir) / (id + suffix);
        PoseSet set;
        if (fs::exists(p)) {
          const auto mols = parse_sdf(read_file(p.string()));
          set = pose_set_from_sdf(id, sf, mols);
        } else {
          set.complex_id = id;
          set.scoring_function = sf;
          set.failed = true;
        }
        rec.pose_sets[sf] = std::move(set);
      }
    } catch (const Error& e) {
      if (!pose_errors) throw DataError(id + ": " + e.what());
      errors[i] = e.what();
      rec.pose_sets.clear();
    }
  });
  if (pose_errors)
    for (std::size_t i = 0; i < ids.size(); ++i)
      if (!errors[i].empty()) (*pose_errors)[ids[i]] = errors[i];

  std::set<FilterKind> kinds;
  for (const auto& m : c.rmsd_modes) kinds.insert(m.kind);
  for (const auto kind : kinds) {
    if (const auto it = c.filter_tables.find(kind); it != c.filter_tables.end()) {
      for (auto& r : parse_filter_table(read_file(c.resolve(it->second).string()))) {
        if (r.kind != kind)
          throw ParseError(it->second + ": row for " + r.smina.complex_id + " has the wrong mode");
        const auto rec = cohort.records.find(r.smina.complex_id);
        if (rec != cohort.records.end()) rec->second.filter_results[kind] = std::move(r);
      }
    } else {
      compute_filter_results(cohort, kind, c.workers);
    }
  }
  return cohort;
}

// ---------------------------------------------------------------------------
// Commands
// ---------------------------------------------------------------------------

namespace {

struct Cell {
  FeatureGroupSpec spec;
  MetaAlgorithm algorithm;
  std::string name() const { return model_name(spec, algorithm); }
};

std::vector<Cell> run_matrix(const RunConfig& c) {
  std::vector<Cell> cells;
  for (const auto& mode : c.rmsd_modes)
    for (const auto g : c.groups)
      for (const auto a : c.algorithms) cells.push_back(Cell{FeatureGroupSpec{g, mode, std::nullopt}, a});
  return cells;
}

Json manifest_json(std::string_view command, const RunConfig& c,
                   const std::map<std::string, std::string>& inputs,
                   const std::map<std::string, std::string>& outputs) {
  Json j;
  j["version"] = std::string(kFormatVersion);
  j["command"] = std::string(command);
  j["seed"] = c.seed;
  j["inputs"] = inputs;
  j["outputs"] = outputs;
  return j;
}

std::string na(const std::optional<double>& v) { return v ? format_double(*v) : "NA"; }

class Outputs {
 public:
  explicit Outputs(fs::path dir) : dir_(std::move(dir)) {}
  void write(const std::string& name, const std::string& contents) {
    write_file_atomic((dir_ / name).string(), contents);
    hashes_[name] = content_hash(contents);
  }
  const std::map<std::string, std::string>& hashes() const { return hashes_; }
  const fs::path& dir() const { return dir_; }

 private:
  fs::path dir_;
  std::map<std::string, std::string> hashes_;
};

int cmd_filter_poses(const RunConfig& c, std::ostream& out, const Log& log) {
  std::map<std::string, std::string> errors;
  const auto cohort = load_cohort(c, &errors);
  Outputs files(c.output_path() / "filters");
  std::set<std::pair<FilterKind, RmsdCutoff>> done;
  for (const auto& mode : c.rmsd_modes) {
    if (!done.emplace(mode.kind, mode.cutoff).second) continue;
    std::vector<FilterResult> rows;
    for (const auto& [id, rec] : cohort.records)
      if (const auto it = rec.filter_results.find(mode.kind); it != rec.filter_results.end())
        rows.push_back(it->second);
    files.write(filter_table_filename(mode), write_filter_table(rows, mode.cutoff));
    out << filter_table_filename(mode) << ": " << rows.size() << " complexes\n";
  }
  if (!errors.empty()) {
    std::string table = "complex_id\terror\n";
    for (const auto& [id, msg] : errors) {
      std::string flat = msg;
      std::replace(flat.begin(), flat.end(), '\t', ' ');
      std::replace(flat.begin(), flat.end(), '\n', ' ');
      table += id + '\t' + flat + '\n';
      log.error("pose input for " + id + ": " + msg);
    }
    files.write("errors.tsv", table);
  }
  write_file_atomic((files.dir() / "manifest.json").string(),
                    dump(manifest_json("filter-poses", c, input_hashes(c), files.hashes())));
  if (!errors.empty()) {
    out << errors.size() << " complexes with unreadable pose input\n";
    return 2;
  }
  return 0;
}

int cmd_assemble(const RunConfig& c, std::ostream& out, const Log& log) {
  const auto cohort = load_cohort(c);
  Outputs files(c.output_path() / "features");
  std::set<std::pair<FeatureGroup, std::pair<FilterKind, RmsdCutoff>>> done;
  for (const auto& cell : run_matrix(c)) {
    const auto& spec = cell.spec;
    if (!done.insert({spec.group, {spec.rmsd_mode.kind, spec.rmsd_mode.cutoff}}).second) continue;
    const auto filtered = apply_rmsd_cutoff(cohort, spec.rmsd_mode);
    const auto train = filtered.subset(Partition::Train);
    FeatureGroupSpec full = spec;
    std::optional<PCABasis> basis;
    if (is_pca_group(spec.group)) {
      basis = fit_pca(pca_input_table(train, spec.group).gather(train.ids()), pca_source(spec.group));
      full.pc_count = std::min<int>(c.protocol.pc_k_max, static_cast<int>(basis->component_count()));
    }
    const auto stem = std::string(to_string(spec.group)) + "_" + spec.rmsd_mode.tag() + "_" +
                      cutoff_label(spec.rmsd_mode.cutoff);
    for (const auto part : {Partition::Train, Partition::CoreSet}) {
      const auto subset = filtered.subset(part);
      if (subset.records.empty()) continue;
      const auto fm = assemble_features(subset, full, basis ? &*basis : nullptr);
      const auto name = stem + "_" + std::string(to_string(part)) + ".tsv";
      files.write(name, write_feature_matrix(fm));
      out << name << ": " << fm.rows() << " rows, " << fm.column_names.size() << " columns\n";
    }
    log.debug("assembled " + stem);
  }
  write_file_atomic((files.dir() / "manifest.json").string(),
                    dump(manifest_json("assemble", c, input_hashes(c), files.hashes())));
  return 0;
}

std::string cell_hash(const std::string& fingerprint, const Cell& cell, const RunConfig& c) {
  Json j{{"inputs", fingerprint},
         {"cell", cell.name()},
         {"seed", c.seed},
         {"protocol", protocol_json(c.protocol)},
         {"version", std::string(kFormatVersion)}};
  return content_hash(j.dump());
}

bool cell_complete(const fs::path& dir, const std::string& name, const std::string& hash) {
  const auto manifest_path = dir / (name + ".manifest.json");
  const auto model_path = dir / (name + ".json");
  if (!fs::exists(manifest_path) || !fs::exists(model_path)) return false;
  try {
    const auto m = Json::parse(read_file(manifest_path.string()));
    if (m.at("cell_hash").get<std::string>() != hash) return false;
    const auto recorded = m.at("outputs").at(name + ".json").get<std::string>();
    return recorded == content_hash(read_file(model_path.string()));
  } catch (const std::exception&) {
    return false;
  }
}

int cmd_train(const RunConfig& c, std::ostream& out, const Log& log) {
  const auto inputs = input_hashes(c);
  const auto fingerprint = content_hash(Json(inputs).dump());
  const auto cells = run_matrix(c);
  const auto dir = c.output_path() / "models";
  std::vector<std::string> hashes;
  std::vector<std::size_t> todo;
  for (std::size_t i = 0; i < cells.size(); ++i) {
    hashes.push_back(cell_hash(fingerprint, cells[i], c));
    if (!cell_complete(dir, cells[i].name(), hashes.back())) todo.push_back(i);
  }
  if (!todo.empty()) {
    const auto cohort = load_cohort(c);
    TrainingProtocol protocol = c.protocol;
    protocol.workers = 1;
    parallel_for(todo.size(), c.workers, [&](std::size_t t) {
      const auto& cell = cells[todo[t]];
      const auto name = cell.name();
      log.info("training " + name);
      const auto model = train_meta_model(cohort, cell.spec, cell.algorithm, c.seed, protocol);
      const auto text = dump(to_json(model));
      write_file_atomic((dir / (name + ".json")).string(), text);
      Json manifest = manifest_json("train", c, inputs, {{name + ".json", content_hash(text)}});
      manifest["cell_hash"] = hashes[todo[t]];
      manifest["seeds"] = model.manifest.seeds;
      write_file_atomic((dir / (name + ".manifest.json")).string(), dump(manifest));
    });
  }
  out << "trained " << todo.size() << ", reused " << cells.size() - todo.size() << " of "
      << cells.size() << " models\n";
  return 0;
}

FittedMetaModel read_model(const fs::path& path) {
  Json j;
  try {
    j = Json::parse(read_file(path.string()));
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(path.string() + ": " + e.what());
  }
  return fitted_model_from_json(j);
}

std::vector<fs::path> model_paths(const RunConfig& c, const std::vector<std::string>& explicit_models) {
  std::vector<fs::path> paths;
  for (const auto& m : explicit_models) paths.emplace_back(m);
  if (paths.empty())
    for (const auto& cell : run_matrix(c)) {
      const auto p = c.output_path() / "models" / (cell.name() + ".json");
      if (!fs::exists(p)) throw DataError("model not trained: " + cell.name() + " (run 'train' first)");
      paths.push_back(p);
    }
  return paths;
}

int cmd_predict(const RunConfig& c, const std::vector<std::string>& models, Partition partition,
                std::ostream& out) {
  const auto cohort = load_cohort(c);
  Outputs files(c.output_path() / "predictions");
  for (const auto& path : model_paths(c, models)) {
    const auto model = read_model(path);
    const auto preds = predict_meta(model, cohort, partition);
    const auto name = model.name() + "_" + std::string(to_string(partition)) + ".tsv";
    files.write(name, write_value_table(preds, "prediction"));
    out << name << ": " << preds.size() << " predictions\n";
  }
  write_file_atomic((files.dir() / "manifest.json").string(),
                    dump(manifest_json("predict", c, input_hashes(c), files.hashes())));
  return 0;
}

std::map<std::string, double> read_truth(const fs::path& path) {
  const auto text = read_file(path.string());
  if (text.rfind("complex_id\tln_affinity", 0) == 0) {
    std::map<std::string, double> out;
    for (const auto& l : parse_labels(text)) out[l.complex_id] = l.value;
    return out;
  }
  return read_value_table(path);
}

Json report_with_groups(const EvaluationReport& overall,
                        const std::map<std::string, EvaluationReport>& groups, bool per_complex) {
  Json j = to_json(overall, per_complex);
  if (!groups.empty()) {
    Json g = Json::object();
    for (const auto& [label, r] : groups) g[label] = to_json(r, false);
    j["molecular_weight_groups"] = std::move(g);
  }
  return j;
}

int cmd_evaluate(const std::string& pred, const std::string& truth, const std::string& out_path,
                 const std::string& mw, double threshold, std::ostream& out) {
  const auto predictions = read_value_table(pred);
  const auto labels = read_truth(truth);
  const auto report = evaluate_predictions(predictions, labels);
  std::map<std::string, EvaluationReport> groups;
  if (!mw.empty())
    groups = grouped_report(predictions, labels, molecular_weight_grouping(read_value_table(mw), threshold));
  const auto text = dump(report_with_groups(report, groups, true));
  if (out_path.empty()) {
    out << text;
  } else {
    write_file_atomic(out_path, text);
    out << "n=" << report.n << " pearson=" << na(report.pearson) << " rmse=" << na(report.rmse) << '\n';
  }
  return 0;
}

std::map<std::string, std::vector<ScoredLigand>> read_screen(const std::string& pred,
                                                             const std::string& labels) {
  struct Columns {
    std::map<std::string, std::size_t> index;
    std::size_t at(const std::string& name, const std::string& file) const {
      const auto it = index.find(name);
      if (it == index.end()) throw ParseError(file + ": missing column '" + name + "'");
      return it->second;
    }
  };
  auto header = [](std::string_view line) {
    Columns c;
    const auto cells = split(line, '\t');
    for (std::size_t i = 0; i < cells.size(); ++i) c.index[std::string(cells[i])] = i;
    return c;
  };
  auto parse_active = [](std::string_view v, const std::string& where) {
    if (v == "1" || v == "true") return true;
    if (v == "0" || v == "false") return false;
    throw ParseError(where + "active flag must be 0/1");
  };

  std::map<std::pair<std::string, std::string>, bool> actives;
  if (!labels.empty()) {
    const auto text = read_file(labels);
    const auto lines = split_lines(text);
    if (lines.empty()) throw ParseError(labels + ": empty file");
    const auto cols = header(lines[0]);
    const auto t = cols.at("target", labels), l = cols.at("ligand_id", labels), a = cols.at("active", labels);
    for (std::size_t i = 1; i < lines.size(); ++i) {
      if (trim(lines[i]).empty()) continue;
      const auto cells = split(lines[i], '\t');
      const auto where = labels + ", row " + std::to_string(i) + ": ";
      if (cells.size() != cols.index.size()) throw ParseError(where + "wrong number of cells");
      actives[{std::string(cells[t]), std::string(cells[l])}] = parse_active(cells[a], where);
    }
  }

  const auto text = read_file(pred);
  const auto lines = split_lines(text);
  if (lines.empty()) throw ParseError(pred + ": empty file");
  const auto cols = header(lines[0]);
  const auto t = cols.at("target", pred), l = cols.at("ligand_id", pred), s = cols.at("score", pred);
  const bool inline_active = cols.index.contains("active");
  if (!inline_active && labels.empty())
    throw ConfigError("screen needs an 'active' column or a --labels file");
  std::map<std::string, std::vector<ScoredLigand>> out;
  for (std::size_t i = 1; i < lines.size(); ++i) {
    if (trim(lines[i]).empty()) continue;
    const auto cells = split(lines[i], '\t');
    const auto where = pred + ", row " + std::to_string(i) + ": ";
    if (cells.size() != cols.index.size()) throw ParseError(where + "wrong number of cells");
    ScoredLigand lig;
    lig.ligand_id = std::string(cells[l]);
    if (!parse_double(cells[s], lig.score)) throw ParseError(where + "non-numeric score");
    const std::string target(cells[t]);
    if (!labels.empty()) {
      const auto it = actives.find({target, lig.ligand_id});
      if (it == actives.end()) throw DataError(where + "no activity label for " + lig.ligand_id);
      lig.active = it->second;
    } else {
      lig.active = parse_active(cells[cols.at("active", pred)], where);
    }
    out[target].push_back(std::move(lig));
  }
  return out;
}

int cmd_screen(const std::string& pred, const std::string& labels, const std::string& out_dir,
               ScoreOrientation orientation, std::ostream& out) {
  const auto reports = screen_report(read_screen(pred, labels), orientation);
  std::string tsv =
      "target\tn_ligands\tn_actives\ttop5_recall\ttop10_recall\tprecision_at_actives\t"
      "welch_t\twelch_p\tmwu_u\tmwu_p\n";
  Json all = Json::array();
  for (const auto& r : reports) {
    auto stat = [](const std::optional<TestResult>& t, bool p) {
      return t ? format_double(p ? t->p_value : t->statistic) : std::string("NA");
    };
    tsv += r.target + '\t' + std::to_string(r.n_ligands) + '\t' + std::to_string(r.n_actives) + '\t' +
           format_double(r.top5_recall) + '\t' + format_double(r.top10_recall) + '\t' +
           format_double(r.precision_at_actives) + '\t' + stat(r.welch, false) + '\t' +
           stat(r.welch, true) + '\t' + stat(r.mwu, false) + '\t' + stat(r.mwu, true) + '\n';
    all.push_back(to_json(r));
  }
  Json j{{"orientation", std::string(to_string(orientation))}, {"targets", std::move(all)}};
  if (out_dir.empty()) {
    out << tsv;
    return 0;
  }
  Outputs files{fs::path(out_dir)};
  files.write("screen.tsv", tsv);
  files.write("screen.json", dump(j));
  out << reports.size() << " targets\n";
  return 0;
}

int cmd_report(const RunConfig& c, std::ostream& out) {
  const auto cohort = load_cohort(c);
  std::map<std::string, double> truth;
  std::map<std::string, double> mw;
  for (const auto& [id, rec] : cohort.records) {
    if (rec.partition != Partition::CoreSet) continue;
    if (rec.label) truth[id] = rec.label->value;
    if (const auto m = rec.resolve_molecular_weight()) mw[id] = *m;
  }
  const auto grouping = molecular_weight_grouping(mw, c.mw_threshold);

  Outputs files(c.output_path() / "reports");
  std::string summary =
      "model\tn\tpearson\tspearman\tmse\trmse\tn_low_mw\tpearson_low_mw\tn_high_mw\tpearson_high_mw\n";
  std::map<std::string, std::map<std::string, double>> predictions;
  std::optional<std::pair<double, std::string>> best;
  for (const auto& path : model_paths(c, {})) {
    const auto model = read_model(path);
    const auto name = model.name();
    auto preds = predict_meta(model, cohort, Partition::CoreSet);
    const auto report = evaluate_predictions(preds, truth);
    std::map<std::string, EvaluationReport> groups;
    if (mw.size() == preds.size()) groups = grouped_report(preds, truth, grouping);
    files.write(name + ".json", dump(report_with_groups(report, groups, true)));
    auto group_cells = [&](const std::string& g) {
      const auto it = groups.find(g);
      if (it == groups.end()) return std::string("0\tNA");
      return std::to_string(it->second.n) + '\t' + na(it->second.pearson);
    };
    summary += name + '\t' + std::to_string(report.n) + '\t' + na(report.pearson) + '\t' +
               na(report.spearman) + '\t' + na(report.mse) + '\t' + na(report.rmse) + '\t' +
               group_cells("low") + '\t' + group_cells("high") + '\n';
    if (report.pearson && (!best || *report.pearson > best->first)) best = {{*report.pearson, name}};
    predictions[name] = std::move(preds);
  }
  files.write("summary.tsv", summary);

  if (!c.synergy_dl.empty()) {
    std::vector<std::string> meta = c.synergy_meta;
    if (meta.empty())
      for (const auto& cell : run_matrix(c))
        if (cell.spec.group == FeatureGroup::EDAP) meta.push_back(cell.name());
    if (meta.empty()) throw ConfigError("synergy: no META models (add ED-A-P to the matrix or list them)");
    auto mean_of = [&](const std::vector<const std::map<std::string, double>*>& sources,
                       const std::string& what) {
      std::map<std::string, double> mean;
      for (const auto& [id, t] : truth) {
        double sum = 0.0;
        for (const auto* s : sources) {
          const auto it = s->find(id);
          if (it == s->end()) throw DataError("synergy: " + what + " predictions lack " + id);
          sum += it->second;
        }
        mean[id] = sum / static_cast<double>(sources.size());
      }
      return mean;
    };
    std::vector<const std::map<std::string, double>*> meta_sources;
    for (const auto& name : meta) {
      const auto it = predictions.find(name);
      if (it == predictions.end()) throw ConfigError("synergy: model " + name + " is not in the run matrix");
      meta_sources.push_back(&it->second);
    }
    std::vector<std::map<std::string, double>> loaded_dl, loaded_dock;
    for (const auto& p : c.synergy_dl) loaded_dl.push_back(read_value_table(c.resolve(p)));
    for (const auto& p : c.synergy_dock) loaded_dock.push_back(read_value_table(c.resolve(p)));
    std::vector<const std::map<std::string, double>*> dl_sources, dock_sources;
    for (const auto& m : loaded_dl) dl_sources.push_back(&m);
    for (const auto& m : loaded_dock) dock_sources.push_back(&m);
    const auto meta_mean = mean_of(meta_sources, "META");
    const auto dl_mean = mean_of(dl_sources, "DL");
    const auto dock_mean = mean_of(dock_sources, "DOCK");
    std::map<std::string, std::map<ToolGroup, double>> errors;
    for (const auto& [id, t] : truth)
      errors[id] = {{ToolGroup::Meta, std::abs(meta_mean.at(id) - t)},
                    {ToolGroup::DL, std::abs(dl_mean.at(id) - t)},
                    {ToolGroup::Dock, std::abs(dock_mean.at(id) - t)}};
    const auto three = synergy_partition(errors);
    const auto two = synergy_partition(errors, {ToolGroup::DL, ToolGroup::Dock});
    auto counts = [](const SynergyPartition& p) {
      Json j = Json::object();
      for (const auto& [g, n] : p.counts) j[std::string(to_string(g))] = n;
      return j;
    };
    Json assignment = Json::object();
    for (const auto& [id, g] : three.assignment) assignment[id] = std::string(to_string(g));
    files.write("synergy.json", dump(Json{{"n", truth.size()},
                                          {"meta_models", meta},
                                          {"counts", counts(three)},
                                          {"dl_vs_dock_counts", counts(two)},
                                          {"tie_priority", {"META", "DL", "DOCK"}},
                                          {"assignment", std::move(assignment)}}));
  }

  if (c.null_iters > 0 && best) {
    const auto& preds = predictions.at(best->second);
    Eigen::VectorXd p(static_cast<Eigen::Index>(preds.size()));
    Eigen::VectorXd t(static_cast<Eigen::Index>(preds.size()));
    Eigen::Index i = 0;
    for (const auto& [id, v] : preds) {
      p(i) = v;
      t(i) = truth.at(id);
      ++i;
    }
    const auto seed = derive_seed(c.seed, "report-null");
    const auto null = monte_carlo_subsample_null(p, t, c.null_subset, c.null_iters, seed, c.workers);
    Json q = Json::object();
    for (const double level : {0.01, 0.05, 0.5, 0.95, 0.99}) q[format_double(level)] = null.quantile(level);
    files.write("null.json", dump(Json{{"model", best->second},
                                       {"subset", c.null_subset},
                                       {"iters", c.null_iters},
                                       {"seed", seed},
                                       {"full_sample_pearson", best->first},
                                       {"quantiles", std::move(q)}}));
  }

  write_file_atomic((files.dir() / "manifest.json").string(),
                    dump(manifest_json("report", c, input_hashes(c), files.hashes())));
  out << "reported " << predictions.size() << " models\n";
  return 0;
}

}  // namespace

int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  const Log log(err);
  CLI::App app{"Stacked meta-models over docking and deep-learning affinity predictions", "affistack"};
  app.require_subcommand(1);

  std::string config_path;
  ConfigOverrides ov;
  std::uint64_t seed = 0;
  int workers = 0;
  std::string out_dir;
  auto add_matrix_flags = [&](CLI::App* sub) {
    sub->add_option("--config", config_path, "Run configuration (JSON)")->required();
    sub->add_option("--out", out_dir, "Output directory (overrides config)");
    sub->add_option("--workers", workers, "Worker threads")->check(CLI::PositiveNumber);
    sub->add_option("--seed", seed, "Master seed (overrides config)");
    sub->add_option("--group", ov.groups, "Restrict to feature group(s)");
    sub->add_option("--algo", ov.algorithms, "Restrict to algorithm(s)");
    sub->add_option("--mode", ov.modes, "Restrict to RMSD filter mode(s): VvS, RelExpt");
    sub->add_option("--cutoff", ov.cutoffs, "Restrict to RMSD cutoff(s): 101, 100, 3");
  };

  auto* filter = app.add_subcommand("filter-poses", "Select poses and write filter-result tables");
  add_matrix_flags(filter);
  auto* assemble = app.add_subcommand("assemble", "Write feature matrices of the run matrix");
  add_matrix_flags(assemble);
  auto* train = app.add_subcommand("train", "Train every cell of the run matrix (resumable)");
  add_matrix_flags(train);
  auto* predict = app.add_subcommand("predict", "Predict a partition with trained models");
  add_matrix_flags(predict);
  std::vector<std::string> models;
  std::string partition = "CORESET";
  predict->add_option("--model", models, "Model file(s); default: every model of the matrix");
  predict->add_option("--partition", partition, "Partition to predict");
  auto* report = app.add_subcommand("report", "Evaluate every model on the CORESET");
  add_matrix_flags(report);

  auto* evaluate = app.add_subcommand("evaluate", "Score predictions against labels");
  std::string pred_path, truth_path, eval_out, mw_path;
  double threshold = 900.0;
  evaluate->add_option("--pred", pred_path, "Predictions TSV (complex_id, value)")->required();
  evaluate->add_option("--truth", truth_path, "Labels TSV or (complex_id, value) TSV")->required();
  evaluate->add_option("--out", eval_out, "Report JSON path (default: stdout)");
  evaluate->add_option("--mw", mw_path, "Molecular weights TSV for the low/high split");
  evaluate->add_option("--mw-threshold", threshold, "Molecular-weight split point");

  auto* screen = app.add_subcommand("screen", "Per-target virtual-screening metrics");
  std::string screen_pred, screen_labels, screen_out, orientation = "ascending";
  screen->add_option("--pred", screen_pred, "TSV with target, ligand_id, score [, active]")->required();
  screen->add_option("--labels", screen_labels, "TSV with target, ligand_id, active");
  screen->add_option("--out", screen_out, "Output directory (default: TSV on stdout)");
  screen->add_option("--orientation", orientation, "ascending: lower score ranks first");

  std::vector<std::string> argv_store;
  argv_store.emplace_back("affistack");
  argv_store.insert(argv_store.end(), args.begin(), args.end());
  std::vector<const char*> argv;
  for (const auto& a : argv_store) argv.push_back(a.c_str());

  try {
    app.parse(static_cast<int>(argv.size()), argv.data());
  } catch (const CLI::ParseError& e) {
    return app.exit(e, out, err) == 0 ? 0 : 1;
  }

  try {
    auto config = [&] {
      if (!out_dir.empty()) ov.output_dir = fs::absolute(out_dir).string();
      if (app.get_subcommands().front()->count("--seed") > 0) ov.seed = seed;
      if (workers > 0) ov.workers = workers;
      return load_run_config(config_path, ov);
    };
    if (filter->parsed()) return cmd_filter_poses(config(), out, log);
    if (assemble->parsed()) return cmd_assemble(config(), out, log);
    if (train->parsed()) return cmd_train(config(), out, log);
    if (predict->parsed()) return cmd_predict(config(), models, partition_from_string(partition), out);
    if (report->parsed()) return cmd_report(config(), out);
    if (evaluate->parsed()) return cmd_evaluate(pred_path, truth_path, eval_out, mw_path, threshold, out);
    if (screen->parsed())
      return cmd_screen(screen_pred, screen_labels, screen_out, orientation_from_string(orientation), out);
  } catch (const ConfigError& e) {
    err << "error: " << e.what() << '\n';
    return 1;
  } catch (const NumericalError& e) {
    err << "error: " << e.what() << '\n';
    return 3;
  } catch (const Error& e) {
    err << "error: " << e.what() << '\n';
    return 2;
  } catch (const fs::filesystem_error& e) {
    err << "error: " << e.what() << '\n';
    return 2;
  }
  return 1;
}

}  // namespace affistack
