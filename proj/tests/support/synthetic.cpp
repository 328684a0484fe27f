#include "synthetic.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>

#include "affistack/random.hpp"
#include "affistack/text.hpp"

namespace fs = std::filesystem;

namespace affistack::testing {

namespace {

struct TableLayout {
  TableGroup group;
  int architectures;
  int instances;
};

const TableLayout kLayout[] = {{TableGroup::D1, 2, 2},
                               {TableGroup::D2, 2, 2},
                               {TableGroup::D3, 3, 2},
                               {TableGroup::D1F, 2, 2},
                               {TableGroup::D2F, 2, 2}};

std::string complex_id(std::size_t i) {
  char buf[16];
  std::snprintf(buf, sizeof(buf), "cpx%04zu", i);
  return buf;
}

}  // namespace

fs::path fresh_dir(const std::string& name) {
  const auto dir = fs::temp_directory_path() / ("affistack_test_" + name);
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

SyntheticData make_synthetic(const SyntheticSpec& spec) {
  Rng rng(spec.seed);
  SyntheticData d;
  const auto n = static_cast<Eigen::Index>(spec.n);
  int total_columns = 0;
  for (const auto& t : kLayout) total_columns += t.architectures * t.instances;

  Eigen::VectorXd latent(n);
  for (Eigen::Index i = 0; i < n; ++i) latent(i) = -10.0 + 1.5 * rng.normal();
  Eigen::VectorXd bias(total_columns);
  for (int c = 0; c < total_columns; ++c) bias(c) = 0.3 * rng.normal();
  d.dl_columns.resize(n, total_columns);
  for (Eigen::Index i = 0; i < n; ++i)
    for (int c = 0; c < total_columns; ++c)
      d.dl_columns(i, c) = latent(i) + bias(c) + spec.column_noise * rng.normal();
  d.smina.resize(n);
  d.vinardo.resize(n);
  d.truth.resize(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    d.smina(i) = -8.0 + 1.5 * rng.normal();
    d.vinardo(i) = 0.8 * d.smina(i) - 1.0 + 0.6 * rng.normal();
  }
  for (Eigen::Index i = 0; i < n; ++i)
    d.truth(i) = spec.dl_weight * d.dl_columns.row(i).mean() + spec.smina_weight * d.smina(i) +
                 spec.noise * rng.normal();

  const auto n_train = static_cast<std::size_t>(std::floor(spec.train_fraction * static_cast<double>(spec.n)));
  for (std::size_t i = 0; i < spec.n; ++i) d.ids.push_back(complex_id(i));

  int col = 0;
  for (const auto& t : kLayout) {
    std::vector<std::string> columns;
    for (int a = 0; a < t.architectures; ++a)
      for (int r = 0; r < t.instances; ++r)
        columns.push_back(std::string(to_string(t.group)) + "|arch" + std::to_string(a) + "|rep" +
                          std::to_string(r));
    const auto width = static_cast<Eigen::Index>(columns.size());
    d.cohort.base_tables[t.group] = std::make_shared<const BasePredictionTable>(
        t.group, columns, d.ids, Eigen::MatrixXd(d.dl_columns.middleCols(col, width)));
    col += static_cast<int>(width);
  }

  for (std::size_t i = 0; i < spec.n; ++i) {
    const auto r = static_cast<Eigen::Index>(i);
    ComplexRecord rec;
    rec.partition = i < n_train ? Partition::Train : Partition::CoreSet;
    rec.label = AffinityLabel{d.ids[i], d.truth(r), MeasureKind::Kd, AssayMethod::Xray, 2010};
    rec.molecular_weight = rng.uniform(200.0, 1200.0);
    const bool sentinel = rec.partition == Partition::Train && rng.uniform01() < spec.sentinel_fraction;
    const double rmsd = sentinel ? 100.0 : rng.uniform(0.5, 2.5);
    for (const auto kind : {FilterKind::Consensus, FilterKind::Experimental}) {
      FilterResult fr;
      fr.kind = kind;
      fr.smina = SelectedPose{d.ids[i], ScoringFunction::Smina, 0, d.smina(r), rmsd};
      fr.vinardo = SelectedPose{d.ids[i], ScoringFunction::Vinardo, 0, d.vinardo(r), rmsd};
      fr.rmsd = rmsd;
      rec.filter_results[kind] = fr;
    }
    d.cohort.records[d.ids[i]] = std::move(rec);
  }
  return d;
}

namespace {

void write_text(const fs::path& path, const std::string& text) {
  fs::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  out << text;
}

Molecule ligand_at(const std::string& id, const Eigen::Matrix3Xd& heavy,
                   std::map<std::string, std::string> props = {}) {
  static const char* kSymbols[] = {"C", "C", "N", "O", "C", "S"};
  std::vector<Atom> atoms;
  for (Eigen::Index a = 0; a < heavy.cols(); ++a)
    atoms.push_back(Atom{Element::from_symbol(kSymbols[a % 6]), heavy.col(a)});
  atoms.push_back(Atom{Element::from_symbol("H"), heavy.col(0) + Eigen::Vector3d(1.0, 0.0, 0.0)});
  return Molecule(id, std::move(atoms), std::move(props));
}

}  // namespace

fs::path write_synthetic_dataset(const fs::path& dir, const SyntheticSpec& spec,
                                 const std::string& extra_config) {
  const auto d = make_synthetic(spec);
  Rng rng(derive_seed(spec.seed, "synthetic-poses"));

  std::vector<AffinityLabel> labels;
  std::string partitions = "complex_id\tpartition\n";
  std::string mw = "complex_id\tmw\n";
  for (const auto& [id, rec] : d.cohort.records) {
    labels.push_back(*rec.label);
    partitions += id + '\t' + std::string(to_string(rec.partition)) + '\n';
    mw += id + '\t' + format_double(*rec.molecular_weight) + '\n';
  }
  write_text(dir / "labels.tsv", write_labels(labels));
  write_text(dir / "partitions.tsv", partitions);
  write_text(dir / "mw.tsv", mw);

  std::string tables;
  for (const auto& [group, table] : d.cohort.base_tables) {
    const auto name = "scores_" + std::string(to_string(group)) + ".tsv";
    write_text(dir / "tables" / name, write_score_table(*table));
    tables += std::string(tables.empty() ? "" : ", ") + "\"" + std::string(to_string(group)) +
              "\": \"tables/" + name + "\"";
  }

  for (std::size_t i = 0; i < d.ids.size(); ++i) {
    const auto& id = d.ids[i];
    const auto r = static_cast<Eigen::Index>(i);
    const bool disagree = d.cohort.records.at(id).filter_results.at(FilterKind::Consensus).rmsd >= 100.0;
    Eigen::Matrix3Xd crystal(3, 6);
    for (Eigen::Index a = 0; a < crystal.cols(); ++a)
      crystal.col(a) = Eigen::Vector3d(1.5 * static_cast<double>(a), rng.normal(), rng.normal());
    write_text(dir / "experimental" / (id + "_ligand.sdf"),
               write_sdf(std::vector<Molecule>{ligand_at(id, crystal)}));
    for (const auto sf : {ScoringFunction::Smina, ScoringFunction::Vinardo}) {
      const double top = sf == ScoringFunction::Smina ? d.smina(r) : d.vinardo(r);
      const Eigen::Vector3d shift =
          disagree && sf == ScoringFunction::Vinardo ? Eigen::Vector3d(12.0, 0.0, 0.0) : Eigen::Vector3d::Zero();
      std::vector<Molecule> poses;
      for (int k = 0; k < 3; ++k) {
        Eigen::Matrix3Xd p = crystal;
        for (Eigen::Index a = 0; a < p.cols(); ++a)
          p.col(a) += shift + 0.3 * static_cast<double>(k) * Eigen::Vector3d(rng.normal(), rng.normal(), rng.normal());
        poses.push_back(ligand_at(id, p, {{"minimizedAffinity", format_double(top + 0.25 * k)}}));
      }
      const auto suffix = sf == ScoringFunction::Smina ? "_smina.sdf" : "_vinardo.sdf";
      write_text(dir / "poses" / (id + suffix), write_sdf(poses));
    }
  }

  std::string config = "{\n  \"labels\": \"labels.tsv\",\n  \"partitions\": \"partitions.tsv\",\n"
                       "  \"poses_dir\": \"poses\",\n  \"experimental_dir\": \"experimental\",\n"
                       "  \"molecular_weights\": \"mw.tsv\",\n  \"score_tables\": {" + tables + "}";
  if (!extra_config.empty()) config += ",\n  " + extra_config;
  config += "\n}\n";
  write_text(dir / "config.json", config);
  return dir / "config.json";
}

}  // namespace affistack::testing
