#include "affistack/cohort.hpp"

#include "affistack/error.hpp"
#include "affistack/parallel.hpp"

namespace affistack {

std::string_view to_string(Partition p) {
  switch (p) {
    case Partition::Train: return "TRAIN";
    case Partition::CoreSet: return "CORESET";
    case Partition::GeneralSet: return "GENERALSET";
    case Partition::Screen: return "SCREEN";
  }
  return "TRAIN";
}

Partition partition_from_string(std::string_view s) {
  for (auto p : {Partition::Train, Partition::CoreSet, Partition::GeneralSet, Partition::Screen})
    if (to_string(p) == s) return p;
  throw ConfigError("unknown partition '" + std::string(s) + "'");
}

std::optional<double> ComplexRecord::resolve_molecular_weight() const {
  if (molecular_weight) return molecular_weight;
  if (ligand) return affistack::molecular_weight(*ligand);
  if (experimental_pose) return affistack::molecular_weight(*experimental_pose);
  const auto it = pose_sets.find(ScoringFunction::Smina);
  if (it != pose_sets.end() && !it->second.poses.empty())
    return affistack::molecular_weight(it->second.poses.front().molecule);
  return std::nullopt;
}

std::vector<std::string> Cohort::ids(std::optional<Partition> partition) const {
  std::vector<std::string> out;
  for (const auto& [id, rec] : records)
    if (!partition || rec.partition == *partition) out.push_back(id);
  return out;
}

Cohort Cohort::subset(Partition partition) const {
  Cohort out;
  out.base_tables = base_tables;
  for (const auto& [id, rec] : records)
    if (rec.partition == partition) out.records.emplace(id, rec);
  return out;
}

const BasePredictionTable& Cohort::table(TableGroup group) const {
  const auto it = base_tables.find(group);
  if (it == base_tables.end() || !it->second)
    throw DataError("cohort has no " + std::string(to_string(group)) + " score table");
  return *it->second;
}

void Cohort::validate() const {
  std::string missing;
  for (const auto& [group, table] : base_tables) {
    for (const auto& [id, rec] : records) {
      if (rec.partition != Partition::Train || !rec.label) continue;
      if (!table->contains(id))
        missing += std::string(missing.empty() ? "" : ", ") + std::string(to_string(group)) + ":" + id;
    }
  }
  if (!missing.empty()) throw DataError("base tables lack training rows: " + missing);
}

void compute_filter_results(Cohort& cohort, FilterKind kind, int workers) {
  std::vector<ComplexRecord*> todo;
  for (auto& [id, rec] : cohort.records)
    if (rec.pose_sets.contains(ScoringFunction::Smina) &&
        rec.pose_sets.contains(ScoringFunction::Vinardo))
      todo.push_back(&rec);
  std::vector<FilterResult> results(todo.size());
  parallel_for(todo.size(), workers, [&](std::size_t i) {
    const auto& rec = *todo[i];
    const auto& smina = rec.pose_sets.at(ScoringFunction::Smina);
    const auto& vinardo = rec.pose_sets.at(ScoringFunction::Vinardo);
    if (kind == FilterKind::Consensus) {
      results[i] = consensus_filter_result(smina, vinardo);
    } else {
      if (!rec.experimental_pose)
        throw DataError("no experimental structure for " + smina.complex_id);
      results[i] = experimental_filter_result(smina, vinardo, *rec.experimental_pose);
    }
  });
  for (std::size_t i = 0; i < todo.size(); ++i) todo[i]->filter_results[kind] = results[i];
}

Cohort apply_rmsd_cutoff(const Cohort& cohort, const RmsdFilterMode& mode) {
  const double cutoff = cutoff_value(mode.cutoff);
  Cohort out;
  out.base_tables = cohort.base_tables;
  for (const auto& [id, rec] : cohort.records) {
    if (rec.partition == Partition::Train) {
      const auto it = rec.filter_results.find(mode.kind);
      if (it == rec.filter_results.end())
        throw DataError("TRAIN record " + id + " has no " + std::string(to_string(mode.kind)) +
                        " filter result");
      if (!(it->second.rmsd < cutoff)) continue;
    }
    out.records.emplace(id, rec);
  }
  return out;
}

}  // namespace affistack
