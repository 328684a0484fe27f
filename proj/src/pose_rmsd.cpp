#include "affistack/pose_rmsd.hpp"

#include <algorithm>
#include <cmath>
#include <tuple>

#include "affistack/text.hpp"

namespace affistack {

double asymmetric_rmsd(const Molecule& a, const Molecule& b) {
  return asymmetric_rmsd(a.heavy_positions(), a.heavy_elements(), b.heavy_positions(),
                         b.heavy_elements());
}

double symmetric_rmsd(const Molecule& a, const Molecule& b) {
  return std::max(asymmetric_rmsd(a, b), asymmetric_rmsd(b, a));
}

double cutoff_value(RmsdCutoff c) {
  switch (c) {
    case RmsdCutoff::Unfiltered: return 101.0;
    case RmsdCutoff::DropSentinel: return 100.0;
    case RmsdCutoff::Strict: return 3.0;
  }
  return 101.0;
}

std::string cutoff_label(RmsdCutoff c) {
  switch (c) {
    case RmsdCutoff::Unfiltered: return "101.0";
    case RmsdCutoff::DropSentinel: return "100.0";
    case RmsdCutoff::Strict: return "3.0";
  }
  return "101.0";
}

RmsdCutoff cutoff_from_value(double value) {
  for (auto c : {RmsdCutoff::Unfiltered, RmsdCutoff::DropSentinel, RmsdCutoff::Strict})
    if (cutoff_value(c) == value) return c;
  throw ConfigError("RMSD cutoff must be 101, 100 or 3 (got " + format_double(value) + ")");
}

std::string_view to_string(FilterKind k) {
  return k == FilterKind::Consensus ? "CONSENSUS" : "EXPERIMENTAL";
}

FilterKind filter_kind_from_string(std::string_view s) {
  if (s == "CONSENSUS" || s == "VvS") return FilterKind::Consensus;
  if (s == "EXPERIMENTAL" || s == "RelExpt") return FilterKind::Experimental;
  throw ConfigError("unknown RMSD filter mode '" + std::string(s) + "'");
}

std::string RmsdFilterMode::tag() const {
  return kind == FilterKind::Consensus ? "VvS" : "RelExpt";
}

namespace {

SelectedPose fallback_pose(const PoseSet& poses) {
  SelectedPose s;
  s.complex_id = poses.complex_id;
  s.scoring_function = poses.scoring_function;
  s.chosen_rank = 0;
  s.energy = poses.poses.empty() ? 0.0 : poses.poses.front().energy;
  s.rmsd = kSentinelRmsd;
  return s;
}

void require_poses(const PoseSet& poses) {
  if (poses.poses.empty() && !poses.failed)
    throw DataError("pose set for " + poses.complex_id + " (" +
                    std::string(to_string(poses.scoring_function)) + ") is empty");
}

}  // namespace

SelectedPose select_experimental(const PoseSet& poses, std::span<const double> rmsds,
                                 double cutoff) {
  require_poses(poses);
  if (poses.failed) return fallback_pose(poses);
  if (rmsds.size() != poses.poses.size())
    throw DataError("select_experimental: one RMSD per pose required");
  std::optional<std::size_t> best;
  for (std::size_t i = 0; i < poses.poses.size(); ++i) {
    if (!(rmsds[i] < cutoff)) continue;
    // Strict comparison keeps the lower rank on energy ties.
    if (!best || poses.poses[i].energy < poses.poses[*best].energy) best = i;
  }
  if (!best) return fallback_pose(poses);
  const auto& p = poses.poses[*best];
  return SelectedPose{poses.complex_id, poses.scoring_function, p.rank, p.energy, rmsds[*best]};
}

SelectedPose experimental_filter(const PoseSet& poses, const Molecule& experimental,
                                 double cutoff) {
  require_poses(poses);
  if (poses.failed) return fallback_pose(poses);
  std::vector<double> rmsds;
  rmsds.reserve(poses.poses.size());
  for (const auto& p : poses.poses) rmsds.push_back(symmetric_rmsd(p.molecule, experimental));
  return select_experimental(poses, rmsds, cutoff);
}

ConsensusChoice select_consensus_pair(const Eigen::MatrixXd& pair_rmsd, double cutoff) {
  if (pair_rmsd.size() == 0) throw DataError("select_consensus_pair: empty RMSD matrix");
  ConsensusChoice best;
  bool found = false;
  auto key = [](const ConsensusChoice& c) {
    return std::make_tuple(c.smina_rank + c.vinardo_rank, c.pair_rmsd, c.smina_rank);
  };
  for (Eigen::Index i = 0; i < pair_rmsd.rows(); ++i) {
    for (Eigen::Index j = 0; j < pair_rmsd.cols(); ++j) {
      if (!(pair_rmsd(i, j) < cutoff)) continue;
      const ConsensusChoice c{static_cast<int>(i), static_cast<int>(j), pair_rmsd(i, j)};
      if (!found || key(c) < key(best)) {
        best = c;
        found = true;
      }
    }
  }
  if (!found) return ConsensusChoice{0, 0, kSentinelRmsd};
  return best;
}

ConsensusResult consensus_filter(const PoseSet& smina, const PoseSet& vinardo, double cutoff) {
  if (smina.complex_id != vinardo.complex_id)
    throw DataError("consensus_filter: complex ids differ (" + smina.complex_id + " vs " +
                    vinardo.complex_id + ")");
  require_poses(smina);
  require_poses(vinardo);
  ConsensusResult result;
  if (smina.failed || vinardo.failed) {
    result.smina = fallback_pose(smina);
    result.vinardo = fallback_pose(vinardo);
    return result;
  }
  Eigen::MatrixXd rmsd(static_cast<Eigen::Index>(smina.poses.size()),
                       static_cast<Eigen::Index>(vinardo.poses.size()));
  for (Eigen::Index i = 0; i < rmsd.rows(); ++i)
    for (Eigen::Index j = 0; j < rmsd.cols(); ++j)
      rmsd(i, j) = symmetric_rmsd(smina.poses[static_cast<std::size_t>(i)].molecule,
                                  vinardo.poses[static_cast<std::size_t>(j)].molecule);
  const auto choice = select_consensus_pair(rmsd, cutoff);
  const auto& sp = smina.poses[static_cast<std::size_t>(choice.smina_rank)];
  const auto& vp = vinardo.poses[static_cast<std::size_t>(choice.vinardo_rank)];
  result.pair_rmsd = choice.pair_rmsd;
  result.smina = SelectedPose{smina.complex_id, ScoringFunction::Smina, sp.rank, sp.energy,
                              choice.pair_rmsd};
  result.vinardo = SelectedPose{vinardo.complex_id, ScoringFunction::Vinardo, vp.rank, vp.energy,
                                choice.pair_rmsd};
  return result;
}

FilterResult experimental_filter_result(const PoseSet& smina, const PoseSet& vinardo,
                                        const Molecule& experimental, double cutoff) {
  FilterResult r;
  r.kind = FilterKind::Experimental;
  r.smina = experimental_filter(smina, experimental, cutoff);
  r.vinardo = experimental_filter(vinardo, experimental, cutoff);
  r.rmsd = std::max(r.smina.rmsd, r.vinardo.rmsd);
  return r;
}

FilterResult consensus_filter_result(const PoseSet& smina, const PoseSet& vinardo,
                                     double cutoff) {
  const auto c = consensus_filter(smina, vinardo, cutoff);
  return FilterResult{FilterKind::Consensus, c.smina, c.vinardo, c.pair_rmsd};
}

std::string write_filter_table(std::span<const FilterResult> results, RmsdCutoff cutoff) {
  std::string out =
      "complex_id\tmode\tcutoff\tsmina_rank\tsmina_energy\tvinardo_rank\tvinardo_energy\trmsd\n";
  for (const auto& r : results) {
    out += r.smina.complex_id + '\t';
    out += to_string(r.kind);
    out += '\t' + cutoff_label(cutoff) + '\t' + std::to_string(r.smina.chosen_rank) + '\t' +
           format_double(r.smina.energy) + '\t' + std::to_string(r.vinardo.chosen_rank) + '\t' +
           format_double(r.vinardo.energy) + '\t' + format_double(r.rmsd) + '\n';
  }
  return out;
}

std::vector<FilterResult> parse_filter_table(std::string_view text) {
  const auto lines = split_lines(text);
  if (lines.empty() ||
      lines[0] !=
          "complex_id\tmode\tcutoff\tsmina_rank\tsmina_energy\tvinardo_rank\tvinardo_energy\trmsd")
    throw ParseError("filter table: unexpected header");
  std::vector<FilterResult> out;
  for (std::size_t i = 1; i < lines.size(); ++i) {
    if (trim(lines[i]).empty()) continue;
    const auto c = split(lines[i], '\t');
    const auto where = "filter table, row " + std::to_string(i) + ": ";
    if (c.size() != 8) throw ParseError(where + "expected 8 cells");
    FilterResult r;
    try {
      r.kind = filter_kind_from_string(c[1]);
    } catch (const ConfigError& e) {
      throw ParseError(where + e.what());
    }
    long long sr = 0;
    long long vr = 0;
    double cut = 0;
    if (!parse_double(c[2], cut) || !parse_int(c[3], sr) || !parse_double(c[4], r.smina.energy) ||
        !parse_int(c[5], vr) || !parse_double(c[6], r.vinardo.energy) ||
        !parse_double(c[7], r.rmsd) || r.rmsd < 0)
      throw ParseError(where + "malformed numeric cell");
    const std::string id(c[0]);
    r.smina.complex_id = id;
    r.smina.scoring_function = ScoringFunction::Smina;
    r.smina.chosen_rank = static_cast<int>(sr);
    r.vinardo.complex_id = id;
    r.vinardo.scoring_function = ScoringFunction::Vinardo;
    r.vinardo.chosen_rank = static_cast<int>(vr);
    r.smina.rmsd = r.rmsd;
    r.vinardo.rmsd = r.rmsd;
    out.push_back(std::move(r));
  }
  return out;
}

std::string filter_table_filename(const RmsdFilterMode& mode) {
  return "scores_" + mode.tag() + "_" + cutoff_label(mode.cutoff) + ".tsv";
}

}  // namespace affistack
