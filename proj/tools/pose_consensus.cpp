// pose_consensus: select-pairs | run | synth
//
// Exit codes: 0 success, 1 internal error, 2 empty selection, 3 backend failure.

#include <iostream>
#include <sstream>

#include <CLI11.hpp>

#include "pose_consensus/pose_consensus.hpp"

namespace pc = pose_consensus;

namespace {

std::vector<std::string> split(const std::string& s, char sep) {
  std::vector<std::string> out;
  std::stringstream ss(s);
  std::string item;
  while (std::getline(ss, item, sep)) {
    if (!item.empty()) out.push_back(item);
  }
  return out;
}

std::vector<double> parse_edges(const std::string& s) {
  std::vector<double> edges;
  for (const auto& e : split(s, ',')) edges.push_back(std::stod(e));
  return edges;
}

std::vector<pc::Variant> parse_variants(const std::string& s) {
  std::vector<pc::Variant> out;
  for (const auto& name : split(s, ',')) {
    const auto v = pc::parse_variant(name);
    if (!v) throw pc::Error("unknown variant '" + name + "'");
    out.push_back(*v);
  }
  return out;
}

std::vector<std::pair<pc::VideoQuality, int>> parse_mixture(const std::string& s) {
  std::vector<std::pair<pc::VideoQuality, int>> out;
  for (const auto& item : split(s, ',')) {
    const auto colon = item.find(':');
    if (colon == std::string::npos) throw pc::Error("mixture entries look like quality:count, got '" + item + "'");
    const int n = std::stoi(item.substr(colon + 1));
    if (n < 0) throw pc::Error("mixture count must be non-negative");
    out.emplace_back(pc::parse_quality(item.substr(0, colon)), n);
  }
  return out;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"video-consensus relative pose selection"};
  app.require_subcommand(1);

  // select-pairs
  std::string sel_manifest, sel_out;
  double sel_min = 0.0, sel_max = 180.0;
  std::size_t sel_count = std::numeric_limits<std::size_t>::max();
  std::uint64_t sel_seed = 0;
  auto* sel = app.add_subcommand("select-pairs", "sample pairs within a delta-yaw band");
  sel->add_option("--manifest", sel_manifest)->required();
  sel->add_option("--yaw-min", sel_min);
  sel->add_option("--yaw-max", sel_max);
  sel->add_option("--count", sel_count);
  sel->add_option("--seed", sel_seed);
  sel->add_option("--out", sel_out, "pair-list file (default stdout)");

  // run
  pc::RunConfig cfg;
  std::string score_mode = "total", variants = "pair_only,medoid,average,oracle", buckets;
  std::optional<double> run_min, run_max;
  std::optional<std::size_t> run_count;
  double timeout_s = 300.0;
  bool no_uniform = false;
  auto* run = app.add_subcommand("run", "estimate, score, select and evaluate");
  run->add_option("--manifest", cfg.manifest_path)->required();
  run->add_option("--registry", cfg.registry_path)->required();
  run->add_option("--backend", cfg.backend_spec, "synthetic:<scenario> | process:<command> | echo")->required();
  run->add_option("--cache-dir", cfg.cache_dir, "defaults to $POSE_CONSENSUS_CACHE");
  run->add_option("--pairs", cfg.pairs_path, "pair-list file");
  run->add_option("--k", cfg.scoring.plan.k);
  run->add_option("--m-random", cfg.scoring.plan.m_random);
  run->add_flag("--no-uniform", no_uniform);
  run->add_option("--seed", cfg.scoring.plan.seed);
  run->add_option("--score-mode", score_mode)->check(CLI::IsMember({"total", "med-only", "bias-only"}));
  run->add_option("--variants", variants, "comma-separated subset of pair_only,medoid,average,oracle");
  run->add_flag("--rotation-only", cfg.rotation_only);
  run->add_option("--yaw-min", run_min);
  run->add_option("--yaw-max", run_max);
  run->add_option("--count", run_count);
  run->add_option("--buckets", buckets, "comma-separated yaw bucket edges in degrees");
  run->add_option("--out", cfg.out_dir);
  run->add_option("--jobs", cfg.jobs)->check(CLI::PositiveNumber);
  run->add_option("--timeout", timeout_s, "seconds per backend response")->check(CLI::PositiveNumber);

  // synth
  pc::SynthParams prm;
  std::string synth_out = "synthetic";
  std::string mixture = "consistent:1,inconsistent:2,degenerate_wrong:1";
  auto* synth = app.add_subcommand("synth", "write a synthetic scenario, manifest and registry");
  synth->add_option("--out", synth_out);
  synth->add_option("--pairs", prm.pairs);
  synth->add_option("--seed", prm.seed);
  synth->add_option("--mixture", mixture, "quality:count list");
  synth->add_option("--frames", prm.frames);
  synth->add_option("--yaw-min", prm.yaw_min_deg);
  synth->add_option("--yaw-max", prm.yaw_max_deg);
  synth->add_option("--sigma-consistent", prm.sigma_consistent_deg, "degrees");
  synth->add_option("--sigma-inconsistent", prm.sigma_inconsistent_deg, "degrees");
  synth->add_option("--sigma-degenerate", prm.sigma_degenerate_deg, "degrees");
  synth->add_option("--sigma-pair", prm.sigma_pair_deg, "degrees");
  synth->add_option("--offset", prm.offset_deg, "degenerate_wrong yaw offset in degrees");
  synth->add_option("--translation-scale", prm.translation_scale);

  CLI11_PARSE(app, argc, argv);

  try {
    if (sel->parsed()) {
      const auto manifest = pc::load_manifest(sel_manifest);
      const auto ids = pc::select_pairs(manifest, sel_min, sel_max, sel_count, sel_seed);
      if (sel_out.empty()) {
        for (const auto& id : ids) std::cout << id << '\n';
      } else {
        pc::write_pair_list(sel_out, ids);
      }
    } else if (run->parsed()) {
      cfg.scoring.plan.include_uniform = !no_uniform;
      cfg.scoring.score_mode = *pc::parse_score_mode(score_mode);
      cfg.scoring.rotation_only = cfg.rotation_only;
      cfg.variants = parse_variants(variants);
      if (!buckets.empty()) cfg.bucket_edges_deg = parse_edges(buckets);
      if (run_min || run_max || run_count) {
        cfg.yaw_range = {run_min.value_or(0.0), run_max.value_or(180.0)};
        if (run_count) cfg.count = *run_count;
        cfg.select_seed = cfg.scoring.plan.seed;
      }
      cfg.timeout = std::chrono::milliseconds(static_cast<long long>(timeout_s * 1000.0));
      const pc::RunStats stats = pc::run_command(cfg);
      std::cerr << "pairs: " << stats.pairs << ", requests: " << stats.requests << ", backend calls: " << stats.backend_calls
                << ", cache hits: " << stats.cache_hits << ", cache misses: " << stats.cache_misses << "\n";
    } else if (synth->parsed()) {
      prm.mixture = parse_mixture(mixture);
      pc::write_synthetic(pc::generate_synthetic(prm), synth_out);
    }
  } catch (const pc::EmptySelection& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const pc::BackendUnavailable& e) {
    std::cerr << "backend failure: " << e.what() << "\n";
    return 3;
  } catch (const pc::BackendTimeout& e) {
    std::cerr << "backend failure: " << e.what() << "\n";
    return 3;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
