#pragma once

// End-to-end driver: estimate every subset of every video of every pair,
// score the videos, form the pair_only / medoid / average / oracle results,
// and evaluate them against ground truth.

#include <atomic>
#include <cstdlib>
#include <functional>
#include <limits>
#include <iostream>
#include <memory>
#include <mutex>
#include <thread>

#include "pose_consensus/benchmark.hpp"
#include "pose_consensus/consensus.hpp"
#include "pose_consensus/estimator.hpp"
#include "pose_consensus/process_backend.hpp"
#include "pose_consensus/report.hpp"
#include "pose_consensus/sampling.hpp"
#include "pose_consensus/synthetic.hpp"

namespace pose_consensus {

inline const std::vector<Variant>& all_variants() {
  static const std::vector<Variant> kAll{Variant::pair_only, Variant::medoid, Variant::average, Variant::oracle};
  return kAll;
}

struct ScoringOptions {
  SamplingPlan plan;
  ScoreMode score_mode = ScoreMode::total;
  bool rotation_only = false;  // drop the translation term when scoring
};

struct PairOutcome {
  std::string pair_id;
  std::optional<RelativePose> pair_only_pose;
  std::vector<std::string> video_ids;
  std::vector<std::vector<EstimateSample>> video_samples;  // parallel to video_ids
  std::vector<VideoScore> scores;                          // eligible videos only, registry order
  std::map<Variant, ConsensusResult> results;
  bool medoid_fell_back = false;
};

using EstimateFn = std::function<Estimate(const EstimatorRequest&)>;

inline EstimatorRequest pair_only_request(const PairRecord& pair) {
  return {pair.pair_id + "/pair", {pair.image_a, pair.image_b}};
}

inline EstimatorRequest subset_request(const PairRecord& pair, const VideoRecord& video, const FrameSubset& subset,
                                       std::size_t ordinal) {
  EstimatorRequest req{pair.pair_id + "/" + video.video_id + "/" + std::to_string(ordinal),
                       {pair.image_a, pair.image_b}};
  for (const int idx : subset.interior_indices) req.frames.push_back(video.frame(idx));
  return req;
}

namespace detail {

inline void warn(const std::string& msg) { std::cerr << "warning: " << msg << "\n"; }

// Malformed or failed estimates become failed samples; transport errors
// (BackendUnavailable, BackendTimeout) propagate.
inline std::optional<RelativePose> try_estimate(const EstimateFn& est, const EstimatorRequest& req) {
  try {
    Estimate e = est(req);
    if (!e.pose) warn("estimator failed on " + req.request_id);
    return e.pose;
  } catch (const MalformedResponse& e) {
    warn("malformed response for " + req.request_id + ": " + e.what());
    return std::nullopt;
  }
}

}  // namespace detail

// Runs estimation and consensus for one pair. Failure policy: failed
// estimates are dropped; videos with fewer than two usable estimates are
// not scored; when no video is scored the medoid variant falls back to the
// pair-only pose; when the pair-only estimate itself failed, scoring uses
// D_med alone and the pair-only pose is taken as identity.
inline PairOutcome process_pair(const PairRecord& pair, const std::vector<VideoRecord>& videos,
                                const ScoringOptions& opts, const EstimateFn& est, bool eval_rotation_only) {
  PairOutcome out;
  out.pair_id = pair.pair_id;
  out.pair_only_pose = detail::try_estimate(est, pair_only_request(pair));

  for (const auto& video : videos) {
    out.video_ids.push_back(video.video_id);
    auto& samples = out.video_samples.emplace_back();
    std::vector<FrameSubset> subsets;
    try {
      subsets = build_plan(pair.pair_id, video, opts.plan);
    } catch (const VideoTooShort& e) {
      detail::warn(pair.pair_id + "/" + video.video_id + ": " + e.what());
      continue;
    }
    for (std::size_t o = 0; o < subsets.size(); ++o) {
      EstimateSample s;
      s.pair_id = pair.pair_id;
      s.video_id = video.video_id;
      s.subset = subsets[o];
      s.pose = detail::try_estimate(est, subset_request(pair, video, subsets[o], o));
      s.status = s.pose ? SampleStatus::ok : SampleStatus::estimator_failed;
      samples.push_back(std::move(s));
    }
  }

  ScoreMode mode = opts.score_mode;
  if (!out.pair_only_pose && mode != ScoreMode::med_only) {
    detail::warn(pair.pair_id + ": no pair-only estimate, scoring by medoid distance alone");
    mode = ScoreMode::med_only;
  }
  for (const auto& samples : out.video_samples) {
    const auto usable = std::count_if(samples.begin(), samples.end(), [](const auto& s) { return s.ok(); });
    if (usable < 2) continue;
    out.scores.push_back(score_video(samples, out.pair_only_pose, mode, opts.rotation_only));
  }

  const RelativePose pair_pose = out.pair_only_pose.value_or(RelativePose::identity());

  ConsensusResult pair_only;
  pair_only.pair_id = pair.pair_id;
  pair_only.variant = Variant::pair_only;
  pair_only.pose = pair_pose;
  out.results[Variant::pair_only] = pair_only;

  ConsensusResult medoid_result;
  if (!out.scores.empty()) {
    medoid_result = select_best(out.scores);
  } else {
    out.medoid_fell_back = true;
    medoid_result.pose = pair_pose;
  }
  medoid_result.pair_id = pair.pair_id;
  out.results[Variant::medoid] = medoid_result;

  std::vector<RelativePose> all_ok;
  std::vector<EstimateSample> candidates;
  for (const auto& samples : out.video_samples) {
    for (const auto& s : samples) {
      if (!s.ok()) continue;
      all_ok.push_back(*s.pose);
      candidates.push_back(s);
    }
  }
  ConsensusResult average;
  average.pair_id = pair.pair_id;
  average.variant = Variant::average;
  average.pose = all_ok.empty() ? pair_pose : average_pose(all_ok).pose;
  out.results[Variant::average] = average;

  // The medoid output is always among the oracle's candidates, so the oracle
  // is never worse than the medoid variant, including after a fallback.
  EstimateSample medoid_candidate;
  medoid_candidate.pair_id = pair.pair_id;
  medoid_candidate.video_id = medoid_result.selected_video_id.value_or(std::string(kPairOnlyVideo));
  medoid_candidate.status = SampleStatus::ok;
  medoid_candidate.pose = medoid_result.pose;
  candidates.push_back(medoid_candidate);
  ConsensusResult oracle = oracle_select(candidates, pair.ground_truth(), eval_rotation_only);
  oracle.pair_id = pair.pair_id;
  out.results[Variant::oracle] = oracle;
  return out;
}

using BackendFactory = std::function<std::unique_ptr<EstimatorBackend>()>;

struct RunStats {
  std::size_t pairs = 0;
  std::size_t requests = 0;  // estimates asked for, cached or not
  std::size_t backend_calls = 0;
  std::size_t cache_hits = 0;
  std::size_t cache_misses = 0;
};

// Processes `pair_ids` with `jobs` workers, each owning one backend from
// `factory`. Output order follows `pair_ids` regardless of scheduling.
inline std::vector<PairOutcome> run_pairs(const DatasetManifest& manifest, const VideoRegistry& registry,
                                          const std::vector<std::string>& pair_ids, const ScoringOptions& opts,
                                          const BackendFactory& factory, ResultCache* cache, bool eval_rotation_only,
                                          int jobs = 1, RunStats* stats = nullptr) {
  std::vector<PairOutcome> outcomes(pair_ids.size());
  std::vector<const PairRecord*> records;
  for (const auto& id : pair_ids) {
    const PairRecord* p = manifest.find(id);
    if (p == nullptr) throw InvalidManifest("pair " + id + " is not in the manifest");
    records.push_back(p);
  }

  std::mutex mu;
  std::size_t next = 0;
  std::size_t calls = 0;
  std::atomic<std::size_t> requests{0};
  std::exception_ptr failure;
  auto worker = [&] {
    std::unique_ptr<EstimatorBackend> backend;
    try {
      backend = factory();
      const EstimateFn est = [&](const EstimatorRequest& req) {
        requests.fetch_add(1);
        return cache ? cached_estimate(*cache, *backend, req) : estimate(*backend, req);
      };
      for (;;) {
        std::size_t i;
        {
          std::lock_guard lock(mu);
          if (next >= records.size() || failure) break;
          i = next++;
        }
        const PairRecord& pair = *records[i];
        outcomes[i] = process_pair(pair, registry.for_pair(pair.pair_id), opts, est,
                                   eval_rotation_only || pair.rotation_only_eval);
      }
    } catch (...) {
      std::lock_guard lock(mu);
      if (!failure) failure = std::current_exception();
    }
    std::lock_guard lock(mu);
    if (backend) calls += backend->calls();
  };

  const int width = std::max(1, std::min<int>(jobs, static_cast<int>(std::max<std::size_t>(records.size(), 1))));
  if (width == 1) {
    worker();
  } else {
    std::vector<std::thread> threads;
    for (int t = 0; t < width; ++t) threads.emplace_back(worker);
    for (auto& t : threads) t.join();
  }
  if (failure) std::rethrow_exception(failure);
  if (stats) {
    stats->pairs = records.size();
    stats->requests = requests.load();
    stats->backend_calls = calls;
    if (cache) {
      stats->cache_hits = cache->hits();
      stats->cache_misses = cache->misses();
    }
  }
  return outcomes;
}

inline std::vector<ErrorRow> evaluate(const std::vector<PairOutcome>& outcomes, const DatasetManifest& manifest,
                                      const std::vector<Variant>& variants, bool rotation_only) {
  std::vector<ErrorRow> rows;
  for (const auto& o : outcomes) {
    const PairRecord* pair = manifest.find(o.pair_id);
    const RelativePose gt = pair->ground_truth();
    const bool rot_only = rotation_only || pair->rotation_only_eval;
    for (const Variant v : variants) {
      const auto it = o.results.find(v);
      if (it == o.results.end()) continue;
      const PairErrors e = pair_errors(it->second, gt, rot_only);
      rows.push_back({o.pair_id, v, e.rot_err_deg, e.trans_err_deg, it->second.selected_video_id});
    }
  }
  return rows;
}

inline void write_scores_csv(const std::filesystem::path& path, const std::vector<PairOutcome>& outcomes) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot write " + path.string());
  out << "pair_id,video_id,usable_samples,d_med,d_bias,d_total,medoid_index,selected\n";
  for (const auto& o : outcomes) {
    const auto& selected = o.results.at(Variant::medoid).selected_video_id;
    for (std::size_t v = 0; v < o.video_ids.size(); ++v) {
      const auto& samples = o.video_samples[v];
      const auto usable = std::count_if(samples.begin(), samples.end(), [](const auto& s) { return s.ok(); });
      const VideoScore* score = nullptr;
      for (const auto& s : o.scores) {
        if (s.video_id == o.video_ids[v]) score = &s;
      }
      out << detail::csv_field(o.pair_id) << ',' << detail::csv_field(o.video_ids[v]) << ',' << usable << ',';
      if (score) {
        out << detail::format_double(score->d_med) << ',' << detail::format_double(score->d_bias) << ','
            << detail::format_double(score->d_total) << ',' << score->medoid_index << ',';
      } else {
        out << ",,,,";
      }
      out << (selected && *selected == o.video_ids[v] ? 1 : 0) << '\n';
    }
  }
  if (!out.flush()) throw IoError("cannot write " + path.string());
}

struct RunConfig {
  std::string manifest_path;
  std::string registry_path;
  std::string backend_spec;  // synthetic:<scenario> | process:<command> | echo
  std::string cache_dir;     // empty: $POSE_CONSENSUS_CACHE, else no cache
  std::string pairs_path;    // optional pair-list file; empty = every manifest pair
  std::optional<std::pair<double, double>> yaw_range;  // select pairs by delta yaw first
  std::size_t count = std::numeric_limits<std::size_t>::max();
  std::uint64_t select_seed = 0;
  ScoringOptions scoring;
  std::vector<Variant> variants = all_variants();
  bool rotation_only = false;
  std::vector<double> bucket_edges_deg;
  std::string out_dir = "out";
  int jobs = 1;
  std::chrono::milliseconds timeout = kDefaultBackendTimeout;
};

inline BackendFactory make_backend_factory(const std::string& spec, std::chrono::milliseconds timeout) {
  if (spec == "echo") return [] { return std::make_unique<EchoBackend>(); };
  if (spec.rfind("synthetic:", 0) == 0) {
    auto set = std::make_shared<ScenarioSet>(scenario_from_json(json_io::read_file(spec.substr(10))));
    return [set] { return std::make_unique<SyntheticBackend>(*set); };
  }
  if (spec.rfind("process:", 0) == 0) {
    const std::string cmd = spec.substr(8);
    return [cmd, timeout] { return std::make_unique<ProcessBackend>(cmd, timeout); };
  }
  throw Error("unknown backend spec '" + spec + "' (expected synthetic:<file>, process:<command> or echo)");
}

inline std::vector<std::string> read_pair_list(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open " + path);
  std::vector<std::string> ids;
  std::string line;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (!line.empty()) ids.push_back(line);
  }
  return ids;
}

inline void write_pair_list(const std::string& path, const std::vector<std::string>& ids) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot write " + path);
  for (const auto& id : ids) out << id << '\n';
  if (!out.flush()) throw IoError("cannot write " + path);
}

// The `run` command: estimation, scoring, evaluation and report files.
inline RunStats run_command(const RunConfig& cfg) {
  cfg.scoring.plan.validate();
  if (cfg.variants.empty()) throw Error("at least one variant is required");
  const DatasetManifest manifest = load_manifest(cfg.manifest_path);
  const VideoRegistry registry = load_registry(cfg.registry_path);

  std::vector<std::string> ids;
  if (!cfg.pairs_path.empty()) {
    ids = read_pair_list(cfg.pairs_path);
  } else if (cfg.yaw_range) {
    ids = select_pairs(manifest, cfg.yaw_range->first, cfg.yaw_range->second, cfg.count, cfg.select_seed);
  } else {
    for (const auto& p : manifest.pairs) ids.push_back(p.pair_id);
  }
  std::sort(ids.begin(), ids.end());

  std::string cache_dir = cfg.cache_dir;
  if (cache_dir.empty()) {
    if (const char* env = std::getenv("POSE_CONSENSUS_CACHE")) cache_dir = env;
  }
  std::unique_ptr<ResultCache> cache;
  if (!cache_dir.empty()) cache = std::make_unique<ResultCache>(cache_dir);

  RunStats stats;
  const auto outcomes = run_pairs(manifest, registry, ids, cfg.scoring, make_backend_factory(cfg.backend_spec, cfg.timeout),
                                  cache.get(), cfg.rotation_only, cfg.jobs, &stats);

  const auto rows = evaluate(outcomes, manifest, all_variants(), cfg.rotation_only);
  const MetricsReport report = build_report(rows, yaw_table(manifest), cfg.bucket_edges_deg);
  emit_report(report, cfg.out_dir, cfg.variants);
  write_scores_csv(std::filesystem::path(cfg.out_dir) / "scores.csv", outcomes);
  return stats;
}

// ---------------------------------------------------------------------------
// Synthetic fixture generation

struct SynthParams {
  int pairs = 10;
  std::vector<std::pair<VideoQuality, int>> mixture{
      {VideoQuality::consistent, 1}, {VideoQuality::inconsistent, 2}, {VideoQuality::degenerate_wrong, 1}};
  double sigma_consistent_deg = 2.0;
  double sigma_inconsistent_deg = 25.0;
  double sigma_degenerate_deg = 0.5;
  double sigma_pair_deg = 8.0;
  double offset_deg = 60.0;  // degenerate_wrong rotation offset
  double yaw_min_deg = 50.0;
  double yaw_max_deg = 65.0;
  int frames = 25;
  std::uint64_t seed = 0;
  double translation_scale = 1.0;
  std::string dataset_name = "synthetic";
};

struct SynthFixture {
  ScenarioSet scenarios;
  DatasetManifest manifest;
  VideoRegistry registry;
};

// P pairs with ground-truth yaw change drawn uniformly in the requested band
// about world +Y, and one video per mixture slot. Every translation
// (camera poses, ground truth, offsets) is multiplied by translation_scale
// as the last step, so fixtures differing only in scale share all draws.
inline SynthFixture generate_synthetic(const SynthParams& prm) {
  if (prm.pairs < 0 || prm.frames < 2) throw Error("synth: pairs must be >= 0 and frames >= 2");
  if (prm.yaw_min_deg > prm.yaw_max_deg) throw Error("synth: yaw_min exceeds yaw_max");
  SynthFixture fx;
  fx.scenarios.seed = prm.seed;
  fx.manifest.name = prm.dataset_name;
  fx.manifest.up_axis = Eigen::Vector3d::UnitY();
  const Eigen::Vector3d up = Eigen::Vector3d::UnitY();
  const double s = prm.translation_scale;

  for (int i = 0; i < prm.pairs; ++i) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "pair_%04d", i);
    const std::string pair_id = buf;
    CounterRng rng(prm.seed, stream_key("synth-pair", pair_id));

    const double heading = 2.0 * kPi * rng.uniform();
    const double tilt = deg_to_rad(20.0 * rng.uniform() - 10.0);
    const double yaw = deg_to_rad(prm.yaw_min_deg + (prm.yaw_max_deg - prm.yaw_min_deg) * rng.uniform());
    const double sign = rng.uniform() < 0.5 ? -1.0 : 1.0;
    const Rotation cam_a = Rotation::about(up, heading) * Rotation::about(Eigen::Vector3d::UnitX(), tilt);
    const Rotation cam_b = Rotation::about(up, sign * yaw) * cam_a;  // camera-to-world
    const Eigen::Vector3d center_a(2.0 * rng.uniform() - 1.0, 2.0 * rng.uniform() - 1.0, 2.0 * rng.uniform() - 1.0);
    const Eigen::Vector3d center_b = center_a + (0.5 + rng.uniform()) * rng.unit_vector();

    Pose t_a{cam_a.inverse(), -(cam_a.inverse() * center_a)};
    Pose t_b{cam_b.inverse(), -(cam_b.inverse() * center_b)};
    SyntheticScenario sc;
    sc.pair_id = pair_id;
    sc.seed = prm.seed;
    sc.ground_truth = relative_pose(t_a, t_b);
    t_a.translation *= s;
    t_b.translation *= s;
    sc.ground_truth.translation *= s;
    sc.pair_noise = {deg_to_rad(prm.sigma_pair_deg), deg_to_rad(prm.sigma_pair_deg)};

    PairRecord rec{pair_id, virtual_anchor(pair_id, 'A'), virtual_anchor(pair_id, 'B'), t_a, t_b, false};
    fx.manifest.pairs.push_back(rec);

    auto& videos = fx.registry.videos[pair_id];
    int ordinal = 0;
    for (const auto& [quality, n] : prm.mixture) {
      for (int k = 0; k < n; ++k, ++ordinal) {
        SyntheticVideoSpec v;
        v.video_id = "v" + std::to_string(ordinal);
        v.quality = quality;
        double sigma = prm.sigma_consistent_deg;
        if (quality == VideoQuality::inconsistent) sigma = prm.sigma_inconsistent_deg;
        if (quality == VideoQuality::degenerate_wrong) {
          sigma = prm.sigma_degenerate_deg;
          v.center_offset.rotation = Rotation::about(up, deg_to_rad(prm.offset_deg));
        }
        v.noise = {deg_to_rad(sigma), deg_to_rad(sigma)};
        sc.videos.push_back(v);

        VideoRecord rec_v;
        rec_v.video_id = v.video_id;
        rec_v.generator = "synthetic";
        rec_v.prompt_id = "p" + std::to_string(ordinal % 2);
        rec_v.direction = (ordinal / 2) % 2 == 0 ? Direction::ab : Direction::ba;
        for (int f = 1; f <= prm.frames; ++f) rec_v.frames.push_back(virtual_frame(pair_id, v.video_id, f));
        videos.push_back(std::move(rec_v));
      }
    }
    sc.validate();
    fx.scenarios.pairs.emplace(pair_id, std::move(sc));
  }
  return fx;
}

inline void write_synthetic(const SynthFixture& fx, const std::filesystem::path& out_dir) {
  std::error_code ec;
  std::filesystem::create_directories(out_dir, ec);
  if (ec) throw IoError("cannot create " + out_dir.string());
  json_io::write_file((out_dir / "scenario.json").string(), scenario_to_json(fx.scenarios));
  json_io::write_file((out_dir / "manifest.json").string(), manifest_to_json(fx.manifest));
  json_io::write_file((out_dir / "registry.json").string(), registry_to_json(fx.registry));
}

}  // namespace pose_consensus
