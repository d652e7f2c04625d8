// Acceptance suite. Prints one PASS/FAIL line per criterion and exits
// nonzero when any criterion fails.

#include <chrono>
#include <cstdio>
#include <cstring>
#include <functional>
#include <random>

#include "pose_consensus/pipeline.hpp"
#include "test_support.hpp"

namespace pc = pose_consensus;
namespace fs = std::filesystem;
using Clock = std::chrono::steady_clock;

namespace {

struct Outcome {
  bool pass = true;
  std::string detail;
};

double seconds_since(Clock::time_point t0) { return std::chrono::duration<double>(Clock::now() - t0).count(); }

std::string fmt(const char* f, double a, double b = 0, double c = 0) {
  char buf[256];
  std::snprintf(buf, sizeof buf, f, a, b, c);
  return buf;
}

// ---------------------------------------------------------------------------

Outcome geometry_suite() {
  const auto t0 = Clock::now();
  std::mt19937_64 gen(1001);
  std::uniform_real_distribution<double> scale(1e-3, 1e3);
  std::size_t failures = 0;
  double worst_axis_angle = 0, worst_bi = 0, worst_compose = 0;
  for (int i = 0; i < 10000; ++i) {
    const pc::Rotation r1 = testing_support::random_rotation(gen);
    const pc::Rotation r2 = testing_support::random_rotation(gen);
    const pc::Rotation q = testing_support::random_rotation(gen);
    const double d = pc::dist_rot(r1, r2);
    const double oracle = std::abs(Eigen::AngleAxisd(Eigen::Matrix3d(r2.matrix() * r1.matrix().transpose())).angle());
    worst_axis_angle = std::max(worst_axis_angle, std::abs(d - oracle));
    worst_bi = std::max({worst_bi, std::abs(pc::dist_rot(r1 * q, r2 * q) - d), std::abs(pc::dist_rot(q * r1, q * r2) - d)});
    if (d != pc::dist_rot(r2, r1) || !(d >= 0.0 && d <= pc::kPi) || pc::dist_rot(r1, r1) != 0.0) ++failures;

    const Eigen::Vector3d t1 = testing_support::random_vector(gen), t2 = testing_support::random_vector(gen);
    const double dt = pc::dist_trans(t1, t2).rad;
    if (pc::dist_trans(scale(gen) * t1, t2).rad != dt || pc::dist_trans(-t1, t2).rad != dt ||
        pc::dist_trans(t1, 7.3 * t2).rad != dt || !(dt >= 0.0 && dt <= pc::kPi / 2)) {
      ++failures;
    }

    const pc::Pose a{r1, t1}, b{r2, t2};
    const Eigen::Matrix4d composed = pc::relative_pose(a, b).matrix() * a.matrix();
    worst_compose = std::max(worst_compose, (composed - b.matrix()).cwiseAbs().maxCoeff());
  }
  const double secs = seconds_since(t0);
  Outcome o;
  o.pass = failures == 0 && worst_axis_angle <= 1e-9 && worst_bi <= 1e-9 && worst_compose <= 1e-10 && secs < 5.0;
  o.detail = "10000 trials, exact-check failures " + std::to_string(failures) +
             fmt(", axis-angle max err %.2e, bi-invariance max err %.2e", worst_axis_angle, worst_bi) +
             fmt(", composition max err %.2e, %.2f s", worst_compose, secs);
  return o;
}

// ---------------------------------------------------------------------------

Outcome medoid_oracle() {
  const auto t0 = Clock::now();
  std::mt19937_64 gen(1002);
  std::size_t index_mismatch = 0;
  double worst = 0;
  for (int trial = 0; trial < 1000; ++trial) {
    const std::size_t m = 2 + gen() % 10;
    const bool rot_only = gen() % 4 == 0;
    std::vector<pc::RelativePose> s;
    for (std::size_t i = 0; i < m; ++i) {
      // Some lists carry duplicates so that ties are exercised.
      if (i > 0 && gen() % 5 == 0) {
        s.push_back(s[gen() % i]);
      } else {
        s.push_back({testing_support::random_rotation(gen), testing_support::random_vector(gen)});
      }
    }
    std::vector<std::vector<double>> d(m, std::vector<double>(m));
    for (std::size_t i = 0; i < m; ++i) {
      for (std::size_t j = 0; j < m; ++j) d[i][j] = pc::dist_pose(s[i], s[j], rot_only).total_rad;
    }
    std::size_t best = 0;
    double best_mean = std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < m; ++i) {
      double sum = 0;
      for (std::size_t j = 0; j < m; ++j) sum += i == j ? 0.0 : d[i][j];
      const double mean = sum / static_cast<double>(m - 1);
      if (mean < best_mean - 1e-13) {
        best_mean = mean;
        best = i;
      }
    }
    const auto got = pc::medoid(s, rot_only);
    if (got.index != best) ++index_mismatch;
    worst = std::max(worst, std::abs(got.d_med - best_mean));
  }
  const double secs = seconds_since(t0);
  Outcome o;
  o.pass = index_mismatch == 0 && worst <= 1e-12 && secs < 5.0;
  o.detail = "1000 instances, index mismatches " + std::to_string(index_mismatch) +
             fmt(", max |d_med diff| %.2e, %.2f s", worst, secs);
  return o;
}

// ---------------------------------------------------------------------------

struct RunResult {
  std::vector<pc::PairOutcome> outcomes;
  std::vector<pc::ErrorRow> rows;
  pc::RunStats stats;
};

RunResult run_in_memory(const pc::SynthFixture& fx, pc::ScoreMode mode) {
  pc::ScoringOptions opts;
  opts.score_mode = mode;
  std::vector<std::string> ids;
  for (const auto& p : fx.manifest.pairs) ids.push_back(p.pair_id);
  const pc::BackendFactory factory = [&] { return std::make_unique<pc::SyntheticBackend>(fx.scenarios); };
  RunResult r;
  r.outcomes = pc::run_pairs(fx.manifest, fx.registry, ids, opts, factory, nullptr, false, 1, &r.stats);
  r.rows = pc::evaluate(r.outcomes, fx.manifest, pc::all_variants(), false);
  return r;
}

bool same_bits(double a, double b) { return std::memcmp(&a, &b, sizeof a) == 0; }

// Rotations must match exactly; translations only in direction, since one
// side was scaled.
bool same_pose(const pc::RelativePose& a, const pc::RelativePose& b) {
  return a.rotation == b.rotation && pc::dist_trans(a.translation, b.translation).rad == 0.0;
}

Outcome scale_invariance() {
  const auto t0 = Clock::now();
  pc::SynthParams prm;
  prm.pairs = 50;
  prm.seed = 2024;
  const auto base = run_in_memory(pc::generate_synthetic(prm), pc::ScoreMode::total);
  prm.translation_scale = 7.3;
  const auto scaled = run_in_memory(pc::generate_synthetic(prm), pc::ScoreMode::total);

  std::size_t score_diffs = 0, selection_diffs = 0, error_diffs = 0, scores = 0;
  for (std::size_t i = 0; i < base.outcomes.size(); ++i) {
    const auto& a = base.outcomes[i];
    const auto& b = scaled.outcomes[i];
    if (a.scores.size() != b.scores.size()) {
      ++score_diffs;
      continue;
    }
    for (std::size_t v = 0; v < a.scores.size(); ++v) {
      ++scores;
      const auto &x = a.scores[v], &y = b.scores[v];
      if (x.video_id != y.video_id || !same_bits(x.d_med, y.d_med) || !same_bits(x.d_bias, y.d_bias) ||
          !same_bits(x.d_total, y.d_total) || x.medoid_index != y.medoid_index ||
          !same_pose(x.medoid_pose, y.medoid_pose)) {
        ++score_diffs;
      }
    }
    for (const auto v : pc::all_variants()) {
      if (a.results.at(v).selected_video_id != b.results.at(v).selected_video_id) ++selection_diffs;
    }
  }
  for (std::size_t i = 0; i < base.rows.size(); ++i) {
    const auto &x = base.rows[i], &y = scaled.rows[i];
    if (x.pair_id != y.pair_id || x.variant != y.variant || !same_bits(x.rot_err_deg, y.rot_err_deg) ||
        x.trans_err_deg.has_value() != y.trans_err_deg.has_value() ||
        (x.trans_err_deg && !same_bits(*x.trans_err_deg, *y.trans_err_deg))) {
      ++error_diffs;
    }
  }
  Outcome o;
  o.pass = score_diffs == 0 && selection_diffs == 0 && error_diffs == 0 && base.rows.size() == scaled.rows.size() &&
           scores == 200;
  o.detail = "50 pairs x7.3: " + std::to_string(scores) + " video scores, differing scores " +
             std::to_string(score_diffs) + ", selections " + std::to_string(selection_diffs) + ", error rows " +
             std::to_string(error_diffs) + fmt(", %.2f s", seconds_since(t0));
  return o;
}

// ---------------------------------------------------------------------------

std::vector<std::vector<pc::Aggregates>> g_run_aggregates;  // reused by the metrics criterion

double mre_of(const std::vector<pc::ErrorRow>& rows, pc::Variant v) {
  std::vector<pc::ErrorRow> sel;
  for (const auto& r : rows) {
    if (r.variant == v) sel.push_back(r);
  }
  const auto a = pc::aggregate(sel);
  g_run_aggregates.back().push_back(a);
  return a.mre;
}

Outcome synthetic_directional() {
  const auto t0 = Clock::now();
  int a_wins = 0, b_wins = 0, c_holds = 0, d_wins = 0;
  std::string per_seed;
  for (std::uint64_t seed = 1; seed <= 10; ++seed) {
    pc::SynthParams prm;
    prm.pairs = 200;
    prm.seed = seed;
    const auto fx = pc::generate_synthetic(prm);
    g_run_aggregates.emplace_back();
    const auto total = run_in_memory(fx, pc::ScoreMode::total);
    const auto med_only = run_in_memory(fx, pc::ScoreMode::med_only);
    const double pair_mre = mre_of(total.rows, pc::Variant::pair_only);
    const double medoid_mre = mre_of(total.rows, pc::Variant::medoid);
    const double avg_mre = mre_of(total.rows, pc::Variant::average);
    const double oracle_mre = mre_of(total.rows, pc::Variant::oracle);
    const double med_only_mre = mre_of(med_only.rows, pc::Variant::medoid);
    a_wins += medoid_mre < pair_mre;
    b_wins += medoid_mre < avg_mre;
    c_holds += oracle_mre <= medoid_mre;
    d_wins += medoid_mre < med_only_mre;
    if (seed == 1) {
      per_seed = fmt("seed 1 MRE: pair_only %.2f, medoid %.2f, average %.2f", pair_mre, medoid_mre, avg_mre) +
                 fmt(", oracle %.2f, med-only medoid %.2f", oracle_mre, med_only_mre);
    }
  }
  const double secs = seconds_since(t0);
  Outcome o;
  o.pass = a_wins >= 9 && b_wins >= 9 && c_holds == 10 && d_wins >= 8 && secs < 60.0;
  o.detail = "(a) " + std::to_string(a_wins) + "/10, (b) " + std::to_string(b_wins) + "/10, (c) " +
             std::to_string(c_holds) + "/10, (d) " + std::to_string(d_wins) + "/10; " + per_seed +
             fmt("; %.2f s", secs);
  return o;
}

// ---------------------------------------------------------------------------

bool curve_monotone(const pc::Aggregates& a) {
  if (a.curve.size() != 30) return false;
  for (std::size_t i = 1; i < a.curve.size(); ++i) {
    const auto &p = a.curve[i - 1], &q = a.curve[i];
    if (q.rot_acc < p.rot_acc || q.trans_acc < p.trans_acc || q.joint_acc < p.joint_acc) return false;
  }
  return a.r_acc[0] <= a.r_acc[1] && a.r_acc[1] <= a.r_acc[2];
}

Outcome metrics_suite() {
  const auto t0 = Clock::now();
  const double auc_a = pc::aggregate({{"x", pc::Variant::medoid, 10, 10, std::nullopt}}).auc30;
  const double auc_b = pc::aggregate({{"x", pc::Variant::medoid, 10, 40, std::nullopt}}).auc30;
  const bool fixtures = std::abs(auc_a - 200.0 / 3.0) <= 1e-9 && std::abs(auc_b) <= 1e-9;

  std::mt19937_64 gen(1005);
  std::uniform_real_distribution<double> err(0, 60);
  std::size_t mismatches = 0;
  std::size_t monotone_fail = 0, curves = 0;
  for (int trial = 0; trial < 1000; ++trial) {
    const std::size_t n = 1 + gen() % 50;
    std::vector<pc::ErrorRow> rows;
    for (std::size_t i = 0; i < n; ++i) {
      const double r = gen() % 3 == 0 ? std::floor(err(gen)) : err(gen);
      std::optional<double> t;
      if (gen() % 4 != 0) t = gen() % 3 == 0 ? std::floor(err(gen) / 2) : err(gen) / 2;
      rows.push_back({"p" + std::to_string(i), pc::Variant::medoid, r, t, std::nullopt});
    }
    // Reference straight from the definitions.
    double mre = 0, mte = 0, auc = 0;
    int nt = 0;
    for (const auto& x : rows) {
      mre += x.rot_err_deg;
      if (x.trans_err_deg) mte += *x.trans_err_deg, ++nt;
    }
    mre /= static_cast<double>(n);
    if (nt) mte /= nt;
    for (int tau = 1; tau <= 30; ++tau) {
      int c = 0;
      for (const auto& x : rows) c += (x.trans_err_deg ? std::max(x.rot_err_deg, *x.trans_err_deg) : x.rot_err_deg) < tau;
      auc += 100.0 * c / static_cast<double>(n) / 30.0;
    }
    const auto a = pc::aggregate(rows);
    bool ok = std::abs(a.mre - mre) <= 1e-9 && std::abs(a.auc30 - auc) <= 1e-9;
    if (nt) ok = ok && a.mte && std::abs(*a.mte - mte) <= 1e-9;
    const int th[3] = {5, 15, 30};
    for (std::size_t k = 0; k < 3; ++k) {
      int rc = 0, tc = 0;
      for (const auto& x : rows) {
        rc += x.rot_err_deg < th[k];
        tc += x.trans_err_deg && *x.trans_err_deg < th[k];
      }
      ok = ok && a.r_acc[k] == 100.0 * rc / static_cast<double>(n);
      if (nt) ok = ok && (*a.t_acc)[k] == 100.0 * tc / nt;
    }
    mismatches += !ok;
    ++curves;
    monotone_fail += !curve_monotone(a);
  }
  for (const auto& seed_runs : g_run_aggregates) {
    for (const auto& a : seed_runs) {
      ++curves;
      monotone_fail += !curve_monotone(a);
    }
  }
  Outcome o;
  o.pass = fixtures && mismatches == 0 && monotone_fail == 0;
  o.detail = fmt("AUC fixtures %.12f and %.12f", auc_a, auc_b) + ", brute-force mismatches " +
             std::to_string(mismatches) + "/1000, non-monotone curves " + std::to_string(monotone_fail) + "/" +
             std::to_string(curves) + fmt(", %.2f s", seconds_since(t0));
  return o;
}

// ---------------------------------------------------------------------------

std::map<std::string, std::string> read_dir(const fs::path& dir) {
  std::map<std::string, std::string> files;
  for (const auto& e : fs::directory_iterator(dir)) files[e.path().filename().string()] = testing_support::slurp(e.path());
  return files;
}

Outcome determinism() {
  const auto t0 = Clock::now();
  const auto dir = testing_support::temp_dir("acceptance_determinism");
  pc::SynthParams prm;
  prm.pairs = 20;
  prm.seed = 99;
  pc::write_synthetic(pc::generate_synthetic(prm), dir / "fx");

  pc::RunConfig cfg;
  cfg.manifest_path = (dir / "fx" / "manifest.json").string();
  cfg.registry_path = (dir / "fx" / "registry.json").string();
  cfg.backend_spec = "synthetic:" + (dir / "fx" / "scenario.json").string();
  cfg.bucket_edges_deg = {0, 50, 65, 180};

  cfg.cache_dir = (dir / "cache1").string();
  cfg.out_dir = (dir / "run1").string();
  const auto s1 = pc::run_command(cfg);
  cfg.cache_dir = (dir / "cache2").string();
  cfg.out_dir = (dir / "run2").string();
  const auto s2 = pc::run_command(cfg);
  cfg.out_dir = (dir / "run3").string();
  const auto s3 = pc::run_command(cfg);

  const auto r1 = read_dir(dir / "run1"), r2 = read_dir(dir / "run2"), r3 = read_dir(dir / "run3");
  const auto manifest = pc::load_manifest(cfg.manifest_path);
  std::vector<std::string> ids;
  for (const auto& p : manifest.pairs) ids.push_back(p.pair_id);
  const std::size_t expected_requests = 20 * (1 + 4 * 11);
  const std::size_t distinct =
      testing_support::distinct_requests(pc::load_registry(cfg.registry_path), ids, cfg.scoring.plan);
  const auto cold_ok = [&](const pc::RunStats& s) {
    return s.requests == expected_requests && s.backend_calls == distinct && s.cache_misses == distinct &&
           s.cache_hits + s.cache_misses == s.requests;
  };
  Outcome o;
  o.pass = r1 == r2 && r1 == r3 && r1.size() >= 6 && cold_ok(s1) && cold_ok(s2) && s3.backend_calls == 0 &&
           s3.cache_hits == expected_requests;
  o.detail = std::to_string(r1.size()) + " report files, cold runs identical: " + (r1 == r2 ? "yes" : "no") +
             ", warm identical: " + (r1 == r3 ? "yes" : "no") + ", requests " + std::to_string(s1.requests) +
             ", backend calls cold " + std::to_string(s1.backend_calls) + "/" + std::to_string(s2.backend_calls) +
             " of " + std::to_string(distinct) + " distinct, warm " +
             std::to_string(s3.backend_calls) + fmt(", %.2f s", seconds_since(t0));
  fs::remove_all(dir);
  return o;
}

}  // namespace

int main() {
  const std::vector<std::pair<std::string, std::function<Outcome()>>> criteria{
      {"geometry-suite", geometry_suite},
      {"medoid-oracle-equivalence", medoid_oracle},
      {"selection-scale-invariance", scale_invariance},
      {"synthetic-directional-reproduction", synthetic_directional},
      {"metrics-suite", metrics_suite},
      {"determinism-and-warm-cache", determinism},
  };
  int failed = 0;
  for (const auto& [name, fn] : criteria) {
    Outcome o;
    try {
      o = fn();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    failed += !o.pass;
    std::printf("%s %s: %s\n", o.pass ? "PASS" : "FAIL", name.c_str(), o.detail.c_str());
    std::fflush(stdout);
  }
  std::printf("%d/%zu criteria passed\n", static_cast<int>(criteria.size()) - failed, criteria.size());
  return failed == 0 ? 0 : 1;
}
