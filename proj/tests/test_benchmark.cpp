#include <gtest/gtest.h>

#include "pose_consensus/benchmark.hpp"
#include "pose_consensus/report.hpp"
#include "test_support.hpp"

namespace pc = pose_consensus;
namespace fs = std::filesystem;
using testing_support::random_pose;
using testing_support::rz_deg;
using testing_support::temp_dir;

namespace {

pc::ErrorRow row(const std::string& id, double rot, std::optional<double> trans,
                 pc::Variant v = pc::Variant::medoid) {
  return {id, v, rot, trans, std::nullopt};
}

// World-to-camera pose of a camera yawed by `deg` about +Y.
pc::Pose yawed(double deg) {
  return {pc::Rotation::about(Eigen::Vector3d::UnitY(), pc::deg_to_rad(deg)).inverse(), {0.5, 0, 0}};
}

pc::DatasetManifest manifest_with_yaws(const std::vector<double>& yaws) {
  pc::DatasetManifest m;
  m.name = "test";
  for (std::size_t i = 0; i < yaws.size(); ++i) {
    char id[16];
    std::snprintf(id, sizeof id, "p%03zu", i);
    m.pairs.push_back({id, std::string(id) + "_a.png", std::string(id) + "_b.png", yawed(0), yawed(yaws[i]), false});
  }
  return m;
}

// Straight re-derivation of the metric definitions.
struct Reference {
  double mre = 0, mte = 0, auc = 0;
  std::array<double, 3> racc{}, tacc{};
};

Reference reference(const std::vector<pc::ErrorRow>& rows) {
  Reference r;
  const double n = static_cast<double>(rows.size());
  double nt = 0;
  for (const auto& x : rows) {
    r.mre += x.rot_err_deg / n;
    if (x.trans_err_deg) {
      r.mte += *x.trans_err_deg;
      nt += 1;
    }
  }
  if (nt > 0) r.mte /= nt;
  const int th[3] = {5, 15, 30};
  for (int i = 0; i < 3; ++i) {
    int rc = 0, tc = 0;
    for (const auto& x : rows) {
      if (x.rot_err_deg < th[i]) ++rc;
      if (x.trans_err_deg && *x.trans_err_deg < th[i]) ++tc;
    }
    r.racc[static_cast<std::size_t>(i)] = 100.0 * rc / n;
    r.tacc[static_cast<std::size_t>(i)] = nt > 0 ? 100.0 * tc / nt : 0.0;
  }
  for (int tau = 1; tau <= 30; ++tau) {
    int c = 0;
    for (const auto& x : rows) {
      const double e = x.trans_err_deg ? std::max(x.rot_err_deg, *x.trans_err_deg) : x.rot_err_deg;
      if (e < tau) ++c;
    }
    r.auc += 100.0 * c / n / 30.0;
  }
  return r;
}

std::vector<pc::ErrorRow> random_rows(std::mt19937_64& gen, std::size_t n) {
  std::uniform_real_distribution<double> err(0.0, 60.0);
  std::vector<pc::ErrorRow> rows;
  for (std::size_t i = 0; i < n; ++i) {
    // Integral values exercise the strict threshold boundary.
    double r = gen() % 4 == 0 ? std::floor(err(gen)) : err(gen);
    std::optional<double> t;
    if (gen() % 5 != 0) t = gen() % 4 == 0 ? std::floor(err(gen) / 2) : err(gen) / 2;
    rows.push_back(row("p" + std::to_string(i), r, t));
  }
  return rows;
}

}  // namespace

TEST(Aggregate, AllZero) {
  const auto a = pc::aggregate({row("a", 0, 0), row("b", 0, 0)});
  EXPECT_EQ(a.mre, 0.0);
  EXPECT_EQ(*a.mte, 0.0);
  for (int i = 0; i < 3; ++i) {
    EXPECT_EQ(a.r_acc[static_cast<std::size_t>(i)], 100.0);
    EXPECT_EQ((*a.t_acc)[static_cast<std::size_t>(i)], 100.0);
  }
  EXPECT_EQ(a.auc30, 100.0);
}

TEST(Aggregate, AucFixtures) {
  EXPECT_NEAR(pc::aggregate({row("a", 10, 10)}).auc30, 100.0 * 20.0 / 30.0, 1e-9);
  const auto a = pc::aggregate({row("a", 10, 40)});
  EXPECT_EQ(a.r_acc[1], 100.0);
  EXPECT_EQ((*a.t_acc)[1], 0.0);
  EXPECT_NEAR(a.auc30, 0.0, 1e-9);
}

TEST(Aggregate, RotationOnlyRowsUseRotationForAuc) {
  const auto a = pc::aggregate({row("a", 10, std::nullopt)});
  EXPECT_NEAR(a.auc30, 100.0 * 20.0 / 30.0, 1e-9);
  EXPECT_FALSE(a.mte);
  EXPECT_FALSE(a.t_acc);
  EXPECT_THROW(pc::aggregate({}), pc::EmptyReport);
}

TEST(Aggregate, MatchesBruteForce) {
  std::mt19937_64 gen(41);
  for (int trial = 0; trial < 1000; ++trial) {
    const auto rows = random_rows(gen, 1 + gen() % 40);
    const auto a = pc::aggregate(rows);
    const auto r = reference(rows);
    EXPECT_NEAR(a.mre, r.mre, 1e-9);
    if (a.mte) {
      EXPECT_NEAR(*a.mte, r.mte, 1e-9);
    }
    EXPECT_NEAR(a.auc30, r.auc, 1e-9);
    for (std::size_t i = 0; i < 3; ++i) {
      EXPECT_EQ(a.r_acc[i], r.racc[i]);
      if (a.t_acc) {
        EXPECT_EQ((*a.t_acc)[i], r.tacc[i]);
      }
    }
    ASSERT_EQ(a.curve.size(), 30u);
    double rot_auc = 0;
    for (std::size_t i = 0; i < a.curve.size(); ++i) {
      rot_auc += a.curve[i].rot_acc / 30.0;
      EXPECT_LE(a.curve[i].joint_acc, a.curve[i].rot_acc);
      if (i > 0) {
        EXPECT_GE(a.curve[i].rot_acc, a.curve[i - 1].rot_acc);
        EXPECT_GE(a.curve[i].trans_acc, a.curve[i - 1].trans_acc);
        EXPECT_GE(a.curve[i].joint_acc, a.curve[i - 1].joint_acc);
      }
    }
    EXPECT_LE(a.auc30, rot_auc + 1e-9);
    EXPECT_LE(a.r_acc[0], a.r_acc[1]);
    EXPECT_LE(a.r_acc[1], a.r_acc[2]);
  }
}

TEST(PairErrors, Examples) {
  const pc::RelativePose gt{rz_deg(40), {1, 0, 0}};
  const auto same = pc::pair_errors(gt, gt, false);
  EXPECT_EQ(same.rot_err_deg, 0.0);
  EXPECT_EQ(*same.trans_err_deg, 0.0);
  EXPECT_FALSE(pc::pair_errors(gt, gt, true).trans_err_deg);
  EXPECT_FALSE(pc::pair_errors(gt, {rz_deg(40), Eigen::Vector3d::Zero()}, false).trans_err_deg);
  EXPECT_NEAR(pc::pair_errors({rz_deg(10), {1, 0, 0}}, gt, false).rot_err_deg, 30.0, 1e-9);
  EXPECT_EQ(*pc::pair_errors({rz_deg(10), Eigen::Vector3d::Zero()}, gt, false).trans_err_deg, 90.0);
}

TEST(SelectPairs, Examples) {
  const auto all60 = manifest_with_yaws({60, 60, 60, 60});
  EXPECT_EQ(pc::select_pairs(all60, 50, 65, 100, 1).size(), 4u);
  EXPECT_EQ(pc::select_pairs(all60, 50, 65, 2, 1).size(), 2u);
  EXPECT_TRUE(pc::select_pairs(all60, 50, 65, 0, 1).empty());
  EXPECT_THROW(pc::select_pairs(all60, 0, 0, 10, 1), pc::EmptySelection);
}

TEST(SelectPairs, FiltersDeterministicAndOrderIndependent) {
  std::vector<double> yaws;
  for (int i = 0; i < 400; ++i) yaws.push_back(i * 0.25);
  auto m = manifest_with_yaws(yaws);
  const auto sel = pc::select_pairs(m, 50, 65, 30, 7);
  ASSERT_EQ(sel.size(), 30u);
  for (const auto& id : sel) {
    const double y = m.delta_yaw(*m.find(id));
    EXPECT_GE(y, 50.0 - 1e-9);
    EXPECT_LE(y, 65.0 + 1e-9);
  }
  EXPECT_TRUE(std::is_sorted(sel.begin(), sel.end()));
  EXPECT_NE(sel, pc::select_pairs(m, 50, 65, 30, 8));

  std::mt19937_64 gen(3);
  std::shuffle(m.pairs.begin(), m.pairs.end(), gen);
  const auto reloaded = pc::manifest_from_json(pc::manifest_to_json(m));
  EXPECT_EQ(pc::select_pairs(reloaded, 50, 65, 30, 7), sel);
}

TEST(SelectPairs, EachEligiblePairEquallyLikely) {
  const auto m = manifest_with_yaws({55, 56, 57, 58, 59, 10});
  std::map<std::string, int> hits;
  for (std::uint64_t seed = 0; seed < 5000; ++seed) {
    for (const auto& id : pc::select_pairs(m, 50, 65, 2, seed)) ++hits[id];
  }
  EXPECT_EQ(hits.count("p005"), 0u);
  for (const auto& [id, n] : hits) EXPECT_NEAR(n / 5000.0, 0.4, 0.03) << id;
}

TEST(Manifest, JsonRoundTripAndValidation) {
  std::mt19937_64 gen(42);
  pc::DatasetManifest m;
  m.name = "rt";
  m.facing = pc::Facing::center;
  for (int i = 0; i < 5; ++i) {
    m.pairs.push_back({"q" + std::to_string(i), "a", "b", random_pose(gen), random_pose(gen), i % 2 == 0});
  }
  const auto j = pc::manifest_to_json(m);
  const auto back = pc::manifest_from_json(j);
  // Rotations are re-projected onto SO(3) on load, so only round-off may differ.
  ASSERT_EQ(back.pairs.size(), m.pairs.size());
  EXPECT_EQ(back.name, m.name);
  for (std::size_t i = 0; i < m.pairs.size(); ++i) {
    EXPECT_EQ(back.pairs[i].pair_id, m.pairs[i].pair_id);
    EXPECT_LE((back.pairs[i].t_a.matrix() - m.pairs[i].t_a.matrix()).cwiseAbs().maxCoeff(), 1e-15);
    EXPECT_LE((back.pairs[i].t_b.matrix() - m.pairs[i].t_b.matrix()).cwiseAbs().maxCoeff(), 1e-15);
    EXPECT_EQ(back.pairs[i].rotation_only_eval, m.pairs[i].rotation_only_eval);
  }

  auto dup = j;
  dup["pairs"][1]["pair_id"] = "q0";
  EXPECT_THROW(pc::manifest_from_json(dup), pc::InvalidManifest);
  auto bad_row = j;
  bad_row["pairs"][0]["t_a"][15] = 2.0;
  EXPECT_THROW(pc::manifest_from_json(bad_row), pc::InvalidManifest);
  auto bad_rot = j;
  bad_rot["pairs"][0]["t_a"][0] = 3.0;
  EXPECT_THROW(pc::manifest_from_json(bad_rot), pc::InvalidManifest);
  auto bad_version = j;
  bad_version["schema_version"] = 2;
  EXPECT_THROW(pc::manifest_from_json(bad_version), pc::InvalidManifest);
}

TEST(Registry, JsonRoundTrip) {
  pc::VideoRegistry reg;
  reg.videos["p"].push_back({"v0", "gen", "p0", pc::Direction::ba, {"f1", "f2", "f3"}});
  const auto j = pc::registry_to_json(reg);
  const auto back = pc::registry_from_json(j);
  EXPECT_EQ(pc::registry_to_json(back).dump(), j.dump());
  EXPECT_EQ(back.for_pair("p")[0].direction, pc::Direction::ba);
  EXPECT_TRUE(back.for_pair("missing").empty());
}

TEST(YawSweep, Buckets) {
  const auto m = manifest_with_yaws({10, 50, 64.9, 70});
  const auto yaw = pc::yaw_table(m);
  std::vector<pc::ErrorRow> rows;
  for (const auto& p : m.pairs) rows.push_back(row(p.pair_id, 3, 4));

  const auto single = pc::yaw_sweep(rows, yaw, {0, 180});
  ASSERT_EQ(single.size(), 1u);
  EXPECT_EQ(single[0].aggregates->mre, pc::aggregate(rows).mre);
  EXPECT_EQ(single[0].count, 4u);

  // Yaw 50 computed from poses is 50 up to rounding; shift the edge to pin it.
  const auto split = pc::yaw_sweep(rows, {{"p000", 10}, {"p001", 50}, {"p002", 64.9}, {"p003", 70}}, {0, 50, 65, 180});
  ASSERT_EQ(split.size(), 3u);
  EXPECT_EQ(split[0].count, 1u);
  EXPECT_EQ(split[1].count, 2u);
  EXPECT_EQ(split[2].count, 1u);

  const auto gap = pc::yaw_sweep(rows, yaw, {100, 120});
  EXPECT_EQ(gap[0].count, 0u);
  EXPECT_FALSE(gap[0].aggregates);
  EXPECT_THROW(pc::yaw_sweep(rows, yaw, {0, 50, 50}), pc::Error);
}

TEST(Report, EmitAndRoundTrip) {
  std::mt19937_64 gen(43);
  std::vector<pc::ErrorRow> rows;
  for (const auto v : {pc::Variant::pair_only, pc::Variant::medoid}) {
    for (auto r : random_rows(gen, 25)) {
      r.variant = v;
      if (v == pc::Variant::medoid) r.selected_video_id = "vid,with \"comma\"";
      rows.push_back(r);
    }
  }
  const auto rep = pc::build_report(rows);
  const auto dir = temp_dir("report");
  pc::emit_report(rep, dir, {pc::Variant::pair_only, pc::Variant::medoid});
  EXPECT_TRUE(fs::exists(dir / "summary.json"));

  const auto back = pc::read_results_csv(dir / "results.csv");
  ASSERT_EQ(back.size(), rows.size());
  const auto rep2 = pc::build_report(back);
  for (const auto& [v, a] : rep.aggregates) {
    const auto& b = rep2.aggregates.at(v);
    EXPECT_EQ(a.r_acc, b.r_acc);
    EXPECT_EQ(a.t_acc, b.t_acc);
    EXPECT_EQ(a.mre, b.mre);
    EXPECT_EQ(a.auc30, b.auc30);
  }
  EXPECT_FALSE(back[30].selected_video_id);
  EXPECT_EQ(back[31].selected_video_id, "vid,with \"comma\"");

  std::ifstream curve(dir / "curve_medoid.csv");
  std::string line;
  int n = 0;
  std::getline(curve, line);
  EXPECT_EQ(line, "threshold_deg,rot_acc,trans_acc,joint_acc");
  while (std::getline(curve, line)) ++n;
  EXPECT_EQ(n, 30);

  const auto summary = pc::json_io::read_file((dir / "summary.json").string());
  EXPECT_TRUE(summary["variants"].contains("medoid"));
  fs::remove_all(dir);
}

TEST(Report, EmptyVariantFilterWritesSummaryOnly) {
  const auto rep = pc::build_report({row("a", 1, 2)});
  const auto dir = temp_dir("report_empty");
  pc::emit_report(rep, dir, {});
  EXPECT_TRUE(fs::exists(dir / "summary.json"));
  EXPECT_FALSE(fs::exists(dir / "results.csv"));
  EXPECT_EQ(std::distance(fs::directory_iterator(dir), fs::directory_iterator{}), 1);
  fs::remove_all(dir);
}

TEST(Report, SummaryCarriesBuckets) {
  const auto m = manifest_with_yaws({10, 55});
  const auto rep = pc::build_report({row("p000", 1, 2), row("p001", 3, 4)}, pc::yaw_table(m), {0, 50, 65, 180});
  const auto j = pc::summary_to_json(rep, {pc::Variant::medoid});
  const auto& buckets = j["variants"]["medoid"]["yaw_buckets"];
  ASSERT_EQ(buckets.size(), 3u);
  EXPECT_EQ(buckets[0]["pairs"], 1);
  EXPECT_EQ(buckets[1]["pairs"], 1);
  EXPECT_TRUE(buckets[2]["metrics"].is_null());
}
