#pragma once

// Report files written by a run:
//   results.csv        pair_id,variant,rot_err_deg,trans_err_deg,selected_video_id
//   summary.json       aggregates (and yaw buckets) per variant
//   curve_<variant>.csv  threshold_deg,rot_acc,trans_acc,joint_acc for 1..30
// Numbers in CSV files use 17 significant digits so parsing them back
// reproduces the doubles exactly.

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include "pose_consensus/benchmark.hpp"

namespace pose_consensus {

struct MetricsReport {
  std::vector<ErrorRow> rows;
  std::map<Variant, Aggregates> aggregates;
  std::map<Variant, std::vector<YawBucket>> buckets;
  std::vector<double> bucket_edges_deg;
};

// Aggregates rows per variant; buckets by yaw when edges are given.
inline MetricsReport build_report(std::vector<ErrorRow> rows, const std::map<std::string, double>& yaw_by_pair = {},
                                  const std::vector<double>& bucket_edges_deg = {}) {
  MetricsReport rep;
  std::stable_sort(rows.begin(), rows.end(), [](const ErrorRow& a, const ErrorRow& b) {
    return a.pair_id != b.pair_id ? a.pair_id < b.pair_id : a.variant < b.variant;
  });
  std::map<Variant, std::vector<ErrorRow>> by_variant;
  for (const auto& r : rows) by_variant[r.variant].push_back(r);
  for (const auto& [v, list] : by_variant) {
    rep.aggregates[v] = aggregate(list);
    if (bucket_edges_deg.size() >= 2) rep.buckets[v] = yaw_sweep(list, yaw_by_pair, bucket_edges_deg);
  }
  rep.rows = std::move(rows);
  rep.bucket_edges_deg = bucket_edges_deg;
  return rep;
}

namespace detail {

inline std::string format_double(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

inline std::string csv_field(const std::string& s) {
  if (s.find_first_of(",\"\n") == std::string::npos) return s;
  std::string out = "\"";
  for (const char c : s) {
    if (c == '"') out += '"';
    out += c;
  }
  return out + "\"";
}

inline std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> fields;
  std::string cur;
  bool quoted = false;
  for (std::size_t i = 0; i < line.size(); ++i) {
    const char c = line[i];
    if (quoted) {
      if (c == '"' && i + 1 < line.size() && line[i + 1] == '"') {
        cur += '"';
        ++i;
      } else if (c == '"') {
        quoted = false;
      } else {
        cur += c;
      }
    } else if (c == '"') {
      quoted = true;
    } else if (c == ',') {
      fields.push_back(std::move(cur));
      cur.clear();
    } else {
      cur += c;
    }
  }
  fields.push_back(std::move(cur));
  return fields;
}

inline std::ofstream open_out(const std::filesystem::path& p) {
  std::ofstream out(p, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot write " + p.string());
  return out;
}

inline json_io::Json aggregates_to_json(const Aggregates& a) {
  json_io::Json j;
  j["pairs"] = a.count;
  j["MRE"] = a.mre;
  j["MTE"] = a.mte ? json_io::Json(*a.mte) : json_io::Json(nullptr);
  json_io::Json racc, tacc;
  for (std::size_t i = 0; i < kAccuracyThresholds.size(); ++i) {
    const std::string key = std::to_string(kAccuracyThresholds[i]);
    racc[key] = a.r_acc[i];
    tacc[key] = a.t_acc ? json_io::Json((*a.t_acc)[i]) : json_io::Json(nullptr);
  }
  j["R_acc"] = racc;
  j["t_acc"] = tacc;
  j["AUC30"] = a.auc30;
  j["AUC30_mean"] = a.auc30_mean;
  return j;
}

}  // namespace detail

inline void write_results_csv(const std::filesystem::path& path, const std::vector<ErrorRow>& rows) {
  auto out = detail::open_out(path);
  out << "pair_id,variant,rot_err_deg,trans_err_deg,selected_video_id\n";
  for (const auto& r : rows) {
    out << detail::csv_field(r.pair_id) << ',' << to_string(r.variant) << ',' << detail::format_double(r.rot_err_deg)
        << ',' << (r.trans_err_deg ? detail::format_double(*r.trans_err_deg) : "") << ','
        << detail::csv_field(r.selected_video_id.value_or("")) << '\n';
  }
  if (!out.flush()) throw IoError("cannot write " + path.string());
}

inline std::vector<ErrorRow> read_results_csv(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open " + path.string());
  std::string line;
  std::getline(in, line);  // header
  std::vector<ErrorRow> rows;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    const auto f = detail::split_csv_line(line);
    if (f.size() != 5) throw IoError("malformed results row: " + line);
    ErrorRow r;
    r.pair_id = f[0];
    const auto v = parse_variant(f[1]);
    if (!v) throw IoError("unknown variant in results: " + f[1]);
    r.variant = *v;
    r.rot_err_deg = std::stod(f[2]);
    if (!f[3].empty()) r.trans_err_deg = std::stod(f[3]);
    if (!f[4].empty()) r.selected_video_id = f[4];
    rows.push_back(std::move(r));
  }
  return rows;
}

inline void write_curve_csv(const std::filesystem::path& path, const Aggregates& a) {
  auto out = detail::open_out(path);
  out << "threshold_deg,rot_acc,trans_acc,joint_acc\n";
  for (const auto& p : a.curve) {
    out << p.threshold_deg << ',' << detail::format_double(p.rot_acc) << ',' << detail::format_double(p.trans_acc)
        << ',' << detail::format_double(p.joint_acc) << '\n';
  }
  if (!out.flush()) throw IoError("cannot write " + path.string());
}

inline json_io::Json summary_to_json(const MetricsReport& rep, const std::vector<Variant>& variants) {
  json_io::Json j;
  j["schema_version"] = 1;
  json_io::Json vs = json_io::Json::object();
  for (const Variant v : variants) {
    const auto it = rep.aggregates.find(v);
    if (it == rep.aggregates.end()) continue;
    json_io::Json jv = detail::aggregates_to_json(it->second);
    if (const auto b = rep.buckets.find(v); b != rep.buckets.end()) {
      json_io::Json arr = json_io::Json::array();
      for (const auto& bucket : b->second) {
        json_io::Json jb;
        jb["yaw_lo_deg"] = bucket.lo_deg;
        jb["yaw_hi_deg"] = bucket.hi_deg;
        jb["pairs"] = bucket.count;
        jb["metrics"] = bucket.aggregates ? detail::aggregates_to_json(*bucket.aggregates) : json_io::Json(nullptr);
        arr.push_back(jb);
      }
      jv["yaw_buckets"] = arr;
    }
    vs[to_string(v)] = jv;
  }
  j["variants"] = vs;
  return j;
}

// Writes summary.json always; results.csv and one curve file per variant
// only for the variants listed in `variants`.
inline void emit_report(const MetricsReport& rep, const std::filesystem::path& out_dir,
                        const std::vector<Variant>& variants) {
  std::error_code ec;
  std::filesystem::create_directories(out_dir, ec);
  if (ec) throw IoError("cannot create " + out_dir.string() + ": " + ec.message());
  json_io::write_file((out_dir / "summary.json").string(), summary_to_json(rep, variants));
  if (variants.empty()) return;
  std::vector<ErrorRow> rows;
  for (const auto& r : rep.rows) {
    if (std::find(variants.begin(), variants.end(), r.variant) != variants.end()) rows.push_back(r);
  }
  write_results_csv(out_dir / "results.csv", rows);
  for (const Variant v : variants) {
    if (const auto it = rep.aggregates.find(v); it != rep.aggregates.end()) {
      write_curve_csv(out_dir / (std::string("curve_") + to_string(v) + ".csv"), it->second);
    }
  }
}

}  // namespace pose_consensus
