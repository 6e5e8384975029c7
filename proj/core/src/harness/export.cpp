// Copyright 2026 The DCSL Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include "dcsl/harness/export.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>
#include <sstream>

#include <nlohmann/json.hpp>

#include "dcsl/diffcore/checkpoint.hpp"
#include "dcsl/downstream/trainer.hpp"
#include "dcsl/error.hpp"

namespace dcsl {

namespace fs = std::filesystem;

namespace {

struct Moments {
  double mean = 0.0;
  double std = 0.0;
};

Moments moments(const std::vector<double>& xs) {
  Moments m;
  if (xs.empty()) return m;
  for (double x : xs) m.mean += x;
  m.mean /= static_cast<double>(xs.size());
  double var = 0.0;
  for (double x : xs) var += (x - m.mean) * (x - m.mean);
  m.std = std::sqrt(var / static_cast<double>(xs.size()));
  return m;
}

std::vector<fs::path> seed_dirs(const fs::path& dir) {
  std::vector<fs::path> out;
  if (!fs::is_directory(dir)) return out;
  for (const auto& e : fs::directory_iterator(dir)) {
    if (e.is_directory() && e.path().filename().string().rfind("seed_", 0) == 0) out.push_back(e.path());
  }
  std::sort(out.begin(), out.end());
  return out;
}

// (variant name, seed dirs) pairs in a stable order.
std::vector<std::pair<std::string, std::vector<fs::path>>> variants(const fs::path& run_dir) {
  std::vector<std::pair<std::string, std::vector<fs::path>>> out;
  auto seeds = seed_dirs(run_dir);
  if (!seeds.empty()) {
    out.emplace_back(fs::absolute(run_dir).lexically_normal().filename().string(), std::move(seeds));
    if (out.back().first.empty()) out.back().first = fs::absolute(run_dir).parent_path().filename().string();
    return out;
  }
  if (!fs::is_directory(run_dir)) return out;
  std::vector<fs::path> children;
  for (const auto& e : fs::directory_iterator(run_dir)) {
    if (e.is_directory()) children.push_back(e.path());
  }
  std::sort(children.begin(), children.end());
  for (const auto& c : children) {
    auto s = seed_dirs(c);
    if (!s.empty()) out.emplace_back(c.filename().string(), std::move(s));
  }
  return out;
}

std::vector<long> read_new_counts(const fs::path& csv) {
  std::ifstream in(csv);
  std::string line;
  std::getline(in, line);
  if (line != "length,old_count,new_count") throw FormatError("length CSV header mismatch in " + csv.string());
  std::vector<long> counts;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::stringstream ss(line);
    long len = 0, old_count = 0, new_count = 0;
    char c1, c2;
    ss >> len >> c1 >> old_count >> c2 >> new_count;
    if (ss.fail()) throw FormatError("malformed length CSV row in " + csv.string() + ": " + line);
    if (static_cast<long>(counts.size()) <= len) counts.resize(static_cast<std::size_t>(len) + 1, 0);
    counts[static_cast<std::size_t>(len)] = new_count;
  }
  return counts;
}

}  // namespace

ExportReport export_run(const fs::path& run_dir, const fs::path& out_dir) {
  ExportReport report;
  std::ostringstream curves, ablation, lengths;
  curves.precision(10);
  ablation.precision(10);
  lengths.precision(10);
  curves << "variant,mode,episode,seeds,return_mean,return_std,success_mean,success_std\n";
  ablation << "variant,mode,seeds,success_mean,success_std,timesteps_mean,timesteps_std\n";
  lengths << "variant,length,seeds,count_mean,count_std\n";

  const auto vs = variants(run_dir);
  if (vs.empty()) report.warnings.push_back("no seed_<s> directories under " + run_dir.string());

  for (const auto& [name, seeds] : vs) {
    std::vector<std::vector<long>> hist;
    for (const auto& s : seeds) {
      const fs::path csv = s / "skills" / "lengths.csv";
      if (fs::exists(csv)) {
        hist.push_back(read_new_counts(csv));
      } else {
        report.warnings.push_back(name + "/" + s.filename().string() + ": train-skills output missing");
      }
    }
    std::size_t max_len = 0;
    for (const auto& h : hist) max_len = std::max(max_len, h.size());
    for (std::size_t len = 0; len < max_len; ++len) {
      std::vector<double> xs;
      for (const auto& h : hist) xs.push_back(len < h.size() ? static_cast<double>(h[len]) : 0.0);
      const Moments m = moments(xs);
      lengths << name << ',' << len << ',' << xs.size() << ',' << m.mean << ',' << m.std << '\n';
    }

    for (const std::string mode : {"sac", "cem"}) {
      std::vector<std::vector<CurveRow>> runs;
      std::vector<double> succ, steps;
      std::vector<std::string> missing;
      for (const auto& s : seeds) {
        const fs::path dir = s / ("downstream_" + mode);
        if (!fs::exists(dir / "curve.csv") || !fs::exists(dir / "summary.json")) {
          missing.push_back(s.filename().string());
          continue;
        }
        runs.push_back(read_curve_csv(dir / "curve.csv"));
        std::ifstream in(dir / "summary.json");
        nlohmann::json j;
        try {
          in >> j;
          succ.push_back(j.at("final_success").get<double>());
          steps.push_back(j.at("final_timesteps").get<double>());
        } catch (const nlohmann::json::exception& e) {
          throw FormatError("summary " + (dir / "summary.json").string() + ": " + e.what());
        }
      }
      if (runs.empty()) continue;
      for (const auto& m : missing) report.warnings.push_back(name + "/" + m + ": train-downstream " + mode + " missing");
      std::size_t longest = 0;
      for (const auto& r : runs) longest = std::max(longest, r.size());
      for (std::size_t e = 0; e < longest; ++e) {
        std::vector<double> ret, ok;
        for (const auto& r : runs) {
          if (e < r.size()) {
            ret.push_back(r[e].episode_return);
            ok.push_back(r[e].success ? 1.0 : 0.0);
          }
        }
        const Moments mr = moments(ret), ms = moments(ok);
        curves << name << ',' << mode << ',' << e << ',' << ret.size() << ',' << mr.mean << ',' << mr.std << ','
               << ms.mean << ',' << ms.std << '\n';
      }
      const Moments ms = moments(succ), mt = moments(steps);
      ablation << name << ',' << mode << ',' << succ.size() << ',' << ms.mean << ',' << ms.std << ',' << mt.mean
               << ',' << mt.std << '\n';
    }
  }

  fs::create_directories(out_dir);
  const std::pair<const char*, std::string> files[] = {
      {"curves.csv", curves.str()}, {"ablation.csv", ablation.str()}, {"lengths.csv", lengths.str()}};
  for (const auto& [file, text] : files) {
    write_text_atomic(out_dir / file, text);
    report.written.push_back(out_dir / file);
  }
  return report;
}

}  // namespace dcsl
