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

// dcsl: command-line front end for data generation, skill extraction,
// downstream learning, evaluation, export and standalone relabeling.
//
// Exit codes: 0 success, 2 usage, 3 file or format, 4 numeric failure.

#include <cstdint>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "dcsl/dataset/dataset.hpp"
#include "dcsl/diffcore/checkpoint.hpp"
#include "dcsl/error.hpp"
#include "dcsl/harness/export.hpp"
#include "dcsl/harness/pipeline.hpp"
#include "dcsl/relabel/relabel.hpp"

namespace {

namespace fs = std::filesystem;
using namespace dcsl;

constexpr int kExitUsage = 2;
constexpr int kExitFile = 3;
constexpr int kExitNumeric = 4;

Logger stderr_logger(bool quiet) {
  if (quiet) return {};
  return [](const std::string& msg) { std::cerr << msg << '\n'; };
}

std::vector<std::uint64_t> selected_seeds(const ExperimentConfig& cfg, const std::optional<std::uint64_t>& seed) {
  if (seed) return {*seed};
  return cfg.seeds;
}

void print_summary(const GenerationSummary& s, const fs::path& prefix) {
  std::cout << "episodes " << s.episodes << " steps " << s.steps << " goal_fraction " << s.goal_fraction
            << " dropped " << s.dropped << " -> " << prefix.string() << '\n';
}

struct GenDataArgs {
  std::string config;
  std::string env = "pointmaze-medium";
  std::string tier = "expert";
  int episodes = 200;
  int horizon = 100;
  std::uint64_t seed = 0;
  std::string out;
};

int cmd_gen_data(const GenDataArgs& a, const std::optional<std::uint64_t>& seed_filter) {
  if (!a.config.empty()) {
    const ExperimentConfig cfg = ExperimentConfig::load(a.config);
    for (std::uint64_t s : selected_seeds(cfg, seed_filter)) {
      print_summary(run_gen_data(cfg, s), RunLayout::of(cfg, s).dataset(cfg, s));
    }
    return 0;
  }
  const fs::path prefix =
      a.out.empty() ? fs::path("data") / (a.env + "-" + a.tier + "-s" + std::to_string(a.seed)) : fs::path(a.out);
  print_summary(generate_data(a.env, a.tier, a.episodes, a.horizon, a.seed, dataset_prefix(prefix)),
                dataset_prefix(prefix));
  return 0;
}

int cmd_train_skills(const std::string& config, const std::optional<std::uint64_t>& seed, bool quiet) {
  const ExperimentConfig cfg = ExperimentConfig::load(config);
  for (std::uint64_t s : selected_seeds(cfg, seed)) {
    const SkillStageResult r = run_train_skills(cfg, s, stderr_logger(quiet));
    std::cout << "seed " << s << " steps " << r.steps << " final_total " << r.final_loss.total << " relabels "
              << r.relabels.size();
    if (!r.relabels.empty()) {
      std::cout << " mean_length " << r.relabels.back().mean << " frac_interior " << r.relabels.back().frac_interior;
    }
    std::cout << " -> " << RunLayout::of(cfg, s).skill_model().string() << '\n';
  }
  return 0;
}

int cmd_train_downstream(const std::string& config, const std::string& mode_name,
                         const std::optional<std::uint64_t>& seed, bool quiet) {
  const DownstreamMode mode = parse_mode(mode_name);
  const ExperimentConfig cfg = ExperimentConfig::load(config);
  for (std::uint64_t s : selected_seeds(cfg, seed)) {
    const DownstreamStageResult r = run_train_downstream(cfg, s, mode, stderr_logger(quiet));
    std::cout << "seed " << s << " mode " << mode_name << " episodes " << r.rows.size() << " final_success "
              << r.final_success << " final_timesteps " << r.final_timesteps << " -> "
              << RunLayout::of(cfg, s).policy(mode).string() << '\n';
  }
  return 0;
}

int cmd_eval(const std::string& checkpoint, const EvalOptions& opts, const std::string& out) {
  const EvalResult r = evaluate_checkpoint(dataset_prefix(checkpoint), opts);
  const std::string text = r.to_json().dump(2) + "\n";
  if (!out.empty()) {
    if (fs::path(out).has_parent_path()) fs::create_directories(fs::path(out).parent_path());
    write_text_atomic(out, text);
  }
  std::cout << text;
  return 0;
}

int cmd_export(const std::string& run, const std::string& out) {
  const fs::path out_dir = out.empty() ? fs::path(run) / "export" : fs::path(out);
  const ExportReport r = export_run(run, out_dir);
  for (const auto& w : r.warnings) std::cerr << "warning: " << w << '\n';
  for (const auto& p : r.written) std::cout << p.string() << '\n';
  return 0;
}

struct RelabelArgs {
  std::string skills;
  std::string data;
  std::string out;
  std::string report;
  RelabelConfig cfg;
};

int cmd_relabel(const RelabelArgs& a) {
  if (!fs::exists(manifest_path(dataset_prefix(a.skills)))) throw FileError("skill checkpoint not found: " + a.skills);
  const SkillModel model = SkillModel::load(dataset_prefix(a.skills));
  TrajectoryDataset ds = load_dataset(dataset_prefix(a.data));
  const RelabelReport r = relabel_dataset(model, ds, a.cfg, 1);
  save_dataset(ds, dataset_prefix(a.out));
  if (!a.report.empty()) {
    const RelabelReport reports[] = {r};
    write_relabel_csv(a.report, reports);
  }
  std::cout << "relabeled " << r.relabeled << " mean " << r.mean << " median " << r.median << " min " << r.min
            << " max " << r.max << " frac_interior " << r.frac_interior << " -> " << dataset_prefix(a.out).string()
            << '\n';
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"dynamic contrastive skill learning toolkit"};
  app.require_subcommand(1);
  app.set_version_flag("--version", dcsl::version());

  std::optional<std::uint64_t> seed_filter;
  bool quiet = false;

  GenDataArgs gen;
  auto* gen_cmd = app.add_subcommand("gen-data", "generate an offline dataset");
  gen_cmd->add_option("--config", gen.config, "experiment config; writes each seed's run directory");
  gen_cmd->add_option("--env", gen.env)->check(CLI::IsMember(dcsl::env_names()));
  gen_cmd->add_option("--tier", gen.tier)->check(CLI::IsMember({"expert", "mixed", "replay"}));
  gen_cmd->add_option("--episodes", gen.episodes)->check(CLI::Range(1, 1000000000));
  gen_cmd->add_option("--horizon", gen.horizon, "steps per episode, 0 for the environment cap")
      ->check(CLI::NonNegativeNumber);
  gen_cmd->add_option("--seed", gen.seed);
  gen_cmd->add_option("--out", gen.out, "dataset prefix");

  std::string config;
  auto* skills_cmd = app.add_subcommand("train-skills", "train the skill model for each seed");
  skills_cmd->add_option("--config", config)->required();
  skills_cmd->add_option("--seed", seed_filter, "run only this seed");
  skills_cmd->add_flag("--quiet", quiet);

  std::string mode;
  auto* down_cmd = app.add_subcommand("train-downstream", "train a high-level learner on the skills");
  down_cmd->add_option("--config", config)->required();
  down_cmd->add_option("--mode", mode, "sac or cem")->required();
  down_cmd->add_option("--seed", seed_filter, "run only this seed");
  down_cmd->add_flag("--quiet", quiet);

  std::string checkpoint, eval_out;
  dcsl::EvalOptions eval;
  std::string eval_skills;
  auto* eval_cmd = app.add_subcommand("eval", "evaluate a checkpoint and print metrics JSON");
  eval_cmd->add_option("--checkpoint", checkpoint)->required();
  eval_cmd->add_option("--env", eval.env)->check(CLI::IsMember(dcsl::env_names()));
  eval_cmd->add_option("--episodes", eval.episodes)->check(CLI::Range(1, 1000000000));
  eval_cmd->add_option("--seed", eval.seed);
  eval_cmd->add_option("--skills", eval_skills, "skill checkpoint overriding the recorded one");
  eval_cmd->add_flag("--random", eval.random_skills, "uniformly random skills");
  eval_cmd->add_flag("--stochastic", eval.stochastic, "sample from the high-level policy");
  eval_cmd->add_option("--out", eval_out, "also write the JSON here");

  std::string run_dir, export_out;
  auto* export_cmd = app.add_subcommand("export", "write plot-ready CSVs for a run directory");
  export_cmd->add_option("--run", run_dir)->required();
  export_cmd->add_option("--out", export_out, "output directory, default <run>/export");

  RelabelArgs rl;
  auto* rl_cmd = app.add_subcommand("relabel", "rewrite a dataset's skill lengths with a trained model");
  rl_cmd->add_option("--skills", rl.skills)->required();
  rl_cmd->add_option("--data", rl.data)->required();
  rl_cmd->add_option("--out", rl.out)->required();
  rl_cmd->add_option("--epsilon", rl.cfg.epsilon);
  rl_cmd->add_option("--delta-min", rl.cfg.delta_min)->check(CLI::Range(1, 1000000000));
  rl_cmd->add_option("--delta-max", rl.cfg.delta_max)->check(CLI::Range(1, 1000000000));
  rl_cmd->add_flag("--set-max", rl.cfg.set_max);
  rl_cmd->add_option("--report", rl.report, "relabel report CSV");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForVersion& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kExitUsage;
  }

  try {
    if (gen_cmd->parsed()) {
      std::optional<std::uint64_t> filter;
      if (!gen.config.empty() && gen_cmd->count("--seed") > 0) filter = gen.seed;
      return cmd_gen_data(gen, filter);
    }
    if (skills_cmd->parsed()) return cmd_train_skills(config, seed_filter, quiet);
    if (down_cmd->parsed()) return cmd_train_downstream(config, mode, seed_filter, quiet);
    if (eval_cmd->parsed()) {
      eval.skills = eval_skills.empty() ? fs::path() : dataset_prefix(eval_skills);
      return cmd_eval(checkpoint, eval, eval_out);
    }
    if (export_cmd->parsed()) return cmd_export(run_dir, export_out);
    if (rl_cmd->parsed()) return cmd_relabel(rl);
  } catch (const dcsl::UsageError& e) {
    std::cerr << "usage error: " << e.what() << '\n';
    return kExitUsage;
  } catch (const dcsl::ConfigError& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return kExitUsage;
  } catch (const dcsl::FileError& e) {
    std::cerr << "file error: " << e.what() << '\n';
    return kExitFile;
  } catch (const dcsl::FormatError& e) {
    std::cerr << "format error: " << e.what() << '\n';
    return kExitFile;
  } catch (const dcsl::DatasetError& e) {
    std::cerr << "dataset error: " << e.what() << '\n';
    return kExitFile;
  } catch (const dcsl::TrainingError& e) {
    std::cerr << "numeric failure: " << e.what() << '\n';
    return kExitNumeric;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return kExitUsage;
}
